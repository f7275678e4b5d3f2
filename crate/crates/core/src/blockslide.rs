//! Exact block-slide maps on the torus and the gadgets that realise grid permutations.
//!
//! A horizontal slide `H(s)` sends `(x₁, x₂)` to `(x₁ + s(x₂), x₂)` and a
//! vertical slide `V(s)` sends it to `(x₁, x₂ + s(x₁))`, both mod 1, where `s`
//! is a rational step function. Maps are lists of slides applied left to right.
//!
//! The gadgets work on the `kq × s` grid and commute with the shift by `1/q`:
//!
//! - [`column_interchange`] swaps column residues `i` and `i+1` in every block;
//! - [`double_two_cycle`] swaps `(0,s−1) ↔ (1,s−1)` and `(2,s−1) ↔ (3,s−1)`;
//! - [`transposition`] swaps `(0,s−1)` with any other atom `(i,j)`.
//!
//! The last two need four columns per block. [`permutation_to_blockslide`]
//! refines narrower grids horizontally before decomposing.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abc::{Grid, GridPermutation};
use crate::par;

pub type Q = Ratio<i64>;

/// Smallest number of columns per block the gadgets handle.
pub const K_MIN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockSlideError {
    #[error("atom ({0},{1}) cannot be swapped with the base atom")]
    BaseAtom(usize, usize),
    #[error("gadget needs at least {K_MIN} columns per block, got k={0}")]
    NarrowBlock(usize),
    #[error("atom ({col},{row}) outside the {k}x{s} block")]
    OutOfRange { col: usize, row: usize, k: usize, s: usize },
    #[error("permutation does not commute with rotation by 1/{0}")]
    NotCommuting(usize),
    #[error("permutation moves cells between blocks of width 1/{0}")]
    Twisted(usize),
    #[error("map does not act on the {cols}x{rows} grid by cell translations")]
    NotGridMap { cols: usize, rows: usize },
    #[error("bad step function: {0}")]
    Step(String),
}

/// Reduces into `[0, 1)`.
pub fn frac(x: Q) -> Q {
    x - x.floor()
}

/// Piecewise constant function on `[0, 1)`: `values[i]` on `[breakpoints[i], breakpoints[i+1])`,
/// the last value running to 1. `breakpoints[0]` is always 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StepFunction {
    pub breakpoints: Vec<Q>,
    pub values: Vec<Q>,
    /// The function is `1/N`-periodic.
    pub period_divisor: u64,
}

impl StepFunction {
    pub fn constant(c: Q) -> Self {
        StepFunction { breakpoints: vec![Q::zero()], values: vec![c], period_divisor: 1 }.with_natural_period()
    }

    /// `f(c / n)` on `[c/n, (c+1)/n)`.
    pub fn by_cell(n: usize, f: impl Fn(usize) -> Q) -> Self {
        let mut bp = Vec::new();
        let mut vals: Vec<Q> = Vec::new();
        for c in 0..n {
            let v = f(c);
            if vals.last() != Some(&v) {
                bp.push(Q::new(c as i64, n as i64));
                vals.push(v);
            }
        }
        StepFunction { breakpoints: bp, values: vals, period_divisor: 1 }.with_natural_period()
    }

    pub fn new(breakpoints: Vec<Q>, values: Vec<Q>) -> Result<Self, BlockSlideError> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() || breakpoints[0] != Q::zero() {
            return Err(BlockSlideError::Step("breakpoints must start at 0 and match values".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) || breakpoints.last().map_or(false, |b| *b >= Q::one()) {
            return Err(BlockSlideError::Step("breakpoints must increase inside [0,1)".into()));
        }
        Ok(StepFunction { breakpoints, values, period_divisor: 1 }.canonical())
    }

    fn canonical(self) -> Self {
        let mut bp = Vec::new();
        let mut vals: Vec<Q> = Vec::new();
        for (b, v) in self.breakpoints.into_iter().zip(self.values) {
            if vals.last() != Some(&v) {
                bp.push(b);
                vals.push(v);
            }
        }
        StepFunction { breakpoints: bp, values: vals, period_divisor: 1 }.with_natural_period()
    }

    fn with_natural_period(mut self) -> Self {
        let lcm = self.breakpoints.iter().fold(1i64, |acc, b| acc.lcm(b.denom()));
        self.period_divisor = (1..=lcm)
            .rev()
            .filter(|d| lcm % d == 0)
            .find(|&d| {
                let shift = Q::new(1, d);
                self.breakpoints
                    .iter()
                    .flat_map(|&b| [b, frac(b - shift)])
                    .all(|p| self.eval(frac(p + shift)) == self.eval(p))
            })
            .unwrap_or(1) as u64;
        self
    }

    pub fn eval(&self, x: Q) -> Q {
        let i = self.breakpoints.partition_point(|b| *b <= x);
        self.values[i.saturating_sub(1)]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn neg(&self) -> Self {
        StepFunction {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            period_divisor: self.period_divisor,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut bp: Vec<Q> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        bp.sort();
        bp.dedup();
        let vals = bp.iter().map(|&b| self.eval(b) + other.eval(b)).collect();
        StepFunction { breakpoints: bp, values: vals, period_divisor: 1 }.canonical()
    }

    /// `x ↦ self(x − t)`.
    pub fn shifted(&self, t: Q) -> Self {
        let mut pairs: Vec<(Q, Q)> = self.breakpoints.iter().map(|&b| (frac(b + t), self.eval(b))).collect();
        pairs.sort();
        let mut bp: Vec<Q> = pairs.iter().map(|p| p.0).collect();
        let mut vals: Vec<Q> = pairs.iter().map(|p| p.1).collect();
        if bp[0] != Q::zero() {
            bp.insert(0, Q::zero());
            vals.insert(0, self.eval(frac(-t)));
        }
        StepFunction { breakpoints: bp, values: vals, period_divisor: 1 }.canonical()
    }

    /// Points of `[0,1)` where the value actually changes, including a wrap jump at 0.
    pub fn jumps(&self) -> Vec<Q> {
        let n = self.values.len();
        (0..n).filter(|&i| self.values[i] != self.values[(i + n - 1) % n]).map(|i| self.breakpoints[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// `(x₁ + s(x₂), x₂)`.
    H,
    /// `(x₁, x₂ + s(x₁))`.
    V,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slide {
    pub axis: Axis,
    pub f: StepFunction,
}

impl Slide {
    pub fn h(f: StepFunction) -> Self {
        Slide { axis: Axis::H, f }
    }

    pub fn v(f: StepFunction) -> Self {
        Slide { axis: Axis::V, f }
    }

    pub fn apply(&self, (x1, x2): (Q, Q)) -> (Q, Q) {
        match self.axis {
            Axis::H => (frac(x1 + self.f.eval(x2)), x2),
            Axis::V => (x1, frac(x2 + self.f.eval(x1))),
        }
    }

    pub fn inverse(&self) -> Self {
        Slide { axis: self.axis, f: self.f.neg() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BlockSlideMap {
    pub steps: Vec<Slide>,
}

impl BlockSlideMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply(&self, pt: (Q, Q)) -> (Q, Q) {
        self.steps.iter().fold((frac(pt.0), frac(pt.1)), |p, s| s.apply(p))
    }

    pub fn inverse(&self) -> Self {
        BlockSlideMap { steps: self.steps.iter().rev().map(Slide::inverse).collect() }
    }

    /// `other` after `self`.
    pub fn then(mut self, other: &BlockSlideMap) -> Self {
        self.steps.extend(other.steps.iter().cloned());
        self
    }

    /// Conjugate `c^{-1} ∘ self ∘ c` (apply `c` first).
    pub fn conjugated_by(&self, c: &BlockSlideMap) -> Self {
        c.clone().then(self).then(&c.inverse())
    }

    /// Fuses neighbouring slides along the same axis (reducing values mod 1) and drops zero slides.
    pub fn merged(&self) -> Self {
        let mut out: Vec<Slide> = Vec::new();
        for s in &self.steps {
            match out.last_mut() {
                Some(last) if last.axis == s.axis => last.f = reduce_mod1(&last.f.add(&s.f)),
                _ => out.push(Slide { axis: s.axis, f: reduce_mod1(&s.f) }),
            }
            if out.last().map_or(false, |l| l.f.is_zero()) {
                out.pop();
            }
        }
        BlockSlideMap { steps: out }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The induced cell permutation, or an error if some cell is not translated rigidly onto a cell.
    pub fn atom_permutation(&self, grid: Grid, period: usize) -> Result<GridPermutation, BlockSlideError> {
        let not_grid = BlockSlideError::NotGridMap { cols: grid.cols, rows: grid.rows };
        let (cw, rh) = (Q::new(1, grid.cols as i64), Q::new(1, grid.rows as i64));
        let probes = [(1, 2), (1, 5), (4, 5)];
        let images = par::map_range(grid.len(), |a| {
            let (c, r) = (grid.col(a) as i64, grid.row(a) as i64);
            let mut shift = None;
            for &(nx, dx) in &probes {
                for &(ny, dy) in &probes {
                    let p = (cw * c + cw * Q::new(nx, dx), rh * r + rh * Q::new(ny, dy));
                    let img = self.apply(p);
                    let d = (frac(img.0 - p.0), frac(img.1 - p.1));
                    if *shift.get_or_insert(d) != d {
                        return None;
                    }
                }
            }
            let (dx, dy) = shift?;
            let (nc, nr) = (dx / cw, dy / rh);
            if !nc.is_integer() || !nr.is_integer() {
                return None;
            }
            let col = (c + nc.to_integer()).rem_euclid(grid.cols as i64) as usize;
            let row = (r + nr.to_integer()).rem_euclid(grid.rows as i64) as usize;
            Some(grid.atom(col, row))
        });
        let map = images.into_iter().collect::<Option<Vec<_>>>().ok_or(not_grid.clone())?;
        GridPermutation::new(grid, period, map).map_err(|_| not_grid)
    }
}

fn reduce_mod1(f: &StepFunction) -> StepFunction {
    let values: Vec<Q> = f
        .values
        .iter()
        .map(|&v| {
            let r = frac(v);
            if r > Q::new(1, 2) {
                r - Q::one()
            } else {
                r
            }
        })
        .collect();
    StepFunction { breakpoints: f.breakpoints.clone(), values, period_divisor: 1 }.canonical()
}

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Column residue of cell `c` on an `n = k·q` column grid.
fn residue(c: usize, k: usize) -> usize {
    c % k
}

/// `f_{k,q}`: swaps column residues 0 and 1 in every block of `k` columns.
fn interchange_01(k: usize, qq: usize) -> BlockSlideMap {
    let kq = (k * qq) as i64;
    let n = k * qq;
    let s1 = StepFunction::by_cell(2, |r| if r == 0 { Q::zero() } else { q(1, kq) });
    let s2 = StepFunction::by_cell(2, |r| if r == 0 { q(1, kq) } else { Q::zero() });
    let s3 = StepFunction::by_cell(n, |c| if residue(c, k) < 1 { Q::zero() } else { q(1, 2) });
    let s4 = StepFunction::by_cell(n, |c| if residue(c, k) < 2 { Q::zero() } else { q(1, 2) });
    let half = StepFunction::constant(q(1, 2));
    BlockSlideMap {
        steps: vec![
            Slide::h(s1.neg()),
            Slide::v(s3.clone()),
            Slide::h(s2.clone()),
            Slide::v(half),
            Slide::h(s2.neg()),
            Slide::v(s3),
            Slide::h(s1),
            Slide::v(s4),
        ],
    }
}

fn shift_h(t: Q) -> BlockSlideMap {
    BlockSlideMap { steps: vec![Slide::h(StepFunction::constant(t))] }
}

/// Swaps column residues `i` and `i + 1` of every block (all rows).
pub fn column_interchange(i: usize, k: usize, qq: usize) -> BlockSlideMap {
    let base = interchange_01(k, qq);
    if i == 0 {
        return base.merged();
    }
    let t = q(i as i64, (k * qq) as i64);
    shift_h(-t).then(&base).then(&shift_h(t)).merged()
}

/// Swaps `(0,s−1) ↔ (1,s−1)` and `(2,s−1) ↔ (3,s−1)` in every block; needs `k ≥ 4`.
pub fn double_two_cycle(k: usize, qq: usize, s: usize) -> Result<BlockSlideMap, BlockSlideError> {
    if k < K_MIN {
        return Err(BlockSlideError::NarrowBlock(k));
    }
    Ok(double_two_cycle_raw(k, qq, s).merged())
}

fn double_two_cycle_raw(k: usize, qq: usize, s: usize) -> BlockSlideMap {
    let kq = (k * qq) as i64;
    let s5 = StepFunction::by_cell(s, |r| if r == s - 1 { q(2, kq) } else { Q::zero() });
    let f = interchange_01(k, qq);
    f.clone()
        .then(&BlockSlideMap { steps: vec![Slide::h(s5.neg())] })
        .then(&f)
        .then(&BlockSlideMap { steps: vec![Slide::h(s5)] })
}

/// Swaps `(0,s−1) ↔ (1,s−1)` in every block, working on the doubled `2s`-row grid.
fn base_transposition(k: usize, qq: usize, s: usize) -> BlockSlideMap {
    let kq = (k * qq) as i64;
    let n = k * qq;
    let s6 = StepFunction::by_cell(2 * s, |r| if r == 2 * s - 2 { q(2, kq) } else { Q::zero() });
    let s7 = StepFunction::by_cell(n, |c| if (2..4).contains(&residue(c, k)) { q(1, 2 * s as i64) } else { Q::zero() });
    let open = BlockSlideMap { steps: vec![Slide::h(s6), Slide::v(s7)] };
    open.clone().then(&double_two_cycle_raw(k, qq, 2 * s)).then(&open.inverse())
}

/// Swaps the base atom `(0, s−1)` with `(i, j)` in every block.
pub fn transposition(i: usize, j: usize, k: usize, qq: usize, s: usize) -> Result<BlockSlideMap, BlockSlideError> {
    if k < K_MIN {
        return Err(BlockSlideError::NarrowBlock(k));
    }
    if i >= k || j >= s {
        return Err(BlockSlideError::OutOfRange { col: i, row: j, k, s });
    }
    if (i, j) == (0, s - 1) {
        return Err(BlockSlideError::BaseAtom(i, j));
    }
    let t = base_transposition(k, qq, s);
    let n = k * qq;
    let carry = if j != s - 1 {
        // Row j slides so that column i lands on residue 1; residue-1 columns then rotate up to row s−1.
        let dc = q(1 - i as i64, n as i64);
        let row = StepFunction::by_cell(s, |r| if r == j { dc } else { Q::zero() });
        let up = q((s - 1 - j) as i64, s as i64);
        let col = StepFunction::by_cell(n, |c| if residue(c, k) == 1 { up } else { Q::zero() });
        BlockSlideMap { steps: vec![Slide::h(row), Slide::v(col)] }
    } else {
        // Top row: bubble residue i down to residue 1 with interchanges that never touch residue 0.
        (1..i).rev().fold(BlockSlideMap::identity(), |acc, m| acc.then(&column_interchange(m, k, qq)))
    };
    Ok(t.conjugated_by(&carry).merged())
}

/// Realises an untwisted, rotation-commuting cell permutation as a block-slide map.
///
/// Blocks narrower than [`K_MIN`] columns are split into `⌈K_MIN/k⌉` sub-columns
/// first. The permutation of one block is factored into transpositions with
/// the base atom `A = (0, s−1)`: a cycle `A → x₂ → … → x_m → A` is
/// `(A x₂), …, (A x_m)` applied in order, and a cycle avoiding `A` is
/// conjugated by `(A x₁)`.
pub fn permutation_to_blockslide(perm: &GridPermutation) -> Result<BlockSlideMap, BlockSlideError> {
    let qq = perm.period;
    if !perm.commutes_with_rotation() {
        return Err(BlockSlideError::NotCommuting(qq));
    }
    if !perm.is_untwisted() {
        return Err(BlockSlideError::Twisted(qq));
    }
    if perm.is_identity() {
        return Ok(BlockSlideMap::identity());
    }
    let k0 = perm.block();
    let m = K_MIN.div_ceil(k0);
    let fine = if m > 1 {
        perm.refine(Grid::new(perm.grid.cols * m, perm.grid.rows)).expect("horizontal refinement")
    } else {
        perm.clone()
    };
    let (k, s, g) = (k0 * m, fine.grid.rows, fine.grid);
    let cell = |c: usize, r: usize| r * k + c;
    let image = |x: usize| {
        let a = fine.apply(g.atom(x % k, x / k));
        cell(g.col(a), g.row(a))
    };
    let base = cell(0, s - 1);
    let mut seen = vec![false; k * s];
    let mut swaps = Vec::new();
    for start in std::iter::once(base).chain(0..k * s) {
        if seen[start] {
            continue;
        }
        let mut cyc = vec![start];
        seen[start] = true;
        let mut x = image(start);
        while x != start {
            seen[x] = true;
            cyc.push(x);
            x = image(x);
        }
        if cyc.len() == 1 {
            continue;
        }
        if start == base {
            swaps.extend(cyc[1..].iter().copied());
        } else {
            swaps.push(cyc[0]);
            swaps.extend(cyc[1..].iter().copied());
            swaps.push(cyc[0]);
        }
    }
    let mut out = BlockSlideMap::identity();
    for x in swaps {
        out = out.then(&transposition(x % k, x / k, k, qq, s)?);
    }
    Ok(out.merged())
}

/// Serialised form: `{axis, breakpoints, values}` with rationals as `"n/d"` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlideRecord {
    pub axis: Axis,
    pub breakpoints: Vec<String>,
    pub values: Vec<String>,
}

/// `"n/d"`.
pub fn q_to_string(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"n/d"` or an integer.
pub fn q_parse(s: &str) -> Result<Q, BlockSlideError> {
    let bad = || BlockSlideError::Step(format!("bad rational {s:?}"));
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: i64 = n.trim().parse().map_err(|_| bad())?;
    let d: i64 = d.trim().parse().map_err(|_| bad())?;
    if d == 0 {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

impl BlockSlideMap {
    pub fn to_records(&self) -> Vec<SlideRecord> {
        self.steps
            .iter()
            .map(|s| SlideRecord {
                axis: s.axis,
                breakpoints: s.f.breakpoints.iter().map(q_to_string).collect(),
                values: s.f.values.iter().map(q_to_string).collect(),
            })
            .collect()
    }

    pub fn from_records(recs: &[SlideRecord]) -> Result<Self, BlockSlideError> {
        let steps = recs
            .iter()
            .map(|r| {
                let bp = r.breakpoints.iter().map(|s| q_parse(s)).collect::<Result<Vec<_>, _>>()?;
                let vals = r.values.iter().map(|s| q_parse(s)).collect::<Result<Vec<_>, _>>()?;
                Ok(Slide { axis: r.axis, f: StepFunction::new(bp, vals)? })
            })
            .collect::<Result<Vec<_>, BlockSlideError>>()?;
        Ok(BlockSlideMap { steps })
    }
}

impl fmt::Display for BlockSlideMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            let tag = match s.axis {
                Axis::H => 'H',
                Axis::V => 'V',
            };
            let parts: Vec<String> =
                s.f.breakpoints.iter().zip(&s.f.values).map(|(b, v)| format!("{}:{}", q_to_string(b), q_to_string(v))).collect();
            writeln!(f, "{tag}[{}]", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Largest absolute value taken by the function.
pub fn sup_abs(f: &StepFunction) -> Q {
    f.values.iter().map(|v| v.abs()).max().unwrap_or_else(Q::zero)
}
