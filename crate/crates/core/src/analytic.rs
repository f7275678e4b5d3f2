//! Trigonometric approximants of block-slide maps and the finite-stage
//! analytic conjugates `T_n^(a) = H_n^(a) ∘ R^{α_n} ∘ (H_n^(a))^{-1}`.
//!
//! Step functions are replaced by truncated Fourier series of a smoothed
//! copy. The smoothing uses the `C^∞` transition `ψ(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`
//! placed over a short window around each jump, so the smoothed function
//! equals the step function away from the jumps and only the truncation
//! error remains there. Coefficients come from an FFT of the smoothed
//! function, and the number of harmonics doubles until a sampled sup error
//! outside the windows drops below the target.
//!
//! A series in `cos(2πjNx)`, `sin(2πjNx)` continues to the complex plane,
//! where it grows like `e^{2πmN|Im z|}`. Strip evaluations that would leave
//! the double range report [`AnalyticError::Range`] instead of returning
//! infinities.
//!
//! All sampling helpers take an explicit seed and collect their results in
//! input order, so every reported number is reproducible.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abc::GridPermutation;
use crate::blockslide::{self, Axis, BlockSlideError, BlockSlideMap, StepFunction, Q};
use crate::par;
use crate::params::{advance, BigRatio, ParamsError, StageParams};
use crate::symbolic::{Letter, Word};
use crate::tabulated::TabulatedMap;
use crate::transect::brute_inverse;

/// Largest harmonic count tried by [`approximate_step`].
pub const M_BUDGET: usize = 1 << 16;

/// `|Im θ|·m` beyond which the continuation is reported out of range.
const EXP_LIMIT: f64 = 700.0;

/// Share of the proximity target spent on the exceptional set in [`approx_permutation`].
pub const DELTA_SHARE: f64 = 0.8;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("no convergence within {m} harmonics: sup error {achieved:e} above {eps:e}")]
    NoConvergence { m: usize, achieved: f64, eps: f64 },
    #[error("strip evaluation out of range: |Im| = {im:e} with {m} harmonics of base frequency {n}")]
    Range { im: f64, m: usize, n: u64 },
    #[error("non-finite value in strip evaluation")]
    NonFinite,
    #[error("invalid target: {0}")]
    Target(String),
    #[error("step function is not 1/{n}-periodic")]
    Period { n: u64 },
    #[error("vertical slide of period 1/{n} does not commute with rotation by 1/{q}")]
    NotCommuting { n: u64, q: u64 },
    #[error("bad map file: {0}")]
    Format(String),
    #[error(transparent)]
    BlockSlide(#[from] BlockSlideError),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

impl AnalyticError {
    /// True for failures caused by the size of the continuation rather than by bad input.
    pub fn is_overflow(&self) -> bool {
        matches!(self, AnalyticError::Range { .. } | AnalyticError::NonFinite)
    }
}

pub(crate) fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn q_f64(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// `a_0 + Σ_{j=1}^{m} a_j cos(2πjNx) + b_j sin(2πjNx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    pub base_frequency: u64,
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// The step function this approximates, when there is one.
    pub source: Option<StepFunction>,
    pub eps: f64,
    pub delta: f64,
    /// Sup error outside the windows measured when the polynomial was accepted.
    pub achieved: f64,
}

impl TrigPolynomial {
    pub fn constant(c: f64) -> Self {
        TrigPolynomial { base_frequency: 1, a0: c, a: vec![], b: vec![], source: None, eps: 0.0, delta: 0.0, achieved: 0.0 }
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    pub fn neg(&self) -> Self {
        TrigPolynomial {
            a0: -self.a0,
            a: self.a.iter().map(|v| -v).collect(),
            b: self.b.iter().map(|v| -v).collect(),
            source: self.source.as_ref().map(StepFunction::neg),
            ..self.clone()
        }
    }

    /// Value at phase `u`, i.e. with `Nx` replaced by `u`.
    pub fn eval_phase(&self, u: f64) -> f64 {
        let m = self.a.len();
        if m == 0 {
            return self.a0;
        }
        // Four interleaved Horner chains in z⁴, one per residue of the harmonic index mod 4.
        let (s, c) = (TAU * u).sin_cos();
        let (s4, c4) = (4.0 * TAU * u).sin_cos();
        let (mut pr, mut pi) = ([0.0f64; 4], [0.0f64; 4]);
        for t in (0..m.div_ceil(4)).rev() {
            for r in 0..4 {
                let j = 4 * t + r;
                let (a, b) = if j < m { (self.a[j], self.b[j]) } else { (0.0, 0.0) };
                let nr = pr[r] * c4 - pi[r] * s4 + a;
                pi[r] = pr[r] * s4 + pi[r] * c4 - b;
                pr[r] = nr;
            }
        }
        let (mut zr, mut zi, mut acc) = (c, s, 0.0);
        for r in 0..4 {
            acc += pr[r] * zr - pi[r] * zi;
            (zr, zi) = (zr * c - zi * s, zr * s + zi * c);
        }
        self.a0 + acc
    }

    /// Value and derivative with respect to the phase.
    pub fn eval_phase_d(&self, u: f64) -> (f64, f64) {
        let m = self.a.len();
        if m == 0 {
            return (self.a0, 0.0);
        }
        // Same four-chain scheme as `eval_phase`, with a second set of chains
        // carrying the coefficients weighted by their harmonic index.
        let (s, c) = (TAU * u).sin_cos();
        let (s4, c4) = (4.0 * TAU * u).sin_cos();
        let (mut pr, mut pi, mut dr, mut di) = ([0.0f64; 4], [0.0f64; 4], [0.0f64; 4], [0.0f64; 4]);
        for t in (0..m.div_ceil(4)).rev() {
            for r in 0..4 {
                let j = 4 * t + r;
                let (a, b) = if j < m { (self.a[j], self.b[j]) } else { (0.0, 0.0) };
                let w = (j + 1) as f64;
                let nr = pr[r] * c4 - pi[r] * s4 + a;
                pi[r] = pr[r] * s4 + pi[r] * c4 - b;
                pr[r] = nr;
                let ndr = dr[r] * c4 - di[r] * s4 + w * a;
                di[r] = dr[r] * s4 + di[r] * c4 - w * b;
                dr[r] = ndr;
            }
        }
        let (mut zr, mut zi, mut value, mut d_im) = (c, s, self.a0, 0.0);
        for r in 0..4 {
            value += pr[r] * zr - pi[r] * zi;
            d_im += dr[r] * zi + di[r] * zr;
            (zr, zi) = (zr * c - zi * s, zr * s + zi * c);
        }
        (value, -TAU * d_im)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_phase(wrap(self.base_frequency as f64 * x))
    }

    /// Value and `d/dx`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let n = self.base_frequency as f64;
        let (v, d) = self.eval_phase_d(wrap(n * x));
        (v, n * d)
    }

    /// The analytic continuation at a complex point.
    pub fn complex_eval(&self, z: Complex64) -> Result<Complex64, AnalyticError> {
        let m = self.a.len();
        if m == 0 {
            return Ok(Complex64::new(self.a0, 0.0));
        }
        let n = self.base_frequency as f64;
        let im = TAU * n * z.im;
        if im.abs() * m as f64 > EXP_LIMIT || !z.re.is_finite() {
            return Err(AnalyticError::Range { im: z.im.abs(), m, n: self.base_frequency });
        }
        let (s, c) = (TAU * wrap(n * z.re)).sin_cos();
        let zz = Complex64::new(c, s) * (-im).exp();
        let ww = Complex64::new(c, -s) * im.exp();
        let (mut p, mut q) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for j in (0..m).rev() {
            p = p * zz + Complex64::new(self.a[j], -self.b[j]);
            q = q * ww + Complex64::new(self.a[j], self.b[j]);
        }
        let out = Complex64::new(self.a0, 0.0) + (p * zz + q * ww) * 0.5;
        if out.re.is_finite() && out.im.is_finite() {
            Ok(out)
        } else {
            Err(AnalyticError::NonFinite)
        }
    }
}

/// One period of a step function in phase units: jump positions with left and right values.
struct PhaseSteps {
    breaks: Vec<f64>,
    values: Vec<f64>,
    jumps: Vec<(f64, f64, f64)>,
}

impl PhaseSteps {
    fn new(sf: &StepFunction, n: u64) -> Self {
        let period = Q::new(1, n as i64);
        let (mut breaks, mut values) = (Vec::new(), Vec::new());
        for (b, v) in sf.breakpoints.iter().zip(&sf.values) {
            if *b < period {
                breaks.push(q_f64(&(b * Q::from(n as i64))));
                values.push(q_f64(v));
            }
        }
        let len = values.len();
        let jumps = (0..len)
            .filter(|&i| values[i] != values[(i + len - 1) % len])
            .map(|i| (breaks[i], values[(i + len - 1) % len], values[i]))
            .collect();
        PhaseSteps { breaks, values, jumps }
    }

    fn step(&self, u: f64) -> f64 {
        let i = self.breaks.partition_point(|b| *b <= u);
        self.values[i.saturating_sub(1)]
    }

    /// Signed circular offset from the nearest jump, with that jump.
    fn nearest(&self, u: f64) -> Option<(f64, &(f64, f64, f64))> {
        self.jumps
            .iter()
            .map(|j| {
                let d = u - j.0;
                (d - d.round(), j)
            })
            .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
    }

    fn smoothed(&self, u: f64, w: f64) -> f64 {
        match self.nearest(u) {
            Some((d, &(_, left, right))) if d.abs() < w => left + (right - left) * transition((d + w) / (2.0 * w)),
            _ => self.step(u),
        }
    }
}

/// `ψ(t)`: 0 for `t ≤ 0`, 1 for `t ≥ 1`, smooth in between.
fn transition(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let (x, y) = ((-1.0 / t).exp(), (-1.0 / (1.0 - t)).exp());
        x / (x + y)
    }
}

/// Values of `Σ_{|j|≤m} c_j e^{2πiju}` at `u = i/k`, from the one-sided coefficients.
pub(crate) fn values_on_grid(a0: f64, a: &[f64], b: &[f64], k: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    buf[0] = Complex64::new(a0, 0.0);
    for j in 0..a.len() {
        let c = Complex64::new(a[j] / 2.0, -b[j] / 2.0);
        buf[j + 1] += c;
        buf[k - j - 1] += c.conj();
    }
    planner.plan_fft_inverse(k).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Fourier approximation of a `1/N`-periodic step function.
///
/// The windows `F` have half-width `δ/(2BN)` in `x`, where `B` is the number
/// of jumps per period, so `F` has total measure `δ`.
pub fn approximate_step(sf: &StepFunction, n: u64, eps: f64, delta: f64) -> Result<TrigPolynomial, AnalyticError> {
    if !(eps > 0.0 && delta > 0.0) || n == 0 {
        return Err(AnalyticError::Target(format!("eps={eps}, delta={delta}, N={n}")));
    }
    if sf.period_divisor % n != 0 {
        return Err(AnalyticError::Period { n });
    }
    let steps = PhaseSteps::new(sf, n);
    let base = TrigPolynomial {
        base_frequency: n,
        a0: steps.values[0],
        a: vec![],
        b: vec![],
        source: Some(sf.clone()),
        eps,
        delta,
        achieved: 0.0,
    };
    if steps.jumps.is_empty() {
        return Ok(base);
    }
    let w = delta / (2.0 * steps.jumps.len() as f64);
    let positions: Vec<f64> = steps.jumps.iter().map(|j| j.0).collect();
    let min_gap = (0..positions.len())
        .map(|i| {
            let next = positions.get(i + 1).copied().unwrap_or(positions[0] + 1.0);
            next - positions[i]
        })
        .fold(f64::INFINITY, f64::min);
    if min_gap <= 2.0 * w {
        return Err(AnalyticError::Target(format!("delta={delta} makes the windows overlap")));
    }
    let mut planner = FftPlanner::new();
    let mut m = 4;
    loop {
        let big = 16 * m;
        let mut buf: Vec<Complex64> =
            (0..big).map(|i| Complex64::new(steps.smoothed(i as f64 / big as f64, w), 0.0)).collect();
        planner.plan_fft_forward(big).process(&mut buf);
        let scale = 1.0 / big as f64;
        let a0 = buf[0].re * scale;
        let a: Vec<f64> = (1..=m).map(|j| 2.0 * buf[j].re * scale).collect();
        let b: Vec<f64> = (1..=m).map(|j| -2.0 * buf[j].im * scale).collect();
        let k = (8 * m).max(4096);
        let vals = values_on_grid(a0, &a, &b, k, &mut planner);
        let achieved = vals
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                let u = i as f64 / k as f64;
                match steps.nearest(u) {
                    Some((d, _)) if d.abs() < w => None,
                    _ => Some((v - steps.step(u)).abs()),
                }
            })
            .fold(0.0, f64::max);
        if achieved < eps {
            return Ok(TrigPolynomial { a0, a, b, achieved, ..base });
        }
        if m >= M_BUDGET {
            return Err(AnalyticError::NoConvergence { m, achieved, eps });
        }
        m *= 2;
    }
}

/// A single factor of an [`AnalyticMap`].
#[derive(Clone, Debug, PartialEq)]
pub enum AnalyticStep {
    /// `H(f)`: `(x₁ + f(x₂), x₂)`, or `V(f)`: `(x₁, x₂ + f(x₁))`.
    Shear { axis: Axis, f: TrigPolynomial },
    /// `(x₁ + α, x₂)`; `shift` caches the fractional part of `α` as a double.
    Rotation { alpha: BigRatio, shift: f64 },
}

impl AnalyticStep {
    pub fn rotation(alpha: BigRatio) -> Self {
        let shift = alpha.frac().to_f64();
        AnalyticStep::Rotation { alpha, shift }
    }

    fn inverse(&self) -> Self {
        match self {
            AnalyticStep::Shear { axis, f } => AnalyticStep::Shear { axis: *axis, f: f.neg() },
            AnalyticStep::Rotation { alpha, .. } => {
                AnalyticStep::rotation(BigRatio::new(-alpha.numer().clone(), alpha.denom().clone()))
            }
        }
    }
}

/// A composition of analytic shears and rotations, applied left to right.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct AnalyticMap {
    pub steps: Vec<AnalyticStep>,
    /// Measure bound for the set where the map may disagree with the block-slide map it approximates.
    pub exceptional_bound: f64,
}

impl AnalyticMap {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn rotation(alpha: BigRatio) -> Self {
        AnalyticMap { steps: vec![AnalyticStep::rotation(alpha)], exceptional_bound: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn shear_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, AnalyticStep::Shear { .. })).count()
    }

    pub fn max_degree(&self) -> usize {
        self.steps
            .iter()
            .map(|s| match s {
                AnalyticStep::Shear { f, .. } => f.degree() * f.base_frequency as usize,
                AnalyticStep::Rotation { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn inverse(&self) -> Self {
        AnalyticMap {
            steps: self.steps.iter().rev().map(AnalyticStep::inverse).collect(),
            exceptional_bound: self.exceptional_bound,
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &AnalyticMap) -> Self {
        let mut steps = self.steps.clone();
        steps.extend(other.steps.iter().cloned());
        AnalyticMap { steps, exceptional_bound: (self.exceptional_bound + other.exceptional_bound).min(1.0) }
    }

    /// Image on the torus, coordinates in `[0, 1)`.
    pub fn apply(&self, [mut x1, mut x2]: [f64; 2]) -> [f64; 2] {
        for s in &self.steps {
            match s {
                AnalyticStep::Shear { axis: Axis::H, f } => x1 = wrap(x1 + f.eval(x2)),
                AnalyticStep::Shear { axis: Axis::V, f } => x2 = wrap(x2 + f.eval(x1)),
                AnalyticStep::Rotation { shift, .. } => x1 = wrap(x1 + shift),
            }
        }
        [x1, x2]
    }

    /// Image together with the Jacobian matrix, by forward differentiation through the factors.
    pub fn apply_with_jacobian(&self, [mut x1, mut x2]: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut j = [[1.0, 0.0], [0.0, 1.0]];
        for s in &self.steps {
            match s {
                AnalyticStep::Shear { axis: Axis::H, f } => {
                    let (v, d) = f.eval_with_derivative(x2);
                    x1 = wrap(x1 + v);
                    j[0] = [j[0][0] + d * j[1][0], j[0][1] + d * j[1][1]];
                }
                AnalyticStep::Shear { axis: Axis::V, f } => {
                    let (v, d) = f.eval_with_derivative(x1);
                    x2 = wrap(x2 + v);
                    j[1] = [j[1][0] + d * j[0][0], j[1][1] + d * j[0][1]];
                }
                AnalyticStep::Rotation { shift, .. } => x1 = wrap(x1 + shift),
            }
        }
        ([x1, x2], j)
    }

    /// `det DF(x)` from a running QR factorisation `DF = Q·R` (Givens rotations).
    ///
    /// Entries of `DF` itself reach `1e13` for long compositions, where
    /// `ad − bc` loses every digit; here each factor meets only the
    /// orthogonal `Q`, and `det R = r₁₁ r₂₂` is accumulated in log form.
    pub fn jacobian_det(&self, [mut x1, mut x2]: [f64; 2]) -> f64 {
        let (mut c, mut s) = (1.0f64, 0.0f64);
        let (mut log_det, mut sign) = (0.0f64, 1.0f64);
        for st in &self.steps {
            // M = S·Q for the shear S, with Q = [[c, -s], [s, c]].
            let m = match st {
                AnalyticStep::Shear { axis: Axis::H, f } => {
                    let (v, d) = f.eval_with_derivative(x2);
                    x1 = wrap(x1 + v);
                    [[c + d * s, -s + d * c], [s, c]]
                }
                AnalyticStep::Shear { axis: Axis::V, f } => {
                    let (v, d) = f.eval_with_derivative(x1);
                    x2 = wrap(x2 + v);
                    [[c, -s], [s + d * c, c - d * s]]
                }
                AnalyticStep::Rotation { shift, .. } => {
                    x1 = wrap(x1 + shift);
                    continue;
                }
            };
            let r = m[0][0].hypot(m[1][0]);
            (c, s) = (m[0][0] / r, m[1][0] / r);
            let r22 = c * m[1][1] - s * m[0][1];
            log_det += r.ln() + r22.abs().ln();
            sign *= r22.signum();
        }
        sign * log_det.exp()
    }

    /// The lift to `ℂ²`: no reduction mod 1, so `F(z) − z` is the periodic displacement.
    pub fn apply_complex(&self, [mut z1, mut z2]: [Complex64; 2]) -> Result<[Complex64; 2], AnalyticError> {
        for s in &self.steps {
            match s {
                AnalyticStep::Shear { axis: Axis::H, f } => z1 += f.complex_eval(z2)?,
                AnalyticStep::Shear { axis: Axis::V, f } => z2 += f.complex_eval(z1)?,
                AnalyticStep::Rotation { shift, .. } => z1 += shift,
            }
        }
        Ok([z1, z2])
    }

    /// Evaluates with `x₁ = (c + r)/q` kept as an exact residue `c` and a
    /// fraction `r`. Vertical shears whose base frequency is a multiple of
    /// `q` then read only `r`, so shifting `c` by one shifts the output by
    /// exactly `1/q`.
    pub fn apply_split(&self, q: u64, (mut c, mut r, mut x2): (u64, f64, f64)) -> (u64, f64, f64) {
        let qf = q as f64;
        let carry = |c: &mut u64, r: &mut f64, d: f64| {
            let t = *r + qf * d;
            let fl = t.floor();
            *c = (*c as i128 + fl as i128).rem_euclid(q as i128) as u64;
            *r = t - fl;
            if *r >= 1.0 {
                *r = 0.0;
                *c = (*c + 1) % q;
            }
        };
        for s in &self.steps {
            match s {
                AnalyticStep::Shear { axis: Axis::H, f } => carry(&mut c, &mut r, f.eval(x2)),
                AnalyticStep::Shear { axis: Axis::V, f } => {
                    let n = f.base_frequency;
                    let nc = ((n % q) as u128 * c as u128 % q as u128) as f64;
                    x2 = wrap(x2 + f.eval_phase(wrap((nc + n as f64 * r) / qf)));
                }
                AnalyticStep::Rotation { shift, .. } => carry(&mut c, &mut r, *shift),
            }
        }
        (c, r, x2)
    }
}

/// Shear-for-slide replacement of a block-slide map commuting with `R^{1/q}`.
///
/// Every slide moves the cells of the `C × R` grid spanned by its breakpoints
/// and values rigidly. Points farther than `h = δ/(2(C+R))` from the grid
/// lines stay that far under the exact map, so each shear only needs to be
/// accurate outside windows of half-width `h/2` around its jumps, and the
/// accumulated error is kept below `h/4`. The exceptional set is the
/// `h`-neighbourhood of the grid lines, of measure at most `δ`.
pub fn approx_blockslide(map: &BlockSlideMap, q: u64, eps: f64, delta: f64) -> Result<AnalyticMap, AnalyticError> {
    if !(eps > 0.0 && delta > 0.0 && delta < 1.0) || q == 0 {
        return Err(AnalyticError::Target(format!("eps={eps}, delta={delta}, q={q}")));
    }
    let slides: Vec<_> = map.steps.iter().filter(|s| !s.f.is_zero()).collect();
    if slides.is_empty() {
        return Ok(AnalyticMap::identity());
    }
    let (mut cols, mut rows) = (1i64, 1i64);
    for s in &slides {
        let (along, across) = match s.axis {
            Axis::V => (&mut cols, &mut rows),
            Axis::H => (&mut rows, &mut cols),
        };
        for b in &s.f.breakpoints {
            *along = along.lcm(b.denom());
        }
        for v in &s.f.values {
            *across = across.lcm(v.denom());
        }
    }
    let h = delta / (2.0 * (cols + rows) as f64);
    let per_slide = eps.min(h / 4.0) / slides.len() as f64;
    let mut cache: HashMap<&StepFunction, TrigPolynomial> = HashMap::new();
    let mut steps = Vec::with_capacity(slides.len());
    for s in slides {
        let n = s.f.period_divisor;
        if s.axis == Axis::V && n % q != 0 && !s.f.jumps().is_empty() {
            return Err(AnalyticError::NotCommuting { n, q });
        }
        let f = match cache.get(&s.f) {
            Some(f) => f.clone(),
            None => {
                let neg = s.f.neg();
                let f = match cache.iter().find(|(k, _)| **k == &neg) {
                    Some((_, g)) => g.neg(),
                    None => approximate_step(&s.f, n, per_slide, h * s.f.jumps().len().max(1) as f64)?,
                };
                cache.insert(&s.f, f.clone());
                f
            }
        };
        steps.push(AnalyticStep::Shear { axis: s.axis, f });
    }
    let bound = 1.0 - (1.0 - 2.0 * h * cols as f64) * (1.0 - 2.0 * h * rows as f64);
    Ok(AnalyticMap { steps, exceptional_bound: bound })
}

/// Uniform points of `[0,1)²` from a seeded ChaCha stream.
pub fn sample_points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSetEstimate {
    /// Share of samples mapped into the image of their own cell.
    pub fraction: f64,
    pub samples: usize,
    pub exceptional_bound: f64,
    /// Largest distance between tabulated and direct images on check points.
    pub tabulation_deviation: f64,
}

/// Points compared directly when measuring [`GoodSetEstimate::tabulation_deviation`].
const DEVIATION_SAMPLES: usize = 64;

/// Share of sample points `x` with `map(x)` in the cell `perm` assigns to the cell of `x`.
///
/// Images are computed with a [`TabulatedMap`]; only points landing within
/// [`crate::tabulated::MARGIN`] of a cell edge are evaluated directly.
pub fn good_set_fraction(map: &AnalyticMap, perm: &GridPermutation, samples: usize, seed: u64) -> f64 {
    good_set_with(&TabulatedMap::new(map), map, perm, samples, seed)
}

fn good_set_with(fast: &TabulatedMap, map: &AnalyticMap, perm: &GridPermutation, samples: usize, seed: u64) -> f64 {
    let g = perm.grid;
    let cell = |[x1, x2]: [f64; 2]| {
        let c = ((x1 * g.cols as f64) as usize).min(g.cols - 1);
        let r = ((x2 * g.rows as f64) as usize).min(g.rows - 1);
        g.atom(c, r)
    };
    let pts = sample_points(samples, seed);
    let hits = par::map(&pts, |&x| {
        let (c, r) = fast.classify(map, x, g.cols, g.rows);
        g.atom(c, r) == perm.apply(cell(x))
    });
    hits.iter().filter(|&&h| h).count() as f64 / samples.max(1) as f64
}

/// [`permutation_to_blockslide`](blockslide::permutation_to_blockslide) followed by
/// [`approx_blockslide`] with `δ = DELTA_SHARE·ε`, plus a Monte Carlo good-set estimate.
pub fn approx_permutation(
    perm: &GridPermutation,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<(AnalyticMap, GoodSetEstimate), AnalyticError> {
    let exact = blockslide::permutation_to_blockslide(perm)?;
    let map = approx_blockslide(&exact, perm.period as u64, eps, DELTA_SHARE * eps)?;
    let (fraction, tabulation_deviation) = if samples == 0 {
        (1.0, 0.0)
    } else {
        let fast = TabulatedMap::new(&map);
        (good_set_with(&fast, &map, perm, samples, seed), fast.deviation(&map, DEVIATION_SAMPLES, seed ^ 0x5eed))
    };
    let est = GoodSetEstimate { fraction, samples, exceptional_bound: map.exceptional_bound, tabulation_deviation };
    Ok((map, est))
}

fn torus_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// `sup ‖h(R^{1/q}x) − R^{1/q}h(x)‖` over samples, using [`AnalyticMap::apply_split`].
pub fn commutation_residual(map: &AnalyticMap, q: u64, samples: usize, seed: u64) -> f64 {
    let pts = sample_points(samples, seed);
    let qf = q as f64;
    let res = par::map(&pts, |&[x1, x2]| {
        let c = ((x1 * qf) as u64).min(q - 1);
        let r = x1 * qf - c as f64;
        let (ca, ra, ya) = map.apply_split(q, ((c + 1) % q, r, x2));
        let (cb, rb, yb) = map.apply_split(q, (c, r, x2));
        let a1 = (ca as f64 + ra) / qf;
        let b1 = (((cb + 1) % q) as f64 + rb) / qf;
        torus_gap(a1, b1).max(torus_gap(ya, yb))
    });
    res.into_iter().fold(0.0, f64::max)
}

/// The same residual with plain floating-point coordinates, for comparison.
pub fn commutation_residual_direct(map: &AnalyticMap, q: u64, samples: usize, seed: u64) -> f64 {
    let pts = sample_points(samples, seed);
    let t = 1.0 / q as f64;
    let res = par::map(&pts, |&[x1, x2]| {
        let a = map.apply([wrap(x1 + t), x2]);
        let b = map.apply([x1, x2]);
        torus_gap(a[0], b[0] + t).max(torus_gap(a[1], b[1]))
    });
    res.into_iter().fold(0.0, f64::max)
}

/// Largest `|det J − 1|` over samples.
pub fn jacobian_deviation(map: &AnalyticMap, samples: usize, seed: u64) -> f64 {
    let pts = sample_points(samples, seed);
    par::map(&pts, |&x| (map.jacobian_det(x) - 1.0).abs()).into_iter().fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripNormEstimate {
    pub rho: f64,
    pub grid_density: usize,
    pub value: f64,
    /// `(Re z₁, Im z₁), (Re z₂, Im z₂)` of the sample realising `value`.
    pub attained_at: [(f64, f64); 2],
}

/// Sample points with real parts on the `grid × grid` lattice and imaginary parts `±ρ`.
/// Doubling `grid` gives a superset, so estimates never decrease under refinement.
fn strip_samples(rho: f64, grid: usize) -> Vec<[Complex64; 2]> {
    let g = grid as f64;
    let mut out = Vec::with_capacity(4 * grid * grid);
    for a in 0..grid {
        for b in 0..grid {
            for (s1, s2) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                out.push([Complex64::new(a as f64 / g, s1 * rho), Complex64::new(b as f64 / g, s2 * rho)]);
            }
        }
    }
    out
}

/// `d̃_ρ(f, g) = max_i inf_n sup |f_i − g_i + n|` over the strip samples.
pub fn strip_displacement(
    f: &AnalyticMap,
    g: &AnalyticMap,
    rho: f64,
    grid: usize,
) -> Result<StripNormEstimate, AnalyticError> {
    let pts = strip_samples(rho, grid.max(1));
    let diffs = par::map(&pts, |&z| -> Result<[Complex64; 2], AnalyticError> {
        let (a, b) = (f.apply_complex(z)?, g.apply_complex(z)?);
        Ok([a[0] - b[0], a[1] - b[1]])
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut best = (0.0, 0usize);
    for i in 0..2 {
        let shifts: BTreeSet<i64> = diffs.iter().map(|d| -d[i].re.round() as i64).collect();
        let (lo, hi) = (*shifts.first().unwrap_or(&0), *shifts.last().unwrap_or(&0));
        let candidates: Vec<i64> = if hi - lo <= 8 { (lo - 1..=hi + 1).collect() } else { shifts.into_iter().collect() };
        let coord = candidates
            .into_iter()
            .map(|n| {
                diffs
                    .iter()
                    .enumerate()
                    .map(|(s, d)| ((d[i] + n as f64).norm(), s))
                    .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap_or((0.0, 0));
        if !coord.0.is_finite() {
            return Err(AnalyticError::NonFinite);
        }
        if coord.0 > best.0 {
            best = coord;
        }
    }
    let z = pts[best.1];
    Ok(StripNormEstimate {
        rho,
        grid_density: grid.max(1),
        value: best.0,
        attained_at: [(z[0].re, z[0].im), (z[1].re, z[1].im)],
    })
}

/// `‖f − id‖_ρ` up to integer shifts.
pub fn strip_norm(f: &AnalyticMap, rho: f64, grid: usize) -> Result<StripNormEstimate, AnalyticError> {
    strip_displacement(f, &AnalyticMap::identity(), rho, grid)
}

/// `d_ρ(f, g) = max{d̃_ρ(f, g), d̃_ρ(f⁻¹, g⁻¹)}`, inverses taken in closed form.
pub fn strip_distance(f: &AnalyticMap, g: &AnalyticMap, rho: f64, grid: usize) -> Result<StripNormEstimate, AnalyticError> {
    let fwd = strip_displacement(f, g, rho, grid)?;
    let back = strip_displacement(&f.inverse(), &g.inverse(), rho, grid)?;
    Ok(if back.value > fwd.value { back } else { fwd })
}

/// A `d_ρ` estimate, or the reason none could be computed in double precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum GapEstimate {
    Finite(StripNormEstimate),
    Overflow { message: String },
}

impl GapEstimate {
    pub fn of(result: Result<StripNormEstimate, AnalyticError>) -> Result<Self, AnalyticError> {
        match result {
            Ok(e) => Ok(GapEstimate::Finite(e)),
            Err(e) if e.is_overflow() => Ok(GapEstimate::Overflow { message: e.to_string() }),
            Err(e) => Err(e),
        }
    }

    /// The estimate, or `+∞` after an overflow.
    pub fn value(&self) -> f64 {
        match self {
            GapEstimate::Finite(e) => e.value,
            GapEstimate::Overflow { .. } => f64::INFINITY,
        }
    }
}

/// `ε_n = 2^{-n} ε₀`.
pub fn eps_schedule(eps0: f64, n: usize) -> f64 {
    eps0 / 2f64.powi(n as i32)
}

/// `H ∘ R^α ∘ H^{-1}`.
pub fn conjugated_rotation(conj: &AnalyticMap, alpha: BigRatio) -> AnalyticMap {
    conj.inverse().then(&AnalyticMap::rotation(alpha)).then(conj)
}

/// One assembled analytic stage.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticStage {
    pub params: StageParams,
    /// `h_n^(a)`; the identity at stage 0.
    pub h: AnalyticMap,
    /// `H_n^(a) = H_{n-1}^(a) ∘ h_n^(a)`.
    pub conj: AnalyticMap,
    /// `T_n^(a)`.
    pub t: AnalyticMap,
    pub good_set: Option<GoodSetEstimate>,
    /// `d_ρ(T_n^(a), T_{n-1}^(a))`.
    pub gap: Option<GapEstimate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOptions {
    pub rho: f64,
    pub eps: f64,
    pub grid: usize,
    pub samples: usize,
    pub seed: u64,
}

/// Stage 0: `H_0 = id`, `T_0 = R^{α_0}`.
pub fn initial_stage(params: StageParams) -> AnalyticStage {
    let t = AnalyticMap::rotation(params.alpha());
    AnalyticStage { params, h: AnalyticMap::identity(), conj: AnalyticMap::identity(), t, good_set: None, gap: None }
}

/// Assembles stage `n+1` from an already approximated `h_{n+1}^(a)`.
pub fn stage_from_map(
    prev: &AnalyticStage,
    h: AnalyticMap,
    params: &StageParams,
    good_set: Option<GoodSetEstimate>,
    rho: f64,
    grid: usize,
) -> Result<AnalyticStage, AnalyticError> {
    let conj = h.then(&prev.conj);
    let t = conjugated_rotation(&conj, params.alpha());
    let gap = GapEstimate::of(strip_distance(&t, &prev.t, rho, grid))?;
    Ok(AnalyticStage { params: params.clone(), h, conj, t, good_set, gap: Some(gap) })
}

/// Approximates `h_next` with target `opts.eps` and assembles `T_{n+1}^(a)`.
pub fn build_stage(
    prev: &AnalyticStage,
    h_next: &GridPermutation,
    params: &StageParams,
    opts: &StageOptions,
) -> Result<AnalyticStage, AnalyticError> {
    let (h, good) = approx_permutation(h_next, opts.eps, opts.samples, opts.seed)?;
    stage_from_map(prev, h, params, (opts.samples > 0).then_some(good), opts.rho, opts.grid)
}

/// What [`find_l_star`] needs about stage `n`.
#[derive(Clone, Debug)]
pub struct LStarContext<'a> {
    pub prev: &'a AnalyticStage,
    /// Approximated candidates for `h_{n+1}`.
    pub candidates: Vec<AnalyticMap>,
    pub k: u64,
    pub s_next: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LStarResult {
    pub l: u64,
    /// Largest gap over the candidates at `l`; `+∞` when a strip evaluation overflowed.
    pub gap: f64,
    pub found: bool,
    pub scan: Vec<(u64, f64)>,
}

/// `max_h d_ρ(T_n^(a), T_{n+1}^(a))` over the candidates at a given `l_n`.
pub fn l_gap(ctx: &LStarContext<'_>, l: u64, rho: f64, grid: usize) -> Result<f64, AnalyticError> {
    let next = advance(&ctx.prev.params, ctx.k, l, ctx.s_next)?;
    let mut worst: f64 = 0.0;
    for h in &ctx.candidates {
        let t = conjugated_rotation(&h.then(&ctx.prev.conj), next.alpha());
        worst = worst.max(GapEstimate::of(strip_distance(&ctx.prev.t, &t, rho, grid))?.value());
    }
    Ok(worst)
}

/// Smallest `l` of the budget with gap `< ε_n/2`; otherwise the best `l` seen, with `found = false`.
pub fn find_l_star(
    ctx: &LStarContext<'_>,
    rho: f64,
    eps_n: f64,
    l_budget: &[u64],
    grid: usize,
) -> Result<LStarResult, AnalyticError> {
    let mut budget = l_budget.to_vec();
    budget.sort_unstable();
    budget.dedup();
    let mut scan = Vec::new();
    for &l in &budget {
        let gap = l_gap(ctx, l, rho, grid)?;
        scan.push((l, gap));
        if gap < eps_n / 2.0 {
            return Ok(LStarResult { l, gap, found: true, scan });
        }
    }
    let &(l, gap) = scan
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| AnalyticError::Target("empty l budget".into()))?;
    Ok(LStarResult { l, gap, found: false, scan })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NameAgreement {
    pub fraction: f64,
    pub positions: usize,
}

/// Compares orbit names of `T_n^(a)` with the stage-`n` tower words.
///
/// A start point `y` is drawn in `ξ_n` coordinates and the orbit point at
/// time `t` is `H_n^(a)(R^{tα_n} y)`. Its name is the horizontal band of
/// height `1/s₀` containing it; the expected letter is level `t₀ + t` of the
/// tower through `y`, where level `t` sits in column `t p_n mod q_n`.
pub fn name_agreement(
    conj: &AnalyticMap,
    params: &StageParams,
    names: &[Word],
    s0: u64,
    samples: usize,
    seed: u64,
) -> Result<NameAgreement, AnalyticError> {
    let (p, q) = (params.p_u64()?, params.q_u64()?);
    let inv = brute_inverse(p % q, q).ok_or_else(|| AnalyticError::Target(format!("p={p} not invertible mod {q}")))?;
    let towers = names.len();
    if towers == 0 || names.iter().any(|w| w.len() as u64 != q) {
        return Err(AnalyticError::Target(format!("need tower words of length {q}")));
    }
    let pts = sample_points(samples, seed);
    let fast = TabulatedMap::new(conj);
    let hits = par::map(&pts, |&[y1, y2]| {
        let col = ((y1 * q as f64) as u64).min(q - 1);
        let row = ((y2 * towers as f64) as usize).min(towers - 1);
        let t0 = (col as u128 * inv as u128 % q as u128) as u64;
        (0..q)
            .filter(|&t| {
                let shift = (t as u128 * p as u128 % q as u128) as f64 / q as f64;
                let (_, band) = fast.classify(conj, [wrap(y1 + shift), y2], 1, s0 as usize);
                names[row].0[((t0 + t) % q) as usize] == Letter::Sym(band as u16)
            })
            .count()
    });
    let positions = samples * q as usize;
    Ok(NameAgreement { fraction: hits.iter().sum::<usize>() as f64 / positions.max(1) as f64, positions })
}

/// C99-style hexadecimal float, exact for every finite double.
pub fn hex_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    let (lead, e) = match (exp, mant) {
        (0, 0) => return format!("{sign}0x0p+0"),
        (0, _) => (0, -1022),
        _ => (1, exp - 1023),
    };
    let mut digits = format!("{mant:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let mut s = format!("{sign}0x{lead}");
    if !digits.is_empty() {
        let _ = write!(s, ".{digits}");
    }
    let _ = write!(s, "p{e:+}");
    s
}

pub fn parse_hex_float(s: &str) -> Result<f64, AnalyticError> {
    let bad = || AnalyticError::Format(format!("bad hex float {s:?}"));
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let body = body.strip_prefix("0x").ok_or_else(bad)?;
    let (mant, exp) = body.split_once('p').ok_or_else(bad)?;
    let exp: i64 = exp.parse().map_err(|_| bad())?;
    let (lead, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if frac.len() > 13 || !frac.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(bad());
    }
    let frac_bits = if frac.is_empty() { 0 } else { u64::from_str_radix(&format!("{frac:0<13}"), 16).map_err(|_| bad())? };
    let bits = match lead {
        "1" if (-1022..=1023).contains(&exp) => (((exp + 1023) as u64) << 52) | frac_bits,
        "0" if frac_bits == 0 => 0,
        "0" if exp == -1022 => frac_bits,
        _ => return Err(bad()),
    };
    Ok(f64::from_bits(bits | if neg { 1 << 63 } else { 0 }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct SourceRecord {
    breakpoints: Vec<String>,
    values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ShearRecord {
    axis: Axis,
    base_frequency: u64,
    a0: String,
    a: Vec<String>,
    b: Vec<String>,
    eps: f64,
    delta: f64,
    achieved: f64,
    source: Option<SourceRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum StepRecord {
    /// Index into the shear table.
    Shear { index: usize },
    Rotation { alpha: String },
}

/// Block-slide compositions reuse a handful of distinct shears many times,
/// so shears are stored once in a table and steps refer to them by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MapRecord {
    exceptional_bound: f64,
    shears: Vec<ShearRecord>,
    steps: Vec<StepRecord>,
}

fn shear_record(axis: Axis, f: &TrigPolynomial) -> ShearRecord {
    ShearRecord {
        axis,
        base_frequency: f.base_frequency,
        a0: hex_float(f.a0),
        a: f.a.iter().map(|&v| hex_float(v)).collect(),
        b: f.b.iter().map(|&v| hex_float(v)).collect(),
        eps: f.eps,
        delta: f.delta,
        achieved: f.achieved,
        source: f.source.as_ref().map(|sf| SourceRecord {
            breakpoints: sf.breakpoints.iter().map(blockslide::q_to_string).collect(),
            values: sf.values.iter().map(blockslide::q_to_string).collect(),
        }),
    }
}

fn shear_from_record(r: ShearRecord) -> Result<AnalyticStep, AnalyticError> {
    if r.a.len() != r.b.len() || r.base_frequency == 0 {
        return Err(AnalyticError::Format("coefficient lists differ in length".into()));
    }
    let hex_all = |v: &[String]| v.iter().map(|s| parse_hex_float(s)).collect::<Result<Vec<_>, _>>();
    let source = match r.source {
        Some(src) => {
            let bp = src.breakpoints.iter().map(|x| blockslide::q_parse(x)).collect::<Result<Vec<_>, _>>()?;
            let vals = src.values.iter().map(|x| blockslide::q_parse(x)).collect::<Result<Vec<_>, _>>()?;
            Some(StepFunction::new(bp, vals)?)
        }
        None => None,
    };
    let f = TrigPolynomial {
        base_frequency: r.base_frequency,
        a0: parse_hex_float(&r.a0)?,
        a: hex_all(&r.a)?,
        b: hex_all(&r.b)?,
        source,
        eps: r.eps,
        delta: r.delta,
        achieved: r.achieved,
    };
    Ok(AnalyticStep::Shear { axis: r.axis, f })
}

impl AnalyticMap {
    /// Compact JSON with coefficients as hex floats and rotations as `"p/q"` strings.
    pub fn to_json(&self) -> String {
        let mut shears = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        let steps = self
            .steps
            .iter()
            .map(|s| match s {
                AnalyticStep::Shear { axis, f } => {
                    let rec = shear_record(*axis, f);
                    let key = serde_json::to_string(&rec).expect("shear record serialises");
                    let index = *seen.entry(key).or_insert_with(|| {
                        shears.push(rec);
                        shears.len() - 1
                    });
                    StepRecord::Shear { index }
                }
                AnalyticStep::Rotation { alpha, .. } => StepRecord::Rotation { alpha: alpha.to_string() },
            })
            .collect();
        serde_json::to_string(&MapRecord { exceptional_bound: self.exceptional_bound, shears, steps })
            .expect("map record serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, AnalyticError> {
        let rec: MapRecord = serde_json::from_str(text).map_err(|e| AnalyticError::Format(e.to_string()))?;
        let table = rec.shears.into_iter().map(shear_from_record).collect::<Result<Vec<_>, _>>()?;
        let steps = rec
            .steps
            .into_iter()
            .map(|s| match s {
                StepRecord::Shear { index } => {
                    table.get(index).cloned().ok_or_else(|| AnalyticError::Format(format!("no shear {index}")))
                }
                StepRecord::Rotation { alpha } => {
                    let alpha: BigRatio = alpha.parse().map_err(|_| AnalyticError::Format(format!("bad rotation {alpha:?}")))?;
                    Ok(AnalyticStep::rotation(alpha))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AnalyticMap { steps, exceptional_bound: rec.exceptional_bound })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::Grid;
    use crate::blockslide::{column_interchange, Slide};

    fn half_step() -> StepFunction {
        StepFunction::new(vec![Q::from(0), Q::new(1, 2)], vec![Q::from(0), Q::new(1, 2)]).unwrap()
    }

    #[test]
    fn constant_needs_no_harmonics() {
        let p = approximate_step(&StepFunction::constant(Q::new(1, 3)), 1, 1e-9, 0.1).unwrap();
        assert_eq!(p.degree(), 0);
        assert!((p.eval(0.77) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.complex_eval(Complex64::new(0.3, 5.0)).unwrap(), Complex64::new(p.a0, 0.0));
    }

    #[test]
    fn half_step_values() {
        let p = approximate_step(&half_step(), 1, 1e-3, 0.05).unwrap();
        assert!(p.eval(0.25).abs() < 1e-3);
        assert!((p.eval(0.75) - 0.5).abs() < 1e-3);
        assert!(p.achieved < 1e-3);
    }

    #[test]
    fn cosine_continuation_is_cosh() {
        let p = TrigPolynomial { a: vec![1.0], b: vec![0.0], ..TrigPolynomial::constant(0.0) };
        let rho = 0.1;
        let v = p.complex_eval(Complex64::new(0.0, rho)).unwrap();
        assert!((v.re - (TAU * rho).cosh()).abs() < 1e-12 && v.im.abs() < 1e-12);
        let big = TrigPolynomial { a: vec![0.0; 4000], b: vec![0.0; 4000], ..p };
        assert!(matches!(big.complex_eval(Complex64::new(0.0, 0.1)), Err(AnalyticError::Range { .. })));
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let p = approximate_step(&half_step(), 1, 1e-3, 0.2).unwrap();
        for &x in &[0.1, 0.49, 0.51, 0.93] {
            let (_, d) = p.eval_with_derivative(x);
            let h = 1e-6;
            let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
            assert!((d - fd).abs() < 1e-4 * (1.0 + d.abs()), "{d} vs {fd}");
        }
    }

    #[test]
    fn hex_float_round_trip() {
        for &x in &[0.0, -0.0, 1.0, -2.5, 0.1, 1e-310, f64::MAX, f64::MIN_POSITIVE, 3.0e-5] {
            let s = hex_float(x);
            assert_eq!(parse_hex_float(&s).unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(hex_float(1.0), "0x1p+0");
        assert_eq!(hex_float(-0.75), "-0x1.8p-1");
        assert!(parse_hex_float("0x2p+0").is_err());
    }

    #[test]
    fn rotation_distance_is_mod_one() {
        let f = AnalyticMap::rotation("9/10".parse().unwrap());
        let g = AnalyticMap::rotation("1/10".parse().unwrap());
        let d = strip_distance(&f, &g, 0.1, 4).unwrap();
        assert!((d.value - 0.2).abs() < 1e-12);
        assert_eq!(strip_distance(&f, &f, 0.1, 4).unwrap().value, 0.0);
    }

    #[test]
    fn single_slide_approximation() {
        let sf = StepFunction::by_cell(2, |c| Q::new(c as i64, 4));
        let map = BlockSlideMap { steps: vec![Slide::h(sf)] };
        let a = approx_blockslide(&map, 1, 1e-3, 0.05).unwrap();
        assert_eq!(a.shear_count(), 1);
        assert!(a.exceptional_bound <= 0.05);
        let pt = a.apply([0.1, 0.7]);
        assert!((pt[0] - 0.35).abs() < 1e-3 && (pt[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn interchange_commutes_with_block_shift() {
        let map = column_interchange(0, 2, 2);
        let a = approx_blockslide(&map, 2, 0.05, 0.04).unwrap();
        assert_eq!(commutation_residual(&a, 2, 200, 1), 0.0);
        let perm = map.atom_permutation(Grid::new(4, 1), 2).unwrap();
        assert!(good_set_fraction(&a, &perm, 2000, 2) > 0.95);
        assert!(jacobian_deviation(&a, 200, 3) < 1e-6);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let map = column_interchange(0, 2, 2);
        let a = approx_blockslide(&map, 2, 0.05, 0.04).unwrap().then(&AnalyticMap::rotation("5/4".parse().unwrap()));
        let back = AnalyticMap::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn inverse_undoes_map() {
        let a = approx_blockslide(&column_interchange(0, 2, 1), 1, 0.05, 0.04).unwrap();
        let x = [0.123, 0.456];
        let y = a.inverse().apply(a.apply(x));
        assert!(torus_gap(x[0], y[0]) < 1e-9 && torus_gap(x[1], y[1]) < 1e-9);
    }

    #[test]
    fn vacuous_threshold_takes_first_l() {
        let stage = initial_stage(StageParams::initial(2).unwrap());
        let ctx = LStarContext { prev: &stage, candidates: vec![AnalyticMap::identity()], k: 2, s_next: 2 };
        let r = find_l_star(&ctx, 0.1, 10.0, &[2, 3, 4], 2).unwrap();
        assert_eq!((r.l, r.found), (2, true));
        assert!((r.gap - 0.25).abs() < 1e-12);
    }
}
