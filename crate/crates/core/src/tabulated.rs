//! Fast approximate evaluation of [`AnalyticMap`]s for sampling-heavy work.
//!
//! Each distinct shear polynomial is sampled exactly on `8m` phase points by
//! an inverse FFT and evaluated between samples by barycentric Lagrange
//! interpolation on the nearest [`ORDER`] nodes. Interpolating a trigonometric
//! polynomial of degree `m` from `8m` samples converges geometrically in the
//! order, so the table agrees with direct summation to about `1e-13`, at a
//! cost independent of `m`.
//!
//! [`TabulatedMap::classify`] guards statistics against the residual error:
//! points whose fast image lies within [`MARGIN`] of a cell edge are redone
//! with the exact map, so cell counts match direct evaluation whenever the
//! two images differ by less than the margin.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustfft::FftPlanner;

use crate::analytic::{sample_points, values_on_grid, wrap, AnalyticMap, AnalyticStep, TrigPolynomial};
use crate::blockslide::Axis;
use crate::par;

pub const ORDER: usize = 20;
const OVERSAMPLE: usize = 8;
pub const MARGIN: f64 = 1e-8;

struct Table {
    values: Vec<f64>,
    weights: [f64; ORDER],
}

impl Table {
    fn new(f: &TrigPolynomial, planner: &mut FftPlanner<f64>) -> Self {
        let m = f.a.len();
        let len = (OVERSAMPLE * m.max(1)).next_power_of_two().max(2 * ORDER);
        let values = values_on_grid(f.a0, &f.a, &f.b, len, planner);
        let mut weights = [0.0; ORDER];
        let mut binom = 1.0;
        for (j, w) in weights.iter_mut().enumerate() {
            *w = if j % 2 == 0 { binom } else { -binom };
            binom = binom * (ORDER - 1 - j) as f64 / (j + 1) as f64;
        }
        Table { values, weights }
    }

    fn eval(&self, u: f64) -> f64 {
        let n = self.values.len();
        let t = u * n as f64;
        let first = t.floor() as i64 - (ORDER as i64 / 2 - 1);
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..ORDER {
            let node = first + j as i64;
            let v = self.values[node.rem_euclid(n as i64) as usize];
            let d = t - node as f64;
            if d == 0.0 {
                return v;
            }
            let c = self.weights[j] / d;
            num += c * v;
            den += c;
        }
        num / den
    }
}

#[derive(Clone)]
enum FastStep {
    Shear { axis: Axis, n: f64, table: Arc<Table> },
    Constant { axis: Axis, value: f64 },
    Rotation(f64),
}

/// An [`AnalyticMap`] with table-driven shears; see the module docs.
#[derive(Clone)]
pub struct TabulatedMap {
    steps: Vec<FastStep>,
}

fn fingerprint(f: &TrigPolynomial) -> u64 {
    let mut h = DefaultHasher::new();
    f.base_frequency.hash(&mut h);
    f.a0.to_bits().hash(&mut h);
    for (a, b) in f.a.iter().zip(&f.b) {
        a.to_bits().hash(&mut h);
        b.to_bits().hash(&mut h);
    }
    h.finish()
}

impl TabulatedMap {
    pub fn new(map: &AnalyticMap) -> Self {
        let mut planner = FftPlanner::new();
        let mut cache: HashMap<u64, Vec<(&TrigPolynomial, Arc<Table>)>> = HashMap::new();
        let steps = map
            .steps
            .iter()
            .map(|s| match s {
                AnalyticStep::Rotation { shift, .. } => FastStep::Rotation(*shift),
                AnalyticStep::Shear { axis, f } if f.a.is_empty() => FastStep::Constant { axis: *axis, value: f.a0 },
                AnalyticStep::Shear { axis, f } => {
                    let bucket = cache.entry(fingerprint(f)).or_default();
                    let table = match bucket.iter().find(|(g, _)| g.a == f.a && g.b == f.b && g.a0 == f.a0) {
                        Some((_, t)) => t.clone(),
                        None => {
                            let t = Arc::new(Table::new(f, &mut planner));
                            bucket.push((f, t.clone()));
                            t
                        }
                    };
                    FastStep::Shear { axis: *axis, n: f.base_frequency as f64, table }
                }
            })
            .collect();
        TabulatedMap { steps }
    }

    pub fn apply(&self, [mut x1, mut x2]: [f64; 2]) -> [f64; 2] {
        for s in &self.steps {
            match s {
                FastStep::Shear { axis: Axis::H, n, table } => x1 = wrap(x1 + table.eval(wrap(n * x2))),
                FastStep::Shear { axis: Axis::V, n, table } => x2 = wrap(x2 + table.eval(wrap(n * x1))),
                FastStep::Constant { axis: Axis::H, value } => x1 = wrap(x1 + value),
                FastStep::Constant { axis: Axis::V, value } => x2 = wrap(x2 + value),
                FastStep::Rotation(shift) => x1 = wrap(x1 + shift),
            }
        }
        [x1, x2]
    }

    /// The cell `(floor(x₁ cols), floor(x₂ rows))` of the image of `x`,
    /// falling back to `exact` near cell edges.
    pub fn classify(&self, exact: &AnalyticMap, x: [f64; 2], cols: usize, rows: usize) -> (usize, usize) {
        let y = self.apply(x);
        let near_edge = |v: f64, k: usize| {
            let t = v * k as f64;
            let d = t - t.round();
            d.abs() < MARGIN * k as f64 || (1.0 - v) < MARGIN || v < MARGIN
        };
        let y = if near_edge(y[0], cols) || near_edge(y[1], rows) { exact.apply(x) } else { y };
        let cell = |v: f64, k: usize| ((v * k as f64) as usize).min(k - 1);
        (cell(y[0], cols), cell(y[1], rows))
    }

    /// Largest torus distance between tabulated and exact images over samples.
    pub fn deviation(&self, exact: &AnalyticMap, samples: usize, seed: u64) -> f64 {
        let pts = sample_points(samples, seed);
        let gap = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(1.0);
            d.min(1.0 - d)
        };
        par::map(&pts, |&x| {
            let (f, e) = (self.apply(x), exact.apply(x));
            gap(f[0], e[0]).max(gap(f[1], e[1]))
        })
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: u64, m: usize) -> TrigPolynomial {
        let a = (1..=m).map(|j| 0.3 / (j * j) as f64).collect();
        let b = (1..=m).map(|j| ((j % 7) as f64 - 3.0) * 0.01 / j as f64).collect();
        TrigPolynomial { base_frequency: n, a, b, ..TrigPolynomial::constant(0.1) }
    }

    #[test]
    fn table_matches_direct_summation() {
        for (n, m) in [(1, 1), (1, 37), (3, 512), (2, 4096)] {
            let f = poly(n, m);
            let t = Table::new(&f, &mut FftPlanner::new());
            for i in 0..500 {
                let u = (i as f64 * 0.6180339887498949).fract();
                assert!((t.eval(u) - f.eval_phase(u)).abs() < 1e-12, "n={n} m={m} u={u}");
            }
            assert_eq!(t.eval(0.0), t.values[0]);
        }
    }

    #[test]
    fn shared_polynomials_share_tables() {
        let f = poly(1, 64);
        let step = |axis| AnalyticStep::Shear { axis, f: f.clone() };
        let m = AnalyticMap { steps: vec![step(Axis::H), step(Axis::V), step(Axis::H)], exceptional_bound: 0.0 };
        let t = TabulatedMap::new(&m);
        let ptrs: Vec<*const Table> = t
            .steps
            .iter()
            .filter_map(|s| match s {
                FastStep::Shear { table, .. } => Some(Arc::as_ptr(table)),
                _ => None,
            })
            .collect();
        assert!(ptrs.windows(2).all(|w| w[0] == w[1]));
        let dev = t.deviation(&m, 300, 1);
        assert!(dev < 1e-10, "{dev}");
    }
}
