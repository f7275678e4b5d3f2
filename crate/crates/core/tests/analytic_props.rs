use num_complex::Complex64;
use proptest::prelude::*;

use abc_circular::abc::Grid;
use abc_circular::analytic::*;
use abc_circular::blockslide::{column_interchange, transposition, BlockSlideMap, StepFunction, Q};
use abc_circular::params::StageParams;

fn half_step() -> StepFunction {
    StepFunction::new(vec![Q::from(0), Q::new(1, 2)], vec![Q::from(0), Q::new(1, 2)]).unwrap()
}

fn small_shear(axis_h: bool, a: &[f64], b: &[f64], n: u64) -> AnalyticMap {
    let f = TrigPolynomial { base_frequency: n, a: a.to_vec(), b: b.to_vec(), ..TrigPolynomial::constant(0.0) };
    let axis = if axis_h { abc_circular::blockslide::Axis::H } else { abc_circular::blockslide::Axis::V };
    AnalyticMap { steps: vec![AnalyticStep::Shear { axis, f }], exceptional_bound: 0.0 }
}

#[test]
fn half_step_on_dense_grid() {
    let p = approximate_step(&half_step(), 1, 1e-3, 0.05).unwrap();
    // F: two windows of total measure 0.05 around 0 and 1/2.
    let w = 0.05 / 4.0;
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let x = i as f64 / 10_000.0;
        let d = [0.0, 0.5, 1.0].iter().map(|j| (x - j).abs()).fold(f64::INFINITY, f64::min);
        if d >= w {
            let exact = if x < 0.5 { 0.0 } else { 0.5 };
            worst = worst.max((p.eval(x) - exact).abs());
        }
    }
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn periodic_step_uses_its_period() {
    let sf = StepFunction::by_cell(12, |c| if c % 4 < 2 { Q::new(1, 3) } else { Q::from(0) });
    assert_eq!(sf.period_divisor, 3);
    let p = approximate_step(&sf, 3, 1e-4, 0.05).unwrap();
    let pts = sample_points(1000, 11);
    let worst = pts.iter().map(|x| (p.eval(x[0] + 1.0 / 3.0) - p.eval(x[0])).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
    assert!(approximate_step(&sf, 2, 1e-4, 0.05).is_err());
}

#[test]
fn complex_periodicity_in_the_strip() {
    let sf = StepFunction::by_cell(4, |c| Q::new((c % 2) as i64, 4));
    let p = approximate_step(&sf, 2, 1e-2, 0.2).unwrap();
    let pts = sample_points(200, 5);
    for x in pts {
        let z = Complex64::new(x[0], (x[1] - 0.5) * 1e-3);
        let (a, b) = (p.complex_eval(z).unwrap(), p.complex_eval(z + 0.5).unwrap());
        assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0), "{a} {b}");
    }
}

#[test]
fn identity_slides_give_identity() {
    let a = approx_blockslide(&BlockSlideMap::identity(), 3, 0.01, 0.01).unwrap();
    assert!(a.is_identity());
    assert_eq!(a.apply([0.3, 0.6]), [0.3, 0.6]);
}

#[test]
fn interchange_good_set_and_structure() {
    let map = column_interchange(0, 2, 2);
    let a = approx_blockslide(&map, 2, 0.05, 0.04).unwrap();
    assert_eq!(a.shear_count(), map.len());
    assert!(a.exceptional_bound <= 0.04);
    let perm = map.atom_permutation(Grid::new(4, 1), 2).unwrap();
    assert!(good_set_fraction(&a, &perm, 10_000, 9) >= 0.95);
    assert!(jacobian_deviation(&a, 1000, 4) < 1e-6);
    assert_eq!(commutation_residual(&a, 2, 1000, 6), 0.0);
}

#[test]
fn period_not_matching_rotation_is_rejected() {
    let wrong = StepFunction::by_cell(2, |c| Q::new(c as i64, 4));
    let map = BlockSlideMap { steps: vec![abc_circular::blockslide::Slide::v(wrong)] };
    assert!(matches!(approx_blockslide(&map, 2, 0.05, 0.04), Err(AnalyticError::NotCommuting { .. })));
}

#[test]
fn transposition_permutation_round() {
    let bs = transposition(1, 0, 4, 1, 2).unwrap();
    let perm = bs.atom_permutation(Grid::new(4, 2), 1).unwrap();
    let (m, est) = approx_permutation(&perm, 0.05, 5_000, 1).unwrap();
    assert!(est.fraction >= 0.95, "{est:?}");
    assert!(jacobian_deviation(&m, 300, 2) < 1e-6);
    let again = approx_permutation(&perm, 0.05, 0, 1).unwrap().0;
    assert_eq!(again.to_json(), m.to_json());
}

#[test]
fn strip_estimates_grow_with_the_grid() {
    let f = small_shear(true, &[0.02, 0.004], &[0.01, 0.0], 1).then(&small_shear(false, &[0.0, 0.003], &[0.015, 0.0], 2));
    let mut last = 0.0;
    for grid in [1, 2, 4, 8, 16] {
        let v = strip_norm(&f, 0.1, grid).unwrap().value;
        assert!(v >= last, "grid {grid}: {v} < {last}");
        last = v;
    }
    let cosh = (std::f64::consts::TAU * 0.1).cosh();
    assert!(last <= 0.02 * cosh + 0.01 * cosh + 0.004 * (2.0 * std::f64::consts::TAU * 0.1).cosh() + 1e-12 + 0.05);
}

#[test]
fn triangle_inequality_on_random_triples() {
    let pts = sample_points(20, 77);
    for t in pts.chunks(3).filter(|c| c.len() == 3) {
        let maps: Vec<AnalyticMap> = t
            .iter()
            .map(|x| small_shear(true, &[0.05 * x[0]], &[0.03 * x[1]], 1).then(&small_shear(false, &[0.02 * x[1]], &[0.0], 1)))
            .collect();
        let d = |i: usize, j: usize| strip_distance(&maps[i], &maps[j], 0.05, 8).unwrap().value;
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-3, "{} {} {}", d(0, 2), d(0, 1), d(1, 2));
    }
}

#[test]
fn huge_strip_reports_overflow() {
    let a = approx_blockslide(&column_interchange(0, 4, 1), 1, 1e-3, 0.01).unwrap();
    let err = strip_norm(&a, 0.1, 2).unwrap_err();
    assert!(err.is_overflow(), "{err}");
    let gap = GapEstimate::of(strip_norm(&a, 0.1, 2)).unwrap();
    assert_eq!(gap.value(), f64::INFINITY);
}

#[test]
fn identity_candidate_gap_shrinks_with_l() {
    let stage = initial_stage(StageParams::initial(2).unwrap());
    let ctx = LStarContext { prev: &stage, candidates: vec![AnalyticMap::identity()], k: 2, s_next: 2 };
    let gaps: Vec<f64> = (2..=32).map(|l| l_gap(&ctx, l, 0.1, 2).unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0]));
    assert!((gaps[0] - 0.25).abs() < 1e-12);
    let r = find_l_star(&ctx, 0.1, 0.1, &(2..=32).collect::<Vec<_>>(), 2).unwrap();
    // gap 1/(2l) < 0.05 first at l = 11.
    assert_eq!((r.l, r.found), (11, true));
    let miss = find_l_star(&ctx, 0.1, 1e-6, &[2, 4], 2).unwrap();
    assert!(!miss.found && miss.l == 4);
}

#[test]
fn eps_schedule_halves_and_its_tail_equals_the_term() {
    for n in 0..10 {
        assert_eq!(eps_schedule(0.1, n + 1) * 2.0, eps_schedule(0.1, n));
        let tail: f64 = (n + 1..80).map(|m| eps_schedule(0.1, m)).sum();
        assert!((tail - eps_schedule(0.1, n)).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn hex_floats_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(parse_hex_float(&hex_float(x)).unwrap().to_bits(), bits);
    }

    #[test]
    fn shears_preserve_area(a1 in -0.1f64..0.1, b1 in -0.1f64..0.1, a2 in -0.05f64..0.05, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let m = small_shear(true, &[a1, a2], &[b1, 0.0], 3).then(&small_shear(false, &[b1], &[a2], 2));
        prop_assert!((m.jacobian_det([x, y]) - 1.0).abs() < 1e-12);
        let back = m.inverse().apply(m.apply([x, y]));
        let gap = |u: f64, v: f64| { let d = (u - v).rem_euclid(1.0); d.min(1.0 - d) };
        prop_assert!(gap(back[0], x) < 1e-12 && gap(back[1], y) < 1e-12);
    }
}

#[test]
fn determinant_survives_long_compositions() {
    let mut m = AnalyticMap::identity();
    for i in 0..120 {
        m = m.then(&small_shear(i % 2 == 0, &[0.0, 0.4], &[0.3, 0.0], 1 + (i % 3) as u64));
    }
    let (mut worst_plain, mut worst_qr): (f64, f64) = (0.0, 0.0);
    for x in sample_points(200, 5) {
        let (_, j) = m.apply_with_jacobian(x);
        worst_plain = worst_plain.max((j[0][0] * j[1][1] - j[0][1] * j[1][0] - 1.0).abs());
        worst_qr = worst_qr.max((m.jacobian_det(x) - 1.0).abs());
    }
    assert!(worst_qr < 1e-12, "{worst_qr}");
    assert!(worst_plain > worst_qr, "plain {worst_plain}");
}
