//! The transect itinerary and the closed-form circular operator must agree letter for letter.

use num_integer::Integer;
use proptest::prelude::*;

use abc_circular::symbolic::{circular_op, unique_readability_check, Letter, Word};
use abc_circular::transect::{simulate_transect, transect_name};

fn words(k: u64, q: u64, seed: u64) -> Vec<Word> {
    (0..k).map(|j| Word((0..q).map(|i| Letter::Sym(((j * 31 + i * 7 + seed) % 5) as u16)).collect())).collect()
}

/// Tuples `(w_0, rotation of w_1..w_{k-1})`: `w_0` marks tuple starts, so the
/// tuple set is itself uniquely readable over the alphabet of words.
fn marked_tuples(ws: &[Word]) -> Vec<Vec<Word>> {
    let rest = &ws[1..];
    (0..rest.len().max(1))
        .map(|r| std::iter::once(ws[0].clone()).chain((0..rest.len()).map(|j| rest[(j + r) % rest.len()].clone())).collect())
        .collect()
}

#[test]
fn rotated_tuples_lose_readability_when_q_is_one() {
    let (a, c) = (Word::from_syms(&[0]), Word::from_syms(&[1]));
    let family = [circular_op(&[a.clone(), c.clone()], 0, 1, 3).unwrap(), circular_op(&[c, a], 0, 1, 3).unwrap()];
    assert!(unique_readability_check(&family).is_some());
}

#[test]
fn exhaustive_small_parameters() {
    let mut checked = 0;
    for q in 1..=12u64 {
        for l in 2..=8u64 {
            if 2 * q >= l {
                continue;
            }
            for k in 1..=4u64 {
                for p in (0..q.max(2)).filter(|p| p.gcd(&q) == 1) {
                    let ws = words(k, q, p + l);
                    let tr = simulate_transect(p, q, k, l).unwrap();
                    assert_eq!(transect_name(&tr, &ws).unwrap(), circular_op(&ws, p, q, l).unwrap(), "p={p} q={q} k={k} l={l}");
                    let family: Vec<Word> = marked_tuples(&ws).iter().map(|t| circular_op(t, p, q, l).unwrap()).collect();
                    assert_eq!(unique_readability_check(&family), None, "p={p} q={q} k={k} l={l}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn random_parameters_beyond_the_acceptance_range(q in 1u64..9, k in 1u64..4, l in 2u64..7, seed in 0u64..100) {
        let p = (1..=q).find(|p| (p + seed) % q != 0 && ((p + seed) % q).gcd(&q) == 1).map(|p| (p + seed) % q).unwrap_or(1);
        let ws = words(k, q, seed);
        let tr = simulate_transect(p, q, k, l).unwrap();
        prop_assert_eq!(transect_name(&tr, &ws).unwrap(), circular_op(&ws, p, q, l).unwrap());
    }
}
