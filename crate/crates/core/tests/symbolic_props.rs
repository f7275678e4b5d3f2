use num_integer::Integer;
use proptest::prelude::*;

use abc_circular::params::schedule;
use abc_circular::symbolic::{
    canonical_factor, circular_op, empirical_cylinder_frequency, subshift_member, unique_readability_check,
    uniformity_check, ConstructionSequence, Letter, Membership, Word, WordFamily,
};

fn params() -> impl Strategy<Value = (u64, u64, u64, u64)> {
    (1u64..=12, 1u64..=4, 2u64..=8).prop_flat_map(|(q, k, l)| {
        let ps: Vec<u64> = (0..q).filter(|p| p.gcd(&q) == 1).collect();
        (prop::sample::select(ps), Just(q), Just(k), Just(l))
    })
}

fn distinct_words(k: u64, q: u64) -> Vec<Word> {
    (0..k).map(|j| Word((0..q).map(|i| Letter::Sym((j * q + i) as u16)).collect())).collect()
}

proptest! {
    #[test]
    fn length_and_boundary_share((p, q, k, l) in params()) {
        let w = circular_op(&distinct_words(k, q), p, q, l).unwrap();
        prop_assert_eq!(w.len() as u64, k * l * q * q);
        prop_assert_eq!(w.count_boundary() as u64 * l, w.len() as u64);
    }

    #[test]
    fn factor_is_idempotent_and_shift_equivariant(syms in prop::collection::vec(0u8..5, 1..60), shift in 0usize..60) {
        let x = Word(syms.iter().map(|&c| match c { 3 => Letter::B, 4 => Letter::E, s => Letter::Sym(s as u16) }).collect());
        let f = canonical_factor(&x);
        prop_assert_eq!(canonical_factor(&f), f.clone());
        let sh = shift % x.len();
        let rotated = Word(x.0[sh..].iter().chain(&x.0[..sh]).copied().collect());
        let frot = Word(f.0[sh..].iter().chain(&f.0[..sh]).copied().collect());
        prop_assert_eq!(canonical_factor(&rotated), frot);
    }

    #[test]
    fn compact_text_round_trip(syms in prop::collection::vec(0u16..10, 1..40)) {
        let w = Word::from_syms(&syms);
        let fam = WordFamily { stage: 3, q: w.len().to_string(), words: vec![w.clone(), w] };
        prop_assert_eq!(WordFamily::parse(&fam.to_text()).unwrap(), fam);
    }
}

#[test]
fn sequence_words_are_members_and_uniform() {
    let ps = schedule(&[2, 2], &[2, 4], &[2, 2, 2]).unwrap();
    let seq = ConstructionSequence::build(ps, vec![vec![vec![0, 1], vec![1, 0]], vec![vec![0, 1], vec![1, 0]]]).unwrap();
    assert_eq!(seq.stages[1].iter().map(Word::compact).collect::<Vec<_>>(), ["b0b1", "b1b0"]);
    for n in 0..2 {
        assert!(uniformity_check(&seq, n).unwrap().strongly_uniform);
    }
    // With q_0 = 1 = l_0/2 the stage-1 family is not uniquely readable: b1b0 sits inside b0b1·b0b1.
    assert!(unique_readability_check(&seq.stages[1]).is_some());
    let w2 = &seq.stages[2][0];
    assert_eq!(w2.len(), 128);
    let window = Word(w2.0[10..30].to_vec());
    assert!(matches!(subshift_member(&window, &seq), Membership::Yes { stage: 2, .. }));
    let freq = empirical_cylinder_frequency(&seq.stages[1][0], w2).to_f64();
    let copies = 1.0 * 4.0 * 3.0;
    let expected = copies / 128.0;
    assert!(freq >= expected && freq - expected <= 3.0 / 4.0 + 1.0 / 4.0, "{freq} vs {expected}");
}

#[test]
fn repeated_letter_family_is_not_readable() {
    let w = circular_op(&[Word::from_syms(&[0, 0])], 1, 2, 2).unwrap();
    assert_eq!(w.compact(), "bb00b00e");
    assert!(unique_readability_check(&[Word::from_syms(&[0, 0, 0])]).is_some());
}
