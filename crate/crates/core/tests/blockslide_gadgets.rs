use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use abc_circular::abc::{Grid, GridPermutation};
use abc_circular::blockslide::{column_interchange, double_two_cycle, permutation_to_blockslide, transposition, BlockSlideMap};

/// Image `(col, row)` of every atom, with the map required to move atoms rigidly.
fn action(map: &BlockSlideMap, k: usize, q: usize, s: usize) -> Vec<(usize, usize)> {
    let g = Grid::new(k * q, s);
    let p = map.atom_permutation(g, q).expect("rigid on the grid");
    (0..g.len()).map(|a| (g.col(p.apply(a)), g.row(p.apply(a)))).collect()
}

/// Expected action from a per-block rule on `(residue, row)`.
fn expected(k: usize, q: usize, s: usize, rule: impl Fn(usize, usize) -> (usize, usize)) -> Vec<(usize, usize)> {
    let g = Grid::new(k * q, s);
    (0..g.len())
        .map(|a| {
            let (c, r) = (g.col(a), g.row(a));
            let (i, j) = rule(c % k, r);
            (c - c % k + i, j)
        })
        .collect()
}

#[test]
fn gadgets_at_figure_parameters() {
    for (k, q) in [(4, 3), (6, 3)] {
        for s in 1..=3 {
            for i in 0..k - 1 {
                let want = expected(k, q, s, |c, r| (if c == i { i + 1 } else if c == i + 1 { i } else { c }, r));
                assert_eq!(action(&column_interchange(i, k, q), k, q, s), want, "interchange {i} k={k} q={q} s={s}");
            }
            let swap = |c: usize, r: usize| match (c, r) {
                (0, r) if r == s - 1 => (1, r),
                (1, r) if r == s - 1 => (0, r),
                (2, r) if r == s - 1 => (3, r),
                (3, r) if r == s - 1 => (2, r),
                other => other,
            };
            assert_eq!(action(&double_two_cycle(k, q, s).unwrap(), k, q, s), expected(k, q, s, swap), "double k={k} s={s}");
            for i in 0..k {
                for j in 0..s {
                    if (i, j) == (0, s - 1) {
                        continue;
                    }
                    let rule = |c: usize, r: usize| {
                        if (c, r) == (0, s - 1) {
                            (i, j)
                        } else if (c, r) == (i, j) {
                            (0, s - 1)
                        } else {
                            (c, r)
                        }
                    };
                    let t = transposition(i, j, k, q, s).unwrap();
                    assert_eq!(action(&t, k, q, s), expected(k, q, s, rule), "transposition ({i},{j}) k={k} q={q} s={s}");
                }
            }
        }
    }
}

/// A uniformly random untwisted permutation commuting with the `1/q` shift.
pub fn random_block_permutation(rng: &mut ChaCha8Rng, k: usize, q: usize, s: usize) -> GridPermutation {
    let mut block: Vec<usize> = (0..k * s).collect();
    block.shuffle(rng);
    let g = Grid::new(k * q, s);
    let map = (0..g.len())
        .map(|a| {
            let (c, r) = (g.col(a), g.row(a));
            let img = block[r * k + c % k];
            g.atom(c - c % k + img % k, img / k)
        })
        .collect();
    GridPermutation::new(g, q, map).unwrap()
}

#[test]
fn random_permutations_are_realised_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut done = 0;
    while done < 200 {
        let (k, q, s) = (rng.gen_range(1..=8), rng.gen_range(1..=4), rng.gen_range(1..=4));
        if k * q * s > 64 {
            continue;
        }
        let perm = random_block_permutation(&mut rng, k, q, s);
        let map = permutation_to_blockslide(&perm).unwrap();
        let got = map.atom_permutation(perm.grid, q).unwrap();
        assert_eq!(got, perm, "k={k} q={q} s={s}");
        done += 1;
    }
}

#[test]
fn every_permutation_of_a_small_block() {
    // All 4! = 24 permutations of a 2x2 block (k = 2 forces refinement), repeated over q = 2 blocks.
    let (k, q, s) = (2, 2, 2);
    let g = Grid::new(k * q, s);
    let mut perms = vec![vec![0, 1, 2, 3]];
    for n in 1..4 {
        perms = perms
            .into_iter()
            .flat_map(|p| (0..=n).map(move |pos| {
                let mut v: Vec<usize> = p.iter().copied().filter(|&x| x != n).collect();
                v.insert(pos, n);
                v
            }))
            .collect();
        perms.sort();
        perms.dedup();
    }
    assert_eq!(perms.len(), 24);
    for block in perms {
        let map = (0..g.len())
            .map(|a| {
                let (c, r) = (g.col(a), g.row(a));
                let img = block[r * k + c % k];
                g.atom(c - c % k + img % k, img / k)
            })
            .collect();
        let perm = GridPermutation::new(g, q, map).unwrap();
        let bs = permutation_to_blockslide(&perm).unwrap();
        assert_eq!(bs.atom_permutation(g, q).unwrap(), perm);
    }
}

#[test]
fn twisted_permutations_are_rejected() {
    let g = Grid::new(4, 1);
    let swap_blocks = GridPermutation::new(g, 2, vec![2, 3, 0, 1]).unwrap();
    assert!(permutation_to_blockslide(&swap_blocks).is_err());
    let not_commuting = GridPermutation::new(g, 2, vec![1, 0, 2, 3]).unwrap();
    assert!(permutation_to_blockslide(&not_commuting).is_err());
}
