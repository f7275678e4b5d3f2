use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use abc_circular::abc::Grid;
use abc_circular::analytic::{approx_permutation, good_set_fraction, jacobian_deviation};
use abc_circular::blockslide::transposition;
use abc_circular::par;
use abc_circular::symbolic::{circular_op, Word};
use abc_circular::transect::{simulate_transect, transect_name};

fn thread_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    if all > 1 { vec![1, all] } else { vec![1] }
}

fn monte_carlo(c: &mut Criterion) {
    let perm = transposition(1, 0, 4, 1, 2).unwrap().atom_permutation(Grid::new(4, 2), 1).unwrap();
    let (map, _) = approx_permutation(&perm, 0.05, 0, 1).unwrap();
    let mut g = c.benchmark_group("good_set_fraction_4x2");
    g.sample_size(10);
    for n in thread_counts() {
        g.bench_with_input(BenchmarkId::new("threads", n), &n, |b, &n| {
            b.iter(|| par::with_threads(n, || good_set_fraction(&map, &perm, 2_000, 7)))
        });
    }
    g.bench_function("jacobian_sequential_loop", |b| b.iter(|| jacobian_deviation(&map, 200, 3)));
    g.finish();
}

fn oracle_sweep(c: &mut Criterion) {
    let cases: Vec<(u64, u64, u64, u64)> = (1..=5u64)
        .flat_map(|q| (2 * q + 1..=8).map(move |l| (q, l)))
        .flat_map(|(q, l)| (1..=4u64).map(move |k| (q, l, k)))
        .flat_map(|(q, l, k)| (1..=q).filter(move |&p| num_integer::gcd(p, q) == 1).map(move |p| (p, q, k, l)))
        .collect();
    let check = |&(p, q, k, l): &(u64, u64, u64, u64)| {
        let words: Vec<Word> = (0..k).map(|j| Word::from_syms(&(0..q).map(|i| ((i + j) % 3) as u16).collect::<Vec<_>>())).collect();
        let tr = simulate_transect(p, q, k, l).unwrap();
        transect_name(&tr, &words).unwrap() == circular_op(&words, p, q, l).unwrap()
    };
    let mut g = c.benchmark_group("transect_oracle_sweep");
    g.sample_size(10);
    for n in thread_counts() {
        g.bench_with_input(BenchmarkId::new("par_threads", n), &n, |b, &n| {
            b.iter(|| par::with_threads(n, || par::map(&cases, check).into_iter().all(|x| x)))
        });
    }
    g.bench_function("plain_iterator", |b| b.iter(|| cases.iter().all(check)));
    g.finish();
}

criterion_group!(benches, monte_carlo, oracle_sweep);
criterion_main!(benches);
