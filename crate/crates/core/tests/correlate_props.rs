mod common;

use std::sync::OnceLock;

use mflab::correlate::{
    local_fourier_sup, mrt_stat, short_interval_stat, twisted_short_interval_stat, ud_statistic, Path,
};
use mflab::pretense::aperiodicity_mean;
use mflab::sieve::primes_for;
use mflab::{build_block, correlation, evaluate, Correlator, FunctionSpec, SievedBlock, Table};
use num_complex::Complex;
use proptest::prelude::*;

const HI: u64 = 60_001;

fn block() -> &'static SievedBlock {
    static BLOCK: OnceLock<SievedBlock> = OnceLock::new();
    BLOCK.get_or_init(|| build_block(1, HI, &primes_for(HI)).unwrap())
}

fn table(spec: &FunctionSpec) -> Table {
    evaluate(spec, block()).unwrap()
}

fn shifts(len: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-20_000i64..20_000, len)
}

#[test]
fn small_hand_examples() {
    let lam = table(&FunctionSpec::Liouville);
    let c = correlation(&[&lam, &lam], &[1], 10).unwrap();
    assert!((c - Complex::new(-0.4, 0.0)).norm() < 1e-15);
    let one = table(&FunctionSpec::One);
    assert_eq!(correlation(&[&one, &one], &[7], 1000).unwrap(), Complex::new(1.0, 0.0));
    // m = 7 lands on f(0) = 0.
    assert_eq!(correlation(&[&one, &one], &[-7], 1000).unwrap(), Complex::new(0.999, 0.0));
    let z = |x: f64| Complex::new(x, 0.0);
    assert_eq!(ud_statistic(&[z(1.0), z(-1.0)], z(0.0)).unwrap(), 1.0);
    let harmonic: Vec<_> = (1..=4).map(|n| z(1.0 / n as f64)).collect();
    assert!((ud_statistic(&harmonic, z(0.0)).unwrap() - 25.0 / 48.0).abs() < 1e-15);
    assert!(ud_statistic::<f64>(&[], z(0.0)).is_err());
}

#[test]
fn single_table_correlation_is_the_mean() {
    for spec in [FunctionSpec::Liouville, FunctionSpec::RootOfUnity(5), FunctionSpec::Archimedean(2.5)] {
        let t = table(&spec);
        let c = correlation(&[&t], &[], 50_000).unwrap();
        let mean = aperiodicity_mean(&t, 1, 0, 50_000).unwrap();
        assert!((c - mean).norm() <= 1e-13);
    }
    let lam = table(&FunctionSpec::Liouville);
    let one = table(&FunctionSpec::One);
    let shifted = correlation(&[&lam, &one], &[5], 50_000).unwrap();
    let mean = aperiodicity_mean(&lam, 1, 0, 50_000).unwrap();
    assert!((shifted - mean).norm() <= 1e-13);
}

#[test]
fn short_interval_examples() {
    let one = table(&FunctionSpec::One);
    assert_eq!(short_interval_stat(&one, 1000, 37).unwrap(), 1.0);
    assert!(twisted_short_interval_stat(&one, 1000, 40, 0.5).unwrap() <= 1.0 / 40.0);
    let chi = table(&FunctionSpec::character(4, vec![1]));
    assert!(short_interval_stat(&chi, 10_000, 400).unwrap() <= 3.0 / 400.0);
    assert_eq!(mrt_stat(&one, 1000, 10).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn averages_lie_in_unit_disc(f in common::spec(), g in common::spec(), h in common::spec(), s in shifts(2), m in 1u64..30_000) {
        let (tf, tg, th) = (table(&f), table(&g), table(&h));
        let c = correlation(&[&tf, &tg, &th], &s, m).unwrap();
        prop_assert!(c.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn conjugation_conjugates(f in common::spec(), g in common::spec(), s in shifts(1), m in 1u64..30_000) {
        let (tf, tg) = (table(&f), table(&g));
        let (cf, cg) = (table(&f.clone().conjugate()), table(&g.clone().conjugate()));
        let c = correlation(&[&tf, &tg], &s, m).unwrap();
        let d = correlation(&[&cf, &cg], &s, m).unwrap();
        prop_assert!((d - c.conj()).norm() <= 1e-12);
    }

    #[test]
    fn evaluation_paths_agree(f in common::finite_spec(), g in common::finite_spec(), s in shifts(2), m in 1u64..30_000) {
        let (tf, tg) = (table(&f), table(&g));
        let tables = [&tf, &tg, &tf];
        let reference = Correlator::new(&tables).with_path(Path::Complex).correlation(&s, m).unwrap();
        for path in [Path::Histogram, Path::Planes] {
            if let Ok(c) = Correlator::new(&tables).with_path(path).correlation(&s, m) {
                prop_assert!((c - reference).norm() <= 1e-12, "{:?}: {} vs {}", path, c, reference);
            }
        }
    }

    #[test]
    fn nested_matches_direct(f in common::spec(), s in shifts(2), grid in prop::collection::btree_set(1u64..30_000, 1..5)) {
        let t = table(&f);
        let grid: Vec<u64> = grid.into_iter().collect();
        let c = Correlator::new(&[&t, &t, &t]);
        let nested = c.nested(&s, &grid).unwrap();
        for (&m, z) in grid.iter().zip(&nested) {
            prop_assert!((c.correlation(&s, m).unwrap() - z).norm() <= 1e-12);
        }
    }

    #[test]
    fn fourier_sup_dominates_twists(f in common::spec(), m in 1u64..3_000, n in 2u64..40, os in 2u64..5, k in 0u64..200) {
        let t = table(&f);
        let sup = local_fourier_sup(&t, m, n, os).unwrap();
        prop_assert!((sup.gap - std::f64::consts::PI / os as f64).abs() < 1e-15);
        let k = k % (os * n);
        let twisted = twisted_short_interval_stat(&t, m, n, k as f64 / (os * n) as f64).unwrap();
        prop_assert!(sup.value + 1e-12 >= twisted);
        prop_assert!(sup.value + 1e-12 >= short_interval_stat(&t, m, n).unwrap());
    }
}

#[test]
fn thread_count_does_not_change_bits() {
    let lam = table(&FunctionSpec::Liouville);
    let f3 = table(&FunctionSpec::Archimedean(1.25));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let a = Correlator::new(&[&lam, &f3, &lam]).nested(&[17, -300], &[1000, 20_000, 50_000]).unwrap();
                let b = short_interval_stat(&f3, 50_000, 100).unwrap();
                (a, b)
            })
    };
    let base = run(1);
    for threads in [2, 4, 8] {
        assert_eq!(run(threads), base);
    }
}
