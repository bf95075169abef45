//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mflab --test acceptance --release`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mflab::correlate::{katai_pair_stat, mrt_stat, short_interval_stat};
use mflab::func::UnitGroup;
use mflab::patterns::{Counter, ResidueSlot};
use mflab::pretense::{distance_sq, min_distance, strong_aperiodicity_scan, ScanConfig, SearchConfig, Verdict};
use mflab::scalar::e;
use mflab::sieve::primes_for;
use mflab::{
    build_block, correlation_scan, evaluate, EvaluationWindow, FunctionSpec, LatticeBox, PatternEngine,
    PatternSpec, PrimeList, ShiftFamily, SievedBlock, Table,
};

/// Criteria whose stated bound cannot hold; reported but not fatal.
const UNATTAINABLE: &[(u32, &str)] = &[
    (
        4,
        "growth of M between 1e5 and 1e6 is at most 2 * sum 1/p over that range, and about half that for t != 0; \
         every liouville curve is increasing but the 0.2 step is out of reach at these cutoffs",
    ),
    (
        11,
        "a(2n)conj(a(3n)) = e(-nα) sums to |sin(πNα)|/(N sin πα); the stated bound is half of 1/(N sin πα)",
    ),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Shared {
    block: SievedBlock,
    lambda: Table,
}

const M_BIG: u64 = 10_000_000;
const BLOCK_HI: u64 = 10_600_000;

type Criterion = (u32, &'static str, fn(&Shared) -> Outcome);

fn main() -> ExitCode {
    let start = Instant::now();
    let block = build_block(1, BLOCK_HI, &primes_for(BLOCK_HI)).expect("sieve");
    let lambda = evaluate(&FunctionSpec::Liouville, &block).expect("liouville");
    let shared = Shared { block, lambda };
    println!("shared block [1, {BLOCK_HI}) ready in {:.1} s", start.elapsed().as_secs_f64());

    let criteria: Vec<Criterion> = vec![
        (1, "sieve oracle equivalence", c1_sieve),
        (2, "expansion identities exact", c2_identities),
        (3, "distance properties", c3_distance),
        (4, "M(f;N) behaviour and scan verdicts", c4_min_distance),
        (5, "averaged polynomial correlations", c5_polynomial),
        (6, "fractional shifts", c6_fractional),
        (7, "single-correlation decay", c7_mrt),
        (8, "short intervals", c8_short),
        (9, "pattern densities", c9_patterns),
        (10, "determinism across thread counts", c10_determinism),
        (11, "Katai statistic sanity", c11_katai),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run(&shared);
        let secs = t.elapsed().as_secs_f64();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status}  {name}: {} [{secs:.1} s]", o.detail);
        if !o.pass {
            match UNATTAINABLE.iter().find(|(k, _)| *k == id) {
                Some((_, why)) => println!("             unattainable as stated: {why}"),
                None => unexpected += 1,
            }
        }
    }
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

/// Trial-division factorisation, independent of the library.
fn oracle(mut n: u64) -> (u8, u8, bool) {
    let (mut omega, mut big, mut squarefree) = (0u8, 0u8, true);
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            omega += 1;
            let mut k = 0;
            while n.is_multiple_of(p) {
                n /= p;
                k += 1;
            }
            big += k;
            squarefree &= k == 1;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        omega += 1;
        big += 1;
    }
    (omega, big, squarefree)
}

fn c1_sieve(_: &Shared) -> Outcome {
    let hi = 1_000_001;
    let t = Instant::now();
    let block = single_thread(|| build_block(1, hi, &PrimeList::up_to(1000)).unwrap());
    let secs = t.elapsed().as_secs_f64();
    let mut mismatches = 0u64;
    for n in 1..hi {
        let (w, big, sf) = oracle(n);
        let lambda = if big % 2 == 0 { 1 } else { -1 };
        let mu = if !sf {
            0
        } else if w % 2 == 0 {
            1
        } else {
            -1
        };
        if block.omega(n) != w || block.big_omega(n) != big || block.lambda(n) != lambda || block.mu(n) != mu {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && secs <= 10.0,
        format!("{mismatches} mismatches for n <= 10^6; sieve {secs:.3} s single-threaded"),
    )
}

fn c2_identities(_: &Shared) -> Outcome {
    let hi = 100_001;
    let block = build_block(1, hi, &primes_for(hi)).unwrap();
    let mut worst = 0f64;
    let mut exact_failures = 0u64;
    for b in [2u32, 3, 4] {
        let zeta = e::<f64>(1.0 / b as f64);
        for (counter, spec) in [
            (Counter::Omega, FunctionSpec::RootOfUnity(b)),
            (Counter::BigOmega, FunctionSpec::CompleteRootOfUnity(b)),
        ] {
            let table: Table = evaluate(&spec, &block).unwrap();
            let exact = table.exact().expect("root-of-unity tables are exact");
            for n in 1..hi {
                let count = match counter {
                    Counter::Omega => oracle(n).0,
                    Counter::BigOmega => oracle(n).1,
                } as u32;
                // Exact representation: f_b(n) = ζ^{count mod b}.
                let k = exact.exponents()[(n - 1) as usize] as u32 * b / exact.order();
                if k != count % b {
                    exact_failures += 1;
                }
                let f = table.value(n);
                for a in 0..b {
                    let indicator = if count % b == a { 1.0 } else { 0.0 };
                    let expansion: Complex<f64> =
                        (0..b).map(|r| zeta.powi(-((a * r) as i32)) * f.powu(r)).sum::<Complex<f64>>() / b as f64;
                    worst = worst.max((expansion - indicator).norm());
                }
            }
        }
    }
    let lambda: Table = evaluate(&FunctionSpec::Liouville, &block).unwrap();
    let mut sign_worst = 0f64;
    for n in 1..hi {
        let f = lambda.value(n).re;
        for eps in [1.0f64, -1.0] {
            let indicator = if f == eps { 1.0 } else { 0.0 };
            sign_worst = sign_worst.max(((1.0 + eps * f) / 2.0 - indicator).abs());
        }
    }
    outcome(
        worst <= 1e-12 && exact_failures == 0 && sign_worst == 0.0,
        format!("max residue error {worst:.2e}, exponent mismatches {exact_failures}, sign error {sign_worst:.1e}"),
    )
}

fn random_spec(rng: &mut ChaCha8Rng, depth: u32) -> FunctionSpec {
    let pick = rng.gen_range(0..if depth == 0 { 7 } else { 10 });
    match pick {
        0 => FunctionSpec::Liouville,
        1 => FunctionSpec::Mobius,
        2 => FunctionSpec::One,
        3 => {
            let q = rng.gen_range(1..=30u64);
            let orders = UnitGroup::new(q).unwrap().generator_orders();
            FunctionSpec::character(q, orders.iter().map(|&o| rng.gen_range(0..o)).collect())
        }
        4 => FunctionSpec::RootOfUnity(rng.gen_range(1..=12)),
        5 => FunctionSpec::CompleteRootOfUnity(rng.gen_range(1..=12)),
        6 => FunctionSpec::Archimedean(rng.gen_range(-50.0..50.0)),
        7 => random_spec(rng, depth - 1).times(random_spec(rng, depth - 1)),
        8 => random_spec(rng, depth - 1).power(rng.gen_range(1..=4)),
        _ => random_spec(rng, depth - 1).conjugate(),
    }
}

fn c3_distance(_: &Shared) -> Outcome {
    let primes = PrimeList::up_to(100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let slack = 1e-9;
    let mut violations = 0;
    let mut checks = 0;
    let d = |f: &FunctionSpec, g: &FunctionSpec, n: u64| distance_sq::<f64>(f, g, n, &primes).unwrap().sqrt();
    for _ in 0..200 {
        let f: Vec<FunctionSpec> = (0..4).map(|_| random_spec(&mut rng, 2)).collect();
        for n in [1_000u64, 10_000, 100_000] {
            // D(f,g) <= D(f,h) + D(h,g)
            if d(&f[0], &f[1], n) > d(&f[0], &f[2], n) + d(&f[2], &f[1], n) + slack {
                violations += 1;
            }
            // D(f1 f2, g1 g2) <= D(f1,g1) + D(f2,g2)
            let lhs = d(&f[0].clone().times(f[1].clone()), &f[2].clone().times(f[3].clone()), n);
            if lhs > d(&f[0], &f[2], n) + d(&f[1], &f[3], n) + slack {
                violations += 1;
            }
            checks += 2;
        }
    }
    let v: f64 = distance_sq(&FunctionSpec::Liouville, &FunctionSpec::One, 20, &primes).unwrap();
    let value_ok = (v - 2.9109556).abs() <= 1e-6;
    outcome(
        violations == 0 && value_ok,
        format!("{violations} violations in {checks} inequality checks; D^2(liouville, one; 20) = {v:.10}"),
    )
}

fn c4_min_distance(_: &Shared) -> Outcome {
    let primes = PrimeList::up_to(1_000_000);
    let search = SearchConfig::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [100u64, 10_000, 1_000_000] {
        let m = min_distance::<f64>(&FunctionSpec::One, n, &search, &primes).unwrap();
        ok &= m.value == 0.0;
    }
    let arch = min_distance::<f64>(&FunctionSpec::Archimedean(0.5), 10_000, &search, &primes).unwrap();
    ok &= arch.value <= 1e-6 && (arch.t_star - 0.5).abs() <= 1e-3;
    notes.push(format!("M(arch(0.5);1e4) = {:.2e} at t* = {:.7}", arch.value, arch.t_star));
    let f3: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .map(|&n| min_distance::<f64>(&FunctionSpec::RootOfUnity(3), n, &search, &primes).unwrap().value)
        .collect();
    ok &= f3.windows(2).all(|w| w[0] < w[1]);
    notes.push(format!("M(f_3) = {:.4}, {:.4}, {:.4}", f3[0], f3[1], f3[2]));
    let cfg = ScanConfig::default();
    let cutoffs = [10_000u64, 100_000, 1_000_000];
    let lam = strong_aperiodicity_scan::<f64>(&FunctionSpec::Liouville, 4, &cutoffs, &cfg, &primes).unwrap();
    let min_growth = lam
        .curves
        .iter()
        .filter_map(|c| c.top_growth())
        .fold(f64::INFINITY, f64::min);
    let chi4 = FunctionSpec::character(4, vec![1]);
    let chi = strong_aperiodicity_scan::<f64>(&chi4, 4, &cutoffs, &cfg, &primes).unwrap();
    ok &= lam.verdict == Verdict::EvidenceStrongAperiodic && chi.verdict == Verdict::EvidenceNot;
    let increasing = lam
        .curves
        .iter()
        .all(|c| c.points.windows(2).all(|w| w[0].m_value < w[1].m_value));
    let mertens: f64 = primes
        .as_slice()
        .iter()
        .filter(|&&p| p > 100_000 && p <= 1_000_000)
        .map(|&p| 1.0 / p as f64)
        .sum();
    notes.push(format!(
        "liouville -> {} (min growth {min_growth:.3}, all curves increasing: {increasing}, \
         sum 1/p over (1e5, 1e6] = {mertens:.4}), chi_4 -> {}",
        lam.verdict, chi.verdict
    ));
    outcome(ok, notes.join("; "))
}

fn polynomial_series(shared: &Shared) -> mflab::CorrelationSeries {
    let family = ShiftFamily::parse("n,n^2").unwrap();
    let lattice = LatticeBox::parse("1:200").unwrap();
    let window = EvaluationWindow::new(vec![100_000, 1_000_000, M_BIG]).unwrap();
    let t = &shared.lambda;
    correlation_scan(&[t, t, t], &family, &lattice, &window, false).unwrap()
}

fn c5_polynomial(shared: &Shared) -> Outcome {
    let s = polynomial_series(shared);
    let (first, last) = (s.summary[0], s.summary[2]);
    outcome(
        last <= 0.02 && last < first,
        format!(
            "E_n|c(M;n)| = {:.5} (1e5), {:.5} (1e6), {:.5} (1e7)",
            s.summary[0], s.summary[1], s.summary[2]
        ),
    )
}

fn c6_fractional(shared: &Shared) -> Outcome {
    let family = ShiftFamily::fractional(vec![1.5, 2.5]).unwrap();
    let lattice = LatticeBox::parse("1:200").unwrap();
    let window = EvaluationWindow::new(vec![M_BIG]).unwrap();
    let t = &shared.lambda;
    let s = correlation_scan(&[t, t, t], &family, &lattice, &window, false).unwrap();
    outcome(s.summary[0] <= 0.02, format!("mean |c| = {:.5} at M = 1e7", s.summary[0]))
}

fn c7_mrt(shared: &Shared) -> Outcome {
    let lam = mrt_stat(&shared.lambda, M_BIG, 100).unwrap();
    let chi: Table = evaluate(&FunctionSpec::character(3, vec![1]), &shared.block).unwrap();
    let c3 = mrt_stat(&chi, 1_000_000, 99).unwrap();
    outcome(
        lam <= 0.02 && (c3 - 4.0 / 9.0).abs() <= 0.01,
        format!("mrt(liouville, 1e7, 100) = {lam:.5}; mrt(chi_3, 1e6, 99) = {c3:.6}"),
    )
}

fn c8_short(shared: &Shared) -> Outcome {
    let v: Vec<f64> = [10u64, 100, 1000]
        .iter()
        .map(|&n| short_interval_stat(&shared.lambda, M_BIG, n).unwrap())
        .collect();
    outcome(
        v[0] > v[1] && v[1] > v[2] && v[2] <= 0.1,
        format!("N = 10, 100, 1000: {:.5}, {:.5}, {:.5}", v[0], v[1], v[2]),
    )
}

fn c9_patterns(shared: &Shared) -> Outcome {
    let family = ShiftFamily::parse("n,n^2").unwrap();
    let sign = PatternEngine::<f64>::new(PatternSpec::Sign(vec![FunctionSpec::Liouville; 3]), &shared.block).unwrap();
    let slots = [2u32, 3, 2].map(|modulus| ResidueSlot {
        modulus,
        counter: Counter::Omega,
    });
    let residue = PatternEngine::<f64>::new(PatternSpec::Residue(slots.to_vec()), &shared.block).unwrap();
    let (mut sign_good, mut residue_good) = (0, 0);
    let mut agree = true;
    let mut partition = true;
    let mut worst_agreement = 0f64;
    for n in 1..=200i64 {
        let shifts = family.shifts(&[n]).unwrap();
        for (engine, good, tol) in [(&sign, &mut sign_good, 0.05), (&residue, &mut residue_good, 0.05)] {
            let all = engine.all(&shifts, M_BIG).unwrap();
            if all.iter().all(|r| (r.density - r.target).abs() <= tol) {
                *good += 1;
            }
            for r in &all {
                worst_agreement = worst_agreement
                    .max((r.density - r.expansion_density).abs())
                    .max(r.expansion_imag.abs());
                agree &= r.agrees(1e-9);
            }
            partition &= all.iter().map(|r| r.count).sum::<u64>() == M_BIG;
        }
    }
    outcome(
        sign_good >= 180 && residue_good >= 180 && agree && partition,
        format!(
            "sign within 0.05 of 1/8 for {sign_good}/200 n, residue within 0.05 of 1/12 for {residue_good}/200 n; \
             max |direct - expansion| {worst_agreement:.1e}; counts partition M: {partition}"
        ),
    )
}

fn c10_determinism(shared: &Shared) -> Outcome {
    let runs: Vec<Vec<u64>> = [1usize, 4, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let s = pool.install(|| polynomial_series(shared));
            s.values
                .iter()
                .flatten()
                .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
                .chain(s.summary.iter().map(|x| x.to_bits()))
                .collect()
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("{} values bit-identical for 1, 4, 8 threads: {same}", runs[0].len()))
}

fn c11_katai(_: &Shared) -> Outcome {
    let alpha = 2f64.sqrt() - 1.0;
    let n = 100_000u64;
    let seq: Vec<Complex<f64>> = (1..=3 * n).map(|k| e((k as f64 * alpha).fract())).collect();
    let a = Table::from_sequence(1, seq);
    let v = katai_pair_stat(&a, 2, 3, n).unwrap().norm();
    let bound = 1.0 / (n as f64 * 2.0 * (PI * alpha).sin());
    let closed = (PI * n as f64 * alpha).sin().abs() / (n as f64 * (PI * alpha).sin());
    outcome(
        v <= bound + 1e-9,
        format!("|stat| = {v:.6e}, stated bound {bound:.6e}, closed form {closed:.6e}"),
    )
}
