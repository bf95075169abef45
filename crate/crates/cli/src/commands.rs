//! One function per subcommand: validate the config, compute, fill an artifact.

use mflab::correlate::{
    katai_pair_stat, local_fourier_sup, mrt_stat, required_range, short_interval_stat, twisted_short_interval_stat,
};
use mflab::func::verify_multiplicative;
use mflab::patterns::{Counter, ResidueSlot};
use mflab::pretense::{distance_profile, min_distance, strong_aperiodicity_scan, ScanConfig, Twist};
use mflab::scalar::e;
use mflab::{
    correlation_scan, evaluate, EvaluationWindow, FunctionSpec, LatticeBox, Pattern, PatternEngine, PatternSpec,
    PrimeList, ShiftFamily, Table,
};
use num_complex::Complex;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::artifact::{fmt, Artifact};
use crate::config::{ExperimentConfig, PatternMode};
use crate::data;
use crate::error::CliError;

type Cfg = ExperimentConfig;

fn req<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    Cfg::require(v, name)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn nonempty<'a>(v: &'a Option<Vec<u64>>, name: &str) -> Result<&'a [u64], CliError> {
    let v = req(v, name)?;
    if v.is_empty() || v.contains(&0) {
        return Err(invalid(format!("`{name}` needs positive values")));
    }
    Ok(v)
}

fn table(spec: &FunctionSpec, block: &mflab::SievedBlock) -> Result<Table, CliError> {
    Ok(evaluate(spec, block)?)
}

fn cplx(z: Complex<f64>) -> [String; 3] {
    [fmt(z.re), fmt(z.im), fmt(z.norm())]
}

fn floats(v: &[f64]) -> Value {
    json!(v)
}

pub fn sieve(cfg: &Cfg) -> Result<Artifact, CliError> {
    let lo = cfg.lo.unwrap_or(1);
    let hi = *req(&cfg.hi, "hi")?;
    if lo == 0 || hi <= lo {
        return Err(mflab::Error::InvalidRange { lo, hi }.into());
    }
    let block = data::block(lo, hi, cfg.segment)?;
    let range = lo..hi;
    let sum_lambda: i64 = range.clone().map(|n| block.lambda(n) as i64).sum();
    let sum_mu: i64 = range.clone().map(|n| block.mu(n) as i64).sum();
    let squarefree = range.clone().filter(|&n| block.is_squarefree(n)).count();
    let primes = range.clone().filter(|&n| block.big_omega(n) == 1).count();
    let mut a = if cfg.values.unwrap_or(false) {
        let mut a = Artifact::new("sieve", &["n", "lambda", "mu", "omega", "big_omega"]);
        for n in range {
            a.row(vec![
                n.to_string(),
                block.lambda(n).to_string(),
                block.mu(n).to_string(),
                block.omega(n).to_string(),
                block.big_omega(n).to_string(),
            ]);
        }
        a
    } else {
        let mut a = Artifact::new("sieve", &["lo", "hi", "sum_lambda", "sum_mu", "squarefree", "primes"]);
        a.row(vec![
            lo.to_string(),
            hi.to_string(),
            sum_lambda.to_string(),
            sum_mu.to_string(),
            squarefree.to_string(),
            primes.to_string(),
        ]);
        a
    };
    a.set("sum_lambda", json!(sum_lambda));
    a.set("sum_mu", json!(sum_mu));
    a.set("squarefree", json!(squarefree));
    a.set("primes", json!(primes));
    Ok(a)
}

pub fn eval(cfg: &Cfg) -> Result<Artifact, CliError> {
    let f = req(&cfg.f, "f")?;
    f.validate()?;
    let lo = cfg.lo.unwrap_or(1);
    let hi = *req(&cfg.hi, "hi")?;
    if lo == 0 || hi <= lo {
        return Err(mflab::Error::InvalidRange { lo, hi }.into());
    }
    let block = data::block(1, hi, cfg.segment)?;
    let t = table(f, &block)?;
    let mut a = Artifact::new("eval", &["n", "re", "im", "abs"]);
    for n in lo..hi {
        let [re, im, abs] = cplx(t.value(n));
        a.row(vec![n.to_string(), re, im, abs]);
    }
    let report = verify_multiplicative(&t, cfg.samples.unwrap_or(1000), 0);
    a.set("function", json!(f.to_string()));
    a.set("exact_order", json!(t.exact().map(|x| x.order())));
    a.set(
        "multiplicativity",
        json!({ "checked": report.checked, "failures": report.failures }),
    );
    Ok(a)
}

fn search_of(cfg: &Cfg) -> mflab::SearchConfig {
    cfg.search.clone().unwrap_or_default()
}

pub fn distance(cfg: &Cfg) -> Result<Artifact, CliError> {
    let f = req(&cfg.f, "f")?;
    f.validate()?;
    let cutoffs = nonempty(&cfg.n_values, "N")?;
    if cutoffs.iter().any(|&n| n < 2) {
        return Err(invalid("`N` values must be at least 2"));
    }
    let top = *cutoffs.iter().max().unwrap();
    let primes = PrimeList::up_to(top);
    let twist = match (&cfg.g, cfg.t) {
        (Some(_), Some(_)) => return Err(invalid("give either `g` or `t`, not both")),
        (Some(g), None) => Some(Twist::Function(g.clone())),
        (None, Some(t)) => Some(Twist::Archimedean(t)),
        (None, None) => None,
    };
    match twist {
        Some(twist) => {
            let mut sorted = cutoffs.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            let p = distance_profile::<f64>(f, &twist, &sorted, &primes)?;
            let mut a = Artifact::new("distance", &["N", "distance_sq"]);
            for (n, v) in p.cutoffs.iter().zip(&p.values) {
                a.row(vec![n.to_string(), fmt(*v)]);
            }
            a.set("values", floats(&p.values));
            Ok(a)
        }
        None => {
            let search = search_of(cfg);
            let mut a = Artifact::new("aperiodicity", &["q", "chi_index", "N", "t_star", "M_value"]);
            let mut values = Vec::new();
            for &n in cutoffs {
                let m = min_distance::<f64>(f, n, &search, &primes)?;
                a.row(vec!["1".into(), "0".into(), n.to_string(), fmt(m.t_star), fmt(m.value)]);
                values.push(m.value);
            }
            a.set("M_values", floats(&values));
            Ok(a)
        }
    }
}

pub fn aperiodicity(cfg: &Cfg) -> Result<Artifact, CliError> {
    let f = req(&cfg.f, "f")?;
    f.validate()?;
    let cutoffs = nonempty(&cfg.n_values, "N")?;
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) || cutoffs[0] < 2 {
        return Err(invalid("cutoffs must be ascending and at least 2"));
    }
    let q_max = cfg.q_max.unwrap_or(4);
    let defaults = ScanConfig::default();
    let scan = ScanConfig {
        growth_threshold: cfg.growth_threshold.unwrap_or(defaults.growth_threshold),
        stall_threshold: cfg.stall_threshold.unwrap_or(defaults.stall_threshold),
        search: search_of(cfg),
    };
    let primes = PrimeList::up_to(*cutoffs.last().unwrap());
    let report = strong_aperiodicity_scan::<f64>(f, q_max, cutoffs, &scan, &primes)?;
    let mut a = Artifact::new("aperiodicity", &["q", "chi_index", "N", "t_star", "M_value"]);
    let mut curves = Vec::new();
    for c in &report.curves {
        for p in &c.points {
            a.row(vec![c.q.to_string(), c.chi_index.to_string(), p.n.to_string(), fmt(p.t_star), fmt(p.m_value)]);
        }
        curves.push(json!({
            "q": c.q,
            "chi_index": c.chi_index,
            "index": c.index,
            "top_growth": c.top_growth(),
        }));
    }
    a.set("verdict", json!(report.verdict.to_string()));
    a.set("curves", Value::Array(curves));
    a.set("growth_threshold", json!(scan.growth_threshold));
    a.set("stall_threshold", json!(scan.stall_threshold));
    Ok(a)
}

/// Family, box and window, with the override rule enforced.
type ShiftSetup = (ShiftFamily, LatticeBox, EvaluationWindow, Vec<Vec<i64>>);

fn shift_setup(cfg: &Cfg) -> Result<ShiftSetup, CliError> {
    let family = ShiftFamily::parse(req(&cfg.family, "family")?)?;
    if family.requires_override() && !cfg.allow_dependent.unwrap_or(false) {
        return Err(mflab::Error::DependentFamily.into());
    }
    let lattice = LatticeBox::parse(req(&cfg.lattice, "box")?)?;
    if lattice.arity() != family.arity() {
        return Err(invalid(format!(
            "box has {} coordinates, family has {} variables",
            lattice.arity(),
            family.arity()
        )));
    }
    let window = EvaluationWindow::new(req(&cfg.m_grid, "M")?.clone())?;
    let shifts = lattice
        .points()
        .map(|n| family.shifts(&n))
        .collect::<mflab::Result<Vec<_>>>()?;
    Ok((family, lattice, window, shifts))
}

fn need_for(shifts: &[Vec<i64>], m: u64) -> u64 {
    let (lo, hi) = required_range(shifts, m);
    lo.unsigned_abs().max(hi.unsigned_abs())
}

pub fn correlate(cfg: &Cfg) -> Result<Artifact, CliError> {
    let (family, lattice, window, shifts) = shift_setup(cfg)?;
    let mut functions = req(&cfg.functions, "functions")?.clone();
    if functions.len() == 1 {
        functions = vec![functions[0].clone(); family.len() + 1];
    }
    if functions.len() != family.len() + 1 {
        return Err(invalid(format!(
            "a family of {} shifts needs 1 or {} functions, got {}",
            family.len(),
            family.len() + 1,
            functions.len()
        )));
    }
    for f in &functions {
        f.validate()?;
    }
    let block = data::block_to(need_for(&shifts, window.max()), cfg.segment)?;
    let tables = functions.iter().map(|f| table(f, &block)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Table> = tables.iter().collect();
    let s = correlation_scan(&refs, &family, &lattice, &window, cfg.allow_dependent.unwrap_or(false))?;
    let mut header: Vec<String> = (1..=lattice.arity()).map(|i| format!("n_{i}")).collect();
    header.extend(["M", "re", "im", "abs"].map(String::from));
    let mut a = Artifact::new("correlate", &[]);
    a.header = header;
    for (i, point) in s.points.iter().enumerate() {
        for (k, &m) in s.m_grid.iter().enumerate() {
            let mut row: Vec<String> = point.iter().map(i64::to_string).collect();
            row.push(m.to_string());
            row.extend(cplx(s.values[k][i]));
            a.row(row);
        }
    }
    a.set("family", json!(s.family));
    a.set("independence", json!(family.independence().label()));
    a.set("functions", json!(s.functions));
    a.set("M_grid", json!(s.m_grid));
    a.set("ud_statistic", floats(&s.summary));
    a.set("differences", floats(&s.differences));
    Ok(a)
}

fn grid_pairs(cfg: &Cfg) -> Result<(Vec<u64>, Vec<u64>), CliError> {
    Ok((nonempty(&cfg.m_grid, "M")?.to_vec(), nonempty(&cfg.n_values, "N")?.to_vec()))
}

/// Table over `[1, need]` for a single function.
fn single_table(cfg: &Cfg, need: u64) -> Result<(FunctionSpec, Table), CliError> {
    let f = req(&cfg.f, "f")?.clone();
    f.validate()?;
    let block = data::block_to(need, cfg.segment)?;
    let t = table(&f, &block)?;
    Ok((f, t))
}

fn window_stat(
    kind: &'static str,
    cfg: &Cfg,
    stat: impl Fn(&Table, u64, u64) -> mflab::Result<f64>,
) -> Result<Artifact, CliError> {
    let (ms, ns) = grid_pairs(cfg)?;
    let need = ms.iter().max().unwrap() + ns.iter().max().unwrap();
    let (f, t) = single_table(cfg, need)?;
    let mut a = Artifact::new(kind, &["M", "N", "value"]);
    let mut values = Vec::new();
    for &m in &ms {
        for &n in &ns {
            let v = stat(&t, m, n)?;
            a.row(vec![m.to_string(), n.to_string(), fmt(v)]);
            values.push(v);
        }
    }
    a.set("function", json!(f.to_string()));
    a.set("values", floats(&values));
    Ok(a)
}

pub fn shortint(cfg: &Cfg) -> Result<Artifact, CliError> {
    let t = cfg.t.unwrap_or(0.0);
    let mut a = window_stat("shortint", cfg, |tab, m, n| twisted_short_interval_stat(tab, m, n, t))?;
    a.meta("t", fmt(t));
    a.set("t", json!(t));
    Ok(a)
}

pub fn mrt(cfg: &Cfg) -> Result<Artifact, CliError> {
    window_stat("mrt", cfg, mrt_stat)
}

pub fn fourier(cfg: &Cfg) -> Result<Artifact, CliError> {
    let os = cfg.oversample.unwrap_or(8);
    let (ms, ns) = grid_pairs(cfg)?;
    let need = ms.iter().max().unwrap() + ns.iter().max().unwrap();
    let (f, t) = single_table(cfg, need)?;
    let mut a = Artifact::new("fourier", &["M", "N", "oversample", "value", "gap", "short_interval"]);
    for &m in &ms {
        for &n in &ns {
            let s = local_fourier_sup(&t, m, n, os)?;
            let base = short_interval_stat(&t, m, n)?;
            a.row(vec![m.to_string(), n.to_string(), os.to_string(), fmt(s.value), fmt(s.gap), fmt(base)]);
        }
    }
    a.set("function", json!(f.to_string()));
    a.set("oversample", json!(os));
    a.set("gap", json!(std::f64::consts::PI / os as f64));
    Ok(a)
}

pub fn katai(cfg: &Cfg) -> Result<Artifact, CliError> {
    let p = *req(&cfg.p, "p")?;
    let q = *req(&cfg.q, "q")?;
    let ns = nonempty(&cfg.n_values, "N")?;
    let need = p.max(q) * ns.iter().max().unwrap();
    let (label, t) = match (&cfg.f, cfg.alpha) {
        (Some(_), Some(_)) => return Err(invalid("give either `f` or `alpha`, not both")),
        (None, None) => return Err(invalid("missing required setting `f` (or `alpha`)")),
        (None, Some(alpha)) => {
            let seq = (1..=need).map(|n| e((n as f64 * alpha).rem_euclid(1.0))).collect();
            (format!("e(n*{alpha})"), Table::from_sequence(1, seq))
        }
        (Some(_), None) => {
            let (f, t) = single_table(cfg, need)?;
            (f.to_string(), t)
        }
    };
    let mut a = Artifact::new("katai", &["p", "q", "N", "re", "im", "abs"]);
    for &n in ns {
        let [re, im, abs] = cplx(katai_pair_stat(&t, p, q, n)?);
        a.row(vec![p.to_string(), q.to_string(), n.to_string(), re, im, abs]);
    }
    a.set("sequence", json!(label));
    Ok(a)
}

fn pattern_spec(cfg: &Cfg, slots: usize) -> Result<PatternSpec, CliError> {
    match cfg.mode.unwrap_or(PatternMode::Sign) {
        PatternMode::Sign => {
            let mut fs = cfg.functions.clone().unwrap_or_else(|| vec![FunctionSpec::Liouville]);
            if fs.len() == 1 {
                fs = vec![fs[0].clone(); slots];
            }
            if fs.len() != slots {
                return Err(invalid(format!("{slots} slots need 1 or {slots} functions, got {}", fs.len())));
            }
            Ok(PatternSpec::Sign(fs))
        }
        PatternMode::Residue => {
            let mut moduli = req(&cfg.moduli, "moduli")?.clone();
            if moduli.len() == 1 {
                moduli = vec![moduli[0]; slots];
            }
            let mut counters = cfg.counters.clone().unwrap_or_else(|| vec![Counter::Omega]);
            if counters.len() == 1 {
                counters = vec![counters[0]; slots];
            }
            if moduli.len() != slots || counters.len() != slots {
                return Err(invalid(format!("{slots} slots need {slots} moduli and counters")));
            }
            Ok(PatternSpec::Residue(
                moduli
                    .into_iter()
                    .zip(counters)
                    .map(|(modulus, counter)| ResidueSlot { modulus, counter })
                    .collect(),
            ))
        }
    }
}

pub fn patterns(cfg: &Cfg) -> Result<Artifact, CliError> {
    let (family, lattice, window, shifts) = shift_setup(cfg)?;
    let spec = pattern_spec(cfg, family.len() + 1)?;
    let all = spec.patterns();
    let selected: Vec<usize> = match &cfg.patterns {
        None => (0..all.len()).collect(),
        Some(list) => list
            .iter()
            .map(|s| {
                let p = match spec {
                    PatternSpec::Sign(_) => Pattern::parse_signs(s)?,
                    PatternSpec::Residue(_) => Pattern::parse_residues(s)?,
                };
                all.iter()
                    .position(|q| *q == p)
                    .ok_or_else(|| invalid(format!("pattern `{s}` does not fit the slots")))
            })
            .collect::<Result<_, _>>()?,
    };
    let block = data::block_to(need_for(&shifts, window.max()), cfg.segment)?;
    let engine = PatternEngine::<f64>::new(spec.clone(), &block)?;
    let points: Vec<Vec<i64>> = lattice.points().collect();
    let results: Vec<_> = shifts.par_iter().map(|s| engine.all_nested(s, window.m_grid())).collect();

    let mut header: Vec<String> = (1..=lattice.arity()).map(|i| format!("n_{i}")).collect();
    header.extend(["M", "pattern", "count", "density", "expansion_density", "target"].map(String::from));
    let mut a = Artifact::new("patterns", &[]);
    a.header = header;
    a.meta("zeta", "e(1/b)");
    let mut errors = Vec::new();
    let m_len = window.m_grid().len();
    // deviation[j][k]: sum of |density - target| for pattern j at M_k.
    let mut deviation = vec![vec![0.0f64; m_len]; selected.len()];
    let mut worst_agreement = 0.0f64;
    let mut ok_points = 0usize;
    for (point, res) in points.iter().zip(results) {
        let per_m = match res {
            Ok(v) => v,
            Err(e) => {
                errors.push(json!({ "n": point, "error": e.to_string() }));
                continue;
            }
        };
        ok_points += 1;
        for (k, row) in per_m.iter().enumerate() {
            for (j, &idx) in selected.iter().enumerate() {
                let r = &row[idx];
                deviation[j][k] += (r.density - r.target).abs();
                worst_agreement = worst_agreement
                    .max((r.density - r.expansion_density).abs())
                    .max(r.expansion_imag.abs());
                let mut line: Vec<String> = point.iter().map(i64::to_string).collect();
                line.extend([
                    r.m.to_string(),
                    r.pattern.to_string(),
                    r.count.to_string(),
                    fmt(r.density),
                    fmt(r.expansion_density),
                    fmt(r.target),
                ]);
                a.row(line);
            }
        }
    }
    if ok_points == 0 {
        return Err(invalid(format!("every point of the box failed: {}", errors[0]["error"])));
    }
    let ud: Vec<Value> = selected
        .iter()
        .zip(&deviation)
        .map(|(&idx, d)| {
            json!({
                "pattern": all[idx].to_string(),
                "ud_statistic": d.iter().map(|s| s / ok_points as f64).collect::<Vec<_>>(),
            })
        })
        .collect();
    a.set("family", json!(family.to_string()));
    a.set("spec", serde_json::to_value(&spec).expect("spec serializes"));
    a.set("M_grid", json!(window.m_grid()));
    a.set("target", json!(spec.target::<f64>()));
    a.set("ud", Value::Array(ud));
    a.set("max_expansion_gap", json!(worst_agreement));
    a.set("zeta", json!("e(1/b)"));
    a.set("errors", Value::Array(errors));
    Ok(a)
}
