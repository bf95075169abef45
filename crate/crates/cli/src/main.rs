mod artifact;
mod commands;
mod config;
mod data;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mflab::correlate::parse_count;
use mflab::patterns::Counter;
use mflab::FunctionSpec;

use artifact::{Artifact, Sinks};
use config::{ExperimentConfig, PatternMode};
use error::CliError;

/// Numerical experiments on bounded multiplicative functions.
///
/// Settings come from `--config` (a JSON file, or an earlier artifact whose
/// `# config:` line is replayed) and are overridden by flags. CSV goes to
/// `--out` (or stdout); the JSON summary goes to `--summary`, next to `--out`
/// with a `.json` extension, or to stderr.
#[derive(Parser)]
#[command(name = "mflab", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config or earlier artifact.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON summary destination.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Sieve segment length.
    #[arg(long, global = true)]
    segment: Option<usize>,
}

fn count(s: &str) -> Result<u64, mflab::Error> {
    parse_count(s)
}

#[derive(Args, Clone, Default)]
struct SearchArgs {
    /// Uniform t-step on |t| <= 1 (default 1/(4 log² N)).
    #[arg(long)]
    coarse_step: Option<f64>,
    /// Multiplicative step of the outer t-grid.
    #[arg(long)]
    log_step: Option<f64>,
    #[arg(long)]
    refine_width: Option<f64>,
    #[arg(long)]
    refine_brackets: Option<usize>,
    /// Search |t| <= t_max instead of |t| <= N.
    #[arg(long)]
    t_max: Option<f64>,
}

impl SearchArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let any = self.coarse_step.is_some()
            || self.log_step.is_some()
            || self.refine_width.is_some()
            || self.refine_brackets.is_some()
            || self.t_max.is_some();
        if !any {
            return;
        }
        let s = cfg.search.get_or_insert_with(Default::default);
        if let Some(v) = self.coarse_step {
            s.coarse_step = Some(v);
        }
        if let Some(v) = self.log_step {
            s.log_step = v;
        }
        if let Some(v) = self.refine_width {
            s.refine_width = v;
        }
        if let Some(v) = self.refine_brackets {
            s.refine_brackets = v;
        }
        if let Some(v) = self.t_max {
            s.t_max = Some(v);
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sieve [lo, hi) and report λ, μ, ω, Ω (totals, or every n with --values).
    Sieve {
        #[arg(long, value_parser = count)]
        lo: Option<u64>,
        #[arg(long, value_parser = count)]
        hi: Option<u64>,
        #[arg(long)]
        values: bool,
    },
    /// Evaluate a function on [lo, hi).
    Eval {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long, value_parser = count)]
        lo: Option<u64>,
        #[arg(long, value_parser = count)]
        hi: Option<u64>,
        /// Coprime pairs sampled for the multiplicativity check.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// D²(f, g; N), D²(f, n^{it}; N), or M(f; N) when neither g nor t is given.
    Distance {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long)]
        g: Option<FunctionSpec>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long = "N", value_delimiter = ',', value_parser = count)]
        n: Option<Vec<u64>>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// M(f·χ; N) for all characters of modulus <= q_max, with a verdict.
    Aperiodicity {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long)]
        q_max: Option<u64>,
        #[arg(long = "N", alias = "cutoffs", value_delimiter = ',', value_parser = count)]
        n: Option<Vec<u64>>,
        #[arg(long)]
        growth_threshold: Option<f64>,
        #[arg(long)]
        stall_threshold: Option<f64>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Correlation averages over a box of shifts and a nested M grid.
    Correlate {
        /// One function (used in every slot) or one per slot.
        #[arg(long, num_args = 1..)]
        functions: Option<Vec<FunctionSpec>>,
        /// "n,n^2", "n1*n2-3,n2" or {"frac":[1.5,2.5]}.
        #[arg(long)]
        family: Option<String>,
        /// "1:200" or "1:10,1:20".
        #[arg(long = "box")]
        lattice: Option<String>,
        #[arg(long = "M", value_delimiter = ',', value_parser = count)]
        m: Option<Vec<u64>>,
        /// Run families without an independence certificate.
        #[arg(long)]
        allow_dependent: bool,
    },
    /// E_m |E_n f(m+n) e(nt)|.
    Shortint {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long = "M", value_delimiter = ',', value_parser = count)]
        m: Option<Vec<u64>>,
        #[arg(long = "N", value_delimiter = ',', value_parser = count)]
        n: Option<Vec<u64>>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
    },
    /// E_n |E_m f(m+n) conj f(m)|.
    Mrt {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long = "M", value_delimiter = ',', value_parser = count)]
        m: Option<Vec<u64>>,
        #[arg(long = "N", value_delimiter = ',', value_parser = count)]
        n: Option<Vec<u64>>,
    },
    /// E_m max_t |E_n f(m+n) e(nt)| on an oversampled grid.
    Fourier {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long = "M", value_delimiter = ',', value_parser = count)]
        m: Option<Vec<u64>>,
        #[arg(long = "N", value_delimiter = ',', value_parser = count)]
        n: Option<Vec<u64>>,
        #[arg(long)]
        oversample: Option<u64>,
    },
    /// E_n a(pn) conj a(qn) for a function or for a(n) = e(nα).
    Katai {
        #[arg(long)]
        f: Option<FunctionSpec>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<u64>,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long = "N", value_delimiter = ',', value_parser = count)]
        n: Option<Vec<u64>>,
    },
    /// Sign or residue pattern densities, direct and by expansion.
    Patterns {
        #[arg(long, value_enum)]
        mode: Option<PatternMode>,
        /// Sign mode: one function or one per slot (default liouville).
        #[arg(long, num_args = 1..)]
        functions: Option<Vec<FunctionSpec>>,
        /// Residue mode moduli, one or one per slot.
        #[arg(long, value_delimiter = ',')]
        moduli: Option<Vec<u32>>,
        /// Residue mode counters: omega or big_omega.
        #[arg(long, value_delimiter = ',', value_parser = counter)]
        counters: Option<Vec<Counter>>,
        /// Patterns to report, e.g. "+-+" or "1,0,1"; default all.
        #[arg(long = "eps", alias = "pattern", allow_hyphen_values = true)]
        patterns: Option<Vec<String>>,
        #[arg(long)]
        family: Option<String>,
        #[arg(long = "box")]
        lattice: Option<String>,
        #[arg(long = "M", value_delimiter = ',', value_parser = count)]
        m: Option<Vec<u64>>,
        #[arg(long)]
        allow_dependent: bool,
    },
    /// Convergence tables from artifacts, grouped by kind.
    Report {
        paths: Vec<PathBuf>,
        /// Also write one gnuplot-style .dat file per table here.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn counter(s: &str) -> Result<Counter, String> {
    match s {
        "omega" | "w" => Ok(Counter::Omega),
        "big_omega" | "Omega" | "W" => Ok(Counter::BigOmega),
        _ => Err(format!("unknown counter `{s}` (omega or big_omega)")),
    }
}

type Runner = fn(&ExperimentConfig) -> Result<Artifact, CliError>;

/// Merge flags into the config and pick the command.
fn resolve(command: Command, cfg: &mut ExperimentConfig) -> (&'static str, Runner) {
    macro_rules! set_bool {
        ($flag:expr, $field:ident) => {
            if $flag {
                cfg.$field = Some(true);
            }
        };
    }
    match command {
        Command::Sieve { lo, hi, values } => {
            cfg.lo = lo.or(cfg.lo);
            cfg.hi = hi.or(cfg.hi);
            set_bool!(values, values);
            ("sieve", commands::sieve)
        }
        Command::Eval { f, lo, hi, samples } => {
            cfg.f = f.or(cfg.f.take());
            cfg.lo = lo.or(cfg.lo);
            cfg.hi = hi.or(cfg.hi);
            cfg.samples = samples.or(cfg.samples);
            ("eval", commands::eval)
        }
        Command::Distance { f, g, t, n, search } => {
            cfg.f = f.or(cfg.f.take());
            cfg.g = g.or(cfg.g.take());
            cfg.t = t.or(cfg.t);
            cfg.n_values = n.or(cfg.n_values.take());
            search.apply(cfg);
            ("distance", commands::distance)
        }
        Command::Aperiodicity {
            f,
            q_max,
            n,
            growth_threshold,
            stall_threshold,
            search,
        } => {
            cfg.f = f.or(cfg.f.take());
            cfg.q_max = q_max.or(cfg.q_max);
            cfg.n_values = n.or(cfg.n_values.take());
            cfg.growth_threshold = growth_threshold.or(cfg.growth_threshold);
            cfg.stall_threshold = stall_threshold.or(cfg.stall_threshold);
            search.apply(cfg);
            ("aperiodicity", commands::aperiodicity)
        }
        Command::Correlate {
            functions,
            family,
            lattice,
            m,
            allow_dependent,
        } => {
            cfg.functions = functions.or(cfg.functions.take());
            cfg.family = family.or(cfg.family.take());
            cfg.lattice = lattice.or(cfg.lattice.take());
            cfg.m_grid = m.or(cfg.m_grid.take());
            set_bool!(allow_dependent, allow_dependent);
            ("correlate", commands::correlate)
        }
        Command::Shortint { f, m, n, t } => {
            window_flags(cfg, f, m, n);
            cfg.t = t.or(cfg.t);
            ("shortint", commands::shortint)
        }
        Command::Mrt { f, m, n } => {
            window_flags(cfg, f, m, n);
            ("mrt", commands::mrt)
        }
        Command::Fourier { f, m, n, oversample } => {
            window_flags(cfg, f, m, n);
            cfg.oversample = oversample.or(cfg.oversample);
            ("fourier", commands::fourier)
        }
        Command::Katai { f, alpha, p, q, n } => {
            cfg.f = f.or(cfg.f.take());
            cfg.alpha = alpha.or(cfg.alpha);
            cfg.p = p.or(cfg.p);
            cfg.q = q.or(cfg.q);
            cfg.n_values = n.or(cfg.n_values.take());
            ("katai", commands::katai)
        }
        Command::Patterns {
            mode,
            functions,
            moduli,
            counters,
            patterns,
            family,
            lattice,
            m,
            allow_dependent,
        } => {
            cfg.mode = mode.or(cfg.mode);
            cfg.functions = functions.or(cfg.functions.take());
            cfg.moduli = moduli.or(cfg.moduli.take());
            cfg.counters = counters.or(cfg.counters.take());
            cfg.patterns = patterns.or(cfg.patterns.take());
            cfg.family = family.or(cfg.family.take());
            cfg.lattice = lattice.or(cfg.lattice.take());
            cfg.m_grid = m.or(cfg.m_grid.take());
            set_bool!(allow_dependent, allow_dependent);
            ("patterns", commands::patterns)
        }
        Command::Report { .. } => unreachable!("report has no config"),
    }
}

fn window_flags(cfg: &mut ExperimentConfig, f: Option<FunctionSpec>, m: Option<Vec<u64>>, n: Option<Vec<u64>>) {
    cfg.f = f.or(cfg.f.take());
    cfg.m_grid = m.or(cfg.m_grid.take());
    cfg.n_values = n.or(cfg.n_values.take());
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.common;
    if let Command::Report { paths, data_dir } = cli.command {
        print!("{}", report::report(&paths, data_dir.as_deref())?);
        return Ok(());
    }
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.threads = common.threads.or(cfg.threads);
    cfg.segment = common.segment.or(cfg.segment);
    let (name, runner) = resolve(cli.command, &mut cfg);
    if let Some(c) = &cfg.command {
        if c != name {
            return Err(CliError::Validation(format!("config is for `{c}`, not `{name}`")));
        }
    }
    cfg.command = Some(name.to_string());
    let pool = match cfg.threads {
        Some(0) => return Err(CliError::Validation("`threads` must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Internal(e.to_string()))?;
    let threads = pool.current_num_threads();
    let start = Instant::now();
    let artifact = pool.install(|| runner(&cfg))?;
    let wall = start.elapsed().as_secs_f64();
    let csv = artifact.csv(&cfg, threads)?;
    let summary = artifact.summary_json(&cfg, threads, wall);
    Sinks {
        out: common.out,
        summary: common.summary,
    }
    .write(&csv, &summary)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
