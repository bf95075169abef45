//! Consolidated summary of artifacts, grouped by kind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::artifact::Parsed;
use crate::error::CliError;

/// One convergence table: a title, column names, rows.
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn mean_by<K: Ord + Copy>(pairs: impl Iterator<Item = (K, f64)>) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for (k, v) in pairs {
        let e = acc.entry(k).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

fn columns(a: &Parsed, names: &[&str]) -> Result<Vec<usize>, CliError> {
    names.iter().map(|n| a.column(n)).collect()
}

fn numeric(a: &Parsed, cols: &[usize]) -> Result<Vec<Vec<f64>>, CliError> {
    a.rows
        .iter()
        .map(|r| cols.iter().map(|&c| a.number(r, c)).collect())
        .collect()
}

fn tables_for(a: &Parsed) -> Result<Vec<Table>, CliError> {
    let name = a.path.display().to_string();
    let simple = |title: &str, cols: &[&str]| -> Result<Vec<Table>, CliError> {
        Ok(vec![Table {
            title: format!("{name}: {title}"),
            columns: cols.iter().map(|s| s.to_string()).collect(),
            rows: numeric(a, &columns(a, cols)?)?,
        }])
    };
    match a.kind.as_str() {
        "correlate" => {
            let [m, abs] = [a.column("M")?, a.column("abs")?];
            let rows = a.rows.iter().map(|r| Ok((a.number(r, m)? as u64, a.number(r, abs)?)));
            let pairs = rows.collect::<Result<Vec<_>, CliError>>()?;
            Ok(vec![Table {
                title: format!("{name}: UD statistic vs M"),
                columns: vec!["M".into(), "ud_statistic".into()],
                rows: mean_by(pairs.into_iter()).into_iter().map(|(m, v)| vec![m as f64, v]).collect(),
            }])
        }
        "patterns" => {
            let [m, pat, dens, target] = [a.column("M")?, a.column("pattern")?, a.column("density")?, a.column("target")?];
            let mut by_pattern: BTreeMap<String, Vec<(u64, f64)>> = BTreeMap::new();
            for r in &a.rows {
                let dev = (a.number(r, dens)? - a.number(r, target)?).abs();
                by_pattern.entry(r[pat].clone()).or_default().push((a.number(r, m)? as u64, dev));
            }
            Ok(by_pattern
                .into_iter()
                .map(|(p, v)| Table {
                    title: format!("{name}: pattern {p}, E|density - target| vs M"),
                    columns: vec!["M".into(), "ud_statistic".into()],
                    rows: mean_by(v.into_iter()).into_iter().map(|(m, v)| vec![m as f64, v]).collect(),
                })
                .collect())
        }
        "shortint" | "mrt" => simple("value vs (M, N)", &["M", "N", "value"]),
        "fourier" => simple("value vs (M, N)", &["M", "N", "value", "gap", "short_interval"]),
        "katai" => simple("|average| vs N", &["N", "abs"]),
        "distance" => simple("distance_sq vs N", &["N", "distance_sq"]),
        "aperiodicity" => simple("M(f chi; N) per character", &["q", "chi_index", "N", "t_star", "M_value"]),
        "sieve" | "eval" => Ok(vec![Table {
            title: format!("{name}: {} rows", a.rows.len()),
            columns: Vec::new(),
            rows: Vec::new(),
        }]),
        other => Err(CliError::Parse(format!("{name}: unknown artifact kind `{other}`"))),
    }
}

/// Grouped text report; with `data_dir`, one whitespace-separated `.dat` per table.
pub fn report(paths: &[PathBuf], data_dir: Option<&Path>) -> Result<String, CliError> {
    let artifacts = paths.iter().map(|p| Parsed::read(p)).collect::<Result<Vec<_>, _>>()?;
    let mut groups: BTreeMap<String, Vec<Table>> = BTreeMap::new();
    for a in &artifacts {
        groups.entry(a.kind.clone()).or_default().extend(tables_for(a)?);
    }
    if let Some(dir) = data_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut out = String::new();
    let mut written = 0usize;
    for (kind, tables) in &groups {
        writeln!(out, "== {kind} ==").unwrap();
        for t in tables {
            writeln!(out, "{}", t.title).unwrap();
            if t.columns.is_empty() {
                continue;
            }
            let line = |cells: Vec<String>| cells.iter().map(|c| format!("{c:>24}")).collect::<String>();
            writeln!(out, "{}", line(t.columns.clone())).unwrap();
            for r in &t.rows {
                writeln!(out, "{}", line(r.iter().map(|v| format!("{v:.10e}")).collect())).unwrap();
            }
            writeln!(out).unwrap();
            if let Some(dir) = data_dir {
                written += 1;
                let path = dir.join(format!("{kind}_{written}.dat"));
                let mut dat = format!("# {}\n# {}\n", t.title, t.columns.join(" "));
                for r in &t.rows {
                    let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
                    dat.push_str(&cells.join(" "));
                    dat.push('\n');
                }
                fs::write(&path, dat).map_err(|e| CliError::io(&path, e))?;
            }
        }
    }
    Ok(out)
}
