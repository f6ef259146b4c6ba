use std::fmt::Write as _;
use std::path::PathBuf;

use nodal_core::crossings::Regime;

use crate::experiment::{reference_ks, RunManifest};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub config_hash: String,
    pub regime: Regime,
    pub n: u64,
    pub lattice_count: usize,
    pub trials: usize,
    pub variance: f64,
    pub theoretical_variance: f64,
    pub variance_ratio: f64,
    pub ks_normal: f64,
    pub ks_reference: f64,
    pub flag_rate: f64,
    pub kacrice_variance: Option<f64>,
    pub passed: bool,
}

pub fn load(paths: &[PathBuf]) -> Result<Vec<RunManifest>, CliError> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// One row per level per manifest, ordered by run name then `n`.
pub fn rows(manifests: &[RunManifest]) -> Vec<ReportRow> {
    let mut out: Vec<ReportRow> = manifests
        .iter()
        .flat_map(|m| {
            m.levels.iter().map(move |l| ReportRow {
                name: m.name.clone(),
                config_hash: m.config_hash[..12.min(m.config_hash.len())].to_string(),
                regime: m.regime,
                n: l.n,
                lattice_count: l.lattice_count,
                trials: l.trials,
                variance: l.variance,
                theoretical_variance: l.theoretical_variance,
                variance_ratio: l.variance_ratio,
                ks_normal: l.ks_normal,
                ks_reference: reference_ks(l, m.regime, m.config.limit_route).1,
                flag_rate: l.flag_rate,
                kacrice_variance: l.kacrice.as_ref().map(|k| k.variance),
                passed: m.checks.iter().filter(|c| c.level == l.n).all(|c| c.passed),
            })
        })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name).then(a.n.cmp(&b.n)));
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "name,config_hash,regime,n,N,trials,variance,theoretical_variance,variance_ratio,ks_normal,ks_reference,flag_rate,kacrice_variance,passed\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.config_hash,
            serde_json::to_value(r.regime).unwrap().as_str().unwrap(),
            r.n,
            r.lattice_count,
            r.trials,
            r.variance,
            r.theoretical_variance,
            r.variance_ratio,
            r.ks_normal,
            r.ks_reference,
            r.flag_rate,
            opt(r.kacrice_variance),
            r.passed
        )
        .unwrap();
    }
    out
}

/// Whether `|ratio − 1|` shrinks along increasing `n` within each run name.
fn trend(rows: &[&ReportRow]) -> &'static str {
    if rows.len() < 2 {
        return "single level";
    }
    let gaps: Vec<f64> = rows.iter().map(|r| (r.variance_ratio - 1.0).abs()).collect();
    if gaps.windows(2).all(|w| w[1] < w[0]) {
        "variance ratio improving"
    } else {
        "variance ratio not monotone"
    }
}

pub fn text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<20} {:>7} {:>5} {:>7} {:>12} {:>12} {:>9} {:>8} {:>8} {:>9} {:>6}",
        "name", "n", "N", "trials", "variance", "predicted", "ratio", "ks_norm", "ks_ref", "flags", "pass"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<20} {:>7} {:>5} {:>7} {:>12.4} {:>12.4} {:>9.3} {:>8.4} {:>8.4} {:>9.2e} {:>6}",
            r.name,
            r.n,
            r.lattice_count,
            r.trials,
            r.variance,
            r.theoretical_variance,
            r.variance_ratio,
            r.ks_normal,
            r.ks_reference,
            r.flag_rate,
            if r.passed { "yes" } else { "no" }
        )
        .unwrap();
    }
    let mut names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    names.dedup();
    for name in names {
        let group: Vec<&ReportRow> = rows.iter().filter(|r| r.name == name).collect();
        writeln!(out, "{name}: {}", trend(&group)).unwrap();
    }
    out
}
