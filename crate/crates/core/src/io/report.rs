//! CSV and JSON result files.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `scenario_id` | scenario label |
//! | `policy` | policy name |
//! | `theta` | energy preference |
//! | `n_flows` | number of flows |
//! | `n_aps` | cells with an access point |
//! | `episodes` | Monte Carlo episodes |
//! | `mean_monetary_yen` | mean cellular payment |
//! | `sd_monetary` | its sample standard deviation |
//! | `mean_energy_joule` | mean raw energy |
//! | `sd_energy` | its sample standard deviation |
//! | `mean_objective` | mean payment + weighted energy + penalty |
//! | `finish_rate` | mean fraction of flows done by their deadline |
//! | `seed` | base seed |
//!
//! Reals are written with six significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::sim::AggregateReport;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "scenario_id",
    "policy",
    "theta",
    "n_flows",
    "n_aps",
    "episodes",
    "mean_monetary_yen",
    "sd_monetary",
    "mean_energy_joule",
    "sd_energy",
    "mean_objective",
    "finish_rate",
    "seed",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Parse(format!("unknown report format '{other}'"))),
        }
    }
}

impl ReportFormat {
    /// Guess from a file extension, CSV unless it ends in `.json`.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn to_csv(reports: &[AggregateReport]) -> String {
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for r in reports {
        let fields = [
            csv_field(&r.scenario_id),
            csv_field(&r.policy),
            format_sig6(r.theta),
            r.n_flows.to_string(),
            r.n_aps.to_string(),
            r.episodes.to_string(),
            format_sig6(r.monetary.mean),
            format_sig6(r.monetary.sd),
            format_sig6(r.raw_energy.mean),
            format_sig6(r.raw_energy.sd),
            format_sig6(r.objective.mean),
            format_sig6(r.finish_rate.mean),
            r.seed.to_string(),
        ];
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn to_json(reports: &[AggregateReport]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(reports)
        .map_err(|e| Error::Internal(format!("cannot serialize reports: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Write `reports` to `path`, creating parent directories.
pub fn emit_report(reports: &[AggregateReport], format: ReportFormat, path: &Path) -> Result<()> {
    let body = match format {
        ReportFormat::Csv => to_csv(reports),
        ReportFormat::Json => to_json(reports)?,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, body)?;
    Ok(())
}
