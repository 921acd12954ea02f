//! Side-by-side peak tables across run directories.

use std::path::{Path, PathBuf};

use meson_core::E8Label;
use serde::{Deserialize, Serialize};

use crate::config::Backend;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::run::RunReport;

/// Published peak positions in units of `m1`, in `E8Label::ALL` order, for
/// exact diagonalization and the two device runs.
pub const PUBLISHED_EXACT: [f64; 4] = [0.5, 1.0, 1.6, 2.6];
pub const PUBLISHED_TROTTER: [f64; 4] = [0.6, 1.1, 1.7, 2.5];
pub const PUBLISHED_COMPRESSED: [f64; 4] = [0.5, 1.0, 1.6, 2.6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// The first exact-backend run among the inputs.
    Ed,
    /// The published values for each run's backend.
    Table1,
}

fn published(backend: Backend) -> [f64; 4] {
    match backend {
        Backend::Exact => PUBLISHED_EXACT,
        Backend::Trotter => PUBLISHED_TROTTER,
        Backend::Compressed => PUBLISHED_COMPRESSED,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub run: String,
    /// Measured frequency, absent if the label was not matched.
    pub value: Option<f64>,
    pub value_m1: Option<f64>,
    /// `value − E8 prediction`, in units of `m1`.
    pub deviation_e8_m1: Option<f64>,
    pub reference: Option<f64>,
    /// `value − reference`, in frequency units.
    pub difference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: E8Label,
    pub e8_ratio: f64,
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: Reference,
    pub d_omega: f64,
    pub runs: Vec<String>,
    pub rows: Vec<Row>,
}

impl Comparison {
    pub fn max_abs_difference(&self) -> f64 {
        self.rows.iter().flat_map(|r| &r.entries).filter_map(|e| e.difference).map(f64::abs).fold(0.0, f64::max)
    }

    pub fn to_markdown(&self) -> String {
        let mut md = format!(
            "# Peak comparison (reference: {})\n\nd_omega = {:.6}; values in units of each run's m1, differences in frequency units.\n\n| Label | E8 prediction |",
            match self.reference {
                Reference::Ed => "exact run",
                Reference::Table1 => "published values",
            },
            self.d_omega
        );
        let mut rule = String::from("|---|---|");
        for r in &self.runs {
            md.push_str(&format!(" {r} value | {r} difference |"));
            rule.push_str("---|---|");
        }
        md.push('\n');
        md.push_str(&rule);
        md.push('\n');
        let fmt = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map_or_else(|| "-".to_string(), f);
        for row in &self.rows {
            md.push_str(&format!("| {} | {:.3} m1 |", row.label.as_str(), row.e8_ratio));
            for e in &row.entries {
                md.push_str(&format!(
                    " {} | {} |",
                    fmt(e.value_m1, &|v| format!("{v:.3} m1")),
                    fmt(e.difference, &|v| format!("{v:+.4}"))
                ));
            }
            md.push('\n');
        }
        md
    }
}

fn run_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| dir.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Loads `report.json` from each directory and tabulates the labelled peaks
/// against `reference`.
pub fn compare(dirs: &[PathBuf], reference: Reference) -> CliResult<Comparison> {
    if dirs.is_empty() {
        return Err(CliError::Usage("compare needs at least one run directory".into()));
    }
    let runs: Vec<(String, RunReport)> = dirs
        .iter()
        .map(|d| Ok((run_name(d), io::read_json::<RunReport>(&d.join("report.json"))?)))
        .collect::<CliResult<_>>()?;
    let d_omega = runs[0].1.d_omega;
    if let Some((name, r)) = runs.iter().find(|(_, r)| (r.d_omega - d_omega).abs() > 1e-9 * d_omega) {
        return Err(CliError::Analysis(format!(
            "incompatible resolutions: {name} has d_omega = {}, {} has {d_omega}",
            r.d_omega, runs[0].0
        )));
    }
    let ed = match reference {
        Reference::Ed => Some(
            runs.iter()
                .find(|(_, r)| r.backend == Some(Backend::Exact))
                .ok_or_else(|| CliError::Usage("reference `ed` needs an exact-backend run among the inputs".into()))?,
        ),
        Reference::Table1 => None,
    };
    if reference == Reference::Table1 {
        if let Some((name, _)) = runs.iter().find(|(_, r)| r.backend.is_none()) {
            return Err(CliError::Usage(format!("run {name} has no backend; published values cannot be matched")));
        }
    }
    let rows = E8Label::ALL
        .iter()
        .enumerate()
        .map(|(i, &label)| Row {
            label,
            e8_ratio: label.ratio(),
            entries: runs
                .iter()
                .map(|(name, r)| {
                    let value = r.peaks.deviation(label).map(|d| d.measured);
                    let reference = match ed {
                        Some((_, e)) => e.peaks.deviation(label).map(|d| d.measured),
                        None => r.backend.map(|b| published(b)[i] * r.peaks.m1),
                    };
                    Entry {
                        run: name.clone(),
                        value,
                        value_m1: value.map(|v| v / r.peaks.m1),
                        deviation_e8_m1: r.peaks.deviation(label).map(|d| d.deviation / r.peaks.m1),
                        reference,
                        difference: value.zip(reference).map(|(v, w)| v - w),
                    }
                })
                .collect(),
        })
        .collect();
    Ok(Comparison { reference, d_omega, runs: runs.into_iter().map(|(n, _)| n).collect(), rows })
}
