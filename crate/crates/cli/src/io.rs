//! File helpers shared by the commands.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use meson_core::{SeriesMeta, TimeSeries};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
}

/// Opens `path` for writing and hands a buffered writer to `f`.
pub fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(BufWriter<File>) -> meson_core::Result<()>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    f(BufWriter::new(file)).map_err(|e| match e {
        meson_core::Error::Io(io) => CliError::io(path, io),
        other => CliError::Core(other),
    })
}

/// Reads a uniformly sampled series. A file with a `mitigated` column (as
/// written by `mitigate`) contributes that column and its `valid` flags;
/// otherwise the second column is used.
pub fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::input(path, e))?;
    let headers = rd.headers().map_err(|e| CliError::input(path, e))?.clone();
    let col = headers.iter().position(|h| h == "mitigated").unwrap_or(1);
    let valid_col = headers.iter().position(|h| h == "valid");
    if headers.len() <= col {
        return Err(CliError::input(path, "need at least two columns"));
    }
    let (mut ts, mut vs, mut mask) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        let num = |j: usize| -> CliResult<f64> {
            rec.get(j)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| CliError::input(path, format!("row {}: {e}", i + 2)))
        };
        ts.push(num(0)?);
        vs.push(num(col)?);
        mask.push(match valid_col {
            Some(j) => rec.get(j).is_some_and(|v| v.trim() == "true"),
            None => true,
        });
    }
    if ts.len() < 2 {
        return Err(CliError::input(path, "need at least two samples"));
    }
    let dt = ts[1] - ts[0];
    let uniform = dt > 0.0 && ts.iter().enumerate().all(|(k, t)| (t - k as f64 * dt).abs() <= 1e-6 * dt.max(1.0));
    if !uniform || ts[0].abs() > 1e-9 {
        return Err(CliError::input(path, "times must start at 0 with a uniform step"));
    }
    let meta = SeriesMeta::new(path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
    let mut series = TimeSeries::new(dt, vs, meta);
    if mask.iter().any(|v| !v) {
        series.mask = Some(mask);
    }
    Ok(series)
}
