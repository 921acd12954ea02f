//! Uniformly sampled ⟨σᶻ_cen(t)⟩ records and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Where a series came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// 1-based measurement site.
    #[serde(default)]
    pub site: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SeriesMeta {
    pub fn new(backend: impl Into<String>) -> Self {
        Self { backend: backend.into(), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    /// One value per step, `values[k]` at `t = k·dt`; the first is `t = 0`.
    pub values: Vec<f64>,
    /// Per-sample validity; `None` means every sample is valid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>, meta: SeriesMeta) -> Self {
        Self { dt, values, mask: None, meta }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.time(k))
    }

    /// Duration covered by the samples, `(len − 1)·dt`.
    pub fn duration(&self) -> f64 {
        self.values.len().saturating_sub(1) as f64 * self.dt
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[k])
    }

    /// Largest absolute pointwise difference over the common prefix.
    pub fn max_abs_diff(&self, other: &TimeSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Every `stride`-th sample, with `dt` scaled accordingly.
    pub fn subsample(&self, stride: usize) -> TimeSeries {
        let stride = stride.max(1);
        TimeSeries {
            dt: self.dt * stride as f64,
            values: self.values.iter().step_by(stride).copied().collect(),
            mask: self.mask.as_ref().map(|m| m.iter().step_by(stride).copied().collect()),
            meta: self.meta.clone(),
        }
    }

    /// Writes `t,sz_cen` rows with round-trip precision.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "sz_cen"])?;
        for (k, v) in self.values.iter().enumerate() {
            wr.write_record([format_f64(self.time(k)), format_f64(*v)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is ascii"))
    }

    /// Reads a two-column `t,<value>` CSV. The step is taken from the first
    /// two rows and checked against the rest.
    pub fn read_csv<R: Read>(r: R, meta: SeriesMeta) -> Result<TimeSeries> {
        let mut rd = csv::Reader::from_reader(r);
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| Error::Parse { line: i + 2, msg: format!("missing column {j}") })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })
            };
            ts.push(parse(0)?);
            vs.push(parse(1)?);
        }
        if ts.len() < 2 {
            return Err(Error::InvalidTimeGrid("need at least two samples".into()));
        }
        let dt = ts[1] - ts[0];
        if !(dt > 0.0) || ts[0].abs() > 1e-9 {
            return Err(Error::InvalidTimeGrid("series must start at t=0 with a positive step".into()));
        }
        for (k, t) in ts.iter().enumerate() {
            if (t - k as f64 * dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::InvalidTimeGrid(format!("non-uniform sample at row {}", k + 2)));
            }
        }
        Ok(TimeSeries::new(dt, vs, meta))
    }
}

/// Shortest representation that round-trips.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Number of steps `n` with `n·dt = t_max` (within 1e-9).
pub fn step_count(dt: f64, t_max: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidTimeGrid(format!("dt must be positive, got {dt}")));
    }
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidTimeGrid(format!("t_max must be non-negative, got {t_max}")));
    }
    let n = (t_max / dt).round();
    if (n * dt - t_max).abs() > 1e-9 {
        return Err(Error::InvalidTimeGrid(format!("dt={dt} does not divide t_max={t_max}")));
    }
    Ok(n as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count_checks_divisibility() {
        assert_eq!(step_count(0.1, 25.0).unwrap(), 250);
        assert_eq!(step_count(0.1, 0.0).unwrap(), 0);
        assert!(step_count(0.3, 1.0).is_err());
        assert!(step_count(0.0, 1.0).is_err());
        assert!(step_count(0.1, -1.0).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = TimeSeries::new(0.1, vec![-1.0, -0.987654321012345, 0.1 + 0.2], SeriesMeta::new("test"));
        let text = s.to_csv_string().unwrap();
        assert!(text.starts_with("t,sz_cen\n0.0,-1.0\n"));
        let back = TimeSeries::read_csv(text.as_bytes(), SeriesMeta::new("test")).unwrap();
        assert_eq!(back.values, s.values);
        assert!((back.dt - 0.1).abs() < 1e-15);
    }

    #[test]
    fn read_rejects_non_uniform_grid() {
        let text = "t,x\n0,1\n0.1,2\n0.35,3\n";
        assert!(TimeSeries::read_csv(text.as_bytes(), SeriesMeta::default()).is_err());
    }

    #[test]
    fn subsample_keeps_times() {
        let s = TimeSeries::new(0.05, (0..11).map(|k| k as f64).collect(), SeriesMeta::default());
        let h = s.subsample(2);
        assert_eq!(h.values, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert!((h.dt - 0.1).abs() < 1e-15);
    }
}
