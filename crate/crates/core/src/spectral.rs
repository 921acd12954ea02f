//! Fourier analysis of magnetization series, peak detection and E8 mass
//! assignment.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rustfft::FftPlanner;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{e8_reference, E8Label};
use crate::par;
use crate::series::{format_f64, TimeSeries};

/// Fewest samples accepted in a transform window.
pub const MIN_WINDOW_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    #[default]
    Rectangular,
    Hann,
}

/// Time range that entered a transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_cut: f64,
    pub dt: f64,
    /// Samples `t = k·dt`, `k = 0..samples`.
    pub samples: usize,
    /// Masked samples inside the window, replaced by the valid mean.
    pub masked: usize,
    pub taper: Taper,
}

/// One-sided DFT magnitudes on `omega_j = j·d_omega`, `j = 0..=samples/2`.
///
/// Magnitudes are unnormalized, `|Σ_k x_k e^{−2πi jk/N}|`, so the
/// two-sided power sum equals `N·Σ x_k²` of the demeaned window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub d_omega: f64,
    pub window: Window,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Sum of `|X_j|²` over all `N` two-sided bins.
    pub fn two_sided_power(&self) -> f64 {
        let n = self.window.samples;
        self.magnitudes
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let mirrored = j != 0 && 2 * j != n;
                m * m * if mirrored { 2.0 } else { 1.0 }
            })
            .sum()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the largest magnitude.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, &m) in self.magnitudes.iter().enumerate() {
            if m > self.magnitudes[best] {
                best = j;
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["omega", "magnitude"])?;
        for (o, m) in self.omegas.iter().zip(&self.magnitudes) {
            wtr.write_record([format_f64(*o), format_f64(*m)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `omega,magnitude` rows. The window record is reconstructed from
    /// the grid, assuming an even sample count.
    pub fn read_csv<R: Read>(r: R) -> Result<Spectrum> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut omegas = Vec::new();
        let mut magnitudes = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse { line: i + 2, msg: format!("bad field {}", k + 1) })
            };
            omegas.push(field(0)?);
            magnitudes.push(field(1)?);
        }
        if omegas.len() < 2 {
            return Err(Error::Spectral("spectrum needs at least two bins".into()));
        }
        let d_omega = omegas[1] - omegas[0];
        let samples = 2 * (omegas.len() - 1);
        let t_cut = 2.0 * PI / d_omega;
        let window = Window { t_cut, dt: t_cut / samples as f64, samples, masked: 0, taper: Taper::Rectangular };
        Ok(Spectrum { omegas, magnitudes, d_omega, window })
    }
}

/// Rectangular-window transform over `[0, t_cut)`.
pub fn fourier(series: &TimeSeries, t_cut: f64) -> Result<Spectrum> {
    fourier_with(series, t_cut, Taper::Rectangular)
}

pub fn fourier_with(series: &TimeSeries, t_cut: f64, taper: Taper) -> Result<Spectrum> {
    if !(t_cut > 0.0) || !t_cut.is_finite() {
        return Err(Error::Spectral(format!("t_cut must be positive, got {t_cut}")));
    }
    let dt = series.dt;
    let n = (t_cut / dt).round() as usize;
    if ((n as f64) * dt - t_cut).abs() > 1e-9 * t_cut.max(1.0) {
        return Err(Error::Spectral(format!("t_cut {t_cut} is not a multiple of dt {dt}")));
    }
    if t_cut > series.duration() + 1e-9 || n > series.len() {
        return Err(Error::Spectral(format!(
            "t_cut {t_cut} exceeds series duration {}",
            series.duration()
        )));
    }
    if n < MIN_WINDOW_SAMPLES {
        return Err(Error::Spectral(format!("window has {n} samples, need {MIN_WINDOW_SAMPLES}")));
    }
    let valid: Vec<f64> = (0..n).filter(|&k| series.is_valid(k)).map(|k| series.values[k]).collect();
    if valid.is_empty() {
        return Err(Error::Spectral("no valid samples in window".into()));
    }
    let masked = n - valid.len();
    let mean = par::pairwise_sum(&valid) / valid.len() as f64;
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let x = if series.is_valid(k) { series.values[k] - mean } else { 0.0 };
            let w = match taper {
                Taper::Rectangular => 1.0,
                Taper::Hann => 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos(),
            };
            Complex64::new(x * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let d_omega = 2.0 * PI / t_cut;
    let bins = n / 2 + 1;
    Ok(Spectrum {
        omegas: (0..bins).map(|j| j as f64 * d_omega).collect(),
        magnitudes: buf[..bins].iter().map(|z| z.norm()).collect(),
        d_omega,
        window: Window { t_cut, dt, samples: n, masked, taper },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub magnitude: f64,
    pub prominence: f64,
    pub bin: usize,
    /// Initial states whose spectra produced this peak.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
}

/// Strict local maxima with prominence at least `min_prominence·max` and
/// frequency in `[band.0, band.1]`, tallest first.
///
/// Prominence is the height above the higher of the two lowest points
/// reached before meeting a taller bin (or the spectrum edge) on each side.
pub fn find_peaks(spec: &Spectrum, min_prominence: f64, band: (f64, f64)) -> Result<Vec<Peak>> {
    let (lo, hi) = band;
    if !(lo <= hi) || !spec.omegas.iter().any(|&o| o >= lo && o <= hi) {
        return Err(Error::Spectral(format!("band [{lo}, {hi}] contains no bins")));
    }
    let m = &spec.magnitudes;
    let threshold = min_prominence * spec.max_magnitude();
    let mut peaks = Vec::new();
    for j in 1..m.len().saturating_sub(1) {
        let o = spec.omegas[j];
        if !(m[j] > m[j - 1] && m[j] > m[j + 1]) || o < lo || o > hi {
            continue;
        }
        let base = |range: &mut dyn Iterator<Item = usize>| {
            let mut lowest = m[j];
            for i in range {
                if m[i] > m[j] {
                    break;
                }
                lowest = lowest.min(m[i]);
            }
            lowest
        };
        let left = base(&mut (0..j).rev());
        let right = base(&mut (j + 1..m.len()));
        let prominence = m[j] - left.max(right);
        if prominence >= threshold {
            peaks.push(Peak { omega: o, magnitude: m[j], prominence, bin: j, sources: Vec::new() });
        }
    }
    sort_by_magnitude(&mut peaks);
    Ok(peaks)
}

fn sort_by_magnitude(peaks: &mut [Peak]) {
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.omega.total_cmp(&b.omega)));
}

/// How the lightest mass is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M1Choice {
    /// Use this frequency.
    Hint(f64),
    /// Tallest peak with frequency in `[lo, hi]`.
    Band(f64, f64),
    /// Try every peak as `m1` and keep the one that explains the most
    /// reference entries, ties broken by matched magnitude.
    Consistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignOptions {
    pub m1: M1Choice,
    /// Matching window is `max(d_omega, rel_tolerance·m1)`.
    pub rel_tolerance: f64,
}

impl Default for AssignOptions {
    fn default() -> Self {
        Self { m1: M1Choice::Consistent, rel_tolerance: 0.15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPeak {
    #[serde(flatten)]
    pub peak: Peak,
    pub label: Option<E8Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub label: E8Label,
    pub measured: f64,
    pub predicted: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub m1: f64,
    pub d_omega: f64,
    pub tolerance: f64,
    pub peaks: Vec<LabeledPeak>,
    /// One row per matched label, in mass order.
    pub deviations: Vec<Deviation>,
}

impl PeakReport {
    pub fn deviation(&self, label: E8Label) -> Option<&Deviation> {
        self.deviations.iter().find(|d| d.label == label)
    }

    pub fn labels(&self) -> BTreeSet<E8Label> {
        self.deviations.iter().map(|d| d.label).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Labels peaks against the E8 ratios for `m1` fixed per `opts`.
pub fn assign_e8(peaks: &[Peak], d_omega: f64, opts: &AssignOptions) -> Result<PeakReport> {
    if peaks.is_empty() {
        return Err(Error::Spectral("no peaks to assign".into()));
    }
    let m1 = match opts.m1 {
        M1Choice::Hint(m1) => m1,
        M1Choice::Band(lo, hi) => peaks
            .iter()
            .filter(|p| p.omega >= lo && p.omega <= hi)
            .max_by(|a, b| a.magnitude.total_cmp(&b.magnitude))
            .map(|p| p.omega)
            .ok_or_else(|| Error::Spectral(format!("no peak in m1 band [{lo}, {hi}]")))?,
        M1Choice::Consistent => {
            let mut best: Option<(usize, f64, f64)> = None;
            for p in peaks {
                let matched = match_labels(peaks, p.omega, d_omega, opts.rel_tolerance)?;
                let count = matched.iter().filter(|l| l.is_some()).count();
                let weight: f64 = peaks.iter().zip(&matched).filter(|(_, l)| l.is_some()).map(|(q, _)| q.magnitude).sum();
                let better = match best {
                    None => true,
                    Some((c, w, _)) => count > c || (count == c && weight > w),
                };
                if better {
                    best = Some((count, weight, p.omega));
                }
            }
            best.expect("peaks is non-empty").2
        }
    };
    let labels = match_labels(peaks, m1, d_omega, opts.rel_tolerance)?;
    let reference = e8_reference(m1)?;
    let mut deviations: Vec<Deviation> = peaks
        .iter()
        .zip(&labels)
        .filter_map(|(p, l)| {
            l.map(|label| {
                let predicted = reference.value(label);
                Deviation { label, measured: p.omega, predicted, deviation: p.omega - predicted }
            })
        })
        .collect();
    if deviations.is_empty() {
        return Err(Error::Spectral("no peak matches any E8 reference entry".into()));
    }
    deviations.sort_by_key(|d| d.label);
    let mut labeled: Vec<LabeledPeak> =
        peaks.iter().zip(labels).map(|(p, label)| LabeledPeak { peak: p.clone(), label }).collect();
    labeled.sort_by(|a, b| b.peak.magnitude.total_cmp(&a.peak.magnitude).then(a.peak.omega.total_cmp(&b.peak.omega)));
    Ok(PeakReport { m1, d_omega, tolerance: tolerance(m1, d_omega, opts.rel_tolerance), peaks: labeled, deviations })
}

fn tolerance(m1: f64, d_omega: f64, rel: f64) -> f64 {
    d_omega.max(rel * m1)
}

/// Greedy matching, tallest peak first, each to the nearest unclaimed entry.
fn match_labels(peaks: &[Peak], m1: f64, d_omega: f64, rel: f64) -> Result<Vec<Option<E8Label>>> {
    let reference = e8_reference(m1)?;
    let tol = tolerance(m1, d_omega, rel);
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[b].magnitude.total_cmp(&peaks[a].magnitude).then(a.cmp(&b)));
    let mut claimed = BTreeSet::new();
    let mut labels = vec![None; peaks.len()];
    for i in order {
        let best = reference
            .entries
            .iter()
            .filter(|(l, _)| !claimed.contains(l))
            .map(|&(l, v)| (l, (peaks[i].omega - v).abs()))
            .filter(|&(_, dist)| dist <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((l, _)) = best {
            claimed.insert(l);
            labels[i] = Some(l);
        }
    }
    Ok(labels)
}

/// Peak-picking settings shared by single and aggregated runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Relative to each spectrum's own maximum.
    pub min_prominence: f64,
    pub band: (f64, f64),
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self { min_prominence: 0.002, band: (0.0, f64::INFINITY) }
    }
}

/// Union of per-run peaks, merged when closer than `d_omega/2` (the taller
/// one is kept and provenance is pooled), then assigned as one set.
pub fn aggregate_initial_states(
    runs: &[(String, Spectrum)],
    peak_opts: &PeakOptions,
    assign_opts: &AssignOptions,
) -> Result<PeakReport> {
    let Some((_, first)) = runs.first() else {
        return Err(Error::Spectral("no runs to aggregate".into()));
    };
    let d_omega = first.d_omega;
    if let Some((name, _)) = runs.iter().find(|(_, s)| (s.d_omega - d_omega).abs() > 1e-12 * d_omega) {
        return Err(Error::Spectral(format!("run {name} has a different frequency resolution")));
    }
    let per_run = par::try_map_range(runs.len(), |i| {
        let (name, spec) = &runs[i];
        let mut peaks = find_peaks(spec, peak_opts.min_prominence, peak_opts.band)?;
        for p in &mut peaks {
            p.sources = vec![name.clone()];
        }
        Ok::<_, Error>(peaks)
    })?;
    let mut union: Vec<Peak> = Vec::new();
    for p in per_run.into_iter().flatten() {
        match union.iter_mut().find(|q| (q.omega - p.omega).abs() < d_omega / 2.0) {
            Some(q) => {
                let mut sources = std::mem::take(&mut q.sources);
                if p.magnitude > q.magnitude {
                    *q = p.clone();
                }
                for s in p.sources {
                    if !sources.contains(&s) {
                        sources.push(s);
                    }
                }
                q.sources = sources;
            }
            None => union.push(p),
        }
    }
    sort_by_magnitude(&mut union);
    assign_e8(&union, d_omega, assign_opts)
}

/// Markdown table with one value/deviation column pair per backend, values in
/// units of each report's `m1`.
pub fn markdown_table(reports: &[(&str, &PeakReport)]) -> String {
    let mut out = String::from("| Label | E8 prediction |");
    let mut rule = String::from("|---|---|");
    for (name, _) in reports {
        let _ = write!(out, " {name} value | {name} deviation |");
        rule.push_str("---|---|");
    }
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for label in E8Label::ALL {
        let _ = write!(out, "| {} | {:.3} m1 |", label.as_str(), label.ratio());
        for (_, r) in reports {
            match r.deviation(label) {
                Some(d) => {
                    let _ = write!(out, " {:.3} m1 | {:+.3} m1 |", d.measured / r.m1, d.deviation / r.m1);
                }
                None => out.push_str(" - | - |"),
            }
        }
        out.push('\n');
    }
    out
}
