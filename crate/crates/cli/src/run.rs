//! The `run` pipeline: simulate, optionally mitigate, transform, label.

use std::path::Path;

use meson_core::circuit::{run_trotter_series, trotter_first_order, Shots};
use meson_core::compress::{run_compressed_series, CompressOptions, CompressedPoint, OptimizeOptions};
use meson_core::exact::run_exact_series;
use meson_core::noise::{
    decompose_circuit, mitigate, reference_circuit, run_noisy_series, run_noisy_steps, NoiseModel, NoisySimOptions, SimMethod,
    DEFAULT_EPS_DEN, MAX_DENSITY_SITES,
};
use meson_core::rng::child_seed;
use meson_core::spectral::{assign_e8, find_peaks, fourier_with, markdown_table, PeakReport, Spectrum};
use meson_core::{ModelSpec, TimeSeries};
use serde::{Deserialize, Serialize};

use crate::config::{Backend, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::io;

const SEED_SHOTS: u64 = 1;
const SEED_SHOTS_REF: u64 = 2;
const SEED_TRAJECTORIES: u64 = 3;
const SEED_TRAJECTORIES_REF: u64 = 4;

/// Derived seeds, recorded so a manifest documents every random stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub shots: u64,
    pub shots_reference: u64,
    pub trajectories: u64,
    pub trajectories_reference: u64,
}

impl Seeds {
    pub fn from_root(root: u64) -> Self {
        Self {
            root,
            shots: child_seed(root, SEED_SHOTS),
            shots_reference: child_seed(root, SEED_SHOTS_REF),
            trajectories: child_seed(root, SEED_TRAJECTORIES),
            trajectories_reference: child_seed(root, SEED_TRAJECTORIES_REF),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Fully resolved; `meson run --config manifest.json` reproduces the run.
    pub config: ExperimentConfig,
    pub seeds: Seeds,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionSummary {
    pub max_cost: f64,
    pub max_layers: usize,
    pub unconverged_points: usize,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    pub dt: f64,
    pub t_cut: f64,
    pub d_omega: f64,
    /// `raw` or `mitigated`.
    pub analyzed: String,
    pub masked_samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compression: Option<CompressionSummary>,
    pub peaks: PeakReport,
}

pub struct RunOutcome {
    pub report: RunReport,
    pub outputs: Vec<String>,
}

struct Simulated {
    raw: TimeSeries,
    reference: Option<TimeSeries>,
    points: Option<Vec<CompressedPoint>>,
}

fn noisy_options(cfg: &ExperimentConfig, shots_seed: u64, traj_seed: u64) -> NoisySimOptions {
    let method = match cfg.trajectories {
        Some(n) if cfg.model.sites > MAX_DENSITY_SITES => SimMethod::Trajectories(n),
        _ => SimMethod::Auto,
    };
    NoisySimOptions { method, shots: shots(cfg, shots_seed), seed: traj_seed }
}

fn shots(cfg: &ExperimentConfig, seed: u64) -> Option<Shots> {
    cfg.shots.filter(|&n| n > 0).map(|n| Shots { shots: n, seed })
}

/// Main and (when mitigating) reference series; `sim(reference, opts)`
/// runs one of the two.
fn noisy_pair<S>(cfg: &ExperimentConfig, seeds: &Seeds, sim: S) -> CliResult<(TimeSeries, Option<TimeSeries>)>
where
    S: Fn(bool, &NoisySimOptions) -> meson_core::Result<TimeSeries>,
{
    let raw = sim(false, &noisy_options(cfg, seeds.shots, seeds.trajectories))?;
    let reference = if cfg.mitigation {
        Some(sim(true, &noisy_options(cfg, seeds.shots_reference, seeds.trajectories_reference))?)
    } else {
        None
    };
    Ok((raw, reference))
}

fn simulate(cfg: &ExperimentConfig, seeds: &Seeds) -> CliResult<Simulated> {
    let pattern = cfg.pattern()?;
    let direct = cfg.noise.is_none_or(|n: NoiseModel| n.is_noiseless()) && !cfg.mitigation;
    match cfg.backend {
        Backend::Exact => Ok(Simulated {
            raw: run_exact_series(&cfg.model, &pattern, cfg.dt, cfg.t_max)?,
            reference: None,
            points: None,
        }),
        Backend::Trotter => {
            if direct {
                let raw = run_trotter_series(&cfg.model, &pattern, cfg.dt, cfg.t_max, shots(cfg, seeds.shots))?;
                return Ok(Simulated { raw, reference: None, points: None });
            }
            let step = trotter_first_order(&cfg.model, cfg.dt)?;
            let ref_step = reference_circuit(&step)?;
            let noise = cfg.noise.unwrap_or_default();
            let (raw, reference) = noisy_pair(cfg, seeds, |is_ref, opts| {
                let c = if is_ref { &ref_step } else { &step };
                run_noisy_steps(&cfg.model, &pattern, cfg.dt, cfg.t_max, c, &noise, opts)
            })?;
            Ok(Simulated { raw, reference, points: None })
        }
        Backend::Compressed => {
            let opts = CompressOptions {
                schedule: cfg.schedule.clone().unwrap_or_default(),
                optimize: OptimizeOptions {
                    max_iters: cfg.compress.max_iters,
                    grad_tol: cfg.compress.grad_tol,
                    cost_tol: cfg.compress.cost_tol,
                    ..Default::default()
                },
                warm_start: cfg.compress.warm_start,
                ..Default::default()
            };
            let run = run_compressed_series(
                &cfg.model,
                &pattern,
                cfg.dt,
                cfg.t_max,
                &opts,
                if direct { shots(cfg, seeds.shots) } else { None },
            )?;
            if direct {
                return Ok(Simulated { raw: run.series, reference: None, points: Some(run.points) });
            }
            let native = run
                .ansatze
                .iter()
                .map(|a| decompose_circuit(&a.to_circuit()))
                .collect::<meson_core::Result<Vec<_>>>()?;
            let refs = native.iter().map(reference_circuit).collect::<meson_core::Result<Vec<_>>>()?;
            let noise = cfg.noise.unwrap_or_default();
            let (mut raw, reference) = noisy_pair(cfg, seeds, |is_ref, opts| {
                let blocks = if is_ref { &refs } else { &native };
                run_noisy_series(&cfg.model, &pattern, cfg.dt, cfg.t_max, |k| Ok(vec![blocks[k].clone()]), &noise, opts)
            })?;
            raw.meta.warnings.extend(run.series.meta.warnings);
            Ok(Simulated { raw, reference, points: Some(run.points) })
        }
    }
}

fn write_points(path: &Path, points: &[CompressedPoint]) -> CliResult<()> {
    io::write_with(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "n_layers", "initial_cost", "cost", "iterations", "status"])?;
        for p in points {
            let status = serde_json::to_value(p.status)?;
            wr.write_record([
                meson_core::series::format_f64(p.t),
                p.n_layers.to_string(),
                meson_core::series::format_f64(p.initial_cost),
                meson_core::series::format_f64(p.cost),
                p.iterations.to_string(),
                status.as_str().unwrap_or("").to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })
}

/// Peak analysis of `series` on `[0, t_cut)`.
pub fn analyze(series: &TimeSeries, cfg: &ExperimentConfig) -> CliResult<(Spectrum, PeakReport)> {
    let spectrum = fourier_with(series, cfg.t_cut(), cfg.analysis.taper)?;
    let po = cfg.analysis.peak_options();
    let peaks = find_peaks(&spectrum, po.min_prominence, po.band)?;
    if peaks.is_empty() {
        return Err(CliError::Analysis("spectrum has no peaks above the prominence threshold".into()));
    }
    let report = assign_e8(&peaks, spectrum.d_omega, &cfg.analysis.assign_options())?;
    Ok((spectrum, report))
}

pub fn report_markdown(title: &str, report: &RunReport) -> String {
    let mut md = format!("# {title}\n\n");
    if let (Some(m), Some(init)) = (&report.model, &report.initial) {
        md.push_str(&format!("- model: L = {}, h_x = {}, h_z = {}\n- initial state: {init}\n", m.sites, m.h_x, m.h_z));
    }
    md.push_str(&format!(
        "- dt = {}, t_cut = {}, d_omega = {:.6}\n- analyzed series: {} ({} masked samples)\n- m1 = {:.6}, matching tolerance = {:.6}\n\n",
        report.dt, report.t_cut, report.d_omega, report.analyzed, report.masked_samples, report.peaks.m1, report.peaks.tolerance
    ));
    let name = report.backend.map_or("series", Backend::as_str);
    md.push_str(&markdown_table(&[(name, &report.peaks)]));
    if let Some(c) = &report.compression {
        md.push_str(&format!(
            "\nCompression: max cost {:.3e}, up to {} layers, {} points not converged.\n",
            c.max_cost, c.max_layers, c.unconverged_points
        ));
    }
    if !report.warnings.is_empty() {
        md.push_str("\n## Warnings\n\n");
        for w in &report.warnings {
            md.push_str(&format!("- {w}\n"));
        }
    }
    md
}

/// Runs a resolved configuration and writes its outputs to
/// `cfg.output_dir`. Series files are written before the analysis, so they
/// survive an analysis failure.
pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let seeds = Seeds::from_root(cfg.seed);
    let dir = cfg.output_dir.as_path();
    io::create_dir(dir)?;
    let sim = simulate(cfg, &seeds)?;
    let mut outputs = vec!["series.csv".to_string()];
    io::write_with(&dir.join("series.csv"), |w| sim.raw.write_csv(w))?;
    let mut warnings = sim.raw.meta.warnings.clone();

    let analyzed = match &sim.reference {
        Some(reference) => {
            io::write_with(&dir.join("series_ref.csv"), |w| reference.write_csv(w))?;
            let pair = mitigate(&sim.raw, reference, DEFAULT_EPS_DEN)?;
            io::write_with(&dir.join("series_mitigated.csv"), |w| pair.write_csv(w))?;
            outputs.extend(["series_ref.csv".to_string(), "series_mitigated.csv".to_string()]);
            let invalid = (0..pair.mitigated.len()).filter(|&k| !pair.valid(k)).count();
            if invalid > 0 {
                warnings.push(format!("{invalid} samples masked: reference below {DEFAULT_EPS_DEN} in magnitude"));
            }
            pair.mitigated
        }
        None => sim.raw.clone(),
    };
    let compression = sim.points.as_ref().map(|points| {
        use meson_core::compress::Status;
        CompressionSummary {
            max_cost: points.iter().map(|p| p.cost).fold(0.0, f64::max),
            max_layers: points.iter().map(|p| p.n_layers).max().unwrap_or(0),
            unconverged_points: points
                .iter()
                .filter(|p| matches!(p.status, Status::MaxIterations | Status::LineSearchFailed))
                .count(),
        }
    });
    if let Some(points) = &sim.points {
        write_points(&dir.join("compression.csv"), points)?;
        outputs.push("compression.csv".into());
    }

    let manifest_path = dir.join("manifest.json");
    let write_manifest = |outputs: &[String]| {
        io::write_json(
            &manifest_path,
            &Manifest {
                tool: "meson".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config: cfg.clone(),
                seeds: seeds.clone(),
                outputs: outputs.to_vec(),
            },
        )
    };
    let (spectrum, peaks) = match analyze(&analyzed, cfg) {
        Ok(v) => v,
        Err(e) => {
            write_manifest(&outputs)?;
            return Err(e);
        }
    };
    io::write_with(&dir.join("spectrum.csv"), |w| spectrum.write_csv(w))?;
    let report = RunReport {
        backend: Some(cfg.backend),
        model: Some(cfg.model),
        initial: Some(cfg.initial.clone()),
        dt: cfg.dt,
        t_cut: cfg.t_cut(),
        d_omega: spectrum.d_omega,
        analyzed: if sim.reference.is_some() { "mitigated" } else { "raw" }.into(),
        masked_samples: spectrum.window.masked,
        warnings,
        compression,
        peaks,
    };
    io::write_json(&dir.join("report.json"), &report)?;
    io::write_text(&dir.join("report.md"), &report_markdown(&format!("meson run: {}", cfg.backend.as_str()), &report))?;
    outputs.extend(["spectrum.csv", "report.json", "report.md", "manifest.json"].map(String::from));
    write_manifest(&outputs)?;
    Ok(RunOutcome { report, outputs })
}
