//! Standalone `compress`, `mitigate` and `spectrum` commands.

use std::path::{Path, PathBuf};

use meson_core::circuit::write_circuit;
use meson_core::compress::{optimize, target_operator, trotter_init, MpoOptions, OptimizeOptions, OptimizeResult, TargetMode, MAX_DENSE_TARGET_SITES};
use meson_core::noise::{decompose_circuit, mitigate, MitigationPair};
use meson_core::series::step_count;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::run::{analyze, report_markdown, RunReport};

pub struct CompressRequest {
    pub time: f64,
    /// Overrides the schedule.
    pub layers: Option<usize>,
    /// Decompose into RX/RZ/RZZ instead of writing dense two-qubit gates.
    pub native: bool,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
}

/// Optimizes one brickwall circuit for `e^{−iHt}` and writes it as text.
pub fn compress(cfg: &ExperimentConfig, req: &CompressRequest) -> CliResult<OptimizeResult> {
    cfg.model.validate().map_err(|e| CliError::config("model", e.to_string()))?;
    if !(req.time >= 0.0 && req.time.is_finite()) {
        return Err(CliError::Usage(format!("--time must be non-negative, got {}", req.time)));
    }
    let schedule = cfg.schedule.clone().unwrap_or_default();
    let n_layers = req.layers.unwrap_or_else(|| schedule.layers_for(req.time));
    if n_layers == 0 {
        return Err(CliError::Usage("--layers must be at least 1".into()));
    }
    let mode = if cfg.model.sites <= MAX_DENSE_TARGET_SITES { TargetMode::Dense } else { TargetMode::Mpo };
    let target = target_operator(&cfg.model, req.time, mode, &MpoOptions::default())?;
    let init = trotter_init(&cfg.model, req.time, n_layers)?;
    let opts = OptimizeOptions {
        max_iters: cfg.compress.max_iters,
        grad_tol: cfg.compress.grad_tol,
        cost_tol: cfg.compress.cost_tol,
        ..Default::default()
    };
    let result = optimize(&target, &init, &opts)?;
    let mut circuit = result.ansatz.to_circuit();
    if req.native {
        circuit = decompose_circuit(&circuit)?;
    }
    io::write_text(&req.out, &write_circuit(&circuit))?;
    if let Some(path) = &req.trace {
        io::write_with(path, |w| result.write_trace_csv(w))?;
    }
    Ok(result)
}

/// Divides `raw` by the normalized reference and writes the combined CSV.
pub fn mitigate_files(raw: &Path, reference: &Path, eps: f64, out: &Path) -> CliResult<MitigationPair> {
    if !(eps > 0.0) {
        return Err(CliError::Usage(format!("--eps must be positive, got {eps}")));
    }
    let r = io::read_series(raw)?;
    let q = io::read_series(reference)?;
    let pair = mitigate(&r, &q, eps)?;
    io::write_with(out, |w| pair.write_csv(w))?;
    Ok(pair)
}

/// Spectrum and peak report for a series CSV.
pub fn spectrum_file(input: &Path, cfg: &ExperimentConfig, t_cut: Option<f64>, out: &Path) -> CliResult<RunReport> {
    let series = io::read_series(input)?;
    let t_cut = t_cut.unwrap_or(series.duration());
    step_count(series.dt, t_cut).map_err(|e| CliError::Usage(format!("--t-cut: {e}")))?;
    let cfg = ExperimentConfig { dt: series.dt, t_max: series.duration(), t_cut: Some(t_cut), ..cfg.clone() };
    let (spectrum, peaks) = analyze(&series, &cfg)?;
    io::create_dir(out)?;
    io::write_with(&out.join("spectrum.csv"), |w| spectrum.write_csv(w))?;
    let report = RunReport {
        backend: None,
        model: None,
        initial: None,
        dt: series.dt,
        t_cut,
        d_omega: spectrum.d_omega,
        analyzed: series.meta.backend.clone(),
        masked_samples: spectrum.window.masked,
        warnings: Vec::new(),
        compression: None,
        peaks,
    };
    io::write_json(&out.join("report.json"), &report)?;
    io::write_text(&out.join("report.md"), &report_markdown(&format!("meson spectrum: {}", input.display()), &report))?;
    Ok(report)
}
