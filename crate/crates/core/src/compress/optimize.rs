use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ansatz::BrickwallAnsatz;
use super::target::Target;
use crate::circuit::{unitarity_error4, Mat4};
use crate::error::{Error, Result};
use crate::series::format_f64;

/// Projection of the Euclidean gradient `D = −E/d` onto the tangent space of
/// U(4) at `g`: `g·skew(g†D)`.
pub fn riemannian_gradient(g: &Mat4, env: &Mat4, dim: f64) -> Result<Mat4> {
    let err = unitarity_error4(g);
    if err > 1e-10 {
        return Err(Error::NotUnitary(err));
    }
    let d = -env / nalgebra::Complex::new(dim, 0.0);
    let a = g.adjoint() * d;
    Ok(g * ((a - a.adjoint()) * nalgebra::Complex::new(0.5, 0.0)))
}

/// Polar retraction: the unitary factor of `g + step·xi`.
pub fn retract(g: &Mat4, xi: &Mat4, step: f64) -> Result<Mat4> {
    if step == 0.0 {
        return Ok(*g);
    }
    let a = g.adjoint() * xi;
    let herm = (a + a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale = xi.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if herm > 1e-8 * scale {
        return Err(Error::InvalidArgument(format!("direction is not tangent (Hermitian part {herm:.2e})")));
    }
    let m = g + xi * nalgebra::Complex::new(step, 0.0);
    let svd = m.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) if svd.singular_values.iter().all(|s| *s > 0.0 && s.is_finite()) => Ok(u * v_t),
        _ => Err(Error::Numerical("polar retraction failed on a degenerate matrix".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stop when the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop once the cost is at or below this.
    pub cost_tol: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// First trial step; later iterations start from twice the last
    /// accepted step.
    pub initial_step: f64,
    pub max_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-9,
            cost_tol: 0.0,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
            initial_step: 1.0,
            max_step: 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    GradientTolerance,
    CostTolerance,
    MaxIterations,
    /// No step passed the Armijo test; the best iterate is returned.
    LineSearchFailed,
}

/// One row per iterate: the cost and gradient norm there, and the step that
/// produced it (0 for the initial point).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub ansatz: BrickwallAnsatz,
    pub trace: Vec<TraceRow>,
    pub status: Status,
    /// Largest `‖G†G − I‖` seen over all accepted iterates.
    pub max_unitarity_error: f64,
}

impl OptimizeResult {
    pub fn final_cost(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.cost)
    }

    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |r| r.iter)
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        write_trace_csv(&self.trace, w)
    }
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iter", "cost", "grad_norm", "step"])?;
    for r in trace {
        wtr.write_record([r.iter.to_string(), format_f64(r.cost), format_f64(r.grad_norm), format_f64(r.step)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Gradients of all gates and their total Frobenius norm.
pub(crate) fn gradients(target: &Target, w: &BrickwallAnsatz) -> Result<(f64, Vec<Vec<Mat4>>, f64)> {
    let (overlap, envs) = target.overlap_and_environments(w)?;
    let d = target.dim();
    let mut sq = 0.0;
    let mut grads = Vec::with_capacity(envs.len());
    for (layer, envs) in w.layers().iter().zip(&envs) {
        let mut row = Vec::with_capacity(layer.len());
        for (g, e) in layer.iter().zip(envs) {
            let gr = riemannian_gradient(g, e, d)?;
            sq += gr.norm_squared();
            row.push(gr);
        }
        grads.push(row);
    }
    Ok((1.0 - overlap.re / d, grads, sq.sqrt()))
}

/// Moves every gate along `−grads` by `step`.
fn step_all(w: &BrickwallAnsatz, grads: &[Vec<Mat4>], step: f64) -> Result<BrickwallAnsatz> {
    let mut layers = Vec::with_capacity(w.n_layers());
    for (layer, gl) in w.layers().iter().zip(grads) {
        let row: Result<Vec<Mat4>> = layer.iter().zip(gl).map(|(g, gr)| retract(g, &(-gr), step)).collect();
        layers.push(row?);
    }
    BrickwallAnsatz::from_layers(w.sites(), layers)
}

/// Riemannian steepest descent with Armijo backtracking. Every iteration
/// updates all gates at once from environments of the same iterate.
pub fn optimize(target: &Target, init: &BrickwallAnsatz, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    if init.sites() != target.sites() {
        return Err(Error::DimensionMismatch { expected: target.sites(), actual: init.sites() });
    }
    let mut max_unitarity_error = init.max_unitarity_error();
    if max_unitarity_error > 1e-10 {
        return Err(Error::NotUnitary(max_unitarity_error));
    }
    let mut w = init.clone();
    let mut trace = Vec::new();
    let mut cost = None;
    let mut last_step = 0.0;
    let mut trial = opts.initial_step;
    let mut iter = 0;
    let status = loop {
        let (fresh, grads, gnorm) = gradients(target, &w)?;
        let c = *cost.get_or_insert(fresh);
        trace.push(TraceRow { iter, cost: c, grad_norm: gnorm, step: last_step });
        if c <= opts.cost_tol {
            break Status::CostTolerance;
        }
        if gnorm <= opts.grad_tol {
            break Status::GradientTolerance;
        }
        if iter >= opts.max_iters {
            break Status::MaxIterations;
        }
        let mut alpha = trial.min(opts.max_step);
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let cand = step_all(&w, &grads, alpha)?;
            let cc = 1.0 - target.overlap(&cand)?.re / target.dim();
            if cc <= c - opts.armijo * alpha * gnorm * gnorm && cc < c {
                accepted = Some((cand, cc));
                break;
            }
            alpha *= opts.shrink;
        }
        let Some((next, cc)) = accepted else {
            break Status::LineSearchFailed;
        };
        max_unitarity_error = max_unitarity_error.max(next.max_unitarity_error());
        w = next;
        cost = Some(cc);
        last_step = alpha;
        trial = 2.0 * alpha;
        iter += 1;
    };
    Ok(OptimizeResult { ansatz: w, trace, status, max_unitarity_error })
}
