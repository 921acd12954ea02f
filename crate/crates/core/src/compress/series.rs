use serde::{Deserialize, Serialize};

use super::ansatz::{trotter_init, BrickwallAnsatz};
use super::mpo::MpoOptions;
use super::optimize::{optimize, OptimizeOptions, Status};
use super::target::{cost, dense_target_from, target_operator, Target, TargetMode, MAX_DENSE_TARGET_SITES};
use crate::circuit::{apply_circuit, expectation_z, sample_from_expectation, Shots};
use crate::error::{Error, Result};
use crate::exact::diagonalize;
use crate::model::{build_hamiltonian, central_site, kink_state_for, KinkPattern, ModelSpec};
use crate::series::{step_count, SeriesMeta, TimeSeries};

/// Circuit depth as a step function of evolution time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSchedule {
    /// `(t_threshold, n_layers)`: times up to the threshold use that depth.
    /// Times past the last threshold keep the last depth.
    pub breakpoints: Vec<(f64, usize)>,
}

impl Default for LayerSchedule {
    /// 9 layers up to t = 3, then 8 more per 2 time units, capped at 41.
    fn default() -> Self {
        Self { breakpoints: vec![(3.0, 9), (5.0, 17), (7.0, 25), (9.0, 33), (11.0, 41)] }
    }
}

impl LayerSchedule {
    pub fn new(breakpoints: Vec<(f64, usize)>) -> Result<Self> {
        let s = Self { breakpoints };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(n_layers: usize) -> Self {
        Self { breakpoints: vec![(f64::INFINITY, n_layers)] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() {
            return Err(Error::InvalidArgument("layer schedule is empty".into()));
        }
        for w in self.breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidArgument("schedule thresholds must increase strictly".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument("schedule layer counts must not decrease".into()));
            }
        }
        if self.breakpoints.iter().any(|&(t, n)| n == 0 || t.is_nan()) {
            return Err(Error::InvalidArgument("schedule entries need a threshold and at least one layer".into()));
        }
        Ok(())
    }

    pub fn layers_for(&self, t: f64) -> usize {
        self.breakpoints
            .iter()
            .find(|&&(th, _)| t <= th + 1e-12)
            .or(self.breakpoints.last())
            .map_or(1, |&(_, n)| n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressOptions {
    pub schedule: LayerSchedule,
    pub optimize: OptimizeOptions,
    /// Dense up to 12 sites unless set.
    pub mode: Option<TargetMode>,
    pub mpo: MpoOptions,
    /// Start each time point from the better of the previous optimum and a
    /// fresh product-formula circuit.
    pub warm_start: bool,
}

impl Default for CompressOptions {
    fn default() -> Self {
        Self {
            schedule: LayerSchedule::default(),
            optimize: OptimizeOptions { max_iters: 200, grad_tol: 1e-8, cost_tol: 1e-6, ..Default::default() },
            mode: None,
            mpo: MpoOptions::default(),
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressedPoint {
    pub t: f64,
    pub n_layers: usize,
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    pub status: Status,
}

#[derive(Clone, Debug)]
pub struct CompressedRun {
    pub series: TimeSeries,
    pub points: Vec<CompressedPoint>,
    /// Optimized circuit for each time point.
    pub ansatze: Vec<BrickwallAnsatz>,
}

/// Optimizes one brickwall per time point and records `⟨σᶻ_cen⟩` of the
/// circuit applied to the kink state.
pub fn run_compressed_series(
    spec: &ModelSpec,
    pattern: &KinkPattern,
    dt: f64,
    t_max: f64,
    opts: &CompressOptions,
    shots: Option<Shots>,
) -> Result<CompressedRun> {
    opts.schedule.validate()?;
    let n = step_count(dt, t_max)?;
    let psi0 = kink_state_for(spec, pattern)?;
    let site = central_site(spec.sites);
    let mode = opts.mode.unwrap_or(if spec.sites <= MAX_DENSE_TARGET_SITES { TargetMode::Dense } else { TargetMode::Mpo });
    let eig = match mode {
        TargetMode::Dense => Some(diagonalize(&build_hamiltonian(spec)?)?),
        TargetMode::Mpo => None,
    };
    let mut meta = SeriesMeta::new("compressed");
    let mut values = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);
    let mut ansatze: Vec<BrickwallAnsatz> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * dt;
        let target: Target = match &eig {
            Some(eig) => dense_target_from(eig, t)?,
            None => target_operator(spec, t, TargetMode::Mpo, &opts.mpo)?,
        };
        let layers = opts.schedule.layers_for(t);
        let mut init = trotter_init(spec, t, layers)?;
        let mut init_cost = cost(&target, &init)?;
        if let Some(prev) = ansatze.last().filter(|_| opts.warm_start) {
            if prev.n_layers() <= layers {
                let cand = prev.padded(layers);
                let c = cost(&target, &cand)?;
                if c < init_cost {
                    init = cand;
                    init_cost = c;
                }
            }
        }
        let res = optimize(&target, &init, &opts.optimize)?;
        if matches!(res.status, Status::LineSearchFailed | Status::MaxIterations) {
            meta.warnings.push(format!(
                "t={t}: optimizer stopped ({:?}) at cost {:.3e}",
                res.status,
                res.final_cost()
            ));
        }
        let psi = apply_circuit(&psi0, &res.ansatz.to_circuit())?;
        let z = expectation_z(&psi, site)?;
        values.push(match shots {
            Some(s) => sample_from_expectation(z, s.shots, s.seed, k as u64)?,
            None => z,
        });
        points.push(CompressedPoint {
            t,
            n_layers: layers,
            initial_cost: init_cost,
            cost: res.final_cost(),
            iterations: res.iterations(),
            status: res.status,
        });
        ansatze.push(res.ansatz);
    }
    meta.model = Some(*spec);
    meta.pattern = Some(pattern.to_string());
    meta.site = site;
    meta.shots = shots.map(|s| s.shots);
    meta.seed = shots.map(|s| s.seed);
    Ok(CompressedRun { series: TimeSeries::new(dt, values, meta), points, ansatze })
}
