//! Synthetic device noise, the zero-angle reference circuit and the
//! divide-by-reference mitigation.

mod density;
mod kak;

pub use density::{DensityMatrix, MAX_DENSITY_SITES};
pub use kak::{decompose_circuit, decompose_to_native, euler_zxz, native_product, phase_distance};

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{gates, sample_from_expectation, Circuit, Gate, Mat2, Shots};
use crate::error::{Error, Result};
use crate::model::{central_site, kink_state_for, KinkPattern, ModelSpec};
use crate::par;
use crate::rng::{child_seed, stream_rng};
use crate::series::{format_f64, step_count, SeriesMeta, TimeSeries};
use crate::state::StateVector;

/// Depolarizing gate noise and symmetric readout error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Depolarizing probability after each single-site gate.
    pub p1: f64,
    /// Depolarizing probability after each two-site gate.
    pub p2: f64,
    /// Probability that a measured bit is flipped.
    pub readout_flip: f64,
    /// Whole-register depolarizing `(1 − λ)ρ + λI/d` after every block.
    pub global_step: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("readout_flip", self.readout_flip), ("global_step", self.global_step)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.readout_flip == 0.0 && self.global_step == 0.0
    }

    fn gate_probability(&self, g: &Gate) -> f64 {
        if g.is_two_site() { self.p2 } else { self.p1 }
    }
}

/// Zeroes every `RX`/`RZ` angle and keeps `RZZ` gates and the layer layout.
pub fn reference_circuit(c: &Circuit) -> Result<Circuit> {
    if c.gates().any(|g| matches!(g, Gate::Dense2q { .. })) {
        return Err(Error::InvalidCircuit(
            "circuit contains DENSE2Q gates; run decompose_circuit first".into(),
        ));
    }
    Ok(c.map_gates(|g| match *g {
        Gate::Rx { site, .. } => Gate::Rx { site, angle: 0.0 },
        Gate::Rz { site, .. } => Gate::Rz { site, angle: 0.0 },
        ref other => other.clone(),
    }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    /// Density matrix up to 10 sites, trajectories beyond.
    #[default]
    Auto,
    DensityMatrix,
    Trajectories(usize),
}

/// Trajectories used by [`SimMethod::Auto`] above the density-matrix limit.
pub const DEFAULT_TRAJECTORIES: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoisySimOptions {
    pub method: SimMethod,
    pub shots: Option<Shots>,
    /// Seeds trajectory sampling.
    pub seed: u64,
}

/// `⟨σᶻ_cen⟩` at `t_k = k·dt` for the circuit blocks `blocks(k)`, applied in
/// order to the kink state with depolarizing noise after every gate and the
/// global channel after every block. Readout error scales the expectation by
/// `1 − 2·readout_flip` before shot sampling.
pub fn run_noisy_series<F>(
    spec: &ModelSpec,
    pattern: &KinkPattern,
    dt: f64,
    t_max: f64,
    blocks: F,
    noise: &NoiseModel,
    opts: &NoisySimOptions,
) -> Result<TimeSeries>
where
    F: Fn(usize) -> Result<Vec<Circuit>> + Sync + Send,
{
    noise.validate()?;
    let n = step_count(dt, t_max)?;
    let psi0 = kink_state_for(spec, pattern)?;
    let site = central_site(spec.sites);
    let method = resolve_method(spec, opts)?;
    let values = par::try_map_range(n + 1, |k| {
        let circuits = blocks(k)?;
        if let Some(c) = circuits.iter().find(|c| c.sites() != spec.sites) {
            return Err(Error::DimensionMismatch { expected: spec.sites, actual: c.sites() });
        }
        let z = match method {
            SimMethod::Trajectories(count) => {
                trajectory_expectation(&psi0, &circuits, noise, site - 1, count, child_seed(opts.seed, k as u64))?
            }
            _ => density_expectation(&psi0, &circuits, noise, site - 1)?,
        };
        measure(z, noise, opts, k)
    })?;
    Ok(TimeSeries::new(dt, values, noisy_meta(spec, pattern, opts)))
}

/// [`run_noisy_series`] for `blocks(k) = [step; k]`. The density matrix is
/// carried from one time point to the next, which gives the same values as
/// rebuilding every point at a fraction of the cost; trajectories are still
/// sampled independently per point.
pub fn run_noisy_steps(
    spec: &ModelSpec,
    pattern: &KinkPattern,
    dt: f64,
    t_max: f64,
    step: &Circuit,
    noise: &NoiseModel,
    opts: &NoisySimOptions,
) -> Result<TimeSeries> {
    let method = resolve_method(spec, opts)?;
    if matches!(method, SimMethod::Trajectories(_)) {
        return run_noisy_series(spec, pattern, dt, t_max, |k| Ok(vec![step.clone(); k]), noise, opts);
    }
    noise.validate()?;
    if step.sites() != spec.sites {
        return Err(Error::DimensionMismatch { expected: spec.sites, actual: step.sites() });
    }
    let n = step_count(dt, t_max)?;
    let site0 = central_site(spec.sites) - 1;
    let mut rho = DensityMatrix::from_state(&kink_state_for(spec, pattern)?)?;
    let mut values = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            apply_noisy_block(&mut rho, step, noise);
        }
        values.push(measure(rho.z_expectation(site0)?, noise, opts, k)?);
    }
    Ok(TimeSeries::new(dt, values, noisy_meta(spec, pattern, opts)))
}

fn resolve_method(spec: &ModelSpec, opts: &NoisySimOptions) -> Result<SimMethod> {
    let method = match opts.method {
        SimMethod::Auto if spec.sites <= MAX_DENSITY_SITES => SimMethod::DensityMatrix,
        SimMethod::Auto => SimMethod::Trajectories(DEFAULT_TRAJECTORIES),
        m => m,
    };
    if method == SimMethod::DensityMatrix && spec.sites > MAX_DENSITY_SITES {
        return Err(Error::TooLarge { len: spec.sites, max: MAX_DENSITY_SITES });
    }
    Ok(method)
}

/// Readout scaling, then optional shot sampling on stream `k`.
fn measure(z: f64, noise: &NoiseModel, opts: &NoisySimOptions, k: usize) -> Result<f64> {
    let measured = z * (1.0 - 2.0 * noise.readout_flip);
    match opts.shots {
        Some(s) => sample_from_expectation(measured, s.shots, s.seed, k as u64),
        None => Ok(measured),
    }
}

fn noisy_meta(spec: &ModelSpec, pattern: &KinkPattern, opts: &NoisySimOptions) -> SeriesMeta {
    let mut meta = SeriesMeta::new("noisy");
    meta.model = Some(*spec);
    meta.pattern = Some(pattern.to_string());
    meta.site = central_site(spec.sites);
    meta.shots = opts.shots.map(|s| s.shots);
    meta.seed = opts.shots.map(|s| s.seed);
    meta
}

fn apply_noisy_block(rho: &mut DensityMatrix, c: &Circuit, noise: &NoiseModel) {
    for g in c.gates() {
        rho.apply_gate(g);
        let p = noise.gate_probability(g);
        if g.is_two_site() {
            rho.depolarize_2q(g.first_site(), p);
        } else {
            rho.depolarize_1q(g.first_site(), p);
        }
    }
    rho.depolarize_global(noise.global_step);
}

fn density_expectation(psi0: &StateVector, circuits: &[Circuit], noise: &NoiseModel, site0: usize) -> Result<f64> {
    let mut rho = DensityMatrix::from_state(psi0)?;
    for c in circuits {
        apply_noisy_block(&mut rho, c, noise);
    }
    rho.z_expectation(site0)
}

fn pauli(k: usize) -> Mat2 {
    let c = |r: f64, i: f64| Complex::new(r, i);
    match k {
        1 => Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        2 => Mat2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        3 => Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        _ => Mat2::identity(),
    }
}

/// Stochastic unravelling of the same channels: each depolarizing event
/// inserts a uniformly random non-identity Pauli, the global channel a
/// uniformly random Pauli string. Trajectories are seeded individually and
/// averaged by pairwise summation.
fn trajectory_expectation(
    psi0: &StateVector,
    circuits: &[Circuit],
    noise: &NoiseModel,
    site0: usize,
    count: usize,
    seed: u64,
) -> Result<f64> {
    if count == 0 {
        return Err(Error::InvalidArgument("at least one trajectory is required".into()));
    }
    let sites = psi0.sites();
    let samples = par::try_map_range(count, |traj| {
        let mut rng = stream_rng(seed, traj as u64);
        let mut psi = psi0.clone();
        let amps = psi.amplitudes_mut();
        for c in circuits {
            for g in c.gates() {
                g.apply(amps, sites);
                let s = g.first_site();
                if g.is_two_site() {
                    if noise.p2 > 0.0 && rng.random::<f64>() < noise.p2 {
                        let k = rng.random_range(1..16);
                        gates::apply_1q(amps, sites, s, &pauli(k / 4));
                        gates::apply_1q(amps, sites, s + 1, &pauli(k % 4));
                    }
                } else if noise.p1 > 0.0 && rng.random::<f64>() < noise.p1 {
                    gates::apply_1q(amps, sites, s, &pauli(rng.random_range(1..4)));
                }
            }
            if noise.global_step > 0.0 && rng.random::<f64>() < noise.global_step {
                for s in 0..sites {
                    gates::apply_1q(amps, sites, s, &pauli(rng.random_range(0..4)));
                }
            }
        }
        psi.z_expectation(site0)
    })?;
    Ok(par::pairwise_sum(&samples) / count as f64)
}

/// Denominator magnitude below which a mitigated point is flagged invalid.
pub const DEFAULT_EPS_DEN: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct MitigationPair {
    pub raw: TimeSeries,
    pub reference: TimeSeries,
    /// Invalid points hold NaN and are masked.
    pub mitigated: TimeSeries,
}

impl MitigationPair {
    pub fn valid(&self, k: usize) -> bool {
        self.mitigated.is_valid(k)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "raw", "ref", "mitigated", "valid"])?;
        for k in 0..self.raw.len() {
            wtr.write_record([
                format_f64(self.raw.time(k)),
                format_f64(self.raw.values[k]),
                format_f64(self.reference.values[k]),
                format_f64(self.mitigated.values[k]),
                self.valid(k).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `mitigated[k] = raw[k]·reference[0]/reference[k]`, invalid where
/// `|reference[k]| < eps_den` or either input is masked.
pub fn mitigate(raw: &TimeSeries, reference: &TimeSeries, eps_den: f64) -> Result<MitigationPair> {
    if raw.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: raw.len(), actual: reference.len() });
    }
    if (raw.dt - reference.dt).abs() > 1e-12 * raw.dt.abs().max(1.0) {
        return Err(Error::InvalidTimeGrid(format!("dt differs: {} vs {}", raw.dt, reference.dt)));
    }
    if raw.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    let r0 = reference.values[0];
    let mut values = Vec::with_capacity(raw.len());
    let mut mask = Vec::with_capacity(raw.len());
    for k in 0..raw.len() {
        let den = reference.values[k];
        let ok = den.abs() >= eps_den && raw.is_valid(k) && reference.is_valid(k) && reference.is_valid(0);
        mask.push(ok);
        values.push(if ok { raw.values[k] * (r0 / den) } else { f64::NAN });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::InvalidArgument("every mitigated point is invalid".into()));
    }
    let mut meta = raw.meta.clone();
    meta.backend = format!("{}+mitigated", raw.meta.backend);
    let invalid = mask.iter().filter(|m| !**m).count();
    if invalid > 0 {
        meta.warnings.push(format!("{invalid} points have |reference| < {eps_den} and are masked"));
    }
    let mitigated = TimeSeries { dt: raw.dt, values, mask: Some(mask), meta };
    Ok(MitigationPair { raw: raw.clone(), reference: reference.clone(), mitigated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CircuitKind {
    Main,
    Reference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub kind: CircuitKind,
    pub time_index: usize,
    pub t: f64,
}

/// Submission order alternating each circuit with its reference, split into
/// jobs of at most `chunk` circuits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobPlan {
    pub chunk: usize,
    pub entries: Vec<PlanEntry>,
}

/// Jobs per the usual per-job circuit limit.
pub const DEFAULT_CHUNK: usize = 200;

impl JobPlan {
    pub fn jobs(&self) -> impl Iterator<Item = &[PlanEntry]> {
        self.entries.chunks(self.chunk)
    }

    /// Times at which a new job starts (excluding the first), where device
    /// drift may show up as a discontinuity.
    pub fn boundary_times(&self) -> Vec<f64> {
        self.jobs().skip(1).map(|j| j[0].t).collect()
    }

    /// One line per circuit, `# job <n>` before each chunk.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (i, job) in self.jobs().enumerate() {
            let _ = writeln!(out, "# job {} ({} circuits)", i + 1, job.len());
            for e in job {
                let kind = match e.kind {
                    CircuitKind::Main => "U",
                    CircuitKind::Reference => "U_ref",
                };
                let _ = writeln!(out, "{kind} {} {}", e.time_index, format_f64(e.t));
            }
        }
        out
    }
}

pub fn interleaved_plan(times: &[f64], chunk: usize) -> Result<JobPlan> {
    if chunk == 0 {
        return Err(Error::InvalidArgument("chunk size must be positive".into()));
    }
    let entries = times
        .iter()
        .enumerate()
        .flat_map(|(k, &t)| {
            [CircuitKind::Main, CircuitKind::Reference].map(|kind| PlanEntry { kind, time_index: k, t })
        })
        .collect();
    Ok(JobPlan { chunk, entries })
}
