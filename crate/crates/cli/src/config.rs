//! Experiment configuration: TOML on input, resolved JSON in the manifest.

use std::path::{Path, PathBuf};

use meson_core::compress::LayerSchedule;
use meson_core::noise::NoiseModel;
use meson_core::series::step_count;
use meson_core::spectral::{AssignOptions, M1Choice, PeakOptions, Taper};
use meson_core::{KinkPattern, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Shots per circuit when a circuit backend does not say otherwise.
pub const DEFAULT_SHOTS: u64 = 8192;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    #[default]
    Trotter,
    Compressed,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Trotter => "trotter",
            Backend::Compressed => "compressed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Peak prominence relative to the spectrum maximum.
    pub min_prominence: f64,
    /// Fixes `m1` at this frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    /// Takes `m1` as the tallest peak in this band.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1_band: Option<[f64; 2]>,
    pub rel_tolerance: f64,
    pub taper: Taper,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let a = AssignOptions::default();
        Self {
            min_prominence: PeakOptions::default().min_prominence,
            m1: None,
            m1_band: None,
            rel_tolerance: a.rel_tolerance,
            taper: Taper::Rectangular,
        }
    }
}

impl AnalysisConfig {
    pub fn assign_options(&self) -> AssignOptions {
        let m1 = match (self.m1, self.m1_band) {
            (Some(w), _) => M1Choice::Hint(w),
            (None, Some([lo, hi])) => M1Choice::Band(lo, hi),
            (None, None) => M1Choice::Consistent,
        };
        AssignOptions { m1, rel_tolerance: self.rel_tolerance }
    }

    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions { min_prominence: self.min_prominence, ..PeakOptions::default() }
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.min_prominence >= 0.0 && self.min_prominence < 1.0) {
            return Err(CliError::config("analysis.min_prominence", "must lie in [0, 1)"));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(CliError::config("analysis.rel_tolerance", "must be positive"));
        }
        if self.m1.is_some_and(|w| !(w > 0.0 && w.is_finite())) {
            return Err(CliError::config("analysis.m1", "must be a positive frequency"));
        }
        if self.m1_band.is_some_and(|[lo, hi]| !(0.0 <= lo && lo < hi)) {
            return Err(CliError::config("analysis.m1_band", "needs 0 <= lo < hi"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub warm_start: bool,
}

impl Default for CompressConfig {
    fn default() -> Self {
        let o = meson_core::compress::CompressOptions::default();
        Self {
            max_iters: o.optimize.max_iters,
            grad_tol: o.optimize.grad_tol,
            cost_tol: o.optimize.cost_tol,
            warm_start: o.warm_start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Kink pattern such as `"UUDDDDUU"`, site 1 first.
    pub initial: String,
    pub dt: f64,
    pub t_max: f64,
    /// Fourier window; the full series when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cut: Option<f64>,
    pub backend: Backend,
    /// Circuit backends only; 0 disables sampling. Defaults to 8192 there.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    /// Noisy runs above the density-matrix limit use this many trajectories.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<LayerSchedule>,
    pub mitigation: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub analysis: AnalysisConfig,
    pub compress: CompressConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec { sites: 8, h_x: 1.0, h_z: 3.0 },
            initial: "UUDDDDUU".into(),
            dt: 0.1,
            t_max: 10.0,
            t_cut: None,
            backend: Backend::Trotter,
            shots: None,
            noise: None,
            trajectories: None,
            schedule: None,
            mitigation: false,
            seed: 0,
            output_dir: PathBuf::from("out"),
            analysis: AnalysisConfig::default(),
            compress: CompressConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub t_cut: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(String::new, |s| text[s].lines().next().unwrap_or("").trim().to_string());
            CliError::config(if field.is_empty() { "<document>".to_string() } else { field }, e.message().to_string())
        })
    }

    /// Reads a TOML config, or the resolved config stored in a run's
    /// `manifest.json`.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
            let cfg = v.get("config").cloned().unwrap_or(v);
            return serde_json::from_value(cfg).map_err(|e| CliError::config("<manifest>", e.to_string()));
        }
        Self::from_toml(&text)
    }

    pub fn pattern(&self) -> CliResult<KinkPattern> {
        self.initial.parse().map_err(|e: meson_core::Error| CliError::config("initial", e.to_string()))
    }

    pub fn t_cut(&self) -> f64 {
        self.t_cut.unwrap_or(self.t_max)
    }

    /// Applies overrides, fills backend-dependent defaults and validates.
    pub fn resolve(mut self, o: &Overrides) -> CliResult<Self> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.output_dir = p.clone();
        }
        if let Some(b) = o.backend {
            self.backend = b;
        }
        if let Some(t) = o.t_cut {
            self.t_cut = Some(t);
        }
        self.validate()?;
        if self.backend != Backend::Exact && self.shots.is_none() {
            self.shots = Some(DEFAULT_SHOTS);
        }
        if self.t_cut.is_none() {
            self.t_cut = Some(self.t_max);
        }
        if self.backend == Backend::Compressed && self.schedule.is_none() {
            self.schedule = Some(LayerSchedule::default());
        }
        Ok(self)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model.validate().map_err(|e| CliError::config("model", e.to_string()))?;
        let pattern = self.pattern()?;
        if pattern.len() != self.model.sites {
            return Err(CliError::config(
                "initial",
                format!("pattern has {} sites but model.L = {}", pattern.len(), self.model.sites),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CliError::config("dt", "must be positive"));
        }
        step_count(self.dt, self.t_max).map_err(|e| CliError::config("t_max", e.to_string()))?;
        if let Some(t_cut) = self.t_cut {
            if !(t_cut > 0.0) || t_cut > self.t_max + 1e-9 * self.dt {
                return Err(CliError::config("t_cut", format!("must lie in (0, t_max = {}], got {t_cut}", self.t_max)));
            }
            step_count(self.dt, t_cut).map_err(|e| CliError::config("t_cut", e.to_string()))?;
        }
        if self.backend == Backend::Exact {
            if self.shots.is_some() {
                return Err(CliError::config("shots", "shot sampling applies to circuit backends only; exact is always exact"));
            }
            if self.noise.is_some() {
                return Err(CliError::config("noise", "noise applies to circuit backends only"));
            }
            if self.mitigation {
                return Err(CliError::config("mitigation", "requires a circuit backend (trotter or compressed)"));
            }
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(|e| CliError::config("noise", e.to_string()))?;
        }
        if self.trajectories == Some(0) {
            return Err(CliError::config("trajectories", "must be at least 1"));
        }
        if let Some(s) = &self.schedule {
            s.validate().map_err(|e| CliError::config("schedule", e.to_string()))?;
        }
        self.analysis.validate()?;
        if self.compress.max_iters == 0 {
            return Err(CliError::config("compress.max_iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_workhorse_run() {
        let c = ExperimentConfig::from_toml("").unwrap().resolve(&Overrides::default()).unwrap();
        assert_eq!(c.model, ModelSpec { sites: 8, h_x: 1.0, h_z: 3.0 });
        assert_eq!(c.initial, "UUDDDDUU");
        assert_eq!((c.dt, c.t_max, c.t_cut), (0.1, 10.0, Some(10.0)));
        assert_eq!(c.shots, Some(8192));
    }

    #[test]
    fn field_level_errors() {
        let bad = |text: &str, field: &str| match ExperimentConfig::from_toml(text).and_then(|c| c.resolve(&Overrides::default())) {
            Err(CliError::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: {other:?}"),
        };
        bad("backend = \"exact\"\nshots = 100", "shots");
        bad("backend = \"exact\"\nmitigation = true", "mitigation");
        bad("t_cut = 12.0", "t_cut");
        bad("initial = \"UUD\"", "initial");
        bad("initial = \"UUXDDDUU\"", "initial");
        bad("[noise]\np2 = 1.5", "noise");
        bad("[schedule]\nbreakpoints = [[3.0, 9], [2.0, 17]]", "schedule");
        bad("[model]\nL = 1\nh_x = 1.0\nh_z = 3.0", "model");
        assert!(matches!(ExperimentConfig::from_toml("colour = 3"), Err(CliError::Config { .. })));
    }

    #[test]
    fn overrides_take_precedence() {
        let o = Overrides { seed: Some(5), out: Some("x".into()), backend: Some(Backend::Exact), t_cut: Some(5.0) };
        let c = ExperimentConfig::from_toml("seed = 1\nbackend = \"trotter\"").unwrap().resolve(&o).unwrap();
        assert_eq!((c.seed, c.backend, c.t_cut, c.shots), (5, Backend::Exact, Some(5.0), None));
        assert_eq!(c.output_dir, PathBuf::from("x"));
    }

    #[test]
    fn schedule_and_noise_parse() {
        let c = ExperimentConfig::from_toml(
            "backend = \"compressed\"\n[noise]\np2 = 0.01\n[schedule]\nbreakpoints = [[2.0, 5], [4.0, 9]]\n",
        )
        .unwrap()
        .resolve(&Overrides::default())
        .unwrap();
        assert_eq!(c.schedule.unwrap().breakpoints, vec![(2.0, 5), (4.0, 9)]);
        assert_eq!(c.noise.unwrap(), NoiseModel { p2: 0.01, ..Default::default() });
    }
}
