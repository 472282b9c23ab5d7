//! Complete, serializable description of one run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::{MamOptions, PathGrid};
use crate::error::{Error, Result};
use crate::manifolds::{BasinOptions, TraceOptions};
use crate::model::{ModelParams, State};
use crate::rate::{RampRunOptions, RampSpec};
use crate::stochastic::Reflection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub c: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { gamma: 0.43, c: 0.286 }
    }
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.gamma, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartBasin {
    O,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma1: f64,
    pub sigma2: f64,
    pub dt: f64,
    pub tau_f: f64,
    pub store_every: usize,
    pub realizations: usize,
    pub start: StartBasin,
    pub reflection: Reflection,
    /// Keep integrating after the first tip.
    pub continue_after_tip: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            sigma1: 0.005,
            sigma2: 0.005,
            dt: 0.1,
            tau_f: 1e5,
            store_every: 10,
            realizations: 20,
            start: StartBasin::O,
            reflection: Reflection::Mirror,
            continue_after_tip: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalRateSection {
    pub r_lo: f64,
    pub r_hi: f64,
    pub tol: f64,
}

impl Default for CriticalRateSection {
    fn default() -> Self {
        CriticalRateSection { r_lo: 0.04, r_hi: 0.06, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinedSection {
    /// Absolute end time of the noisy ramped runs.
    pub tau_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approach_tol: Option<f64>,
    pub dt: f64,
    pub realizations: usize,
    pub start: StartBasin,
}

impl Default for CombinedSection {
    fn default() -> Self {
        CombinedSection { tau_end: 2500.0, tau0: None, approach_tol: None, dt: 0.01, realizations: 1000, start: StartBasin::S }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub c_min: f64,
    pub c_max: f64,
    pub c_steps: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { c_min: 0.01, c_max: 0.4, c_steps: 40, gamma_min: 0.05, gamma_max: 0.95, gamma_steps: 19 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasinSection {
    pub nv: usize,
    pub nm: usize,
    pub t_max: f64,
    pub tol: f64,
    pub dt: f64,
}

impl Default for BasinSection {
    fn default() -> Self {
        let o = BasinOptions::default();
        BasinSection { nv: 50, nm: 50, t_max: o.t_max, tol: o.tol, dt: o.dt }
    }
}

impl BasinSection {
    pub fn options(&self) -> BasinOptions {
        BasinOptions { t_max: self.t_max, tol: self.tol, dt: self.dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CenterManifoldSection {
    pub v_max: f64,
    pub points: usize,
}

impl Default for CenterManifoldSection {
    fn default() -> Self {
        CenterManifoldSection { v_max: 0.05, points: 51 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSource {
    /// Trajectory of the deterministic flow from `x0`.
    Deterministic,
    /// Straight line from O to S.
    Straight,
    /// CSV with columns tau, v, m on a uniform grid.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionSection {
    pub source: PathSource,
    pub x0: State,
    pub tau_f: f64,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_file: Option<String>,
}

impl Default for ActionSection {
    fn default() -> Self {
        ActionSection { source: PathSource::Deterministic, x0: State::new(0.3, 0.5), tau_f: 20.0, nodes: 2001, path_file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleSection {
    pub junction_tol: f64,
    pub tail_time: f64,
    pub tail_tol: f64,
}

impl Default for AssembleSection {
    fn default() -> Self {
        AssembleSection { junction_tol: 1e-2, tail_time: 5000.0, tail_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TipTimeSection {
    pub r_fraction: f64,
}

impl Default for TipTimeSection {
    fn default() -> Self {
        TipTimeSection { r_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub ramp: RampSpec,
    pub ramp_run: RampRunOptions,
    pub critical_rate: CriticalRateSection,
    pub noise: NoiseSection,
    pub combined: CombinedSection,
    pub sweep: SweepSection,
    pub basin: BasinSection,
    pub trace: TraceOptions,
    pub center_manifold: CenterManifoldSection,
    pub mam: MamOptions,
    pub grid: PathGrid,
    pub assemble: AssembleSection,
    pub action: ActionSection,
    pub tip_time: TipTimeSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 2024,
            model: ModelSection::default(),
            ramp: RampSpec::default(),
            ramp_run: RampRunOptions::default(),
            critical_rate: CriticalRateSection::default(),
            noise: NoiseSection::default(),
            combined: CombinedSection::default(),
            sweep: SweepSection::default(),
            basin: BasinSection::default(),
            trace: TraceOptions::default(),
            center_manifold: CenterManifoldSection::default(),
            mam: MamOptions::default(),
            grid: PathGrid::default(),
            assemble: AssembleSection::default(),
            action: ActionSection::default(),
            tip_time: TipTimeSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads TOML, or the `config` member of a result envelope when the file is JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let c = v.get("config").ok_or_else(|| Error::Config("envelope has no config member".into()))?;
            serde_json::from_value(c.clone()).map_err(|e| Error::Config(e.to_string()))
        } else {
            Self::from_toml(&text)
        }
    }

    /// Range and consistency checks that do not need any computation.
    pub fn validate(&self) -> Result<()> {
        self.model.params().map_err(|e| Error::Config(e.to_string()))?;
        self.ramp.validate().map_err(|e| Error::Config(e.to_string()))?;
        let n = &self.noise;
        positive("noise.sigma1", n.sigma1)?;
        positive("noise.sigma2", n.sigma2)?;
        positive("noise.dt", n.dt)?;
        positive("noise.tau_f", n.tau_f)?;
        positive("combined.dt", self.combined.dt)?;
        positive("ramp_run.dt", self.ramp_run.dt)?;
        positive("ramp_run.tol", self.ramp_run.tol)?;
        positive("critical_rate.tol", self.critical_rate.tol)?;
        positive("mam.tol", self.mam.tol)?;
        positive("mam.ds", self.mam.ds)?;
        positive("grid.tau_f", self.grid.tau_f)?;
        positive("basin.dt", self.basin.dt)?;
        positive("basin.tol", self.basin.tol)?;
        positive("center_manifold.v_max", self.center_manifold.v_max)?;
        positive("action.tau_f", self.action.tau_f)?;
        if self.grid.nodes < 3 || self.action.nodes < 3 {
            return Err(Error::Config("path grids need at least 3 nodes".into()));
        }
        if !(self.sweep.c_min <= self.sweep.c_max) || !(self.sweep.gamma_min <= self.sweep.gamma_max) {
            return Err(Error::Config("sweep bounds are reversed".into()));
        }
        if !(self.tip_time.r_fraction > 0.0 && self.tip_time.r_fraction < 1.0) {
            return Err(Error::Config("tip_time.r_fraction must lie in (0, 1)".into()));
        }
        if self.action.source == PathSource::File && self.action.path_file.is_none() {
            return Err(Error::Config("action.source = \"file\" needs action.path_file".into()));
        }
        Ok(())
    }

    pub fn noise_spec(&self) -> crate::stochastic::NoiseSpec {
        let n = &self.noise;
        crate::stochastic::NoiseSpec {
            sigma1: n.sigma1,
            sigma2: n.sigma2,
            seed: self.seed,
            dt: n.dt,
            tau_f: n.tau_f,
            store_every: n.store_every,
        }
    }
}

/// Evenly spaced samples; one sample is `lo`, zero samples is empty.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::from_toml("seed = 7\n[model]\nc = 0.22\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model.c, 0.22);
        assert_eq!(c.model.gamma, 0.43);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        assert!(matches!(RunConfig::from_toml("[model]\nshear = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("seed = \"x\"\n"), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        c.model.gamma = 1.5;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = RunConfig::default();
        c.action.source = PathSource::File;
        assert!(c.validate().is_err());
    }

    #[test]
    fn linspace_edges() {
        assert!(linspace(0.0, 1.0, 0).is_empty());
        assert_eq!(linspace(0.3, 1.0, 1), vec![0.3]);
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
