//! Run configuration.
//!
//! A [`RunConfig`] carries everything a run depends on; serializing it back
//! out (the "config echo") is enough to repeat the run.

use std::f64::consts::FRAC_PI_4;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::control::ControlConfig;
use crate::diagnostics::{DEFAULT_RESOLUTION, MIN_RESOLUTION};
use crate::dynamics::{EnsembleConfig, InitLayout, Strip, MAX_TOL, MIN_TOL};
use crate::field::{PotentialSpec, MAX_MODES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PotentialBlock {
    pub n_modes: usize,
    pub epsilon: f64,
    /// Phase seed.
    pub seed: u64,
}

impl Default for PotentialBlock {
    fn default() -> Self {
        Self {
            n_modes: 25,
            epsilon: 0.9,
            seed: 1,
        }
    }
}

impl PotentialBlock {
    pub fn build(&self) -> Result<PotentialSpec> {
        PotentialSpec::new(self.n_modes, self.epsilon, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleBlock {
    pub n_traj: usize,
    pub t_final: f64,
    pub tol: f64,
    /// Initial-condition seed.
    pub seed: u64,
    pub layout: InitLayout,
    pub strip: Strip,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        let e = EnsembleConfig::default();
        Self {
            n_traj: e.n_traj,
            t_final: e.t_final,
            tol: e.tol,
            seed: 1,
            layout: e.layout,
            strip: e.strip,
        }
    }
}

impl EnsembleBlock {
    pub fn to_config(&self, control: ControlConfig) -> EnsembleConfig {
        EnsembleConfig {
            n_traj: self.n_traj,
            t_final: self.t_final,
            strip: self.strip,
            control,
            tol: self.tol,
            seed: self.seed,
            layout: self.layout,
            stop_at_escape: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticsBlock {
    /// Lattice for the energy ratios.
    pub resolution: usize,
    pub eps_sweep: Vec<f64>,
    /// Phase seeds averaged over in the tables.
    pub seeds: Vec<u64>,
    /// Amplitudes at which escape fractions are measured for the tables.
    pub escape_eps: Vec<f64>,
    pub msd_window: [f64; 2],
    pub contour_t: f64,
    pub contour_nodes: usize,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            eps_sweep: vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.5],
            seeds: vec![1, 2, 3],
            escape_eps: vec![0.4, 0.5, 0.9, 1.5],
            msd_window: [200.0, 2000.0],
            contour_t: FRAC_PI_4,
            contour_nodes: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub potential: PotentialBlock,
    pub control: ControlConfig,
    pub ensemble: EnsembleBlock,
    pub diagnostics: DiagnosticsBlock,
    pub output_dir: PathBuf,
    /// Write PNG images next to the data files.
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: PotentialBlock::default(),
            control: ControlConfig::default(),
            ensemble: EnsembleBlock::default(),
            diagnostics: DiagnosticsBlock::default(),
            output_dir: PathBuf::from("out"),
            plots: true,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl RunConfig {
    /// Checks every block without running anything.
    pub fn validate(&self) -> Result<()> {
        let p = &self.potential;
        if p.n_modes == 0 || p.n_modes > MAX_MODES {
            return Err(invalid(format!(
                "n_modes must be in 1..={MAX_MODES}, got {}",
                p.n_modes
            )));
        }
        if !(p.epsilon.is_finite() && p.epsilon >= 0.0) {
            return Err(invalid(format!("epsilon must be finite and ≥ 0, got {}", p.epsilon)));
        }
        self.control.validate()?;
        let e = &self.ensemble;
        if e.n_traj == 0 {
            return Err(invalid("ensemble.n_traj must be positive".into()));
        }
        if !(e.t_final.is_finite() && e.t_final >= 0.0) {
            return Err(invalid(format!(
                "ensemble.t_final must be finite and ≥ 0, got {}",
                e.t_final
            )));
        }
        if !(MIN_TOL..=MAX_TOL).contains(&e.tol) {
            return Err(invalid(format!(
                "ensemble.tol must be in [{MIN_TOL:e}, {MAX_TOL:e}], got {}",
                e.tol
            )));
        }
        let s = e.strip;
        if !(s.x_min < s.x_max && s.y_min < s.y_max) {
            return Err(invalid("ensemble.strip is empty".into()));
        }
        let d = &self.diagnostics;
        if d.resolution < MIN_RESOLUTION {
            return Err(invalid(format!(
                "diagnostics.resolution must be at least {MIN_RESOLUTION}, got {}",
                d.resolution
            )));
        }
        if d.eps_sweep
            .iter()
            .chain(&d.escape_eps)
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return Err(invalid("amplitude lists must hold finite values ≥ 0".into()));
        }
        if d.seeds.is_empty() {
            return Err(invalid("diagnostics.seeds must not be empty".into()));
        }
        let [lo, hi] = d.msd_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(invalid(format!(
                "diagnostics.msd_window [{lo}, {hi}] is not increasing"
            )));
        }
        if d.contour_nodes < 2 {
            return Err(invalid("diagnostics.contour_nodes must be at least 2".into()));
        }
        Ok(())
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        self.ensemble.to_config(self.control)
    }
}
