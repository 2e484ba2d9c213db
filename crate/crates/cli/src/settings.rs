use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use exb_barrier::config::RunConfig;
use exb_barrier::ControlMode;

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub x0: Option<f64>,
    pub mode: Option<ControlMode>,
    pub output_dir: Option<PathBuf>,
    pub control_scale: Option<f64>,
    pub n_traj: Option<usize>,
    pub t_final: Option<f64>,
    pub no_plots: bool,
}

/// Reads the TOML file (if any), applies flag overrides and validates.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg: RunConfig = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = ov.seed {
        cfg.potential.seed = s;
        cfg.ensemble.seed = s;
    }
    if let Some(e) = ov.epsilon {
        cfg.potential.epsilon = e;
    }
    if let Some(x0) = ov.x0 {
        cfg.control.x0 = x0;
    }
    if let Some(m) = ov.mode {
        cfg.control.mode = m;
    }
    if let Some(d) = &ov.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = ov.control_scale {
        cfg.control.scale = s;
    }
    if let Some(n) = ov.n_traj {
        cfg.ensemble.n_traj = n;
    }
    if let Some(t) = ov.t_final {
        cfg.ensemble.t_final = t;
    }
    if ov.no_plots {
        cfg.plots = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The configuration as TOML, used for echoes in every output.
pub fn echo(cfg: &RunConfig) -> String {
    toml::to_string(cfg).unwrap_or_else(|e| format!("unserializable config: {e}"))
}
