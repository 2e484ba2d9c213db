use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, ControlledField};
use crate::field::{DriftField, PotentialSpec};
use crate::{par, Error, Result};

use super::{detect_escape, integrate_with, InitialCondition, IntegrateOptions, TrajectoryRecord};

/// Rectangle of initial positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Strip {
    fn default() -> Self {
        Self {
            x_min: -1.0 - PI,
            x_max: -PI,
            y_min: 0.0,
            y_max: TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitLayout {
    /// Seeded uniform draws.
    #[default]
    Random,
    /// Cell centres of a near-square grid covering the strip.
    Grid,
}

fn default_n_traj() -> usize {
    200
}
fn default_t_final() -> f64 {
    2000.0
}
fn default_tol() -> f64 {
    1e-9
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub strip: Strip,
    pub control: ControlConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Seed for the initial conditions (independent of the phase seed).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub layout: InitLayout,
    /// Drop everything after the first sample beyond a barrier.
    #[serde(default = "default_true")]
    pub stop_at_escape: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_traj: default_n_traj(),
            t_final: default_t_final(),
            strip: Strip::default(),
            control: ControlConfig::default(),
            tol: default_tol(),
            seed: 0,
            layout: InitLayout::Random,
            stop_at_escape: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: EnsembleConfig,
    pub epsilon: f64,
    pub potential_seed: u64,
    pub n_traj: usize,
    pub n_escaped: usize,
    /// Trajectories whose integration failed; excluded from the fraction.
    pub n_failed: usize,
    /// `n_escaped / (n_traj − n_failed)`.
    pub escape_fraction: f64,
    /// Stroboscopic time of the first sample beyond a barrier.
    pub first_crossing_times: Vec<Option<f64>>,
    pub wall_time_s: f64,
    pub parallel: bool,
    #[serde(skip)]
    pub trajectories: Vec<TrajectoryRecord>,
}

/// Deterministic initial conditions for a configuration.
pub fn initial_conditions(cfg: &EnsembleConfig) -> Vec<InitialCondition> {
    let s = cfg.strip;
    match cfg.layout {
        InitLayout::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.n_traj)
                .map(|_| {
                    let x = s.x_min + (s.x_max - s.x_min) * rng.gen::<f64>();
                    let y = s.y_min + (s.y_max - s.y_min) * rng.gen::<f64>();
                    InitialCondition::new(x, y, 0.0)
                })
                .collect()
        }
        InitLayout::Grid => {
            let (lx, ly) = (s.x_max - s.x_min, s.y_max - s.y_min);
            let n = cfg.n_traj.max(1);
            let ny = ((n as f64 * ly / lx).sqrt().ceil() as usize).max(1);
            let nx = n.div_ceil(ny);
            (0..cfg.n_traj)
                .map(|i| {
                    let (ix, iy) = (i % nx, i / nx);
                    let x = s.x_min + lx * (ix as f64 + 0.5) / nx as f64;
                    let y = s.y_min + ly * (iy as f64 + 0.5) / ny as f64;
                    InitialCondition::new(x, y, 0.0)
                })
                .collect()
        }
    }
}

/// Builds the controlled field for `cfg.control` and runs the ensemble.
pub fn run_ensemble(spec: &PotentialSpec, cfg: &EnsembleConfig) -> Result<EnsembleReport> {
    let field = ControlledField::new(spec, cfg.control)?;
    run_ensemble_with(&field, spec, cfg)
}

/// Runs the ensemble on an arbitrary field; `spec` is only echoed.
pub fn run_ensemble_with<F: DriftField>(
    field: &F,
    spec: &PotentialSpec,
    cfg: &EnsembleConfig,
) -> Result<EnsembleReport> {
    if cfg.n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be positive".into()));
    }
    let started = Instant::now();
    let x0 = cfg.control.x0;
    let ics = initial_conditions(cfg);
    let mut opts = IntegrateOptions::new(cfg.tol);
    opts.stop_at_escape = cfg.stop_at_escape.then_some(x0);

    let outcomes = par::map_slice(&ics, |ic| integrate_with(field, *ic, cfg.t_final, &opts, |_, _| {}));

    let mut trajectories = Vec::with_capacity(outcomes.len());
    let mut n_failed = 0;
    for outcome in outcomes {
        match outcome {
            Ok(rec) => trajectories.push(rec),
            Err(Error::IntegrationFailure {
                partial: Some(rec),
                t,
                reason,
            }) => {
                log::warn!(
                    "trajectory from ({}, {}) failed at t = {t}: {reason}",
                    rec.initial.x,
                    rec.initial.y
                );
                n_failed += 1;
                trajectories.push(*rec);
            }
            Err(e) => return Err(e),
        }
    }

    let first_crossing_times: Vec<Option<f64>> = trajectories
        .iter()
        .map(|rec| {
            if rec.status == super::TrajectoryStatus::Failed {
                return None;
            }
            detect_escape(rec, x0).map(|i| rec.poincare_points[i].t())
        })
        .collect();
    let n_escaped = first_crossing_times.iter().filter(|t| t.is_some()).count();
    let counted = cfg.n_traj - n_failed;
    if n_failed > 0 {
        log::warn!("{n_failed} of {} trajectories failed and were excluded", cfg.n_traj);
    }
    let escape_fraction = if counted > 0 {
        n_escaped as f64 / counted as f64
    } else {
        0.0
    };

    Ok(EnsembleReport {
        config: *cfg,
        epsilon: spec.epsilon(),
        potential_seed: spec.rng_seed(),
        n_traj: cfg.n_traj,
        n_escaped,
        n_failed,
        escape_fraction,
        first_crossing_times,
        wall_time_s: started.elapsed().as_secs_f64(),
        parallel: par::is_parallel(),
        trajectories,
    })
}

/// Writes Poincaré clouds as CSV (`traj_id,k,x,y`), preceded by `#` comment
/// lines carrying `header`.
pub fn write_poincare_csv<W: Write>(mut w: W, trajectories: &[TrajectoryRecord], header: &str) -> Result<()> {
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "traj_id,k,x,y")?;
    for (id, rec) in trajectories.iter().enumerate() {
        for p in &rec.poincare_points {
            writeln!(w, "{id},{},{},{}", p.k, p.x, p.y)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlMode;

    #[test]
    fn random_initial_conditions_are_seeded_and_inside_strip() {
        let cfg = EnsembleConfig {
            seed: 5,
            ..Default::default()
        };
        let a = initial_conditions(&cfg);
        assert_eq!(a, initial_conditions(&cfg));
        assert_eq!(a.len(), 200);
        let s = Strip::default();
        assert!(a
            .iter()
            .all(|ic| (s.x_min..=s.x_max).contains(&ic.x) && (s.y_min..s.y_max).contains(&ic.y)));
        let b = initial_conditions(&EnsembleConfig { seed: 6, ..cfg });
        assert_ne!(a, b);
    }

    #[test]
    fn grid_layout_covers_strip() {
        let cfg = EnsembleConfig {
            layout: InitLayout::Grid,
            n_traj: 50,
            ..Default::default()
        };
        let ics = initial_conditions(&cfg);
        assert_eq!(ics.len(), 50);
        let s = Strip::default();
        assert!(ics
            .iter()
            .all(|ic| ic.x > s.x_min && ic.x < s.x_max && ic.y > 0.0 && ic.y < TAU));
    }

    #[test]
    fn stationary_ensemble_never_escapes() {
        let spec = PotentialSpec::new(25, 0.0, 3).unwrap();
        let cfg = EnsembleConfig {
            n_traj: 8,
            t_final: 100.0,
            control: ControlConfig::new(2.0, ControlMode::Exact),
            ..Default::default()
        };
        let rep = run_ensemble(&spec, &cfg).unwrap();
        assert_eq!(rep.n_escaped, 0);
        assert_eq!(rep.escape_fraction, 0.0);
        assert!(rep.first_crossing_times.iter().all(Option::is_none));
    }

    #[test]
    fn report_is_deterministic_and_serializable() {
        let spec = PotentialSpec::new(10, 0.9, 3).unwrap();
        let cfg = EnsembleConfig {
            n_traj: 6,
            t_final: 60.0,
            seed: 2,
            ..Default::default()
        };
        let a = run_ensemble(&spec, &cfg).unwrap();
        let b = run_ensemble(&spec, &cfg).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.first_crossing_times, b.first_crossing_times);
        let json = serde_json::to_value(&a).unwrap();
        assert_eq!(json["n_traj"], 6);
        assert!(json.get("trajectories").is_none());
    }

    #[test]
    fn escaped_records_are_truncated() {
        let spec = PotentialSpec::new(25, 1.5, 1).unwrap();
        let cfg = EnsembleConfig {
            n_traj: 12,
            t_final: 400.0,
            seed: 1,
            ..Default::default()
        };
        let rep = run_ensemble(&spec, &cfg).unwrap();
        for rec in &rep.trajectories {
            if let Some(i) = rec.escaped_at {
                assert_eq!(i + 1, rec.poincare_points.len());
                assert_eq!(detect_escape(rec, 2.0), Some(i));
            }
        }
    }

    #[test]
    fn csv_layout() {
        let spec = PotentialSpec::new(3, 0.1, 3).unwrap();
        let cfg = EnsembleConfig {
            n_traj: 2,
            t_final: 13.0,
            ..Default::default()
        };
        let rep = run_ensemble(&spec, &cfg).unwrap();
        let mut buf = Vec::new();
        write_poincare_csv(&mut buf, &rep.trajectories, "seed=0\nmode=none").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# seed=0");
        assert_eq!(lines[2], "traj_id,k,x,y");
        assert_eq!(lines.len(), 3 + 2 * 3);
        assert!(lines[3].starts_with("0,0,"));
    }
}
