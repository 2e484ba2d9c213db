//! Guiding-centre trajectories: adaptive integration of
//! `ẋ = −∂_y V`, `ẏ = ∂_x V` (and optionally `Ė = −∂_t V`), stroboscopic
//! sampling at `t ∈ 2πℤ`, escape detection and ensembles.
//!
//! `x` is never wrapped; `y` is wrapped only when plotting.

mod barrier;
mod dop853;
mod ensemble;

pub use barrier::{barrier_invariance_check, BarrierCheckOptions, BarrierCheckReport};
pub use ensemble::{
    initial_conditions, run_ensemble, run_ensemble_with, write_poincare_csv, EnsembleConfig, EnsembleReport,
    InitLayout, Strip,
};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::field::DriftField;
use crate::{Error, Result};

use dop853::{trial_step, Controller};

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-6;

/// Starting point in extended phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub x: f64,
    pub y: f64,
    pub tau0: f64,
}

impl InitialCondition {
    pub fn new(x: f64, y: f64, tau0: f64) -> Self {
        Self { x, y, tau0 }
    }
}

/// State at a stroboscopic time `t = 2πk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincarePoint {
    pub k: i64,
    pub x: f64,
    pub y: f64,
}

impl PoincarePoint {
    pub fn t(&self) -> f64 {
        self.k as f64 * TAU
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryStatus {
    Completed,
    Escaped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub initial: InitialCondition,
    pub poincare_points: Vec<PoincarePoint>,
    /// `E` at each stroboscopic sample, when tracked. Starts from `E = 0`.
    pub energy_track: Option<Vec<f64>>,
    /// Index into `poincare_points` of the first sample beyond a barrier.
    pub escaped_at: Option<usize>,
    pub status: TrajectoryStatus,
    /// Time reached (equals `tau0 + t_final` unless stopped early).
    pub t_end: f64,
    /// `(x, y, E)` at `t_end`.
    pub final_state: [f64; 3],
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Knobs for [`integrate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Local error per unit step, in `[1e-13, 1e-6]`.
    pub tol: f64,
    /// Include `E` in the state and in the error norm.
    pub track_energy: bool,
    /// Stop at the first stroboscopic sample outside `[x0 − 2π, x0]`.
    pub stop_at_escape: Option<f64>,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            track_energy: false,
            stop_at_escape: None,
            initial_step: 0.05,
            max_steps: 100_000_000,
        }
    }
}

/// Whether a stroboscopic `x` lies outside the strip bounded by the barrier
/// at `x0` and its periodic image at `x0 − 2π`.
#[inline]
pub fn is_beyond_barrier(x: f64, x0: f64) -> bool {
    x > x0 || x < x0 - TAU
}

/// First Poincaré index whose `x` has left `[x0 − 2π, x0]`.
pub fn detect_escape(record: &TrajectoryRecord, x0: f64) -> Option<usize> {
    record.poincare_points.iter().position(|p| is_beyond_barrier(p.x, x0))
}

/// Integrates one trajectory over `[tau0, tau0 + t_final]` with default options.
pub fn integrate<F: DriftField + ?Sized>(
    field: &F,
    ic: InitialCondition,
    t_final: f64,
    tol: f64,
) -> Result<TrajectoryRecord> {
    integrate_with(field, ic, t_final, &IntegrateOptions::new(tol), |_, _| {})
}

/// Integrates one trajectory, calling `observer(t, [x, y, E])` after every
/// accepted step.
///
/// Steps are shortened so that every `t = 2πk` in range is hit exactly;
/// the state there is appended to `poincare_points`. On step-size underflow
/// the partial record is returned inside [`Error::IntegrationFailure`].
pub fn integrate_with<F, O>(
    field: &F,
    ic: InitialCondition,
    t_final: f64,
    opts: &IntegrateOptions,
    mut observer: O,
) -> Result<TrajectoryRecord>
where
    F: DriftField + ?Sized,
    O: FnMut(f64, &[f64; 3]),
{
    if !(MIN_TOL..=MAX_TOL).contains(&opts.tol) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {} outside [{MIN_TOL:e}, {MAX_TOL:e}]",
            opts.tol
        )));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_final must be finite and ≥ 0, got {t_final}"
        )));
    }
    if !(ic.x.is_finite() && ic.y.is_finite() && ic.tau0.is_finite()) {
        return Err(Error::InvalidArgument("initial condition must be finite".into()));
    }

    let mut rhs = |t: f64, s: &[f64; 3]| -> [f64; 3] {
        let smp = field.sample(s[0], s[1], t);
        [-smp.grad_y, smp.grad_x, -smp.dt_value]
    };
    let active = if opts.track_energy { 3 } else { 2 };

    let t_start = ic.tau0;
    let t_end = ic.tau0 + t_final;
    let mut t = t_start;
    let mut state = [ic.x, ic.y, 0.0];

    let mut record = TrajectoryRecord {
        initial: ic,
        poincare_points: Vec::new(),
        energy_track: opts.track_energy.then(Vec::new),
        escaped_at: None,
        status: TrajectoryStatus::Completed,
        t_end,
        final_state: state,
        accepted_steps: 0,
        rejected_steps: 0,
    };

    let mut next_k = (t_start / TAU).ceil() as i64;
    let push_sample = |rec: &mut TrajectoryRecord, k: i64, s: &[f64; 3]| -> bool {
        rec.poincare_points.push(PoincarePoint { k, x: s[0], y: s[1] });
        if let Some(track) = rec.energy_track.as_mut() {
            track.push(s[2]);
        }
        if let Some(x0) = opts.stop_at_escape {
            if is_beyond_barrier(s[0], x0) {
                rec.escaped_at = Some(rec.poincare_points.len() - 1);
                return true;
            }
        }
        false
    };
    if next_k as f64 * TAU == t_start {
        if push_sample(&mut record, next_k, &state) {
            record.status = TrajectoryStatus::Escaped;
            record.t_end = t;
            return Ok(record);
        }
        next_k += 1;
    }

    let mut k1 = rhs(t, &state);
    let mut h_prop = opts.initial_step.min(t_end - t).max(0.0);
    let mut controller = Controller::new();

    while t < t_end {
        let sample_t = next_k as f64 * TAU;
        let target = sample_t.min(t_end);
        let remaining = target - t;
        let clamped = h_prop >= remaining - 1e-12 * remaining.max(1.0);
        let h = if clamped { remaining } else { h_prop };

        if h <= 1e-13 * t.abs().max(1.0) && !clamped {
            record.status = TrajectoryStatus::Failed;
            record.t_end = t;
            record.final_state = state;
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step size underflow (h = {h:e})"),
                partial: Some(Box::new(record)),
            });
        }
        if record.accepted_steps + record.rejected_steps >= opts.max_steps {
            record.status = TrajectoryStatus::Failed;
            record.t_end = t;
            record.final_state = state;
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
                partial: Some(Box::new(record)),
            });
        }

        let trial = trial_step(&mut rhs, t, &state, &k1, h, opts.tol, active);
        if !trial.err.is_finite() {
            controller.judge(f64::INFINITY, h);
            record.rejected_steps += 1;
            h_prop = h * 0.25;
            continue;
        }
        let (accepted, h_next) = controller.judge(trial.err, h);
        if !accepted {
            record.rejected_steps += 1;
            h_prop = h_next;
            continue;
        }
        record.accepted_steps += 1;
        state = trial.y;
        if clamped {
            t = target;
            h_prop = h_prop.max(h_next);
        } else {
            t += h;
            h_prop = h_next;
        }
        k1 = rhs(t, &state);
        observer(t, &state);

        if t == sample_t {
            let stop = push_sample(&mut record, next_k, &state);
            next_k += 1;
            if stop {
                record.status = TrajectoryStatus::Escaped;
                record.t_end = t;
                record.final_state = state;
                return Ok(record);
            }
        }
    }
    record.final_state = state;
    Ok(record)
}
