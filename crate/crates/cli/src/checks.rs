//! Reduced oracle suite behind `exbctl validate`.

use std::f64::consts::TAU;
use std::fmt;

use exb_barrier::config::RunConfig;
use exb_barrier::control::{bessel_j, norm_bound_threshold, BarrierControl};
use exb_barrier::diagnostics::{cube_average, mean_square_potential, AverageKind};
use exb_barrier::dynamics::{barrier_invariance_check, BarrierCheckOptions};
use exb_barrier::{ControlConfig, ControlMode, ControlledField, DriftField, PotentialSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
    pub note: String,
}

impl Check {
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Self {
        let outcome = if measured <= tolerance {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        Self {
            name,
            measured,
            tolerance,
            outcome,
            note: String::new(),
        }
    }

    fn skipped(name: &'static str, tolerance: f64, note: String) -> Self {
        Self {
            name,
            measured: f64::NAN,
            tolerance,
            outcome: Outcome::Skipped,
            note,
        }
    }

    fn with_note(mut self, note: String) -> Self {
        self.note = note;
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIP",
        };
        write!(
            f,
            "{tag} {:<44} measured {:>11.3e}  tolerance {:>9.1e}",
            self.name, self.measured, self.tolerance
        )?;
        if !self.note.is_empty() {
            write!(f, "  ({})", self.note)?;
        }
        Ok(())
    }
}

const PROBES: [(f64, f64, f64); 5] = [
    (0.3, 1.1, 0.7),
    (2.0, 4.2, 2.9),
    (-1.7, 0.4, 5.5),
    (5.9, 3.3, 1.6),
    (-3.6, 5.1, 3.9),
];

// Composite Simpson rule of ∂_y V(x₀, y, s) over [0, t].
fn f_prime_quadrature(spec: &PotentialSpec, x0: f64, y: f64, t: f64, panels: usize) -> f64 {
    let g = |s: f64| spec.field_sample(x0, y, s).grad_y;
    let h = t / panels as f64;
    let mut acc = g(0.0) + g(t);
    for i in 1..panels {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    acc * h / 3.0
}

fn f_prime_check(control: &BarrierControl) -> Check {
    let worst = PROBES
        .iter()
        .map(|&(_, y, t)| (control.f_prime(y, t) - f_prime_quadrature(control.spec(), control.x0(), y, t, 4000)).abs())
        .fold(0.0, f64::max);
    Check::at_most("shift derivative vs time quadrature", worst, 1e-10)
}

fn bessel_check() -> Result<Check> {
    // Trapezoid rule on the periodic integral representation.
    let integral = |k: i64, z: f64| {
        let m = 256;
        (0..m)
            .map(|i| {
                let tau = TAU * i as f64 / m as f64;
                (k as f64 * tau - z * tau.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    };
    let mut worst = 0.0f64;
    for k in -6..=12 {
        for z in [0.0, 0.05, 0.7, 3.3, 11.0, 24.0] {
            worst = worst.max((bessel_j(k, z)? - integral(k, z)).abs());
        }
    }
    Ok(Check::at_most("Bessel J_k vs integral quadrature", worst, 1e-12))
}

fn harmonics_check(control: &BarrierControl) -> Check {
    let points = 1024;
    let mut worst = 0.0f64;
    for &(x, y, _) in &PROBES {
        let mut projected = [0.0; 5];
        for i in 0..points {
            let t = TAU * i as f64 / points as f64;
            let v = control.exact_controlled_potential(x, y, t);
            let basis = [0.5, t.cos(), t.sin(), (2.0 * t).cos(), (2.0 * t).sin()];
            for (p, b) in projected.iter_mut().zip(basis) {
                *p += 2.0 * v * b / points as f64;
            }
        }
        for (a, p) in control.harmonic_coefficients(x, y).iter().zip(projected) {
            worst = worst.max((a - p).abs());
        }
    }
    Check::at_most("truncated harmonics vs time projection", worst, 1e-8)
}

// Fourth-order central difference.
fn central<F: Fn(f64) -> f64>(f: F, at: f64, h: f64) -> f64 {
    (f(at - 2.0 * h) - 8.0 * f(at - h) + 8.0 * f(at + h) - f(at + 2.0 * h)) / (12.0 * h)
}

fn gradient_check(spec: &PotentialSpec, cfg: &RunConfig) -> Result<Check> {
    let h = 1e-4;
    let mut worst = 0.0f64;
    for mode in [ControlMode::None, ControlMode::Exact, ControlMode::Truncated] {
        let field = ControlledField::new(spec, ControlConfig { mode, ..cfg.control })?;
        for &(x, y, t) in &PROBES {
            let s = field.sample(x, y, t);
            let dx = central(|u| field.value(u, y, t), x, h);
            let dy = central(|u| field.value(x, u, t), y, h);
            let dt = central(|u| field.value(x, y, u), t, h);
            worst = worst
                .max((s.grad_x - dx).abs())
                .max((s.grad_y - dy).abs())
                .max((s.dt_value - dt).abs());
        }
    }
    Ok(Check::at_most("analytic gradients vs central differences", worst, 1e-8))
}

fn barrier_check(spec: &PotentialSpec, cfg: &RunConfig) -> Result<Check> {
    let t_final = 20.0;
    let ys: Vec<f64> = (0..4).map(|i| 0.3 + TAU * i as f64 / 4.0).collect();
    let opts = BarrierCheckOptions {
        control_scale: cfg.control.scale,
        ..BarrierCheckOptions::default()
    };
    let rep = barrier_invariance_check(spec, cfg.control.x0, &ys, t_final, &opts)?;
    Ok(
        Check::at_most("barrier invariance over T = 20", rep.max_deviation, 1e-6)
            .with_note(format!("control scale {}", cfg.control.scale)),
    )
}

fn norm_bound_checks(spec: &PotentialSpec, cfg: &RunConfig) -> Result<Vec<Check>> {
    let n = spec.n_modes();
    let threshold = norm_bound_threshold(n);
    let res = 32;
    let mut out = Vec::new();
    let eps = spec.epsilon();
    if eps > threshold {
        out.push(Check::skipped(
            "norm bound at configured amplitude",
            1.0,
            format!("epsilon {eps} above threshold {threshold:.6e}"),
        ));
    } else {
        let rep = BarrierControl::new(spec, cfg.control.x0).verify_norm_bound(res)?;
        out.push(
            Check::at_most("norm bound at configured amplitude", rep.sup_f / rep.bound, 1.0)
                .with_note("sup|F| / bound".into()),
        );
    }
    let at = spec.with_epsilon(threshold)?;
    let rep = BarrierControl::new(&at, cfg.control.x0).verify_norm_bound(res)?;
    out.push(
        Check::at_most("norm bound at threshold amplitude", rep.sup_f / rep.bound, 1.0)
            .with_note("sup|F| / bound".into()),
    );

    let sups: Vec<f64> = [0.01, 0.02, 0.04]
        .iter()
        .map(|&e| BarrierControl::new(&spec.with_epsilon(e)?, cfg.control.x0).control_term_sup(24))
        .collect::<Result<_>>()?;
    let slope = (sups[2] / sups[0]).ln() / 4f64.ln();
    out.push(Check::at_most(
        "sup|F| log-log slope, |slope - 2|",
        (slope - 2.0).abs(),
        0.1,
    ));
    Ok(out)
}

fn mean_square_checks(spec: &PotentialSpec) -> Result<Vec<Check>> {
    let res = 64;
    let n = spec.n_modes();
    let eps = spec.epsilon().max(0.1);
    let exact = mean_square_potential(eps, n);
    let a = spec.with_epsilon(eps)?;
    let b = PotentialSpec::new(n, eps, spec.rng_seed().wrapping_add(1))?;
    let va = cube_average(|x, y, t| a.potential_value(x, y, t), res, AverageKind::Squared)?;
    let vb = cube_average(|x, y, t| b.potential_value(x, y, t), res, AverageKind::Squared)?;
    Ok(vec![
        Check::at_most("<|V|^2> vs orthogonality closed form", (va / exact - 1.0).abs(), 1e-6),
        Check::at_most("<|V|^2> seed independence", (va / vb - 1.0).abs(), 1e-10),
    ])
}

/// Runs every check at the configured amplitude and seed.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<Check>> {
    let spec = cfg.potential.build()?;
    let control = BarrierControl::new(&spec, cfg.control.x0);
    let mut checks = vec![
        f_prime_check(&control),
        bessel_check()?,
        harmonics_check(&control),
        gradient_check(&spec, cfg)?,
        barrier_check(&spec, cfg)?,
    ];
    checks.extend(norm_bound_checks(&spec, cfg)?);
    checks.extend(mean_square_checks(&spec)?);
    Ok(checks)
}
