//! Acceptance criteria 1–8. Each test prints one `PASS`/`FAIL` line per
//! criterion (plus detail lines) on stderr and then asserts.
//!
//! The full set takes about an hour on one core, so every test is ignored by
//! default:
//!
//! ```text
//! cargo test --release -p exb-barrier --test acceptance -- --ignored --test-threads 1
//! ```

use std::f64::consts::TAU;
use std::io::Write;
use std::path::PathBuf;

use exb_barrier::control::{bessel_j, norm_bound, norm_bound_threshold, BarrierControl};
use exb_barrier::diagnostics::{
    contour_export, cube_average, energy_report, mean_square_potential, msd_diffusion, AverageKind, EnergyReport,
    GridWindow,
};
use exb_barrier::dynamics::{
    barrier_invariance_check, run_ensemble, BarrierCheckOptions, EnsembleConfig, EnsembleReport,
};
use exb_barrier::plot::{write_contours, write_scatter, ScatterPanel, View};
use exb_barrier::{ControlConfig, ControlMode, ControlledField, DriftField, PotentialSpec};

const N: usize = 25;
const X0: f64 = 2.0;
const T_FINAL: f64 = 2000.0;
const N_TRAJ: usize = 200;
const SEEDS: [u64; 3] = [1, 2, 3];

// Written straight to the stderr handle so libtest capture does not hide it.
fn say(line: &str) {
    let mut e = std::io::stderr();
    writeln!(e, "{line}").unwrap();
}

fn verdict(criterion: u32, pass: bool, summary: &str) {
    say(&format!(
        "{} criterion {criterion}: {summary}",
        if pass { "PASS" } else { "FAIL" }
    ));
}

fn ensemble(eps: f64, seed: u64, mode: ControlMode, stop_at_escape: bool, n_traj: usize) -> EnsembleReport {
    let spec = PotentialSpec::new(N, eps, seed).unwrap();
    let cfg = EnsembleConfig {
        n_traj,
        t_final: T_FINAL,
        control: ControlConfig::new(X0, mode),
        seed,
        stop_at_escape,
        ..EnsembleConfig::default()
    };
    let rep = run_ensemble(&spec, &cfg).unwrap();
    say(&format!(
        "  epsilon {eps} seed {seed} {mode}: {:.1}% escaped ({} of {}, {} failed) in {:.0} s",
        100.0 * rep.escape_fraction,
        rep.n_escaped,
        rep.n_traj,
        rep.n_failed,
        rep.wall_time_s
    ));
    rep
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_1_exact_control_blocks_escape() {
    let exact = 100.0 * ensemble(0.9, 1, ControlMode::Exact, true, N_TRAJ).escape_fraction;
    let without = 100.0 * ensemble(0.9, 1, ControlMode::None, true, N_TRAJ).escape_fraction;
    let exact_ok = exact <= 2.0;
    let without_ok = (without - 68.0).abs() <= 10.0;
    verdict(
        1,
        exact_ok && without_ok,
        &format!("exact {exact:.1}% (<= 2%), uncontrolled {without:.1}% (68 +/- 10%)"),
    );
    assert!(exact_ok, "exact-control escape {exact}%");
    assert!(without_ok, "uncontrolled escape {without}%");
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_2_truncated_control_escape_fractions() {
    let targets = [(0.4, 6.0), (0.5, 18.0), (0.9, 44.0), (1.5, 54.0)];
    let mut misses = Vec::new();
    let mut parts = Vec::new();
    for (eps, target) in targets {
        let mean = SEEDS
            .iter()
            .map(|&s| 100.0 * ensemble(eps, s, ControlMode::Truncated, true, N_TRAJ).escape_fraction)
            .sum::<f64>()
            / SEEDS.len() as f64;
        parts.push(format!("eps {eps}: {mean:.1}% vs {target}%"));
        if (mean - target).abs() > 10.0 {
            misses.push(eps);
        }
    }
    verdict(2, misses.is_empty(), &format!("{} (+/- 10 points)", parts.join(", ")));
    assert!(misses.is_empty(), "outside tolerance at epsilon {misses:?}");
}

// Printed values: epsilon, zeta_ex, zeta_tr, eta_ex, eta_tr.
const ENERGY_TABLE: [[f64; 5]; 8] = [
    [0.3, 0.1105, 0.1193, 0.6297, 0.1431],
    [0.4, 0.1466, 0.1583, 0.7145, 0.2393],
    [0.5, 0.1822, 0.1967, 0.8161, 0.3550],
    [0.6, 0.2345, 0.2137, 0.9336, 0.4883],
    [0.7, 0.2518, 0.2716, 1.0657, 0.6375],
    [0.8, 0.2858, 0.3038, 1.2119, 0.8014],
    [0.9, 0.3191, 0.3439, 1.3722, 0.9796],
    [1.5, 0.5052, 0.5427, 2.6247, 2.3037],
];

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_3_energy_ratios() {
    let resolution = 128;
    let names = ["zeta_ex", "zeta_tr", "eta_ex", "eta_tr"];
    let mut worst = 0.0f64;
    let mut misses = 0;
    let mut order_violations = Vec::new();
    for row in ENERGY_TABLE {
        let eps = row[0];
        let reports: Vec<EnergyReport> = SEEDS
            .iter()
            .map(|&s| energy_report(&PotentialSpec::new(N, eps, s).unwrap(), X0, resolution).unwrap())
            .collect();
        for r in &reports {
            if eps <= 0.9 && r.eta_tr >= r.eta_ex {
                order_violations.push((eps, r.seed));
            }
        }
        let k = reports.len() as f64;
        let mean = [
            reports.iter().map(|r| r.zeta_ex).sum::<f64>() / k,
            reports.iter().map(|r| r.zeta_tr).sum::<f64>() / k,
            reports.iter().map(|r| r.eta_ex).sum::<f64>() / k,
            reports.iter().map(|r| r.eta_tr).sum::<f64>() / k,
        ];
        let mut cells = Vec::new();
        for (c, (m, target)) in mean.iter().zip(&row[1..]).enumerate() {
            let rel = (m - target).abs() / target;
            worst = worst.max(rel);
            if rel > 0.15 {
                misses += 1;
            }
            cells.push(format!(
                "{} {m:.4} ({target}, {:+.0}%)",
                names[c],
                100.0 * (m / target - 1.0)
            ));
        }
        say(&format!("  eps {eps}: {}", cells.join(", ")));
    }
    let pass = misses == 0 && order_violations.is_empty();
    verdict(
        3,
        pass,
        &format!(
            "{misses} of 32 cells outside 15% (worst {:.0}%), eta_tr < eta_ex violated for {:?}",
            100.0 * worst,
            order_violations
        ),
    );
    assert!(order_violations.is_empty());
    assert_eq!(misses, 0, "worst relative deviation {worst}");
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_4_norm_bound() {
    let eps = norm_bound_threshold(N);
    assert!((eps - 0.007_909_758_232).abs() < 1e-12);
    let bound = norm_bound(eps, N);
    let mut pass = true;
    let mut sups = Vec::new();
    for seed in SEEDS {
        let rep = BarrierControl::new(&PotentialSpec::new(N, eps, seed).unwrap(), X0)
            .verify_norm_bound(64)
            .unwrap();
        pass &= rep.holds && rep.sup_f <= bound;
        sups.push(format!("{:.3e}", rep.sup_f));
    }
    verdict(
        4,
        pass,
        &format!("sup|F| on 64^3 = [{}] <= {bound:.3e}", sups.join(", ")),
    );
    assert!(pass);
}

struct SubCheck {
    name: &'static str,
    measured: f64,
    tolerance: f64,
}

impl SubCheck {
    fn ok(&self) -> bool {
        self.measured <= self.tolerance
    }
}

fn f_prime_error(control: &BarrierControl) -> f64 {
    let spec = control.spec();
    let mut worst = 0.0f64;
    for (y, t) in [(0.4, 1.3), (2.2, 4.4), (5.1, 6.0), (3.7, 0.2), (1.0, 17.5)] {
        let panels = 8000;
        let h = t / panels as f64;
        let g = |s: f64| spec.field_sample(X0, y, s).grad_y;
        let mut acc = g(0.0) + g(t);
        for i in 1..panels {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        worst = worst.max((control.f_prime(y, t) - acc * h / 3.0).abs());
    }
    worst
}

fn bessel_error() -> f64 {
    let mut worst = 0.0f64;
    for k in -10..=10 {
        for z in [0.0, 0.01, 0.5, 1.7, 4.0, 9.5, 20.0, 37.0] {
            let m = 512;
            let q = (0..m)
                .map(|i| {
                    let tau = TAU * i as f64 / m as f64;
                    (k as f64 * tau - z * tau.sin()).cos()
                })
                .sum::<f64>()
                / m as f64;
            worst = worst.max((bessel_j(k, z).unwrap() - q).abs());
        }
    }
    worst
}

fn harmonic_error(control: &BarrierControl) -> f64 {
    let mut worst = 0.0f64;
    let points = 2048;
    for (x, y) in [(0.3, 0.9), (2.0, 4.0), (-2.5, 5.5), (4.4, 2.1)] {
        let mut p = [0.0; 5];
        for i in 0..points {
            let t = TAU * i as f64 / points as f64;
            let v = control.exact_controlled_potential(x, y, t);
            for (slot, b) in p
                .iter_mut()
                .zip([0.5, t.cos(), t.sin(), (2.0 * t).cos(), (2.0 * t).sin()])
            {
                *slot += 2.0 * v * b / points as f64;
            }
        }
        for (a, q) in control.harmonic_coefficients(x, y).iter().zip(p) {
            worst = worst.max((a - q).abs());
        }
    }
    worst
}

fn gradient_error(spec: &PotentialSpec) -> f64 {
    let h = 1e-4;
    let d = |f: &dyn Fn(f64) -> f64, a: f64| {
        (f(a - 2.0 * h) - 8.0 * f(a - h) + 8.0 * f(a + h) - f(a + 2.0 * h)) / (12.0 * h)
    };
    let mut worst = 0.0f64;
    for mode in [ControlMode::None, ControlMode::Exact, ControlMode::Truncated] {
        let field = ControlledField::new(spec, ControlConfig::new(X0, mode)).unwrap();
        for (x, y, t) in [(0.2, 0.7, 0.3), (1.9, 3.3, 2.8), (-3.0, 5.9, 5.0), (5.5, 1.4, 11.0)] {
            let s = field.sample(x, y, t);
            worst = worst
                .max((s.grad_x - d(&|u| field.value(u, y, t), x)).abs())
                .max((s.grad_y - d(&|u| field.value(x, u, t), y)).abs())
                .max((s.dt_value - d(&|u| field.value(x, y, u), t)).abs());
        }
    }
    worst
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_5_oracle_suite() {
    let spec = PotentialSpec::new(N, 0.9, 1).unwrap();
    let control = BarrierControl::new(&spec, X0);
    let ys: Vec<f64> = (0..8).map(|i| TAU * (i as f64 + 0.25) / 8.0).collect();
    let barrier = barrier_invariance_check(&spec, X0, &ys, T_FINAL, &BarrierCheckOptions::default()).unwrap();
    let sups: Vec<f64> = [0.01, 0.02, 0.04]
        .iter()
        .map(|&e| {
            BarrierControl::new(&spec.with_epsilon(e).unwrap(), X0)
                .control_term_sup(32)
                .unwrap()
        })
        .collect();
    let slope = (sups[2] / sups[0]).ln() / 4f64.ln();
    let checks = [
        SubCheck {
            name: "shift derivative vs time quadrature",
            measured: f_prime_error(&control),
            tolerance: 1e-10,
        },
        SubCheck {
            name: "Bessel vs integral quadrature",
            measured: bessel_error(),
            tolerance: 1e-12,
        },
        SubCheck {
            name: "truncated coefficients vs projection",
            measured: harmonic_error(&control),
            tolerance: 1e-8,
        },
        SubCheck {
            name: "gradients vs central differences",
            measured: gradient_error(&spec),
            tolerance: 1e-8,
        },
        SubCheck {
            name: "barrier deviation over T = 2000",
            measured: barrier.max_deviation,
            tolerance: 1e-6,
        },
        SubCheck {
            name: "|slope - 2| of sup|F| in epsilon",
            measured: (slope - 2.0).abs(),
            tolerance: 0.1,
        },
    ];
    for c in &checks {
        say(&format!(
            "  {} {}: {:.3e} (<= {:.0e})",
            if c.ok() { "ok  " } else { "MISS" },
            c.name,
            c.measured,
            c.tolerance
        ));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.ok()).map(|c| c.name).collect();
    verdict(
        5,
        failed.is_empty(),
        &format!(
            "{} of {} sub-checks pass; failing: {failed:?}",
            checks.len() - failed.len(),
            checks.len()
        ),
    );
    assert!(failed.is_empty(), "{failed:?}");
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_6_mean_square_quadrature() {
    let res = 64;
    let eps = 0.6;
    let exact = mean_square_potential(eps, N);
    let values: Vec<f64> = SEEDS
        .iter()
        .map(|&s| {
            let spec = PotentialSpec::new(N, eps, s).unwrap();
            cube_average(|x, y, t| spec.potential_value(x, y, t), res, AverageKind::Squared).unwrap()
        })
        .collect();
    let rel = values.iter().map(|v| (v / exact - 1.0).abs()).fold(0.0, f64::max);
    let spread = values.iter().map(|v| (v / values[0] - 1.0).abs()).fold(0.0, f64::max);
    let pass = rel <= 1e-6 && spread <= 1e-10;
    verdict(
        6,
        pass,
        &format!("closed-form error {rel:.2e} (<= 1e-6), seed spread {spread:.2e} (<= 1e-10)"),
    );
    assert!(pass);
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_7_kubo_scaling() {
    let window = (200.0, T_FINAL);
    let d = |eps: f64| {
        let rep = ensemble(eps, 1, ControlMode::None, false, N_TRAJ);
        let msd = msd_diffusion(&rep.trajectories, window, eps).unwrap();
        say(&format!(
            "  eps {eps}: D = {:.4e}, MSD exponent {:.2} ({:?})",
            msd.diffusion, msd.exponent, msd.fit_quality
        ));
        msd
    };
    let (lo, hi) = (d(0.3), d(0.6));
    let ratio = hi.diffusion / lo.diffusion;
    // Doubling K gives ratio 4 under K² scaling and 2 under K scaling.
    let exponent = ratio.log2();
    let pass = ratio > 0.0 && (exponent - 2.0).abs() < (exponent - 1.0).abs();
    verdict(
        7,
        pass,
        &format!(
            "D(0.6)/D(0.3) = {ratio:.2}, scaling exponent {exponent:.2} (closer to 2 than 1), fits {:?}/{:?}",
            lo.fit_quality, hi.fit_quality
        ),
    );
    assert!(pass);
}

fn figure_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-figures");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn is_png(path: &PathBuf) -> bool {
    std::fs::read(path)
        .map(|b| b.len() > 1000 && b.starts_with(b"\x89PNG"))
        .unwrap_or(false)
}

#[test]
#[ignore = "long run; use --ignored"]
fn criterion_8_figures() {
    let dir = figure_dir();
    let t = std::f64::consts::FRAC_PI_4;
    let window = GridWindow::default();
    let spec = PotentialSpec::new(N, 0.6, 1).unwrap();
    let control = BarrierControl::new(&spec, X0);
    let grid = |f: &(dyn Fn(f64, f64, f64) -> f64 + Sync)| contour_export(f, t, window, 256, 256).unwrap();
    let v = grid(&|x, y, t| spec.potential_value(x, y, t));
    let vt = grid(&|x, y, t| control.exact_controlled_potential(x, y, t));
    let f = grid(&|x, y, t| control.exact_control_term(x, y, t));
    let ftr = grid(&|x, y, t| control.truncated_controlled_potential(x, y, t) - spec.potential_value(x, y, t));
    let fig2 = dir.join("fig2_potentials.png");
    let fig4 = dir.join("fig4_control_terms.png");
    write_contours(&fig2, &[&v, &vt], 12).unwrap();
    write_contours(&fig4, &[&f, &ftr], 12).unwrap();
    let v_max = v.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let similarity = v
        .values
        .iter()
        .zip(&vt.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        / v_max;
    say(&format!("  fig 2 sup|V - V~| / sup|V| = {similarity:.3} (<= 0.5)"));

    let view = View::around_barrier(X0);
    let barriers = [X0 - TAU, X0];
    let portrait = |path: &PathBuf, runs: &[EnsembleReport]| {
        let panels: Vec<ScatterPanel<'_>> = runs
            .iter()
            .map(|r| ScatterPanel {
                trajectories: &r.trajectories,
                barriers: &barriers,
            })
            .collect();
        write_scatter(path, view, &panels).unwrap();
    };
    let fig3 = dir.join("fig3_portraits.png");
    let runs = [
        ensemble(0.9, 1, ControlMode::None, false, N_TRAJ),
        ensemble(0.9, 1, ControlMode::Exact, false, N_TRAJ),
    ];
    portrait(&fig3, &runs);
    let fig5 = dir.join("fig5_truncated.png");
    portrait(&fig5, &[ensemble(0.3, 1, ControlMode::Truncated, false, 50)]);

    let figures = [&fig2, &fig3, &fig4, &fig5];
    let missing: Vec<&PathBuf> = figures.iter().copied().filter(|p| !is_png(p)).collect();
    let pass = missing.is_empty() && similarity <= 0.5;
    verdict(
        8,
        pass,
        &format!("figures 2-5 written to {}, missing {missing:?}", dir.display()),
    );
    assert!(pass);
}
