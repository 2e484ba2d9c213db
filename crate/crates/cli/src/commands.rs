use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use anyhow::{Context, Result};
use exb_barrier::config::RunConfig;
use exb_barrier::control::BarrierControl;
use exb_barrier::diagnostics::{
    comparison_table, contour_export, energy_report, msd_diffusion, seed_statistics, write_comparison_csv,
    write_energy_csv, write_escape_csv, ContourGrid, EnergyReport, EscapeSummary, GridWindow, MsdReport,
};
use exb_barrier::dynamics::{run_ensemble, write_poincare_csv, EnsembleConfig, EnsembleReport};
use exb_barrier::plot::{self, ScatterPanel, View};
use exb_barrier::{ControlConfig, ControlMode, PotentialSpec};
use log::info;
use serde::Serialize;

use crate::checks::{self, Outcome};
use crate::output::{display, OutputDir};

pub enum Failure {
    Validation(usize),
    Compute(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Compute(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Ensemble report without the per-trajectory records.
#[derive(Serialize)]
struct EnsembleSummary<'a> {
    mode: ControlMode,
    epsilon: f64,
    potential_seed: u64,
    n_traj: usize,
    n_escaped: usize,
    n_failed: usize,
    escape_fraction: f64,
    first_crossing_times: &'a [Option<f64>],
    wall_time_s: f64,
    parallel: bool,
    config: &'a EnsembleConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    msd: Option<MsdReport>,
}

fn summary(rep: &EnsembleReport, msd: Option<MsdReport>) -> EnsembleSummary<'_> {
    EnsembleSummary {
        mode: rep.config.control.mode,
        epsilon: rep.epsilon,
        potential_seed: rep.potential_seed,
        n_traj: rep.n_traj,
        n_escaped: rep.n_escaped,
        n_failed: rep.n_failed,
        escape_fraction: rep.escape_fraction,
        first_crossing_times: &rep.first_crossing_times,
        wall_time_s: rep.wall_time_s,
        parallel: rep.parallel,
        config: &rep.config,
        msd,
    }
}

fn write_json<T: Serialize>(out: &OutputDir, name: &str, value: &T) -> Result<()> {
    let path = out.write_with(name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })?;
    info!("wrote {}", display(&path));
    Ok(())
}

/// Uncontrolled and controlled Poincaré sections side by side.
pub fn portrait(cfg: &RunConfig) -> CmdResult {
    let out = OutputDir::prepare(cfg, "portrait")?;
    let spec = cfg.potential.build()?;
    let controlled = match cfg.control.mode {
        ControlMode::None => ControlMode::Exact,
        m => m,
    };
    let x0 = cfg.control.x0;
    let mut panels = Vec::new();
    for mode in [ControlMode::None, controlled] {
        let mut ens = cfg.ensemble.to_config(ControlConfig { mode, ..cfg.control });
        ens.stop_at_escape = false;
        info!(
            "integrating {} trajectories, mode {mode}, epsilon {}",
            ens.n_traj,
            spec.epsilon()
        );
        let rep = run_ensemble(&spec, &ens)?;
        info!(
            "mode {mode}: {} of {} escaped ({:.1}%), {:.1} s",
            rep.n_escaped,
            rep.n_traj,
            100.0 * rep.escape_fraction,
            rep.wall_time_s
        );
        let [lo, hi] = cfg.diagnostics.msd_window;
        let msd = match (mode, hi <= ens.t_final) {
            (ControlMode::None, true) => msd_diffusion(&rep.trajectories, (lo, hi), spec.epsilon()).ok(),
            _ => None,
        };
        let csv = out.write_with(&format!("portrait_{mode}.csv"), |w| {
            write_poincare_csv(w, &rep.trajectories, out.header())?;
            Ok(())
        })?;
        info!("wrote {}", display(&csv));
        write_json(&out, &format!("portrait_{mode}.json"), &summary(&rep, msd))?;
        panels.push(rep);
    }
    if cfg.plots {
        let view = View::around_barrier(x0);
        let barriers = [x0 - TAU, x0];
        let scatter: Vec<ScatterPanel<'_>> = panels
            .iter()
            .map(|r| ScatterPanel {
                trajectories: &r.trajectories,
                barriers: &barriers,
            })
            .collect();
        let path = out.path("portrait.png");
        plot::write_scatter(&path, view, &scatter)?;
        info!("wrote {}", display(&path));
    }
    Ok(())
}

fn energy_row(r: &EnergyReport) -> Vec<f64> {
    vec![r.zeta_ex, r.zeta_tr, r.eta_ex, r.eta_tr]
}

fn escape_row(r: &EscapeSummary) -> Vec<f64> {
    vec![r.n_without, r.n_exact, r.n_tr]
}

// Averaged rows written as `epsilon, col, col_se, ...`.
fn write_mean_csv(
    out: &OutputDir,
    name: &str,
    columns: &[&str],
    eps: &[f64],
    per_seed: &[Vec<Vec<f64>>],
) -> Result<()> {
    let path = out.write_with(name, |w| {
        for line in out.header().lines() {
            writeln!(w, "# {line}")?;
        }
        let head: Vec<String> = columns
            .iter()
            .flat_map(|c| [c.to_string(), format!("{c}_se")])
            .collect();
        writeln!(w, "epsilon,n_seeds,{}", head.join(","))?;
        for (i, e) in eps.iter().enumerate() {
            let rows: Vec<Vec<f64>> = per_seed.iter().map(|s| s[i].clone()).collect();
            let stats = seed_statistics(&rows)?;
            let cells: Vec<String> = stats
                .mean
                .iter()
                .zip(&stats.std_err)
                .flat_map(|(m, s)| [m.to_string(), s.to_string()])
                .collect();
            writeln!(w, "{e},{},{}", rows.len(), cells.join(","))?;
        }
        Ok(())
    })?;
    info!("wrote {}", display(&path));
    Ok(())
}

fn escape_summary(spec: &PotentialSpec, cfg: &RunConfig, seed: u64) -> Result<EscapeSummary> {
    let mut fractions = [0.0; 3];
    for (slot, mode) in [ControlMode::None, ControlMode::Exact, ControlMode::Truncated]
        .into_iter()
        .enumerate()
    {
        let mut ens = cfg.ensemble.to_config(ControlConfig { mode, ..cfg.control });
        ens.seed = seed;
        ens.stop_at_escape = true;
        let rep = run_ensemble(spec, &ens)?;
        info!(
            "epsilon {} seed {seed} mode {mode}: escape {:.1}% ({:.1} s)",
            spec.epsilon(),
            100.0 * rep.escape_fraction,
            rep.wall_time_s
        );
        fractions[slot] = 100.0 * rep.escape_fraction;
    }
    Ok(EscapeSummary {
        epsilon: spec.epsilon(),
        n_without: fractions[0],
        n_exact: fractions[1],
        n_tr: fractions[2],
    })
}

/// Energy, escape and comparison tables, one file per seed plus seed means.
pub fn tables(cfg: &RunConfig, energy_only: bool) -> CmdResult {
    let out = OutputDir::prepare(cfg, "tables")?;
    let d = &cfg.diagnostics;
    if d.eps_sweep.is_empty() {
        return Err(anyhow::anyhow!("diagnostics.eps_sweep is empty").into());
    }
    let x0 = cfg.control.x0;
    let n = cfg.potential.n_modes;
    let key = |e: f64| e.to_bits();

    let mut energy_per_seed = Vec::new();
    let mut energy_cache: BTreeMap<(u64, u64), EnergyReport> = BTreeMap::new();
    for &seed in &d.seeds {
        let mut rows = Vec::new();
        for &eps in &d.eps_sweep {
            let spec = PotentialSpec::new(n, eps, seed)?;
            let rep = energy_report(&spec, x0, d.resolution)?;
            info!(
                "energy epsilon {eps} seed {seed}: zeta_ex {:.4} eta_ex {:.4}",
                rep.zeta_ex, rep.eta_ex
            );
            energy_cache.insert((seed, key(eps)), rep);
            rows.push(rep);
        }
        let path = out.write_with(&format!("table1_seed{seed}.csv"), |w| {
            Ok(write_energy_csv(w, &rows, out.header())?)
        })?;
        info!("wrote {}", display(&path));
        energy_per_seed.push(rows.iter().map(energy_row).collect::<Vec<_>>());
    }
    write_mean_csv(
        &out,
        "table1_mean.csv",
        &["zeta_ex", "zeta_tr", "eta_ex", "eta_tr"],
        &d.eps_sweep,
        &energy_per_seed,
    )?;
    if energy_only || d.escape_eps.is_empty() {
        return Ok(());
    }

    let mut escape_per_seed = Vec::new();
    let mut comparison_per_seed = Vec::new();
    for &seed in &d.seeds {
        let mut escapes = Vec::new();
        let mut energies = Vec::new();
        for &eps in &d.escape_eps {
            let spec = PotentialSpec::new(n, eps, seed)?;
            escapes.push(escape_summary(&spec, cfg, seed)?);
            let energy = match energy_cache.get(&(seed, key(eps))) {
                Some(r) => *r,
                None => energy_report(&spec, x0, d.resolution)?,
            };
            energies.push(energy);
        }
        let path = out.write_with(&format!("table2_seed{seed}.csv"), |w| {
            Ok(write_escape_csv(w, &escapes, out.header())?)
        })?;
        info!("wrote {}", display(&path));
        let joined = comparison_table(&d.escape_eps, &escapes, &energies)?;
        let path = out.write_with(&format!("table3_seed{seed}.csv"), |w| {
            Ok(write_comparison_csv(w, &joined, out.header())?)
        })?;
        info!("wrote {}", display(&path));
        escape_per_seed.push(escapes.iter().map(escape_row).collect::<Vec<_>>());
        comparison_per_seed.push(
            joined
                .iter()
                .map(|r| vec![r.n_without, r.n_exact, r.n_tr, r.delta_n, r.delta_eta])
                .collect(),
        );
    }
    write_mean_csv(
        &out,
        "table2_mean.csv",
        &["n_without", "n_exact", "n_tr"],
        &d.escape_eps,
        &escape_per_seed,
    )?;
    write_mean_csv(
        &out,
        "table3_mean.csv",
        &["n_without", "n_exact", "n_tr", "delta_n", "delta_eta"],
        &d.escape_eps,
        &comparison_per_seed,
    )?;
    Ok(())
}

/// Reduced oracle suite; the report goes to stdout and `validate.txt`.
pub fn validate(cfg: &RunConfig) -> CmdResult {
    let out = OutputDir::prepare(cfg, "validate")?;
    let started = std::time::Instant::now();
    let results = checks::run_all(cfg)?;
    let mut report = String::new();
    for c in &results {
        report.push_str(&c.to_string());
        report.push('\n');
    }
    let failed = results.iter().filter(|c| c.outcome == Outcome::Fail).count();
    let skipped = results.iter().filter(|c| c.outcome == Outcome::Skipped).count();
    report.push_str(&format!(
        "{} checks: {} passed, {failed} failed, {skipped} skipped in {:.1} s\n",
        results.len(),
        results.len() - failed - skipped,
        started.elapsed().as_secs_f64()
    ));
    print!("{report}");
    out.write_with("validate.txt", |w| {
        for line in out.header().lines() {
            writeln!(w, "# {line}")?;
        }
        w.write_all(report.as_bytes())?;
        Ok(())
    })?;
    if failed > 0 {
        return Err(Failure::Validation(failed));
    }
    Ok(())
}

fn write_grid(out: &OutputDir, name: &str, grid: &ContourGrid) -> Result<()> {
    let path = out.write_with(name, |w| Ok(grid.write_to(w, out.header())?))?;
    info!("wrote {}", display(&path));
    Ok(())
}

/// Potential, controlled potential and both control terms on a lattice.
pub fn contour(cfg: &RunConfig) -> CmdResult {
    let out = OutputDir::prepare(cfg, "contour")?;
    let spec = cfg.potential.build()?;
    let control = BarrierControl::new(&spec, cfg.control.x0);
    let (t, nodes) = (cfg.diagnostics.contour_t, cfg.diagnostics.contour_nodes);
    let window = GridWindow::default();
    let v = contour_export(|x, y, t| spec.potential_value(x, y, t), t, window, nodes, nodes)?;
    let v_tilde = contour_export(
        |x, y, t| control.exact_controlled_potential(x, y, t),
        t,
        window,
        nodes,
        nodes,
    )?;
    let f = contour_export(|x, y, t| control.exact_control_term(x, y, t), t, window, nodes, nodes)?;
    let harmonics = cfg.control.harmonics;
    let f_tr = contour_export(
        |x, y, t| control.truncated_sample(harmonics, x, y, t).value - spec.potential_value(x, y, t),
        t,
        window,
        nodes,
        nodes,
    )?;
    for (name, grid) in [("v", &v), ("v_tilde", &v_tilde), ("f", &f), ("f_tr", &f_tr)] {
        write_grid(&out, &format!("contour_{name}.grid"), grid)?;
    }
    let v_max = v.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sup_diff = v
        .values
        .iter()
        .zip(&v_tilde.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if v_max > 0.0 {
        info!("sup|V - V~| / sup|V| = {:.4}", sup_diff / v_max);
    }
    if cfg.plots {
        let levels = 12;
        let p = out.path("contour_potentials.png");
        plot::write_contours(&p, &[&v, &v_tilde], levels).context("potential contours")?;
        info!("wrote {}", display(&p));
        let p = out.path("contour_control.png");
        plot::write_contours(&p, &[&f, &f_tr], levels).context("control contours")?;
        info!("wrote {}", display(&p));
    }
    Ok(())
}
