//! Cube averages, control-cost ratios, escape/energy comparison tables,
//! contour grids and the mean-squared-displacement diffusion estimate.
//!
//! Averages are midpoint sums on a `r³` lattice of the periodicity cube
//! `[0, 2π)³`, scaled to the integral (so `∫ 1 = (2π)³`). Slabs are summed
//! in index order whatever the thread count.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::BarrierControl;
use crate::dynamics::TrajectoryRecord;
use crate::field::{fill_powers, PotentialSpec, CZERO, MAX_MODES};
use crate::{par, Error, Result};

/// Smallest lattice accepted by the averages.
pub const MIN_RESOLUTION: usize = 16;
/// Lattice used when none is configured.
pub const DEFAULT_RESOLUTION: usize = 128;

/// Integrand post-processing for [`cube_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageKind {
    /// `∫ |W|`
    Absolute,
    /// `∫ |W|²`
    Squared,
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    Ok(())
}

fn midpoints(resolution: usize) -> Vec<f64> {
    let h = TAU / resolution as f64;
    (0..resolution).map(|i| (i as f64 + 0.5) * h).collect()
}

/// `∫_0^{2π} dx ∫_0^{2π} dy ∫_0^{2π} dt |W|` (or `|W|²`) by the midpoint rule.
pub fn cube_average<F>(f: F, resolution: usize, kind: AverageKind) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    check_resolution(resolution)?;
    let nodes = midpoints(resolution);
    let slabs = par::map_slice(&nodes, |&t| {
        let mut acc = 0.0;
        for &y in &nodes {
            for &x in &nodes {
                let w = f(x, y, t);
                acc += match kind {
                    AverageKind::Absolute => w.abs(),
                    AverageKind::Squared => w * w,
                };
            }
        }
        acc
    });
    let h = TAU / resolution as f64;
    Ok(slabs.iter().sum::<f64>() * h * h * h)
}

/// `ε² (2π)³ / 2 · Σ_{n,m} (n² + m²)^{-3}`, the exact `<|V|²>`.
pub fn mean_square_potential(epsilon: f64, n_modes: usize) -> f64 {
    let mut s = 0.0;
    for n in 1..=n_modes {
        for m in 1..=n_modes {
            let r2 = (n * n + m * m) as f64;
            s += 1.0 / (r2 * r2 * r2);
        }
    }
    epsilon * epsilon * TAU.powi(3) * 0.5 * s
}

/// Non-squared counterparts `<|F|>/<|V|>` and `<|∇F|>/<|∇V|>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteRatios {
    pub zeta_ex: f64,
    pub zeta_tr: f64,
    pub eta_ex: f64,
    pub eta_tr: f64,
}

/// Size of the exact and truncated control terms relative to `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub epsilon: f64,
    pub seed: u64,
    pub grid_resolution: usize,
    /// `<|F|²> / <|V|²>`
    pub zeta_ex: f64,
    /// `<|F_tr|²> / <|V|²>`
    pub zeta_tr: f64,
    /// `<|∇F|²> / <|∇V|²>` with the spatial gradient `(∂_x, ∂_y)`.
    pub eta_ex: f64,
    pub eta_tr: f64,
    pub absolute: AbsoluteRatios,
}

// Accumulator slots.
const V_SQ: usize = 0;
const V_ABS: usize = 1;
const GV_SQ: usize = 2;
const GV_ABS: usize = 3;
const F_SQ: usize = 4;
const F_ABS: usize = 5;
const GF_SQ: usize = 6;
const GF_ABS: usize = 7;
const T_SQ: usize = 8;
const T_ABS: usize = 9;
const GT_SQ: usize = 10;
const GT_ABS: usize = 11;

/// Computes ζ and η for the exact control and the two-harmonic truncation.
///
/// Each `(y, t)` line of the lattice is reduced to an `N`-term series in
/// `e^{inx}` first, so the cost per lattice point is `O(N)`.
pub fn energy_report(spec: &PotentialSpec, x0: f64, resolution: usize) -> Result<EnergyReport> {
    check_resolution(resolution)?;
    let control = BarrierControl::new(spec, x0);
    let n = spec.n_modes();
    let nodes = midpoints(resolution);
    let powers: Vec<[Complex64; MAX_MODES]> = nodes
        .iter()
        .map(|&x| {
            let mut p = [CZERO; MAX_MODES];
            fill_powers(x, &mut p[..n]);
            p
        })
        .collect();

    let slabs = par::map_slice(&nodes, |&t| {
        let mut acc = [0.0f64; 12];
        for &y in &nodes {
            let bare = spec.row_expansion(y, t);
            let mut exact = control.exact_row(y, t);
            exact.absorb_shift();
            let mut trunc = control.truncated_row(2, y, t);
            trunc.absorb_shift();
            for p in &powers {
                let p = &p[..n];
                let v = bare.eval_powers(p);
                let e = exact.eval_powers(p);
                let r = trunc.eval_powers(p);
                let gv2 = v.grad_x * v.grad_x + v.grad_y * v.grad_y;
                let f = e.value - v.value;
                let gf2 = (e.grad_x - v.grad_x).powi(2) + (e.grad_y - v.grad_y).powi(2);
                let ft = r.value - v.value;
                let gt2 = (r.grad_x - v.grad_x).powi(2) + (r.grad_y - v.grad_y).powi(2);
                acc[V_SQ] += v.value * v.value;
                acc[V_ABS] += v.value.abs();
                acc[GV_SQ] += gv2;
                acc[GV_ABS] += gv2.sqrt();
                acc[F_SQ] += f * f;
                acc[F_ABS] += f.abs();
                acc[GF_SQ] += gf2;
                acc[GF_ABS] += gf2.sqrt();
                acc[T_SQ] += ft * ft;
                acc[T_ABS] += ft.abs();
                acc[GT_SQ] += gt2;
                acc[GT_ABS] += gt2.sqrt();
            }
        }
        acc
    });
    let mut tot = [0.0f64; 12];
    for slab in &slabs {
        for (a, b) in tot.iter_mut().zip(slab) {
            *a += b;
        }
    }
    let ratio = |num: usize, den: usize| if tot[den] > 0.0 { tot[num] / tot[den] } else { 0.0 };
    Ok(EnergyReport {
        epsilon: spec.epsilon(),
        seed: spec.rng_seed(),
        grid_resolution: resolution,
        zeta_ex: ratio(F_SQ, V_SQ),
        zeta_tr: ratio(T_SQ, V_SQ),
        eta_ex: ratio(GF_SQ, GV_SQ),
        eta_tr: ratio(GT_SQ, GV_SQ),
        absolute: AbsoluteRatios {
            zeta_ex: ratio(F_ABS, V_ABS),
            zeta_tr: ratio(T_ABS, V_ABS),
            eta_ex: ratio(GF_ABS, GV_ABS),
            eta_tr: ratio(GT_ABS, GV_ABS),
        },
    })
}

/// Escape percentages of the three variants at one amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub epsilon: f64,
    pub n_without: f64,
    pub n_exact: f64,
    pub n_tr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub epsilon: f64,
    pub n_without: f64,
    pub n_exact: f64,
    pub n_tr: f64,
    /// `n_without − n_tr`
    pub delta_n: f64,
    /// `eta_ex − eta_tr`
    pub delta_eta: f64,
}

fn same_epsilon(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Joins escape fractions and energy ratios row by row.
pub fn comparison_table(
    eps_list: &[f64],
    escapes: &[EscapeSummary],
    energies: &[EnergyReport],
) -> Result<Vec<ComparisonRow>> {
    if escapes.len() != eps_list.len() || energies.len() != eps_list.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} rows, got {} escape and {} energy rows",
            eps_list.len(),
            escapes.len(),
            energies.len()
        )));
    }
    eps_list
        .iter()
        .zip(escapes.iter().zip(energies))
        .map(|(&eps, (esc, en))| {
            if !same_epsilon(eps, esc.epsilon) || !same_epsilon(eps, en.epsilon) {
                return Err(Error::InvalidArgument(format!(
                    "epsilon mismatch: {eps} vs escape {} / energy {}",
                    esc.epsilon, en.epsilon
                )));
            }
            Ok(ComparisonRow {
                epsilon: eps,
                n_without: esc.n_without,
                n_exact: esc.n_exact,
                n_tr: esc.n_tr,
                delta_n: esc.n_without - esc.n_tr,
                delta_eta: en.eta_ex - en.eta_tr,
            })
        })
        .collect()
}

fn write_comment<W: Write>(w: &mut W, header: &str) -> Result<()> {
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// `epsilon,zeta_ex,zeta_tr,eta_ex,eta_tr` with `#` comment lines first.
pub fn write_energy_csv<W: Write>(mut w: W, rows: &[EnergyReport], header: &str) -> Result<()> {
    write_comment(&mut w, header)?;
    writeln!(w, "epsilon,zeta_ex,zeta_tr,eta_ex,eta_tr")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.epsilon, r.zeta_ex, r.zeta_tr, r.eta_ex, r.eta_tr)?;
    }
    Ok(())
}

/// `epsilon,n_without,n_exact,n_tr` in percent.
pub fn write_escape_csv<W: Write>(mut w: W, rows: &[EscapeSummary], header: &str) -> Result<()> {
    write_comment(&mut w, header)?;
    writeln!(w, "epsilon,n_without,n_exact,n_tr")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.epsilon, r.n_without, r.n_exact, r.n_tr)?;
    }
    Ok(())
}

/// `epsilon,delta_n,delta_eta`.
pub fn write_comparison_csv<W: Write>(mut w: W, rows: &[ComparisonRow], header: &str) -> Result<()> {
    write_comment(&mut w, header)?;
    writeln!(w, "epsilon,delta_n,delta_eta")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.epsilon, r.delta_n, r.delta_eta)?;
    }
    Ok(())
}

/// Mean and standard error of each column across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStatistics {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

/// Column-wise mean and standard error of `rows` (one row per seed).
pub fn seed_statistics(rows: &[Vec<f64>]) -> Result<SeedStatistics> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidArgument("no rows to average".into()));
    };
    let width = first.len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidArgument("ragged rows".into()));
    }
    let k = rows.len() as f64;
    let mean: Vec<f64> = (0..width).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / k).collect();
    let std_err = (0..width)
        .map(|c| {
            if rows.len() < 2 {
                return 0.0;
            }
            let var = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    Ok(SeedStatistics { mean, std_err })
}

/// How well a straight line describes the mean-squared displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitQuality {
    /// Growth exponent within `[0.7, 1.3]`.
    Linear,
    /// Exponent below 0.7: trapped or subdiffusive.
    SubLinear,
    /// Exponent above 1.3: ballistic.
    SuperLinear,
    /// No displacement at all.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdReport {
    /// `D` from `<(x − x(0))²> ≈ 2 D t + c` over the window.
    pub diffusion: f64,
    /// `D / D̄` with `D̄ = 1` in these units.
    pub d_over_dbar: f64,
    /// Kubo number, equal to `ε` here.
    pub kubo: f64,
    /// Log-log slope of the MSD over the window.
    pub exponent: f64,
    pub fit_quality: FitQuality,
    /// Stroboscopic samples used in the fit.
    pub samples: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Mean-squared radial displacement of untruncated trajectories, fitted
/// over stroboscopic times in `window`.
pub fn msd_diffusion(trajectories: &[TrajectoryRecord], window: (f64, f64), epsilon: f64) -> Result<MsdReport> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad fit window [{lo}, {hi}]")));
    }
    if trajectories.iter().any(|r| r.escaped_at.is_some()) {
        return Err(Error::PreconditionViolated(
            "msd needs trajectories integrated without escape truncation".into(),
        ));
    }
    let mut times = Vec::new();
    let mut msd = Vec::new();
    let k_lo = (lo / TAU).ceil() as i64;
    let k_hi = (hi / TAU).floor() as i64;
    for k in k_lo..=k_hi {
        let mut sum = 0.0;
        let mut count = 0usize;
        for rec in trajectories {
            let Some(first) = rec.poincare_points.first() else {
                continue;
            };
            let idx = k - first.k;
            if idx < 0 {
                continue;
            }
            if let Some(p) = rec.poincare_points.get(idx as usize) {
                sum += (p.x - rec.initial.x).powi(2);
                count += 1;
            }
        }
        if count > 0 {
            times.push(k as f64 * TAU - trajectories[0].initial.tau0);
            msd.push(sum / count as f64);
        }
    }
    if times.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "only {} stroboscopic samples fall inside [{lo}, {hi}]",
            times.len()
        )));
    }
    let (slope, _) = least_squares(&times, &msd);
    let diffusion = 0.5 * slope;
    let (exponent, fit_quality) = if msd.iter().all(|&m| m == 0.0) {
        (0.0, FitQuality::Stationary)
    } else {
        let pairs: Vec<(f64, f64)> = times
            .iter()
            .zip(&msd)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&t, &m)| (t.ln(), m.ln()))
            .collect();
        let (lx, ly): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let alpha = if lx.len() >= 2 { least_squares(&lx, &ly).0 } else { 0.0 };
        let q = if alpha < 0.7 {
            FitQuality::SubLinear
        } else if alpha > 1.3 {
            FitQuality::SuperLinear
        } else {
            FitQuality::Linear
        };
        (alpha, q)
    };
    Ok(MsdReport {
        diffusion,
        d_over_dbar: diffusion,
        kubo: epsilon,
        exponent,
        fit_quality,
        samples: times.len(),
    })
}

/// Rectangle sampled by [`contour_export`], endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for GridWindow {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: TAU,
            y_min: 0.0,
            y_max: TAU,
        }
    }
}

/// Field values on a rectangular lattice, row `j` at `y_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub nx: usize,
    pub ny: usize,
    pub window: GridWindow,
    pub t: f64,
    pub values: Vec<f64>,
}

fn node(lo: f64, hi: f64, i: usize, count: usize) -> f64 {
    if count == 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (count - 1) as f64
    }
}

impl ContourGrid {
    pub fn x_at(&self, i: usize) -> f64 {
        node(self.window.x_min, self.window.x_max, i, self.nx)
    }

    pub fn y_at(&self, j: usize) -> f64 {
        node(self.window.y_min, self.window.y_max, j, self.ny)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// `#` comment lines, then `nx ny x_min x_max y_min y_max t`, then `ny`
    /// rows of `nx` whitespace-separated values.
    pub fn write_to<W: Write>(&self, mut w: W, header: &str) -> Result<()> {
        write_comment(&mut w, header)?;
        let g = &self.window;
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            self.nx, self.ny, g.x_min, g.x_max, g.y_min, g.y_max, self.t
        )?;
        for row in self.values.chunks_exact(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Inverse of [`ContourGrid::write_to`].
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("grid file: {msg}"));
        let mut lines = r
            .lines()
            .filter(|l| !matches!(l, Ok(s) if s.starts_with('#') || s.trim().is_empty()));
        let head = lines.next().ok_or_else(|| bad("missing header"))??;
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 7 {
            return Err(bad("header needs 7 fields"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad("bad size"));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let (nx, ny) = (int(h[0])?, int(h[1])?);
        let window = GridWindow {
            x_min: real(h[2])?,
            x_max: real(h[3])?,
            y_min: real(h[4])?,
            y_max: real(h[5])?,
        };
        let t = real(h[6])?;
        let mut values = Vec::with_capacity(nx * ny);
        for line in lines {
            for tok in line?.split_whitespace() {
                values.push(real(tok)?);
            }
        }
        if values.len() != nx * ny {
            return Err(bad("value count does not match header"));
        }
        Ok(Self {
            nx,
            ny,
            window,
            t,
            values,
        })
    }
}

/// Samples `field(x, y, t)` at time `t` on an `nx × ny` lattice spanning
/// `window`.
pub fn contour_export<F>(field: F, t: f64, window: GridWindow, nx: usize, ny: usize) -> Result<ContourGrid>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(
            "grid must have at least one node per axis".into(),
        ));
    }
    let rows = par::map_indexed(ny, |j| {
        let y = node(window.y_min, window.y_max, j, ny);
        (0..nx)
            .map(|i| field(node(window.x_min, window.x_max, i, nx), y, t))
            .collect::<Vec<f64>>()
    });
    Ok(ContourGrid {
        nx,
        ny,
        window,
        t,
        values: rows.concat(),
    })
}
