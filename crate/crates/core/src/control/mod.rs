//! Local control of the drift Hamiltonian.
//!
//! With `f(y, t) = ∫_0^t V(x₀, y, s) ds`, the controlled potential
//! `Ṽ(x, y, t) = V(x + ∂_y f, y, t)` has the invariant surface
//! `x = x₀ − ∂_y f(y, t)`, which no trajectory can cross. The control term
//! is `F = Ṽ − V`, quadratic in the amplitude.
//!
//! Everything here reduces to two per-`y` sums,
//!
//! ```text
//! F_c(y) + i F_s(y) = Σ_{n,m} m e^{i K_{n,m}(y)} / (n²+m²)^{3/2},   K = n x₀ + m y + φ_{n,m}
//! ```
//!
//! so that `∂_y f = ε (F_c (1 − cos t) − F_s sin t)`. Writing
//! `ρ e^{iΘ} = −ε (F_s + i F_c)` the controlled potential expands as
//! `Ṽ = Σ_k Ṽ_k` with
//! `Ṽ_k = ε Σ J_k(nρ) cos(η + kΘ + (k−1)t) / (n²+m²)^{3/2}` and
//! `η = n x + m y + φ + n ε F_c`. Only `k = 1 ± h` carry the temporal
//! harmonic `h`, which is what the truncated control keeps.

mod bessel;

pub use bessel::{bessel_j, bessel_j_orders, BesselError, MAX_ARG, MAX_ORDER};

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::field::{fill_powers, DriftField, FieldSample, PotentialSpec, RowExpansion, CZERO, MAX_MODES};
use crate::{par, Error, Result};

/// Which potential drives the particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Bare potential `V`.
    #[default]
    None,
    /// `Ṽ = V(x + ∂_y f, y, t)`.
    Exact,
    /// `Ṽ` restricted to its lowest temporal harmonics.
    Truncated,
}

impl std::str::FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "exact" => Ok(Self::Exact),
            "truncated" => Ok(Self::Truncated),
            other => Err(Error::InvalidArgument(format!("unknown control mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Exact => "exact",
            Self::Truncated => "truncated",
        })
    }
}

fn default_harmonics() -> usize {
    2
}

fn default_scale() -> f64 {
    1.0
}

/// Barrier placement and control variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub x0: f64,
    #[serde(default)]
    pub mode: ControlMode,
    /// Temporal harmonics kept by the truncated control (2 keeps the
    /// constant, `cos t, sin t` and `cos 2t, sin 2t`).
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    /// Multiplier on the control term, `V + scale·(Ṽ − V)`. Anything other
    /// than 1 breaks the barrier; used for fault injection.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            x0: 2.0,
            mode: ControlMode::None,
            harmonics: default_harmonics(),
            scale: 1.0,
        }
    }
}

/// Largest harmonic count accepted by the truncated control.
pub const MAX_HARMONICS: usize = 64;

impl ControlConfig {
    pub fn new(x0: f64, mode: ControlMode) -> Self {
        Self {
            x0,
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() {
            return Err(Error::InvalidArgument(format!("x0 must be finite, got {}", self.x0)));
        }
        if self.harmonics > MAX_HARMONICS {
            return Err(Error::InvalidArgument(format!(
                "harmonics must be at most {MAX_HARMONICS}, got {}",
                self.harmonics
            )));
        }
        if !self.scale.is_finite() {
            return Err(Error::InvalidArgument("control scale must be finite".into()));
        }
        Ok(())
    }
}

/// Per-`y` quantities of the Bessel decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGeometry {
    pub f_c: f64,
    pub f_s: f64,
    pub rho: f64,
    /// In `(−π, π]`; zero when `ρ = 0`.
    pub theta: f64,
    /// `η_{n,m}(x, y)`, `n`-major.
    pub eta: Vec<f64>,
}

/// Outcome of the sampled norm-bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub epsilon_max: f64,
    pub sup_f: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Largest amplitude covered by the norm bound, `√π / (2 N e^{3/2})`.
pub fn norm_bound_threshold(n_modes: usize) -> f64 {
    PI.sqrt() / (2.0 * n_modes as f64 * 1.5f64.exp())
}

/// `ε² N² e³ / (4π)`.
pub fn norm_bound(epsilon: f64, n_modes: usize) -> f64 {
    let n = n_modes as f64;
    epsilon * epsilon * n * n * 3f64.exp() / (4.0 * PI)
}

// F_c + iF_s and its y-derivative.
#[derive(Debug, Clone, Copy)]
struct Moments {
    f: Complex64,
    df: Complex64,
}

/// Control machinery for one potential and one barrier position.
#[derive(Debug, Clone)]
pub struct BarrierControl {
    spec: PotentialSpec,
    x0: f64,
    // G_m = Σ_n e^{i n x₀} c_{n,m}
    g: Vec<Complex64>,
}

impl BarrierControl {
    pub fn new(spec: &PotentialSpec, x0: f64) -> Self {
        let n = spec.n_modes();
        let mut p = [CZERO; MAX_MODES];
        fill_powers(x0, &mut p[..n]);
        let coeffs = spec.coeffs();
        let g = (0..n).map(|m| (0..n).map(|i| p[i] * coeffs[i * n + m]).sum()).collect();
        Self {
            spec: spec.clone(),
            x0,
            g,
        }
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    fn epsilon(&self) -> f64 {
        self.spec.epsilon()
    }

    // Σ_m q_m G_m = Σ_{n,m} e^{iK}/(n²+m²)^{3/2}
    fn k_sum(&self, y: f64) -> Complex64 {
        let n = self.spec.n_modes();
        let mut q = [CZERO; MAX_MODES];
        fill_powers(y, &mut q[..n]);
        self.g.iter().zip(&q[..n]).map(|(g, q)| g * q).sum()
    }

    fn moments(&self, y: f64) -> Moments {
        let n = self.spec.n_modes();
        let mut q = [CZERO; MAX_MODES];
        fill_powers(y, &mut q[..n]);
        let mut f = CZERO;
        let mut f2 = CZERO;
        for (m, (g, q)) in self.g.iter().zip(&q[..n]).enumerate() {
            let mf = (m + 1) as f64;
            let term = g * q * mf;
            f += term;
            f2 += term * mf;
        }
        Moments {
            f,
            df: Complex64::new(0.0, 1.0) * f2,
        }
    }

    /// `(F_c(y), F_s(y))`.
    pub fn fc_fs(&self, y: f64) -> (f64, f64) {
        let f = self.moments(y).f;
        (f.re, f.im)
    }

    /// `f(y, t) = ∫_0^t V(x₀, y, s) ds` in closed form.
    pub fn f_of(&self, y: f64, t: f64) -> f64 {
        let one_minus_w = Complex64::new(1.0 - t.cos(), t.sin());
        self.epsilon() * (one_minus_w * self.k_sum(y)).im
    }

    /// `∂_y f = ε (F_c (1 − cos t) − F_s sin t)`.
    pub fn f_prime(&self, y: f64, t: f64) -> f64 {
        let (fc, fs) = self.fc_fs(y);
        self.epsilon() * (fc * (1.0 - t.cos()) - fs * t.sin())
    }

    /// `∂_t f = V(x₀, y, t)`.
    pub fn f_dot(&self, y: f64, t: f64) -> f64 {
        self.spec.potential_value(self.x0, y, t)
    }

    /// `∂²_y f`.
    pub fn f_second(&self, y: f64, t: f64) -> f64 {
        let df = self.moments(y).df;
        self.epsilon() * (df.re * (1.0 - t.cos()) - df.im * t.sin())
    }

    /// `Ṽ(x, y, t) = V(x + ∂_y f, y, t)`.
    pub fn exact_controlled_potential(&self, x: f64, y: f64, t: f64) -> f64 {
        self.spec.potential_value(x + self.f_prime(y, t), y, t)
    }

    /// `F = Ṽ − V`.
    pub fn exact_control_term(&self, x: f64, y: f64, t: f64) -> f64 {
        self.exact_controlled_potential(x, y, t) - self.spec.potential_value(x, y, t)
    }

    /// `Ṽ` with analytic derivatives (chain rule through the shift `∂_y f`).
    pub fn exact_sample(&self, x: f64, y: f64, t: f64) -> FieldSample {
        let eps = self.epsilon();
        let Moments { f, df } = self.moments(y);
        let (st, ct) = t.sin_cos();
        let shift = eps * (f.re * (1.0 - ct) - f.im * st);
        let shift_y = eps * (df.re * (1.0 - ct) - df.im * st);
        let shift_t = eps * (f.re * st - f.im * ct);
        let s = self.spec.field_sample(x + shift, y, t);
        FieldSample {
            value: s.value,
            grad_x: s.grad_x,
            grad_y: s.grad_x * shift_y + s.grad_y,
            dt_value: s.grad_x * shift_t + s.dt_value,
        }
    }

    fn rho_theta(&self, f: Complex64) -> (f64, f64) {
        let eps = self.epsilon();
        let rho = eps * f.norm();
        let theta = if rho > 0.0 {
            (-eps * f.re).atan2(-eps * f.im)
        } else {
            0.0
        };
        (rho, theta)
    }

    /// `F_c, F_s, ρ, Θ` and the per-mode phases `η_{n,m}(x, y)`.
    pub fn control_geometry(&self, x: f64, y: f64) -> ControlGeometry {
        let f = self.moments(y).f;
        let (rho, theta) = self.rho_theta(f);
        let n = self.spec.n_modes();
        let eps_fc = self.epsilon() * f.re;
        let eta = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n + 1, idx % n + 1);
                i as f64 * x + j as f64 * y + self.spec.phase(i, j) + i as f64 * eps_fc
            })
            .collect();
        ControlGeometry {
            f_c: f.re,
            f_s: f.im,
            rho,
            theta,
            eta,
        }
    }

    /// The `k`-th term `Ṽ_k` of the Bessel expansion of `Ṽ`.
    pub fn fourier_mode_k(&self, k: i64, x: f64, y: f64, t: f64) -> Result<f64> {
        let order = k.unsigned_abs() as usize;
        if order > MAX_ORDER {
            return Err(BesselError::OrderOutOfRange(k).into());
        }
        let n = self.spec.n_modes();
        let f = self.moments(y).f;
        let (rho, theta) = self.rho_theta(f);
        if n as f64 * rho > MAX_ARG {
            return Err(BesselError::ArgumentOutOfRange(n as f64 * rho).into());
        }
        let mut s = [CZERO; MAX_MODES];
        let mut tm = [CZERO; MAX_MODES];
        self.spec.row_sums(y, &mut s, &mut tm);
        let mut p = [CZERO; MAX_MODES];
        fill_powers(x + self.epsilon() * f.re, &mut p[..n]);
        let phase = Complex64::from_polar(1.0, k as f64 * theta + (k - 1) as f64 * t);
        let mut jbuf = [0.0; MAX_ORDER + 1];
        let sign = if k < 0 && order % 2 == 1 { -1.0 } else { 1.0 };
        let mut acc = CZERO;
        for i in 0..n {
            bessel_j_orders((i + 1) as f64 * rho, &mut jbuf[..=order]);
            acc += p[i] * s[i] * (sign * jbuf[order]);
        }
        Ok(self.epsilon() * (acc * phase).re)
    }

    /// Coefficients `(a₀, a₁, b₁, a₂, b₂)` of
    /// `Ṽ_tr = a₀ + a₁ cos t + b₁ sin t + a₂ cos 2t + b₂ sin 2t` at `(x, y)`,
    /// summed mode by mode from the harmonic amplitudes
    ///
    /// ```text
    /// A₀ = J₁ cos(η+Θ)
    /// A₁ = J₀ cos η + J₂ cos(η+2Θ)      B₁ = J₀ sin η − J₂ sin(η+2Θ)
    /// A₂ = J₃ cos(η+3Θ) − J₁ cos(η−Θ)   B₂ = −J₃ sin(η+3Θ) − J₁ sin(η−Θ)
    /// ```
    ///
    /// with every `J_k` evaluated at `nρ`.
    pub fn harmonic_coefficients(&self, x: f64, y: f64) -> [f64; 5] {
        let geo = self.control_geometry(x, y);
        let n = self.spec.n_modes();
        let th = geo.theta;
        let mut out = [0.0; 5];
        let mut j = [0.0; 4];
        for i in 1..=n {
            bessel_j_orders(i as f64 * geo.rho, &mut j);
            for m in 1..=n {
                let eta = geo.eta[(i - 1) * n + (m - 1)];
                let w = crate::field::mode_weight(i, m);
                let a0 = j[1] * (eta + th).cos();
                let a1 = j[0] * eta.cos() + j[2] * (eta + 2.0 * th).cos();
                let b1 = j[0] * eta.sin() - j[2] * (eta + 2.0 * th).sin();
                let a2 = j[3] * (eta + 3.0 * th).cos() - j[1] * (eta - th).cos();
                let b2 = -j[3] * (eta + 3.0 * th).sin() - j[1] * (eta - th).sin();
                for (o, v) in out.iter_mut().zip([a0, a1, b1, a2, b2]) {
                    *o += w * v;
                }
            }
        }
        out.map(|v| self.epsilon() * v)
    }

    /// `Ṽ` keeping the temporal harmonics `0 … harmonics`, i.e. the Bessel
    /// orders `k ∈ [1 − harmonics, 1 + harmonics]`, with analytic derivatives.
    pub fn truncated_sample(&self, harmonics: usize, x: f64, y: f64, t: f64) -> FieldSample {
        self.truncated_row(harmonics, y, t).eval(x)
    }

    pub(crate) fn exact_row(&self, y: f64, t: f64) -> RowExpansion {
        let eps = self.epsilon();
        let Moments { f, df } = self.moments(y);
        let (st, ct) = t.sin_cos();
        let shift_y = eps * (df.re * (1.0 - ct) - df.im * st);
        let shift_t = eps * (f.re * st - f.im * ct);
        let mut row = self.spec.row_expansion(y, t);
        row.shift = eps * (f.re * (1.0 - ct) - f.im * st);
        for i in 0..row.n {
            let gx = row.grad_x[i];
            row.grad_y[i] += gx * shift_y;
            row.dt[i] += gx * shift_t;
        }
        row
    }

    pub(crate) fn truncated_row(&self, harmonics: usize, y: f64, t: f64) -> RowExpansion {
        let n = self.spec.n_modes();
        let eps = self.epsilon();
        let Moments { f, df } = self.moments(y);
        let (rho, theta) = self.rho_theta(f);
        let fnorm2 = f.norm_sqr();
        // ρ' and Θ' through (F_c, F_s).
        let (rho_y, theta_y) = if rho > 0.0 {
            (
                eps * (f.re * df.re + f.im * df.im) / fnorm2.sqrt(),
                (f.im * df.re - f.re * df.im) / fnorm2,
            )
        } else {
            (0.0, 0.0)
        };

        let h = harmonics as i64;
        let (k_lo, k_hi) = (1 - h, 1 + h);
        let jmax = (k_hi.max(-k_lo) + 1) as usize;
        let mut jbuf = [0.0; MAX_ORDER + 1];
        let jb = &mut jbuf[..=jmax];
        let j_at = |jb: &[f64], k: i64| -> f64 {
            let v = jb[k.unsigned_abs() as usize];
            if k < 0 && k % 2 != 0 {
                -v
            } else {
                v
            }
        };

        // e^{ik(Θ+t)} e^{−it} for k in [k_lo, k_hi].
        let span = (k_hi - k_lo + 1) as usize;
        let mut phase = [CZERO; 2 * MAX_HARMONICS + 1];
        let u = Complex64::from_polar(1.0, theta + t);
        let w = Complex64::new(t.cos(), -t.sin());
        let mut acc = u.powi(k_lo as i32) * w;
        for slot in phase[..span].iter_mut() {
            *slot = acc;
            acc *= u;
        }

        let mut s = [CZERO; MAX_MODES];
        let mut tm = [CZERO; MAX_MODES];
        self.spec.row_sums(y, &mut s, &mut tm);

        let i_unit = Complex64::new(0.0, 1.0);
        let mut row = RowExpansion::zeroed(n, eps * f.re);
        for i in 0..n {
            let nf = (i + 1) as f64;
            bessel_j_orders(nf * rho, jb);
            let mut b = CZERO;
            let mut db = CZERO;
            let mut tb = CZERO;
            for (idx, ph) in phase[..span].iter().enumerate() {
                let k = k_lo + idx as i64;
                let jk = j_at(jb, k);
                let djk = 0.5 * (j_at(jb, k - 1) - j_at(jb, k + 1));
                b += ph * jk;
                db += ph * Complex64::new(nf * djk * rho_y, k as f64 * theta_y * jk);
                tb += ph * ((k - 1) as f64 * jk);
            }
            let sb = s[i] * b * eps;
            row.value[i] = sb;
            row.grad_x[i] = i_unit * sb * nf;
            row.grad_y[i] = sb * (i_unit * nf * eps * df.re) + (s[i] * db + i_unit * b * tm[i]) * eps;
            row.dt[i] = i_unit * s[i] * tb * eps;
        }
        row
    }

    /// `Ṽ_tr` with the default two temporal harmonics.
    pub fn truncated_controlled_potential(&self, x: f64, y: f64, t: f64) -> f64 {
        self.truncated_sample(2, x, y, t).value
    }

    /// `max |F|` over the lattice `(2π/r)·(i, j, k)`, `0 ≤ i, j, k < r`.
    pub fn control_term_sup(&self, resolution: usize) -> Result<f64> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        let h = TAU / resolution as f64;
        let slab_sup = par::map_indexed(resolution, |it| {
            let t = it as f64 * h;
            let mut sup = 0.0f64;
            for iy in 0..resolution {
                let y = iy as f64 * h;
                let shift = self.f_prime(y, t);
                for ix in 0..resolution {
                    let x = ix as f64 * h;
                    let v = self.spec.potential_value(x, y, t);
                    let vt = self.spec.potential_value(x + shift, y, t);
                    sup = sup.max((vt - v).abs());
                }
            }
            sup
        });
        Ok(slab_sup.into_iter().fold(0.0, f64::max))
    }

    /// Samples `|F|` on a `resolution³` lattice of the periodicity cube and
    /// compares the supremum with `ε² N² e³ / (4π)`.
    ///
    /// The bound concerns an analyticity-strip norm; the real-slice
    /// supremum checked here is a necessary condition only.
    pub fn verify_norm_bound(&self, resolution: usize) -> Result<NormBoundReport> {
        let n = self.spec.n_modes();
        let eps = self.epsilon();
        let epsilon_max = norm_bound_threshold(n);
        if eps > epsilon_max {
            return Err(Error::PreconditionViolated(format!(
                "epsilon {eps} exceeds the bound's validity threshold {epsilon_max}"
            )));
        }
        let sup_f = self.control_term_sup(resolution)?;
        let bound = norm_bound(eps, n);
        Ok(NormBoundReport {
            epsilon_max,
            sup_f,
            bound,
            holds: sup_f <= bound,
        })
    }
}

/// A drift field for one of the three control modes.
#[derive(Debug, Clone)]
pub struct ControlledField {
    control: BarrierControl,
    config: ControlConfig,
}

impl ControlledField {
    pub fn new(spec: &PotentialSpec, config: ControlConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            control: BarrierControl::new(spec, config.x0),
            config,
        })
    }

    pub fn config(&self) -> &ControlConfig {
        &self.config
    }

    pub fn control(&self) -> &BarrierControl {
        &self.control
    }

    pub fn spec(&self) -> &PotentialSpec {
        self.control.spec()
    }

    /// The sample of the controlled potential before scaling.
    fn raw(&self, x: f64, y: f64, t: f64) -> FieldSample {
        match self.config.mode {
            ControlMode::None => self.control.spec().field_sample(x, y, t),
            ControlMode::Exact => self.control.exact_sample(x, y, t),
            ControlMode::Truncated => self.control.truncated_sample(self.config.harmonics, x, y, t),
        }
    }
}

impl DriftField for ControlledField {
    fn sample(&self, x: f64, y: f64, t: f64) -> FieldSample {
        let s = self.raw(x, y, t);
        let lambda = self.config.scale;
        if lambda == 1.0 || self.config.mode == ControlMode::None {
            return s;
        }
        let b = self.control.spec().field_sample(x, y, t);
        let mix = |c: f64, v: f64| v + lambda * (c - v);
        FieldSample {
            value: mix(s.value, b.value),
            grad_x: mix(s.grad_x, b.grad_x),
            grad_y: mix(s.grad_y, b.grad_y),
            dt_value: mix(s.dt_value, b.dt_value),
        }
    }
}
