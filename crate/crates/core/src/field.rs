//! The phenomenological drift potential
//!
//! ```text
//! V(x, y, t) = ε Σ_{n,m=1..N} cos(n x + m y + φ_{n,m} − t) / (n² + m²)^{3/2}
//! ```
//!
//! in dimensionless units (ω = 1). Guiding centres move along
//! `ẋ = −∂_y V`, `ẏ = ∂_x V`.
//!
//! Evaluation avoids per-mode trigonometry: with `p_n = e^{inx}`,
//! `q_m = e^{imy}` and `c_{n,m} = e^{iφ_{n,m}} / (n²+m²)^{3/2}`, the potential
//! is `ε Re[e^{−it} Σ_n p_n Σ_m c_{n,m} q_m]`, and every derivative is a
//! weighted variant of the same double sum.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest supported mode count per direction. Evaluation scratch space
/// lives on the stack and is sized by this.
pub const MAX_MODES: usize = 64;

pub(crate) const CZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Value and first derivatives of a scalar potential at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSample {
    pub value: f64,
    pub grad_x: f64,
    pub grad_y: f64,
    pub dt_value: f64,
}

impl FieldSample {
    /// Drift velocity `(ẋ, ẏ) = (−∂_y V, ∂_x V)`.
    #[inline]
    pub fn velocity(&self) -> (f64, f64) {
        (-self.grad_y, self.grad_x)
    }
}

/// Anything that can drive the drift equations.
pub trait DriftField: Sync {
    fn sample(&self, x: f64, y: f64, t: f64) -> FieldSample;

    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.sample(x, y, t).value
    }
}

impl<T: DriftField + ?Sized> DriftField for &T {
    fn sample(&self, x: f64, y: f64, t: f64) -> FieldSample {
        (**self).sample(x, y, t)
    }
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        (**self).value(x, y, t)
    }
}

/// Draws an `n_modes × n_modes` matrix of i.i.d. phases uniform on `[0, 2π)`.
///
/// The generator is ChaCha8 (`rand_chacha`) seeded through
/// `SeedableRng::seed_from_u64(seed)`; entries are drawn row by row
/// (`n` outer, `m` inner) with `gen_range(0.0..2π)`. The output is
/// reproducible bit-for-bit across platforms.
pub fn sample_phases(n_modes: usize, seed: u64) -> Result<Vec<f64>> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_modes * n_modes).map(|_| rng.gen_range(0.0..TAU)).collect())
}

/// `ε = 4π² (c V₀ / B) / (L ℓ ω)`.
pub fn epsilon_from_physical(v0: f64, b: f64, l: f64, ell: f64, omega: f64, c: f64) -> Result<f64> {
    for (name, v) in [("V0", v0), ("B", b), ("L", l), ("ell", ell), ("omega", omega), ("c", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(4.0 * PI * PI * (c * v0 / b) / (l * ell * omega))
}

/// `(n² + m²)^{-3/2}`.
#[inline]
pub fn mode_weight(n: usize, m: usize) -> f64 {
    let r2 = (n * n + m * m) as f64;
    1.0 / (r2 * r2.sqrt())
}

/// Fills `out[k] = e^{i(k+1)θ}` by repeated multiplication.
#[inline]
pub(crate) fn fill_powers(theta: f64, out: &mut [Complex64]) {
    let base = Complex64::new(theta.cos(), theta.sin());
    let mut acc = base;
    for slot in out.iter_mut() {
        *slot = acc;
        acc *= base;
    }
}

/// A field restricted to one `(y, t)` line: every channel of the sample is
/// `Re Σ_n e^{i n (x + shift)} c_n`.
#[derive(Debug, Clone)]
pub(crate) struct RowExpansion {
    pub n: usize,
    pub shift: f64,
    pub value: [Complex64; MAX_MODES],
    pub grad_x: [Complex64; MAX_MODES],
    pub grad_y: [Complex64; MAX_MODES],
    pub dt: [Complex64; MAX_MODES],
}

impl RowExpansion {
    pub fn zeroed(n: usize, shift: f64) -> Self {
        Self {
            n,
            shift,
            value: [CZERO; MAX_MODES],
            grad_x: [CZERO; MAX_MODES],
            grad_y: [CZERO; MAX_MODES],
            dt: [CZERO; MAX_MODES],
        }
    }

    pub fn eval(&self, x: f64) -> FieldSample {
        let mut p = [CZERO; MAX_MODES];
        fill_powers(x + self.shift, &mut p[..self.n]);
        self.eval_powers(&p[..self.n])
    }

    /// Evaluates with `p[k] = e^{i(k+1)(x + shift)}` supplied by the caller.
    #[inline]
    pub fn eval_powers(&self, p: &[Complex64]) -> FieldSample {
        let dot = |c: &[Complex64; MAX_MODES]| -> f64 {
            p.iter().zip(&c[..self.n]).map(|(a, b)| a.re * b.re - a.im * b.im).sum()
        };
        FieldSample {
            value: dot(&self.value),
            grad_x: dot(&self.grad_x),
            grad_y: dot(&self.grad_y),
            dt_value: dot(&self.dt),
        }
    }

    /// Folds the shift into the coefficients so that a fixed power table of
    /// `x` can be reused.
    pub fn absorb_shift(&mut self) {
        let mut e = [CZERO; MAX_MODES];
        fill_powers(self.shift, &mut e[..self.n]);
        for c in [&mut self.value, &mut self.grad_x, &mut self.grad_y, &mut self.dt] {
            for (ci, ei) in c[..self.n].iter_mut().zip(&e[..self.n]) {
                *ci *= ei;
            }
        }
        self.shift = 0.0;
    }
}

/// The multi-mode potential: amplitude, mode count and phases.
///
/// Immutable after construction; all evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    n_modes: usize,
    epsilon: f64,
    rng_seed: u64,
    phases: Vec<f64>,
    phases_overridden: bool,
    // e^{iφ_{n,m}} (n²+m²)^{-3/2}, n-major.
    coeffs: Vec<Complex64>,
}

impl PotentialSpec {
    /// Builds a spec whose phases are drawn from `rng_seed`.
    pub fn new(n_modes: usize, epsilon: f64, rng_seed: u64) -> Result<Self> {
        let phases = sample_phases(n_modes, rng_seed)?;
        Self::build(n_modes, epsilon, rng_seed, phases, false)
    }

    /// Builds a spec with explicit phases (`n`-major, `n_modes²` entries in `[0, 2π)`).
    pub fn with_phases(n_modes: usize, epsilon: f64, phases: Vec<f64>) -> Result<Self> {
        Self::build(n_modes, epsilon, 0, phases, true)
    }

    fn build(n_modes: usize, epsilon: f64, rng_seed: u64, phases: Vec<f64>, phases_overridden: bool) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_MODES {
            return Err(Error::InvalidArgument(format!(
                "n_modes must be in 1..={MAX_MODES}, got {n_modes}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and non-negative, got {epsilon}"
            )));
        }
        if phases.len() != n_modes * n_modes {
            return Err(Error::InvalidArgument(format!(
                "expected {} phases, got {}",
                n_modes * n_modes,
                phases.len()
            )));
        }
        if let Some(bad) = phases.iter().find(|p| !(**p >= 0.0 && **p < TAU)) {
            return Err(Error::InvalidArgument(format!("phase {bad} outside [0, 2π)")));
        }
        let coeffs = phases
            .iter()
            .enumerate()
            .map(|(idx, &phi)| {
                let (n, m) = (idx / n_modes + 1, idx % n_modes + 1);
                Complex64::from_polar(mode_weight(n, m), phi)
            })
            .collect();
        Ok(Self {
            n_modes,
            epsilon,
            rng_seed,
            phases,
            phases_overridden,
            coeffs,
        })
    }

    /// Same phases, different amplitude.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::build(
            self.n_modes,
            epsilon,
            self.rng_seed,
            self.phases.clone(),
            self.phases_overridden,
        )
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Phases in `n`-major order.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phases_overridden(&self) -> bool {
        self.phases_overridden
    }

    /// `φ_{n,m}` for 1-based mode numbers.
    pub fn phase(&self, n: usize, m: usize) -> f64 {
        self.phases[(n - 1) * self.n_modes + (m - 1)]
    }

    pub(crate) fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `V(x, y, t)`.
    pub fn potential_value(&self, x: f64, y: f64, t: f64) -> f64 {
        let n = self.n_modes;
        let mut p = [CZERO; MAX_MODES];
        let mut q = [CZERO; MAX_MODES];
        fill_powers(x, &mut p[..n]);
        fill_powers(y, &mut q[..n]);
        let mut z = CZERO;
        for (row, pn) in self.coeffs.chunks_exact(n).zip(&p[..n]) {
            let mut s = CZERO;
            for (c, qm) in row.iter().zip(&q[..n]) {
                s += c * qm;
            }
            z += pn * s;
        }
        let w = Complex64::new(t.cos(), -t.sin());
        self.epsilon * (w * z).re
    }

    /// `S_n = Σ_m c_{n,m} e^{imy}` and `T_n = Σ_m m c_{n,m} e^{imy}`.
    pub(crate) fn row_sums(&self, y: f64, s: &mut [Complex64], tm: &mut [Complex64]) {
        let n = self.n_modes;
        let mut q = [CZERO; MAX_MODES];
        fill_powers(y, &mut q[..n]);
        for (i, row) in self.coeffs.chunks_exact(n).enumerate() {
            let mut a = CZERO;
            let mut b = CZERO;
            for (j, (c, qm)) in row.iter().zip(&q[..n]).enumerate() {
                let term = c * qm;
                a += term;
                b += term * (j + 1) as f64;
            }
            s[i] = a;
            tm[i] = b;
        }
    }

    pub(crate) fn row_expansion(&self, y: f64, t: f64) -> RowExpansion {
        let n = self.n_modes;
        let mut s = [CZERO; MAX_MODES];
        let mut tm = [CZERO; MAX_MODES];
        self.row_sums(y, &mut s, &mut tm);
        let i_unit = Complex64::new(0.0, 1.0);
        let ew = Complex64::new(t.cos(), -t.sin()) * self.epsilon;
        let mut row = RowExpansion::zeroed(n, 0.0);
        for i in 0..n {
            let a = ew * s[i];
            row.value[i] = a;
            row.grad_x[i] = i_unit * a * (i + 1) as f64;
            row.grad_y[i] = i_unit * ew * tm[i];
            row.dt[i] = -i_unit * a;
        }
        row
    }

    /// `V` with its analytic derivatives `∂_x V`, `∂_y V`, `∂_t V`.
    pub fn field_sample(&self, x: f64, y: f64, t: f64) -> FieldSample {
        let n = self.n_modes;
        let mut p = [CZERO; MAX_MODES];
        let mut q = [CZERO; MAX_MODES];
        fill_powers(x, &mut p[..n]);
        fill_powers(y, &mut q[..n]);
        let mut z = CZERO;
        let mut zx = CZERO;
        let mut zy = CZERO;
        for (i, (row, pn)) in self.coeffs.chunks_exact(n).zip(&p[..n]).enumerate() {
            let mut s = CZERO;
            let mut sm = CZERO;
            for (j, (c, qm)) in row.iter().zip(&q[..n]).enumerate() {
                let term = c * qm;
                s += term;
                sm += term * (j + 1) as f64;
            }
            let ps = pn * s;
            z += ps;
            zx += ps * (i + 1) as f64;
            zy += pn * sm;
        }
        let w = Complex64::new(t.cos(), -t.sin());
        let eps = self.epsilon;
        let wz = w * z;
        FieldSample {
            value: eps * wz.re,
            grad_x: -eps * (w * zx).im,
            grad_y: -eps * (w * zy).im,
            dt_value: eps * wz.im,
        }
    }
}

impl DriftField for PotentialSpec {
    fn sample(&self, x: f64, y: f64, t: f64) -> FieldSample {
        self.field_sample(x, y, t)
    }
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.potential_value(x, y, t)
    }
}

/// Serialized form: phases are written only when they were set explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialSpecRepr {
    pub n_modes: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
}

impl TryFrom<PotentialSpecRepr> for PotentialSpec {
    type Error = Error;

    fn try_from(r: PotentialSpecRepr) -> Result<Self> {
        match r.phases {
            Some(ph) => {
                let mut spec = Self::with_phases(r.n_modes, r.epsilon, ph)?;
                spec.rng_seed = r.rng_seed;
                Ok(spec)
            }
            None => Self::new(r.n_modes, r.epsilon, r.rng_seed),
        }
    }
}

impl From<&PotentialSpec> for PotentialSpecRepr {
    fn from(s: &PotentialSpec) -> Self {
        Self {
            n_modes: s.n_modes,
            epsilon: s.epsilon,
            rng_seed: s.rng_seed,
            phases: s.phases_overridden.then(|| s.phases.clone()),
        }
    }
}

impl Serialize for PotentialSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        PotentialSpecRepr::from(self).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = PotentialSpecRepr::deserialize(de)?;
        PotentialSpec::try_from(repr).map_err(serde::de::Error::custom)
    }
}
