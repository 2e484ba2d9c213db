//! Bessel functions of the first kind and integer order.
//!
//! All orders `J_0 … J_K` at one argument come out of a single Miller
//! backward recurrence normalised with `J_0 + 2 Σ_{k≥1} J_{2k} = 1`. The
//! recurrence starts well beyond both `K` and `|z|`, which keeps the result
//! accurate to a few ulps of unity over the supported range.

use thiserror::Error;

/// Highest supported order.
pub const MAX_ORDER: usize = 256;
/// Largest supported `|z|`.
pub const MAX_ARG: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BesselError {
    #[error("Bessel order {0} outside ±{MAX_ORDER}")]
    OrderOutOfRange(i64),
    #[error("Bessel argument {0} outside ±{MAX_ARG}")]
    ArgumentOutOfRange(f64),
}

const RESCALE_AT: f64 = 1e200;
const RESCALE_BY: f64 = 1e-200;

/// `J_k(z)` for a single order.
pub fn bessel_j(k: i64, z: f64) -> Result<f64, BesselError> {
    let order = k.unsigned_abs() as usize;
    if order > MAX_ORDER {
        return Err(BesselError::OrderOutOfRange(k));
    }
    if z.is_nan() || z.abs() > MAX_ARG {
        return Err(BesselError::ArgumentOutOfRange(z));
    }
    let mut buf = [0.0; MAX_ORDER + 1];
    bessel_j_orders(z, &mut buf[..=order]);
    let v = buf[order];
    Ok(if k < 0 && order % 2 == 1 { -v } else { v })
}

/// Fills `out[k] = J_k(z)` for `k = 0 … out.len() − 1`.
///
/// No range checks; callers must keep `|z| ≤ MAX_ARG` and
/// `out.len() ≤ MAX_ORDER + 1` for the accuracy guarantee to hold.
pub fn bessel_j_orders(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let az = z.abs();
    if az == 0.0 {
        out.fill(0.0);
        out[0] = 1.0;
        return;
    }
    if az < 1e-6 {
        small_argument_series(az, out);
    } else {
        miller(az, out);
    }
    if z < 0.0 {
        for v in out.iter_mut().skip(1).step_by(2) {
            *v = -*v;
        }
    }
}

// Three terms of the power series; the fourth is below 1e-36 relative.
fn small_argument_series(az: f64, out: &mut [f64]) {
    let h = 0.5 * az;
    let h2 = h * h;
    let mut lead = 1.0; // (z/2)^k / k!
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            lead *= h / k as f64;
        }
        let kf = k as f64;
        *slot = lead * (1.0 - h2 / (kf + 1.0) + h2 * h2 / (2.0 * (kf + 1.0) * (kf + 2.0)));
    }
}

fn miller(az: f64, out: &mut [f64]) {
    let kmax = out.len() - 1;
    let reach = (kmax as f64).max(az);
    let mut start = (reach + 18.0 + 6.0 * reach.cbrt()).ceil() as usize;
    start += start % 2;

    let two_over_z = 2.0 / az;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-30; // J_k, k = start
    let mut norm = 0.0;
    out.fill(0.0);
    if start <= kmax {
        out[start] = j_cur;
    }
    for k in (1..=start).rev() {
        let j_prev = k as f64 * two_over_z * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = k - 1;
        if idx <= kmax {
            out[idx] = j_cur;
        }
        if idx > 0 && idx % 2 == 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > RESCALE_AT {
            j_cur *= RESCALE_BY;
            j_next *= RESCALE_BY;
            norm *= RESCALE_BY;
            for v in out.iter_mut().skip(idx) {
                *v *= RESCALE_BY;
            }
        }
    }
    norm += j_cur;
    let inv = 1.0 / norm;
    for v in out.iter_mut() {
        *v *= inv;
    }
}
