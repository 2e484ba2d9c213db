//! Dormand–Prince 8(5,3) single steps on small fixed-size states.
//!
//! Coefficients follow Hairer, Nørsett & Wanner's DOP853. Dense output is
//! not needed: the driver lands steps exactly on sampling times instead.

#![allow(clippy::excessive_precision)]

const C2: f64 = 0.526001519587677318785587544488e-01;
const C3: f64 = 0.789002279381515978178381316732e-01;
const C4: f64 = 0.118350341907227396726757197510e+00;
const C5: f64 = 0.281649658092772603273242802490e+00;
const C6: f64 = 0.333333333333333333333333333333e+00;
const C7: f64 = 0.25e+00;
const C8: f64 = 0.307692307692307692307692307692e+00;
const C9: f64 = 0.651282051282051282051282051282e+00;
const C10: f64 = 0.6e+00;
const C11: f64 = 0.857142857142857142857142857142e+00;
const B1: f64 = 5.42937341165687622380535766363e-2;
const B6: f64 = 4.45031289275240888144113950566e0;
const B7: f64 = 1.89151789931450038304281599044e0;
const B8: f64 = -5.8012039600105847814672114227e0;
const B9: f64 = 3.1116436695781989440891606237e-1;
const B10: f64 = -1.52160949662516078556178806805e-1;
const B11: f64 = 2.01365400804030348374776537501e-1;
const B12: f64 = 4.47106157277725905176885569043e-2;
const BHH1: f64 = 0.244094488188976377952755905512e+00;
const BHH2: f64 = 0.733846688281611857341361741547e+00;
const BHH3: f64 = 0.220588235294117647058823529412e-01;
const ER1: f64 = 0.1312004499419488073250102996e-01;
const ER6: f64 = -0.1225156446376204440720569753e+01;
const ER7: f64 = -0.4957589496572501915214079952e+00;
const ER8: f64 = 0.1664377182454986536961530415e+01;
const ER9: f64 = -0.3503288487499736816886487290e+00;
const ER10: f64 = 0.3341791187130174790297318841e+00;
const ER11: f64 = 0.8192320648511571246570742613e-01;
const ER12: f64 = -0.2235530786388629525884427845e-01;
const A21: f64 = 5.26001519587677318785587544488e-2;
const A31: f64 = 1.97250569845378994544595329183e-2;
const A32: f64 = 5.91751709536136983633785987549e-2;
const A41: f64 = 2.95875854768068491816892993775e-2;
const A43: f64 = 8.87627564304205475450678981324e-2;
const A51: f64 = 2.41365134159266685502369798665e-1;
const A53: f64 = -8.84549479328286085344864962717e-1;
const A54: f64 = 9.24834003261792003115737966543e-1;
const A61: f64 = 3.7037037037037037037037037037e-2;
const A64: f64 = 1.70828608729473871279604482173e-1;
const A65: f64 = 1.25467687566822425016691814123e-1;
const A71: f64 = 3.7109375e-2;
const A74: f64 = 1.70252211019544039314978060272e-1;
const A75: f64 = 6.02165389804559606850219397283e-2;
const A76: f64 = -1.7578125e-2;
const A81: f64 = 3.70920001185047927108779319836e-2;
const A84: f64 = 1.70383925712239993810214054705e-1;
const A85: f64 = 1.07262030446373284651809199168e-1;
const A86: f64 = -1.53194377486244017527936158236e-2;
const A87: f64 = 8.27378916381402288758473766002e-3;
const A91: f64 = 6.24110958716075717114429577812e-1;
const A94: f64 = -3.36089262944694129406857109825e0;
const A95: f64 = -8.68219346841726006818189891453e-1;
const A96: f64 = 2.75920996994467083049415600797e1;
const A97: f64 = 2.01540675504778934086186788979e1;
const A98: f64 = -4.34898841810699588477366255144e1;
const A101: f64 = 4.77662536438264365890433908527e-1;
const A104: f64 = -2.48811461997166764192642586468e0;
const A105: f64 = -5.90290826836842996371446475743e-1;
const A106: f64 = 2.12300514481811942347288949897e1;
const A107: f64 = 1.52792336328824235832596922938e1;
const A108: f64 = -3.32882109689848629194453265587e1;
const A109: f64 = -2.03312017085086261358222928593e-2;
const A111: f64 = -9.3714243008598732571704021658e-1;
const A114: f64 = 5.18637242884406370830023853209e0;
const A115: f64 = 1.09143734899672957818500254654e0;
const A116: f64 = -8.14978701074692612513997267357e0;
const A117: f64 = -1.85200656599969598641566180701e1;
const A118: f64 = 2.27394870993505042818970056734e1;
const A119: f64 = 2.49360555267965238987089396762e0;
const A1110: f64 = -3.0467644718982195003823669022e0;
const A121: f64 = 2.27331014751653820792359768449e0;
const A124: f64 = -1.05344954667372501984066689879e1;
const A125: f64 = -2.00087205822486249909675718444e0;
const A126: f64 = -1.79589318631187989172765950534e1;
const A127: f64 = 2.79488845294199600508499808837e1;
const A128: f64 = -2.85899827713502369474065508674e0;
const A129: f64 = -8.87285693353062954433549289258e0;
const A1210: f64 = 1.23605671757943030647266201528e1;
const A1211: f64 = 6.43392746015763530355970484046e-1;

/// Result of one trial step.
pub(crate) struct Trial<const D: usize> {
    pub y: [f64; D],
    /// Scaled error norm; the step is acceptable when `err ≤ 1`.
    pub err: f64,
}

#[inline(always)]
fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

#[inline(always)]
fn combo<const D: usize>(terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = [0.0; D];
    for i in 0..D {
        for (c, k) in terms {
            out[i] += c * k[i];
        }
    }
    out
}

/// One DOP853 step of size `h` from `(t, y)` with `k1 = f(t, y)`.
///
/// The error norm uses the absolute tolerance `atol` on the first `active`
/// components only.
pub(crate) fn trial_step<const D: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h: f64,
    atol: f64,
    active: usize,
) -> Trial<D>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A43, &k3)]));
    let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A53, &k3), (A54, &k4)]));
    let k6 = f(t + C6 * h, &axpy(y, h, &[(A61, k1), (A64, &k4), (A65, &k5)]));
    let k7 = f(
        t + C7 * h,
        &axpy(y, h, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]),
    );
    let k8 = f(
        t + C8 * h,
        &axpy(y, h, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
    );
    let k9 = f(
        t + C9 * h,
        &axpy(
            y,
            h,
            &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)],
        ),
    );
    let k10 = f(
        t + C10 * h,
        &axpy(
            y,
            h,
            &[
                (A101, k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ),
    );
    let k11 = f(
        t + C11 * h,
        &axpy(
            y,
            h,
            &[
                (A111, k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ),
    );
    let k12 = f(
        t + h,
        &axpy(
            y,
            h,
            &[
                (A121, k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ),
    );
    let slope = combo(&[
        (B1, k1),
        (B6, &k6),
        (B7, &k7),
        (B8, &k8),
        (B9, &k9),
        (B10, &k10),
        (B11, &k11),
        (B12, &k12),
    ]);
    let y_new = axpy(y, h, &[(1.0, &slope)]);

    let mut err5 = 0.0;
    let mut err3 = 0.0;
    let e2 = combo(&[
        (ER1, k1),
        (ER6, &k6),
        (ER7, &k7),
        (ER8, &k8),
        (ER9, &k9),
        (ER10, &k10),
        (ER11, &k11),
        (ER12, &k12),
    ]);
    for i in 0..active {
        let e1 = slope[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        err5 += (e2[i] / atol).powi(2);
        err3 += (e1 / atol).powi(2);
    }
    let mut deno = err5 + 0.01 * err3;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let err = h.abs() * err5 * (1.0 / (active as f64 * deno)).sqrt();
    Trial { y: y_new, err }
}

/// Step-size controller with the usual DOP853 safety factors.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Controller {
    rejected_last: bool,
}

impl Controller {
    const SAFETY: f64 = 0.9;
    const EXPONENT: f64 = 1.0 / 8.0;
    const MIN_SCALE: f64 = 0.333;
    const MAX_SCALE: f64 = 6.0;

    pub fn new() -> Self {
        Self { rejected_last: false }
    }

    /// Returns `(accepted, next_h)`.
    pub fn judge(&mut self, err: f64, h: f64) -> (bool, f64) {
        let base = Self::SAFETY * err.max(1e-300).powf(-Self::EXPONENT);
        if err <= 1.0 {
            let scale = base.clamp(Self::MIN_SCALE, Self::MAX_SCALE);
            let scale = if self.rejected_last { scale.min(1.0) } else { scale };
            self.rejected_last = false;
            (true, h * scale)
        } else {
            self.rejected_last = true;
            (false, h * base.max(Self::MIN_SCALE))
        }
    }
}
