//! Explicit Runge–Kutta steppers on a 3-vector.

pub(crate) type Vec3 = [f64; 3];

#[inline]
fn axpy(y: &Vec3, h: f64, terms: &[(f64, &Vec3)]) -> Vec3 {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..3 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Classical fourth-order step.
pub(crate) fn rk4_step<F: Fn(&Vec3) -> Vec3>(f: &F, y: &Vec3, k1: &Vec3, h: f64) -> Vec3 {
    let k2 = f(&axpy(y, 0.5 * h, &[(1.0, k1)]));
    let k3 = f(&axpy(y, 0.5 * h, &[(1.0, &k2)]));
    let k4 = f(&axpy(y, h, &[(1.0, &k3)]));
    axpy(
        y,
        h / 6.0,
        &[(1.0, k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
    )
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes c_i
// never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Shampine's fourth-order continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Accepted-step payload needed by [`dopri_dense`].
pub(crate) struct DopriStep {
    pub y_new: Vec3,
    pub k7: Vec3,
    pub err: Vec3,
    pub dense: Vec3,
}

/// One Dormand–Prince attempt.
pub(crate) fn dopri_step<F: Fn(&Vec3) -> Vec3>(f: &F, y: &Vec3, k1: &Vec3, h: f64) -> DopriStep {
    let k2 = f(&axpy(y, h, &[(A21, k1)]));
    let k3 = f(&axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(&axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(&axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(&axpy(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y_new = axpy(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(&y_new);
    let mut err = [0.0; 3];
    let mut dense = [0.0; 3];
    for i in 0..3 {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        dense[i] = h
            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    DopriStep {
        y_new,
        k7,
        err,
        dense,
    }
}

/// Continuous extension of an accepted Dormand–Prince step at fraction `s`.
pub(crate) fn dopri_dense(y0: &Vec3, f0: &Vec3, y1: &Vec3, f1: &Vec3, dense: &Vec3, h: f64, s: f64) -> Vec3 {
    let s1 = 1.0 - s;
    let mut out = [0.0; 3];
    for i in 0..3 {
        let diff = y1[i] - y0[i];
        let bspl = h * f0[i] - diff;
        let c4 = diff - h * f1[i] - bspl;
        out[i] = y0[i] + s * (diff + s1 * (bspl + s * (c4 + s1 * dense[i])));
    }
    out
}

/// Cubic Hermite interpolant on `[t0, t0 + h]` at fraction `s`.
pub(crate) fn hermite(y0: &Vec3, f0: &Vec3, y1: &Vec3, f1: &Vec3, h: f64, s: f64) -> Vec3 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
    }
    out
}
