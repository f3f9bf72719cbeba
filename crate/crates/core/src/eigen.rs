//! Eigenvalues of 3×3 real matrices via the characteristic polynomial.
//!
//! Block-triangular inputs are deflated first so that their diagonal entries
//! come back exactly; otherwise the monic cubic
//! `λ³ − tr·λ² + m·λ − det` is solved in closed form (trigonometric branch
//! for three real roots, Cardano for one) and real roots are polished with
//! Newton steps on the polynomial.

use num_complex::Complex64;

use crate::Mat3;

/// Eigenvalues of `m`, real ones first in ascending order, then any
/// complex-conjugate pair (positive imaginary part first).
pub fn eigenvalues_3x3(m: &Mat3) -> [Complex64; 3] {
    let mut out = deflated(m).unwrap_or_else(|| cubic_eigenvalues(m));
    out.sort_by(|a, b| {
        let ka = (a.im != 0.0, a.re, -a.im);
        let kb = (b.im != 0.0, b.re, -b.im);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Trace, sum of principal 2×2 minors, determinant.
pub fn invariants(m: &Mat3) -> (f64, f64, f64) {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    (tr, minors, det)
}

fn deflated(m: &Mat3) -> Option<[Complex64; 3]> {
    let re = |v: f64| Complex64::new(v, 0.0);
    // first row or first column isolated
    if (m[0][1] == 0.0 && m[0][2] == 0.0) || (m[1][0] == 0.0 && m[2][0] == 0.0) {
        let [a, b] = eigenvalues_2x2(m[1][1], m[1][2], m[2][1], m[2][2]);
        return Some([re(m[0][0]), a, b]);
    }
    // last row or last column isolated
    if (m[2][0] == 0.0 && m[2][1] == 0.0) || (m[0][2] == 0.0 && m[1][2] == 0.0) {
        let [a, b] = eigenvalues_2x2(m[0][0], m[0][1], m[1][0], m[1][1]);
        return Some([a, b, re(m[2][2])]);
    }
    None
}

/// Eigenvalues of `[[a, b], [c, d]]`.
pub fn eigenvalues_2x2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    if b == 0.0 || c == 0.0 {
        return [Complex64::new(a, 0.0), Complex64::new(d, 0.0)];
    }
    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    let disc = half_gap * half_gap + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let big = mean + s.copysign(mean);
        if big == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let small = (a * d - b * c) / big;
        [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(mean, s), Complex64::new(mean, -s)]
    }
}

fn cubic_eigenvalues(m: &Mat3) -> [Complex64; 3] {
    let (tr, minors, det) = invariants(m);
    solve_monic_cubic(-tr, minors, -det)
}

/// Roots of `λ³ + c2·λ² + c1·λ + c0`.
pub fn solve_monic_cubic(c2: f64, c1: f64, c0: f64) -> [Complex64; 3] {
    let shift = c2 / 3.0;
    let p = c1 - c2 * shift;
    let q = 2.0 * shift * shift * shift - shift * c1 + c0;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if disc > 0.0 {
        // one real root
        let w = -half_q - disc.sqrt().copysign(half_q);
        let u = w.cbrt();
        let t = if u == 0.0 { 0.0 } else { u - third_p / u };
        let lambda = polish(t - shift, c2, c1, c0);
        // deflate: λ³ + c2λ² + c1λ + c0 = (λ − λ1)(λ² + e1λ + e0)
        let e1 = c2 + lambda;
        let e0 = c1 + lambda * e1;
        let [r1, r2] = quadratic_roots(e1, e0);
        [Complex64::new(lambda, 0.0), r1, r2]
    } else if p == 0.0 {
        let l = polish(-shift, c2, c1, c0);
        [Complex64::new(l, 0.0); 3]
    } else {
        // three real roots
        let rad = (-third_p).sqrt();
        let arg = (half_q / (third_p * rad)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let tau = std::f64::consts::TAU / 3.0;
        let mut roots = [0.0; 3];
        for (k, root) in roots.iter_mut().enumerate() {
            let t = 2.0 * rad * (phi - tau * k as f64).cos();
            *root = polish(t - shift, c2, c1, c0);
        }
        roots.map(|r| Complex64::new(r, 0.0))
    }
}

/// Roots of `λ² + e1·λ + e0`.
fn quadratic_roots(e1: f64, e0: f64) -> [Complex64; 2] {
    let half = -0.5 * e1;
    let disc = half * half - e0;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let big = half + s.copysign(half);
        if big == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(big, 0.0), Complex64::new(e0 / big, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half, s), Complex64::new(half, -s)]
    }
}

/// Newton refinement on the cubic, keeping a step only if it lowers |p(x)|.
fn polish(mut x: f64, c2: f64, c1: f64, c0: f64) -> f64 {
    let poly = |x: f64| ((x + c2) * x + c1) * x + c0;
    let slope = |x: f64| (3.0 * x + 2.0 * c2) * x + c1;
    let mut val = poly(x);
    for _ in 0..4 {
        let d = slope(x);
        if val == 0.0 || d == 0.0 {
            break;
        }
        let next = x - val / d;
        let next_val = poly(next);
        if next_val.abs() >= val.abs() {
            break;
        }
        x = next;
        val = next_val;
    }
    x
}
