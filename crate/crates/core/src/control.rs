//! Backstepping design for the tumor / active CAR T cascade.
//!
//! The active population is treated as a virtual control for the tumor
//! equation. The target level `κ(x1) = (r/γ)(a − b·x1)` turns tumor growth into
//! `ẋ1 = r(1 − a)·x1`, and the error `z2 = x2 − κ(x1)` is driven to zero by a
//! constant activation flux τ. Stability of `(x1, z2) = (0, 0)` is certified by
//! `V = ½(ξ·x1² + z2²)` as long as the cross coefficient of `x1·z2` in `V̇`
//! stays within `±2k` and `k < √(ξ·ℓ̂·m̂)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ModelParams, State};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Default safety factor in [`select_xi`].
pub const DEFAULT_XI_SAFETY: f64 = 4.0;

/// Relative margin applied to the sampled supremum in [`estimate_k`].
pub const K_MARGIN: f64 = 0.1;

fn check_gain(a: f64) -> Result<()> {
    if !a.is_finite() || a <= 1.0 {
        return Err(Error::invalid("a", "backstepping gain must be finite and > 1"));
    }
    Ok(())
}

fn check_gamma(p: &ModelParams) -> Result<()> {
    if p.gamma == 0.0 {
        return Err(Error::DegenerateParameter("gamma = 0".into()));
    }
    Ok(())
}

/// Virtual control: the active CAR T level that linearises tumor growth.
///
/// Not clamped: it turns negative for `x1 > a/b`.
pub fn kappa(p: &ModelParams, a: f64, x1: f64) -> Result<f64> {
    check_gamma(p)?;
    check_gain(a)?;
    Ok(p.r / p.gamma * (a - p.b * x1))
}

/// Backstepping error `x2 − κ(x1)`.
pub fn z2(p: &ModelParams, a: f64, s: &State) -> Result<f64> {
    Ok(s.x2 - kappa(p, a, s.x1)?)
}

/// Activation flux `(ρ − φ)·r·a/γ`, which cancels the lone `z2` term of `V̇`.
pub fn tau_from_a(p: &ModelParams, a: f64) -> Result<f64> {
    check_gamma(p)?;
    check_gain(a)?;
    if p.phi >= p.rho {
        return Err(Error::Precondition(format!(
            "activation flux needs phi < rho (phi = {}, rho = {})",
            p.phi, p.rho
        )));
    }
    // same operation order as `isolated_z2_coefficient`, so the sum is exactly 0
    Ok(-((p.phi - p.rho) * (p.r / p.gamma) * a))
}

/// Lower bound `(ρ − φ)·r/γ` that any gain `a > 1` exceeds.
pub fn tau_lower_bound(p: &ModelParams) -> Result<f64> {
    check_gamma(p)?;
    Ok((p.rho - p.phi) * p.r / p.gamma)
}

/// `½(ξ·x1² + z2²)`.
pub fn lyapunov(xi: f64, x1: f64, z2: f64) -> f64 {
    0.5 * (xi * x1 * x1 + z2 * z2)
}

/// Gains and scalars of one backstepping certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacksteppingDesign {
    pub a: f64,
    pub tau: f64,
    pub xi: f64,
    pub k: f64,
    /// `|r(1 − a)|`
    pub ell_hat: f64,
    /// `|φ − ρ|`
    pub m_hat: f64,
    /// `r·b/γ`
    pub b_hat: f64,
}

impl BacksteppingDesign {
    /// Design with τ from [`tau_from_a`].
    pub fn new(p: &ModelParams, a: f64, xi: f64, k: f64) -> Result<Self> {
        let tau = tau_from_a(p, a)?;
        Self::with_tau(p, a, tau, xi, k)
    }

    /// Design with an arbitrary flux, e.g. to study an imperfect cancellation.
    pub fn with_tau(p: &ModelParams, a: f64, tau: f64, xi: f64, k: f64) -> Result<Self> {
        check_gamma(p)?;
        check_gain(a)?;
        if !tau.is_finite() {
            return Err(Error::invalid("tau", "must be finite"));
        }
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::invalid("xi", "must be finite and > 0"));
        }
        if !k.is_finite() || k < 0.0 {
            return Err(Error::invalid("k", "must be finite and >= 0"));
        }
        Ok(Self {
            a,
            tau,
            xi,
            k,
            ell_hat: (p.r * (1.0 - a)).abs(),
            m_hat: (p.phi - p.rho).abs(),
            b_hat: p.r * p.b / p.gamma,
        })
    }

    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }

    pub fn with_xi(self, xi: f64) -> Self {
        Self { xi, ..self }
    }

    /// Coefficient of the lone `z2` term in `V̇`, `(φ − ρ)(r/γ)a + τ`.
    pub fn isolated_z2_coefficient(&self, p: &ModelParams) -> f64 {
        (p.phi - p.rho) * (p.r / p.gamma) * self.a + self.tau
    }

    /// Coefficient multiplying `x1·z2` in `V̇`:
    /// `b̂r(1−a) − b̂γz2 + θu − b̂(φ−ρ) − αz2 + α(r/γ)(b·x1 − a) − γξx1`.
    pub fn cross_coefficient(&self, p: &ModelParams, x1: f64, z2: f64, u: f64) -> f64 {
        let net = p.phi - p.rho;
        self.b_hat * p.r * (1.0 - self.a) - self.b_hat * p.gamma * z2 + p.theta * u
            - self.b_hat * net
            - p.alpha * z2
            + p.alpha * (p.r / p.gamma) * (p.b * x1 - self.a)
            - p.gamma * self.xi * x1
    }

    /// Quadratic upper bound `−ξℓ̂x1² − m̂z2² + 2k|x1||z2|` on `V̇`, valid
    /// when τ cancels the lone term and the cross coefficient is within `±2k`.
    pub fn quadratic_bound(&self, x1: f64, z2: f64) -> f64 {
        -self.xi * self.ell_hat * x1 * x1 - self.m_hat * z2 * z2
            + 2.0 * self.k * x1.abs() * z2.abs()
    }
}

/// Closed-form `V̇` along the controlled tumor / active subsystem with the
/// non-active population replaced by the input `u`.
pub fn lyapunov_rate(p: &ModelParams, design: &BacksteppingDesign, s: &State, u: f64) -> Result<f64> {
    let e = z2(p, design.a, s)?;
    let x1 = s.x1;
    let a = design.a;
    Ok(design.xi * p.r * (1.0 - a) * x1 * x1
        + (p.phi - p.rho) * e * e
        + design.isolated_z2_coefficient(p) * e
        + design.cross_coefficient(p, x1, e, u) * x1 * e)
}

/// `k < √(ξ·ℓ̂·m̂)`, i.e. the 2×2 form `[[ξℓ̂, −k], [−k, m̂]]` is positive definite.
pub fn pd_condition(design: &BacksteppingDesign) -> bool {
    design.k < (design.xi * design.ell_hat * design.m_hat).sqrt()
}

/// `ξ = 4·k²/(ℓ̂·m̂)`, or 1 when `k = 0`.
pub fn select_xi(p: &ModelParams, a: f64, k: f64) -> Result<f64> {
    select_xi_with_safety(p, a, k, DEFAULT_XI_SAFETY)
}

pub fn select_xi_with_safety(p: &ModelParams, a: f64, k: f64, safety: f64) -> Result<f64> {
    check_gain(a)?;
    if !k.is_finite() || k < 0.0 {
        return Err(Error::invalid("k", "must be finite and >= 0"));
    }
    if !safety.is_finite() || safety <= 1.0 {
        return Err(Error::invalid("safety", "must be finite and > 1"));
    }
    let ell_hat = (p.r * (1.0 - a)).abs();
    let m_hat = (p.phi - p.rho).abs();
    if ell_hat == 0.0 {
        return Err(Error::DegenerateParameter("ell_hat = |r(1 - a)| = 0".into()));
    }
    if m_hat == 0.0 {
        return Err(Error::DegenerateParameter("m_hat = |phi - rho| = 0".into()));
    }
    if k == 0.0 {
        return Ok(1.0);
    }
    Ok(safety * k * k / (ell_hat * m_hat))
}

/// Axis-aligned box in `(x1, z2)` containing the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x1: (f64, f64),
    pub z2: (f64, f64),
}

impl Region {
    pub fn new(x1: (f64, f64), z2: (f64, f64)) -> Self {
        Self { x1, z2 }
    }

    /// `[0, x1(0)] × [−|z2(0)|, |z2(0)|]`.
    pub fn around_initial(p: &ModelParams, a: f64, s0: &State) -> Result<Self> {
        let e = z2(p, a, s0)?.abs();
        Ok(Self::new((0.0, s0.x1.max(0.0)), (-e, e)))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("region.x1", self.x1), ("region.z2", self.z2)] {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(name, "bounds must be finite"));
            }
            if lo > hi {
                return Err(Error::invalid(name, "empty interval (lower > upper)"));
            }
            if lo > 0.0 || hi < 0.0 {
                return Err(Error::invalid(name, "must contain 0"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x1: f64, z2: f64) -> bool {
        (self.x1.0..=self.x1.1).contains(&x1) && (self.z2.0..=self.z2.1).contains(&z2)
    }
}

/// Sampling grid for [`estimate_k_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    pub n_x1: usize,
    pub n_z2: usize,
    pub n_u: usize,
    /// Jitter interior nodes by up to half a cell, reproducibly from this seed.
    pub jitter_seed: Option<u64>,
    pub execution: Execution,
}

impl Default for KGrid {
    fn default() -> Self {
        Self {
            n_x1: 201,
            n_z2: 201,
            n_u: 11,
            jitter_seed: None,
            execution: Execution::default(),
        }
    }
}

fn node(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if n <= 1 || lo == hi {
        return lo;
    }
    if i + 1 == n {
        return hi;
    }
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

fn jittered(lo: f64, hi: f64, n: usize, i: usize, rng: &mut ChaCha8Rng) -> f64 {
    let x = node(lo, hi, n, i);
    if i == 0 || i + 1 >= n {
        return x;
    }
    let half = 0.5 * (hi - lo) / (n - 1) as f64;
    (x + rng.random_range(-half..=half)).clamp(lo, hi)
}

/// Half the sampled supremum of `|cross_coefficient|` over `region × [0, u_bound]`,
/// inflated by [`K_MARGIN`], on the default 201×201×11 grid.
pub fn estimate_k(
    p: &ModelParams,
    design: &BacksteppingDesign,
    region: &Region,
    u_bound: f64,
) -> Result<f64> {
    estimate_k_with(p, design, region, u_bound, &KGrid::default())
}

pub fn estimate_k_with(
    p: &ModelParams,
    design: &BacksteppingDesign,
    region: &Region,
    u_bound: f64,
    grid: &KGrid,
) -> Result<f64> {
    region.validate()?;
    if !u_bound.is_finite() || u_bound < 0.0 {
        return Err(Error::invalid("u_bound", "must be finite and >= 0"));
    }
    if grid.n_x1 == 0 || grid.n_z2 == 0 || grid.n_u == 0 {
        return Err(Error::invalid("grid", "every axis needs at least one node"));
    }
    let (x_lo, x_hi) = region.x1;
    let (z_lo, z_hi) = region.z2;
    let row_sup = |i: usize| -> f64 {
        let mut rng = grid
            .jitter_seed
            .map(|seed| ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let x1 = match rng.as_mut() {
            Some(rng) => jittered(x_lo, x_hi, grid.n_x1, i, rng),
            None => node(x_lo, x_hi, grid.n_x1, i),
        };
        let mut sup = 0.0f64;
        for j in 0..grid.n_z2 {
            let z = match rng.as_mut() {
                Some(rng) => jittered(z_lo, z_hi, grid.n_z2, j, rng),
                None => node(z_lo, z_hi, grid.n_z2, j),
            };
            for l in 0..grid.n_u {
                let u = match rng.as_mut() {
                    Some(rng) => jittered(0.0, u_bound, grid.n_u, l, rng),
                    None => node(0.0, u_bound, grid.n_u, l),
                };
                sup = sup.max(design.cross_coefficient(p, x1, z, u).abs());
            }
        }
        sup
    };
    let sup = par::max_over(grid.n_x1, grid.execution, row_sup);
    if !sup.is_finite() {
        return Err(Error::invalid("region", "cross coefficient is not finite on the region"));
    }
    Ok(0.5 * (1.0 + K_MARGIN) * sup)
}

/// Self-consistent `(k, ξ)` on a region: iterates `ξ ← select_xi(estimate_k(ξ))`
/// from ξ → 0. The cross coefficient grows with ξ, so the iteration either
/// settles on the smallest fixed point or runs away when none exists.
pub fn consistent_certificate(
    p: &ModelParams,
    a: f64,
    region: &Region,
    u_bound: f64,
    grid: &KGrid,
) -> Result<BacksteppingDesign> {
    const MAX_ITER: usize = 500;
    // evaluate the ξ-free part first
    let mut design = BacksteppingDesign::new(p, a, f64::MIN_POSITIVE, 0.0)?;
    let mut xi = f64::MIN_POSITIVE;
    for _ in 0..MAX_ITER {
        design = design.with_xi(xi);
        let k = estimate_k_with(p, &design, region, u_bound, grid)?;
        let next = select_xi(p, a, k)?;
        if !next.is_finite() || next > 1e300 {
            break;
        }
        let converged = (next - xi).abs() <= 1e-12 * next;
        xi = next;
        if converged {
            let design = design.with_xi(xi);
            let k = estimate_k_with(p, &design, region, u_bound, grid)?;
            return Ok(design.with_k(k));
        }
    }
    Err(Error::Precondition(
        "no self-consistent (k, xi) pair on this region; shrink the region or fix xi".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{params_strategy, sample_params};
    use crate::model::vector_field;
    use proptest::prelude::*;

    #[test]
    fn kappa_values() {
        let p = sample_params();
        let a = 2.0;
        assert_eq!(kappa(&p, a, 0.0).unwrap(), p.r * a / p.gamma);
        assert!(kappa(&p, a, a / p.b).unwrap().abs() < 1e-6);
        assert!(kappa(&p, 1.0, 0.0).is_err());
        let mut q = p;
        q.gamma = 0.0;
        assert!(matches!(kappa(&q, a, 0.0), Err(Error::DegenerateParameter(_))));
    }

    #[test]
    fn z2_values() {
        let p = sample_params();
        let a = 3.0;
        let on = State::new(1e4, kappa(&p, a, 1e4).unwrap(), 7.0);
        assert_eq!(z2(&p, a, &on).unwrap(), 0.0);
        let off = State::new(0.0, 0.0, 123.0);
        assert_eq!(z2(&p, a, &off).unwrap(), -p.r * a / p.gamma);
    }

    #[test]
    fn tau_values() {
        let p = sample_params();
        let bound = tau_lower_bound(&p).unwrap();
        let near = tau_from_a(&p, 1.0 + 1e-12).unwrap();
        assert!((near - bound).abs() <= 1e-11 * bound);
        assert!(tau_from_a(&p, 2.0).unwrap() > bound);
        assert_eq!(tau_from_a(&p, 4.0).unwrap(), 2.0 * tau_from_a(&p, 2.0).unwrap());
        let mut q = p;
        q.phi = q.rho;
        assert!(matches!(tau_from_a(&q, 2.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov(3.0, 0.0, 0.0), 0.0);
        assert_eq!(lyapunov(2.0, 1.0, 1.0), 1.5);
        assert_eq!(lyapunov(2.0, -1.0, 1.0), lyapunov(2.0, 1.0, -1.0));
    }

    #[test]
    fn lyapunov_rate_vanishes_at_origin() {
        let p = sample_params();
        let d = BacksteppingDesign::new(&p, 2.0, 10.0, 1.0).unwrap();
        let s = State::new(0.0, kappa(&p, 2.0, 0.0).unwrap(), 1e6);
        assert_eq!(lyapunov_rate(&p, &d, &s, 1e6).unwrap(), 0.0);
    }

    #[test]
    fn pd_condition_cases() {
        let p = sample_params();
        let d = BacksteppingDesign::new(&p, 2.0, 1694.6, 6.0).unwrap();
        let threshold: f64 = 36.0 / 1694.6;
        assert!((threshold - 0.021_244).abs() < 1e-6);
        assert!(d.ell_hat * d.m_hat > threshold);
        assert!(pd_condition(&d));

        let d0 = d.with_k(0.0);
        assert!(pd_condition(&d0));
        let edge = d.with_k((d.xi * d.ell_hat * d.m_hat).sqrt());
        assert!(!pd_condition(&edge));
    }

    #[test]
    fn select_xi_cases() {
        let p = sample_params();
        assert_eq!(select_xi(&p, 2.0, 0.0).unwrap(), 1.0);
        for k in [1e-3, 0.5, 6.0, 1e3] {
            let xi = select_xi(&p, 2.0, k).unwrap();
            let d = BacksteppingDesign::new(&p, 2.0, xi, k).unwrap();
            assert!(pd_condition(&d));
        }
        // ℓ̂ = r(a−1) = 0.085, m̂ = ρ−φ = 1
        let mut q = p;
        q.r = 0.85;
        q.rho = 1.1;
        let a = 1.1;
        let xi = select_xi(&q, a, 6.0).unwrap();
        assert!((xi - 4.0 * 36.0 / 0.085).abs() < 1e-9 * xi);
        assert!((xi - 1694.1).abs() < 0.1);

        let mut q = p;
        q.phi = q.rho;
        assert!(matches!(select_xi(&q, 2.0, 1.0), Err(Error::DegenerateParameter(_))));
    }

    #[test]
    fn estimate_k_degenerate_box() {
        let p = sample_params();
        let a = 2.0;
        let d = BacksteppingDesign::new(&p, a, 1694.6, 0.0).unwrap();
        let region = Region::new((0.0, 0.0), (0.0, 0.0));
        let k = estimate_k(&p, &d, &region, 0.0).unwrap();
        let b_hat = p.r * p.b / p.gamma;
        let c0 = b_hat * p.r * (1.0 - a) - b_hat * (p.phi - p.rho) - p.alpha * (p.r / p.gamma) * a;
        assert!((k - 0.55 * c0.abs()).abs() <= 1e-15 * k.max(1e-300));
    }

    #[test]
    fn estimate_k_rejects_bad_regions() {
        let p = sample_params();
        let d = BacksteppingDesign::new(&p, 2.0, 1.0, 0.0).unwrap();
        let empty = Region::new((1.0, 0.0), (0.0, 0.0));
        assert!(matches!(
            estimate_k(&p, &d, &empty, 0.0),
            Err(Error::InvalidInput { .. })
        ));
        let off_origin = Region::new((1.0, 2.0), (0.0, 0.0));
        assert!(estimate_k(&p, &d, &off_origin, 0.0).is_err());
    }

    // The cross coefficient is affine in (x1, z2, u), so its supremum on a box
    // sits at a vertex.
    fn vertex_oracle(p: &ModelParams, d: &BacksteppingDesign, r: &Region, u_bound: f64) -> f64 {
        let mut sup = 0.0f64;
        for x1 in [r.x1.0, r.x1.1] {
            for z in [r.z2.0, r.z2.1] {
                for u in [0.0, u_bound] {
                    sup = sup.max(d.cross_coefficient(p, x1, z, u).abs());
                }
            }
        }
        0.55 * sup
    }

    #[test]
    fn estimate_k_matches_vertex_oracle_and_is_order_independent() {
        let p = sample_params();
        let d = BacksteppingDesign::new(&p, 2.0, 1694.6, 0.0).unwrap();
        let region = Region::new((0.0, 5e3), (-1e5, 1e5));
        let u_bound = 2.6e6;
        let grid = KGrid {
            n_x1: 41,
            n_z2: 41,
            n_u: 5,
            ..KGrid::default()
        };
        let seq = estimate_k_with(&p, &d, &region, u_bound, &KGrid { execution: Execution::Sequential, ..grid }).unwrap();
        let par = estimate_k_with(&p, &d, &region, u_bound, &KGrid { execution: Execution::Parallel, ..grid }).unwrap();
        assert_eq!(seq, par);
        let oracle = vertex_oracle(&p, &d, &region, u_bound);
        assert!((seq - oracle).abs() <= 1e-12 * oracle);
        // same order as the recorded k = 6 on this neighbourhood
        assert!(seq > 0.6 && seq < 60.0, "k = {seq}");

        let jittered = estimate_k_with(&p, &d, &region, u_bound, &KGrid { jitter_seed: Some(7), ..grid }).unwrap();
        assert_eq!(jittered, seq, "corners are never jittered");
        let again = estimate_k_with(&p, &d, &region, u_bound, &KGrid { jitter_seed: Some(7), ..grid }).unwrap();
        assert_eq!(jittered, again);
    }

    #[test]
    fn consistent_certificate_small_and_large_regions() {
        let p = sample_params();
        let small = Region::new((0.0, 1e3), (-1e4, 1e4));
        let grid = KGrid {
            n_x1: 21,
            n_z2: 21,
            n_u: 3,
            ..KGrid::default()
        };
        let d = consistent_certificate(&p, 2.0, &small, 1e6, &grid).unwrap();
        assert!(pd_condition(&d));
        let k = estimate_k_with(&p, &d, &small, 1e6, &grid).unwrap();
        assert!((k - d.k).abs() <= 1e-9 * k);
        assert!((select_xi(&p, 2.0, d.k).unwrap() - d.xi).abs() <= 1e-9 * d.xi);

        let huge = Region::new((0.0, 1e9), (-5e5, 5e5));
        assert!(consistent_certificate(&p, 2.0, &huge, 1e6, &grid).is_err());
    }

    fn chain_rule(p: &ModelParams, d: &BacksteppingDesign, s: &State, u: f64) -> f64 {
        let f = vector_field(p, &State::new(s.x1, s.x2, u), d.tau, true).unwrap();
        let e = z2(p, d.a, s).unwrap();
        // ż2 = ẋ2 + (r·b/γ)·ẋ1
        let e_dot = f[1] + p.r * p.b / p.gamma * f[0];
        d.xi * s.x1 * f[0] + e * e_dot
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_loop_is_linear(p in params_strategy(), a in 1.001f64..10.0, x1 in 0.0f64..1e3) {
            let k = kappa(&p, a, x1).unwrap();
            let lhs = p.r * x1 * (1.0 - p.b * x1) - p.gamma * x1 * k;
            let rhs = p.r * (1.0 - a) * x1;
            let scale = (p.r * x1 * (1.0 + p.b * x1 + a)).max(f64::MIN_POSITIVE);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }

        #[test]
        fn lyapunov_rate_matches_chain_rule(
            p in params_strategy(),
            a in 1.001f64..10.0,
            xi in 1e-2f64..1e3,
            x in proptest::array::uniform3(0.0f64..10.0),
            tau in 0.0f64..10.0,
        ) {
            let d = BacksteppingDesign::with_tau(&p, a, tau, xi, 1.0).unwrap();
            let s = State::new(x[0], x[1], 0.0);
            let closed = lyapunov_rate(&p, &d, &s, x[2]).unwrap();
            let oracle = chain_rule(&p, &d, &s, x[2]);
            // magnitude of the largest individual product as the scale
            let e = z2(&p, a, &s).unwrap();
            let scale = (xi * x[0] * x[0]).max(e * e).max(1.0) * (1.0 + p.r + p.gamma + a + tau) * (1.0 + x[0] + x[2] + e.abs()) ;
            prop_assert!((closed - oracle).abs() <= 1e-8 * scale.max(closed.abs()), "{} vs {}", closed, oracle);
        }

        #[test]
        fn tau_cancels_isolated_term(p in params_strategy(), a in 1.001f64..10.0) {
            let mut p = p;
            if p.phi > p.rho {
                std::mem::swap(&mut p.phi, &mut p.rho);
            }
            prop_assume!(p.phi < p.rho);
            let d = BacksteppingDesign::new(&p, a, 1.0, 0.0).unwrap();
            prop_assert!(d.isolated_z2_coefficient(&p).abs() <= 1e-12);
        }

        #[test]
        fn enlarging_region_never_lowers_k(
            x_hi in 0.0f64..1e4, z_lo in -1e4f64..0.0, z_hi in 0.0f64..1e4,
            grow in proptest::array::uniform3(0.0f64..1e4), u in 0.0f64..1e5,
        ) {
            let p = sample_params();
            let d = BacksteppingDesign::new(&p, 2.0, 100.0, 0.0).unwrap();
            let grid = KGrid { n_x1: 5, n_z2: 5, n_u: 3, ..KGrid::default() };
            let inner = Region::new((0.0, x_hi), (z_lo, z_hi));
            let outer = Region::new((0.0, x_hi + grow[0]), (z_lo - grow[1], z_hi + grow[2]));
            let k_in = estimate_k_with(&p, &d, &inner, u, &grid).unwrap();
            let k_out = estimate_k_with(&p, &d, &outer, u, &grid).unwrap();
            prop_assert!(k_out >= k_in);
        }
    }
}
