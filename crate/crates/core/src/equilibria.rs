//! Equilibria of the uncontrolled and controlled model and their local stability.

use num_complex::Complex64;

use crate::eigen::eigenvalues_3x3;
use crate::model::{jacobian, ModelParams, State};
use crate::{Error, Result};

/// Default half-width of the marginal band on the spectral abscissa, per day.
pub const DEFAULT_EIG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumKind {
    /// The origin.
    Trivial,
    /// Tumor at carrying capacity, no CAR T cells.
    CarryingCapacity,
    /// Coexistence point from the smaller real root of the reduced quadratic.
    Interior1,
    /// Coexistence point from the larger real root.
    Interior2,
    /// Tumor-free point sustained by a constant activation flux.
    Controlled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub point: State,
    pub kind: EquilibriumKind,
    /// All components finite and non-negative.
    pub admissible: bool,
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
}

impl EquilibriumReport {
    /// Largest real part of the spectrum.
    pub fn spectral_abscissa(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Classify by the largest real part against a marginal band `±tol`.
pub fn classify(eigenvalues: &[Complex64; 3], tol: f64) -> Stability {
    let max_re = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_re < -tol {
        Stability::AsymptoticallyStable
    } else if max_re > tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

fn report(p: &ModelParams, point: State, kind: EquilibriumKind, tol: f64) -> Result<EquilibriumReport> {
    let eigenvalues = eigenvalues_3x3(&jacobian(p, &point)?);
    Ok(EquilibriumReport {
        point,
        kind,
        admissible: point.is_finite() && point.as_array().iter().all(|&v| v >= 0.0),
        eigenvalues,
        stability: classify(&eigenvalues, tol),
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !tol.is_finite() || tol < 0.0 {
        return Err(Error::invalid("tol_eig", "must be finite and >= 0"));
    }
    Ok(())
}

/// The origin and the carrying-capacity point `(1/b, 0, 0)`.
pub fn trivial_equilibria(p: &ModelParams, tol: f64) -> Result<[EquilibriumReport; 2]> {
    check_tol(tol)?;
    let cap = p.carrying_capacity()?;
    Ok([
        report(p, State::zero(), EquilibriumKind::Trivial, tol)?,
        report(p, State::new(cap, 0.0, 0.0), EquilibriumKind::CarryingCapacity, tol)?,
    ])
}

/// Coefficients `(c2, c1, c0)` of the quadratic in the tumor count whose real
/// roots are the coexistence equilibria.
///
/// From ẋ1 = 0 with x1 ≠ 0, `x2 = r(1 − b·x1)/γ`; from ẋ3 = 0,
/// `x3 = ε·x2/(μ + θ·x1)`. Substituting into ẋ2 = 0 and dividing by x2:
/// `−αθ·x1² + [(φ−ρ)θ − αμ + εθ]·x1 + (φ−ρ)μ = 0`.
pub fn interior_quadratic(p: &ModelParams) -> (f64, f64, f64) {
    let net = p.net_active_rate();
    (
        -p.alpha * p.theta,
        net * p.theta - p.alpha * p.mu + p.epsilon * p.theta,
        net * p.mu,
    )
}

/// Coexistence equilibria, possibly inadmissible.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorEquilibria {
    pub reports: Vec<EquilibriumReport>,
    /// The reduced equation was identically degenerate (no isolated roots), or
    /// a root could not be mapped back to a finite state.
    pub degenerate: bool,
}

/// Real roots of `c2·x² + c1·x + c0`, ascending. `None` when every `x` solves it
/// or when no isolated root exists because both `c2` and `c1` vanish.
fn real_roots(c2: f64, c1: f64, c0: f64) -> Option<Vec<f64>> {
    if c2 == 0.0 {
        if c1 == 0.0 {
            return None;
        }
        return Some(vec![-c0 / c1]);
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Some(Vec::new());
    }
    let q = -0.5 * (c1 + disc.sqrt().copysign(c1));
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / c2, c0 / q]
    };
    for x in roots.iter_mut() {
        // one Newton step on the quadratic
        let slope = 2.0 * c2 * *x + c1;
        if slope != 0.0 {
            let step = (c2 * *x * *x + c1 * *x + c0) / slope;
            if step.is_finite() {
                *x -= step;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    Some(roots)
}

/// Map a tumor-count root back onto the full state.
pub fn interior_point(p: &ModelParams, x1: f64) -> State {
    let x2 = p.r * (1.0 - p.b * x1) / p.gamma;
    let x3 = p.epsilon * x2 / (p.mu + p.theta * x1);
    State::new(x1, x2, x3)
}

/// Coexistence equilibria from the reduced quadratic, flagged rather than
/// filtered when they leave the positive orthant.
pub fn interior_equilibria(p: &ModelParams, tol: f64) -> Result<InteriorEquilibria> {
    check_tol(tol)?;
    if p.gamma == 0.0 {
        return Err(Error::DegenerateParameter("gamma = 0".into()));
    }
    let (c2, c1, c0) = interior_quadratic(p);
    let Some(roots) = real_roots(c2, c1, c0) else {
        return Ok(InteriorEquilibria {
            reports: Vec::new(),
            degenerate: true,
        });
    };
    let kinds = [EquilibriumKind::Interior1, EquilibriumKind::Interior2];
    let mut reports = Vec::with_capacity(2);
    let mut degenerate = false;
    for (x1, kind) in roots.into_iter().zip(kinds) {
        let point = interior_point(p, x1);
        if !point.is_finite() {
            degenerate = true;
            continue;
        }
        reports.push(report(p, point, kind, tol)?);
    }
    Ok(InteriorEquilibria { reports, degenerate })
}

/// The tumor-free equilibrium `(0, x̄2, x̄3)` under constant flux `tau`, with τ
/// also drawn from the non-active pool.
pub fn controlled_equilibrium(p: &ModelParams, tau: f64, tol: f64) -> Result<EquilibriumReport> {
    controlled_equilibrium_with(p, tau, true, tol)
}

/// As [`controlled_equilibrium`], choosing whether τ drains the non-active pool.
///
/// `x̄2 = τ/(ρ − φ)`; `x̄3 = (ε·x̄2 − τ)/μ` when draining and `ε·x̄2/μ` otherwise.
/// In the draining case x̄3 is negative (flagged inadmissible) when ε < ρ − φ.
pub fn controlled_equilibrium_with(
    p: &ModelParams,
    tau: f64,
    drains_pool: bool,
    tol: f64,
) -> Result<EquilibriumReport> {
    check_tol(tol)?;
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid("tau", "must be finite and >= 0"));
    }
    if p.phi >= p.rho {
        return Err(Error::Precondition(format!(
            "controlled equilibrium needs phi < rho (phi = {}, rho = {})",
            p.phi, p.rho
        )));
    }
    if p.mu == 0.0 {
        return Err(Error::DegenerateParameter(
            "mu = 0: non-active pool has no steady state".into(),
        ));
    }
    let x2 = tau / (p.rho - p.phi);
    let drain = if drains_pool { tau } else { 0.0 };
    let x3 = (p.epsilon * x2 - drain) / p.mu;
    report(p, State::new(0.0, x2, x3), EquilibriumKind::Controlled, tol)
}

/// All uncontrolled equilibria plus the bistability flag.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub equilibria: Vec<EquilibriumReport>,
    /// Carrying-capacity point and an admissible coexistence point both
    /// asymptotically stable.
    pub bistable: bool,
    pub interior_degenerate: bool,
}

pub fn analyze(p: &ModelParams, tol: f64) -> Result<StabilityReport> {
    let [origin, capacity] = trivial_equilibria(p, tol)?;
    let interior = interior_equilibria(p, tol)?;
    let bistable = capacity.stability == Stability::AsymptoticallyStable
        && interior
            .reports
            .iter()
            .any(|r| r.admissible && r.stability == Stability::AsymptoticallyStable);
    let mut equilibria = vec![origin, capacity];
    equilibria.extend(interior.reports);
    Ok(StabilityReport {
        equilibria,
        bistable,
        interior_degenerate: interior.degenerate,
    })
}
