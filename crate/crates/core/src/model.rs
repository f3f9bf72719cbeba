//! Model parameters, state, and the controlled vector field.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major 3×3 matrix.
pub type Mat3 = [[f64; 3]; 3];

/// Rate constants of the tumor / active / non-active CAR T model.
///
/// Units: `r`, `phi`, `rho`, `epsilon`, `mu` are per day; `b` is per cell;
/// `gamma`, `theta`, `alpha` are per (cell·day).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Maximum tumor growth rate.
    pub r: f64,
    /// Inverse tumor carrying capacity.
    pub b: f64,
    /// Cytotoxic coefficient of active CAR T cells.
    pub gamma: f64,
    /// Active CAR T proliferation rate.
    pub phi: f64,
    /// Active CAR T reduction rate (death plus differentiation).
    pub rho: f64,
    /// Tumor-driven conversion of non-active into active CAR T cells.
    pub theta: f64,
    /// Tumor-modulated inhibition of active CAR T cells.
    pub alpha: f64,
    /// Conversion of active into non-active CAR T cells.
    pub epsilon: f64,
    /// Death rate of non-active CAR T cells.
    pub mu: f64,
}

impl ModelParams {
    pub const FIELD_NAMES: [&'static str; 9] = [
        "r", "b", "gamma", "phi", "rho", "theta", "alpha", "epsilon", "mu",
    ];

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.r,
            self.b,
            self.gamma,
            self.phi,
            self.rho,
            self.theta,
            self.alpha,
            self.epsilon,
            self.mu,
        ]
    }

    pub fn from_array(v: [f64; 9]) -> Self {
        let [r, b, gamma, phi, rho, theta, alpha, epsilon, mu] = v;
        Self {
            r,
            b,
            gamma,
            phi,
            rho,
            theta,
            alpha,
            epsilon,
            mu,
        }
    }

    /// Mutable access by field name, used by parameter sweeps.
    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "r" => &mut self.r,
            "b" => &mut self.b,
            "gamma" => &mut self.gamma,
            "phi" => &mut self.phi,
            "rho" => &mut self.rho,
            "theta" => &mut self.theta,
            "alpha" => &mut self.alpha,
            "epsilon" => &mut self.epsilon,
            "mu" => &mut self.mu,
            _ => return None,
        })
    }

    /// All fields finite and non-negative, `b > 0` and `gamma > 0`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::FIELD_NAMES.iter().zip(self.as_array()) {
            if !v.is_finite() {
                return Err(Error::invalid(format!("params.{name}"), "must be finite"));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("params.{name}"), "must be non-negative"));
            }
        }
        if self.b == 0.0 {
            return Err(Error::invalid("params.b", "must be positive (finite carrying capacity)"));
        }
        if self.gamma == 0.0 {
            return Err(Error::invalid("params.gamma", "must be positive"));
        }
        Ok(())
    }

    /// Net linear growth rate of active CAR T cells, `phi - rho`.
    #[inline]
    pub fn net_active_rate(&self) -> f64 {
        self.phi - self.rho
    }

    /// Tumor carrying capacity `1/b`.
    pub fn carrying_capacity(&self) -> Result<f64> {
        if self.b == 0.0 {
            return Err(Error::DegenerateParameter(
                "b = 0: no finite carrying capacity".into(),
            ));
        }
        Ok(1.0 / self.b)
    }
}

/// Cell counts: tumor, active CAR T, non-active CAR T.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl State {
    pub const fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn from_array([x1, x2, x3]: [f64; 3]) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Finite and non-negative components.
    pub fn validate(&self, name: &str) -> Result<()> {
        for (i, v) in self.as_array().into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name}.x{}", i + 1), "must be finite"));
            }
            if v < 0.0 {
                return Err(Error::invalid(format!("{name}.x{}", i + 1), "must be non-negative"));
            }
        }
        Ok(())
    }
}

impl std::ops::Add for State {
    type Output = State;

    fn add(self, rhs: State) -> State {
        State::new(self.x1 + rhs.x1, self.x2 + rhs.x2, self.x3 + rhs.x3)
    }
}

/// How the activation flux τ is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlMode {
    /// τ = 0, the original model.
    Off,
    /// A fixed flux in cells/day.
    ConstantTau { tau: f64 },
    /// τ derived from the backstepping gain `a > 1`.
    Backstepping { a: f64 },
}

/// Control input selection plus whether τ is withdrawn from the non-active pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    #[serde(flatten)]
    pub mode: ControlMode,
    #[serde(default = "default_drains_pool")]
    pub tau_drains_pool: bool,
}

fn default_drains_pool() -> bool {
    true
}

impl Default for ControlLaw {
    fn default() -> Self {
        Self::off()
    }
}

impl ControlLaw {
    pub fn off() -> Self {
        Self {
            mode: ControlMode::Off,
            tau_drains_pool: true,
        }
    }

    pub fn constant(tau: f64, tau_drains_pool: bool) -> Self {
        Self {
            mode: ControlMode::ConstantTau { tau },
            tau_drains_pool,
        }
    }

    pub fn backstepping(a: f64, tau_drains_pool: bool) -> Self {
        Self {
            mode: ControlMode::Backstepping { a },
            tau_drains_pool,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            ControlMode::Off => Ok(()),
            ControlMode::ConstantTau { tau } => {
                if !tau.is_finite() || tau < 0.0 {
                    Err(Error::invalid("law.tau", "must be finite and >= 0"))
                } else {
                    Ok(())
                }
            }
            ControlMode::Backstepping { a } => {
                if !a.is_finite() || a <= 1.0 {
                    Err(Error::invalid("law.a", "backstepping gain must be finite and > 1"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// The constant flux this law applies under parameters `p`.
    pub fn tau(&self, p: &ModelParams) -> Result<f64> {
        self.validate()?;
        match self.mode {
            ControlMode::Off => Ok(0.0),
            ControlMode::ConstantTau { tau } => Ok(tau),
            ControlMode::Backstepping { a } => crate::control::tau_from_a(p, a),
        }
    }

    pub fn gain(&self) -> Option<f64> {
        match self.mode {
            ControlMode::Backstepping { a } => Some(a),
            _ => None,
        }
    }
}

/// Unchecked right-hand side; the integrators call this on every stage.
#[inline]
pub(crate) fn rhs(p: &ModelParams, x: [f64; 3], tau: f64, drains_pool: bool) -> [f64; 3] {
    let [x1, x2, x3] = x;
    let activation = p.theta * x3 * x1;
    let drain = if drains_pool { tau } else { 0.0 };
    [
        p.r * x1 * (1.0 - p.b * x1) - p.gamma * x2 * x1,
        (p.phi - p.rho) * x2 - p.alpha * x2 * x1 + activation + tau,
        -p.mu * x3 - activation + p.epsilon * x2 - drain,
    ]
}

fn check_inputs(p: &ModelParams, s: &State) -> Result<()> {
    if let Some(i) = p.as_array().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(
            format!("params.{}", ModelParams::FIELD_NAMES[i]),
            "must be finite",
        ));
    }
    if !s.is_finite() {
        return Err(Error::invalid("state", "must be finite"));
    }
    Ok(())
}

/// Time derivative of the state under a constant activation flux `tau`.
///
/// `drains_pool` selects whether τ is also withdrawn from the non-active pool.
pub fn vector_field(p: &ModelParams, s: &State, tau: f64, drains_pool: bool) -> Result<[f64; 3]> {
    check_inputs(p, s)?;
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::invalid("tau", "must be finite and >= 0"));
    }
    Ok(rhs(p, s.as_array(), tau, drains_pool))
}

/// Analytic Jacobian of the vector field (τ is additive and drops out).
pub fn jacobian(p: &ModelParams, s: &State) -> Result<Mat3> {
    check_inputs(p, s)?;
    let State { x1, x2, x3 } = *s;
    Ok([
        [p.r * (1.0 - 2.0 * p.b * x1) - p.gamma * x2, -p.gamma * x1, 0.0],
        [
            p.theta * x3 - p.alpha * x2,
            p.phi - p.rho - p.alpha * x1,
            p.theta * x1,
        ],
        [-p.theta * x3, p.epsilon, -p.mu - p.theta * x1],
    ])
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sample_params() -> ModelParams {
        ModelParams {
            r: 0.25,
            b: 1e-9,
            gamma: 1e-6,
            phi: 0.1,
            rho: 0.2,
            theta: 1e-8,
            alpha: 1e-11,
            epsilon: 0.3,
            mu: 0.06,
        }
    }

    pub(crate) fn params_strategy() -> impl Strategy<Value = ModelParams> {
        proptest::array::uniform9(1e-3f64..1.0).prop_map(ModelParams::from_array)
    }

    // Written out directly from the three rate equations, without sharing code
    // with `rhs`.
    fn literal(p: &ModelParams, x1: f64, x2: f64, x3: f64) -> [f64; 3] {
        let tumor_growth = p.r * x1 * (1.0 - p.b * x1);
        let killing = p.gamma * x2 * x1;
        let proliferation = (p.phi - p.rho) * x2;
        let conversion = p.theta * x3 * x1;
        let inhibition = p.alpha * x2 * x1;
        let memory_formation = p.epsilon * x2;
        let memory_death = p.mu * x3;
        [
            tumor_growth - killing,
            proliferation + conversion - inhibition,
            memory_formation - conversion - memory_death,
        ]
    }

    #[test]
    fn origin_and_carrying_capacity_are_equilibria() {
        let p = sample_params();
        assert_eq!(vector_field(&p, &State::zero(), 0.0, true).unwrap(), [0.0; 3]);
        // 1/b is not exact in binary, so the logistic term is only zero to roundoff
        let cap = State::new(1.0 / p.b, 0.0, 0.0);
        let f = vector_field(&p, &cap, 0.0, true).unwrap();
        assert!(f[0].abs() <= 1e-15 * p.r * cap.x1);
        assert_eq!([f[1], f[2]], [0.0; 2]);
    }

    #[test]
    fn jacobian_special_points() {
        let p = sample_params();
        let j0 = jacobian(&p, &State::zero()).unwrap();
        assert_eq!(
            j0,
            [[p.r, 0.0, 0.0], [0.0, p.phi - p.rho, 0.0], [0.0, p.epsilon, -p.mu]]
        );
        let j1 = jacobian(&p, &State::new(1.0 / p.b, 0.0, 0.0)).unwrap();
        let cap = 1.0 / p.b;
        assert!((j1[0][0] + p.r).abs() <= 1e-15);
        assert_eq!(j1[0][1..], [-p.gamma * cap, 0.0]);
        assert_eq!(j1[1], [0.0, p.phi - p.rho - p.alpha * cap, p.theta * cap]);
        assert_eq!(j1[2], [0.0, p.epsilon, -p.mu - p.theta * cap]);
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = sample_params();
        let bad = State::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            vector_field(&p, &bad, 0.0, true),
            Err(Error::InvalidInput { .. })
        ));
        assert!(jacobian(&p, &bad).is_err());
        let mut q = p;
        q.mu = f64::INFINITY;
        assert!(vector_field(&q, &State::zero(), 0.0, true).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = sample_params();
        assert!(p.validate().is_ok());
        p.b = 0.0;
        assert!(p.validate().is_err());
        let mut p = sample_params();
        p.theta = -1.0;
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("params.theta"));
    }

    #[test]
    fn control_law_validation() {
        assert!(ControlLaw::backstepping(1.0, true).validate().is_err());
        assert!(ControlLaw::constant(-1.0, true).validate().is_err());
        let p = sample_params();
        assert_eq!(ControlLaw::off().tau(&p).unwrap(), 0.0);
        assert_eq!(ControlLaw::constant(3.0, false).tau(&p).unwrap(), 3.0);
    }

    proptest! {
        #[test]
        fn matches_literal_equations(
            p in params_strategy(),
            x in proptest::array::uniform3(0.0f64..1e6),
        ) {
            let got = vector_field(&p, &State::from_array(x), 0.0, true).unwrap();
            let want = literal(&p, x[0], x[1], x[2]);
            // individual terms reach ~1e12 while their sum may cancel
            let big = x.iter().fold(1.0f64, |m, v| m.max(*v));
            let tol = 1e-14 * big * big;
            for i in 0..3 {
                prop_assert!((got[i] - want[i]).abs() <= tol);
            }
        }

        #[test]
        fn tau_enters_linearly(
            p in params_strategy(),
            x in proptest::array::uniform3(0.0f64..1e6),
            tau in 0.0f64..1e5,
            drains in any::<bool>(),
        ) {
            let s = State::from_array(x);
            let with = vector_field(&p, &s, tau, drains).unwrap();
            let without = vector_field(&p, &s, 0.0, drains).unwrap();
            prop_assert_eq!(with[0] - without[0], 0.0);
            // exact up to the final rounding of each sum
            let d2 = with[1] - without[1];
            let d3 = with[2] - without[2];
            let ulp = |v: f64| v.abs().max(tau) * 4.0 * f64::EPSILON;
            prop_assert!((d2 - tau).abs() <= ulp(with[1]));
            let expect3 = if drains { -tau } else { 0.0 };
            prop_assert!((d3 - expect3).abs() <= ulp(with[2]));
        }

        #[test]
        fn boundary_sign_conditions(
            p in params_strategy(),
            x in proptest::array::uniform3(0.0f64..1e6),
        ) {
            let [x1, x2, x3] = x;
            let f = vector_field(&p, &State::new(0.0, x2, x3), 0.0, true).unwrap();
            prop_assert_eq!(f[0], 0.0);
            let f = vector_field(&p, &State::new(x1, 0.0, x3), 0.0, true).unwrap();
            prop_assert!(f[1] >= 0.0);
            let f = vector_field(&p, &State::new(x1, x2, 0.0), 0.0, true).unwrap();
            prop_assert!(f[2] >= 0.0);
        }

        #[test]
        fn trivial_residuals_are_exact(p in params_strategy()) {
            prop_assert_eq!(vector_field(&p, &State::zero(), 0.0, true).unwrap(), [0.0; 3]);
            let cap = State::new(1.0 / p.b, 0.0, 0.0);
            let f = vector_field(&p, &cap, 0.0, true).unwrap();
            // 1 - b·(1/b) can round to ±ulp
            prop_assert!(f[0].abs() <= 4.0 * f64::EPSILON * p.r / p.b);
            prop_assert_eq!(f[1], 0.0);
            prop_assert_eq!(f[2], 0.0);
        }
    }
}
