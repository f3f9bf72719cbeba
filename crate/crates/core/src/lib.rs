//! Three-population CAR T / tumor model with an exogenous activation input.
//!
//! The state is `(x1, x2, x3)`: tumor cells, active CAR T cells and
//! non-active (memory) CAR T cells, all absolute cell counts. The crate
//! provides
//!
//! * [`model`]: parameters, state, the controlled vector field and its Jacobian,
//! * [`equilibria`]: the four uncontrolled equilibria and the controlled one,
//!   with eigenvalue-based local stability,
//! * [`control`]: the backstepping virtual control, the activation flux τ and
//!   the quadratic Lyapunov certificate,
//! * [`simulate`]: fixed and adaptive Runge–Kutta integration with dose
//!   events, and outcome classification (clearance, relapse, divergence).
//!
//! Grid-shaped work (certificate bound estimation, batches of scenarios) runs
//! on rayon when the `parallel` feature is enabled and falls back to plain
//! iteration otherwise; see [`par::Execution`].

pub mod control;
pub mod eigen;
pub mod equilibria;
mod error;
pub mod model;
pub mod par;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{ControlLaw, ControlMode, Mat3, ModelParams, State};
