//! Sparse control sequences for discrete-time nonlinear systems.
//!
//! The terminal condition `x[N] = target` of a discrete system is treated as
//! an under-determined equation `P(u) = 0` in the stacked control `u`.
//! Newton iterations whose directions minimise `||w||_1` over the linearised
//! equation add at most `m` nonzero control components per step, which gives
//! sparse, low-effort controls.
//!
//! * [`dynamics`]: the system abstraction and bundled models.
//! * [`shooting`]: residual and Jacobian assembly.
//! * [`lsolve`]: minimal-norm directions (simplex for l1, QR for l2).
//! * [`newton`]: the Newton drivers and support refinement.
//! * [`bounds`]: convergence conditions and a-priori estimates.
//! * [`config`] and [`cli`]: the command-line front end.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod dynamics;
mod error;
pub mod lsolve;
pub mod newton;
pub mod shooting;

pub use error::{Error, Result};
