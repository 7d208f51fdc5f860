//! Device-uncharacterized quantum-discord witness.
//!
//! Two parties each pick one of `n` dichotomic (±1 outcome) measurements on
//! their half of a shared bipartite state. From the resulting expectation
//! values the covariance matrix
//!
//! ```text
//! Q[x][y] = <A_x ⊗ B_y> - <A_x><B_y>
//! ```
//!
//! is formed, and the witness is `W = det Q`. Every zero-discord
//! (classical-quantum) state gives `W = 0` no matter which measurements are
//! used, so a nonzero `W` certifies discord without trusting the devices.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex/real kernels (Kronecker product, Hermitian
//!   eigendecomposition, SVD, partial trace, determinant).
//! * [`states`]: density matrices, the generalized Gell-Mann basis and the
//!   Bloch decomposition producing `S = T - s_a s_bᵗ`.
//! * [`measurements`]: dichotomic observables, detection-efficiency loss and
//!   synthesis of the two-qubit optimal measurements.
//! * [`witness`]: `Q`, `W`, the two-qubit upper bound and a geometric-discord
//!   oracle.
//! * [`simulator`]: round-by-round Monte-Carlo of the experiment with
//!   plug-in estimation and bootstrap intervals.
//! * [`io`] and [`cli`]: JSON/CSV file formats and the command-line front end.

pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod measurements;
pub mod simulator;
pub mod states;
pub mod witness;

pub use error::{Error, Result};

/// Numerical tolerances shared by every module.
pub mod tol {
    /// Maximum entrywise deviation from Hermiticity (and from unit trace).
    pub const HERM_TOL: f64 = 1e-10;
    /// Eigenvalues above `-PSD_TOL` count as non-negative.
    pub const PSD_TOL: f64 = 1e-10;
    /// General equality slack for derived quantities.
    pub const EQ_TOL: f64 = 1e-9;
}
