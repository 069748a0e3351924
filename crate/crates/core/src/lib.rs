//! Simulation library for low-complexity Rydberg receiver arrays.
//!
//! The receiver front end is modeled as a structured analog combiner
//! `W_RF = W_LO * W_LC`, where `W_LO` holds one adjustable local-oscillator
//! phase per Cell & LO block (plus fixed intra-block offsets) and `W_LC` is
//! the 0/1 fiber-combiner adjacency that sums groups of probe beams onto a
//! shared photodiode. Hybrid combiners are designed by alternating
//! minimization against the fully digital optimum, or in closed form when
//! the photodiode groups nest inside the LO blocks.
//!
//! Modules:
//! - [`channel`]: clustered mmWave channels and array responses.
//! - [`architecture`]: reuse-architecture matrices.
//! - [`optimizer`]: combiner design (alternating minimization, direct solver).
//! - [`evaluation`]: spectral efficiency and Monte-Carlo experiments.
//! - [`validation`]: the fast self-check suite behind `rydberg-sim validate`.

pub mod architecture;
pub mod channel;
pub mod error;
pub mod evaluation;
pub mod optimizer;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};

use nalgebra::{Complex, DMatrix};

/// Complex double-precision scalar.
pub type C64 = Complex<f64>;

/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;

/// Squared Frobenius norm of a complex matrix.
pub(crate) fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
