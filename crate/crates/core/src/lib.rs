//! Breather solutions of the quasilinear wave equation
//!
//! ```text
//! g(x) w_tt - w_xx + γ δ₀(x) (w_t³)_t = 0
//! ```
//!
//! found as minimizers of a quartic functional on odd, antisymmetric
//! Fourier-coefficient sequences. The crate is organised bottom-up:
//!
//! * [`param`] / [`media`]: admissible media and their exact rational conditions,
//! * [`floquet`]: closed-form decaying fundamental solutions `Φ_k` and the
//!   transfer/monodromy machinery for periodic media,
//! * [`seqspace`]: convolution algebra and norms on odd sequences,
//! * [`functional`]: the functional `J`, its gradient and the Euler–Lagrange residual,
//! * [`solver`]: seeded minimization, continuation in the truncation and multiplicity scans,
//! * [`reconstruct`]: space-time fields, decay fits and weak-form verification,
//! * [`cli`]: the `breather` command line front end.

pub mod cli;
pub mod floquet;
pub mod functional;
pub mod media;
pub mod param;
pub mod quadrature;
pub mod reconstruct;
pub mod seqspace;
pub mod solver;

pub use floquet::ModeProfile;
pub use functional::FunctionalSpec;
pub use media::Medium;
pub use seqspace::OddSequence;
pub use solver::{BreatherResult, SolveConfig};
