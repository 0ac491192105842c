//! Finite-memory tracking of Markovian open quantum systems.
//!
//! The crate finds finite ensembles of pure states that a suitably monitored
//! system can be confined to (physically realizable ensembles), backs out the
//! adaptive local-oscillator settings that realize them, and checks both by
//! stochastic quantum-jump simulation.
//!
//! Module map:
//! - [`lindblad`]: master equations, Liouvillian, steady state, entropy, RK4.
//! - [`bloch`]: qubit Bloch form `ṙ = A r + b`.
//! - [`ensemble`]: PR checks, the analytic two-state construction, entropies.
//! - [`search`]: multistart Newton search for cyclic `K`-state ensembles.
//! - [`unravel`]: unravelling transformations and the adaptive back-out.
//! - [`simulate`]: jump trajectories with a classical `K`-state memory.
//! - [`fluorescence`]: the driven two-level atom scenario, sweeps and geometry.
//! - [`verify`]: the acceptance checks shared by the test suite and the CLI.

pub mod bloch;
pub mod ensemble;
pub mod error;
pub mod fluorescence;
pub mod lindblad;
pub mod linalg;
pub mod nnls;
pub mod rng;
pub mod search;
pub mod simulate;
pub mod stats;
pub mod unravel;
pub mod verify;

pub use error::{Error, Result};
