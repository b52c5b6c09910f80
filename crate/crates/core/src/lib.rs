//! Optimal nested designs for multi-fidelity Gaussian-process emulation.
//!
//! Levels i = 0..=K carry increments δ_i ~ GP(0, λ^{2i}σ²Φ) with a shared
//! Matérn correlation Φ. The crate computes per-level sample counts under a
//! budget or a precision target, lays them out as nested Halton designs,
//! fits the levelwise kriging emulator, and benchmarks it on simulated truths.

pub mod allocator;
pub mod bench;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod lowdisc;
pub mod rng;

pub use error::{Error, Result};
