//! Numerical simulator and library for measuring individual optical
//! density-matrix elements in the photon-number basis with two beam
//! splitters, a phase-shifted coherent reference and three photon counters.
//!
//! The crate is organized around the experiment:
//!
//! - [`fock`]: truncated Fock-space states and density matrices.
//! - [`optics`]: beam-splitter and phase-shifter unitaries, block by block.
//! - [`scheme`]: projection vectors, phase cycling and element reconstruction.
//! - [`imperfection`]: detector-efficiency smearing, Bernoulli inversion,
//!   finite-shot sampling and noisy-reference models.
//! - [`oracle`]: brute-force three-mode evolution used to validate every
//!   closed-form path.

pub mod cli;
pub mod config;
pub mod fock;
pub mod imperfection;
mod math;
pub mod optics;
pub mod oracle;
pub mod pipeline;
pub mod scheme;
pub mod tables;
