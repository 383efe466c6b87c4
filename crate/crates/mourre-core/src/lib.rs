//! Pseudospectral laboratory for Schrodinger operators `H = Delta + V` and conjugate operators
//! `A_u = (u(p).q + q.u(p)) / 2`: multiplier calculus on a periodic lattice, commutator
//! expansions, Mourre windows, weighted resolvent sweeps and wave-operator traces.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]

extern crate alloc;

pub mod commutator;
pub mod conjugate;
pub mod error;
pub mod fft;
pub mod hamiltonian;
pub mod lap;
pub mod lattice;
pub mod linop;
pub mod mourre;
pub mod norms;
pub mod potentials;
pub mod report;
pub mod scattering;

pub use error::{Error, Result};
pub use lattice::{Grid, GridFunction};
pub use linop::{LinOp, Operator};

/// Complex double.
pub type C64 = num_complex::Complex<f64>;
