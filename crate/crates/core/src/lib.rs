//! Finite-difference laboratory for the compressible Navier-Stokes-Fourier
//! system with inhomogeneous Dirichlet-Neumann boundary conditions, plus a
//! runtime regularity monitor (minimum principles, energy balances, control
//! functionals, and a scale of norms).

pub mod config;
pub mod constitutive;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod extension;
pub mod field;
pub mod grid;
pub mod mms;
pub mod monitor;
pub mod norms;
pub mod ops;
pub mod output;
pub mod runner;
pub mod stepper;
pub mod transport;

pub use error::{NsfError, Result};
