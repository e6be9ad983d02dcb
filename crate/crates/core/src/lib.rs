//! Numerical core for self-consistent quantum transport in a one-dimensional
//! resonant tunneling diode.
//!
//! Internal units are electron-volts, nanometres and femtoseconds. The
//! conversion from SI happens once, in [`model::PhysicalParams`], and every
//! other module works with the scaled quantities.

pub mod dtbc;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oma_stationary;
pub mod oma_transient;
pub mod peak;
pub mod poisson;
pub mod quadrature;
pub mod resonance;
pub mod scattering;
pub mod stationary;
pub mod transient;

pub use error::{Error, Result};
pub use num_complex::Complex64;
