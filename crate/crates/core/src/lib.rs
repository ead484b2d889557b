//! Atom-photon momentum entanglement produced by spontaneous emission from
//! a three-level atom with interfering decay channels.
//!
//! [`amplitude`] samples the steady-state joint amplitude, [`detection`]
//! measures the variance ratio `R`, [`schmidt`] the Schmidt number `K` and
//! phase entanglement, and [`report`] bundles them for one parameter point.

pub mod amplitude;
pub mod cli;
pub mod detection;
pub mod error;
pub mod gridfile;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod schmidt;

pub use error::{Error, ErrorClass, Result};
pub use model::{derive, AtomParams, DerivedParams};
