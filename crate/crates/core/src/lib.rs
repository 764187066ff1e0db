//! Simulator of a two-qubit NMR quantum computer started from a Werner
//! singlet state: pulse programs, relaxation, spectra and the Deutsch
//! algorithm.

pub mod acquisition;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod pulselang;
pub mod qcore;
pub mod verify;

pub use error::{Error, Result};
