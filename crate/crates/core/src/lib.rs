//! Relativistic electron-spin toolkit: candidate spin operators, hydrogenic
//! ground states, spectral grids and laser-driven spin precession.

pub mod classical;
pub mod cli;
pub mod dirac;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod hydrogenic;
pub mod laser;
pub mod position;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
