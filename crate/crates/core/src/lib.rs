//! Simulation of a one-bit Brownian memory held in a duty-ratio controlled
//! double-well optical trap, its feedback erasure under noisy position
//! measurement, and the stochastic-work / mutual-information bookkeeping
//! around it.
//!
//! Units follow the optical-tweezer convention used throughout: positions
//! in nm, forces in pN, energies in pN·nm internally and k_BT in reports,
//! time in seconds.

pub mod analysis;
pub mod calibration;
pub mod config;
pub mod dynamics;
pub mod energetics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod measurement;
pub mod potential;
pub mod protocol;
mod quadrature;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
