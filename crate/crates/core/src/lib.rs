//! Age of information in Poisson bipolar networks with unit-buffer
//! replacement queues and slotted ALOHA: simulation, meta-distribution
//! solvers, closed-form analysis and a locally adaptive access policy.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod meta;
pub mod params;
pub mod policy;
pub mod quad;
pub mod rng;
pub mod sim;

pub use error::{AoiError, Result};
pub use params::{DerivedParams, Region, SystemParams};
