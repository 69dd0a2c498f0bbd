//! Numerics for planar neutral saddles: the polynomial flow near the fixed
//! point, exact exit times via a first integral, their asymptotic
//! expansions, return-time tails and the scalar renewal sequence built from
//! them.

pub mod asymptotics;
pub mod error;
pub mod local_flow;
pub mod numeric;
pub mod params;
pub mod renewal;
pub mod return_stats;

pub use error::{Error, Result};
pub use params::{derive_constants, DerivedConstants, DomainRect, MeasureClass, SaddleParams, Violation};
