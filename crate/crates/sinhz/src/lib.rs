//! Sinh-accelerated inverse Z-transform and its application to pricing
//! discretely monitored European and single-barrier options under Lévy
//! models.

pub mod contours;
pub mod dd;
pub mod error;
pub mod levelcurves;
pub mod levy;
pub mod oracles;
pub mod payoffs;
pub mod pricing;
pub mod quad;
pub mod wh;
pub mod zinv;

pub use error::{Error, Result};
