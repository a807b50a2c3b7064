//! Constructive machinery behind sparse domination of singular Radon transforms,
//! on discretized spaces of homogeneous type.

pub mod analysis;
pub mod cloud;
pub mod decomposition;
pub mod dyadic;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod operators;
pub mod poly;
pub mod sht;
pub mod sparse;
pub mod weights;

pub use cloud::Cloud;
pub use dyadic::{CubeId, DyadicCube, DyadicGrid};
pub use error::{Error, Result};
pub use sht::{DiscreteSHT, Metric};
