//! Metric spaces with dilations and random walks.
//!
//! The crate builds concrete metric-measure spaces (Euclidean, Heisenberg,
//! snowflake, lattice), equips them with dilation structures and random-walk
//! kernels, and measures how far the rescaled pictures at `(x, ε)` are from
//! their tangent limits.

pub mod dilation;
pub mod error;
pub mod experiment;
pub mod heisenberg;
pub mod rng;
pub mod roughmap;
pub mod scalar;
pub mod space;
pub mod tangent;
pub mod walks;

pub use error::{Error, Result};
pub use scalar::{Dd, DoubleDouble, Real};
pub use space::{Point, Space, SpaceKind};
