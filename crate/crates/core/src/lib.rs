//! Exact stationarity classification for MPCCs and MPVCs with affine or polynomial data.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod combiner;
pub mod cones;
pub mod error;
pub mod instance;
pub mod lp;
pub mod poly;
pub mod rational;
pub mod stationarity;

pub use error::{Error, Result};
pub use instance::{AlphaPattern, CandidatePoint, DVector, IndexSets, Instance, ProblemKind};
pub use poly::Polynomial;
pub use rational::Rational;
