//! Slope filtrations in exact arithmetic.
//!
//! The generic engine ([`category`]) computes semistability, universal
//! destabilizing subobjects and Harder–Narasimhan flags for any backend
//! implementing [`category::SlopeCategory`]. Newton polygons and their
//! calculus live in [`polygon`].

pub mod category;
pub mod degree;
pub mod diff;
pub mod error;
pub mod filtered;
pub mod harness;
pub mod lattice;
pub mod linalg;
pub mod phi;
pub mod polygon;
pub mod rational;
pub mod ramification;
pub mod series;
pub mod table;

pub use category::{Budget, Certificate, SlopeCategory};
pub use degree::{cmp_slope, DegreeValue, SlopeKey, Variant};
pub use error::{Result, SlopeError};
pub use polygon::{CombineMode, NewtonPolygon, Segment};
pub use rational::Q;
