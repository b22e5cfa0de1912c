//! Katětov towers, Urysohn-type spaces and generic actions of groups on them.

pub mod action;
pub mod agent;
pub mod distance_set;
pub mod finperm;
pub mod genericity;
pub mod group;
pub mod metric;
pub mod scalar;
pub mod tower;
pub mod unbounded;

pub use distance_set::DistanceSet;
pub use scalar::Scalar;
