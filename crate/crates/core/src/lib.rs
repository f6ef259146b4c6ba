//! Nodal intersections of random toral Laplace eigenfunctions with planar curves.

pub mod chaos;
pub mod crossings;
pub mod curve;
pub mod error;
pub mod field;
pub mod kacrice;
pub mod lattice;
pub mod quadrature;

pub use error::{Error, Result};
