//! Minitwistor surfaces obtained by blowing up P¹×P¹, the Severi variety of
//! their (m−1)-nodal rational curves, and the Einstein–Weyl structure it
//! carries.

pub mod binary_forms;
pub mod biform;
pub mod conformal;
pub mod error;
pub mod geodesic_trace;
pub mod linalg;
pub mod nodal_curve;
pub mod picard_lattice;
pub mod real_slice;
pub mod surface_config;
pub mod weyl_fit;

pub use error::{Error, Result};
