//! Local charts on W, polynomial surrogates of the conformal metric and the
//! Weyl connection fitted from traced geodesics, and the Einstein–Weyl
//! residual.

mod chart;
mod fit;
mod geometry;
mod poly;

pub use chart::*;
pub use fit::*;
pub use geometry::*;
pub use poly::*;
