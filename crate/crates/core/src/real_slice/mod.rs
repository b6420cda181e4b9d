//! Real structures: the antipodal involution on the normalization, the
//! conditions 1°–3° on a real member, real tangent coordinates, the positive
//! definite real metric, real members and their real geodesics.

mod check;
mod ew;
mod geodesic;
mod member;
mod structure;

pub use check::*;
pub use ew::*;
pub use geodesic::*;
pub use member::*;
pub use structure::*;
