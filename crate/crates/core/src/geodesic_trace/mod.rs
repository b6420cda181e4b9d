//! Continuation of the distinguished subvarieties of W: the null surfaces
//! W_p, the geodesics W_{p,q}, the nodal loci W_p¹ and the null geodesics.

mod branch;
mod constraints;
mod svg;
mod trace;

pub use branch::*;
pub use constraints::*;
pub use svg::*;
pub use trace::*;
