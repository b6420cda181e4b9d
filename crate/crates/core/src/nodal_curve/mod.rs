//! Rational curves of bidegree (m,2) with m−1 nodes through the 2m
//! configuration points. The implicit model is used for seeding and
//! smoothing; once on the Severi variety everything works with the
//! parametrization z ↦ ((U0:U1)(z), (V0:V1)(z)), where U has degree 2 and V
//! has degree m.

mod implicit;
mod param;
mod sections;
mod severi;

pub use implicit::*;
pub use param::*;
pub use sections::*;
pub use severi::*;

use crate::error::{Error, Result};
use crate::surface_config::PointConfig;

pub const MIN_RANK_GAP: f64 = 1e-7;

/// A member of W: the reducible seed with node `omit` smoothed, then
/// parametrized and polished onto the configuration points. A member too
/// close to the reducible seed (failed parametrization, or incidence rank
/// gap below `MIN_RANK_GAP`) is smoothed again with a larger step, up to
/// three times.
pub fn solve_member(cfg: &PointConfig, omit: usize, step: f64) -> Result<ParamCurve> {
    let seed = reducible_seed(cfg)?;
    let keep: Vec<usize> = (0..seed.nodes.len()).filter(|&i| i != omit).collect();
    let mut step = step;
    let mut last = None;
    for _ in 0..4 {
        let attempt = smooth_one_node(&seed, &cfg.points, &keep, step)
            .and_then(|smooth| parametrize(&smooth, &cfg.points))
            .and_then(|curve| polish_member(&curve, &cfg.points))
            .and_then(|curve| {
                let gap = rank_gap(&curve, &cfg.points);
                if gap < MIN_RANK_GAP {
                    Err(Error::RankDrop(format!("incidence rank gap {gap:.2e}")))
                } else {
                    Ok(curve)
                }
            });
        match attempt {
            Ok(curve) => return Ok(curve),
            Err(e) => last = Some(e),
        }
        step *= 4.0;
    }
    Err(last.unwrap())
}

/// Smoothing steps tried by `generic_member`.
pub const GENERIC_STEPS: [f64; 3] = [0.1, 0.3, 1.0];

/// A member away from the reducible seeds: among the members obtained by
/// smoothing each node with each of `GENERIC_STEPS`, the one whose maps are
/// furthest from having a common factor.
pub fn generic_member(cfg: &PointConfig) -> Result<ParamCurve> {
    let mut best: Option<ParamCurve> = None;
    let mut last = None;
    for omit in 0..cfg.m {
        for step in GENERIC_STEPS {
            match solve_member(cfg, omit, step) {
                Ok(c) => {
                    if best.as_ref().map_or(true, |b| c.coprimality() > b.coprimality()) {
                        best = Some(c);
                    }
                }
                Err(e) => last = Some(e),
            }
        }
    }
    best.ok_or_else(|| last.unwrap())
}
