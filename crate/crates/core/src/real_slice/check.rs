use serde::{Deserialize, Serialize};

use super::structure::RealStructure;
use crate::binary_forms::ProjPoint;
use crate::linalg::{c, C64};
use crate::nodal_curve::{implicitize, ParamCurve};

/// Tolerance for invariance and node fixing.
pub const REALITY_TOL: f64 = 1e-7;
/// Smallest admissible distance between φ(z) and σφ(z) away from the nodes.
pub const REAL_POINT_TOL: f64 = 1e-6;
/// Parameters closer than this to a node preimage are not searched for real
/// points.
const NODE_EXCLUSION: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealityReport {
    /// σ(C) = C.
    pub invariant: bool,
    /// 1° σ(C) = C fixing every node; 2° σ exchanges the branches at every
    /// node; 3° C has no real points other than the nodes.
    pub conditions: [bool; 3],
    pub invariance_residual: f64,
    pub node_fixed_residual: f64,
    pub branch_swap: Vec<bool>,
    /// Smallest dist(φ(z), σφ(z)) found away from the node preimages.
    pub min_real_gap: f64,
}

impl RealityReport {
    pub fn passes(&self) -> bool {
        self.invariant && self.conditions.iter().all(|&b| b)
    }
}

/// Points of the sphere on a latitude-longitude grid, avoiding the poles.
fn sphere_grid(nlat: usize, nlon: usize) -> Vec<Vec<ProjPoint>> {
    (0..nlat)
        .map(|i| {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / nlat as f64;
            (0..nlon)
                .map(|j| {
                    let ph = std::f64::consts::TAU * j as f64 / nlon as f64;
                    let (s, co) = ((th / 2.0).sin(), (th / 2.0).cos());
                    ProjPoint::new(c(co, 0.0), C64::from_polar(s, ph))
                })
                .collect()
        })
        .collect()
}

fn shifted(z: &ProjPoint, dx: f64, dy: f64) -> ProjPoint {
    let chart = z.chart();
    let q = z.in_chart(chart);
    if chart == 0 {
        ProjPoint::new(q.z0, q.z1 + c(dx, dy))
    } else {
        ProjPoint::new(q.z0 + c(dx, dy), q.z1)
    }
}

/// Local minimum of f by compass search from z.
fn pattern_search(f: &dyn Fn(&ProjPoint) -> f64, z: ProjPoint, step: f64) -> (ProjPoint, f64) {
    let mut z = z;
    let mut best = f(&z);
    let mut h = step;
    while h > 1e-10 {
        let mut moved = false;
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let w = shifted(&z, dx, dy);
            let v = f(&w);
            if v < best {
                best = v;
                z = w;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (z, best)
}

/// Check conditions 1°–3° for σ lifted to the antipodal map of the
/// normalization.
pub fn reality_check(curve: &ParamCurve, structure: &RealStructure) -> RealityReport {
    let grid = sphere_grid(16, 32);
    let sigma_image = |z: &ProjPoint| structure.apply(&curve.eval(z));
    let invariance_residual = match implicitize(curve) {
        Ok(imp) => grid.iter().flatten().map(|z| imp.residual(&sigma_image(z))).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    let invariant = invariance_residual < REALITY_TOL;
    let images = curve.node_images();
    let node_fixed_residual = images.iter().map(|p| structure.apply(p).dist(p)).fold(0.0, f64::max);

    let eps = 1e-3;
    let branch_swap: Vec<bool> = curve
        .node_pairs
        .iter()
        .map(|(s, t)| {
            if !invariant {
                return false;
            }
            let q = sigma_image(&shifted(s, eps, 0.0));
            let (zs, rs) = curve.polish_preimage(s, &q);
            let (zt, rt) = curve.polish_preimage(t, &q);
            let near_t = rt < REALITY_TOL && zt.dist(t) < 10.0 * eps;
            let near_s = rs < REALITY_TOL && zs.dist(s) < 10.0 * eps;
            near_t && !near_s
        })
        .collect();

    let excluded = |z: &ProjPoint| curve.node_pairs.iter().any(|(s, t)| z.dist(s) < NODE_EXCLUSION || z.dist(t) < NODE_EXCLUSION);
    let gap = |z: &ProjPoint| sigma_image(z).dist(&curve.eval(z));
    let values: Vec<Vec<f64>> = grid.iter().map(|row| row.iter().map(|z| if excluded(z) { f64::INFINITY } else { gap(z) }).collect()).collect();
    let (nlat, nlon) = (grid.len(), grid[0].len());
    let mut min_real_gap = f64::INFINITY;
    for i in 0..nlat {
        for j in 0..nlon {
            let v = values[i][j];
            if !v.is_finite() {
                continue;
            }
            let mut neighbours = vec![values[i][(j + 1) % nlon], values[i][(j + nlon - 1) % nlon]];
            if i > 0 {
                neighbours.push(values[i - 1][j]);
            }
            if i + 1 < nlat {
                neighbours.push(values[i + 1][j]);
            }
            if neighbours.iter().all(|&w| v <= w) {
                let (z, d) = pattern_search(&gap, grid[i][j], 0.05);
                let d = if excluded(&z) { v } else { d };
                min_real_gap = min_real_gap.min(d);
            }
        }
    }
    RealityReport {
        invariant,
        conditions: [
            invariant && node_fixed_residual < REALITY_TOL,
            invariant && branch_swap.iter().all(|&b| b),
            invariant && min_real_gap > REAL_POINT_TOL,
        ],
        invariance_residual,
        node_fixed_residual,
        branch_swap,
        min_real_gap,
    }
}
