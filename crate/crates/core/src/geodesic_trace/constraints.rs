use serde::{Deserialize, Serialize};

use crate::binary_forms::{wronskian, BinaryForm, ProjPoint};
use crate::linalg::{CMat, CVec, C64};
use crate::nodal_curve::{incidence_system, ParamCurve, StateLayout};
use crate::surface_config::SurfacePoint;

/// An extra condition on members of W, with the parameters it tracks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IncidenceConstraint {
    /// φ(z) = p.
    ThroughPoint { p: SurfacePoint, z: ProjPoint },
    /// φ(s) = φ(t) = p.
    NodeAt { p: SurfacePoint, s: ProjPoint, t: ProjPoint },
    /// φ(z) = p with tangent direction (du : dv) in the affine charts of p.
    TangentAt { p: SurfacePoint, direction: ProjPoint, z: ProjPoint },
}

impl IncidenceConstraint {
    pub fn residual_dim(&self) -> usize {
        match self {
            Self::ThroughPoint { .. } => 2,
            Self::NodeAt { .. } => 4,
            Self::TangentAt { .. } => 3,
        }
    }

    pub fn codim(&self) -> usize {
        match self {
            Self::ThroughPoint { .. } => 1,
            _ => 2,
        }
    }

    pub fn point(&self) -> SurfacePoint {
        match self {
            Self::ThroughPoint { p, .. } | Self::NodeAt { p, .. } | Self::TangentAt { p, .. } => *p,
        }
    }

    pub fn params(&self) -> Vec<ProjPoint> {
        match self {
            Self::ThroughPoint { z, .. } | Self::TangentAt { z, .. } => vec![*z],
            Self::NodeAt { s, t, .. } => vec![*s, *t],
        }
    }

    /// The same constraint with its tracked parameters replaced.
    pub fn with_params(&self, params: &[ProjPoint]) -> Self {
        match self {
            Self::ThroughPoint { p, .. } => Self::ThroughPoint { p: *p, z: params[0] },
            Self::NodeAt { p, .. } => Self::NodeAt { p: *p, s: params[0], t: params[1] },
            Self::TangentAt { p, direction, .. } => Self::TangentAt { p: *p, direction: *direction, z: params[0] },
        }
    }
}

/// Constraints with their tracked parameters replaced, in order.
pub fn rebind(constraints: &[IncidenceConstraint], tracked: &[ProjPoint]) -> Vec<IncidenceConstraint> {
    let mut k = 0;
    constraints
        .iter()
        .map(|c| {
            let n = c.params().len();
            let out = c.with_params(&tracked[k..k + n]);
            k += n;
            out
        })
        .collect()
}

fn chart_sign(chart: usize) -> f64 {
    if chart == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Tangent direction (du : dv) of the curve at parameter z, in the affine
/// charts of the surface point `at`.
pub fn tangent_direction(curve: &ParamCurve, z: &ProjPoint, at: &SurfacePoint) -> ProjPoint {
    let (row_u, row_v) = tangency_parts(&curve.u, &curve.v, z, at);
    ProjPoint::new(row_u, row_v).normalized()
}

/// (s_U W_U Vc², s_V W_V Uc²) at z: the chart velocities of u and v up to the
/// common factor 1/(Uc² Vc²).
fn tangency_parts(u: &[BinaryForm; 2], v: &[BinaryForm; 2], z: &ProjPoint, at: &SurfacePoint) -> (C64, C64) {
    let (cu, cv) = (at.u.chart(), at.v.chart());
    let uc = u[cu].eval(z);
    let vc = v[cv].eval(z);
    let wu = wronskian(&u[0], &u[1]).eval(z);
    let wv = wronskian(&v[0], &v[1]).eval(z);
    (chart_sign(cu) * wu * vc * vc, chart_sign(cv) * wv * uc * uc)
}

fn tangency_row(layout: &StateLayout, x: &CVec, j: usize, at: &SurfacePoint, dir: &ProjPoint) -> C64 {
    let (u, v) = layout.forms(x);
    let z = layout.param(x, j);
    let (du, dv) = tangency_parts(&u, &v, &z, at);
    let d = dir.normalized();
    du * d.z1 - dv * d.z0
}

/// Base incidences plus the extra constraints, on a layout whose parameters
/// are the base preimages followed by the tracked parameters.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub layout: StateLayout,
    pub points: Vec<SurfacePoint>,
    pub constraints: Vec<IncidenceConstraint>,
    pairs: Vec<(usize, SurfacePoint)>,
    tangencies: Vec<(usize, SurfacePoint, ProjPoint)>,
}

impl ConstrainedSystem {
    pub fn new(curve: &ParamCurve, points: &[SurfacePoint], constraints: &[IncidenceConstraint]) -> Self {
        let mut layout = StateLayout::for_curve(curve);
        let mut pairs: Vec<(usize, SurfacePoint)> = points.iter().copied().enumerate().collect();
        let mut tangencies = Vec::new();
        for c in constraints {
            let p = c.point();
            for z in c.params() {
                let j = layout.push_param(z.chart());
                pairs.push((j, p));
                if let IncidenceConstraint::TangentAt { direction, .. } = c {
                    tangencies.push((j, p, *direction));
                }
            }
        }
        ConstrainedSystem { layout, points: points.to_vec(), constraints: constraints.to_vec(), pairs, tangencies }
    }

    pub fn n_base(&self) -> usize {
        self.points.len()
    }

    pub fn codim(&self) -> usize {
        self.constraints.iter().map(|c| c.codim()).sum()
    }

    pub fn tracked(&self) -> Vec<ProjPoint> {
        self.constraints.iter().flat_map(|c| c.params()).collect()
    }

    pub fn pack(&self, curve: &ParamCurve, tracked: &[ProjPoint]) -> CVec {
        let mut params = curve.base_preimages.clone();
        params.extend_from_slice(tracked);
        self.layout.pack(&curve.u, &curve.v, &params)
    }

    pub fn tracked_at(&self, x: &CVec) -> Vec<ProjPoint> {
        (self.n_base()..self.layout.charts.len()).map(|j| self.layout.param(x, j).normalized()).collect()
    }

    /// Curve at x with refreshed node pairs.
    pub fn curve_at(&self, x: &CVec) -> crate::Result<ParamCurve> {
        let mut c = self.layout.unpack(x, self.n_base());
        c.refresh_nodes()?;
        Ok(c)
    }

    pub fn eval(&self, x: &CVec) -> (CVec, CMat) {
        let (r, j) = incidence_system(&self.layout, x, &self.pairs);
        if self.tangencies.is_empty() {
            return (r, j);
        }
        let nt = self.tangencies.len();
        let mut res = CVec::zeros(r.len() + nt);
        res.rows_mut(0, r.len()).copy_from(&r);
        let mut jac = CMat::zeros(r.len() + nt, x.len());
        jac.rows_mut(0, r.len()).copy_from(&j);
        for (k, (j, at, dir)) in self.tangencies.iter().enumerate() {
            let row = r.len() + k;
            res[row] = tangency_row(&self.layout, x, *j, at, dir);
            // central differences; the row is a polynomial in x
            for col in 0..x.len() {
                let h = 1e-6 * (1.0 + x[col].norm());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[col] += h;
                xm[col] -= h;
                jac[(row, col)] = (tangency_row(&self.layout, &xp, *j, at, dir) - tangency_row(&self.layout, &xm, *j, at, dir)) / (2.0 * h);
            }
        }
        (res, jac)
    }
}
