use serde::{Deserialize, Serialize};

use super::constraints::{rebind, tangent_direction, ConstrainedSystem, IncidenceConstraint};
use crate::binary_forms::{disc_quadratic, ProjPoint};
use crate::conformal::{self, Delta};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};
use crate::nodal_curve::{self, gauge_basis, tangent_space, NewtonOptions, ParamCurve};
use crate::surface_config::SurfacePoint;

/// Relative discriminant |b² − 4ac| / (|a|² + |b|² + |c|²) below which a
/// tangent direction counts as null.
pub const NULL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NullType {
    Null,
    NonNull,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub newton_iters: usize,
    pub step: f64,
    pub node_count: usize,
    pub null_type: NullType,
    pub null_ratio: f64,
    /// Smallest distance from a tracked parameter to a node preimage, a base
    /// preimage or another tracked parameter.
    pub preimage_gap: f64,
    /// Dimension of the constrained solution set modulo gauge.
    pub solution_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Completed,
    BranchPoint { gap: f64 },
    StepFailure(String),
    NodeCountMismatch { expected: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub constraints: Vec<IncidenceConstraint>,
    pub states: Vec<ParamCurve>,
    /// Tracked parameters of the constraints at each state.
    pub tracked: Vec<Vec<ProjPoint>>,
    pub arc_params: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub stop: StopReason,
}

#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub steps: usize,
    pub h: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_corrector: usize,
    pub node_check_every: usize,
    pub branch_gap: f64,
    /// Orientation of the first step (coefficient part), projected onto the
    /// tangent line.
    pub initial_direction: Option<CVec>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            steps: 50,
            h: 0.02,
            h_min: 1e-6,
            h_max: 0.2,
            max_corrector: 10,
            node_check_every: 10,
            branch_gap: 1e-4,
            initial_direction: None,
        }
    }
}

fn corrector_options(max_iter: usize) -> NewtonOptions {
    NewtonOptions { tol: 1e-11, max_iter, max_step: 0.5 }
}

/// Orthonormal basis of the constrained tangent space modulo gauge.
pub fn constrained_tangent(sys: &ConstrainedSystem, x: &CVec) -> CMat {
    let (_, jac) = sys.eval(x);
    tangent_space(&jac, &gauge_basis(&sys.layout, x))
}

/// Newton-correct x onto the constraints with min-norm steps.
pub fn project(sys: &ConstrainedSystem, x: CVec) -> Result<CVec> {
    Ok(nodal_curve::gauss_newton(|y| sys.eval(y), x, NewtonOptions { tol: 1e-12, ..NewtonOptions::default() })?.0)
}

/// Correct a predicted point, holding the components along the gauge and
/// along `frame` fixed.
pub fn correct(sys: &ConstrainedSystem, pred: &CVec, frame: &CMat, max_iter: usize) -> Result<(CVec, usize)> {
    let g = linalg::orthonormalize(&gauge_basis(&sys.layout, pred), 1e-12);
    let lin = linalg::vstack(&[&g.adjoint(), &frame.adjoint()]);
    let system = |y: &CVec| {
        let (r, j) = sys.eval(y);
        let extra = &lin * (y - pred);
        let res = CVec::from_iterator(r.len() + extra.len(), r.iter().chain(extra.iter()).copied());
        (res, linalg::vstack(&[&j, &lin]))
    };
    nodal_curve::gauss_newton(system, pred.clone(), corrector_options(max_iter))
}

/// Relative discriminant of the θ of a state-vector direction.
pub fn null_ratio(curve: &ParamCurve, sys: &ConstrainedSystem, dir: &CVec) -> Result<f64> {
    let tv = conformal::tangent_vector(curve, &Delta::from_state(&sys.layout, dir))?;
    let th = tv.theta;
    let scale = th.a.norm_sqr() + th.b.norm_sqr() + th.c.norm_sqr();
    Ok(if scale > 0.0 { disc_quadratic(&th).norm() / scale } else { 0.0 })
}

/// Smallest distance from a tracked parameter to a node preimage, a base
/// preimage or another tracked parameter. The node pair pinned by a
/// node_at constraint is not a collision.
pub fn preimage_gap(curve: &ParamCurve, constraints: &[IncidenceConstraint]) -> f64 {
    let same_pair = |(a, b): &(ProjPoint, ProjPoint), s: &ProjPoint, t: &ProjPoint| {
        (a.dist(s) < 1e-6 && b.dist(t) < 1e-6) || (a.dist(t) < 1e-6 && b.dist(s) < 1e-6)
    };
    let mut nodes = Vec::new();
    for pair in &curve.node_pairs {
        let pinned = constraints.iter().any(|c| matches!(c, IncidenceConstraint::NodeAt { s, t, .. } if same_pair(pair, s, t)));
        if !pinned {
            nodes.extend([pair.0, pair.1]);
        }
    }
    let tracked: Vec<(usize, ProjPoint)> = constraints.iter().enumerate().flat_map(|(k, c)| c.params().into_iter().map(move |z| (k, z))).collect();
    let mut gap = f64::INFINITY;
    for (i, (k, z)) in tracked.iter().enumerate() {
        for w in nodes.iter().chain(&curve.base_preimages) {
            gap = gap.min(z.dist(w));
        }
        for (l, w) in &tracked[i + 1..] {
            let pinned_pair = k == l && matches!(constraints[*k], IncidenceConstraint::NodeAt { .. });
            if !pinned_pair {
                gap = gap.min(z.dist(w));
            }
        }
    }
    gap
}

fn needs_rechart(sys: &ConstrainedSystem, x: &CVec) -> bool {
    (0..sys.layout.charts.len()).any(|j| x[sys.layout.param_offset(j)].norm() > 2.0)
}

fn coeff_part(sys: &ConstrainedSystem, t: &CVec) -> CVec {
    t.rows(0, sys.layout.coeff_len()).into_owned()
}

/// Unit tangent of a one-dimensional solution set, oriented along `prev`
/// (compared on the coefficient part).
fn oriented_tangent(sys: &ConstrainedSystem, x: &CVec, prev: Option<&CVec>) -> Result<CVec> {
    let t = constrained_tangent(sys, x);
    if t.ncols() != 1 {
        return Err(Error::RankDrop(format!("solution set of dimension {} instead of 1", t.ncols())));
    }
    let mut t = t.column(0).into_owned();
    if let Some(p) = prev {
        let ip = coeff_part(sys, &t).dotc(p);
        if ip.norm() > 0.0 {
            t *= ip.conj() / ip.norm();
        }
    }
    Ok(t)
}

fn node_check(curve: &ParamCurve) -> Result<usize> {
    let implicit = nodal_curve::implicitize(curve)?;
    let found = nodal_curve::find_nodes(&implicit.form)?;
    let images = curve.node_images();
    let matched = images.iter().filter(|p| found.iter().any(|q| q.dist(p) < 1e-6)).count();
    if found.len() != images.len() || matched != images.len() {
        return Err(Error::NodeCountMismatch { expected: images.len(), found: found.len() });
    }
    Ok(found.len())
}

/// Pseudo-arclength continuation of the one-dimensional set of members
/// satisfying `constraints` (total codimension 2), starting at `base`.
pub fn trace(base: &ParamCurve, points: &[SurfacePoint], constraints: &[IncidenceConstraint], opts: &TraceOptions) -> Result<TraceResult> {
    let m = base.m();
    let mut sys = ConstrainedSystem::new(base, points, constraints);
    if sys.codim() != 2 {
        return Err(Error::DegenerateInput(format!("a trace needs codimension 2, got {}", sys.codim())));
    }
    let mut x = project(&sys, sys.pack(base, &sys.tracked()))?;
    let mut curve = sys.curve_at(&x)?;
    if curve.node_pairs.len() + 1 != m {
        return Err(Error::NodeCountMismatch { expected: m - 1, found: curve.node_pairs.len() });
    }
    let mut t = oriented_tangent(&sys, &x, opts.initial_direction.as_ref())?;
    let diag = |curve: &ParamCurve, sys: &ConstrainedSystem, x: &CVec, t: &CVec, iters: usize, h: f64| -> Result<StepDiagnostics> {
        let ratio = null_ratio(curve, sys, t)?;
        Ok(StepDiagnostics {
            newton_iters: iters,
            step: h,
            node_count: curve.node_pairs.len(),
            null_type: if ratio < NULL_TOL { NullType::Null } else { NullType::NonNull },
            null_ratio: ratio,
            preimage_gap: preimage_gap(curve, &rebind(&sys.constraints, &sys.tracked_at(x))),
            solution_dim: constrained_tangent(sys, x).ncols(),
        })
    };
    let mut out = TraceResult {
        constraints: constraints.to_vec(),
        states: vec![curve.clone()],
        tracked: vec![sys.tracked_at(&x)],
        arc_params: vec![0.0],
        diagnostics: vec![diag(&curve, &sys, &x, &t, 0, 0.0)?],
        stop: StopReason::Completed,
    };
    let mut h = opts.h;
    let mut arc = 0.0;
    let mut gap = out.diagnostics[0].preimage_gap;
    'outer: for step in 1..=opts.steps {
        let (y, iters) = loop {
            if h < opts.h_min {
                out.stop = StopReason::StepFailure(format!("step below {:.1e} at state {}", opts.h_min, step - 1));
                break 'outer;
            }
            let pred = &x + &t * C64::new(h, 0.0);
            let frame = CMat::from_column_slice(t.len(), 1, t.as_slice());
            match correct(&sys, &pred, &frame, opts.max_corrector) {
                Ok((y, it)) => match sys.curve_at(&y) {
                    Ok(c) if c.node_pairs.len() + 1 == m => break (y, it),
                    _ => h *= 0.5,
                },
                Err(_) => h *= 0.5,
            }
        };
        curve = sys.curve_at(&y)?;
        x = y;
        arc += h;
        let prev = coeff_part(&sys, &t);
        if needs_rechart(&sys, &x) {
            let tracked = sys.tracked_at(&x);
            let cons = rebind(&sys.constraints, &tracked);
            sys = ConstrainedSystem::new(&curve, points, &cons);
            x = sys.pack(&curve, &tracked);
        }
        t = match oriented_tangent(&sys, &x, Some(&prev)) {
            Ok(t) => t,
            Err(e) => {
                out.stop = StopReason::StepFailure(e.to_string());
                break;
            }
        };
        let mut d = diag(&curve, &sys, &x, &t, iters, h)?;
        if opts.node_check_every > 0 && step % opts.node_check_every == 0 {
            match node_check(&curve) {
                Ok(n) => d.node_count = n,
                Err(Error::NodeCountMismatch { expected, found }) => {
                    out.stop = StopReason::NodeCountMismatch { expected, found };
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let new_gap = d.preimage_gap;
        out.states.push(curve.clone());
        out.tracked.push(sys.tracked_at(&x));
        out.arc_params.push(arc);
        out.diagnostics.push(d);
        if new_gap < opts.branch_gap && gap >= opts.branch_gap {
            out.stop = StopReason::BranchPoint { gap: new_gap };
            break;
        }
        gap = new_gap;
        if iters > 6 {
            h *= 0.5;
        } else if iters <= 2 {
            h = (h * 1.3).min(opts.h_max);
        }
    }
    Ok(out)
}

fn through(curve: &ParamCurve, p: &SurfacePoint) -> Result<IncidenceConstraint> {
    let z = curve.preimage_of(p).ok_or_else(|| Error::DegenerateInput("point is not on the curve".into()))?;
    Ok(IncidenceConstraint::ThroughPoint { p: *p, z })
}

/// W_{p,q}: members through p and q.
pub fn trace_geodesic(base: &ParamCurve, points: &[SurfacePoint], p: &SurfacePoint, q: &SurfacePoint, opts: &TraceOptions) -> Result<TraceResult> {
    if p.dist(q) < 1e-9 {
        return Err(Error::DegenerateInput("p and q coincide".into()));
    }
    trace(base, points, &[through(base, p)?, through(base, q)?], opts)
}

/// W_p¹: members with a node at p (a node of `base`).
pub fn trace_nodal_locus(base: &ParamCurve, points: &[SurfacePoint], p: &SurfacePoint, opts: &TraceOptions) -> Result<TraceResult> {
    let (s, t) = base
        .node_pairs
        .iter()
        .find(|(s, _)| base.eval(s).dist(p) < 1e-8)
        .copied()
        .ok_or_else(|| Error::DegenerateInput("p is not a node of the curve".into()))?;
    trace(base, points, &[IncidenceConstraint::NodeAt { p: *p, s, t }], opts)
}

/// The null geodesic of members through p with the tangent direction of
/// `base` at p.
pub fn trace_null_geodesic(base: &ParamCurve, points: &[SurfacePoint], p: &SurfacePoint, opts: &TraceOptions) -> Result<TraceResult> {
    let z = base.preimage_of(p).ok_or_else(|| Error::DegenerateInput("point is not on the curve".into()))?;
    let direction = tangent_direction(base, &z, p);
    trace(base, points, &[IncidenceConstraint::TangentAt { p: *p, direction, z }], opts)
}

/// A 2-parameter patch of W_p over a square grid in its tangent plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullSurface {
    pub p: SurfacePoint,
    /// Row-major grid of states, `n × n`.
    pub n: usize,
    pub states: Vec<ParamCurve>,
    pub tracked: Vec<ProjPoint>,
    /// |det| / ‖G‖² of the metric restricted to the tangent plane.
    pub degeneracy: Vec<f64>,
    /// Image of the null plane of each state under null_plane_to_point.
    pub plane_points: Vec<SurfacePoint>,
}

/// Metric of the tangent plane at x and the point its null plane maps to.
fn plane_metric(curve: &ParamCurve, sys: &ConstrainedSystem, x: &CVec) -> Result<(f64, SurfacePoint)> {
    let t = constrained_tangent(sys, x);
    if t.ncols() != 2 {
        return Err(Error::RankDrop(format!("W_p tangent of dimension {}", t.ncols())));
    }
    let tv: Vec<_> = (0..2)
        .map(|k| conformal::tangent_vector(curve, &Delta::from_state(&sys.layout, &t.column(k).into_owned())))
        .collect::<Result<_>>()?;
    let g = |i: usize, j: usize| conformal::polarization(&tv[i].theta, &tv[j].theta);
    let det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    let norm2 = g(0, 0).norm_sqr() + g(0, 1).norm_sqr() + g(1, 0).norm_sqr() + g(1, 1).norm_sqr();
    let mut plane = conformal::NullPlane { span: [tv[0].clone(), tv[1].clone()], witness_root: ProjPoint::new(ONE, ONE) };
    plane.witness_root = conformal::common_root(&plane)?;
    let (pt, _) = conformal::null_plane_to_point(curve, &plane)?;
    Ok((det.norm() / norm2, pt))
}

pub fn trace_null_surface(base: &ParamCurve, points: &[SurfacePoint], p: &SurfacePoint, n: usize, h: f64) -> Result<NullSurface> {
    let cons = [through(base, p)?];
    let sys = ConstrainedSystem::new(base, points, &cons);
    let x0 = project(&sys, sys.pack(base, &sys.tracked()))?;
    let frame = constrained_tangent(&sys, &x0);
    if frame.ncols() != 2 {
        return Err(Error::RankDrop(format!("W_p tangent of dimension {}", frame.ncols())));
    }
    let mut out = NullSurface { p: *p, n, states: Vec::new(), tracked: Vec::new(), degeneracy: Vec::new(), plane_points: Vec::new() };
    let half = (n as f64 - 1.0) / 2.0;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = ((i as f64 - half) * h, (j as f64 - half) * h);
            let pred = &x0 + frame.column(0) * C64::new(a, 0.0) + frame.column(1) * C64::new(b, 0.0);
            let (x, _) = correct(&sys, &pred, &frame, 20)?;
            let curve = sys.curve_at(&x)?;
            let (deg, pt) = plane_metric(&curve, &sys, &x)?;
            out.tracked.push(sys.tracked_at(&x)[0]);
            out.states.push(curve);
            out.degeneracy.push(deg);
            out.plane_points.push(pt);
        }
    }
    Ok(out)
}

/// Size of the differential of F ↦ F(p) on T_C W relative to the size of
/// the tangent variations of F. It vanishes when p is a node of C, where W_p
/// is singular.
pub fn wp_gradient(curve: &ParamCurve, p: &SurfacePoint) -> Result<f64> {
    let basis = conformal::tangent_basis(curve)?;
    let u = [&curve.u[0], &curve.u[1]];
    let v = [&curve.v[0], &curve.v[1]];
    let mut num = 0.0;
    let mut den = 0.0;
    for t in &basis {
        let d = &t.delta;
        let df = nodal_curve::resultant_derivative(u, v, [&d.u[0], &d.u[1]], [&d.v[0], &d.v[1]]);
        let pu = p.u.normalized();
        let pv = p.v.normalized();
        num += df.eval(&pu, &pv).norm_sqr();
        den += df.norm().powi(2);
    }
    Ok((num / den).sqrt())
}

/// Tangent vectors of a trace at each state, as θ classes.
pub fn trace_tangent_theta(trace: &TraceResult, points: &[SurfacePoint], k: usize) -> Result<crate::binary_forms::QuadraticClass> {
    let curve = &trace.states[k];
    let cons = rebind(&trace.constraints, &trace.tracked[k]);
    let sys = ConstrainedSystem::new(curve, points, &cons);
    let x = sys.pack(curve, &sys.tracked());
    let t = constrained_tangent(&sys, &x);
    if t.ncols() == 0 {
        return Err(Error::RankDrop("empty tangent".into()));
    }
    conformal::theta_of(curve, &Delta::from_state(&sys.layout, &t.column(0).into_owned()))
}
