use super::member::RealMember;
use crate::error::{Error, Result};
use crate::geodesic_trace::{
    constrained_tangent, null_ratio, preimage_gap, rebind, ConstrainedSystem, IncidenceConstraint, NullType, StepDiagnostics, StopReason, TraceOptions,
    TraceResult, NULL_TOL,
};
use crate::linalg::{self, CMat, CVec, C64};
use crate::nodal_curve::{gauge_basis, gauss_newton, NewtonOptions, ParamCurve};
use crate::surface_config::SurfacePoint;

/// Distance below which p counts as σ-fixed.
const FIXED_TOL: f64 = 1e-9;

/// The constraints cutting out the real geodesic through p: p and σp on the
/// member, or a node at p when p is real.
pub fn real_geodesic_constraints(member: &RealMember, p: &SurfacePoint) -> Result<Vec<IncidenceConstraint>> {
    let curve = &member.curve;
    let sp = member.structure.apply(p);
    if sp.dist(p) < FIXED_TOL {
        let (s, t) = curve
            .node_pairs
            .iter()
            .find(|(s, _)| curve.eval(s).dist(p) < 1e-8)
            .copied()
            .ok_or_else(|| Error::DegenerateInput("a real point of a real member must be a node".into()))?;
        return Ok(vec![IncidenceConstraint::NodeAt { p: *p, s, t }]);
    }
    let z = curve.preimage_of(p).ok_or_else(|| Error::DegenerateInput("point is not on the curve".into()))?;
    Ok(vec![IncidenceConstraint::ThroughPoint { p: *p, z }, IncidenceConstraint::ThroughPoint { p: sp, z: z.antipode() }])
}

struct RealTracer<'a> {
    member: &'a RealMember,
    sys: ConstrainedSystem,
}

impl RealTracer<'_> {
    fn nc(&self) -> usize {
        self.sys.layout.coeff_len()
    }

    /// Orthonormal coefficient parts of the gauge directions at x, and the
    /// full gauge directions.
    fn gauge(&self, x: &CVec) -> (CMat, CMat) {
        let full = gauge_basis(&self.sys.layout, x);
        (linalg::orthonormalize(&full.rows(0, self.nc()).into_owned(), 1e-12), full)
    }

    fn sigma(&self, yc: &CVec) -> CVec {
        let mut y = CVec::zeros(self.sys.layout.len());
        y.rows_mut(0, yc.len()).copy_from(yc);
        self.member.structure.act_on_coeffs(&self.sys.layout, &y, self.member.data.lambdas)
    }

    /// Unit tangent with σ-fixed coefficient part, orthogonal to the gauge
    /// on coefficients, oriented along `prev`.
    fn tangent(&self, x: &CVec, prev: Option<&CVec>) -> Result<CVec> {
        let t = constrained_tangent(&self.sys, x);
        if t.ncols() != 1 {
            return Err(Error::RankDrop(format!("real geodesic of dimension {} instead of 1", t.ncols())));
        }
        let mut t = t.column(0).into_owned();
        let nc = self.nc();
        let (g, full) = self.gauge(x);
        let gc = full.rows(0, nc).into_owned();
        let coef = linalg::lstsq(&gc, &(g.clone() * (g.adjoint() * t.rows(0, nc))), 1e-13);
        t -= &full * coef;
        let tc = t.rows(0, nc).into_owned();
        let (mu, _) = linalg::fit_scalar(self.sigma(&tc).as_slice(), tc.as_slice());
        t *= C64::from_polar(1.0, mu.arg() / 2.0);
        t /= C64::new(t.rows(0, nc).norm(), 0.0);
        if let Some(p) = prev {
            if t.rows(0, nc).dotc(p).re < 0.0 {
                t = -t;
            }
        }
        Ok(t)
    }

    /// Correct onto the constraints with the gauge and the tangent fixed on
    /// the coefficient part only, which keeps the corrected state σ-fixed.
    fn correct(&self, x: &CVec, pred: &CVec, t: &CVec, max_iter: usize) -> Result<(CVec, usize)> {
        let nc = self.nc();
        let (g, _) = self.gauge(x);
        let len = self.sys.layout.len();
        let mut lin = CMat::zeros(6, len);
        lin.view_mut((0, 0), (5, nc)).copy_from(&g.adjoint());
        lin.view_mut((5, 0), (1, nc)).copy_from(&t.rows(0, nc).adjoint());
        let system = |y: &CVec| {
            let (r, j) = self.sys.eval(y);
            let extra = &lin * (y - pred);
            let res = CVec::from_iterator(r.len() + extra.len(), r.iter().chain(extra.iter()).copied());
            (res, linalg::vstack(&[&j, &lin]))
        };
        gauss_newton(system, pred.clone(), NewtonOptions { tol: 1e-12, max_iter, max_step: 0.5 })
    }

    fn reality(&self, x: &CVec) -> f64 {
        let yc = x.rows(0, self.nc()).into_owned();
        (self.sigma(&yc) - &yc).norm() / yc.norm()
    }
}

/// Continuation of the σ-fixed members through p and σp (or with a node at
/// p when p is real). Every state is checked for σ-invariance of its
/// coefficients; a state that drifts off the real slice stops the trace.
pub fn real_geodesic(member: &RealMember, p: &SurfacePoint, opts: &TraceOptions) -> Result<TraceResult> {
    let constraints = real_geodesic_constraints(member, p)?;
    let points = &member.config.points;
    let base = &member.curve;
    let m = base.m();
    let mut tr = RealTracer { member, sys: ConstrainedSystem::new(base, points, &constraints) };
    let mut x = tr.sys.pack(base, &tr.sys.tracked());
    let mut curve: ParamCurve = tr.sys.curve_at(&x)?;
    let mut t = tr.tangent(&x, opts.initial_direction.as_ref())?;
    let diag = |tr: &RealTracer, curve: &ParamCurve, x: &CVec, t: &CVec, iters: usize, h: f64| -> Result<StepDiagnostics> {
        let ratio = null_ratio(curve, &tr.sys, t)?;
        Ok(StepDiagnostics {
            newton_iters: iters,
            step: h,
            node_count: curve.node_pairs.len(),
            null_type: if ratio < NULL_TOL { NullType::Null } else { NullType::NonNull },
            null_ratio: ratio,
            preimage_gap: preimage_gap(curve, &rebind(&tr.sys.constraints, &tr.sys.tracked_at(x))),
            solution_dim: constrained_tangent(&tr.sys, x).ncols(),
        })
    };
    let mut out = TraceResult {
        constraints: constraints.clone(),
        states: vec![curve.clone()],
        tracked: vec![tr.sys.tracked_at(&x)],
        arc_params: vec![0.0],
        diagnostics: vec![diag(&tr, &curve, &x, &t, 0, 0.0)?],
        stop: StopReason::Completed,
    };
    let mut h = opts.h;
    let mut arc = 0.0;
    'outer: for step in 1..=opts.steps {
        let (y, iters) = loop {
            if h < opts.h_min {
                out.stop = StopReason::StepFailure(format!("step below {:.1e} at state {}", opts.h_min, step - 1));
                break 'outer;
            }
            let pred = &x + &t * C64::new(h, 0.0);
            match tr.correct(&x, &pred, &t, opts.max_corrector) {
                Ok((y, it)) => match tr.sys.curve_at(&y) {
                    Ok(c) if c.node_pairs.len() + 1 == m => break (y, it),
                    _ => h *= 0.5,
                },
                Err(_) => h *= 0.5,
            }
        };
        let drift = tr.reality(&y);
        if drift > 1e-8 {
            out.stop = StopReason::StepFailure(format!("state {step} left the real slice (residual {drift:.2e})"));
            break;
        }
        curve = tr.sys.curve_at(&y)?;
        x = y;
        arc += h;
        let prev = t.rows(0, tr.nc()).into_owned();
        if (0..tr.sys.layout.charts.len()).any(|j| x[tr.sys.layout.param_offset(j)].norm() > 2.0) {
            let tracked = tr.sys.tracked_at(&x);
            let cons = rebind(&tr.sys.constraints, &tracked);
            tr.sys = ConstrainedSystem::new(&curve, points, &cons);
            x = tr.sys.pack(&curve, &tracked);
        }
        t = match tr.tangent(&x, Some(&prev)) {
            Ok(t) => t,
            Err(e) => {
                out.stop = StopReason::StepFailure(e.to_string());
                break;
            }
        };
        out.states.push(curve.clone());
        out.tracked.push(tr.sys.tracked_at(&x));
        out.arc_params.push(arc);
        out.diagnostics.push(diag(&tr, &curve, &x, &t, iters, h)?);
        if iters > 6 {
            h *= 0.5;
        } else if iters <= 2 {
            h = (h * 1.3).min(opts.h_max);
        }
    }
    Ok(out)
}
