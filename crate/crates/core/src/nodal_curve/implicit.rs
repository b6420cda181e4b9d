use serde::{Deserialize, Serialize};

use crate::biform::BiForm;
use crate::binary_forms::{self, ProjPoint, RootOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};
use crate::surface_config::{transversality_check, PointConfig, SurfacePoint};

/// Residual below which (F, F_u, F_v) count as vanishing at a node, with F
/// scaled to unit max coefficient.
pub const NODE_TOL: f64 = 1e-8;
const NODE_MERGE: f64 = 1e-6;
const HESSIAN_TOL: f64 = 1e-9;
const SMOOTHING_RETRIES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingRecord {
    /// Index (in the seed's node list) of the node that was smoothed.
    pub omitted: usize,
    /// Step actually taken, relative to the coefficient scale.
    pub step: f64,
    /// Index of the first nonzero component of the smoothing direction; that
    /// component was rotated to be real and positive.
    pub sign_component: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicitCurve {
    pub form: BiForm,
    pub nodes: Vec<SurfacePoint>,
    #[serde(default)]
    pub smoothing: Option<SmoothingRecord>,
}

impl ImplicitCurve {
    pub fn new(form: BiForm) -> Self {
        ImplicitCurve { form, nodes: Vec::new(), smoothing: None }
    }

    pub fn m(&self) -> usize {
        self.form.du
    }

    /// |F(p)| relative to the largest coefficient, p normalized.
    pub fn residual(&self, p: &SurfacePoint) -> f64 {
        self.form.eval(&p.u.normalized(), &p.v.normalized()).norm() / self.form.max_abs()
    }
}

/// Value, gradient and Hessian of F in the affine charts picked by the point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Jet {
    pub f: C64,
    pub fu: C64,
    pub fv: C64,
    pub fuu: C64,
    pub fuv: C64,
    pub fvv: C64,
}

pub(crate) fn jet(f: &BiForm, p: &SurfacePoint) -> Jet {
    let (cu, cv) = (p.u.chart(), p.v.chart());
    let u = p.u.in_chart(cu);
    let v = p.v.in_chart(cv);
    let fu = f.du_chart(cu);
    let fv = f.dv_chart(cv);
    Jet {
        f: f.eval(&u, &v),
        fu: fu.eval(&u, &v),
        fv: fv.eval(&u, &v),
        fuu: fu.du_chart(cu).eval(&u, &v),
        fuv: fu.dv_chart(cv).eval(&u, &v),
        fvv: fv.dv_chart(cv).eval(&u, &v),
    }
}

/// Move the free coordinate of the point's own chart by dt.
pub(crate) fn shift(p: &ProjPoint, dt: C64) -> ProjPoint {
    let chart = p.chart();
    let q = p.in_chart(chart);
    if chart == 0 {
        ProjPoint::new(ONE, q.z1 + dt)
    } else {
        ProjPoint::new(q.z0 + dt, ONE)
    }
}

/// F = F₁·F₂ with the m intersection points of D1 and D2 as nodes.
pub fn reducible_seed(cfg: &PointConfig) -> Result<ImplicitCurve> {
    let pair = cfg
        .curves
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("configuration carries no split curve pair".into()))?;
    let form = pair.d1.form().mul(&pair.d2.form()).normalized();
    let nodes = transversality_check(pair)?;
    Ok(ImplicitCurve { form, nodes, smoothing: None })
}

/// Newton polish of a candidate node; None if (F, F_u, F_v) does not vanish.
fn polish_node(f: &BiForm, start: SurfacePoint) -> Option<SurfacePoint> {
    let mut p = start;
    for _ in 0..40 {
        let j = jet(f, &p);
        let r = CVec::from_vec(vec![j.f, j.fu, j.fv]);
        let a = CMat::from_row_slice(3, 2, &[j.fu, j.fv, j.fuu, j.fuv, j.fuv, j.fvv]);
        let step = linalg::lstsq(&a, &(-&r), 1e-13);
        if !step.iter().all(|s| s.re.is_finite() && s.im.is_finite()) || step.norm() > 0.5 {
            return None;
        }
        p = SurfacePoint::new(shift(&p.u, step[0]), shift(&p.v, step[1]));
        if step.norm() < 1e-15 {
            break;
        }
    }
    let j = jet(f, &p);
    let res = j.f.norm().max(j.fu.norm()).max(j.fv.norm());
    (res < NODE_TOL).then_some(p)
}

/// All singular points of F; each must be an ordinary node.
pub fn find_nodes(f: &BiForm) -> Result<Vec<SurfacePoint>> {
    let f = f.normalized();
    match f.dv {
        1 => return graph_nodes(&f),
        2 => {}
        d => return Err(Error::DegreeMismatch(format!("find_nodes expects v-degree 1 or 2, got {d}"))),
    }
    let (a0, a1, a2) = (f.v_slice(0), f.v_slice(1), f.v_slice(2));
    let disc = a1.mul(&a1).sub(&a0.mul(&a2).scaled(C64::new(4.0, 0.0)));
    if disc.max_abs() < 1e-12 {
        return Err(Error::NonNodalSingularity(0.0));
    }
    let opts = RootOptions { cluster_tol: 1e-5, ..RootOptions::default() };
    let mut nodes: Vec<SurfacePoint> = Vec::new();
    for (u, _) in binary_forms::roots_with(&disc, opts).roots {
        let (a, b, c) = (a0.eval(&u), a1.eval(&u), a2.eval(&u));
        if a.norm() + b.norm() + c.norm() < 1e-12 {
            continue;
        }
        // F(u,·) ≈ (β v0 − α v1)², so (α:β) = (−b : 2a) = (2c : −b)
        let r1 = ProjPoint { z0: -b, z1: 2.0 * a };
        let r2 = ProjPoint { z0: 2.0 * c, z1: -b };
        let v = if r1.scale() >= r2.scale() { r1 } else { r2 };
        if v.scale() < 1e-14 {
            continue;
        }
        if let Some(p) = polish_node(&f, SurfacePoint::new(u, v)) {
            if nodes.iter().all(|q| q.dist(&p) > NODE_MERGE) {
                nodes.push(p);
            }
        }
    }
    for p in &nodes {
        let j = jet(&f, p);
        let det = j.fuu * j.fvv - j.fuv * j.fuv;
        let scale = j.fuu.norm() + j.fuv.norm() + j.fvv.norm();
        if scale < 1e-12 || det.norm() < HESSIAN_TOL * scale * scale {
            return Err(Error::NonNodalSingularity(det.norm()));
        }
    }
    Ok(nodes)
}

/// A (d,1) form S0(u)v0 + S1(u)v1 is smooth unless S0, S1 share a root, in
/// which case it contains a whole fiber.
fn graph_nodes(f: &BiForm) -> Result<Vec<SurfacePoint>> {
    let (s0, s1) = (f.v_slice(0), f.v_slice(1));
    if s1.max_abs() < 1e-12 || s0.max_abs() < 1e-12 {
        return Err(Error::NonNodalSingularity(0.0));
    }
    for (r, _) in binary_forms::roots(&s1).roots {
        if s0.eval(&r).norm() < NODE_TOL {
            return Err(Error::NonNodalSingularity(0.0));
        }
    }
    Ok(Vec::new())
}

fn monomial_row(du: usize, dv: usize, p: &SurfacePoint) -> Vec<C64> {
    let (u, v) = (p.u.normalized(), p.v.normalized());
    let mut row = Vec::with_capacity((du + 1) * (dv + 1));
    for i in 0..=du {
        let ui = u.z0.powi((du - i) as i32) * u.z1.powi(i as i32);
        for j in 0..=dv {
            row.push(ui * v.z0.powi((dv - j) as i32) * v.z1.powi(j as i32));
        }
    }
    row
}

/// Orthonormal basis (as columns of coefficient vectors) of the bidegree
/// (du,dv) forms vanishing at the given points.
pub fn linear_system(points: &[SurfacePoint], du: usize, dv: usize) -> CMat {
    let n = (du + 1) * (dv + 1);
    let mut e = CMat::zeros(points.len().max(1), n);
    for (r, p) in points.iter().enumerate() {
        for (k, x) in monomial_row(du, dv, p).into_iter().enumerate() {
            e[(r, k)] = x;
        }
    }
    linalg::nullspace(&e, 1e-10)
}

/// Residual and jacobian of the node conditions F = F_u = F_v = 0 at each
/// tracked node, plus the normalization ⟨λ_ref, λ⟩ = ‖λ_ref‖². Unknowns are
/// the coefficients λ in the given basis followed by two chart shifts per node.
fn node_system(forms: &[BiForm], lambda: &CVec, nodes: &[SurfacePoint], lambda_ref: &CVec) -> (CVec, CMat) {
    let nb = forms.len();
    let nn = nodes.len();
    let total = combine(forms, lambda);
    let mut r = CVec::zeros(3 * nn + 1);
    let mut jac = CMat::zeros(3 * nn + 1, nb + 2 * nn);
    for (i, p) in nodes.iter().enumerate() {
        let jt = jet(&total, p);
        r[3 * i] = jt.f;
        r[3 * i + 1] = jt.fu;
        r[3 * i + 2] = jt.fv;
        for (k, b) in forms.iter().enumerate() {
            let jb = jet(b, p);
            jac[(3 * i, k)] = jb.f;
            jac[(3 * i + 1, k)] = jb.fu;
            jac[(3 * i + 2, k)] = jb.fv;
        }
        let c = nb + 2 * i;
        jac[(3 * i, c)] = jt.fu;
        jac[(3 * i, c + 1)] = jt.fv;
        jac[(3 * i + 1, c)] = jt.fuu;
        jac[(3 * i + 1, c + 1)] = jt.fuv;
        jac[(3 * i + 2, c)] = jt.fuv;
        jac[(3 * i + 2, c + 1)] = jt.fvv;
    }
    let last = 3 * nn;
    r[last] = lambda_ref.dotc(lambda) - lambda_ref.dotc(lambda_ref);
    for k in 0..nb {
        jac[(last, k)] = lambda_ref[k].conj();
    }
    (r, jac)
}

fn combine(forms: &[BiForm], lambda: &CVec) -> BiForm {
    let mut total = BiForm::zero(forms[0].du, forms[0].dv);
    for (k, b) in forms.iter().enumerate() {
        total = total.add(&b.scaled(lambda[k]));
    }
    total
}

fn correct_nodes(
    forms: &[BiForm],
    mut lambda: CVec,
    mut nodes: Vec<SurfacePoint>,
    lambda_ref: &CVec,
) -> Result<(CVec, Vec<SurfacePoint>)> {
    let nb = forms.len();
    for _ in 0..30 {
        let (r, jac) = node_system(forms, &lambda, &nodes, lambda_ref);
        if linalg::max_abs(r.as_slice()) < 1e-13 {
            return Ok((lambda, nodes));
        }
        let step = linalg::lstsq(&jac, &(-&r), 1e-13);
        if !step.iter().all(|s| s.re.is_finite() && s.im.is_finite()) || step.norm() > 0.5 * (1.0 + lambda.norm()) {
            return Err(Error::NewtonDivergence("node-preserving correction diverged".into()));
        }
        for k in 0..nb {
            lambda[k] += step[k];
        }
        for (i, p) in nodes.iter_mut().enumerate() {
            *p = SurfacePoint::new(shift(&p.u, step[nb + 2 * i]), shift(&p.v, step[nb + 2 * i + 1]));
        }
    }
    let (r, _) = node_system(forms, &lambda, &nodes, lambda_ref);
    if linalg::max_abs(r.as_slice()) < 1e-10 {
        Ok((lambda, nodes))
    } else {
        Err(Error::NewtonDivergence(format!("node residual {:.2e} after correction", linalg::max_abs(r.as_slice()))))
    }
}

/// Smooth the one node of the reducible seed not listed in `keep`, staying in
/// the linear system through `points` and keeping the other nodes (which are
/// free to move). The step is relative to the coefficient scale and halves on
/// corrector failure.
pub fn smooth_one_node(seed: &ImplicitCurve, points: &[SurfacePoint], keep: &[usize], step: f64) -> Result<ImplicitCurve> {
    let n = seed.nodes.len();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() + 1 != n || kept.iter().any(|&i| i >= n) {
        return Err(Error::InvalidConfig(format!("keep must list {} of the {n} nodes", n.saturating_sub(1))));
    }
    let omitted = (0..n).find(|i| !kept.contains(i)).unwrap();
    let m = seed.m();
    let basis = linear_system(points, seed.form.du, seed.form.dv);
    let forms: Vec<BiForm> = (0..basis.ncols())
        .map(|k| BiForm::from_coeffs(seed.form.du, seed.form.dv, basis.column(k).iter().copied().collect()))
        .collect();
    let f0 = CVec::from_column_slice(seed.form.normalized().coeffs());
    let lambda0 = basis.adjoint() * &f0;
    if (&basis * &lambda0 - &f0).norm() > 1e-8 * f0.norm() {
        return Err(Error::InvalidConfig("seed does not pass through the configuration points".into()));
    }
    let nodes0: Vec<SurfacePoint> = kept.iter().map(|&i| seed.nodes[i]).collect();
    let (_, jac0) = node_system(&forms, &lambda0, &nodes0, &lambda0);
    let tangent = linalg::nullspace(&jac0, 1e-9);
    if tangent.ncols() == 0 {
        return Err(Error::NewtonDivergence("no node-preserving deformation at the seed".into()));
    }
    // the tangent direction moving F(omitted node) the most
    let target = seed.nodes[omitted];
    let values: Vec<C64> = (0..tangent.ncols())
        .map(|c| (0..forms.len()).map(|k| tangent[(k, c)] * jet(&forms[k], &target).f).sum())
        .collect();
    let mut dir = CVec::zeros(tangent.nrows());
    for (c, g) in values.iter().enumerate() {
        dir += tangent.column(c) * g.conj();
    }
    let dn = dir.norm();
    if dn < 1e-12 {
        return Err(Error::NewtonDivergence("smoothing direction vanishes".into()));
    }
    dir /= C64::new(dn, 0.0);
    let sign_component = dir.iter().position(|x| x.norm() > 1e-8).unwrap_or(0);
    let phase = dir[sign_component].conj() / dir[sign_component].norm();
    dir *= phase;

    let scale = lambda0.norm();
    let nb = forms.len();
    let mut eps = step;
    let mut last_err = Error::NewtonDivergence("smoothing not attempted".into());
    for _ in 0..=SMOOTHING_RETRIES {
        let h = C64::new(eps * scale, 0.0);
        let lambda = &lambda0 + dir.rows(0, nb) * h;
        let nodes: Vec<SurfacePoint> = nodes0
            .iter()
            .enumerate()
            .map(|(i, p)| SurfacePoint::new(shift(&p.u, dir[nb + 2 * i] * h), shift(&p.v, dir[nb + 2 * i + 1] * h)))
            .collect();
        match correct_nodes(&forms, lambda, nodes, &lambda0) {
            Ok((lambda, nodes)) => {
                let form = combine(&forms, &lambda);
                let found = find_nodes(&form)?;
                if found.len() != m - 1 || nodes.iter().any(|p| found.iter().all(|q| q.dist(p) > 1e-6)) {
                    return Err(Error::NodeCountMismatch { expected: m - 1, found: found.len() });
                }
                return Ok(ImplicitCurve {
                    form: form.normalized(),
                    nodes,
                    smoothing: Some(SmoothingRecord { omitted, step: eps, sign_component }),
                });
            }
            Err(e) => {
                last_err = e;
                eps /= 2.0;
            }
        }
    }
    Err(last_err)
}
