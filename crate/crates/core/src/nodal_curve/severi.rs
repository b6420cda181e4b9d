use super::param::ParamCurve;
use crate::binary_forms::{BinaryForm, ProjPoint};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::surface_config::SurfacePoint;

/// Gauge dimension: three Möbius directions and one scaling per factor.
pub const GAUGE_DIM: usize = 5;

/// Layout of a state vector: the coefficients of U0, U1, V0, V1 followed by
/// one affine coordinate per tracked parameter, each in a fixed chart.
#[derive(Clone, Debug, PartialEq)]
pub struct StateLayout {
    pub du: usize,
    pub dv: usize,
    pub charts: Vec<usize>,
}

impl StateLayout {
    pub fn new(du: usize, dv: usize, charts: Vec<usize>) -> Self {
        StateLayout { du, dv, charts }
    }

    /// Layout tracking the base preimages of the curve.
    pub fn for_curve(curve: &ParamCurve) -> Self {
        StateLayout::new(curve.u_degree(), curve.m(), curve.base_preimages.iter().map(|z| z.chart()).collect())
    }

    pub fn coeff_len(&self) -> usize {
        2 * (self.du + 1) + 2 * (self.dv + 1)
    }

    pub fn len(&self) -> usize {
        self.coeff_len() + self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn param_offset(&self, j: usize) -> usize {
        self.coeff_len() + j
    }

    /// Track one more parameter; returns its index.
    pub fn push_param(&mut self, chart: usize) -> usize {
        self.charts.push(chart);
        self.charts.len() - 1
    }

    fn ranges(&self) -> [(usize, usize); 4] {
        let (a, b) = (self.du + 1, self.dv + 1);
        [(0, a), (a, a), (2 * a, b), (2 * a + b, b)]
    }

    pub fn forms(&self, x: &CVec) -> ([BinaryForm; 2], [BinaryForm; 2]) {
        let r = self.ranges();
        let f = |k: usize| BinaryForm::new(x.rows(r[k].0, r[k].1).iter().copied().collect());
        ([f(0), f(1)], [f(2), f(3)])
    }

    /// Tracked parameter j, with its chart coordinate set to 1.
    pub fn param(&self, x: &CVec, j: usize) -> ProjPoint {
        let t = x[self.param_offset(j)];
        if self.charts[j] == 0 {
            ProjPoint { z0: ONE, z1: t }
        } else {
            ProjPoint { z0: t, z1: ONE }
        }
    }

    pub fn pack(&self, u: &[BinaryForm; 2], v: &[BinaryForm; 2], params: &[ProjPoint]) -> CVec {
        let mut x = CVec::zeros(self.len());
        let r = self.ranges();
        for (k, f) in [&u[0], &u[1], &v[0], &v[1]].iter().enumerate() {
            for (i, c) in f.coeffs().iter().enumerate() {
                x[r[k].0 + i] = *c;
            }
        }
        for (j, z) in params.iter().enumerate() {
            let zc = z.in_chart(self.charts[j]);
            x[self.param_offset(j)] = if self.charts[j] == 0 { zc.z1 } else { zc.z0 };
        }
        x
    }

    pub fn pack_curve(&self, curve: &ParamCurve) -> CVec {
        self.pack(&curve.u, &curve.v, &curve.base_preimages)
    }

    /// Curve whose base preimages are the first `n_base` tracked parameters;
    /// node pairs are left empty.
    pub fn unpack(&self, x: &CVec, n_base: usize) -> ParamCurve {
        let (u, v) = self.forms(x);
        ParamCurve { u, v, base_preimages: (0..n_base).map(|j| self.param(x, j).normalized()).collect(), node_pairs: Vec::new() }
    }
}

fn monomials(d: usize, z: &ProjPoint) -> Vec<C64> {
    (0..=d).map(|i| z.z0.powi((d - i) as i32) * z.z1.powi(i as i32)).collect()
}

/// Incidence equations U(z_j) ∧ p_u = 0, V(z_j) ∧ p_v = 0 for each (j, p)
/// pair of tracked parameter and point; two rows per pair.
pub fn incidence_system(layout: &StateLayout, x: &CVec, pairs: &[(usize, SurfacePoint)]) -> (CVec, CMat) {
    let (u, v) = layout.forms(x);
    let r = layout.ranges();
    let mut res = CVec::zeros(2 * pairs.len());
    let mut jac = CMat::zeros(2 * pairs.len(), layout.len());
    for (row, (j, p)) in pairs.iter().enumerate() {
        let z = layout.param(x, *j);
        let chart = layout.charts[*j];
        let col = layout.param_offset(*j);
        for (k, (forms, target, d)) in [(&u, p.u.normalized(), layout.du), (&v, p.v.normalized(), layout.dv)].into_iter().enumerate() {
            let i = 2 * row + k;
            res[i] = forms[0].eval(&z) * target.z1 - forms[1].eval(&z) * target.z0;
            let mono = monomials(d, &z);
            for (e, mv) in mono.iter().enumerate() {
                jac[(i, r[2 * k].0 + e)] = mv * target.z1;
                jac[(i, r[2 * k + 1].0 + e)] = -mv * target.z0;
            }
            jac[(i, col)] = forms[0].chart_derivative(chart).eval(&z) * target.z1
                - forms[1].chart_derivative(chart).eval(&z) * target.z0;
        }
    }
    (res, jac)
}

fn base_pairs(points: &[SurfacePoint]) -> Vec<(usize, SurfacePoint)> {
    points.iter().copied().enumerate().collect()
}

/// Per-point incidence residuals of the curve's base preimages.
pub fn constraint_residual(curve: &ParamCurve, points: &[SurfacePoint]) -> CVec {
    let layout = StateLayout::for_curve(curve);
    incidence_system(&layout, &layout.pack_curve(curve), &base_pairs(points)).0
}

/// Incidence jacobian with respect to all coefficients and base preimages,
/// together with the gauge directions (columns) in the same coordinates.
pub fn constraint_jacobian(curve: &ParamCurve, points: &[SurfacePoint]) -> (CMat, CMat) {
    let layout = StateLayout::for_curve(curve);
    let x = layout.pack_curve(curve);
    let (_, jac) = incidence_system(&layout, &x, &base_pairs(points));
    (jac, gauge_basis(&layout, &x))
}

/// Infinitesimal gauge motions at x: scaling of (U0,U1), scaling of (V0,V1),
/// and the three Möbius generators acting on forms and tracked parameters.
pub fn gauge_basis(layout: &StateLayout, x: &CVec) -> CMat {
    let (u, v) = layout.forms(x);
    let r = layout.ranges();
    let mut g = CMat::zeros(layout.len(), GAUGE_DIM);
    for k in 0..2 {
        for (e, c) in u[k].coeffs().iter().enumerate() {
            g[(r[k].0 + e, 0)] = *c;
        }
        for (e, c) in v[k].coeffs().iter().enumerate() {
            g[(r[2 + k].0 + e, 1)] = *c;
        }
    }
    let gens: [[[C64; 2]; 2]; 3] = [
        [[ONE, ZERO], [ZERO, -ONE]],
        [[ZERO, ONE], [ZERO, ZERO]],
        [[ZERO, ZERO], [ONE, ZERO]],
    ];
    for (col, mm) in gens.iter().enumerate() {
        let l0 = BinaryForm::new(vec![mm[0][0], mm[0][1]]);
        let l1 = BinaryForm::new(vec![mm[1][0], mm[1][1]]);
        let field = |f: &BinaryForm| f.partial0().mul(&l0).add(&f.partial1().mul(&l1)).scaled(-ONE);
        for (k, f) in [&u[0], &u[1], &v[0], &v[1]].iter().enumerate() {
            if f.degree() == 0 {
                continue;
            }
            for (e, c) in field(f).coeffs().iter().enumerate() {
                g[(r[k].0 + e, 2 + col)] = *c;
            }
        }
        for j in 0..layout.charts.len() {
            let z = layout.param(x, j);
            let mz = z.transform(mm);
            let t = x[layout.param_offset(j)];
            g[(layout.param_offset(j), 2 + col)] = if layout.charts[j] == 0 { mz.z1 - t * mz.z0 } else { mz.z0 - t * mz.z1 };
        }
    }
    g
}

/// Dimension of the solution set modulo gauge: nullity of the jacobian minus
/// the gauge dimension.
pub fn nullity_mod_gauge(jac: &CMat, rel_tol: f64) -> usize {
    let rank = linalg::numeric_rank(jac, rel_tol);
    (jac.ncols() - rank).saturating_sub(GAUGE_DIM)
}

/// Orthonormal basis of the constrained tangent space complementary to the
/// gauge: kernel of [J; Gᴴ].
pub fn tangent_space(jac: &CMat, gauge: &CMat) -> CMat {
    let g = linalg::orthonormalize(gauge, 1e-12);
    let stacked = linalg::vstack(&[jac, &g.adjoint()]);
    linalg::nullspace(&stacked, 1e-9)
}

/// Tangent space of W at the curve (three directions at a smooth point).
pub fn severi_tangent(curve: &ParamCurve, points: &[SurfacePoint]) -> Result<CMat> {
    let (jac, gauge) = constraint_jacobian(curve, points);
    let t = tangent_space(&jac, &gauge);
    if t.ncols() != 3 {
        return Err(Error::RankDrop(format!("tangent space of dimension {} instead of 3", t.ncols())));
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Steps longer than this (relative to 1 + ‖x‖) abort the iteration.
    pub max_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-12, max_iter: 20, max_step: 0.5 }
    }
}

/// Gauss–Newton with minimum-norm steps; converges when the residual max
/// norm drops below `tol`. Returns the point and the iteration count.
pub fn gauss_newton<F>(system: F, mut x: CVec, opts: NewtonOptions) -> Result<(CVec, usize)>
where
    F: Fn(&CVec) -> (CVec, CMat),
{
    for it in 0..opts.max_iter {
        let (r, jac) = system(&x);
        let rn = linalg::max_abs(r.as_slice());
        if !rn.is_finite() {
            return Err(Error::NewtonDivergence("non-finite residual".into()));
        }
        if rn < opts.tol {
            return Ok((x, it));
        }
        let step = linalg::lstsq(&jac, &(-&r), 1e-13);
        let sn = step.norm();
        if !sn.is_finite() || sn > opts.max_step * (1.0 + x.norm()) {
            return Err(Error::NewtonDivergence(format!("step {sn:.2e} at iteration {it}")));
        }
        x += step;
        if sn < 1e-15 * (1.0 + x.norm()) {
            let (r, _) = system(&x);
            if linalg::max_abs(r.as_slice()) < opts.tol * 1e3 {
                return Ok((x, it + 1));
            }
        }
    }
    let (r, _) = system(&x);
    if linalg::max_abs(r.as_slice()) < opts.tol {
        Ok((x, opts.max_iter))
    } else {
        Err(Error::NewtonDivergence(format!("residual {:.2e} after {} iterations", linalg::max_abs(r.as_slice()), opts.max_iter)))
    }
}

/// Newton-correct the coefficients and base preimages onto the incidence
/// conditions, then recompute the node pairs.
pub fn polish_member(curve: &ParamCurve, points: &[SurfacePoint]) -> Result<ParamCurve> {
    let layout = StateLayout::for_curve(curve);
    let pairs = base_pairs(points);
    let x0 = layout.pack_curve(curve);
    let (x, _) = gauss_newton(|x| incidence_system(&layout, x, &pairs), x0, NewtonOptions { tol: 1e-13, ..NewtonOptions::default() })?;
    let mut out = layout.unpack(&x, points.len());
    out.refresh_nodes()?;
    Ok(out)
}

/// Ratio σ_r / σ_1 of the incidence jacobian, where r is its expected rank
/// (all columns minus the gauge and the three tangent directions). Small
/// values mean the state is close to the reducible boundary.
pub fn rank_gap(curve: &ParamCurve, points: &[SurfacePoint]) -> f64 {
    let (jac, _) = constraint_jacobian(curve, points);
    let sv = linalg::singular_values(&jac);
    let r = jac.ncols().saturating_sub(GAUGE_DIM + 3);
    match (sv.first(), r.checked_sub(1).and_then(|i| sv.get(i))) {
        (Some(&s1), Some(&sr)) if s1 > 0.0 => sr / s1,
        _ => 0.0,
    }
}
