//! The conformal structure on W: tangent vectors as quadratics θ, the
//! discriminant metric, and null planes.

use serde::{Deserialize, Serialize};

use crate::binary_forms::{self, disc_quadratic, wronskian, BinaryForm, ProjPoint, QuadraticClass};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::nodal_curve::{self, resultant_derivative, ParamCurve, StateLayout};
use crate::surface_config::SurfacePoint;

/// Relative residual allowed when dividing the normal form by the
/// base-preimage product.
pub const THETA_TOL: f64 = 1e-7;

/// Distance below which a parameter counts as a node preimage.
pub const BRANCH_TOL: f64 = 1e-6;

pub const SCALE_CONVENTION: &str = "theta = normal form / product of (b z0 - a z1) over base preimages (a:b) of unit modulus, product monic in its first nonvanishing coefficient";

/// First-order variation (δU0, δU1, δV0, δV1) of the coordinate forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub u: [BinaryForm; 2],
    pub v: [BinaryForm; 2],
}

impl Delta {
    pub fn zero(curve: &ParamCurve) -> Self {
        let (du, dv) = (curve.u_degree(), curve.m());
        Delta { u: [BinaryForm::zero(du), BinaryForm::zero(du)], v: [BinaryForm::zero(dv), BinaryForm::zero(dv)] }
    }

    /// The coefficient part of a state-vector direction.
    pub fn from_state(layout: &StateLayout, x: &CVec) -> Self {
        let (u, v) = layout.forms(x);
        Delta { u, v }
    }

    pub fn to_state(&self, layout: &StateLayout) -> CVec {
        let mut x = layout.pack(&self.u, &self.v, &[]);
        let n = layout.coeff_len();
        x.rows_mut(n, layout.len() - n).fill(ZERO);
        x
    }

    pub fn scaled(&self, s: C64) -> Self {
        Delta { u: [self.u[0].scaled(s), self.u[1].scaled(s)], v: [self.v[0].scaled(s), self.v[1].scaled(s)] }
    }

    pub fn add(&self, o: &Delta) -> Self {
        Delta { u: [self.u[0].add(&o.u[0]), self.u[1].add(&o.u[1])], v: [self.v[0].add(&o.v[0]), self.v[1].add(&o.v[1])] }
    }

    pub fn norm(&self) -> f64 {
        self.u.iter().chain(&self.v).map(|f| f.norm().powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub delta: Delta,
    pub theta: QuadraticClass,
    pub normal_form: BinaryForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricAtPoint {
    pub gram: [[C64; 3]; 3],
    pub basis: Vec<TangentVector>,
    pub scale_convention: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullPlane {
    pub span: [TangentVector; 2],
    pub witness_root: ProjPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    /// The witness root is an ordinary parameter: the plane is T W_p.
    Smooth,
    /// The witness root is the preimage on one branch of node `node`.
    Branch { node: usize, branch: usize },
}

/// A·W_V − B·W_U with A = δU1·U0 − U1·δU0 and B = δV1·V0 − V1·δV0.
pub fn normal_component(curve: &ParamCurve, delta: &Delta) -> BinaryForm {
    let (u, v) = (&curve.u, &curve.v);
    let a = delta.u[1].mul(&u[0]).sub(&u[1].mul(&delta.u[0]));
    let b = delta.v[1].mul(&v[0]).sub(&v[1].mul(&delta.v[0]));
    a.mul(&wronskian(&v[0], &v[1])).sub(&b.mul(&wronskian(&u[0], &u[1])))
}

/// Size of A·W_V − B·W_U before cancellation; gauge directions give normal
/// forms at roundoff level relative to it.
fn normal_scale(curve: &ParamCurve, delta: &Delta) -> f64 {
    let pair = |f: &[BinaryForm; 2]| f[0].norm().hypot(f[1].norm());
    let (u, v) = (pair(&curve.u), pair(&curve.v));
    pair(&delta.u) * u * v * v + pair(&delta.v) * v * u * u
}

pub fn base_product(curve: &ParamCurve) -> BinaryForm {
    binary_forms::from_roots(&curve.base_preimages)
}

pub fn theta_of(curve: &ParamCurve, delta: &Delta) -> Result<QuadraticClass> {
    Ok(tangent_vector(curve, delta)?.theta)
}

pub fn tangent_vector(curve: &ParamCurve, delta: &Delta) -> Result<TangentVector> {
    let normal_form = normal_component(curve, delta);
    let theta = if normal_form.norm() <= 1e-11 * normal_scale(curve, delta) {
        QuadraticClass::new(ZERO, ZERO, ZERO)
    } else {
        QuadraticClass::from_form(&binary_forms::divide_exact(&normal_form, &base_product(curve), THETA_TOL)?)
    };
    Ok(TangentVector { delta: delta.clone(), theta, normal_form })
}

/// The configuration points as the images of the base preimages.
pub fn base_points(curve: &ParamCurve) -> Vec<SurfacePoint> {
    curve.base_preimages.iter().map(|z| curve.eval(z)).collect()
}

/// Three tangent vectors spanning T_C W, orthogonal to the gauge.
pub fn tangent_basis(curve: &ParamCurve) -> Result<Vec<TangentVector>> {
    let t = nodal_curve::severi_tangent(curve, &base_points(curve))?;
    let layout = StateLayout::for_curve(curve);
    (0..3).map(|k| tangent_vector(curve, &Delta::from_state(&layout, &t.column(k).into_owned()))).collect()
}

fn theta_vec(q: &QuadraticClass) -> [C64; 3] {
    [q.a, q.b, q.c]
}

/// ½(Q(x+y) − Q(x) − Q(y)) for Q the discriminant.
pub fn polarization(x: &QuadraticClass, y: &QuadraticClass) -> C64 {
    let s = QuadraticClass::new(x.a + y.a, x.b + y.b, x.c + y.c);
    0.5 * (disc_quadratic(&s) - disc_quadratic(x) - disc_quadratic(y))
}

/// Gram matrix of the polarized discriminant in the given vectors.
pub fn gram_of(vectors: &[TangentVector]) -> [[C64; 3]; 3] {
    let mut g = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = polarization(&vectors[i].theta, &vectors[j].theta);
        }
    }
    g
}

/// The gram matrix of b² − 4ac in the coordinates (a, b, c).
pub fn abc_gram() -> [[C64; 3]; 3] {
    let abc: Vec<TangentVector> = (0..3)
        .map(|k| {
            let mut t = [ZERO; 3];
            t[k] = ONE;
            TangentVector {
                delta: Delta { u: [BinaryForm::zero(0), BinaryForm::zero(0)], v: [BinaryForm::zero(0), BinaryForm::zero(0)] },
                theta: QuadraticClass::new(t[0], t[1], t[2]),
                normal_form: BinaryForm::zero(0),
            }
        })
        .collect();
    gram_of(&abc)
}

pub fn gram_matrix(g: &[[C64; 3]; 3]) -> CMat {
    CMat::from_fn(3, 3, |i, j| g[i][j])
}

pub fn metric_at(curve: &ParamCurve) -> Result<MetricAtPoint> {
    let basis = tangent_basis(curve)?;
    let gram = gram_of(&basis);
    let rank = linalg::numeric_rank(&gram_matrix(&gram), 1e-9);
    if rank < 3 {
        return Err(Error::DegenerateMetric { rank });
    }
    Ok(MetricAtPoint { gram, basis, scale_convention: SCALE_CONVENTION.into() })
}

/// Linear combination Σ c_k v_k of tangent vectors.
pub fn combine(vectors: &[TangentVector], coeffs: &[C64]) -> TangentVector {
    let mut out = vectors[0].clone();
    out.delta = out.delta.scaled(coeffs[0]);
    out.normal_form = out.normal_form.scaled(coeffs[0]);
    let mut th = theta_vec(&vectors[0].theta).map(|x| x * coeffs[0]);
    for (v, c) in vectors.iter().zip(coeffs).skip(1) {
        out.delta = out.delta.add(&v.delta.scaled(*c));
        out.normal_form = out.normal_form.add(&v.normal_form.scaled(*c));
        for (t, x) in th.iter_mut().zip(theta_vec(&v.theta)) {
            *t += x * c;
        }
    }
    out.theta = QuadraticClass::new(th[0], th[1], th[2]);
    out
}

/// The null plane {θ : θ(z̃) = 0} inside the span of `basis`.
pub fn null_plane_at(basis: &[TangentVector], z: &ProjPoint) -> Result<NullPlane> {
    let z = z.normalized();
    let row = CMat::from_fn(1, basis.len(), |_, k| basis[k].theta.to_form().eval(&z));
    let ns = linalg::nullspace(&row, 1e-12);
    if ns.ncols() != 2 {
        return Err(Error::RankDrop(format!("plane of dimension {} through one root", ns.ncols())));
    }
    let v = |k: usize| combine(basis, ns.column(k).as_slice());
    Ok(NullPlane { span: [v(0), v(1)], witness_root: z })
}

/// Null plane of the curves through p, for p on C away from the nodes.
pub fn point_to_plane(curve: &ParamCurve, basis: &[TangentVector], p: &SurfacePoint) -> Result<NullPlane> {
    let z = curve.preimage_of(p).ok_or_else(|| Error::DegenerateInput("point is not on the curve".into()))?;
    null_plane_at(basis, &z)
}

/// Common root of the two quadratics spanning a null plane.
pub fn common_root(plane: &NullPlane) -> Result<ProjPoint> {
    let (f, g) = (plane.span[0].theta.to_form(), plane.span[1].theta.to_form());
    let (f, g) = if f.norm() >= g.norm() { (f, g) } else { (g, f) };
    if f.norm() == 0.0 {
        return Err(Error::NoCommonRoot);
    }
    let gn = g.norm();
    let best = binary_forms::roots(&f)
        .roots
        .iter()
        .map(|(r, _)| {
            let r = r.normalized();
            (r, if gn > 0.0 { g.eval(&r).norm() / gn } else { 0.0 })
        })
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    match best {
        Some((r, res)) if res < 1e-8 => Ok(r),
        _ => Err(Error::NoCommonRoot),
    }
}

pub fn null_plane_to_point(curve: &ParamCurve, plane: &NullPlane) -> Result<(SurfacePoint, PointKind)> {
    let z = common_root(plane)?;
    for (i, (s, t)) in curve.node_pairs.iter().enumerate() {
        for (b, w) in [s, t].into_iter().enumerate() {
            if w.dist(&z) < BRANCH_TOL {
                return Ok((curve.eval(&z), PointKind::Branch { node: i, branch: b }));
            }
        }
    }
    Ok((curve.eval(&z), PointKind::Smooth))
}

/// The model space {f·θ}: f·z0², f·z0z1, f·z1² with f the node-preimage
/// product, as forms of degree 2m.
pub fn vc_oracle(curve: &ParamCurve) -> Vec<BinaryForm> {
    let f = binary_forms::from_roots(&curve.node_preimages());
    (0..3).map(|k| f.mul(&BinaryForm::monomial(2, k))).collect()
}

/// The implicit route to the same space: δF∘φ / ∏(z − z_j), where δF is the
/// first variation of the implicit equation along δ.
pub fn vc_section(curve: &ParamCurve, delta: &Delta) -> Result<BinaryForm> {
    let u = [&curve.u[0], &curve.u[1]];
    let v = [&curve.v[0], &curve.v[1]];
    let df = resultant_derivative(u, v, [&delta.u[0], &delta.u[1]], [&delta.v[0], &delta.v[1]]);
    let pulled = df.compose(u, v);
    binary_forms::divide_exact(&pulled, &base_product(curve), THETA_TOL)
}

/// One scalar λ per state with vc_section(δ) ≈ λ·f·θ(δ) for all vectors;
/// returns λ and the relative residual of the joint fit.
pub fn vc_agreement(curve: &ParamCurve, vectors: &[TangentVector]) -> Result<(C64, f64)> {
    let f = binary_forms::from_roots(&curve.node_preimages());
    let mut model = Vec::new();
    let mut implicit = Vec::new();
    for t in vectors {
        model.extend_from_slice(f.mul(&t.theta.to_form()).coeffs());
        implicit.extend_from_slice(vc_section(curve, &t.delta)?.coeffs());
    }
    Ok(linalg::fit_scalar(&implicit, &model))
}
