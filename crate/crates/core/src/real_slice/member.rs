use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check::{reality_check, RealityReport};
use super::structure::{real_coordinates, real_structure_data, FactorReal, RealStructure, RealStructureData};
use crate::binary_forms::{BinaryForm, ProjPoint};
use crate::conformal::{self, polarization, tangent_vector, Delta, TangentVector};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, ONE};
use crate::nodal_curve::{is_birational, node_pairs, rank_gap, ParamCurve, MIN_RANK_GAP};
use crate::surface_config::{Assignment, PointConfig, SurfacePoint};

/// Seeds tried by `construct_real_member` before giving up.
pub const REAL_ATTEMPTS: usize = 60;

/// A real member of W with its configuration and real structure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealMember {
    pub config: PointConfig,
    pub curve: ParamCurve,
    pub structure: RealStructure,
    pub data: RealStructureData,
    pub report: RealityReport,
}

/// The real structure used for index m: standard on both factors. The
/// v-factor of odd degree would need the antipodal target, which has no real
/// points for the nodes.
pub fn structure_for_index(m: usize) -> Result<RealStructure> {
    let s = RealStructure::standard();
    if m < 2 || !s.v.admits_degree(m) {
        return Err(Error::HypothesisViolation(format!(
            "no real structure with real nodes for m = {m}: a σ-equivariant v-map of odd degree has an antipodal target"
        )));
    }
    Ok(s)
}

fn random_pair(rng: &mut ChaCha8Rng, d: usize) -> [BinaryForm; 2] {
    [0, 1].map(|_| BinaryForm::new((0..=d).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()))
}

fn symmetrize(f: &[BinaryForm; 2], factor: FactorReal) -> [BinaryForm; 2] {
    let g = factor.conjugate_pair(f);
    [f[0].add(&g[0]), f[1].add(&g[1])]
}

fn random_param(rng: &mut ChaCha8Rng) -> ProjPoint {
    let r = 1.2 * rng.gen_range(0.0f64..1.0).sqrt();
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    ProjPoint::affine(C64::from_polar(r, a))
}

fn try_member(m: usize, seed: u64, rng: &mut ChaCha8Rng, structure: &RealStructure) -> Option<RealMember> {
    let u = symmetrize(&random_pair(rng, 2), structure.u);
    let v = symmetrize(&random_pair(rng, m), structure.v);
    if !is_birational(&u, &v) {
        return None;
    }
    let pairs = node_pairs(&u, &v).ok()?;
    if pairs.len() + 1 != m || pairs.iter().any(|(s, t)| t.dist(&s.antipode()) > 1e-9) {
        return None;
    }
    let mut params: Vec<ProjPoint> = Vec::new();
    let nodes: Vec<ProjPoint> = pairs.iter().flat_map(|(s, t)| [*s, *t]).collect();
    while params.len() < 2 * m {
        let z = random_param(rng);
        let w = z.antipode();
        if [z, w].iter().any(|p| nodes.iter().chain(&params).any(|q| q.dist(p) < 0.1)) {
            continue;
        }
        params.extend([z, w]);
    }
    let probe = ParamCurve { u: u.clone(), v: v.clone(), base_preimages: params.clone(), node_pairs: pairs };
    let points: Vec<SurfacePoint> = params.iter().map(|z| probe.eval(z)).collect();
    let config = PointConfig { m, k: 1, points: points.clone(), assignment: vec![Assignment::D1; 2 * m], curves: None, seed, toric: false };
    config.validate().ok()?;
    let curve = ParamCurve::from_maps(u, v, &points).ok()?;
    if curve.base_preimages.iter().zip(&params).any(|(a, b)| a.dist(b) > 1e-8) {
        return None;
    }
    if rank_gap(&curve, &points) < MIN_RANK_GAP {
        return None;
    }
    let data = real_structure_data(&curve, structure).ok()?;
    let report = reality_check(&curve, structure);
    if !report.passes() {
        return None;
    }
    Some(RealMember { config, curve, structure: *structure, data, report })
}

/// A real member of index m: U and V satisfy the functional equation of the
/// real structure, the configuration consists of m pairs {φ(z), σφ(z)}, and
/// the result passes the reality check.
pub fn construct_real_member(m: usize, seed: u64) -> Result<RealMember> {
    let structure = structure_for_index(m)?;
    for attempt in 0..REAL_ATTEMPTS as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(attempt));
        if let Some(member) = try_member(m, seed, &mut rng, &structure) {
            return Ok(member);
        }
    }
    Err(Error::NoRealSolutionFound(REAL_ATTEMPTS))
}

/// Three σ-fixed tangent vectors spanning the real tangent space, with their
/// real coordinates.
pub fn real_tangent_vectors(curve: &ParamCurve, data: &RealStructureData) -> Result<(Vec<TangentVector>, Vec<[f64; 3]>)> {
    let mut cands: Vec<(TangentVector, [f64; 3])> = Vec::new();
    for tv in conformal::tangent_basis(curve)? {
        for w in [ONE, c(0.0, 1.0)] {
            let d = tv.delta.scaled(w);
            let r: Delta = d.add(&data.structure.act_on_delta(&d, data.lambdas));
            let rv = tangent_vector(curve, &r)?;
            let x = real_coordinates(&rv.theta, data)?;
            cands.push((rv, x));
        }
    }
    // greedy pivoting on the real coordinates
    let mut chosen: Vec<usize> = Vec::new();
    let mut basis: Vec<[f64; 3]> = Vec::new();
    for _ in 0..3 {
        let resid = |x: &[f64; 3]| {
            let mut v = *x;
            for e in &basis {
                let p: f64 = (0..3).map(|i| v[i] * e[i]).sum();
                v = [0, 1, 2].map(|i| v[i] - p * e[i]);
            }
            v
        };
        let (k, v) = cands
            .iter()
            .enumerate()
            .filter(|(k, _)| !chosen.contains(k))
            .map(|(k, (_, x))| (k, resid(x)))
            .max_by(|a, b| norm3(&a.1).partial_cmp(&norm3(&b.1)).unwrap())
            .unwrap();
        let n = norm3(&v);
        if n < 1e-8 * cands.iter().map(|(_, x)| norm3(x)).fold(0.0, f64::max) {
            return Err(Error::DegenerateMetric { rank: basis.len() });
        }
        basis.push(v.map(|t| t / n));
        chosen.push(k);
    }
    Ok(chosen.into_iter().map(|k| cands[k].clone()).unzip())
}

fn norm3(v: &[f64; 3]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// The conformal metric on the real tangent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMetric {
    /// Gram matrix in the real coordinates (x1, x2, x3).
    pub gram: [[f64; 3]; 3],
    /// Gram matrix of the σ-fixed tangent vectors of the member.
    pub basis_gram: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    /// max |Im| / max |Re| of e^{−2iθ} times the complex Gram matrix.
    pub imag_residual: f64,
    /// Global sign applied to make the metric positive.
    pub sign: f64,
}

fn real_part(g: &[[C64; 3]; 3]) -> ([[f64; 3]; 3], f64) {
    let re = g.map(|r| r.map(|v| v.re));
    let max_re = re.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let max_im = g.iter().flatten().map(|v| v.im.abs()).fold(0.0, f64::max);
    (re, if max_re > 0.0 { max_im / max_re } else { f64::INFINITY })
}

/// e^{−2iθ} times the polarized discriminant, restricted to the σ-fixed
/// tangent vectors, with eigenvalues after the global sign choice.
pub fn real_metric_at(curve: &ParamCurve, data: &RealStructureData) -> Result<RealMetric> {
    let (vecs, xs) = real_tangent_vectors(curve, data)?;
    let e = (data.phase() * data.phase()).conj();
    let g = [0, 1, 2].map(|i| [0, 1, 2].map(|j| e * polarization(&vecs[i].theta, &vecs[j].theta)));
    let (basis_gram, imag_residual) = real_part(&g);
    let trace = basis_gram[0][0] + basis_gram[1][1] + basis_gram[2][2];
    let sign = if trace < 0.0 { -1.0 } else { 1.0 };
    let basis_gram = basis_gram.map(|r| r.map(|v| sign * v));
    let mat = Matrix3::from_fn(|i, j| basis_gram[i][j]);
    let eig = SymmetricEigen::new(mat).eigenvalues;
    let mut eigenvalues = [eig[0], eig[1], eig[2]];
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if !(eigenvalues[0] > 1e-10 * eigenvalues[2].abs()) || imag_residual > 1e-6 {
        return Err(Error::IndefiniteRealMetric(eigenvalues[0]));
    }
    // X G_x Xᵀ = G for the rows X of real coordinates
    let x = Matrix3::from_fn(|i, j| xs[i][j]);
    let xi = x.try_inverse().ok_or(Error::DegenerateMetric { rank: 2 })?;
    let gx = xi * mat * xi.transpose();
    Ok(RealMetric { gram: [0, 1, 2].map(|i| [0, 1, 2].map(|j| gx[(i, j)])), basis_gram, eigenvalues, imag_residual, sign })
}

/// The real metric of a member whose structure data is recomputed.
pub fn real_metric_of(curve: &ParamCurve, structure: &RealStructure) -> Result<RealMetric> {
    let data = real_structure_data(curve, structure)?;
    real_metric_at(curve, &data)
}

pub(crate) fn cmat3(m: &Matrix3<f64>) -> CMat {
    CMat::from_fn(3, 3, |i, j| c(m[(i, j)], 0.0))
}
