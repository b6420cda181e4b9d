use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::constraints::{rebind, ConstrainedSystem, IncidenceConstraint};
use super::trace::{preimage_gap, trace, TraceOptions, TraceResult};
use crate::binary_forms::{BinaryForm, ProjPoint};
use crate::error::{Error, Result};
use crate::linalg::{c, C64};
use crate::nodal_curve::{self, NewtonOptions, ParamCurve};
use crate::surface_config::SurfacePoint;

/// A choice of preimages of p and q on a member of W_{p,q}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSeed {
    pub zp: ProjPoint,
    pub zq: ProjPoint,
}

/// One germ of W_{p,q} at C per choice of preimages: a node contributes two
/// choices, a smooth point one.
pub fn branch_enumerate(curve: &ParamCurve, p: &SurfacePoint, q: &SurfacePoint) -> Vec<BranchSeed> {
    let (ps, qs) = (curve.preimages_of(p), curve.preimages_of(q));
    ps.iter().flat_map(|zp| qs.iter().map(move |zq| BranchSeed { zp: *zp, zq: *zq })).collect()
}

pub fn trace_seed(curve: &ParamCurve, points: &[SurfacePoint], p: &SurfacePoint, q: &SurfacePoint, seed: &BranchSeed, opts: &TraceOptions) -> Result<TraceResult> {
    let cons = [IncidenceConstraint::ThroughPoint { p: *p, z: seed.zp }, IncidenceConstraint::ThroughPoint { p: *q, z: seed.zq }];
    trace(curve, points, &cons, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub starts: usize,
    /// Converged starts for the systems W_p, W_q and W_{p,q}.
    pub converged_p: usize,
    pub converged_q: usize,
    pub converged_pq: usize,
    pub note: String,
}

fn rc(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn perturbed(f: &BinaryForm, eps: f64, rng: &mut ChaCha8Rng) -> BinaryForm {
    let s = f.norm() / (f.degree() as f64 + 1.0).sqrt();
    BinaryForm::new(f.coeffs().iter().map(|x| x + rc(rng) * eps * s).collect())
}

/// Whether the system through the given points has a solution near a
/// random perturbation of `anchor` that is an honest member of W.
fn attempt(anchor: &ParamCurve, points: &[SurfacePoint], targets: &[SurfacePoint], rng: &mut ChaCha8Rng) -> bool {
    let m = anchor.m();
    let start = ParamCurve {
        u: [perturbed(&anchor.u[0], 0.3, rng), perturbed(&anchor.u[1], 0.3, rng)],
        v: [perturbed(&anchor.v[0], 0.3, rng), perturbed(&anchor.v[1], 0.3, rng)],
        base_preimages: anchor.base_preimages.iter().map(|z| ProjPoint::new(z.z0, z.z1 + rc(rng) * 0.1).normalized()).collect(),
        node_pairs: Vec::new(),
    };
    let cons: Vec<IncidenceConstraint> = targets.iter().map(|p| IncidenceConstraint::ThroughPoint { p: *p, z: ProjPoint::affine(rc(rng)) }).collect();
    let sys = ConstrainedSystem::new(&start, points, &cons);
    let x0 = sys.pack(&start, &sys.tracked());
    let opts = NewtonOptions { tol: 1e-11, max_iter: 40, max_step: 2.0 };
    let Ok((x, _)) = nodal_curve::gauss_newton(|y| sys.eval(y), x0, opts) else {
        return false;
    };
    let Ok(curve) = sys.curve_at(&x) else {
        return false;
    };
    curve.node_pairs.len() + 1 == m && curve.coprimality() > 1e-4 && preimage_gap(&curve, &rebind(&cons, &sys.tracked_at(&x))) > 1e-4
}

/// Random Newton starts for the systems "through p", "through q" and
/// "through p and q", counting starts that converge to members of W. Zero
/// counts are consistent with emptiness but do not prove it.
pub fn empty_locus_probe(anchor: &ParamCurve, points: &[SurfacePoint], p: &SurfacePoint, q: &SurfacePoint, starts: usize, seed: u64) -> Result<ProbeReport> {
    if p.dist(q) < 1e-9 {
        return Err(Error::DegenerateInput("p and q coincide".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = |targets: &[SurfacePoint]| (0..starts).filter(|_| attempt(anchor, points, targets, &mut rng)).count();
    let converged_p = count(&[*p]);
    let converged_q = count(&[*q]);
    let converged_pq = count(&[*p, *q]);
    Ok(ProbeReport {
        starts,
        converged_p,
        converged_q,
        converged_pq,
        note: "counts of random Newton starts reaching members of W; zero counts are evidence of emptiness, not a proof".into(),
    })
}
