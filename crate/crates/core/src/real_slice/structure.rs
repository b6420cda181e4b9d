use serde::{Deserialize, Serialize};

use crate::binary_forms::{BinaryForm, ProjPoint, QuadraticClass};
use crate::conformal::{self, Delta};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CVec, C64, ONE};
use crate::nodal_curve::{ParamCurve, StateLayout};
use crate::surface_config::SurfacePoint;

/// Relative tolerance for the functional equation of a real member.
pub const EQUIVARIANCE_TOL: f64 = 1e-8;
/// Tolerance of the fixed-point equation for real quadratic classes.
pub const REAL_TOL: f64 = 1e-8;

/// Real structure on one factor of P¹×P¹.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorReal {
    /// (x0, x1) ↦ (x̄0, x̄1), with the real circle as fixed locus.
    Standard,
    /// (x0, x1) ↦ (−x̄1, x̄0), without fixed points.
    Antipodal,
}

impl FactorReal {
    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        match self {
            FactorReal::Standard => ProjPoint::new(p.z0.conj(), p.z1.conj()),
            FactorReal::Antipodal => p.antipode(),
        }
    }

    /// The pair of forms of σ ∘ f ∘ σ̃ for f = (F0 : F1) and σ̃ the antipodal
    /// map of the source.
    pub fn conjugate_pair(&self, f: &[BinaryForm; 2]) -> [BinaryForm; 2] {
        let (a0, a1) = (f[0].antipodal_conjugate(), f[1].antipodal_conjugate());
        match self {
            FactorReal::Standard => [a0, a1],
            FactorReal::Antipodal => [a1.scaled(-ONE), a0],
        }
    }

    /// Whether the action on pairs of forms of degree d is an involution,
    /// i.e. whether equivariant maps of that degree exist.
    pub fn admits_degree(&self, d: usize) -> bool {
        match self {
            FactorReal::Standard => d % 2 == 0,
            FactorReal::Antipodal => d % 2 == 1,
        }
    }
}

/// Anti-holomorphic involution σ of P¹×P¹ acting factorwise, lifted to the
/// antipodal map of the normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealStructure {
    pub u: FactorReal,
    pub v: FactorReal,
}

impl RealStructure {
    pub fn standard() -> Self {
        RealStructure { u: FactorReal::Standard, v: FactorReal::Standard }
    }

    pub fn apply(&self, p: &SurfacePoint) -> SurfacePoint {
        SurfacePoint::new(self.u.apply(&p.u), self.v.apply(&p.v))
    }

    /// The maps of σ ∘ φ ∘ σ̃.
    pub fn conjugate_maps(&self, u: &[BinaryForm; 2], v: &[BinaryForm; 2]) -> ([BinaryForm; 2], [BinaryForm; 2]) {
        (self.u.conjugate_pair(u), self.v.conjugate_pair(v))
    }

    /// Scalars λ_U, λ_V with σ ∘ φ ∘ σ̃ = (λ_U U, λ_V V) by least squares, and
    /// the larger relative residual.
    pub fn equivariance(&self, curve: &ParamCurve) -> ([C64; 2], f64) {
        let (cu, cv) = self.conjugate_maps(&curve.u, &curve.v);
        let flat = |f: &[BinaryForm; 2]| -> Vec<C64> { f.iter().flat_map(|g| g.coeffs().to_vec()).collect() };
        let (lu, ru) = linalg::fit_scalar(&flat(&cu), &flat(&curve.u));
        let (lv, rv) = linalg::fit_scalar(&flat(&cv), &flat(&curve.v));
        ([lu, lv], ru.max(rv))
    }

    /// σ acting on a first-order variation of a real member with equivariance
    /// scalars λ.
    pub fn act_on_delta(&self, delta: &Delta, lambdas: [C64; 2]) -> Delta {
        let (u, v) = self.conjugate_maps(&delta.u, &delta.v);
        Delta { u: u.map(|f| f.scaled(ONE / lambdas[0])), v: v.map(|f| f.scaled(ONE / lambdas[1])) }
    }

    /// σ acting on the coefficient part of a state.
    pub fn act_on_coeffs(&self, layout: &StateLayout, y: &CVec, lambdas: [C64; 2]) -> CVec {
        let d = self.act_on_delta(&Delta::from_state(layout, y), lambdas);
        d.to_state(layout).rows(0, layout.coeff_len()).into_owned()
    }

    /// ‖σ(y) − y‖ / ‖y‖ on the coefficient part of a state.
    pub fn state_residual(&self, layout: &StateLayout, y: &CVec, lambdas: [C64; 2]) -> f64 {
        let yc = y.rows(0, layout.coeff_len());
        (self.act_on_coeffs(layout, y, lambdas) - yc).norm() / yc.norm()
    }
}

/// Constants of a real member: θ(σδ) = κ·conj(θ_δ ∘ antipode) with
/// e^{2iθ} = −κ and h = (−1)^m e^{2iθ}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealStructureData {
    pub structure: RealStructure,
    pub h: C64,
    pub theta_phase: f64,
    /// Each node preimage pair as ((a, b), (−b̄, ā)).
    pub node_pairing: Vec<(ProjPoint, ProjPoint)>,
    pub lambdas: [C64; 2],
    /// Largest distance between a node partner and the antipode of the other.
    pub pairing_residual: f64,
    /// Largest spread among the estimates of κ from different components and
    /// tangent vectors.
    pub kappa_spread: f64,
}

impl RealStructureData {
    pub fn phase(&self) -> C64 {
        C64::from_polar(1.0, self.theta_phase)
    }
}

fn unit(p: &ProjPoint) -> ProjPoint {
    let s = p.scale();
    ProjPoint::new(p.z0 / s, p.z1 / s)
}

/// Estimates of κ from the three components of θ(σδ) against θ_δ.
pub fn kappa_estimates(theta: &QuadraticClass, theta_sigma: &QuadraticClass) -> Vec<C64> {
    let scale = theta.norm();
    let mut out = Vec::new();
    for (num, den) in [(theta_sigma.a, theta.c.conj()), (theta_sigma.b, -theta.b.conj()), (theta_sigma.c, theta.a.conj())] {
        if den.norm() > 1e-3 * scale {
            out.push(num / den);
        }
    }
    out
}

/// h, the phase θ and the node pairing of a member invariant under σ.
pub fn real_structure_data(curve: &ParamCurve, structure: &RealStructure) -> Result<RealStructureData> {
    let (lambdas, res) = structure.equivariance(curve);
    if res > EQUIVARIANCE_TOL {
        return Err(Error::NotInRealSubspace(res));
    }
    let mut pairing_residual = 0.0f64;
    let mut node_pairing = Vec::new();
    for (s, t) in &curve.node_pairs {
        pairing_residual = pairing_residual.max(t.dist(&s.antipode()));
        let s = unit(s);
        node_pairing.push((s, s.antipode()));
    }
    let mut estimates = Vec::new();
    for tv in conformal::tangent_basis(curve)? {
        let sd = structure.act_on_delta(&tv.delta, lambdas);
        let ts = conformal::theta_of(curve, &sd)?;
        estimates.extend(kappa_estimates(&tv.theta, &ts));
    }
    if estimates.is_empty() {
        return Err(Error::DegenerateInput("no tangent vector with a usable θ".into()));
    }
    let kappa = estimates.iter().sum::<C64>() / estimates.len() as f64;
    let kappa_spread = estimates.iter().map(|k| (k - kappa).norm()).fold(0.0, f64::max);
    let e2 = -kappa;
    let sign = if curve.m() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(RealStructureData {
        structure: *structure,
        h: e2 * sign,
        theta_phase: e2.arg() / 2.0,
        node_pairing,
        lambdas,
        pairing_residual,
        kappa_spread,
    })
}

/// The antilinear involution on quadratic classes whose fixed points are the
/// real tangent directions.
pub fn sigma_quadratic(q: &QuadraticClass, data: &RealStructureData) -> QuadraticClass {
    let e = C64::from_polar(1.0, 2.0 * data.theta_phase);
    QuadraticClass::new(-e * q.c.conj(), e * q.b.conj(), -e * q.a.conj())
}

/// (x1, x2, x3) with b = e^{iθ} x1, a = e^{iθ}(x2 + i x3)/2,
/// c = e^{iθ}(−x2 + i x3)/2.
pub fn real_coordinates(q: &QuadraticClass, data: &RealStructureData) -> Result<[f64; 3]> {
    let s = sigma_quadratic(q, data);
    let scale = q.norm();
    let res = QuadraticClass::new(s.a - q.a, s.b - q.b, s.c - q.c).norm();
    let rel = if scale > 0.0 { res / scale } else { 0.0 };
    if rel > REAL_TOL {
        return Err(Error::NotInRealSubspace(rel));
    }
    let e = ONE / data.phase();
    let x1 = e * q.b;
    let x2 = e * (q.a - q.c);
    let x3 = c(0.0, -1.0) * e * (q.a + q.c);
    Ok([x1.re, x2.re, x3.re])
}

pub fn from_real_coordinates(x: &[f64; 3], data: &RealStructureData) -> QuadraticClass {
    let e = data.phase();
    let i = c(0.0, 1.0);
    QuadraticClass::new(e * 0.5 * (x[1] + i * x[2]), e * x[0], e * 0.5 * (-x[1] + i * x[2]))
}

/// A structure whose only data is a phase, for working with the model
/// coordinates directly.
pub fn model_data(theta_phase: f64) -> RealStructureData {
    RealStructureData {
        structure: RealStructure::standard(),
        h: C64::from_polar(1.0, 2.0 * theta_phase),
        theta_phase,
        node_pairing: Vec::new(),
        lambdas: [ONE, ONE],
        pairing_residual: 0.0,
        kappa_spread: 0.0,
    }
}

/// The form ∏ (b_i z0 − a_i z1)(b̄_i z0 + ā_i z1) over the node pairing.
pub fn node_product(data: &RealStructureData) -> BinaryForm {
    let mut f = BinaryForm::constant(ONE);
    for (s, t) in &data.node_pairing {
        f = f.mul(&BinaryForm::vanishing_at(s)).mul(&BinaryForm::vanishing_at(t));
    }
    f
}
