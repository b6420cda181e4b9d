//! Intersection theory on blow-ups of P¹×P¹ at n points.
//!
//! A class is stored as (k, l; m_1..m_n) meaning μ*O(k,l) − Σ m_i E_i, so the
//! strict transform of a curve through a point with multiplicity m_i has a
//! positive entry m_i. With E_i·E_j = −δ_ij the pairing is
//! A·B = k l' + k' l − Σ m_i m'_i.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeContext {
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DivisorClass {
    pub k: i64,
    pub l: i64,
    pub mults: Vec<i64>,
}

impl DivisorClass {
    pub fn new(k: i64, l: i64, mults: Vec<i64>) -> Self {
        DivisorClass { k, l, mults }
    }

    /// Pullback of O(k,l) with no exceptional part.
    pub fn pullback(ctx: LatticeContext, k: i64, l: i64) -> Self {
        DivisorClass { k, l, mults: vec![0; ctx.n] }
    }

    /// The exceptional curve E_j (stored multiplicity −1).
    pub fn exceptional(ctx: LatticeContext, j: usize) -> Self {
        let mut mults = vec![0; ctx.n];
        mults[j] = -1;
        DivisorClass { k: 0, l: 0, mults }
    }

    /// The class (m, 2; 1, …, 1) on the blow-up at 2m points.
    pub fn family(m: i64) -> Self {
        DivisorClass { k: m, l: 2, mults: vec![1; 2 * m as usize] }
    }

    pub fn context(&self) -> LatticeContext {
        LatticeContext { n: self.mults.len() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.mults.len(), other.mults.len());
        DivisorClass {
            k: self.k + other.k,
            l: self.l + other.l,
            mults: self.mults.iter().zip(&other.mults).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn self_intersection(&self) -> i64 {
        2 * self.k * self.l - self.mults.iter().map(|m| m * m).sum::<i64>()
    }

    /// Parse `k,l:m1,...,mn` (the part after the colon may be empty).
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, t),
            None => (s, ""),
        };
        let kl: Vec<i64> = head
            .split(',')
            .map(|x| x.trim().parse::<i64>().map_err(|e| format!("bad bidegree entry '{x}': {e}")))
            .collect::<std::result::Result<_, _>>()?;
        if kl.len() != 2 {
            return Err(format!("expected two bidegree entries, got {}", kl.len()));
        }
        let mults = if tail.trim().is_empty() {
            Vec::new()
        } else {
            tail.split(',')
                .map(|x| x.trim().parse::<i64>().map_err(|e| format!("bad multiplicity '{x}': {e}")))
                .collect::<std::result::Result<_, _>>()?
        };
        Ok(DivisorClass { k: kl[0], l: kl[1], mults })
    }
}

impl std::fmt::Display for DivisorClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let m: Vec<String> = self.mults.iter().map(|x| x.to_string()).collect();
        write!(f, "{},{}:{}", self.k, self.l, m.join(","))
    }
}

pub fn intersect(a: &DivisorClass, b: &DivisorClass) -> Result<i64> {
    if a.mults.len() != b.mults.len() {
        return Err(Error::ContextMismatch { left: a.mults.len(), right: b.mults.len() });
    }
    Ok(a.k * b.l + b.k * a.l - a.mults.iter().zip(&b.mults).map(|(x, y)| x * y).sum::<i64>())
}

/// K = μ*O(−2,−2) + Σ E_i.
pub fn canonical_class(ctx: LatticeContext) -> DivisorClass {
    DivisorClass { k: -2, l: -2, mults: vec![-1; ctx.n] }
}

/// Arithmetic genus of the class, δ = (C² + C·K)/2 + 1: the node count of a
/// rational member with only nodes.
pub fn adjunction_nodes(c: &DivisorClass) -> Result<i64> {
    let k = canonical_class(c.context());
    let s = c.self_intersection() + intersect(c, &k)?;
    if s.rem_euclid(2) != 0 {
        return Err(Error::ParityViolation(s));
    }
    Ok(s / 2 + 1)
}

/// Node count of a union of nodal rational curves: the nodes of each
/// component plus their pairwise intersections, δ = Σ δ(C_i) + Σ_{i<j} C_i·C_j.
pub fn nodes_of_union(components: &[DivisorClass]) -> Result<i64> {
    let mut total = 0;
    for (i, a) in components.iter().enumerate() {
        total += adjunction_nodes(a)?;
        for b in &components[i + 1..] {
            total += intersect(a, b)?;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeveriDimension {
    pub dimension: i64,
    /// False when C² + 1 − 2δ ≤ 0, outside the range where the count is a theorem.
    pub within_hypothesis: bool,
}

pub fn severi_dimension(c2: i64, delta: i64) -> SeveriDimension {
    let dimension = c2 + 1 - 2 * delta;
    SeveriDimension { dimension, within_hypothesis: dimension > 0 }
}

/// dim |C| = C² + 1 − δ, valid when C² > 2δ − 2.
pub fn system_dimension(c2: i64, delta: i64) -> Result<i64> {
    if c2 <= 2 * delta - 2 {
        return Err(Error::HypothesisViolation(format!("C^2 = {c2} is not greater than 2*delta - 2 = {}", 2 * delta - 2)));
    }
    Ok(c2 + 1 - delta)
}

/// Largest |k'|, |l'| of a class E with C·E = 0 and E² = −1, from the
/// negative definiteness of C^⊥ when C² > 0 (Hodge index).
fn orthogonal_box_bound(c: &DivisorClass) -> Option<i64> {
    if c.self_intersection() <= 0 {
        return None;
    }
    let n = c.mults.len() + 2;
    let mut g = DMatrix::<f64>::zeros(n, n);
    g[(0, 1)] = 1.0;
    g[(1, 0)] = 1.0;
    for i in 2..n {
        g[(i, i)] = -1.0;
    }
    let mut cv = nalgebra::DVector::<f64>::zeros(n);
    cv[0] = c.k as f64;
    cv[1] = c.l as f64;
    for (i, m) in c.mults.iter().enumerate() {
        cv[i + 2] = *m as f64;
    }
    // the linear functional x ↦ C·x has coefficient vector G C
    let w = &g * &cv;
    let w = w.normalize();
    // orthonormal basis of w^⊥ via Householder-style projection and Gram–Schmidt
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    for j in 0..n {
        let mut v = nalgebra::DVector::<f64>::zeros(n);
        v[j] = 1.0;
        v -= &w * w.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let nv = v.norm();
        if nv > 1e-9 {
            basis.push(v / nv);
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    let p = DMatrix::from_columns(&basis);
    let h = p.transpose() * &g * &p;
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top >= -1e-12 {
        return None;
    }
    Some(((1.0 / -top).sqrt() * (1.0 + 1e-9) + 1e-9).floor() as i64)
}

/// Search cap on k', l' when C² ≤ 0 and no definite bound exists.
const FALLBACK_BOX: i64 = 40;

/// Classes E = (k', l'; m'_i) with k', l', m'_i ≥ 0 satisfying E² = −1, K·E = −1
/// and C·E = 0, followed by the pure exceptional classes E_j with C·E_j = 0.
///
/// E² = K·E = −1 force Σm' = 2k'+2l'−1 and Σm'² = 2k'l'+1, and Cauchy–Schwarz
/// gives (2k'+2l'−1)² ≤ n(2k'l'+1), which is used as a filter. The bidegree
/// range itself is bounded because C^⊥ is negative definite when C² > 0.
pub fn enumerate_candidate_minus_one_classes(ctx: LatticeContext, c: &DivisorClass) -> Vec<DivisorClass> {
    assert_eq!(ctx.n, c.mults.len(), "class and context disagree");
    let n = ctx.n as i64;
    let bound = orthogonal_box_bound(c).unwrap_or(FALLBACK_BOX);
    let mut out = Vec::new();
    for kp in 0..=bound {
        for lp in 0..=bound {
            let s = 2 * kp + 2 * lp - 1;
            let t = 2 * kp * lp + 1;
            if s < 0 || s * s > n * t {
                continue;
            }
            let target = c.k * lp + c.l * kp;
            let mut current = vec![0i64; ctx.n];
            fill_mults(&c.mults, 0, s, t, target, &mut current, &mut |m| {
                out.push(DivisorClass { k: kp, l: lp, mults: m.to_vec() });
            });
        }
    }
    for j in 0..ctx.n {
        let e = DivisorClass::exceptional(ctx, j);
        if intersect(c, &e).unwrap() == 0 {
            out.push(e);
        }
    }
    out
}

/// Enumerate nonnegative integer vectors with given sum, sum of squares and
/// weighted sum Σ w_i m_i.
fn fill_mults(
    weights: &[i64],
    pos: usize,
    rem_sum: i64,
    rem_sq: i64,
    rem_target: i64,
    current: &mut Vec<i64>,
    emit: &mut dyn FnMut(&[i64]),
) {
    let left = (weights.len() - pos) as i64;
    if left == 0 {
        if rem_sum == 0 && rem_sq == 0 && rem_target == 0 {
            emit(current);
        }
        return;
    }
    if rem_sum < 0 || rem_sq < rem_sum || rem_sum * rem_sum > left * rem_sq {
        return;
    }
    let mut v = 0;
    while v <= rem_sum && v * v <= rem_sq {
        current[pos] = v;
        fill_mults(weights, pos + 1, rem_sum - v, rem_sq - v * v, rem_target - weights[pos] * v, current, emit);
        v += 1;
    }
    current[pos] = 0;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalityReport {
    /// True iff no numerical (−1)-class is contracted by the system. A listed
    /// candidate is only numerical; whether it is represented by an
    /// irreducible curve is not decided here.
    pub numerically_minimal: bool,
    pub candidates: Vec<DivisorClass>,
}

pub fn minimality_report(ctx: LatticeContext, c: &DivisorClass) -> MinimalityReport {
    let candidates = enumerate_candidate_minus_one_classes(ctx, c);
    MinimalityReport { numerically_minimal: candidates.is_empty(), candidates }
}

/// Everything the lattice layer says about a class, as printed by the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeSummary {
    pub class: String,
    pub self_intersection: i64,
    pub k_dot_c: i64,
    pub nodes: i64,
    pub severi_dim: i64,
    pub severi_within_hypothesis: bool,
    pub system_dim: Option<i64>,
    pub index: Option<i64>,
    pub minimal: bool,
    pub candidates: Vec<String>,
}

pub fn summarize(c: &DivisorClass) -> Result<LatticeSummary> {
    let ctx = c.context();
    let c2 = c.self_intersection();
    let kc = intersect(c, &canonical_class(ctx))?;
    let delta = adjunction_nodes(c)?;
    let sev = severi_dimension(c2, delta);
    let report = minimality_report(ctx, c);
    Ok(LatticeSummary {
        class: c.to_string(),
        self_intersection: c2,
        k_dot_c: kc,
        nodes: delta,
        severi_dim: sev.dimension,
        severi_within_hypothesis: sev.within_hypothesis,
        system_dim: system_dimension(c2, delta).ok(),
        index: if c2 % 2 == 0 { Some(c2 / 2) } else { None },
        minimal: report.numerically_minimal,
        candidates: report.candidates.iter().map(|d| d.to_string()).collect(),
    })
}
