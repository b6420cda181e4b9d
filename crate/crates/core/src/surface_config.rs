//! Blow-up configurations: 2m points of P¹×P¹ split 2k / 2(m−k) across a
//! transversal pair of graph curves D1 (bidegree (k,1)) and D2 (bidegree
//! (m−k,1)), including the ℂ*-symmetric family and its toric special case.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::biform::BiForm;
use crate::binary_forms::{self, BinaryForm, ProjPoint, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::linalg::{c, C64, ONE};

/// Minimum chordal separation between distinct configuration points.
pub const MIN_SEPARATION: f64 = 1e-6;

const MAX_ATTEMPTS: usize = 64;

/// A point of P¹×P¹. Serialized as `[u, v]` with each coordinate either
/// `[re, im]` (affine value) or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub u: ProjPoint,
    pub v: ProjPoint,
}

impl SurfacePoint {
    pub fn new(u: ProjPoint, v: ProjPoint) -> Self {
        SurfacePoint { u: u.normalized(), v: v.normalized() }
    }

    pub fn affine(u: C64, v: C64) -> Self {
        SurfacePoint::new(ProjPoint::affine(u), ProjPoint::affine(v))
    }

    /// max of the chordal distances in the two factors.
    pub fn dist(&self, other: &SurfacePoint) -> f64 {
        self.u.dist(&other.u).max(self.v.dist(&other.v))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoordRepr {
    Finite([f64; 2]),
    Inf(String),
}

fn coord_repr(p: &ProjPoint) -> CoordRepr {
    let n = p.normalized();
    if n.z0.norm() < 1e-300 {
        CoordRepr::Inf("inf".into())
    } else {
        let z = n.z1 / n.z0;
        CoordRepr::Finite([z.re, z.im])
    }
}

fn coord_from(r: CoordRepr) -> std::result::Result<ProjPoint, String> {
    match r {
        CoordRepr::Finite([re, im]) => Ok(ProjPoint::affine(c(re, im))),
        CoordRepr::Inf(s) if s == "inf" => Ok(ProjPoint::infinity()),
        CoordRepr::Inf(s) => Err(format!("unknown coordinate '{s}'")),
    }
}

impl Serialize for SurfacePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (coord_repr(&self.u), coord_repr(&self.v)).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SurfacePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (u, v): (CoordRepr, CoordRepr) = Deserialize::deserialize(d)?;
        let u = coord_from(u).map_err(serde::de::Error::custom)?;
        let v = coord_from(v).map_err(serde::de::Error::custom)?;
        Ok(SurfacePoint::new(u, v))
    }
}

/// The graph v = P(u)/Q(u), i.e. the zero set of v1·Q(u) − v0·P(u).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphCurve {
    pub num: BinaryForm,
    pub den: BinaryForm,
}

impl GraphCurve {
    pub fn degree(&self) -> usize {
        self.num.degree()
    }

    pub fn form(&self) -> BiForm {
        BiForm::from_v_slices(&[self.num.scaled(-ONE), self.den.clone()])
    }

    pub fn eval(&self, p: &SurfacePoint) -> C64 {
        p.v.z1 * self.den.eval(&p.u) - p.v.z0 * self.num.eval(&p.u)
    }

    /// Relative residual |F(p)| / (scale of F at p).
    pub fn residual(&self, p: &SurfacePoint) -> f64 {
        let scale = (self.num.norm() + self.den.norm()) * p.u.scale().powi(self.degree() as i32) * p.v.scale();
        self.eval(p).norm() / scale
    }

    /// The point of the graph over u.
    pub fn point_over(&self, u: &ProjPoint) -> SurfacePoint {
        SurfacePoint::new(*u, ProjPoint::new(self.den.eval(u), self.num.eval(u)))
    }

    /// Smallest chordal distance between roots of numerator and denominator;
    /// near zero means the graph degenerates into a reducible curve.
    pub fn coprimality(&self) -> f64 {
        if self.degree() == 0 {
            return 1.0;
        }
        let rn = binary_forms::roots(&self.num);
        let rd = binary_forms::roots(&self.den);
        let mut best: f64 = 1.0;
        for (a, _) in &rn.roots {
            for (b, _) in &rd.roots {
                best = best.min(a.dist(b));
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCurvePair {
    pub d1: GraphCurve,
    /// D2 with the constant c already folded into its numerator.
    pub d2: GraphCurve,
    pub c: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assignment {
    D1,
    D2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfig {
    pub m: usize,
    pub k: usize,
    pub points: Vec<SurfacePoint>,
    pub assignment: Vec<Assignment>,
    /// The split pair the points were placed on; absent for configurations
    /// produced from a curve rather than from a pair (real members).
    pub curves: Option<SplitCurvePair>,
    pub seed: u64,
    #[serde(default)]
    pub toric: bool,
}

impl PointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.k < 1 || self.k >= self.m {
            return Err(Error::InvalidConfig(format!("need m ≥ 2 and 1 ≤ k < m, got m={} k={}", self.m, self.k)));
        }
        if self.points.len() != 2 * self.m || self.assignment.len() != self.points.len() {
            return Err(Error::InvalidConfig(format!("expected {} points with assignments", 2 * self.m)));
        }
        let sep = min_separation(&self.points);
        if sep < MIN_SEPARATION {
            return Err(Error::InfinitelyNearPoints(sep));
        }
        let Some(pair) = &self.curves else {
            return Ok(());
        };
        let n1 = self.assignment.iter().filter(|a| **a == Assignment::D1).count();
        if n1 != 2 * self.k {
            return Err(Error::InvalidConfig(format!("{n1} points on D1, expected {}", 2 * self.k)));
        }
        if pair.d1.degree() != self.k || pair.d2.degree() != self.m - self.k {
            return Err(Error::InvalidConfig("curve degrees do not match (k, m−k)".into()));
        }
        for (p, a) in self.points.iter().zip(&self.assignment) {
            let (own, other) = match a {
                Assignment::D1 => (&pair.d1, &pair.d2),
                Assignment::D2 => (&pair.d2, &pair.d1),
            };
            let r = own.residual(p);
            if r > 1e3 * DEFAULT_TOL {
                return Err(Error::InvalidConfig(format!("point off its curve (residual {r:.2e})")));
            }
            if other.residual(p) < 1e-8 {
                return Err(Error::InvalidConfig("point lies on both curves".into()));
            }
        }
        Ok(())
    }

    pub fn point_u(&self) -> Vec<ProjPoint> {
        self.points.iter().map(|p| p.u).collect()
    }
}

pub fn min_separation(points: &[SurfacePoint]) -> f64 {
    let mut best: f64 = 1.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(points[i].dist(&points[j]));
        }
    }
    best
}

fn random_complex(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    loop {
        let z = c(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        if z.norm() <= radius {
            return z;
        }
    }
}

fn random_form(rng: &mut ChaCha8Rng, d: usize) -> BinaryForm {
    BinaryForm::new((0..=d).map(|_| random_complex(rng, 1.0)).collect())
}

/// A random configuration of index m with 2k points on D1; deterministic in seed.
pub fn random_config(m: usize, k: usize, seed: u64) -> Result<PointConfig> {
    if m < 2 || k < 1 || k >= m {
        return Err(Error::InvalidConfig(format!("need m ≥ 2 and 1 ≤ k < m, got m={m} k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let d1 = GraphCurve { num: random_form(&mut rng, k), den: random_form(&mut rng, k) };
        let d2 = GraphCurve { num: random_form(&mut rng, m - k), den: random_form(&mut rng, m - k) };
        if d1.coprimality() < 1e-3 || d2.coprimality() < 1e-3 {
            continue;
        }
        let pair = SplitCurvePair { d1, d2, c: [1.0, 0.0] };
        if transversality_check(&pair).is_err() {
            continue;
        }
        let mut points = Vec::new();
        let mut assignment = Vec::new();
        for (curve, count, tag) in [(&pair.d1, 2 * k, Assignment::D1), (&pair.d2, 2 * (m - k), Assignment::D2)] {
            for _ in 0..count {
                let u = ProjPoint::affine(random_complex(&mut rng, 1.5));
                points.push(curve.point_over(&u));
                assignment.push(tag);
            }
        }
        let cfg = PointConfig { m, k, points, assignment, curves: Some(pair), seed, toric: false };
        if cfg.validate().is_ok() && min_separation(&cfg.points) > 1e-2 {
            return Ok(cfg);
        }
    }
    Err(Error::InvalidConfig(format!("no transversal configuration after {MAX_ATTEMPTS} attempts")))
}

/// The m intersection points of D1 and D2, failing if two of them collide.
pub fn transversality_check(pair: &SplitCurvePair) -> Result<Vec<SurfacePoint>> {
    let g = pair.d1.num.mul(&pair.d2.den).sub(&pair.d2.num.mul(&pair.d1.den));
    let m = g.degree();
    if g.max_abs() < 1e-12 * (pair.d1.num.norm() * pair.d2.den.norm()).max(1e-300) {
        return Err(Error::TangentialIntersection { separation: 0.0 });
    }
    let r = binary_forms::roots(&g);
    if r.roots.len() != m || r.roots.iter().any(|(_, mult)| *mult > 1) || r.min_separation < 1e-5 {
        return Err(Error::TangentialIntersection { separation: r.min_separation.min(if r.roots.len() == m { 1.0 } else { 0.0 }) });
    }
    Ok(r.roots
        .iter()
        .map(|(u, _)| {
            // pick the better-conditioned curve to read off v
            let p1 = pair.d1.point_over(u);
            if pair.d1.num.eval(u).norm() + pair.d1.den.eval(u).norm() > 1e-8 {
                p1
            } else {
                pair.d2.point_over(u)
            }
        })
        .collect())
}

fn same(a: &ProjPoint, b: &ProjPoint) -> bool {
    a.dist(b) < 1e-9
}

fn disjoint(xs: &[ProjPoint], ys: &[ProjPoint]) -> bool {
    xs.iter().all(|x| ys.iter().all(|y| !same(x, y)))
}

fn star_holds(a_in: &[ProjPoint], a_out: &[ProjPoint], b_in: &[ProjPoint], b_out: &[ProjPoint]) -> bool {
    disjoint(a_in, a_out) && disjoint(b_in, b_out) && disjoint(a_in, b_in) && disjoint(a_out, b_out)
}

/// Condition (∗) for the split I, allowing independent renumbering of the a's
/// and b's. Only which values land in I matters, so the search runs over
/// |I|-subsets of each list, which covers every pair of permutations.
pub fn condition_star_check(m: usize, i_set: &[usize], a: &[ProjPoint], b: &[ProjPoint]) -> bool {
    let size = i_set.len();
    if size == 0 || size >= m || a.len() != m || b.len() != m {
        return false;
    }
    let idx: Vec<usize> = (0..m).collect();
    let split = |v: &[ProjPoint], chosen: &[usize]| -> (Vec<ProjPoint>, Vec<ProjPoint>) {
        let inside = chosen.iter().map(|&i| v[i]).collect();
        let outside = idx.iter().filter(|i| !chosen.contains(i)).map(|&i| v[i]).collect();
        (inside, outside)
    };
    for sa in idx.iter().copied().combinations(size) {
        let (a_in, a_out) = split(a, &sa);
        for sb in idx.iter().copied().combinations(size) {
            let (b_in, b_out) = split(b, &sb);
            if star_holds(&a_in, &a_out, &b_in, &b_out) {
                return true;
            }
        }
    }
    false
}

/// Condition (∗) for some nonempty proper split.
pub fn condition_star_any(m: usize, a: &[ProjPoint], b: &[ProjPoint]) -> bool {
    (1..m).any(|size| condition_star_check(m, &(0..size).collect::<Vec<_>>(), a, b))
}

/// ℂ*-symmetric configuration: p_i = (a_i, 0), q_i = (b_i, ∞), with
/// D1: v = ∏_{i∈I}(u−a_i)/∏_{i∈I}(u−b_i) and D2: v = c∏_{i∉I}(u−a_i)/∏_{i∉I}(u−b_i).
/// The values are used in the given numbering.
pub fn cstar_config(m: usize, i_set: &[usize], a: &[ProjPoint], b: &[ProjPoint], cc: C64) -> Result<PointConfig> {
    if a.len() != m || b.len() != m || i_set.is_empty() || i_set.len() >= m || i_set.iter().any(|&i| i >= m) {
        return Err(Error::InvalidConfig("need m values of a and b and a nonempty proper I".into()));
    }
    let inside = |i: &usize| i_set.contains(i);
    let pick = |v: &[ProjPoint], want: bool| -> Vec<ProjPoint> { (0..m).filter(|i| inside(i) == want).map(|i| v[i]).collect() };
    let (a_in, a_out, b_in, b_out) = (pick(a, true), pick(a, false), pick(b, true), pick(b, false));
    if !star_holds(&a_in, &a_out, &b_in, &b_out) {
        return Err(Error::ConditionStarViolated);
    }
    let d1 = GraphCurve { num: product_vanishing(&a_in), den: product_vanishing(&b_in) };
    let d2 = GraphCurve { num: product_vanishing(&a_out).scaled(cc), den: product_vanishing(&b_out) };
    let pair = SplitCurvePair { d1, d2, c: [cc.re, cc.im] };
    transversality_check(&pair)?;
    let mut points = Vec::new();
    let mut assignment = Vec::new();
    for i in 0..m {
        points.push(SurfacePoint::new(a[i], ProjPoint::zero()));
        assignment.push(if inside(&i) { Assignment::D1 } else { Assignment::D2 });
    }
    for i in 0..m {
        points.push(SurfacePoint::new(b[i], ProjPoint::infinity()));
        assignment.push(if inside(&i) { Assignment::D1 } else { Assignment::D2 });
    }
    let is_zero_or_inf = |p: &ProjPoint| same(p, &ProjPoint::zero()) || same(p, &ProjPoint::infinity());
    let toric = a.iter().chain(b.iter()).all(is_zero_or_inf);
    let cfg = PointConfig { m, k: i_set.len(), points, assignment, curves: Some(pair), seed: 0, toric };
    cfg.validate()?;
    Ok(cfg)
}

fn product_vanishing(roots: &[ProjPoint]) -> BinaryForm {
    let mut f = BinaryForm::constant(ONE);
    // (u − a) for finite a, and the factor 1 for a = ∞
    for r in roots {
        let rep = match r.to_affine() {
            Some(a) => ProjPoint { z0: ONE, z1: a },
            None => ProjPoint::infinity(),
        };
        f = f.mul(&BinaryForm::vanishing_at(&rep));
    }
    f
}

/// The toric specialization of index m with |I| = k: p_i = (0,0), q_i = (∞,∞)
/// for i ∈ I and p_i = (∞,0), q_i = (0,∞) otherwise. For k ≥ 2 or m − k ≥ 2
/// points coincide (infinitely near), which is outside the supported range.
pub fn toric_config(m: usize, k: usize, cc: C64) -> Result<PointConfig> {
    let zero = ProjPoint::zero();
    let inf = ProjPoint::infinity();
    let a: Vec<ProjPoint> = (0..m).map(|i| if i < k { zero } else { inf }).collect();
    let b: Vec<ProjPoint> = (0..m).map(|i| if i < k { inf } else { zero }).collect();
    cstar_config(m, &(0..k).collect::<Vec<_>>(), &a, &b, cc)
}

/// The bidegree (m,2) class data implied by a configuration, for cross-checks
/// against the lattice layer.
pub fn family_class(cfg: &PointConfig) -> crate::picard_lattice::DivisorClass {
    crate::picard_lattice::DivisorClass::family(cfg.m as i64)
}
