//! Binary forms on P¹ with complex coefficients.
//!
//! A form of degree d is stored as d+1 coefficients, index j multiplying
//! z0^(d-j) z1^j. Dehomogenizing at z0 = 1 gives the ordinary polynomial in the
//! affine coordinate z = z1/z0 with ascending coefficients; (0,1) is the point
//! at infinity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Two distinct roots closer than this (chordal distance) are merged into one
/// root of higher multiplicity.
pub const ROOT_CLUSTER_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    pub z0: C64,
    pub z1: C64,
}

impl ProjPoint {
    pub fn new(z0: C64, z1: C64) -> Self {
        debug_assert!(z0.norm() + z1.norm() > 0.0, "projective point with both coordinates zero");
        ProjPoint { z0, z1 }
    }

    pub fn affine(z: C64) -> Self {
        ProjPoint { z0: ONE, z1: z }
    }

    pub fn infinity() -> Self {
        ProjPoint { z0: ZERO, z1: ONE }
    }

    pub fn zero() -> Self {
        ProjPoint { z0: ONE, z1: ZERO }
    }

    /// Index of the coordinate of largest modulus.
    pub fn chart(&self) -> usize {
        if self.z0.norm() >= self.z1.norm() {
            0
        } else {
            1
        }
    }

    /// Representative whose coordinate of largest modulus equals 1.
    pub fn normalized(&self) -> Self {
        let s = if self.chart() == 0 { self.z0 } else { self.z1 };
        ProjPoint { z0: self.z0 / s, z1: self.z1 / s }
    }

    /// Representative with coordinate `chart` equal to 1.
    pub fn in_chart(&self, chart: usize) -> Self {
        let s = if chart == 0 { self.z0 } else { self.z1 };
        ProjPoint { z0: self.z0 / s, z1: self.z1 / s }
    }

    /// z1/z0, or None at infinity.
    pub fn to_affine(&self) -> Option<C64> {
        if self.z0.norm() <= 1e-300 {
            None
        } else {
            Some(self.z1 / self.z0)
        }
    }

    pub fn coords(&self) -> [C64; 2] {
        [self.z0, self.z1]
    }

    pub fn scale(&self) -> f64 {
        (self.z0.norm_sqr() + self.z1.norm_sqr()).sqrt()
    }

    /// Chordal distance |z0 w1 − z1 w0| / (|z| |w|), in [0, 1].
    pub fn dist(&self, other: &ProjPoint) -> f64 {
        (self.z0 * other.z1 - self.z1 * other.z0).norm() / (self.scale() * other.scale())
    }

    pub fn proj_eq(&self, other: &ProjPoint, tol: f64) -> bool {
        self.dist(other) <= tol
    }

    /// The antipodal map (z0, z1) ↦ (−z̄1, z̄0).
    pub fn antipode(&self) -> Self {
        ProjPoint { z0: -self.z1.conj(), z1: self.z0.conj() }
    }

    /// Apply the linear map (z0,z1) ↦ (m00 z0 + m01 z1, m10 z0 + m11 z1).
    pub fn transform(&self, m: &[[C64; 2]; 2]) -> Self {
        ProjPoint {
            z0: m[0][0] * self.z0 + m[0][1] * self.z1,
            z1: m[1][0] * self.z0 + m[1][1] * self.z1,
        }
    }
}

/// The 2×2 determinant z0 w1 − z1 w0; vanishes iff the points coincide.
pub fn wedge(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0] * b[1] - a[1] * b[0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryForm {
    coeffs: Vec<C64>,
}

impl BinaryForm {
    pub fn new(coeffs: Vec<C64>) -> Self {
        assert!(!coeffs.is_empty(), "a binary form needs at least one coefficient");
        BinaryForm { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        BinaryForm { coeffs: vec![ZERO; degree + 1] }
    }

    pub fn constant(c: C64) -> Self {
        BinaryForm { coeffs: vec![c] }
    }

    /// z0^(d-j) z1^j.
    pub fn monomial(degree: usize, j: usize) -> Self {
        let mut f = Self::zero(degree);
        f.coeffs[j] = ONE;
        f
    }

    /// The linear form vanishing at p: p.z1·z0 − p.z0·z1.
    pub fn vanishing_at(p: &ProjPoint) -> Self {
        BinaryForm { coeffs: vec![p.z1, -p.z0] }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.coeffs)
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.coeffs)
    }

    /// True when every coefficient is at most `tol` in modulus (absolute).
    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }

    pub fn scaled(&self, s: C64) -> Self {
        BinaryForm { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree(), other.degree(), "adding forms of different degree");
        BinaryForm { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.degree(), other.degree(), "subtracting forms of different degree");
        BinaryForm { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        BinaryForm { coeffs: out }
    }

    pub fn pow(&self, e: usize) -> Self {
        let mut out = BinaryForm::constant(ONE);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Σ coeffs[j]·z0^(d−j)·z1^j, evaluated by Horner in the better-conditioned chart.
    pub fn eval(&self, p: &ProjPoint) -> C64 {
        let d = self.degree() as i32;
        if p.z0.norm() >= p.z1.norm() {
            let t = p.z1 / p.z0;
            let mut acc = ZERO;
            for c in self.coeffs.iter().rev() {
                acc = acc * t + c;
            }
            acc * p.z0.powi(d)
        } else {
            let s = p.z0 / p.z1;
            let mut acc = ZERO;
            for c in self.coeffs.iter() {
                acc = acc * s + c;
            }
            acc * p.z1.powi(d)
        }
    }

    /// Value of the dehomogenized polynomial at affine z.
    pub fn eval_affine(&self, z: C64) -> C64 {
        let mut acc = ZERO;
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// ∂/∂z0, a form of degree d−1 (zero form of degree 0 for constants).
    pub fn partial0(&self) -> Self {
        let d = self.degree();
        if d == 0 {
            return Self::zero(0);
        }
        BinaryForm {
            coeffs: (0..d).map(|j| self.coeffs[j] * ((d - j) as f64)).collect(),
        }
    }

    /// ∂/∂z1, a form of degree d−1. Equals the affine derivative d/dz.
    pub fn partial1(&self) -> Self {
        let d = self.degree();
        if d == 0 {
            return Self::zero(0);
        }
        BinaryForm {
            coeffs: (1..=d).map(|j| self.coeffs[j] * (j as f64)).collect(),
        }
    }

    /// Derivative with respect to the affine coordinate of `chart`: the free
    /// coordinate when the chart coordinate is held at 1.
    pub fn chart_derivative(&self, chart: usize) -> Self {
        if chart == 0 {
            self.partial1()
        } else {
            self.partial0()
        }
    }

    /// f(p0(s), p1(s)) for forms p0, p1 of equal degree.
    pub fn substitute(&self, p0: &BinaryForm, p1: &BinaryForm) -> Self {
        let d = self.degree();
        let mut pow0 = vec![BinaryForm::constant(ONE)];
        let mut pow1 = vec![BinaryForm::constant(ONE)];
        for k in 1..=d {
            pow0.push(pow0[k - 1].mul(p0));
            pow1.push(pow1[k - 1].mul(p1));
        }
        let mut out = Self::zero(d * p0.degree());
        for (j, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            let term = pow0[d - j].mul(&pow1[j]);
            for (k, t) in term.coeffs.iter().enumerate() {
                out.coeffs[k] += c * t;
            }
        }
        out
    }

    /// f(m00 z0 + m01 z1, m10 z0 + m11 z1).
    pub fn compose_linear(&self, m: &[[C64; 2]; 2]) -> Self {
        let l0 = BinaryForm { coeffs: vec![m[0][0], m[0][1]] };
        let l1 = BinaryForm { coeffs: vec![m[1][0], m[1][1]] };
        self.substitute(&l0, &l1)
    }

    /// The form f^σ(z) = conj(f(−z̄1, z̄0)); coefficient j is (−1)^j·conj(c_{d−j}).
    pub fn antipodal_conjugate(&self) -> Self {
        let d = self.degree();
        BinaryForm {
            coeffs: (0..=d)
                .map(|j| {
                    let c = self.coeffs[d - j].conj();
                    if j % 2 == 0 {
                        c
                    } else {
                        -c
                    }
                })
                .collect(),
        }
    }

    /// Scale so that the first coefficient above `tol·max` equals 1.
    pub fn monic_first(&self, tol: f64) -> Self {
        let scale = self.max_abs();
        match self.coeffs.iter().find(|c| c.norm() > tol * scale) {
            Some(&c0) => self.scaled(ONE / c0),
            None => self.clone(),
        }
    }

    /// Drop the coefficients above `new_degree`, which must be negligible.
    pub fn truncate_to(&self, new_degree: usize) -> Self {
        BinaryForm { coeffs: self.coeffs[..=new_degree].to_vec() }
    }

    /// Raise the degree by multiplying with z0^extra.
    pub fn raise_degree(&self, extra: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.extend(std::iter::repeat(ZERO).take(extra));
        BinaryForm { coeffs }
    }
}

/// θ = a z0² + b z0 z1 + c z1².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticClass {
    pub a: C64,
    pub b: C64,
    pub c: C64,
}

impl QuadraticClass {
    pub fn new(a: C64, b: C64, c: C64) -> Self {
        QuadraticClass { a, b, c }
    }

    pub fn from_form(f: &BinaryForm) -> Self {
        assert_eq!(f.degree(), 2, "quadratic class needs a degree-2 form");
        QuadraticClass { a: f.coeffs[0], b: f.coeffs[1], c: f.coeffs[2] }
    }

    pub fn to_form(&self) -> BinaryForm {
        BinaryForm::new(vec![self.a, self.b, self.c])
    }

    pub fn to_array(&self) -> [C64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [C64; 3]) -> Self {
        QuadraticClass { a: v[0], b: v[1], c: v[2] }
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.to_array())
    }
}

/// b² − 4ac; vanishes exactly when θ has a double root.
pub fn disc_quadratic(q: &QuadraticClass) -> C64 {
    q.b * q.b - 4.0 * q.a * q.c
}

/// Evaluate f at p.
pub fn eval(f: &BinaryForm, p: &ProjPoint) -> C64 {
    f.eval(p)
}

/// ∏ (b_i z0 − a_i z1) over roots (a_i, b_i), scaled so the first
/// non-vanishing coefficient is 1. Roots are normalized first so that the
/// factors are well scaled.
pub fn from_roots(points: &[ProjPoint]) -> BinaryForm {
    let mut f = BinaryForm::constant(ONE);
    for p in points {
        f = f.mul(&BinaryForm::vanishing_at(&p.normalized()));
    }
    f.monic_first(1e-14)
}

/// Wronskian p·q′ − p′·q with respect to the affine parameter, returned as a
/// form of degree 2d−2. Computed covariantly as (∂0p ∂1q − ∂1p ∂0q)/d, which by
/// Euler's identity equals p·∂1q − ∂1p·q at z0 = 1. With this convention the
/// Wronskian of (z0, z1) is the constant +1.
pub fn wronskian(p: &BinaryForm, q: &BinaryForm) -> BinaryForm {
    assert_eq!(p.degree(), q.degree(), "wronskian needs equal degrees");
    let d = p.degree();
    if d == 0 {
        return BinaryForm::zero(0);
    }
    let j = p.partial0().mul(&q.partial1()).sub(&p.partial1().mul(&q.partial0()));
    j.scaled(C64::new(1.0 / d as f64, 0.0))
}

/// Matrix of multiplication by `f` acting on forms of degree `q_degree`.
pub fn multiplication_matrix(f: &BinaryForm, q_degree: usize) -> CMat {
    let df = f.degree();
    let mut m = CMat::zeros(df + q_degree + 1, q_degree + 1);
    for j in 0..=q_degree {
        for (i, c) in f.coeffs.iter().enumerate() {
            m[(i + j, j)] = *c;
        }
    }
    m
}

/// Quotient q with n ≈ d·q by least squares; fails when the residual
/// ‖n − d·q‖ exceeds tol·‖n‖.
pub fn divide_exact(n: &BinaryForm, d: &BinaryForm, tol: f64) -> Result<BinaryForm> {
    if n.degree() < d.degree() {
        return Err(Error::DegreeMismatch(format!(
            "numerator degree {} below divisor degree {}",
            n.degree(),
            d.degree()
        )));
    }
    let qd = n.degree() - d.degree();
    let m = multiplication_matrix(d, qd);
    let rhs = CVec::from_column_slice(n.coeffs());
    let q = linalg::lstsq(&m, &rhs, 1e-14);
    let resid = (&m * &q - &rhs).norm();
    let nn = n.norm();
    let rel = if nn > 0.0 { resid / nn } else { resid };
    if rel > tol {
        return Err(Error::DivisionResidualTooLarge { residual: rel, tol });
    }
    Ok(BinaryForm::new(q.iter().copied().collect()))
}

/// Cancel a common factor of degree deg(p) − target from the pair (p, q):
/// returns (p', q') of degree `target` with p·q′ = q·p′, i.e. p'/q' = p/q.
/// The pair is found as the smallest right singular vector of the
/// Sylvester-type system; the gap to the next singular value is checked.
pub fn cancel_common_factor(p: &BinaryForm, q: &BinaryForm, target: usize) -> Result<(BinaryForm, BinaryForm)> {
    if p.degree() != q.degree() || target > p.degree() {
        return Err(Error::DegreeMismatch("cancel_common_factor".into()));
    }
    let mp = multiplication_matrix(p, target);
    let mq = multiplication_matrix(q, target);
    let a = linalg::hstack(&[&mq, &(-mp)]);
    let scale = a.norm();
    let a = a / C64::new(scale, 0.0);
    let (v, s) = linalg::smallest_right_vectors(&a, 1);
    let n = 2 * (target + 1);
    let smallest = s.get(n - 1).copied().unwrap_or(0.0);
    let next = s.get(n - 2).copied().unwrap_or(1.0);
    if smallest > 1e-6 || next < 1e-8 || next < 100.0 * smallest {
        return Err(Error::ReductionFailed(format!(
            "singular values {smallest:.3e} / {next:.3e} do not isolate a common factor"
        )));
    }
    let p2 = BinaryForm::new((0..=target).map(|i| v[(i, 0)]).collect());
    let q2 = BinaryForm::new((0..=target).map(|i| v[(target + 1 + i, 0)]).collect());
    Ok((p2, q2))
}

#[derive(Clone, Debug)]
pub struct Roots {
    pub roots: Vec<(ProjPoint, usize)>,
    /// Smallest chordal distance between distinct reported roots (1 if fewer
    /// than two); small values flag ill-conditioned clustering.
    pub min_separation: f64,
    /// Largest |f(root)| relative to the coefficient scale.
    pub max_residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    pub tol: f64,
    pub cluster_tol: f64,
    /// Polish with compensated (double-double) Horner evaluation.
    pub extended: bool,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { tol: DEFAULT_TOL, cluster_tol: ROOT_CLUSTER_TOL, extended: false }
    }
}

pub fn roots(f: &BinaryForm) -> Roots {
    roots_with(f, RootOptions::default())
}

/// Roots with multiplicity. Roots at infinity are read off from vanishing
/// top coefficients; the rest are eigenvalues of the companion matrix of the
/// dehomogenized polynomial, polished by Newton steps and clustered.
pub fn roots_with(f: &BinaryForm, opts: RootOptions) -> Roots {
    let scale = f.max_abs();
    assert!(scale > 0.0, "roots of the zero form");
    let d = f.degree();
    let c = f.coeffs();
    let mut top = d;
    while top > 0 && c[top].norm() <= opts.tol * scale {
        top -= 1;
    }
    let at_infinity = d - top;
    let mut affine: Vec<C64> = Vec::new();
    if top > 0 {
        let lead = c[top];
        let mut comp = CMat::zeros(top, top);
        for i in 1..top {
            comp[(i, i - 1)] = ONE;
        }
        for i in 0..top {
            comp[(i, top - 1)] = -c[i] / lead;
        }
        let eig = nalgebra::linalg::Schur::new(comp).eigenvalues().expect("complex Schur form is triangular");
        let poly = BinaryForm::new(c[..=top].to_vec());
        let dpoly = poly.partial1();
        for z in eig.iter() {
            affine.push(polish(&poly, &dpoly, *z, opts.extended));
        }
    }
    let mut pts: Vec<ProjPoint> = affine.iter().map(|z| ProjPoint::affine(*z).normalized()).collect();
    pts.extend(std::iter::repeat(ProjPoint::infinity()).take(at_infinity));

    let mut clusters: Vec<(Vec<ProjPoint>, usize)> = Vec::new();
    for p in pts {
        match clusters.iter_mut().find(|(members, _)| members[0].dist(&p) < opts.cluster_tol) {
            Some((members, mult)) => {
                members.push(p);
                *mult += 1;
            }
            None => clusters.push((vec![p], 1)),
        }
    }
    let roots: Vec<(ProjPoint, usize)> = clusters
        .into_iter()
        .map(|(members, mult)| (cluster_mean(&members), mult))
        .collect();
    let mut min_sep: f64 = 1.0;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            min_sep = min_sep.min(roots[i].0.dist(&roots[j].0));
        }
    }
    let max_residual = roots
        .iter()
        .map(|(p, _)| f.eval(p).norm() / scale)
        .fold(0.0, f64::max);
    Roots { roots, min_separation: min_sep, max_residual }
}

fn cluster_mean(members: &[ProjPoint]) -> ProjPoint {
    let chart = members[0].chart();
    let free: C64 = members
        .iter()
        .map(|p| {
            let q = p.in_chart(chart);
            if chart == 0 {
                q.z1
            } else {
                q.z0
            }
        })
        .sum::<C64>()
        / members.len() as f64;
    if chart == 0 {
        ProjPoint::new(ONE, free).normalized()
    } else {
        ProjPoint::new(free, ONE).normalized()
    }
}

fn polish(poly: &BinaryForm, dpoly: &BinaryForm, z0: C64, extended: bool) -> C64 {
    let mut z = z0;
    for _ in 0..3 {
        let v = if extended { dd_horner(poly.coeffs(), z) } else { poly.eval_affine(z) };
        let dv = dpoly.eval_affine(z);
        if dv.norm() == 0.0 {
            break;
        }
        let step = v / dv;
        if !(step.re.is_finite() && step.im.is_finite()) || step.norm() > 1e-3 * (1.0 + z.norm()) {
            break;
        }
        z -= step;
    }
    z
}

/// Compensated Horner evaluation in double-double arithmetic.
fn dd_horner(coeffs: &[C64], z: C64) -> C64 {
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }
    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }
    // (hi, lo) pairs for real and imaginary parts
    let mut re = (0.0f64, 0.0f64);
    let mut im = (0.0f64, 0.0f64);
    for c in coeffs.iter().rev() {
        // (re + i im)·(zr + i zi)
        let (p1, e1) = two_prod(re.0, z.re);
        let (p2, e2) = two_prod(im.0, z.im);
        let (p3, e3) = two_prod(re.0, z.im);
        let (p4, e4) = two_prod(im.0, z.re);
        let (r, er) = two_sum(p1, -p2);
        let (i, ei) = two_sum(p3, p4);
        let lo_r = er + e1 - e2 + re.1 * z.re - im.1 * z.im;
        let lo_i = ei + e3 + e4 + re.1 * z.im + im.1 * z.re;
        let (r2, er2) = two_sum(r, c.re);
        let (i2, ei2) = two_sum(i, c.im);
        re = (r2, er2 + lo_r);
        im = (i2, ei2 + lo_i);
    }
    C64::new(re.0 + re.1, im.0 + im.1)
}
