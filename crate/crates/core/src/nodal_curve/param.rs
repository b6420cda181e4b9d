use serde::{Deserialize, Serialize};

use super::implicit::ImplicitCurve;
use crate::biform::BiForm;
use crate::binary_forms::{self, wedge, BinaryForm, ProjPoint, RootOptions};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64, ONE, ZERO};
use crate::surface_config::SurfacePoint;

/// A 2×2 matrix acting on homogeneous parameters, z ↦ M z.
pub type Mobius = [[C64; 2]; 2];

/// Relative incidence residual above which a parameter is not a preimage.
pub const PREIMAGE_TOL: f64 = 1e-7;

/// The map z ↦ ((U0:U1)(z), (V0:V1)(z)) with cached preimages of the
/// configuration points and the node-preimage pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCurve {
    pub u: [BinaryForm; 2],
    pub v: [BinaryForm; 2],
    pub base_preimages: Vec<ProjPoint>,
    pub node_pairs: Vec<(ProjPoint, ProjPoint)>,
}

fn cross(f: &[BinaryForm; 2], z: &ProjPoint, p: &ProjPoint) -> C64 {
    f[0].eval(z) * p.z1 - f[1].eval(z) * p.z0
}

fn pair_scale(f: &[BinaryForm; 2]) -> f64 {
    (f[0].norm().powi(2) + f[1].norm().powi(2)).sqrt()
}

impl ParamCurve {
    /// Build from the two coordinate pairs, solving for the preimages of
    /// `points` and for the node pairs.
    pub fn from_maps(u: [BinaryForm; 2], v: [BinaryForm; 2], points: &[SurfacePoint]) -> Result<Self> {
        let mut curve = ParamCurve { u, v, base_preimages: Vec::new(), node_pairs: Vec::new() };
        for (j, p) in points.iter().enumerate() {
            let z = curve
                .preimage_of(p)
                .ok_or_else(|| Error::NewtonDivergence(format!("configuration point {j} has no preimage")))?;
            curve.base_preimages.push(z);
        }
        curve.refresh_nodes()?;
        Ok(curve)
    }

    /// Degree of the v-map, the index m.
    pub fn m(&self) -> usize {
        self.v[0].degree()
    }

    pub fn u_degree(&self) -> usize {
        self.u[0].degree()
    }

    pub fn eval(&self, z: &ProjPoint) -> SurfacePoint {
        let z = z.normalized();
        let u = ProjPoint { z0: self.u[0].eval(&z), z1: self.u[1].eval(&z) };
        let v = ProjPoint { z0: self.v[0].eval(&z), z1: self.v[1].eval(&z) };
        SurfacePoint { u: u.normalized(), v: v.normalized() }
    }

    /// Both incidence cross products at z, each relative to its pair scale.
    pub fn incidence_at(&self, z: &ProjPoint, p: &SurfacePoint) -> [f64; 2] {
        let z = z.normalized();
        let (pu, pv) = (p.u.normalized(), p.v.normalized());
        [cross(&self.u, &z, &pu).norm() / pair_scale(&self.u), cross(&self.v, &z, &pv).norm() / pair_scale(&self.v)]
    }

    /// Largest relative incidence residual over the cached base preimages.
    pub fn incidence_residual(&self, points: &[SurfacePoint]) -> f64 {
        self.base_preimages
            .iter()
            .zip(points)
            .map(|(z, p)| {
                let r = self.incidence_at(z, p);
                r[0].max(r[1])
            })
            .fold(0.0, f64::max)
    }

    pub fn node_preimages(&self) -> Vec<ProjPoint> {
        self.node_pairs.iter().flat_map(|(s, t)| [*s, *t]).collect()
    }

    pub fn node_images(&self) -> Vec<SurfacePoint> {
        self.node_pairs.iter().map(|(s, _)| self.eval(s)).collect()
    }

    /// Gauss–Newton polish of a parameter against both incidence equations.
    pub fn polish_preimage(&self, start: &ProjPoint, p: &SurfacePoint) -> (ProjPoint, f64) {
        let (pu, pv) = (p.u.normalized(), p.v.normalized());
        let (su, sv) = (pair_scale(&self.u), pair_scale(&self.v));
        let mut z = start.normalized();
        for _ in 0..12 {
            let chart = z.chart();
            let zc = z.in_chart(chart);
            let du = [self.u[0].chart_derivative(chart), self.u[1].chart_derivative(chart)];
            let dv = [self.v[0].chart_derivative(chart), self.v[1].chart_derivative(chart)];
            let r = [cross(&self.u, &zc, &pu) / su, cross(&self.v, &zc, &pv) / sv];
            let j = [cross(&du, &zc, &pu) / su, cross(&dv, &zc, &pv) / sv];
            let jj = j[0].norm_sqr() + j[1].norm_sqr();
            if jj == 0.0 {
                break;
            }
            let step = -(j[0].conj() * r[0] + j[1].conj() * r[1]) / jj;
            if !(step.re.is_finite() && step.im.is_finite()) || step.norm() > 0.5 {
                break;
            }
            z = super::implicit::shift(&zc, step).normalized();
            if step.norm() < 1e-16 {
                break;
            }
        }
        let r = self.incidence_at(&z, p);
        (z, r[0].max(r[1]))
    }

    /// Every parameter mapping to p (two at a node, one at a smooth point).
    pub fn preimages_of(&self, p: &SurfacePoint) -> Vec<ProjPoint> {
        let pu = p.u.normalized();
        let poly = self.u[0].scaled(pu.z1).sub(&self.u[1].scaled(pu.z0));
        if poly.max_abs() < 1e-14 * pair_scale(&self.u) {
            return Vec::new();
        }
        let mut out: Vec<ProjPoint> = Vec::new();
        for (r, _) in binary_forms::roots(&poly).roots {
            let (z, res) = self.polish_preimage(&r, p);
            if res < PREIMAGE_TOL && out.iter().all(|w| w.dist(&z) > 1e-6) {
                out.push(z);
            }
        }
        out
    }

    /// The preimage of p with the smallest residual, if it is a preimage.
    pub fn preimage_of(&self, p: &SurfacePoint) -> Option<ProjPoint> {
        let pu = p.u.normalized();
        let poly = self.u[0].scaled(pu.z1).sub(&self.u[1].scaled(pu.z0));
        if poly.max_abs() < 1e-14 * pair_scale(&self.u) {
            return None;
        }
        binary_forms::roots(&poly)
            .roots
            .iter()
            .map(|(r, _)| self.polish_preimage(r, p))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .filter(|(_, res)| *res < PREIMAGE_TOL)
            .map(|(z, _)| z)
    }

    /// Recompute the node pairs from the deck involution of the degree-2
    /// u-map: ι(s) is the other parameter with the same u-value, and the node
    /// preimages are the non-fixed zeros of V(s) ∧ V(ιs).
    pub fn refresh_nodes(&mut self) -> Result<()> {
        self.node_pairs = node_pairs(&self.u, &self.v)?;
        Ok(())
    }

    /// The curve reparametrized by w = g z: new forms are old ∘ g⁻¹ and
    /// cached parameters are mapped by g.
    pub fn reparametrized(&self, g: &Mobius) -> ParamCurve {
        let adj = [[g[1][1], -g[0][1]], [-g[1][0], g[0][0]]];
        let comp = |f: &BinaryForm| f.compose_linear(&adj);
        let map = |z: &ProjPoint| z.transform(g).normalized();
        ParamCurve {
            u: [comp(&self.u[0]), comp(&self.u[1])],
            v: [comp(&self.v[0]), comp(&self.v[1])],
            base_preimages: self.base_preimages.iter().map(map).collect(),
            node_pairs: self.node_pairs.iter().map(|(s, t)| (map(s), map(t))).collect(),
        }
    }

    /// Scale each coordinate pair so that its value at z = (0,1) has unit
    /// dominant component.
    pub fn with_unit_leading(&self) -> ParamCurve {
        let norm = |f: &[BinaryForm; 2]| -> [BinaryForm; 2] {
            let d = f[0].degree();
            let (a, b) = (f[0].coeffs()[d], f[1].coeffs()[d]);
            let s = if a.norm() >= b.norm() { a } else { b };
            let s = if s.norm() > 0.0 { ONE / s } else { ONE };
            [f[0].scaled(s), f[1].scaled(s)]
        };
        ParamCurve { u: norm(&self.u), v: norm(&self.v), ..self.clone() }
    }

    /// Gauge-fixed representative: the preimages of points pins[0], pins[1],
    /// pins[2] go to 0 = (1,0), 1 = (1,1), ∞ = (0,1), and both pairs get unit
    /// leading coefficients.
    pub fn pinned(&self, pins: [usize; 3]) -> ParamCurve {
        let z = |i: usize| self.base_preimages[pins[i]];
        self.reparametrized(&pinning_map(&z(0), &z(1), &z(2))).with_unit_leading()
    }

    /// Smallest chordal distance between the roots of U0 and U1, and of V0
    /// and V1 (zero for a map with base points or a vanishing component).
    pub fn coprimality(&self) -> f64 {
        let sep = |f: &[BinaryForm; 2]| -> f64 {
            let scale = f[0].max_abs().max(f[1].max_abs());
            if f[0].max_abs() <= 1e-10 * scale || f[1].max_abs() <= 1e-10 * scale {
                return 0.0;
            }
            let r0 = binary_forms::roots(&f[0]).roots;
            let r1 = binary_forms::roots(&f[1]).roots;
            r0.iter()
                .flat_map(|(a, _)| r1.iter().map(move |(b, _)| a.dist(b)))
                .fold(1.0, f64::min)
        };
        sep(&self.u).min(sep(&self.v))
    }
}

/// The Möbius map sending a ↦ (1,0), b ↦ (1,1), c ↦ (0,1).
pub fn pinning_map(a: &ProjPoint, b: &ProjPoint, c: &ProjPoint) -> Mobius {
    let ab = wedge(a.coords(), b.coords());
    let cb = wedge(c.coords(), b.coords());
    [[-c.z1 * ab, c.z0 * ab], [-a.z1 * cb, a.z0 * cb]]
}

/// The deck involution of a degree-2 map (U0:U1), as a matrix.
pub fn deck_involution(u: &[BinaryForm; 2]) -> Mobius {
    let (a, b) = (u[0].coeffs(), u[1].coeffs());
    let cc = |i: usize, j: usize| a[i] * b[j] - a[j] * b[i];
    [[cc(0, 2), cc(1, 2)], [-cc(0, 1), -cc(0, 2)]]
}

pub fn node_pairs(u: &[BinaryForm; 2], v: &[BinaryForm; 2]) -> Result<Vec<(ProjPoint, ProjPoint)>> {
    if u[0].degree() != 2 {
        return Ok(Vec::new());
    }
    let m = v[0].degree();
    if m < 2 {
        return Ok(Vec::new());
    }
    let iota = deck_involution(u);
    let g = v[0]
        .mul(&v[1].compose_linear(&iota))
        .sub(&v[1].mul(&v[0].compose_linear(&iota)));
    let (a, b) = (u[0].coeffs(), u[1].coeffs());
    let fixed = BinaryForm::new(vec![
        a[0] * b[1] - a[1] * b[0],
        2.0 * (a[0] * b[2] - a[2] * b[0]),
        a[1] * b[2] - a[2] * b[1],
    ]);
    let q = binary_forms::divide_exact(&g, &fixed, 1e-6)?;
    let opts = RootOptions { extended: true, ..RootOptions::default() };
    let r = binary_forms::roots_with(&q, opts);
    let pts: Vec<ProjPoint> = r.roots.iter().map(|(p, _)| *p).collect();
    if pts.len() != 2 * (m - 1) || r.roots.iter().any(|(_, k)| *k > 1) {
        return Err(Error::NodeCountMismatch { expected: m - 1, found: pts.len() / 2 });
    }
    let mut used = vec![false; pts.len()];
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        if used[i] {
            continue;
        }
        let partner = pts[i].transform(&iota).normalized();
        let j = (0..pts.len())
            .filter(|&j| j != i && !used[j])
            .min_by(|&x, &y| pts[x].dist(&partner).partial_cmp(&pts[y].dist(&partner)).unwrap())
            .ok_or(Error::NodeCountMismatch { expected: m - 1, found: pairs.len() })?;
        if pts[j].dist(&partner) > 1e-5 {
            return Err(Error::NodeCountMismatch { expected: m - 1, found: pairs.len() });
        }
        used[i] = true;
        used[j] = true;
        pairs.push((pts[i], pts[j]));
    }
    Ok(pairs)
}

/// Parametrize an irreducible rational curve of bidegree (m,2) (or a graph
/// of bidegree (d,1)) and solve for the preimages of `points`.
pub fn parametrize(curve: &ImplicitCurve, points: &[SurfacePoint]) -> Result<ParamCurve> {
    let f = curve.form.normalized();
    match f.dv {
        1 => {
            let d = f.du;
            let (s0, s1) = (f.v_slice(0), f.v_slice(1));
            let (u0, u1) = (BinaryForm::monomial(1, 0), BinaryForm::monomial(1, 1));
            let v0 = s1.substitute(&u0, &u1);
            let v1 = s0.substitute(&u0, &u1).scaled(-ONE);
            debug_assert_eq!(v0.degree(), d);
            ParamCurve::from_maps([u0, u1], [v0, v1], points)
        }
        2 => parametrize_conic_bundle(&f, &curve.nodes, points),
        d => Err(Error::DegreeMismatch(format!("cannot parametrize v-degree {d}"))),
    }
}

fn parametrize_conic_bundle(f: &BiForm, nodes: &[SurfacePoint], points: &[SurfacePoint]) -> Result<ParamCurve> {
    let m = f.du;
    let (a0, a1, a2) = (f.v_slice(0), f.v_slice(1), f.v_slice(2));
    let disc = a1.mul(&a1).sub(&a0.mul(&a2).scaled(c(4.0, 0.0)));
    if disc.max_abs() < 1e-12 {
        return Err(Error::DiscriminantFactorizationFailed("discriminant vanishes identically".into()));
    }
    let (rr, dd) = match split_discriminant(&disc, m) {
        Ok(split) => split,
        // fall back on the polished node positions when clustering is ambiguous
        Err(e) if nodes.len() + 1 == m => {
            let us: Vec<ProjPoint> = nodes.iter().map(|p| p.u).collect();
            let rr = binary_forms::from_roots(&us);
            let dd = binary_forms::divide_exact(&disc, &rr.mul(&rr), 1e-7).map_err(|_| e)?;
            (rr, dd)
        }
        Err(e) => return Err(e),
    };
    let rho: Vec<ProjPoint> = binary_forms::roots(&dd).roots.iter().map(|(p, _)| *p).collect();
    if rho.len() != 2 {
        return Err(Error::DiscriminantFactorizationFailed("quadratic factor has a double root".into()));
    }
    // U(s) = s0²ρ1 − s1²ρ2 double covers the u-line branched at ρ1, ρ2
    let u0 = BinaryForm::new(vec![rho[0].z0, ZERO, -rho[1].z0]);
    let u1 = BinaryForm::new(vec![rho[0].z1, ZERO, -rho[1].z1]);
    let d_on_u = dd.substitute(&u0, &u1);
    let kappa2 = d_on_u.coeffs()[2];
    let off = [0, 1, 3, 4].iter().map(|&k| d_on_u.coeffs()[k].norm()).fold(0.0, f64::max);
    if off > 1e-8 * kappa2.norm() {
        return Err(Error::DiscriminantFactorizationFailed("D(U(s)) is not a multiple of s0²s1²".into()));
    }
    let w = rr.substitute(&u0, &u1).mul(&BinaryForm::new(vec![ZERO, kappa2.sqrt(), ZERO]));
    let v1_big = a1.substitute(&u0, &u1).scaled(-ONE).add(&w);
    let v0_big = a2.substitute(&u0, &u1).scaled(c(2.0, 0.0));
    let (v0, v1) = cancel_branch_factor(&a2, [&u0, &u1], &v0_big, &v1_big)?;
    let u = [u0, u1];
    let v = [v0, v1];
    let comp = f.compose([&u[0], &u[1]], [&v[0], &v[1]]);
    let rel = comp.max_abs() / (pair_scale(&u).powi(m as i32) * pair_scale(&v).powi(2));
    if rel > 1e-8 {
        return Err(Error::ReductionFailed(format!("parametrization residual {rel:.2e}")));
    }
    ParamCurve::from_maps(u, v, points)
}

/// (R, Δ / R²) where R collects the double roots of Δ, found by clustering.
fn split_discriminant(disc: &BinaryForm, m: usize) -> Result<(BinaryForm, BinaryForm)> {
    let opts = RootOptions { cluster_tol: 1e-5, ..RootOptions::default() };
    let r = binary_forms::roots_with(disc, opts);
    let doubles: Vec<ProjPoint> = r.roots.iter().filter(|(_, k)| *k == 2).map(|(p, _)| *p).collect();
    let simples = r.roots.iter().filter(|(_, k)| *k == 1).count();
    if doubles.len() + 1 != m || simples != 2 || r.roots.iter().any(|(_, k)| *k > 2) {
        return Err(Error::DiscriminantFactorizationFailed(format!(
            "expected {} double and 2 simple roots, found {} double and {simples} simple",
            m - 1,
            doubles.len()
        )));
    }
    let rr = binary_forms::from_roots(&doubles);
    let dd = binary_forms::divide_exact(disc, &rr.mul(&rr), 1e-6).map_err(|e| Error::DiscriminantFactorizationFailed(e.to_string()))?;
    Ok((rr, dd))
}

/// Over each root of a2 exactly one of its two U-preimages is a common zero
/// of (V0_big, V1_big); divide both by the product of those preimages.
fn cancel_branch_factor(a2: &BinaryForm, u: [&BinaryForm; 2], v0_big: &BinaryForm, v1_big: &BinaryForm) -> Result<(BinaryForm, BinaryForm)> {
    let mut common = Vec::new();
    for (r, mult) in binary_forms::roots(a2).roots {
        let fiber = u[0].scaled(r.z1).sub(&u[1].scaled(r.z0));
        let pre: Vec<ProjPoint> = binary_forms::roots(&fiber).roots.iter().map(|(p, _)| *p).collect();
        if pre.len() != 2 {
            return Err(Error::ReductionFailed("fiber over a zero of the v²-coefficient is branched".into()));
        }
        let size = |p: &ProjPoint| v1_big.eval(p).norm();
        let (keep, other) = if size(&pre[0]) <= size(&pre[1]) { (pre[0], pre[1]) } else { (pre[1], pre[0]) };
        if size(&keep) > 1e-3 * size(&other) {
            return Err(Error::ReductionFailed("both preimages of a zero of the v²-coefficient are common zeros".into()));
        }
        common.extend(std::iter::repeat(keep).take(mult));
    }
    let g = binary_forms::from_roots(&common);
    let v0 = binary_forms::divide_exact(v0_big, &g, 1e-7)?;
    let v1 = binary_forms::divide_exact(v1_big, &g, 1e-7)?;
    Ok((v0, v1))
}

fn sylvester(p: &[C64], q: &[C64]) -> CMat {
    let a = p.len() - 1;
    let b = q.len() - 1;
    let n = a + b;
    let mut s = CMat::zeros(n, n);
    for r in 0..b {
        for (i, x) in p.iter().enumerate() {
            s[(r, r + i)] = *x;
        }
    }
    for r in 0..a {
        for (i, x) in q.iter().enumerate() {
            s[(b + r, r + i)] = *x;
        }
    }
    s
}

fn unity(n: usize, k: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64)
}

/// The coefficient vectors of U0·u1 − U1·u0 and V0·v1 − V1·v0 at u = (1, x), v = (1, y).
fn incidence_polys(u: [&BinaryForm; 2], v: [&BinaryForm; 2], x: C64, y: C64) -> (Vec<C64>, Vec<C64>) {
    let p = u[0].coeffs().iter().zip(u[1].coeffs()).map(|(a, b)| a * x - b).collect();
    let q = v[0].coeffs().iter().zip(v[1].coeffs()).map(|(a, b)| a * y - b).collect();
    (p, q)
}

/// Interpolate a polynomial in (x, y) of degrees (nu−1, nv−1) from its values
/// on the roots-of-unity grid.
fn interpolate_grid(values: &[Vec<C64>], nu: usize, nv: usize) -> BiForm {
    let mut out = BiForm::zero(nu - 1, nv - 1);
    for i in 0..nu {
        for j in 0..nv {
            let mut acc = ZERO;
            for (k, row) in values.iter().enumerate() {
                for (l, val) in row.iter().enumerate() {
                    acc += val * unity(nu, (nu - (i * k) % nu) % nu) * unity(nv, (nv - (j * l) % nv) % nv);
                }
            }
            out.set(i, j, acc / (nu * nv) as f64);
        }
    }
    out
}

/// Res_s(U0(s)u1 − U1(s)u0, V0(s)v1 − V1(s)v0), a form of bidegree
/// (deg V, deg U) in (u, v), unnormalized.
pub fn resultant_form(u: [&BinaryForm; 2], v: [&BinaryForm; 2]) -> BiForm {
    let nu = v[0].degree() + 1;
    let nv = u[0].degree() + 1;
    let values: Vec<Vec<C64>> = (0..nu)
        .map(|k| {
            (0..nv)
                .map(|l| {
                    let (p, q) = incidence_polys(u, v, unity(nu, k), unity(nv, l));
                    sylvester(&p, &q).lu().determinant()
                })
                .collect()
        })
        .collect();
    interpolate_grid(&values, nu, nv)
}

/// Directional derivative of `resultant_form` along (δU, δV), from
/// d det S = det S · tr(S⁻¹ δS) at each grid point.
pub fn resultant_derivative(u: [&BinaryForm; 2], v: [&BinaryForm; 2], du: [&BinaryForm; 2], dv: [&BinaryForm; 2]) -> BiForm {
    let nu = v[0].degree() + 1;
    let nv = u[0].degree() + 1;
    let values: Vec<Vec<C64>> = (0..nu)
        .map(|k| {
            (0..nv)
                .map(|l| {
                    let (x, y) = (unity(nu, k), unity(nv, l));
                    let (p, q) = incidence_polys(u, v, x, y);
                    let (dp, dq) = incidence_polys(du, dv, x, y);
                    let s = sylvester(&p, &q);
                    let ds = sylvester(&dp, &dq);
                    let lu = s.clone().lu();
                    let det = lu.determinant();
                    match lu.solve(&ds) {
                        Some(x) => det * x.trace(),
                        None => ZERO,
                    }
                })
                .collect()
        })
        .collect();
    interpolate_grid(&values, nu, nv)
}

/// Whether a generic fiber of the map has exactly one point: sample a few
/// parameters and look for a second parameter with the same image.
pub fn is_birational(u: &[BinaryForm; 2], v: &[BinaryForm; 2]) -> bool {
    let probe = ParamCurve { u: u.clone(), v: v.clone(), base_preimages: Vec::new(), node_pairs: Vec::new() };
    let samples = [c(0.31, 0.17), c(-0.53, 0.41), c(0.12, -0.77)];
    samples.iter().any(|&s| {
        let z = ProjPoint::affine(s);
        let p = probe.eval(&z);
        if !(p.u.z0.is_finite() && p.v.z0.is_finite()) {
            return false;
        }
        probe.preimages_of(&p).len() == 1
    })
}

/// The implicit equation of the image, scaled to unit max coefficient.
pub fn implicitize(curve: &ParamCurve) -> Result<ImplicitCurve> {
    if !is_birational(&curve.u, &curve.v) {
        return Err(Error::DegenerateImage);
    }
    let form = resultant_form([&curve.u[0], &curve.u[1]], [&curve.v[0], &curve.v[1]]);
    let scale = pair_scale(&curve.u).powi(curve.m() as i32) * pair_scale(&curve.v).powi(curve.u_degree() as i32);
    if form.max_abs() < 1e-12 * scale {
        return Err(Error::DegenerateImage);
    }
    Ok(ImplicitCurve::new(form.normalized()))
}
