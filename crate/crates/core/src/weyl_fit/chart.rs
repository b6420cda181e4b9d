use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::geometry::GeodesicSample;
use super::poly::{M3, V3};
use crate::binary_forms::{divide_exact, BinaryForm, ProjPoint, QuadraticClass};
use crate::conformal::{self, normal_component, polarization, Delta, TangentVector, THETA_TOL};
use crate::error::{Error, Result};
use crate::geodesic_trace::{preimage_gap, tangent_direction, ConstrainedSystem, IncidenceConstraint};
use crate::linalg::{self, c, CMat, CVec, C64, ONE, ZERO};
use crate::nodal_curve::{gauge_basis, incidence_system, severi_tangent, gauss_newton, NewtonOptions, ParamCurve, StateLayout};
use crate::surface_config::SurfacePoint;

/// Holomorphic coordinates x ∈ ℂ³ on W near a base member. The point with
/// coordinates x is the member y in the gauge slice Gᴴ(y − b) = 0 with
/// Pᴴ(y − b) = x, both conditions on the coefficient part only.
#[derive(Clone, Debug)]
pub struct ChartFrame {
    pub base: ParamCurve,
    pub points: Vec<SurfacePoint>,
    pub layout: StateLayout,
    pub base_state: CVec,
    /// Orthonormal coefficient parts of the gauge directions at the base.
    pub gauge: CMat,
    /// Coordinate functionals: x = coordsᴴ (y − b) on coefficients.
    pub coords: CMat,
    /// Coordinate vectors at the base, as full state vectors.
    pub steps: CMat,
    /// The coordinate vectors as tangent vectors; their θ are orthonormal for
    /// the polarized discriminant.
    pub directions: Vec<TangentVector>,
    /// Normalization of θ with respect to the base preimages.
    pub trivialization: Trivialization,
    /// Constant factor applied to the metric.
    pub phase: C64,
}

fn pairs(points: &[SurfacePoint]) -> Vec<(usize, SurfacePoint)> {
    points.iter().copied().enumerate().collect()
}

/// θ = N / ∏ (b_j z0 − a_j z1) with the base preimages (a_j : b_j) in their
/// layout charts, so that θ depends holomorphically on the state.
pub fn holomorphic_theta(layout: &StateLayout, n_base: usize, y: &CVec, dir: &CVec) -> Result<QuadraticClass> {
    let curve = layout.unpack(y, 0);
    let n = normal_component(&curve, &Delta::from_state(layout, dir));
    let mut prod = BinaryForm::constant(ONE);
    for j in 0..n_base {
        prod = prod.mul(&BinaryForm::vanishing_at(&layout.param(y, j)));
    }
    Ok(QuadraticClass::from_form(&divide_exact(&n, &prod, THETA_TOL)?))
}

/// How θ is normalized beyond the monic product over the base preimages.
/// The paired rescaling makes θ independent of the representatives chosen
/// for the paired base preimages.
#[derive(Clone, Debug, PartialEq)]
pub enum Trivialization {
    Monic,
    /// Times ∏ det(z_i, z_j) over the given pairs.
    Paired(Vec<(usize, usize)>),
}

fn det_product(layout: &StateLayout, y: &CVec, pairs: impl Iterator<Item = (usize, usize)>) -> C64 {
    let mut f = ONE;
    for (i, j) in pairs {
        let (a, b) = (layout.param(y, i), layout.param(y, j));
        f *= a.z0 * b.z1 - a.z1 * b.z0;
    }
    f
}

impl Trivialization {
    pub fn factor(&self, layout: &StateLayout, y: &CVec) -> C64 {
        match self {
            Trivialization::Monic => ONE,
            Trivialization::Paired(pairs) => det_product(layout, y, pairs.iter().copied()),
        }
    }
}

/// θ of a state-vector direction under a trivialization, holomorphic in the
/// state.
pub fn normalized_theta(layout: &StateLayout, n_base: usize, y: &CVec, dir: &CVec, triv: &Trivialization) -> Result<QuadraticClass> {
    let th = holomorphic_theta(layout, n_base, y, dir)?;
    let f = triv.factor(layout, y);
    Ok(QuadraticClass::new(th.a * f, th.b * f, th.c * f))
}

pub(crate) fn gram(th: &[QuadraticClass]) -> M3 {
    let mut g = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = polarization(&th[i], &th[j]);
        }
    }
    g
}

/// C with Cᵀ G C = I, by Gram–Schmidt for the bilinear form of G after a
/// fixed mixing of the basis when a pivot is too small.
fn bilinear_orthonormal(g: &M3) -> Option<M3> {
    let scale = g.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    let mixes: [M3; 3] = [
        [[ONE, ZERO, ZERO], [ZERO, ONE, ZERO], [ZERO, ZERO, ONE]],
        [[ONE, ONE, ZERO], [ZERO, ONE, ONE], [ONE, ZERO, ONE]],
        [[ONE, c(0.3, 0.7), c(-0.5, 0.2)], [c(0.4, -0.6), ONE, c(0.1, 0.9)], [c(-0.8, 0.3), c(0.2, 0.5), ONE]],
    ];
    let form = |u: &V3, v: &V3| -> C64 {
        let mut s = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                s += u[i] * g[i][j] * v[j];
            }
        }
        s
    };
    'mix: for mix in &mixes {
        let mut es: Vec<V3> = Vec::new();
        for k in 0..3 {
            let mut v: V3 = [mix[0][k], mix[1][k], mix[2][k]];
            for e in &es {
                let p = form(&v, e);
                v = [0, 1, 2].map(|i| v[i] - p * e[i]);
            }
            let n = form(&v, &v);
            if n.norm() < 1e-6 * scale * v.iter().map(|z| z.norm_sqr()).sum::<f64>() {
                continue 'mix;
            }
            let s = n.sqrt();
            es.push(v.map(|z| z / s));
        }
        return Some([0, 1, 2].map(|i| [es[0][i], es[1][i], es[2][i]]));
    }
    None
}

fn v3(v: &CVec) -> V3 {
    [v[0], v[1], v[2]]
}

impl ChartFrame {
    fn n_base(&self) -> usize {
        self.points.len()
    }

    fn coeff(&self, y: &CVec) -> CVec {
        y.rows(0, self.layout.coeff_len()) - self.base_state.rows(0, self.layout.coeff_len())
    }

    /// Rows Gᴴ and Pᴴ acting on a state of length `len`.
    fn slice_rows(&self, len: usize) -> CMat {
        let nc = self.layout.coeff_len();
        let mut rows = CMat::zeros(8, len);
        rows.view_mut((0, 0), (5, nc)).copy_from(&self.gauge.adjoint());
        rows.view_mut((5, 0), (3, nc)).copy_from(&self.coords.adjoint());
        rows
    }

    pub fn coordinates(&self, y: &CVec) -> V3 {
        v3(&(self.coords.adjoint() * self.coeff(y)))
    }

    /// State of the member with coordinates x.
    pub fn point(&self, x: &V3) -> Result<CVec> {
        let xv = CVec::from_column_slice(x);
        let pred = &self.base_state + &self.steps * &xv;
        let prs = pairs(&self.points);
        let slice = self.slice_rows(self.layout.len());
        let system = |y: &CVec| {
            let (r, j) = incidence_system(&self.layout, y, &prs);
            let mut lin = &self.gauge.adjoint() * self.coeff(y);
            lin = CVec::from_iterator(8, lin.iter().copied().chain((self.coords.adjoint() * self.coeff(y) - &xv).iter().copied()));
            (CVec::from_iterator(r.len() + 8, r.iter().chain(lin.iter()).copied()), linalg::vstack(&[&j, &slice]))
        };
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        gauss_newton(system, pred, NewtonOptions { tol: 1e-13, max_iter: 30, max_step: 2.0 })
            .map(|(y, _)| y)
            .map_err(|_| Error::ProjectionFailure(norm))
    }

    /// Coordinate vectors ∂/∂x_i at the state y.
    pub fn coordinate_vectors(&self, y: &CVec) -> CMat {
        let (_, j) = incidence_system(&self.layout, y, &pairs(&self.points));
        let a = linalg::vstack(&[&j, &self.slice_rows(self.layout.len())]);
        let mut rhs = CMat::zeros(a.nrows(), 3);
        for i in 0..3 {
            rhs[(a.nrows() - 3 + i, i)] = ONE;
        }
        let lu = a.lu();
        lu.solve(&rhs).unwrap_or_else(|| CMat::zeros(self.layout.len(), 3))
    }

    /// Gram matrix of the coordinate vectors at y, with θ normalized by the
    /// trivialization.
    pub fn metric_at_state(&self, y: &CVec) -> Result<M3> {
        let d = self.coordinate_vectors(y);
        let th: Vec<QuadraticClass> = (0..3).map(|i| normalized_theta(&self.layout, self.n_base(), y, &d.column(i).into_owned(), &self.trivialization)).collect::<Result<_>>()?;
        Ok(gram(&th).map(|row| row.map(|v| v * self.phase)))
    }

    pub fn metric(&self, x: &V3) -> Result<M3> {
        self.metric_at_state(&self.point(x)?)
    }

    /// The member with coordinates x as a curve with node pairs.
    pub fn curve(&self, x: &V3) -> Result<ParamCurve> {
        let mut c = self.layout.unpack(&self.point(x)?, self.n_base());
        c.refresh_nodes()?;
        Ok(c)
    }

    /// The curve through chart(x0) cut out by `constraints` (codimension 2),
    /// sampled at n points spaced evenly in a linear coordinate s along it,
    /// |s − s0| ≤ half_len, with chart velocity and acceleration in s.
    pub fn chart_curve(&self, x0: &V3, constraints: &[IncidenceConstraint], half_len: f64, n: usize) -> Result<Vec<GeodesicSample>> {
        self.chart_curve_along(x0, constraints, half_len, n, false)
    }

    /// As `chart_curve`, with the linear coordinate rotated so that it is
    /// real along curves whose chart tangent is real up to a phase.
    pub fn real_chart_curve(&self, x0: &V3, constraints: &[IncidenceConstraint], half_len: f64, n: usize) -> Result<Vec<GeodesicSample>> {
        self.chart_curve_along(x0, constraints, half_len, n, true)
    }

    fn chart_curve_along(&self, x0: &V3, constraints: &[IncidenceConstraint], half_len: f64, n: usize, align: bool) -> Result<Vec<GeodesicSample>> {
        let y0 = self.point(x0)?;
        let curve0 = self.layout.unpack(&y0, self.n_base());
        let sys = ConstrainedSystem::new(&curve0, &self.points, constraints);
        let nc = self.layout.coeff_len();
        let len = sys.layout.len();
        let gauge_rows = self.slice_rows(len).rows(0, 5).into_owned();
        let start = sys.pack(&curve0, &sys.tracked());
        let (_, j0) = sys.eval(&start);
        let t = linalg::nullspace(&linalg::vstack(&[&j0, &gauge_rows]), 1e-9);
        if t.ncols() != 1 {
            return Err(Error::RankDrop(format!("chart curve of dimension {}", t.ncols())));
        }
        let mut xt = self.coords.adjoint() * t.column(0).rows(0, nc);
        if align {
            let k = xt.icamax();
            xt *= xt[k].conj() / xt[k].norm();
        }
        let w = xt.map(|v| v.conj()) / C64::new(xt.norm(), 0.0);
        let mut lrow = CMat::zeros(1, len);
        lrow.view_mut((0, 0), (1, nc)).copy_from(&(w.transpose() * self.coords.adjoint()));
        let lin = linalg::vstack(&[&gauge_rows, &lrow]);
        let s_of = |y: &CVec| (&lrow.view((0, 0), (1, nc)) * self.coeff(y))[0];
        let s0 = s_of(&start);
        let full = |y: &CVec, s: C64| {
            let (r, j) = sys.eval(y);
            let g = &gauge_rows.view((0, 0), (5, nc)) * self.coeff(y);
            let res = CVec::from_iterator(r.len() + 6, r.iter().chain(g.iter()).copied().chain(std::iter::once(s_of(y) - s)));
            (res, linalg::vstack(&[&j, &lin]))
        };
        let derivs = |y: &CVec| -> Result<(CVec, CVec)> {
            let (_, jf) = full(y, ZERO);
            let lu = jf.clone().lu();
            let mut e = CVec::zeros(jf.nrows());
            e[jf.nrows() - 1] = ONE;
            let y1 = lu.solve(&e).ok_or_else(|| Error::RankDrop("singular chart-curve jacobian".into()))?;
            let scale = y1.norm();
            let u = &y1 / C64::new(scale, 0.0);
            let eps = 1e-4;
            let (_, jp) = sys.eval(&(y + &u * C64::new(eps, 0.0)));
            let (_, jm) = sys.eval(&(y - &u * C64::new(eps, 0.0)));
            let dd = (jp - jm) * &u * C64::new(scale * scale / (2.0 * eps), 0.0);
            let mut rhs = CVec::zeros(jf.nrows());
            rhs.rows_mut(0, dd.len()).copy_from(&(-dd));
            let y2 = lu.solve(&rhs).ok_or_else(|| Error::RankDrop("singular chart-curve jacobian".into()))?;
            Ok((y1, y2))
        };
        let opts = NewtonOptions { tol: 1e-13, max_iter: 30, max_step: 1.0 };
        let center = (n - 1) / 2;
        let ds = 2.0 * half_len / (n - 1) as f64;
        let mut states: Vec<Option<(CVec, CVec, CVec)>> = vec![None; n];
        let (y1, y2) = derivs(&start)?;
        states[center] = Some((start.clone(), y1, y2));
        for dir in [1i64, -1] {
            let mut k = center as i64;
            loop {
                let next = k + dir;
                if next < 0 || next >= n as i64 {
                    break;
                }
                let (yp, y1p, _) = states[k as usize].clone().unwrap();
                let s = s0 + C64::new((next - center as i64) as f64 * ds, 0.0);
                let pred = &yp + &y1p * C64::new(dir as f64 * ds, 0.0);
                let (y, _) = gauss_newton(|y| full(y, s), pred, opts).map_err(|e| Error::StepFailure(e.to_string()))?;
                let (y1, y2) = derivs(&y)?;
                states[next as usize] = Some((y, y1, y2));
                k = next;
            }
        }
        Ok(states
            .into_iter()
            .map(|st| {
                let (y, y1, y2) = st.unwrap();
                GeodesicSample {
                    x: self.coordinates(&y),
                    t: v3(&(self.coords.adjoint() * y1.rows(0, nc))),
                    acc: v3(&(self.coords.adjoint() * y2.rows(0, nc))),
                }
            })
            .collect())
    }

    /// Random point of the polydisc |x_i| ≤ radius.
    pub fn random_point(radius: f64, rng: &mut ChaCha8Rng) -> V3 {
        [0, 1, 2].map(|_| {
            let r = radius * rng.gen_range(0.0f64..1.0).sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            c(r * a.cos(), r * a.sin())
        })
    }

    fn random_member(&self, radius: f64, rng: &mut ChaCha8Rng) -> Result<(V3, ParamCurve, ProjPoint, ProjPoint)> {
        let x0 = Self::random_point(radius / 2.0, rng);
        let curve = self.curve(&x0)?;
        let mut pick = || {
            let r = 1.5 * rng.gen_range(0.0f64..1.0).sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            ProjPoint::affine(c(r * a.cos(), r * a.sin()))
        };
        Ok((x0, curve, pick(), pick()))
    }

    /// Arcs of W_{p,q} through random members with |x_i| ≤ radius/2, for
    /// random p, q on those members, each sampled at `per` points over a
    /// coordinate length of radius/2 on either side.
    pub fn random_geodesics(&self, radius: f64, count: usize, per: usize, seed: u64) -> Result<Vec<Vec<GeodesicSample>>> {
        (0..count)
            .into_par_iter()
            .map(|k| {
                let mut last = Error::StepFailure("no attempt".into());
                for attempt in 0..8u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(1000 * k as u64 + attempt));
                    let (x0, curve, zp, zq) = match self.random_member(radius, &mut rng) {
                        Ok(v) => v,
                        Err(e) => {
                            last = e;
                            continue;
                        }
                    };
                    let cons = [
                        IncidenceConstraint::ThroughPoint { p: curve.eval(&zp), z: zp },
                        IncidenceConstraint::ThroughPoint { p: curve.eval(&zq), z: zq },
                    ];
                    if preimage_gap(&curve, &cons) < 0.1 {
                        continue;
                    }
                    match self.chart_curve(&x0, &cons, radius / 2.0, per) {
                        Ok(s) => return Ok(s),
                        Err(e) => last = e,
                    }
                }
                Err(last)
            })
            .collect()
    }

    /// Null geodesics: members through a random p with the tangent direction
    /// of a random member there.
    pub fn random_null_geodesics(&self, radius: f64, count: usize, per: usize, seed: u64) -> Result<Vec<Vec<GeodesicSample>>> {
        (0..count)
            .into_par_iter()
            .map(|k| {
                let mut last = Error::StepFailure("no attempt".into());
                for attempt in 0..8u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(104729).wrapping_add(1000 * k as u64 + attempt));
                    let (x0, curve, zp, _) = match self.random_member(radius, &mut rng) {
                        Ok(v) => v,
                        Err(e) => {
                            last = e;
                            continue;
                        }
                    };
                    let p = curve.eval(&zp);
                    let cons = [IncidenceConstraint::TangentAt { p, direction: tangent_direction(&curve, &zp, &p), z: zp }];
                    if preimage_gap(&curve, &cons) < 0.1 {
                        continue;
                    }
                    match self.chart_curve(&x0, &cons, radius / 2.0, per) {
                        Ok(s) => return Ok(s),
                        Err(e) => last = e,
                    }
                }
                Err(last)
            })
            .collect()
    }
}

/// Chart at a member of W: coordinate vectors orthonormal for the polarized
/// discriminant and orthogonal to the gauge.
pub fn build_chart(base: &ParamCurve, points: &[SurfacePoint]) -> Result<ChartFrame> {
    let layout = StateLayout::for_curve(base);
    let b = layout.pack_curve(base);
    let nb = points.len();
    let t = severi_tangent(base, points)?;
    let th: Vec<QuadraticClass> = (0..3).map(|i| holomorphic_theta(&layout, nb, &b, &t.column(i).into_owned())).collect::<Result<_>>()?;
    let cmix = bilinear_orthonormal(&gram(&th)).ok_or(Error::DegenerateMetric { rank: 2 })?;
    let d = &t * CMat::from_fn(3, 3, |i, j| cmix[i][j]);
    frame_from_steps(base, points, &d, Trivialization::Monic, ONE)
}

/// Chart whose coordinate vectors at the base are the given tangent
/// directions (full state vectors) with their gauge part removed.
pub fn frame_from_steps(base: &ParamCurve, points: &[SurfacePoint], d: &CMat, trivialization: Trivialization, phase: C64) -> Result<ChartFrame> {
    let layout = StateLayout::for_curve(base);
    let b = layout.pack_curve(base);
    let nc = layout.coeff_len();
    let gfull = gauge_basis(&layout, &b);
    let gauge = linalg::orthonormalize(&gfull.rows(0, nc).into_owned(), 1e-12);
    if gauge.ncols() != 5 {
        return Err(Error::RankDrop(format!("gauge of rank {}", gauge.ncols())));
    }
    // remove the gauge part of the coefficient motion so the steps lie in the slice
    let m = gauge.adjoint() * gfull.rows(0, nc);
    let coef = m.clone().lu().solve(&(gauge.adjoint() * d.rows(0, nc))).ok_or(Error::RankDrop("gauge block".into()))?;
    let steps = d - &gfull * coef;
    let sc = steps.rows(0, nc).into_owned();
    let coords = &sc * (sc.adjoint() * &sc).try_inverse().ok_or(Error::RankDrop("coordinate block".into()))?;
    let directions = (0..3)
        .map(|i| conformal::tangent_vector(base, &Delta::from_state(&layout, &steps.column(i).into_owned())))
        .collect::<Result<_>>()?;
    Ok(ChartFrame { base: base.clone(), points: points.to_vec(), layout, base_state: b, gauge, coords, steps, directions, trivialization, phase })
}
