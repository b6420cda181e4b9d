use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::ChartFrame;
use super::geometry::{connection, compat_residual, einstein_weyl_at, geodesic_residual, integrate_geodesic, inv3, quad, transverse, FormJet, GeodesicSample, MetricJet, WeylField};
use super::poly::{Poly3, SymPoly, M3, SYM_INDEX, V3};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ZERO};

/// Fitted metric (unit-determinant representative) and Weyl 1-form on the
/// polydisc of radius `domain_radius`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub g: SymPoly,
    pub a: [Poly3; 3],
    pub domain_radius: f64,
    pub metric_fit_residual: f64,
    pub geodesic_fit_residual: f64,
}

impl WeylField for SurrogateModel {
    fn metric_jet(&self, x: &V3) -> MetricJet {
        let mut mj = MetricJet { g: [[ZERO; 3]; 3], dg: [[[ZERO; 3]; 3]; 3], ddg: [[[[ZERO; 3]; 3]; 3]; 3] };
        for (k, &(i, j)) in SYM_INDEX.iter().enumerate() {
            let jet = self.g.entries[k].jet(x);
            for (a, b) in [(i, j), (j, i)] {
                mj.g[a][b] = jet.v;
                for m in 0..3 {
                    mj.dg[m][a][b] = jet.d[m];
                    for l in 0..3 {
                        mj.ddg[m][l][a][b] = jet.dd[m][l];
                    }
                }
            }
        }
        mj
    }

    fn form_jet(&self, x: &V3) -> FormJet {
        let mut fj = FormJet::zero();
        for i in 0..3 {
            let jet = self.a[i].jet(x);
            fj.a[i] = jet.v;
            for k in 0..3 {
                fj.da[k][i] = jet.d[k];
            }
        }
        fj
    }
}

impl SurrogateModel {
    /// A model with given polynomials and no fit record.
    pub fn new(g: SymPoly, a: [Poly3; 3], domain_radius: f64) -> Self {
        SurrogateModel { g, a, domain_radius, metric_fit_residual: 0.0, geodesic_fit_residual: 0.0 }
    }
}

/// A metric field with vanishing Weyl form, for fitting a against a given g.
struct MetricOnly<'a>(&'a SymPoly);

impl WeylField for MetricOnly<'_> {
    fn metric_jet(&self, x: &V3) -> MetricJet {
        SurrogateModel::new(self.0.clone(), [Poly3::constant(ZERO), Poly3::constant(ZERO), Poly3::constant(ZERO)], 0.0).metric_jet(x)
    }
    fn form_jet(&self, _: &V3) -> FormJet {
        FormJet::zero()
    }
}

/// Least squares with a condition-number guard.
fn solve_ls(a: &CMat, b: &CMat, max_condition: f64) -> Result<(CMat, f64)> {
    if a.nrows() < a.ncols() {
        return Err(Error::IllConditionedFit(format!("{} samples for {} unknowns", a.nrows(), a.ncols())));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !(cond < max_condition) {
        return Err(Error::IllConditionedFit(format!("condition {cond:.3e}")));
    }
    let x = svd.solve(b, 0.0).map_err(|e| Error::IllConditionedFit(e.to_string()))?;
    Ok((x, cond))
}

/// Unit-determinant metric at n random points of the polydisc, in parallel.
pub fn sample_metric(chart: &ChartFrame, n: usize, radius: f64, seed: u64) -> Result<Vec<(V3, M3)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<V3> = (0..n).map(|_| ChartFrame::random_point(radius, &mut rng)).collect();
    xs.par_iter().map(|x| Ok((*x, chart.metric(x)?))).collect()
}

/// Geodesics of a known field from random points of the polydisc of radius
/// radius/2 in random unit directions, integrated over a length radius/2.
pub fn synthetic_geodesics(field: &(dyn WeylField + Sync), radius: f64, count: usize, per: usize, seed: u64) -> Vec<GeodesicSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(V3, V3)> = (0..count)
        .map(|_| {
            let x = ChartFrame::random_point(radius / 2.0, &mut rng);
            let t = ChartFrame::random_point(1.0, &mut rng);
            let n = t.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            (x, t.map(|v| v / n))
        })
        .collect();
    let steps = per.max(2) - 1;
    starts.par_iter().flat_map_iter(|(x, t)| integrate_geodesic(field, *x, *t, radius / 2.0 / steps as f64, steps)).collect()
}

/// Least-squares fit of each metric entry by holomorphic polynomials of the
/// given degree in x / radius. Fails when the relative residual exceeds
/// `max_residual`.
pub fn fit_metric(samples: &[(V3, M3)], degree: usize, radius: f64, max_residual: f64) -> Result<(SymPoly, f64)> {
    let nm = super::poly::monomials(degree).len();
    let a = CMat::from_fn(samples.len(), nm, |r, k| Poly3::basis_row(degree, radius, &samples[r].0)[k]);
    let b = CMat::from_fn(samples.len(), 6, |r, k| {
        let (i, j) = SYM_INDEX[k];
        samples[r].1[i][j]
    });
    let (x, _) = solve_ls(&a, &b, 1e10)?;
    let resid = (&a * &x - &b).norm() / b.norm();
    if !(resid <= max_residual) {
        return Err(Error::IllConditionedFit(format!("metric fit residual {resid:.3e} above {max_residual:.1e}")));
    }
    let g = SymPoly { entries: (0..6).map(|k| Poly3::with_coeffs(degree, radius, x.column(k).iter().copied().collect())).collect() };
    Ok((g, resid))
}

/// Weyl 1-form a (holomorphic polynomial of the given degree) such that
/// A + Γ(a)(T,T) is parallel to T on every sample, by least squares.
/// Returns the form and the relative geodesic residual.
pub fn fit_weyl_form(g: &SymPoly, samples: &[GeodesicSample], degree: usize, radius: f64) -> Result<([Poly3; 3], f64)> {
    let nm = super::poly::monomials(degree).len();
    let cols = 3 * nm;
    let mut a = CMat::zeros(3 * samples.len(), cols);
    let mut b = CVec::zeros(3 * samples.len());
    let field = MetricOnly(g);
    for (s, smp) in samples.iter().enumerate() {
        let mj = field.metric_jet(&smp.x);
        let lc = connection(&mj, &FormJet::zero());
        let gi = inv3(&mj.g);
        let mut gtt = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                gtt += mj.g[i][j] * smp.t[i] * smp.t[j];
            }
        }
        let w = 1.0 / smp.t.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let lct = quad(&lc.gamma, &smp.t);
        let rhs = transverse(&[0, 1, 2].map(|i| -(smp.acc[i] + lct[i])), &smp.t);
        let row = Poly3::basis_row(degree, radius, &smp.x);
        for k in 0..3 {
            // ½ g(T,T) g⁻¹ e_k, projected
            let col = transverse(&[0, 1, 2].map(|i| 0.5 * gtt * gi[i][k]), &smp.t);
            for (e, mono) in row.iter().enumerate() {
                for i in 0..3 {
                    a[(3 * s + i, k * nm + e)] = col[i] * mono * w;
                }
            }
        }
        for i in 0..3 {
            b[3 * s + i] = rhs[i] * w;
        }
    }
    let rank = linalg::numeric_rank(&a, 1e-10);
    if rank < cols {
        return Err(Error::RankDeficientFit { rank, cols });
    }
    let (x, _) = solve_ls(&a, &CMat::from_column_slice(b.len(), 1, b.as_slice()), 1e12)?;
    let form = [0, 1, 2].map(|k| Poly3::with_coeffs(degree, radius, x.column(0).rows(k * nm, nm).iter().copied().collect()));
    let model = SurrogateModel::new(g.clone(), form.clone(), radius);
    Ok((form, geodesic_residual(&model, samples)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EWReport {
    /// Λ fitted by a quadratic polynomial over the test grid.
    pub lambda_field: Poly3,
    pub lambda_values: Vec<C64>,
    /// sup over the grid of ‖R_(ij) − Λ g_ij‖ / ‖R_(ij)‖.
    pub residual_tracefree: f64,
    pub geodesic_fit_residual: f64,
    pub compat_residual: f64,
    pub grid_radius: f64,
    pub grid_points: usize,
}

/// Einstein–Weyl and compatibility residuals of a field over `grid` random
/// points of the polydisc of radius `grid_radius`.
pub fn field_residuals(field: &dyn WeylField, grid_radius: f64, grid: usize, seed: u64) -> (Vec<V3>, Vec<C64>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<V3> = (0..grid).map(|_| ChartFrame::random_point(grid_radius, &mut rng)).collect();
    let mut lambdas = Vec::new();
    let (mut tf, mut compat) = (0.0f64, 0.0f64);
    for x in &xs {
        let (l, r) = einstein_weyl_at(field, x);
        lambdas.push(l);
        tf = tf.max(r);
        let mj = field.metric_jet(x);
        let fj = field.form_jet(x);
        compat = compat.max(compat_residual(&mj, &fj, &connection(&mj, &fj)));
    }
    (xs, lambdas, tf, compat)
}

/// The test grid covers the inner half of the fitted domain.
pub fn ew_residual(model: &SurrogateModel, grid: usize, seed: u64) -> EWReport {
    let r = 0.5 * model.domain_radius;
    let (xs, lambdas, tf, compat) = field_residuals(model, r, grid, seed);
    let deg = 2;
    let a = CMat::from_fn(xs.len(), super::poly::monomials(deg).len(), |i, k| Poly3::basis_row(deg, r, &xs[i])[k]);
    let b = CMat::from_column_slice(lambdas.len(), 1, &lambdas);
    let coeffs = solve_ls(&a, &b, 1e12).map(|(x, _)| x.column(0).iter().copied().collect()).unwrap_or_else(|_| vec![ZERO; a.ncols()]);
    EWReport {
        lambda_field: Poly3::with_coeffs(deg, r, coeffs),
        lambda_values: lambdas,
        residual_tracefree: tf,
        geodesic_fit_residual: model.geodesic_fit_residual,
        compat_residual: compat,
        grid_radius: r,
        grid_points: grid,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EwOptions {
    pub radius: f64,
    pub samples: usize,
    pub geodesics: usize,
    pub geodesic_points: usize,
    pub metric_degree: usize,
    pub form_degree: usize,
    pub max_fit_residual: f64,
    pub grid: usize,
    pub held_out: usize,
    pub seed: u64,
}

impl Default for EwOptions {
    fn default() -> Self {
        EwOptions { radius: 0.05, samples: 500, geodesics: 30, geodesic_points: 11, metric_degree: 4, form_degree: 3, max_fit_residual: 1e-6, grid: 64, held_out: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EwRun {
    pub options: EwOptions,
    pub model: SurrogateModel,
    pub report: EWReport,
    /// Geodesic residual of null geodesics not used in the fit.
    pub held_out_null_residual: f64,
}

/// The full pipeline on one chart: sample and fit the metric, trace
/// geodesics and fit the Weyl form, then evaluate the residuals.
pub fn ew_check(chart: &ChartFrame, opts: &EwOptions) -> Result<EwRun> {
    let samples = sample_metric(chart, opts.samples, opts.radius, opts.seed)?;
    let (g, metric_res) = fit_metric(&samples, opts.metric_degree, opts.radius, opts.max_fit_residual)?;
    let geos: Vec<GeodesicSample> = chart.random_geodesics(opts.radius, opts.geodesics, opts.geodesic_points, opts.seed)?.into_iter().flatten().collect();
    let (a, geo_res) = fit_weyl_form(&g, &geos, opts.form_degree, opts.radius)?;
    let model = SurrogateModel { g, a, domain_radius: opts.radius, metric_fit_residual: metric_res, geodesic_fit_residual: geo_res };
    let held: Vec<GeodesicSample> = chart.random_null_geodesics(opts.radius, opts.held_out, opts.geodesic_points, opts.seed + 1)?.into_iter().flatten().collect();
    let held_out_null_residual = geodesic_residual(&model, &held);
    let report = ew_residual(&model, opts.grid, opts.seed + 2);
    Ok(EwRun { options: opts.clone(), model, report, held_out_null_residual })
}

/// Runs at radius r / 2^k with 2^k times the samples and geodesics.
pub fn refine(chart: &ChartFrame, opts: &EwOptions, levels: usize) -> Result<Vec<EwRun>> {
    (0..levels)
        .map(|k| {
            let f = 1usize << k;
            let o = EwOptions { radius: opts.radius / f as f64, samples: opts.samples * f, geodesics: opts.geodesics * f, ..opts.clone() };
            ew_check(chart, &o)
        })
        .collect()
}
