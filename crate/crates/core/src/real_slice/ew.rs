use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::member::RealMember;
use super::structure::RealStructure;
use crate::error::{Error, Result};
use crate::geodesic_trace::{preimage_gap, IncidenceConstraint};
use crate::linalg::{self, c, CMat, C64, ZERO};
use crate::nodal_curve::{incidence_system, severi_tangent, StateLayout};
use crate::weyl_fit::{
    connection, ew_residual, fit_metric, fit_weyl_form, frame_from_steps, normalized_theta, ChartFrame, EWReport, EwOptions, GeodesicSample,
    SurrogateModel, Trivialization, WeylField, M3, V3,
};

/// Pairs (2j, 2j+1) of base preimages exchanged by σ.
pub fn antipodal_pairing(n_points: usize) -> Vec<(usize, usize)> {
    (0..n_points / 2).map(|j| (2 * j, 2 * j + 1)).collect()
}

/// Chart at a real member whose coordinate vectors at the base are σ-fixed
/// and orthonormal for the real metric. Real coordinates give real members,
/// and the metric (θ rescaled by the determinants of the σ-paired base
/// preimages, times a constant phase) is real there.
pub fn real_chart(member: &RealMember) -> Result<ChartFrame> {
    let curve = &member.curve;
    let points = &member.config.points;
    let layout = StateLayout::for_curve(curve);
    let nc = layout.coeff_len();
    let b = layout.pack_curve(curve);
    let t = severi_tangent(curve, points)?;
    let prs: Vec<(usize, _)> = points.iter().copied().enumerate().collect();
    let (_, jac) = incidence_system(&layout, &b, &prs);
    let jc = jac.columns(0, nc).into_owned();
    let jp = jac.columns(nc, jac.ncols() - nc).into_owned();
    let mut cands = Vec::new();
    for k in 0..3 {
        for w in [C64::new(1.0, 0.0), c(0.0, 1.0)] {
            let d = t.column(k) * w;
            let dc = d.rows(0, nc).into_owned();
            let mut full = d.clone();
            let rc = &dc + member.structure.act_on_coeffs(&layout, &d, member.data.lambdas);
            full.rows_mut(0, nc).copy_from(&rc);
            let rp = linalg::lstsq(&jp, &(-(&jc * &rc)), 1e-13);
            full.rows_mut(nc, rp.len()).copy_from(&rp);
            cands.push(full);
        }
    }
    let triv = Trivialization::Paired(antipodal_pairing(points.len()));
    let th = cands.iter().map(|d| normalized_theta(&layout, points.len(), &b, d, &triv)).collect::<Result<Vec<_>>>()?;
    let n = cands.len();
    let g = CMat::from_fn(n, n, |i, j| crate::conformal::polarization(&th[i], &th[j]));
    let tr = g.trace();
    let phase = tr.conj() / tr.norm();
    let gr = (g * phase).map(|v| v.re);
    // pivoted Cholesky on the real Gram matrix
    let mut chosen = Vec::new();
    let mut l: Vec<Vec<f64>> = Vec::new();
    for _ in 0..3 {
        let resid = |i: usize| gr[(i, i)] - l.iter().map(|col| col[i] * col[i]).sum::<f64>();
        let k = (0..n).filter(|i| !chosen.contains(i)).max_by(|&a, &b| resid(a).partial_cmp(&resid(b)).unwrap()).unwrap();
        let pivot = resid(k);
        if !(pivot > 1e-10 * gr[(0, 0)].abs().max(gr[(1, 1)].abs())) {
            return Err(Error::IndefiniteRealMetric(pivot));
        }
        let s = pivot.sqrt();
        let col: Vec<f64> = (0..n).map(|i| (gr[(i, k)] - l.iter().map(|c| c[i] * c[k]).sum::<f64>()) / s).collect();
        l.push(col);
        chosen.push(k);
    }
    // L3 Lᵀ3 is the Gram matrix of the chosen vectors; steps = R L3^{-T}
    let l3 = nalgebra::Matrix3::from_fn(|i, j| l[j][chosen[i]]);
    let inv = l3.try_inverse().ok_or(Error::DegenerateMetric { rank: 2 })?.transpose();
    let r = CMat::from_fn(layout.len(), 3, |i, j| cands[chosen[j]][i]);
    let d = r * super::member::cmat3(&inv);
    frame_from_steps(curve, points, &d, triv, phase)
}

fn random_real_point(radius: f64, rng: &mut ChaCha8Rng) -> V3 {
    [0, 1, 2].map(|_| c(rng.gen_range(-radius..radius), 0.0))
}

/// max |Im| / max |value| over a collection of complex numbers.
fn imag_ratio<'a>(values: impl Iterator<Item = &'a C64>) -> f64 {
    let (mut im, mut abs) = (0.0f64, 0.0f64);
    for v in values {
        im = im.max(v.im.abs());
        abs = abs.max(v.norm());
    }
    if abs > 0.0 {
        im / abs
    } else {
        0.0
    }
}

/// Arcs of W_{p,σp} through random real members of the chart.
pub fn real_geodesic_samples(chart: &ChartFrame, structure: &RealStructure, radius: f64, count: usize, per: usize, seed: u64) -> Result<Vec<Vec<GeodesicSample>>> {
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut last = Error::StepFailure("no attempt".into());
            for attempt in 0..8u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(15485863).wrapping_add(1000 * k as u64 + attempt));
                let x0 = random_real_point(radius / 2.0, &mut rng);
                let curve = match chart.curve(&x0) {
                    Ok(c) => c,
                    Err(e) => {
                        last = e;
                        continue;
                    }
                };
                let r = 1.2 * rng.gen_range(0.0f64..1.0).sqrt();
                let z = crate::binary_forms::ProjPoint::affine(C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU)));
                let p = curve.eval(&z);
                let cons = [
                    IncidenceConstraint::ThroughPoint { p, z },
                    IncidenceConstraint::ThroughPoint { p: structure.apply(&p), z: z.antipode() },
                ];
                if preimage_gap(&curve, &cons) < 0.1 {
                    continue;
                }
                match chart.real_chart_curve(&x0, &cons, radius / 2.0, per) {
                    Ok(s) => return Ok(s),
                    Err(e) => last = e,
                }
            }
            Err(last)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealEwRun {
    pub options: EwOptions,
    pub model: SurrogateModel,
    /// Einstein–Weyl residuals of the fitted model on the complex polydisc.
    pub report: EWReport,
    /// max |Im| / max |g| of the sampled metric at real points.
    pub metric_imag: f64,
    /// max |Im| / max |x| of the coordinates along the real geodesic samples.
    pub geodesic_imag: f64,
    /// max |Im| / max |Γ| of the fitted connection at real grid points.
    pub gamma_imag: f64,
    /// max |Im| / max |a| of the fitted Weyl form at real grid points.
    pub form_imag: f64,
}

/// The Weyl fit on the real slice of a real chart: the metric is sampled at
/// real coordinates and the Weyl form is fitted to the real geodesics
/// W_{p,σp}. Reports the imaginary parts of the data and of the fitted
/// connection and form at real points.
pub fn real_ew_check(chart: &ChartFrame, structure: &RealStructure, opts: &EwOptions) -> Result<RealEwRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let xs: Vec<V3> = (0..opts.samples).map(|_| random_real_point(opts.radius, &mut rng)).collect();
    let samples: Vec<(V3, M3)> = xs.par_iter().map(|x| Ok((*x, chart.metric(x)?))).collect::<Result<_>>()?;
    let metric_imag = imag_ratio(samples.iter().flat_map(|(_, g)| g.iter().flatten()));
    let (g, metric_res) = fit_metric(&samples, opts.metric_degree, opts.radius, opts.max_fit_residual)?;
    let geos: Vec<GeodesicSample> = real_geodesic_samples(chart, structure, opts.radius, opts.geodesics, opts.geodesic_points, opts.seed)?.into_iter().flatten().collect();
    let geodesic_imag = imag_ratio(geos.iter().flat_map(|s| s.x.iter()));
    let (a, geo_res) = fit_weyl_form(&g, &geos, opts.form_degree, opts.radius)?;
    let model = SurrogateModel { g, a, domain_radius: opts.radius, metric_fit_residual: metric_res, geodesic_fit_residual: geo_res };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed + 3);
    let mut gammas = Vec::new();
    let mut forms = Vec::new();
    for _ in 0..opts.grid {
        let x = random_real_point(opts.radius / 2.0, &mut rng);
        let fj = model.form_jet(&x);
        let conn = connection(&model.metric_jet(&x), &fj);
        gammas.extend(conn.gamma.iter().flatten().flatten().copied());
        forms.extend(fj.a);
    }
    let report = ew_residual(&model, opts.grid, opts.seed + 2);
    Ok(RealEwRun {
        options: opts.clone(),
        model,
        report,
        metric_imag,
        geodesic_imag,
        gamma_imag: imag_ratio(gammas.iter()),
        form_imag: imag_ratio(forms.iter()),
    })
}

/// Gram matrix of the chart metric at the base, for checking the phase.
pub fn base_metric(chart: &ChartFrame) -> Result<M3> {
    chart.metric(&[ZERO; 3])
}
