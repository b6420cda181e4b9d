use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use mtl_core::binary_forms::ProjPoint;
use mtl_core::conformal::{self, polarization, PointKind};
use mtl_core::geodesic_trace::{
    branch_enumerate, render_displacement_svg, trace_geodesic, trace_nodal_locus, trace_null_geodesic, trace_null_surface, trace_seed, StopReason,
    SvgChart, TraceOptions, TraceResult,
};
use mtl_core::nodal_curve::{generic_member, rank_gap, solve_member, ParamCurve};
use mtl_core::picard_lattice::{summarize, DivisorClass};
use mtl_core::real_slice::{self, construct_real_member, real_ew_check, real_geodesic, real_metric_at, real_metric_of, reality_check, RealMember, RealityReport};
use mtl_core::surface_config::{random_config, PointConfig, SurfacePoint};
use mtl_core::weyl_fit::{build_chart, refine, EWReport, EwOptions};

use crate::output::{emit, read_json, validate, write_text, CliResult, Failure};
use crate::{ConfigArgs, EwArgs, LatticeArgs, MetricArgs, Outcome, RealArgs, RenderArgs, SolveArgs, TraceArgs, TraceMode};

fn parse_complex(s: &str) -> CliResult<C64> {
    let bad = || Failure::Usage(format!("expected `re` or `re:im`, got '{s}'"));
    let mut parts = s.trim().split(':');
    let re: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let im: f64 = match parts.next() {
        Some(t) => t.trim().parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

fn parse_coord(s: &str) -> CliResult<ProjPoint> {
    if s.trim() == "inf" {
        Ok(ProjPoint::infinity())
    } else {
        parse_complex(s).map(ProjPoint::affine)
    }
}

/// `u,v` with each coordinate `re`, `re:im` or `inf`.
fn parse_point(s: &str) -> CliResult<SurfacePoint> {
    let (u, v) = s.split_once(',').ok_or_else(|| Failure::Usage(format!("expected a point `u,v`, got '{s}'")))?;
    Ok(SurfacePoint::new(parse_coord(u)?, parse_coord(v)?))
}

fn path_str(p: &std::path::Path) -> String {
    p.display().to_string()
}

pub fn config(a: &ConfigArgs) -> CliResult<Outcome> {
    let cfg = random_config(a.m, a.k, a.seed)?;
    cfg.validate()?;
    let mut outputs = Vec::new();
    emit(&cfg, a.out.as_ref(), &mut outputs)?;
    Ok(Outcome { summary: format!("{} points for m={} k={}", cfg.points.len(), cfg.m, cfg.k), inputs: vec![], outputs, seed: Some(a.seed) })
}

pub fn lattice(a: &LatticeArgs) -> CliResult<Outcome> {
    let class = DivisorClass::parse(&a.class).map_err(Failure::Usage)?;
    let s = summarize(&class)?;
    let mut outputs = Vec::new();
    emit(&s, a.out.as_ref(), &mut outputs)?;
    Ok(Outcome {
        summary: format!("C^2={} nodes={} severi_dim={} minimal={}", s.self_intersection, s.nodes, s.severi_dim, s.minimal),
        inputs: vec![],
        outputs,
        seed: None,
    })
}

pub fn solve(a: &SolveArgs, tol: f64) -> CliResult<Outcome> {
    let cfg: PointConfig = read_json(&a.config)?;
    cfg.validate()?;
    let curve = match a.omit {
        Some(k) if k >= cfg.points.len() => return Err(Failure::Usage(format!("--omit {k} out of range for {} points", cfg.points.len()))),
        Some(k) => solve_member(&cfg, k, a.step)?,
        None => generic_member(&cfg)?,
    };
    let resid = curve.incidence_residual(&cfg.points);
    validate(resid < tol, "incidence_residual", json!({ "residual": resid, "tolerance": tol }))?;
    validate(curve.node_pairs.len() + 1 == cfg.m, "node_count", json!({ "expected": cfg.m - 1, "found": curve.node_pairs.len() }))?;
    let mut outputs = Vec::new();
    emit(&curve, a.out.as_ref(), &mut outputs)?;
    Ok(Outcome {
        summary: format!("member with {} nodes, incidence residual {resid:.2e}, rank gap {:.2e}", curve.node_pairs.len(), rank_gap(&curve, &cfg.points)),
        inputs: vec![path_str(&a.config)],
        outputs,
        seed: Some(cfg.seed),
    })
}

#[derive(Serialize)]
struct NullConeSample {
    z: ProjPoint,
    /// |det| / ‖G‖² of the metric on the null plane at z.
    degeneracy: f64,
    /// Image of the null plane under null_plane_to_point.
    point: SurfacePoint,
    kind: PointKind,
    /// Distance from that image to φ(z).
    round_trip: f64,
}

#[derive(Serialize)]
struct MetricReport {
    gram: [[C64; 3]; 3],
    scale_convention: String,
    determinant: C64,
    singular_values: Vec<f64>,
    rank: usize,
    /// Scalar and relative residual of the comparison with the implicit model.
    vc_scalar: C64,
    vc_residual: f64,
    null_cone: Vec<NullConeSample>,
}

fn det3(g: &[[C64; 3]; 3]) -> C64 {
    g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
}

pub fn metric(a: &MetricArgs, tol: f64) -> CliResult<Outcome> {
    let curve: ParamCurve = read_json(&a.curve)?;
    let m = conformal::metric_at(&curve)?;
    let sv: Vec<f64> = conformal::gram_matrix(&m.gram).singular_values().iter().copied().collect();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    let (vc_scalar, vc_residual) = conformal::vc_agreement(&curve, &m.basis)?;
    let mut null_cone = Vec::new();
    for k in 0..a.samples {
        let ang = std::f64::consts::TAU * (k as f64 + 0.25) / a.samples as f64;
        let z = ProjPoint::affine(C64::from_polar(0.4 + 0.8 * k as f64 / a.samples.max(1) as f64, ang));
        let plane = conformal::null_plane_at(&m.basis, &z)?;
        let g = |i: usize, j: usize| polarization(&plane.span[i].theta, &plane.span[j].theta);
        let det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
        let n2 = g(0, 0).norm_sqr() + g(0, 1).norm_sqr() + g(1, 0).norm_sqr() + g(1, 1).norm_sqr();
        let (point, kind) = conformal::null_plane_to_point(&curve, &plane)?;
        let round_trip = point.dist(&curve.eval(&z));
        null_cone.push(NullConeSample { z, degeneracy: det.norm() / n2, point, kind, round_trip });
    }
    let report = MetricReport { gram: m.gram, scale_convention: m.scale_convention, determinant: det3(&m.gram), singular_values: sv, rank, vc_scalar, vc_residual, null_cone };
    validate(report.rank == 3, "metric_rank", json!({ "rank": report.rank, "singular_values": report.singular_values }))?;
    let worst_deg = report.null_cone.iter().map(|s| s.degeneracy).fold(0.0, f64::max);
    validate(worst_deg < 1e-6, "null_plane_degeneracy", json!({ "max": worst_deg }))?;
    let worst_trip = report.null_cone.iter().map(|s| s.round_trip).fold(0.0, f64::max);
    validate(worst_trip < tol, "null_plane_round_trip", json!({ "max": worst_trip, "tolerance": tol }))?;
    validate(vc_residual < 1e-7, "vc_agreement", json!({ "residual": vc_residual }))?;
    let mut outputs = Vec::new();
    emit(&report, a.out.as_ref(), &mut outputs)?;
    Ok(Outcome {
        summary: format!("rank {rank}, null-plane degeneracy ≤ {worst_deg:.1e}, model agreement {vc_residual:.1e}"),
        inputs: vec![path_str(&a.curve)],
        outputs,
        seed: None,
    })
}

fn point_arg(curve: &ParamCurve, p: &Option<String>, z: &Option<String>, flag: &str) -> CliResult<Option<SurfacePoint>> {
    match (p, z) {
        (Some(_), Some(_)) => Err(Failure::Usage(format!("give either --{flag} or --z{flag}, not both"))),
        (Some(s), None) => parse_point(s).map(Some),
        (None, Some(s)) => Ok(Some(curve.eval(&ProjPoint::affine(parse_complex(s)?)))),
        (None, None) => Ok(None),
    }
}

fn check_trace(tr: &TraceResult, cfg: &PointConfig, tol: f64) -> CliResult<()> {
    let bad_nodes: Vec<usize> = tr.states.iter().enumerate().filter(|(_, s)| s.node_pairs.len() + 1 != cfg.m).map(|(k, _)| k).collect();
    validate(bad_nodes.is_empty(), "node_count", json!({ "expected": cfg.m - 1, "states": bad_nodes }))?;
    let worst = tr.states.iter().map(|s| s.incidence_residual(&cfg.points)).fold(0.0, f64::max);
    validate(worst < tol, "incidence_residual", json!({ "max": worst, "tolerance": tol }))
}

fn stop_label(stop: &StopReason) -> String {
    match stop {
        StopReason::Completed => "completed".into(),
        StopReason::BranchPoint { gap } => format!("branch point (gap {gap:.1e})"),
        StopReason::StepFailure(s) => format!("step failure: {s}"),
        StopReason::NodeCountMismatch { expected, found } => format!("node count {found} instead of {expected}"),
    }
}

pub fn trace(a: &TraceArgs, tol: f64) -> CliResult<Outcome> {
    let cfg: PointConfig = read_json(&a.config)?;
    let curve: ParamCurve = read_json(&a.curve)?;
    let pts = &cfg.points;
    let opts = TraceOptions { steps: a.steps, h: a.h, ..Default::default() };
    let p = point_arg(&curve, &a.p, &a.zp, "p")?;
    let q = point_arg(&curve, &a.q, &a.zq, "q")?;
    let need = |x: Option<SurfacePoint>, flag: &str| x.ok_or_else(|| Failure::Usage(format!("--mode {:?} needs --{flag} or --z{flag}", a.mode).to_lowercase()));
    let inputs = vec![path_str(&a.config), path_str(&a.curve)];
    let mut outputs = Vec::new();
    if a.mode == TraceMode::Nullsurf {
        if a.svg.is_some() {
            return Err(Failure::Usage("--svg is not available for null-surface patches".into()));
        }
        let ns = trace_null_surface(&curve, pts, &need(p, "p")?, a.grid, a.h)?;
        let worst = ns.degeneracy.iter().cloned().fold(0.0, f64::max);
        validate(worst < 1e-6, "null_surface_degeneracy", json!({ "max": worst }))?;
        emit(&ns, a.out.as_ref(), &mut outputs)?;
        return Ok(Outcome { summary: format!("{} states, degeneracy ≤ {worst:.1e}", ns.states.len()), inputs, outputs, seed: Some(cfg.seed) });
    }
    let traces: Vec<TraceResult> = match a.mode {
        TraceMode::Geodesic => {
            let (p, q) = (need(p, "p")?, need(q, "q")?);
            if a.all_branches {
                let seeds = branch_enumerate(&curve, &p, &q);
                if seeds.is_empty() {
                    return Err(Failure::Usage("p or q is not on the curve".into()));
                }
                seeds.par_iter().map(|s| trace_seed(&curve, pts, &p, &q, s, &opts)).collect::<mtl_core::Result<_>>()?
            } else {
                vec![trace_geodesic(&curve, pts, &p, &q, &opts)?]
            }
        }
        TraceMode::Nodal => {
            let p = match p {
                Some(p) => p,
                None => *curve.node_images().first().ok_or_else(|| Failure::Usage("the curve has no node".into()))?,
            };
            vec![trace_nodal_locus(&curve, pts, &p, &opts)?]
        }
        TraceMode::Nullgeo => vec![trace_null_geodesic(&curve, pts, &need(p, "p")?, &opts)?],
        TraceMode::Nullsurf => unreachable!(),
    };
    for tr in &traces {
        check_trace(tr, &cfg, tol)?;
    }
    if let Some(svg) = &a.svg {
        write_text(svg, &render_displacement_svg(&traces[0], &SvgChart::default())?)?;
        outputs.push(path_str(svg));
    }
    let states: Vec<String> = traces.iter().map(|t| format!("{} states ({})", t.states.len(), stop_label(&t.stop))).collect();
    if a.all_branches {
        emit(&traces, a.out.as_ref(), &mut outputs)?;
    } else {
        emit(&traces[0], a.out.as_ref(), &mut outputs)?;
    }
    Ok(Outcome { summary: states.join("; "), inputs, outputs, seed: Some(cfg.seed) })
}

#[derive(Serialize)]
struct EwLevel {
    level: usize,
    radius: f64,
    samples: usize,
    geodesics: usize,
    metric_fit_residual: f64,
    held_out_null_residual: f64,
    report: EWReport,
}

#[derive(Serialize)]
struct EwOutput {
    options: EwOptions,
    levels: Vec<EwLevel>,
    tracefree_decreasing: bool,
}

pub const EW_CSV_HEADER: &str = "level,radius,samples,geodesics,metric_fit_residual,geodesic_fit_residual,compat_residual,tracefree_residual,held_out_null_residual";

pub fn ew_check(a: &EwArgs) -> CliResult<Outcome> {
    if a.levels == 0 {
        return Err(Failure::Usage("--levels must be at least 1".into()));
    }
    let cfg: PointConfig = read_json(&a.config)?;
    let curve: ParamCurve = read_json(&a.curve)?;
    let chart = build_chart(&curve, &cfg.points)?;
    let opts = EwOptions { radius: a.radius, samples: a.samples, geodesics: a.geodesics, seed: a.seed, ..Default::default() };
    let runs = refine(&chart, &opts, a.levels)?;
    let levels: Vec<EwLevel> = runs
        .into_iter()
        .enumerate()
        .map(|(k, r)| EwLevel {
            level: k,
            radius: r.options.radius,
            samples: r.options.samples,
            geodesics: r.options.geodesics,
            metric_fit_residual: r.model.metric_fit_residual,
            held_out_null_residual: r.held_out_null_residual,
            report: r.report,
        })
        .collect();
    let tf: Vec<f64> = levels.iter().map(|l| l.report.residual_tracefree).collect();
    let decreasing = tf.windows(2).all(|w| w[1] < w[0]);
    let mut outputs = Vec::new();
    if let Some(path) = &a.csv {
        let mut text = String::from(EW_CSV_HEADER);
        text.push('\n');
        for l in &levels {
            text.push_str(&format!(
                "{},{:.6e},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                l.level,
                l.radius,
                l.samples,
                l.geodesics,
                l.metric_fit_residual,
                l.report.geodesic_fit_residual,
                l.report.compat_residual,
                l.report.residual_tracefree,
                l.held_out_null_residual
            ));
        }
        write_text(path, &text)?;
        outputs.push(path_str(path));
    }
    let compat = levels.iter().map(|l| l.report.compat_residual).fold(0.0, f64::max);
    let out = EwOutput { options: opts, levels, tracefree_decreasing: decreasing };
    emit(&out, a.out.as_ref(), &mut outputs)?;
    validate(decreasing, "tracefree_decreasing", json!({ "tracefree": tf }))?;
    validate(compat < 1e-10, "compat_residual", json!({ "max": compat }))?;
    Ok(Outcome {
        summary: format!("tracefree residuals {}", tf.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" > ")),
        inputs: vec![path_str(&a.config), path_str(&a.curve)],
        outputs,
        seed: Some(a.seed),
    })
}

#[derive(Serialize)]
struct RealTraceRecord {
    through_node: bool,
    p: SurfacePoint,
    stop: StopReason,
    arc_params: Vec<f64>,
    /// Smallest real-metric eigenvalue at each state.
    min_eigenvalues: Vec<f64>,
    /// Whether each state passes the reality check.
    real: Vec<bool>,
    trace: TraceResult,
}

#[derive(Serialize)]
struct RealEwSummary {
    radius: f64,
    metric_imag: f64,
    geodesic_imag: f64,
    gamma_imag: f64,
    form_imag: f64,
    geodesic_fit_residual: f64,
    compat_residual: f64,
    tracefree_residual: f64,
}

#[derive(Serialize)]
struct RealOutput {
    member: RealMember,
    h: C64,
    eigenvalues: [f64; 3],
    gram: [[f64; 3]; 3],
    traces: Vec<RealTraceRecord>,
    ew: Option<RealEwSummary>,
}

/// Parameters of the generic points, skipping those near a base or node
/// preimage.
fn generic_params(curve: &ParamCurve, count: usize) -> Vec<ProjPoint> {
    let cands = [(0.3, 0.2), (-0.45, 0.5), (0.6, -0.35), (-0.2, -0.65), (0.85, 0.15), (-0.7, -0.1), (0.1, 0.9), (0.25, -0.8)];
    let avoid: Vec<ProjPoint> = curve.base_preimages.iter().copied().chain(curve.node_preimages()).collect();
    cands
        .iter()
        .map(|&(x, y)| ProjPoint::affine(C64::new(x, y)))
        .filter(|z| avoid.iter().all(|w| w.dist(z) > 0.1 && w.dist(&z.antipode()) > 0.1))
        .take(count)
        .collect()
}

fn real_record(member: &RealMember, p: SurfacePoint, through_node: bool, steps: usize) -> mtl_core::Result<RealTraceRecord> {
    let tr = real_geodesic(member, &p, &TraceOptions { steps, ..Default::default() })?;
    let min_eigenvalues = tr.states.iter().map(|s| real_metric_of(s, &member.structure).map(|g| g.eigenvalues[0]).unwrap_or(f64::NAN)).collect();
    let real = tr.states.iter().map(|s| reality_check(s, &member.structure).passes()).collect();
    Ok(RealTraceRecord { through_node, p, stop: tr.stop.clone(), arc_params: tr.arc_params.clone(), min_eigenvalues, real, trace: tr })
}

pub const REAL_CSV_HEADER: &str = "trace,through_node,state,arc,min_eigenvalue,real";

pub fn real(a: &RealArgs, _tol: f64) -> CliResult<Outcome> {
    let member = construct_real_member(a.m, a.seed)?;
    let report: &RealityReport = &member.report;
    validate(report.passes(), "reality_conditions", json!({ "conditions": report.conditions, "invariant": report.invariant }))?;
    let g = real_metric_at(&member.curve, &member.data)?;
    let mut points: Vec<(SurfacePoint, bool)> = member.curve.node_images().into_iter().take(1).map(|p| (p, true)).collect();
    points.extend(generic_params(&member.curve, a.geodesics).iter().map(|z| (member.curve.eval(z), false)));
    let traces: Vec<RealTraceRecord> = points.par_iter().map(|(p, node)| real_record(&member, *p, *node, a.steps)).collect::<mtl_core::Result<_>>()?;
    let ew = if a.ew {
        let chart = real_slice::real_chart(&member)?;
        let opts = EwOptions { radius: 0.01, samples: 300, geodesics: 20, seed: a.seed, ..Default::default() };
        let run = real_ew_check(&chart, &member.structure, &opts)?;
        Some(RealEwSummary {
            radius: opts.radius,
            metric_imag: run.metric_imag,
            geodesic_imag: run.geodesic_imag,
            gamma_imag: run.gamma_imag,
            form_imag: run.form_imag,
            geodesic_fit_residual: run.model.geodesic_fit_residual,
            compat_residual: run.report.compat_residual,
            tracefree_residual: run.report.residual_tracefree,
        })
    } else {
        None
    };
    let out = RealOutput { h: member.data.h, eigenvalues: g.eigenvalues, gram: g.gram, member, traces, ew };
    let mut outputs = Vec::new();
    if let Some(path) = &a.csv {
        let mut text = String::from(REAL_CSV_HEADER);
        text.push('\n');
        for (k, t) in out.traces.iter().enumerate() {
            for (j, (arc, (eig, real))) in t.arc_params.iter().zip(t.min_eigenvalues.iter().zip(&t.real)).enumerate() {
                text.push_str(&format!("{k},{},{j},{arc:.6e},{eig:.6e},{real}\n", t.through_node));
            }
        }
        write_text(path, &text)?;
        outputs.push(path_str(path));
    }
    emit(&out, a.out.as_ref(), &mut outputs)?;
    let positive = out.traces.iter().all(|t| t.min_eigenvalues.iter().all(|&e| e > 0.0));
    validate(positive, "real_metric_positive", json!({ "min": out.traces.iter().map(|t| t.min_eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)).collect::<Vec<_>>() }))?;
    let all_real = out.traces.iter().all(|t| t.real.iter().all(|&r| r));
    validate(all_real, "real_states", json!({ "real": out.traces.iter().map(|t| t.real.clone()).collect::<Vec<_>>() }))?;
    if let Some(e) = &out.ew {
        validate(e.gamma_imag < 1e-6 && e.form_imag < 1e-6, "real_connection_imaginary", json!({ "gamma": e.gamma_imag, "form": e.form_imag }))?;
    }
    let n_states: usize = out.traces.iter().map(|t| t.trace.states.len()).sum();
    Ok(Outcome {
        summary: format!("real member m={}, eigenvalues {:.3} {:.3} {:.3}, {} traces / {n_states} states real", a.m, out.eigenvalues[0], out.eigenvalues[1], out.eigenvalues[2], out.traces.len()),
        inputs: vec![],
        outputs,
        seed: Some(a.seed),
    })
}

pub fn render(a: &RenderArgs) -> CliResult<Outcome> {
    let v: serde_json::Value = read_json(&a.trace)?;
    let v = match v {
        serde_json::Value::Array(items) => items.into_iter().nth(a.index).ok_or_else(|| Failure::Usage(format!("no trace with index {}", a.index)))?,
        other => other,
    };
    let tr: TraceResult = serde_json::from_value(v).map_err(|e| Failure::Usage(format!("{}: {e}", a.trace.display())))?;
    if a.u_chart > 1 || a.v_chart > 1 {
        return Err(Failure::Usage("charts are 0 or 1".into()));
    }
    let chart = SvgChart { u_chart: a.u_chart, v_chart: a.v_chart, radius: a.radius, ..Default::default() };
    let svg = render_displacement_svg(&tr, &chart)?;
    let mut outputs = Vec::new();
    match &a.out {
        Some(p) => {
            write_text(p, &svg)?;
            outputs.push(path_str(p));
        }
        None => print!("{svg}"),
    }
    Ok(Outcome { summary: format!("{} states drawn", tr.states.len().min(chart.max_curves)), inputs: vec![path_str(&a.trace)], outputs, seed: None })
}
