//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output.

use std::time::Instant;

use mtl_core::binary_forms::ProjPoint;
use mtl_core::conformal::*;
use mtl_core::geodesic_trace::*;
use mtl_core::linalg::{c, C64, ONE, ZERO};
use mtl_core::nodal_curve::*;
use mtl_core::picard_lattice::*;
use mtl_core::real_slice::*;
use mtl_core::surface_config::*;
use mtl_core::weyl_fit::*;
use mtl_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn member(m: usize, seed: u64) -> (PointConfig, ParamCurve) {
    let cfg = random_config(m, 1, seed).unwrap();
    let phi = (0..m).find_map(|omit| solve_member(&cfg, omit, 1e-2).ok()).unwrap();
    (cfg, phi)
}

fn on_curve(phi: &ParamCurve, z: (f64, f64)) -> SurfacePoint {
    phi.eval(&ProjPoint::affine(c(z.0, z.1)))
}

fn rc(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// k indices spread evenly over 0..n.
fn spread(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| i * (n - 1) / (k - 1).max(1)).collect()
}

fn lattice_identities() -> Outcome {
    let mut bad = Vec::new();
    for m in 2..=6i64 {
        let cl = DivisorClass::family(m);
        let c2 = cl.self_intersection();
        let delta = adjunction_nodes(&cl).unwrap();
        let sev = severi_dimension(c2, delta).dimension;
        let sys = system_dimension(c2, delta).unwrap();
        let minimal = minimality_report(cl.context(), &cl).numerically_minimal;
        if !(c2 == 2 * m && delta == m - 1 && sev == 3 && sys == m + 2 && minimal) {
            bad.push(format!("m={m}: C²={c2} δ={delta} sev={sev} dim|C|={sys} minimal={minimal}"));
        }
    }
    (bad.is_empty(), if bad.is_empty() { "m=2..6 exact".into() } else { bad.join("; ") })
}

fn severi_rank() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for m in [2usize, 3] {
        let (cfg, phi) = member(m, 0);
        let (p, q) = (on_curve(&phi, (0.3, 0.2)), on_curve(&phi, (-0.5, 0.4)));
        let tr = trace_geodesic(&phi, &cfg.points, &p, &q, &TraceOptions { steps: 200, ..Default::default() }).unwrap();
        let steps = tr.states.len() - 1;
        let nodes_kept = tr.states.iter().all(|s| s.node_pairs.len() + 1 == m) && tr.diagnostics.iter().all(|d| d.node_count + 1 == m);
        let nullities: Vec<usize> = spread(tr.states.len(), 10)
            .into_iter()
            .map(|k| nullity_mod_gauge(&constraint_jacobian(&tr.states[k], &cfg.points).0, 1e-9))
            .collect();
        let pass = steps >= 200 && nodes_kept && nullities.iter().all(|&n| n == 3);
        ok &= pass;
        notes.push(format!("m={m}: {steps} steps, nodes kept {nodes_kept}, nullities {nullities:?}"));
    }
    (ok, notes.join("; "))
}

fn tangent_models() -> Outcome {
    let (cfg, phi) = member(3, 1);
    let (p, q) = (on_curve(&phi, (0.1, 0.1)), on_curve(&phi, (-0.4, 0.3)));
    let tr = trace_geodesic(&phi, &cfg.points, &p, &q, &TraceOptions { steps: 40, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for k in spread(tr.states.len(), 5) {
        let state = &tr.states[k];
        let basis = tangent_basis(state).unwrap();
        let vecs: Vec<TangentVector> = (0..20).map(|_| combine(&basis, &[rc(&mut rng), rc(&mut rng), rc(&mut rng)])).collect();
        let (_, res) = vc_agreement(state, &vecs).unwrap();
        worst = worst.max(res);
    }
    (worst < 1e-7, format!("max relative residual {worst:.2e} over 5 states × 20 vectors"))
}

fn null_structure() -> Outcome {
    let g = abc_gram();
    let want = [[0.0, 0.0, -2.0], [0.0, 1.0, 0.0], [-2.0, 0.0, 0.0]];
    let exact = (0..3).all(|i| (0..3).all(|j| g[i][j] == c(want[i][j], 0.0)));
    let (cfg, phi) = member(2, 5);
    let basis = tangent_basis(&phi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut round = 0.0f64;
    for _ in 0..20 {
        let p = phi.eval(&ProjPoint::affine(rc(&mut rng) * 2.0));
        let plane = point_to_plane(&phi, &basis, &p).unwrap();
        let (back, _) = null_plane_to_point(&phi, &plane).unwrap();
        round = round.max(back.dist(&p));
    }
    let s = trace_null_surface(&phi, &cfg.points, &on_curve(&phi, (0.4, -0.1)), 5, 0.03).unwrap();
    let deg = s.degeneracy.iter().cloned().fold(0.0, f64::max);
    (
        exact && round < 1e-8 && s.states.len() == 25 && deg < 1e-6,
        format!("gram exact {exact}; round trip {round:.1e} on 20 samples; W_p degeneracy {deg:.1e} on {} states", s.states.len()),
    )
}

fn branch_combinatorics() -> Outcome {
    let (cfg, phi) = member(3, 0);
    let nodes = phi.node_images();
    let generic = (on_curve(&phi, (0.3, 0.2)), on_curve(&phi, (-0.5, 0.4)));
    let mut ok = true;
    let mut notes = Vec::new();
    for ((p, q), expected) in [(generic, 1), ((nodes[0], generic.1), 2), ((nodes[0], nodes[1]), 4)] {
        let seeds = branch_enumerate(&phi, &p, &q);
        let lens: Vec<usize> = seeds.iter().map(|s| trace_seed(&phi, &cfg.points, &p, &q, s, &TraceOptions::default()).map(|r| r.states.len() - 1).unwrap_or(0)).collect();
        ok &= seeds.len() == expected && lens.iter().all(|&l| l >= 20);
        notes.push(format!("{} seeds (want {expected}), steps {lens:?}", seeds.len()));
    }
    (ok, notes.join("; "))
}

fn max_gap(a: &[Poly3], b: &[Poly3]) -> f64 {
    let mut gap = 0.0f64;
    for (p, q) in a.iter().zip(b) {
        for (x, y) in p.coeffs.iter().zip(&q.coeffs) {
            gap = gap.max((x - y).norm());
        }
    }
    gap
}

fn poly(degree: usize, terms: &[([usize; 3], C64)]) -> Poly3 {
    let mut p = Poly3::zero(degree, 1.0);
    for (e, v) in terms {
        let k = p.exps.iter().position(|x| x == e).unwrap();
        p.coeffs[k] = *v;
    }
    p
}

fn einstein_weyl() -> Outcome {
    let cfg = random_config(2, 1, 0).unwrap();
    let phi = generic_member(&cfg).unwrap();
    let chart = build_chart(&phi, &cfg.points).unwrap();
    let runs = refine(&chart, &EwOptions::default(), 3).unwrap();
    let geo = runs.iter().map(|r| r.report.geodesic_fit_residual).fold(0.0, f64::max);
    let compat = runs.iter().map(|r| r.report.compat_residual).fold(0.0, f64::max);
    let tf: Vec<f64> = runs.iter().map(|r| r.report.residual_tracefree).collect();
    let decreasing = tf.windows(2).all(|w| w[1] < w[0]);
    let pipeline = geo < 1e-3 && compat < 1e-10 && tf.iter().all(|&t| t < 5e-2) && decreasing;

    let delta = |i: usize, j: usize| if i == j { ONE } else { ZERO };
    let flat = SurrogateModel::new(SymPoly::from_fn(|i, j| Poly3::constant(delta(i, j))), [Poly3::constant(ZERO), Poly3::constant(ZERO), Poly3::constant(ZERO)], 1.0);
    let (a_flat, _) = fit_weyl_form(&flat.g, &synthetic_geodesics(&flat, 0.1, 30, 11, 0), 2, 0.1).unwrap();
    let flat_gap = a_flat.iter().flat_map(|p| p.coeffs.iter()).map(|v| v.norm()).fold(0.0, f64::max);

    let g_true = SymPoly::from_fn(|i, j| {
        poly(2, &[([0, 0, 0], delta(i, j)), ([1, 0, 0], c(0.1 * (i + j) as f64, 0.05)), ([0, 0, 1], c(0.0, 0.07 * i as f64)), ([0, 1, 1], c(0.04, -0.02 * j as f64))])
    });
    let a_true = [
        poly(1, &[([0, 0, 0], c(0.3, 0.1)), ([0, 1, 0], c(0.5, 0.0))]),
        poly(1, &[([1, 0, 0], c(-0.2, 0.3))]),
        poly(1, &[([0, 0, 0], c(0.4, 0.0)), ([0, 0, 1], c(0.2, -0.1))]),
    ];
    let truth = SurrogateModel::new(g_true.clone(), a_true.clone(), 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<(V3, M3)> = (0..300)
        .map(|_| {
            let x = ChartFrame::random_point(0.2, &mut rng);
            (x, truth.g.eval(&x))
        })
        .collect();
    let (g_fit, _) = fit_metric(&samples, 2, 1.0, 1e-6).unwrap();
    let (a_fit, _) = fit_weyl_form(&g_fit, &synthetic_geodesics(&truth, 0.2, 40, 11, 6), 1, 1.0).unwrap();
    let (g_gap, a_gap) = (max_gap(&g_fit.entries, &g_true.entries), max_gap(&a_fit, &a_true));
    let controls = flat_gap < 1e-3 && g_gap < 1e-3 && a_gap < 1e-3;
    (
        pipeline && controls,
        format!(
            "geodesic fit ≤ {geo:.1e}, compat ≤ {compat:.1e}, tracefree {} (decreasing {decreasing}); controls: flat a {flat_gap:.1e}, synthetic g {g_gap:.1e}, a {a_gap:.1e}",
            tf.iter().map(|t| format!("{t:.1e}")).collect::<Vec<_>>().join(" → ")
        ),
    )
}

fn real_slice() -> Outcome {
    let mem = match construct_real_member(2, 0) {
        Ok(m) => m,
        Err(e) => return (false, format!("no real member: {e}")),
    };
    let conditions = mem.report.passes();
    let p = mem.curve.eval(&ProjPoint::affine(c(0.3, 0.2)));
    let generic = real_geodesic(&mem, &p, &TraceOptions { steps: 20, ..Default::default() }).unwrap();
    let node = real_geodesic(&mem, &mem.curve.node_images()[0], &TraceOptions { steps: 10, ..Default::default() }).unwrap();
    let eig_states = spread(generic.states.len(), 10);
    let min_eig = eig_states
        .iter()
        .map(|&k| real_metric_of(&generic.states[k], &mem.structure).map(|g| g.eigenvalues[0]).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::INFINITY, f64::min);
    let all_fixed = generic.states.iter().chain(&node.states).all(|s| reality_check(s, &mem.structure).passes());
    let completed = generic.stop == StopReason::Completed && node.stop == StopReason::Completed;
    let chart = real_chart(&mem).unwrap();
    let run = real_ew_check(&chart, &mem.structure, &EwOptions { radius: 0.01, samples: 300, geodesics: 20, ..Default::default() }).unwrap();
    let imag = run.gamma_imag.max(run.form_imag);
    (
        conditions && min_eig > 0.0 && all_fixed && completed && imag < 1e-6,
        format!(
            "conditions {:?}; min eigenvalue {min_eig:.3} over {} states; {} + {} real geodesic states σ-fixed {all_fixed}; Im Γ {:.1e}, Im a {:.1e}",
            mem.report.conditions,
            eig_states.len(),
            generic.states.len(),
            node.states.len(),
            run.gamma_imag,
            run.form_imag
        ),
    )
}

fn negative_controls() -> Outcome {
    let vals = [ProjPoint::affine(c(0.0, 0.0)), ProjPoint::affine(c(1.0, 0.0)), ProjPoint::infinity()];
    let subsets = [vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]];
    let rejected = subsets.iter().all(|i| !condition_star_check(3, i, &vals, &vals) && matches!(cstar_config(3, i, &vals, &vals, c(2.0, 0.0)), Err(Error::ConditionStarViolated)));
    let idle = DivisorClass::new(2, 2, vec![1, 1, 1, 1, 0]);
    let idle_flagged = !minimality_report(idle.context(), &idle).numerically_minimal;
    let a = [ProjPoint::affine(c(0.0, 0.0)), ProjPoint::affine(c(1.0, 0.0))];
    let b = [ProjPoint::affine(c(2.0, 0.0)), ProjPoint::affine(c(0.0, 0.0))];
    let cfg = cstar_config(2, &[0], &a, &b, c(0.7, 0.4)).unwrap();
    let phi = (0..2).find_map(|omit| solve_member(&cfg, omit, 1e-2).ok()).unwrap();
    let p = SurfacePoint::affine(c(0.0, 0.0), c(0.5, 0.0));
    let q = SurfacePoint::affine(c(0.0, 0.0), c(2.0, 0.0));
    let probe = empty_locus_probe(&phi, &cfg.points, &p, &q, 50, 7).unwrap();
    (
        rejected && idle_flagged && probe.converged_pq == 0 && probe.starts == 50,
        format!("condition (*) rejected {rejected}; idle point non-minimal {idle_flagged}; probe {}/{} convergences", probe.converged_pq, probe.starts),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("lattice identities", lattice_identities),
        ("Severi manifold rank", severi_rank),
        ("tangent-model equivalence", tangent_models),
        ("null structure", null_structure),
        ("branch combinatorics", branch_combinatorics),
        ("Einstein-Weyl verification", einstein_weyl),
        ("real slice", real_slice),
        ("negative controls", negative_controls),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match std::panic::catch_unwind(f) {
            Ok(r) => r,
            Err(_) => (false, "panicked".into()),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {}. {name} ({:.1} s): {detail}", if ok { "PASS" } else { "FAIL" }, k + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
