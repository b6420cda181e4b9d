use mtl_core::binary_forms::{disc_quadratic, BinaryForm, ProjPoint, QuadraticClass};
use mtl_core::conformal::polarization;
use mtl_core::geodesic_trace::{IncidenceConstraint, StopReason, TraceOptions};
use mtl_core::linalg::{c, C64};
use mtl_core::nodal_curve::{node_pairs, solve_member, ParamCurve};
use mtl_core::real_slice::*;
use mtl_core::surface_config::random_config;
use mtl_core::weyl_fit::EwOptions;
use mtl_core::Error;
use proptest::prelude::*;

fn member() -> RealMember {
    construct_real_member(2, 0).unwrap()
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() < tol
}

#[test]
fn unit_x1_is_the_middle_coefficient() {
    let data = model_data(0.3);
    let e = C64::from_polar(1.0, 0.3);
    let q = from_real_coordinates(&[1.0, 0.0, 0.0], &data);
    assert!(close(q.a, c(0.0, 0.0), 1e-15) && close(q.b, e, 1e-15) && close(q.c, c(0.0, 0.0), 1e-15));
    assert!(close(disc_quadratic(&q), e * e, 1e-14));
}

#[test]
fn unit_x2_splits_between_a_and_c() {
    let data = model_data(-1.1);
    let e = C64::from_polar(1.0, -1.1);
    let q = from_real_coordinates(&[0.0, 1.0, 0.0], &data);
    assert!(close(q.a, e / 2.0, 1e-15) && close(q.b, c(0.0, 0.0), 1e-15) && close(q.c, -e / 2.0, 1e-15));
    assert!(close(disc_quadratic(&q), e * e, 1e-14));
}

#[test]
fn real_coordinates_are_orthonormal_for_the_discriminant() {
    let data = model_data(0.7);
    let e2 = C64::from_polar(1.0, 1.4);
    let basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|x| from_real_coordinates(&x, &data));
    for i in 0..3 {
        for j in 0..3 {
            let g = polarization(&basis[i], &basis[j]) / e2;
            let want = if i == j { 1.0 } else { 0.0 };
            assert!(close(g, c(want, 0.0), 1e-14), "{i}{j} {g}");
        }
    }
}

#[test]
fn off_slice_class_is_rejected() {
    let data = model_data(0.0);
    let q = QuadraticClass::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
    assert!(matches!(real_coordinates(&q, &data), Err(Error::NotInRealSubspace(_))));
}

proptest! {
    #[test]
    fn real_coordinates_round_trip(x in prop::array::uniform3(-3.0f64..3.0), th in -3.0f64..3.0) {
        let data = model_data(th);
        let q = from_real_coordinates(&x, &data);
        let y = real_coordinates(&q, &data).unwrap();
        for i in 0..3 {
            prop_assert!((x[i] - y[i]).abs() < 1e-10 * (1.0 + x[i].abs()));
        }
        let n2: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((disc_quadratic(&q) - C64::from_polar(n2, 2.0 * th)).norm() < 1e-10 * (1.0 + n2));
    }

    #[test]
    fn sigma_on_quadratics_is_an_antilinear_involution(a in prop::array::uniform6(-2.0f64..2.0), th in -3.0f64..3.0, s in -2.0f64..2.0) {
        let data = model_data(th);
        let q = QuadraticClass::new(c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]));
        let back = sigma_quadratic(&sigma_quadratic(&q, &data), &data);
        prop_assert!((back.a - q.a).norm() + (back.b - q.b).norm() + (back.c - q.c).norm() < 1e-12);
        let w = c(0.3, s);
        let sq = sigma_quadratic(&QuadraticClass::new(q.a * w, q.b * w, q.c * w), &data);
        let qs = sigma_quadratic(&q, &data);
        prop_assert!((sq.b - qs.b * w.conj()).norm() < 1e-12);
    }

    #[test]
    fn conjugate_pair_squares_to_a_sign(coeffs in prop::collection::vec(-1.0f64..1.0, 8), d in 1usize..4) {
        let f = [0, 1].map(|k| BinaryForm::new((0..=d).map(|j| c(coeffs[(2 * j + k) % 8], coeffs[(2 * j + k + 3) % 8])).collect()));
        for factor in [FactorReal::Standard, FactorReal::Antipodal] {
            let g = factor.conjugate_pair(&factor.conjugate_pair(&f));
            let sign = if factor.admits_degree(d) { 1.0 } else { -1.0 };
            for k in 0..2 {
                prop_assert!(g[k].sub(&f[k].scaled(c(sign, 0.0))).max_abs() < 1e-14);
            }
        }
    }
}

#[test]
fn real_member_passes_the_reality_check() {
    let mem = member();
    assert!(mem.report.invariant);
    assert_eq!(mem.report.conditions, [true, true, true]);
    let again = reality_check(&mem.curve, &mem.structure);
    assert!(again.passes());
    assert_eq!(mem.curve.node_pairs.len(), 1);
}

#[test]
fn m2_node_is_the_only_real_point() {
    let mem = member();
    let node = mem.curve.node_images()[0];
    assert!(mem.structure.apply(&node).dist(&node) < 1e-12);
    assert!(mem.report.min_real_gap > 1e-3);
}

#[test]
fn h_has_unit_modulus_and_agrees_across_components() {
    let mem = member();
    assert!((mem.data.h.norm() - 1.0).abs() < 1e-12);
    assert!(mem.data.kappa_spread < 1e-9, "{:e}", mem.data.kappa_spread);
    let e2 = C64::from_polar(1.0, 2.0 * mem.data.theta_phase);
    assert!(close(e2, mem.data.h, 1e-12));
}

#[test]
fn node_preimages_are_antipodal() {
    let mem = member();
    assert!(mem.data.pairing_residual < 1e-9);
    for (s, t) in &mem.curve.node_pairs {
        assert!(t.dist(&s.antipode()) < 1e-9);
    }
}

#[test]
fn node_product_satisfies_the_functional_equation() {
    for m in [2usize, 4] {
        let mem = construct_real_member(m, 1).unwrap();
        let f = node_product(&mem.data);
        let sign = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
        assert!(f.antipodal_conjugate().sub(&f.scaled(c(sign, 0.0))).max_abs() < 1e-12 * f.max_abs());
    }
}

#[test]
fn m4_real_member_exists() {
    let mem = construct_real_member(4, 0).unwrap();
    assert_eq!(mem.curve.node_pairs.len(), 3);
    assert!(mem.report.passes());
    assert_eq!(mem.config.points.len(), 8);
}

#[test]
fn odd_index_has_no_real_structure_with_real_nodes() {
    assert!(matches!(construct_real_member(3, 0), Err(Error::HypothesisViolation(_))));
    assert!(!FactorReal::Standard.admits_degree(3));
}

#[test]
fn configuration_consists_of_conjugate_pairs() {
    let mem = member();
    let pts = &mem.config.points;
    for j in 0..pts.len() / 2 {
        assert!(mem.structure.apply(&pts[2 * j]).dist(&pts[2 * j + 1]) < 1e-10);
    }
}

#[test]
fn complex_member_is_not_invariant() {
    let cfg = random_config(2, 1, 0).unwrap();
    let phi = (0..2).find_map(|omit| solve_member(&cfg, omit, 1e-2).ok()).unwrap();
    let report = reality_check(&phi, &RealStructure::standard());
    assert!(!report.invariant);
    assert!(!report.passes());
}

#[test]
fn curve_with_a_real_circle_fails_condition_3() {
    // real coefficients: σφ(z) = φ(z̄), so the real circle of the source maps to real points
    let u = [BinaryForm::from_real(&[1.0, 0.3, -0.7]), BinaryForm::from_real(&[0.2, -1.0, 0.5])];
    let v = [BinaryForm::from_real(&[0.4, 0.9, 0.1]), BinaryForm::from_real(&[-0.6, 0.2, 1.0])];
    let node_pairs = node_pairs(&u, &v).unwrap();
    let curve = ParamCurve { u, v, base_preimages: Vec::new(), node_pairs };
    let report = reality_check(&curve, &RealStructure::standard());
    assert!(report.invariant);
    assert!(!report.conditions[2]);
    assert!(report.min_real_gap < 1e-6);
}

#[test]
fn real_metric_is_positive_definite() {
    let mem = member();
    let g = real_metric_at(&mem.curve, &mem.data).unwrap();
    assert!(g.eigenvalues.iter().all(|&l| l > 0.0));
    assert!(g.imag_residual < 1e-10);
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g.gram[i][j] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn complex_member_has_no_real_metric() {
    let cfg = random_config(2, 1, 0).unwrap();
    let phi = (0..2).find_map(|omit| solve_member(&cfg, omit, 1e-2).ok()).unwrap();
    assert!(real_metric_of(&phi, &RealStructure::standard()).is_err());
    let mem = member();
    assert!(real_metric_at(&phi, &mem.data).is_err());
}

fn generic_point(mem: &RealMember) -> mtl_core::surface_config::SurfacePoint {
    mem.curve.eval(&ProjPoint::affine(c(0.3, 0.2)))
}

#[test]
fn real_geodesic_through_a_conjugate_pair() {
    let mem = member();
    let p = generic_point(&mem);
    let sp = mem.structure.apply(&p);
    let tr = real_geodesic(&mem, &p, &TraceOptions { steps: 15, ..Default::default() }).unwrap();
    assert_eq!(tr.stop, StopReason::Completed);
    assert_eq!(tr.states.len(), 16);
    for (state, tracked) in tr.states.iter().zip(&tr.tracked) {
        assert!(state.eval(&tracked[0]).dist(&p) < 1e-9);
        assert!(state.eval(&tracked[1]).dist(&sp) < 1e-9);
        assert!(reality_check(state, &mem.structure).passes());
        let g = real_metric_of(state, &mem.structure).unwrap();
        assert!(g.eigenvalues[0] > 0.0);
    }
    assert!(tr.arc_params.last().unwrap() > &0.1);
}

#[test]
fn real_geodesic_through_the_node() {
    let mem = member();
    let node = mem.curve.node_images()[0];
    let tr = real_geodesic(&mem, &node, &TraceOptions { steps: 10, ..Default::default() }).unwrap();
    assert!(matches!(tr.constraints[0], IncidenceConstraint::NodeAt { .. }));
    assert_eq!(tr.stop, StopReason::Completed);
    for state in &tr.states {
        let images = state.node_images();
        assert!(images.iter().any(|q| q.dist(&node) < 1e-9));
        assert!(reality_check(state, &mem.structure).passes());
    }
}

#[test]
fn off_curve_point_has_no_real_geodesic() {
    let mem = member();
    let p = mtl_core::surface_config::SurfacePoint::affine(c(7.0, 3.0), c(-5.0, 2.0));
    assert!(real_geodesic(&mem, &p, &TraceOptions::default()).is_err());
}

#[test]
fn real_chart_is_orthonormal_and_real() {
    let mem = member();
    let chart = real_chart(&mem).unwrap();
    let g0 = base_metric(&chart).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!(close(g0[i][j], c(want, 0.0), 1e-10));
        }
    }
    let g = chart.metric(&[c(0.01, 0.0), c(-0.004, 0.0), c(0.006, 0.0)]).unwrap();
    for row in g {
        for v in row {
            assert!(v.im.abs() < 1e-12);
        }
    }
    let curve = chart.curve(&[c(0.01, 0.0), c(0.0, 0.0), c(-0.01, 0.0)]).unwrap();
    assert!(reality_check(&curve, &mem.structure).passes());
}

#[test]
fn real_slice_connection_is_real() {
    let mem = member();
    let chart = real_chart(&mem).unwrap();
    let opts = EwOptions { radius: 0.01, samples: 300, geodesics: 20, ..Default::default() };
    let run = real_ew_check(&chart, &mem.structure, &opts).unwrap();
    assert!(run.metric_imag < 1e-12);
    assert!(run.gamma_imag < 1e-6, "{:e}", run.gamma_imag);
    assert!(run.form_imag < 1e-6, "{:e}", run.form_imag);
    assert!(run.model.geodesic_fit_residual < 1e-6);
    assert!(run.report.compat_residual < 1e-10);
}
