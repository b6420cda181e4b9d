use mtl_core::binary_forms::{disc_quadratic, BinaryForm, ProjPoint, QuadraticClass};
use mtl_core::conformal::*;
use mtl_core::linalg::{self, c, CMat, C64, ONE, ZERO};
use mtl_core::nodal_curve::*;
use mtl_core::surface_config::*;
use mtl_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn member(m: usize, seed: u64) -> (PointConfig, ParamCurve) {
    let cfg = random_config(m, 1, seed).unwrap();
    let phi = (0..m).find_map(|omit| solve_member(&cfg, omit, 1e-2).ok()).unwrap();
    (cfg, phi)
}

fn rc(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_tangent(basis: &[TangentVector], rng: &mut ChaCha8Rng) -> TangentVector {
    let w: Vec<C64> = (0..3).map(|_| rc(rng)).collect();
    combine(basis, &w)
}

fn rel(f: &BinaryForm, scale: f64) -> f64 {
    f.max_abs() / scale
}

#[test]
fn gauge_directions_have_zero_normal_form() {
    let (_, phi) = member(2, 0);
    let layout = StateLayout::for_curve(&phi);
    let x = layout.pack_curve(&phi);
    let g = gauge_basis(&layout, &x);
    let typical = tangent_basis(&phi).unwrap()[0].normal_form.max_abs();
    for k in 0..GAUGE_DIM {
        let d = Delta::from_state(&layout, &g.column(k).into_owned());
        assert!(rel(&normal_component(&phi, &d), typical) < 1e-12, "gauge column {k}");
        let q = theta_of(&phi, &d).unwrap();
        assert!(q.a.norm() + q.b.norm() + q.c.norm() < 1e-10);
    }
    // pure scaling of U
    let d = Delta { u: phi.u.clone(), v: [BinaryForm::zero(2), BinaryForm::zero(2)] };
    assert_eq!(normal_component(&phi, &d).max_abs(), 0.0);
}

#[test]
fn tangent_normal_form_vanishes_at_base_preimages() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, phi) = member(2, 1);
    let basis = tangent_basis(&phi).unwrap();
    let t = random_tangent(&basis, &mut rng);
    assert_eq!(t.normal_form.degree(), 6);
    let scale = t.normal_form.max_abs();
    for z in &phi.base_preimages {
        assert!(t.normal_form.eval(&z.normalized()).norm() < 1e-9 * scale);
    }
}

#[test]
fn tangent_basis_gives_independent_quadratics() {
    for m in 2..=4 {
        let (_, phi) = member(m, 2);
        let basis = tangent_basis(&phi).unwrap();
        let mat = CMat::from_fn(3, 3, |i, j| [basis[i].theta.a, basis[i].theta.b, basis[i].theta.c][j]);
        assert_eq!(linalg::numeric_rank(&mat, 1e-8), 3, "m={m}");
    }
}

#[test]
fn non_tangent_variation_is_rejected() {
    let (_, phi) = member(2, 3);
    let mut d = Delta::zero(&phi);
    d.v[1] = BinaryForm::monomial(2, 0);
    assert!(matches!(theta_of(&phi, &d), Err(Error::DivisionResidualTooLarge { .. })));
}

#[test]
fn curves_through_an_extra_point_have_theta_vanishing_there() {
    // independent route: the incidence system with one extra tracked point
    let (cfg, phi) = member(3, 4);
    let zp = ProjPoint::affine(c(0.37, -0.21));
    let p = phi.eval(&zp);
    let mut layout = StateLayout::for_curve(&phi);
    let j = layout.push_param(zp.chart());
    let mut params = phi.base_preimages.clone();
    params.push(zp);
    let x = layout.pack(&phi.u, &phi.v, &params);
    let mut pairs: Vec<(usize, SurfacePoint)> = cfg.points.iter().copied().enumerate().collect();
    pairs.push((j, p));
    let (res, jac) = incidence_system(&layout, &x, &pairs);
    assert!(res.norm() < 1e-9);
    let gauge = gauge_basis(&layout, &x);
    let t = tangent_space(&jac, &gauge);
    assert_eq!(t.ncols(), 2);
    for k in 0..2 {
        let tv = tangent_vector(&phi, &Delta::from_state(&layout, &t.column(k).into_owned())).unwrap();
        let th = tv.theta.to_form();
        assert!(th.eval(&zp.normalized()).norm() < 1e-8 * th.norm());
    }
}

#[test]
fn abc_gram_is_the_discriminant_polarization() {
    let g = abc_gram();
    let expect = [[0.0, 0.0, -2.0], [0.0, 1.0, 0.0], [-2.0, 0.0, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(g[i][j], c(expect[i][j], 0.0));
        }
    }
    assert_eq!(disc_quadratic(&QuadraticClass::new(ZERO, ONE, ZERO)), ONE);
    assert_eq!(disc_quadratic(&QuadraticClass::new(ONE, ZERO, ZERO)), ZERO);
}

#[test]
fn metric_is_symmetric_and_nondegenerate() {
    for m in 2..=4 {
        for seed in 0..3 {
            let (_, phi) = member(m, seed);
            let metric = metric_at(&phi).unwrap();
            let g = gram_matrix(&metric.gram);
            assert!((&g - g.transpose()).norm() < 1e-14 * g.norm());
            assert_eq!(linalg::numeric_rank(&g, 1e-9), 3);
            // Q(v) = g(v, v) on random combinations
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<C64> = (0..3).map(|_| rc(&mut rng)).collect();
            let q = disc_quadratic(&combine(&metric.basis, &w).theta);
            let wv = linalg::CVec::from_vec(w);
            let qq = (wv.transpose() * &g * &wv)[(0, 0)];
            assert!((q - qq).norm() < 1e-10 * q.norm().max(1e-30));
        }
    }
}

#[test]
fn null_plane_maps_to_the_image_of_its_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (_, phi) = member(2, 5);
    let basis = tangent_basis(&phi).unwrap();
    for _ in 0..20 {
        let z = ProjPoint::affine(rc(&mut rng) * 2.0);
        let plane = null_plane_at(&basis, &z).unwrap();
        let (p, kind) = null_plane_to_point(&phi, &plane).unwrap();
        assert_eq!(kind, PointKind::Smooth);
        assert!(p.dist(&phi.eval(&z)) < 1e-8);
        // double application: the plane of p is the input span
        let back = point_to_plane(&phi, &basis, &p).unwrap();
        for v in &plane.span {
            let th = v.theta.to_form();
            let a = CMat::from_fn(3, 3, |i, j| {
                let f = match j {
                    0 => back.span[0].theta.to_form(),
                    1 => back.span[1].theta.to_form(),
                    _ => th.clone(),
                };
                f.coeffs()[i]
            });
            assert_eq!(linalg::numeric_rank(&a, 1e-8), 2);
        }
    }
}

#[test]
fn node_preimage_gives_branch_flag() {
    let (_, phi) = member(3, 6);
    let basis = tangent_basis(&phi).unwrap();
    let (s, t) = phi.node_pairs[1];
    let node = phi.eval(&s);
    for (b, z) in [s, t].iter().enumerate() {
        let plane = null_plane_at(&basis, z).unwrap();
        let (p, kind) = null_plane_to_point(&phi, &plane).unwrap();
        assert_eq!(kind, PointKind::Branch { node: 1, branch: b });
        assert!(p.dist(&node) < 1e-8);
    }
}

#[test]
fn non_null_plane_has_no_common_root() {
    let (_, phi) = member(2, 7);
    let basis = tangent_basis(&phi).unwrap();
    let plane = NullPlane { span: [basis[0].clone(), basis[1].clone()], witness_root: ProjPoint::zero() };
    assert!(matches!(null_plane_to_point(&phi, &plane), Err(Error::NoCommonRoot)));
}

#[test]
fn two_null_planes_meet_in_a_non_null_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (_, phi) = member(3, 8);
    let basis = tangent_basis(&phi).unwrap();
    for _ in 0..10 {
        let (z1, z2) = (ProjPoint::affine(rc(&mut rng)), ProjPoint::affine(rc(&mut rng)));
        let row = CMat::from_fn(2, 3, |i, k| basis[k].theta.to_form().eval(&[z1, z2][i]));
        let line = linalg::nullspace(&row, 1e-12);
        assert_eq!(line.ncols(), 1);
        let th = combine(&basis, line.column(0).as_slice()).theta;
        let scale = th.a.norm() + th.b.norm() + th.c.norm();
        assert!(disc_quadratic(&th).norm() > 1e-6 * scale * scale);
    }
}

#[test]
fn vc_model_space_has_dimension_three_and_node_factor() {
    let (_, phi) = member(3, 9);
    let space = vc_oracle(&phi);
    assert_eq!(space.len(), 3);
    let mat = CMat::from_fn(7, 3, |i, j| space[j].coeffs()[i]);
    assert_eq!(linalg::numeric_rank(&mat, 1e-10), 3);
    for s in &space {
        assert_eq!(s.degree(), 6);
        for z in phi.node_preimages() {
            assert!(s.eval(&z.normalized()).norm() < 1e-10 * s.norm());
        }
    }
}

#[test]
fn map_model_matches_implicit_model_up_to_one_scalar() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for m in 2..=3 {
        for seed in 0..3 {
            let (_, phi) = member(m, seed);
            let basis = tangent_basis(&phi).unwrap();
            let vecs: Vec<TangentVector> = (0..4).map(|_| random_tangent(&basis, &mut rng)).collect();
            let (lambda, res) = vc_agreement(&phi, &vecs).unwrap();
            assert!(lambda.norm() > 0.0);
            assert!(res < 1e-7, "m={m} seed={seed} residual {res:.2e}");
        }
    }
}

#[test]
fn null_cone_is_independent_of_the_pinning() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (_, phi) = member(3, 11);
    let basis = tangent_basis(&phi).unwrap();
    let vecs: Vec<TangentVector> = (0..5).map(|_| random_tangent(&basis, &mut rng)).collect();
    for pins in [[0, 1, 2], [3, 5, 1], [4, 0, 2]] {
        let z = |i: usize| phi.base_preimages[pins[i]];
        let g = pinning_map(&z(0), &z(1), &z(2));
        let adj = [[g[1][1], -g[0][1]], [-g[1][0], g[0][0]]];
        let pinned = phi.pinned(pins);
        let comp = |f: &BinaryForm| f.compose_linear(&adj);
        let su = linalg::fit_scalar(pinned.u[0].coeffs(), comp(&phi.u[0]).coeffs()).0;
        let sv = linalg::fit_scalar(pinned.v[0].coeffs(), comp(&phi.v[0]).coeffs()).0;
        let mut ratio = None;
        for t in &vecs {
            let d = Delta {
                u: [comp(&t.delta.u[0]).scaled(su), comp(&t.delta.u[1]).scaled(su)],
                v: [comp(&t.delta.v[0]).scaled(sv), comp(&t.delta.v[1]).scaled(sv)],
            };
            let q_new = disc_quadratic(&theta_of(&pinned, &d).unwrap());
            let r = q_new / disc_quadratic(&t.theta);
            match ratio {
                None => ratio = Some(r),
                Some(r0) => assert!((r - r0).norm() < 1e-7 * r0.norm(), "pins {pins:?}"),
            }
        }
    }
}
