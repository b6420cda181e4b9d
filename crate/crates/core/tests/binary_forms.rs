use mtl_core::binary_forms::*;
use mtl_core::linalg::{c, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(a: f64, b: f64) -> ProjPoint {
    ProjPoint::new(c(a, 0.0), c(b, 0.0))
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

#[test]
fn eval_monomials() {
    let z0sq = BinaryForm::from_real(&[1.0, 0.0, 0.0]);
    assert!(close(eval(&z0sq, &pt(1.0, 0.0)), c(1.0, 0.0), 1e-15));
    let z0z1 = BinaryForm::from_real(&[0.0, 1.0, 0.0]);
    assert!(close(eval(&z0z1, &pt(1.0, 1.0)), c(1.0, 0.0), 1e-15));
    let diff = BinaryForm::from_real(&[1.0, 0.0, -1.0]);
    assert!(close(eval(&diff, &pt(1.0, 1.0)), c(0.0, 0.0), 1e-15));
}

#[test]
fn from_roots_examples() {
    let f = from_roots(&[ProjPoint::infinity()]);
    // vanishes at (0,1): proportional to z0
    assert!(f.coeffs()[1].norm() < 1e-15 && f.coeffs()[0].norm() > 0.5);

    let f = from_roots(&[pt(1.0, 0.0), pt(1.0, 0.0).antipode()]);
    assert!(f.coeffs()[0].norm() < 1e-15 && f.coeffs()[2].norm() < 1e-15 && f.coeffs()[1].norm() > 0.5);

    let pts = [pt(1.0, 1.0), pt(1.0, -1.0)];
    let f = from_roots(&pts);
    for p in &pts {
        assert!(eval(&f, p).norm() < 1e-14);
    }
}

#[test]
fn discriminant_examples() {
    let q = |a: f64, b: f64, cc: f64| QuadraticClass::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0));
    assert_eq!(disc_quadratic(&q(0.0, 1.0, 0.0)), c(1.0, 0.0));
    assert_eq!(disc_quadratic(&q(1.0, 0.0, 0.0)), c(0.0, 0.0));
    assert_eq!(disc_quadratic(&q(1.0, 5.0, 6.0)), c(1.0, 0.0));
}

#[test]
fn roots_examples() {
    let r = roots(&BinaryForm::from_real(&[0.0, 1.0, 0.0]));
    assert_eq!(r.roots.len(), 2);
    assert!(r.roots.iter().all(|(_, m)| *m == 1));
    assert!(r.roots.iter().any(|(p, _)| p.proj_eq(&ProjPoint::infinity(), 1e-12)));
    assert!(r.roots.iter().any(|(p, _)| p.proj_eq(&ProjPoint::zero(), 1e-12)));

    let r = roots(&BinaryForm::from_real(&[1.0, 0.0, 0.0]));
    assert_eq!(r.roots.len(), 1);
    assert_eq!(r.roots[0].1, 2);
    assert!(r.roots[0].0.proj_eq(&ProjPoint::infinity(), 1e-12));
}

#[test]
fn divide_exact_examples() {
    let n = BinaryForm::from_real(&[0.0, 1.0, 0.0, 0.0]); // z0² z1
    let d = BinaryForm::from_real(&[1.0, 0.0]); // z0
    let q = divide_exact(&n, &d, 1e-12).unwrap();
    assert!(q.sub(&BinaryForm::from_real(&[0.0, 1.0, 0.0])).norm() < 1e-14);

    let n = BinaryForm::from_real(&[1.0, 0.0, 0.0]);
    let d = BinaryForm::from_real(&[0.0, 1.0]);
    assert!(matches!(divide_exact(&n, &d, 1e-9), Err(mtl_core::Error::DivisionResidualTooLarge { .. })));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in 2..6 {
        let f = random_form(&mut rng, 2 * m - 2);
        let theta = random_form(&mut rng, 2);
        let q = divide_exact(&f.mul(&theta), &f, 1e-10).unwrap();
        assert!(q.sub(&theta).norm() < 1e-10 * theta.norm());
    }
}

#[test]
fn wronskian_examples() {
    let z0 = BinaryForm::from_real(&[1.0, 0.0]);
    let z1 = BinaryForm::from_real(&[0.0, 1.0]);
    let w = wronskian(&z0, &z1);
    assert_eq!(w.degree(), 0);
    assert!(close(w.coeffs()[0], c(1.0, 0.0), 1e-15));

    let p = BinaryForm::from_real(&[1.0, 2.0, 3.0]);
    assert!(wronskian(&p, &p).norm() < 1e-14);

    // p = z0², q = z0 z1: affine p = 1, q = z, p q' − p' q = 1
    let w = wronskian(&BinaryForm::from_real(&[1.0, 0.0, 0.0]), &BinaryForm::from_real(&[0.0, 1.0, 0.0]));
    assert_eq!(w.degree(), 2);
    assert!(close(w.coeffs()[0], c(1.0, 0.0), 1e-15));
    assert!(w.coeffs()[1].norm() < 1e-15 && w.coeffs()[2].norm() < 1e-15);
}

#[test]
fn wronskian_matches_affine_oracle() {
    // independent oracle: expand p(1,z) q'(z) − p'(z) q(1,z) with plain polynomial arithmetic
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in 1..7 {
        let p = random_form(&mut rng, d);
        let q = random_form(&mut rng, d);
        let w = wronskian(&p, &q);
        let pc = p.coeffs();
        let qc = q.coeffs();
        let mut oracle = vec![c(0.0, 0.0); 2 * d];
        for i in 0..=d {
            for j in 1..=d {
                oracle[i + j - 1] += pc[i] * qc[j] * j as f64;
                oracle[i + j - 1] -= qc[i] * pc[j] * j as f64;
            }
        }
        assert!(oracle[2 * d - 1].norm() < 1e-12);
        for k in 0..=2 * d - 2 {
            assert!(close(w.coeffs()[k], oracle[k], 1e-12), "degree {d} index {k}");
        }
    }
}

#[test]
fn extended_precision_root_refinement() {
    let pts: Vec<ProjPoint> = (0..10).map(|i| ProjPoint::affine(c(0.3 * i as f64 - 1.2, 0.1))).collect();
    let f = from_roots(&pts);
    let opts = RootOptions { extended: true, ..RootOptions::default() };
    let r = roots_with(&f, opts);
    assert_eq!(r.roots.len(), 10);
    for p in &pts {
        assert!(r.roots.iter().any(|(q, _)| q.dist(p) < 1e-9));
    }
}

fn random_form(rng: &mut ChaCha8Rng, d: usize) -> BinaryForm {
    BinaryForm::new((0..=d).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
}

fn arb_point() -> impl Strategy<Value = ProjPoint> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(a, b, cc, d)| a.abs() + b.abs() + cc.abs() + d.abs() > 0.1)
        .prop_map(|(a, b, cc, d)| ProjPoint::new(c(a, b), c(cc, d)))
}

fn well_separated(pts: &[ProjPoint], sep: f64) -> bool {
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[i].dist(&pts[j]) < sep {
                return false;
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roots_round_trip(pts in proptest::collection::vec(arb_point(), 1..=12)) {
        prop_assume!(well_separated(&pts, 0.15));
        let f = from_roots(&pts);
        let r = roots(&f);
        let total: usize = r.roots.iter().map(|(_, m)| m).sum();
        prop_assert_eq!(total, pts.len());
        for p in &pts {
            let best = r.roots.iter().map(|(q, _)| q.dist(p)).fold(1.0, f64::min);
            prop_assert!(best < 1e-8, "distance {}", best);
        }
    }

    #[test]
    fn disc_zero_iff_double_root(p in arb_point(), q in arb_point(), s in -1.0f64..1.0) {
        let double = from_roots(&[p, p]).scaled(c(1.0 + s, 0.3));
        let qd = QuadraticClass::from_form(&double);
        prop_assert!(disc_quadratic(&qd).norm() < 1e-12 * qd.norm().powi(2));
        let r = roots(&double);
        prop_assert_eq!(r.roots.len(), 1);
        prop_assert_eq!(r.roots[0].1, 2);

        prop_assume!(p.dist(&q) > 0.05);
        let simple = QuadraticClass::from_form(&from_roots(&[p, q]));
        prop_assert!(disc_quadratic(&simple).norm() > 1e-6);
        let r = roots(&simple.to_form());
        prop_assert_eq!(r.roots.len(), 2);
    }

    #[test]
    fn eval_is_homogeneous(coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8),
                           p in arb_point(), lr in 0.2f64..2.0, li in -2.0f64..2.0) {
        let f = BinaryForm::new(coeffs.iter().map(|&(a, b)| c(a, b)).collect());
        let lambda = c(lr, li);
        let scaled = ProjPoint::new(p.z0 * lambda, p.z1 * lambda);
        let lhs = eval(&f, &scaled);
        let rhs = lambda.powi(f.degree() as i32) * eval(&f, &p);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()) * lambda.norm().powi(f.degree() as i32).max(1.0));
    }

    #[test]
    fn wronskian_affine_covariance(a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
                                   alpha in (0.3f64..2.0, -1.0f64..1.0), beta in (-1.0f64..1.0, -1.0f64..1.0)) {
        // p, q of degree 3; reparametrize z ↦ αz + β (a Möbius map fixing ∞)
        let p = BinaryForm::new(a.iter().map(|&(x, y)| c(x, y)).collect());
        let q = BinaryForm::new(a.iter().rev().map(|&(x, y)| c(y, -x)).collect());
        let al = c(alpha.0, alpha.1);
        let be = c(beta.0, beta.1);
        let m = [[c(1.0, 0.0), c(0.0, 0.0)], [be, al]];
        let w = wronskian(&p, &q).compose_linear(&m);
        let w2 = wronskian(&p.compose_linear(&m), &q.compose_linear(&m));
        // chain rule: W(p∘g, q∘g) = α · (W(p,q)∘g)
        prop_assert!(w2.sub(&w.scaled(al)).norm() < 1e-11 * (1.0 + w2.norm()));
    }

    #[test]
    fn wronskian_bilinear_antisymmetric(a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9), s in -2.0f64..2.0) {
        let f = |k: usize| BinaryForm::new(a[3 * k..3 * k + 3].iter().map(|&(x, y)| c(x, y)).collect());
        let (p, q, r) = (f(0), f(1), f(2));
        let lhs = wronskian(&p.add(&r.scaled(c(s, 0.0))), &q);
        let rhs = wronskian(&p, &q).add(&wronskian(&r, &q).scaled(c(s, 0.0)));
        prop_assert!(lhs.sub(&rhs).norm() < 1e-12);
        prop_assert!(wronskian(&p, &q).add(&wronskian(&q, &p)).norm() < 1e-14);
    }
}
