use mtl_core::picard_lattice::*;
use proptest::prelude::*;

fn ctx(n: usize) -> LatticeContext {
    LatticeContext { n }
}

#[test]
fn intersection_examples() {
    let h = DivisorClass::pullback(ctx(0), 1, 1);
    assert_eq!(intersect(&h, &h).unwrap(), 2);
    let c = DivisorClass::family(2);
    assert_eq!(intersect(&c, &c).unwrap(), 4);
    for j in 0..4 {
        assert_eq!(intersect(&c, &DivisorClass::exceptional(ctx(4), j)).unwrap(), 1);
    }
    assert!(intersect(&c, &h).is_err());
}

#[test]
fn canonical_class_examples() {
    assert_eq!(canonical_class(ctx(0)), DivisorClass::new(-2, -2, vec![]));
    let k = canonical_class(ctx(4));
    assert_eq!(intersect(&k, &k).unwrap(), 4);
    for j in 0..4 {
        assert_eq!(intersect(&k, &DivisorClass::exceptional(ctx(4), j)).unwrap(), -1);
    }
}

#[test]
fn adjunction_examples() {
    assert_eq!(adjunction_nodes(&DivisorClass::family(3)).unwrap(), 2);
    assert_eq!(adjunction_nodes(&DivisorClass::pullback(ctx(0), 1, 1)).unwrap(), 0);
    for m in 2..7 {
        for k in 1..m {
            let d1 = DivisorClass::pullback(ctx(0), k, 1);
            let d2 = DivisorClass::pullback(ctx(0), m - k, 1);
            // the sum class has arithmetic genus m − 1; the split union has m nodes
            assert_eq!(adjunction_nodes(&d1.add(&d2)).unwrap(), m - 1);
            assert_eq!(nodes_of_union(&[d1, d2]).unwrap(), m);
        }
    }
}

#[test]
fn dimension_examples() {
    assert_eq!(severi_dimension(4, 1).dimension, 3);
    assert_eq!(severi_dimension(6, 2).dimension, 3);
    let s = severi_dimension(2 * 5 - 4, 5 - 2);
    assert_eq!(s.dimension, 1);
    assert!(s.within_hypothesis);
    assert_eq!(severi_dimension(2, 0).dimension, 3);
    assert!(!severi_dimension(2, 2).within_hypothesis);

    assert_eq!(system_dimension(4, 1).unwrap(), 4);
    for m in 2..10 {
        assert_eq!(system_dimension(2 * m, m - 1).unwrap(), m + 2);
    }
    assert_eq!(system_dimension(2, 0).unwrap(), 3);
    assert!(system_dimension(2, 2).is_err());
}

/// Independent brute force: all E with 0 ≤ k', l' ≤ 8 and 0 ≤ m'_i ≤ 6.
fn brute_force(c: &DivisorClass) -> Vec<DivisorClass> {
    let n = c.mults.len();
    let k = canonical_class(ctx(n));
    let mut out = Vec::new();
    for kp in 0..=8 {
        for lp in 0..=8 {
            let mut m = vec![0i64; n];
            loop {
                let e = DivisorClass::new(kp, lp, m.clone());
                if e.self_intersection() == -1 && intersect(&k, &e).unwrap() == -1 && intersect(c, &e).unwrap() == 0 {
                    out.push(e);
                }
                let mut i = 0;
                while i < n {
                    m[i] += 1;
                    if m[i] <= 6 {
                        break;
                    }
                    m[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
        }
    }
    out
}

#[test]
fn enumeration_examples() {
    for m in 2..7 {
        let c = DivisorClass::family(m);
        let found = enumerate_candidate_minus_one_classes(ctx(2 * m as usize), &c);
        assert!(found.is_empty(), "m = {m}: {found:?}");
    }
    let idle = DivisorClass::new(1, 1, vec![0]);
    let found = enumerate_candidate_minus_one_classes(ctx(1), &idle);
    assert!(found.contains(&DivisorClass::exceptional(ctx(1), 0)));

    let c = DivisorClass::new(2, 2, vec![1, 1, 1, 1]);
    assert!(enumerate_candidate_minus_one_classes(ctx(4), &c).is_empty());
    assert!(brute_force(&c).is_empty());
}

#[test]
fn enumeration_agrees_with_brute_force() {
    let classes = [
        DivisorClass::new(1, 1, vec![1, 0, 0]),
        DivisorClass::new(2, 1, vec![1, 1, 0]),
        DivisorClass::new(1, 2, vec![1, 0, 1, 0]),
        DivisorClass::new(3, 1, vec![1, 1, 1, 0]),
        DivisorClass::new(2, 2, vec![2, 1, 0]),
        DivisorClass::new(3, 2, vec![1, 1, 1, 1, 1]),
    ];
    for c in &classes {
        let mut found: Vec<_> = enumerate_candidate_minus_one_classes(c.context(), c)
            .into_iter()
            .filter(|e| e.k != 0 || e.l != 0)
            .collect();
        let mut oracle = brute_force(c);
        found.sort_by_key(|e| format!("{e}"));
        oracle.sort_by_key(|e| format!("{e}"));
        assert_eq!(found, oracle, "class {c}");
    }
}

#[test]
fn minimality_examples() {
    for m in 2..7 {
        let c = DivisorClass::family(m);
        assert!(minimality_report(c.context(), &c).numerically_minimal);
    }
    let mut mults = vec![1; 4];
    mults.push(0);
    let c = DivisorClass::new(2, 2, mults);
    let r = minimality_report(ctx(5), &c);
    assert!(!r.numerically_minimal);
    assert_eq!(r.candidates, vec![DivisorClass::exceptional(ctx(5), 4)]);

    let r = minimality_report(ctx(1), &DivisorClass::new(1, 1, vec![0]));
    assert!(!r.numerically_minimal);
}

#[test]
fn family_class_identities() {
    for m in 2..7 {
        let c = DivisorClass::family(m);
        let c2 = c.self_intersection();
        let delta = adjunction_nodes(&c).unwrap();
        assert_eq!((c2, delta), (2 * m, m - 1));
        let sev = severi_dimension(c2, delta).dimension;
        let sys = system_dimension(c2, delta).unwrap();
        assert_eq!(sev, 3);
        assert_eq!(sys, m + 2);
        assert_eq!(sys - sev, delta);
    }
}

#[test]
fn parse_round_trip() {
    let c = DivisorClass::parse("2,2:1,1,1,1").unwrap();
    assert_eq!(c, DivisorClass::family(2));
    assert_eq!(DivisorClass::parse(&c.to_string()).unwrap(), c);
    assert_eq!(DivisorClass::parse("1,1").unwrap().mults.len(), 0);
    assert!(DivisorClass::parse("1").is_err());
}

fn arb_class(n: usize) -> impl Strategy<Value = DivisorClass> {
    (-5i64..6, -5i64..6, proptest::collection::vec(-3i64..4, n)).prop_map(|(k, l, m)| DivisorClass::new(k, l, m))
}

proptest! {
    #[test]
    fn pairing_symmetric_bilinear(n in 0usize..=10, seed in any::<u64>()) {
        let mut runner = proptest::test_runner::TestRunner::new_with_rng(
            Default::default(), proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &seed.to_le_bytes().repeat(4)));
        let strat = (arb_class(n), arb_class(n), arb_class(n), -3i64..4);
        let (a, b, cc, s) = proptest::strategy::ValueTree::current(&strat.new_tree(&mut runner).unwrap());
        prop_assert_eq!(intersect(&a, &b).unwrap(), intersect(&b, &a).unwrap());
        let scaled = DivisorClass::new(s * a.k, s * a.l, a.mults.iter().map(|x| s * x).collect());
        let lhs = intersect(&scaled.add(&cc), &b).unwrap();
        prop_assert_eq!(lhs, s * intersect(&a, &b).unwrap() + intersect(&cc, &b).unwrap());
        prop_assert_eq!(a.self_intersection(), intersect(&a, &a).unwrap());
    }

    #[test]
    fn enumerated_classes_satisfy_equations(k in 0i64..5, l in 0i64..4, mults in proptest::collection::vec(0i64..3, 0..7)) {
        let c = DivisorClass::new(k, l, mults);
        let ctx = c.context();
        let kk = canonical_class(ctx);
        for e in enumerate_candidate_minus_one_classes(ctx, &c) {
            prop_assert_eq!(e.self_intersection(), -1);
            prop_assert_eq!(intersect(&kk, &e).unwrap(), -1);
            prop_assert_eq!(intersect(&c, &e).unwrap(), 0);
        }
    }
}
