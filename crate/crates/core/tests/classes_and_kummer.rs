use k3cft::cft::twisted_ground_state_count;
use k3cft::charclass::*;
use k3cft::kummer::*;
use k3cft::narain::TorusSpec;
use k3cft::rational::{int, rat};
use proptest::prelude::*;

fn class(ring: ChernRing, coeffs: &[i64]) -> ChernClass {
    // 1, c1, c2, c1², c3, c1c2, c1³ in that order, as far as the ring allows
    let gens = [
        ring.one(),
        ring.c(1),
        ring.c(2),
        ring.c(1).pow(2),
        ring.c(3),
        ring.c(1).mul(&ring.c(2)),
        ring.c(1).pow(3),
    ];
    gens.iter()
        .zip(coeffs)
        .fold(ring.zero(), |acc, (g, &k)| acc.add(&g.scale(&rat(k, 3))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chern_ring_axioms(
        a in prop::collection::vec(-6i64..7, 7),
        b in prop::collection::vec(-6i64..7, 7),
        c in prop::collection::vec(-6i64..7, 7),
    ) {
        let ring = ChernRing::new(3).unwrap();
        let (a, b, c) = (class(ring, &a), class(ring, &b), class(ring, &c));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.add(&b).sub(&b), a.clone());
        prop_assert_eq!(a.mul(&ring.one()), a);
    }

    #[test]
    fn chern_character_is_a_ring_map(e in prop::collection::vec(-4i64..5, 3), f in prop::collection::vec(-4i64..5, 3)) {
        // line bundles: ch(L ⊗ M) = ch(L) ch(M), and duals invert
        let ring = ChernRing::new(3).unwrap();
        let e = class(ring, &[0, e[0], e[1], e[2]]);
        let f = class(ring, &[0, f[0], f[1], f[2]]);
        let l = BundleClass::line(&e.degree_part(1));
        let m = BundleClass::line(&f.degree_part(1));
        let lm = BundleClass::line(&e.degree_part(1).add(&f.degree_part(1)));
        prop_assert_eq!(l.tensor(&m), lm);
        prop_assert_eq!(l.tensor(&l.dual()).chern_character, ring.one());
    }
}

#[test]
fn todd_class_through_degree_three() {
    let r3 = ChernRing::new(3).unwrap();
    let td = todd_class(r3);
    assert_eq!(td.degree_part(3), r3.c(1).mul(&r3.c(2)).scale(&rat(1, 24)));
    let r1 = ChernRing::new(1).unwrap();
    assert_eq!(todd_class(r1), r1.one().add(&r1.c(1).scale(&rat(1, 2))));
}

#[test]
fn chern_character_examples() {
    let ring = ChernRing::new(2).unwrap();
    assert_eq!(
        BundleClass::trivial(ring, 3).chern_character,
        ring.constant(int(3))
    );
    let e = ring.c(1);
    let expected = ring.one().add(&e).add(&e.pow(2).scale(&rat(1, 2)));
    assert_eq!(BundleClass::line(&e).chern_character, expected);
}

#[test]
fn riemann_roch_is_integral_on_k3() {
    let k3 = ManifoldData::k3();
    let ring = k3.ring();
    let t = BundleClass::tangent(ring);
    let lambdas = exterior_powers(&t.chern_character, 2);
    let syms = symmetric_powers(&t.chern_character, 2, 3);
    let mut corpus = vec![t.clone(), t.dual(), t.tensor(&t.dual()), t.tensor(&t)];
    corpus.extend(
        lambdas
            .into_iter()
            .chain(syms)
            .map(|ch| BundleClass::new(ch).unwrap()),
    );
    for e in corpus {
        let chi = hrr_euler(&k3, &e).unwrap();
        assert!(chi.is_integer());
    }
    // h^0(T) = h^2(T) = 0 and h^1(T) = 20 on K3
    assert_eq!(hrr_euler(&k3, &t).unwrap(), int(-20));
    let torus = ManifoldData::torus(2);
    assert_eq!(
        hrr_euler(&torus, &BundleClass::trivial(torus.ring(), 1)).unwrap(),
        int(0)
    );
}

#[test]
fn geometric_genus_coefficients_are_y_symmetric() {
    let e = geometric_elliptic_genus(&ManifoldData::k3(), &int(4)).unwrap();
    assert!(e.is_y_symmetric());
    assert!(geometric_elliptic_genus(&ManifoldData::torus(1), &int(3))
        .unwrap()
        .is_zero());
    assert!(geometric_elliptic_genus(&ManifoldData::torus(2), &int(3))
        .unwrap()
        .is_zero());
}

#[test]
fn q0_row_is_the_chi_y_genus() {
    // y^{-1} Σ_p (-y)^p χ(Ω^p) with χ(Ω^p) = Σ_q (-1)^q h^{p,q}
    let diamond = kummer_hodge(2).unwrap();
    let mut expected = std::collections::BTreeMap::new();
    for p in 0..=2 {
        for q in 0..=2 {
            let sign = if (p + q) % 2 == 0 { 1 } else { -1 };
            *expected.entry(int(p as i64 - 1)).or_insert(int(0)) +=
                int(sign * diamond.get(p, q) as i64);
        }
    }
    expected.retain(|_, v| *v != int(0));
    let e = geometric_elliptic_genus(&ManifoldData::k3(), &int(1)).unwrap();
    assert_eq!(e.coeff(&int(0)).unwrap(), expected);
}

#[test]
fn geometry_and_cft_agree_on_k3_numbers() {
    let k3 = ManifoldData::k3();
    let inv = diamond_invariants(&kummer_hodge(2).unwrap());
    assert_eq!(
        int(inv.chi_o),
        hrr_euler(&k3, &BundleClass::trivial(k3.ring(), 1)).unwrap()
    );
    assert_eq!(
        int(inv.chi),
        hrr_euler(&k3, &BundleClass::euler(k3.ring())).unwrap()
    );
    for d in 1..=3 {
        assert_eq!(
            fixed_points(&TorusSpec::cubic(d)).len() as u64,
            twisted_ground_state_count(d).unwrap()
        );
    }
}

#[test]
fn diamond_classification() {
    let make = |h10: u64, h11: u64| {
        HodgeDiamond::new(vec![vec![1, h10, 1], vec![h10, h11, h10], vec![1, h10, 1]]).unwrap()
    };
    assert_eq!(classify_cy2(&make(2, 4)), Cy2Verdict::Torus);
    assert_eq!(classify_cy2(&make(0, 20)), Cy2Verdict::K3);
    assert_eq!(classify_cy2(&make(1, 12)), Cy2Verdict::Invalid);
    let t1 = torus_hodge(1).unwrap();
    assert_eq!(t1.rows(), vec![vec![1], vec![1, 1], vec![1]]);
    assert_eq!(diamond_invariants(&t1).chi, 0);
    assert!(kummer_hodge(3).is_err());
}

#[test]
fn fixed_points_are_half_lattice_points() {
    let spec = TorusSpec::from_json_str(
        r#"{"D":2,"basis":[["1","1/2","0","0"],["0","1","0","0"],["0","0","2","0"],["0","0","1/3","1"]]}"#,
    )
    .unwrap();
    let f = fixed_points(&spec);
    assert_eq!(f.len(), 16);
    assert!(f.representatives[0].iter().all(|x| *x == int(0)));
    for p in &f.representatives {
        assert!(p.iter().all(|x| *x == int(0) || *x == rat(1, 2)));
    }
    assert_eq!(fixed_points(&TorusSpec::cubic(1)).len(), 4);
}

#[test]
fn kummer_report_for_the_cubic_torus() {
    let report = kummer_report(&TorusSpec::cubic(2)).unwrap();
    assert_eq!(report["fixed_points"]["count"], 16);
    assert_eq!(report["kummer"]["verdict"], "K3");
    assert_eq!(report["kummer"]["invariants"]["chi"], 24);
    assert_eq!(report["torus"]["verdict"], "torus");
}

#[test]
fn a1_surface_equation() {
    let z = [
        complex_rational(int(1), int(0)),
        complex_rational(int(2), int(0)),
    ];
    let u = a1_map(&z);
    assert_eq!(u.clone().map(|c| c.re), [int(1), int(4), int(2)]);
    assert!(a1_equation(&u) == complex_rational(int(0), int(0)));
}
