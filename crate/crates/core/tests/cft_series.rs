use std::time::Instant;

use k3cft::cft::*;
use k3cft::narain::{narain_from_torus, TorusSpec};
use k3cft::rational::{int, rat};
use k3cft::Rational;
use num_traits::Zero;

fn cubic(d: usize) -> k3cft::narain::NarainLattice {
    narain_from_torus(&TorusSpec::cubic(d)).unwrap()
}

fn skew_spec() -> TorusSpec {
    TorusSpec::from_json_str(
        r#"{"D": 2,
            "basis": [["1","1/2","0","0"],["0","1","0","0"],["0","0","2","0"],["0","0","1/3","1"]],
            "B": [["0","1/3","0","1/2"],["-1/3","0","1","0"],["0","-1","0","1/5"],["-1/2","0","-1/5","0"]]}"#,
    )
    .unwrap()
}

#[test]
fn k3_elliptic_genus_matches_closed_form() {
    let start = Instant::now();
    let t = TheoryHandle::z2_orbifold(cubic(2));
    let e = cft_elliptic_genus(&t, &int(5)).unwrap();
    let closed = k3_elliptic_genus_closed_form(&int(5)).unwrap();
    assert_eq!(e, closed);
    eprintln!("elapsed {:?}", start.elapsed());
}

#[test]
fn k3_elliptic_genus_at_origin_is_24() {
    let t = TheoryHandle::z2_orbifold(cubic(2));
    let e = cft_elliptic_genus(&t, &int(10)).unwrap().at_y_one();
    assert_eq!(
        e.coeff(&Rational::zero()).unwrap()[&Rational::zero()],
        int(24)
    );
    assert_eq!(e.len(), 1);
}

#[test]
fn orbifold_genus_ignores_the_lattice() {
    let a = cft_elliptic_genus(&TheoryHandle::z2_orbifold(cubic(2)), &int(3)).unwrap();
    let b = cft_elliptic_genus(
        &TheoryHandle::z2_orbifold(narain_from_torus(&skew_spec()).unwrap()),
        &int(3),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn spectral_flow_holds_for_both_constructions() {
    for d in [1, 2] {
        for t in [
            TheoryHandle::toroidal(cubic(d)),
            TheoryHandle::z2_orbifold(cubic(d)),
        ] {
            let start = Instant::now();
            let report = spectral_flow_check(&t, &int(3)).unwrap();
            assert!(report.passed());
            eprintln!("{:?} D={d}: {:?}", t.kind, start.elapsed());
        }
    }
}

#[test]
fn orbifold_ns_sector_counts_states() {
    let t = TheoryHandle::z2_orbifold(cubic(2));
    let ns = orbifold_sectors(&t, SectorLabel::NS, &int(2))
        .unwrap()
        .expand()
        .unwrap();
    for (e, c) in ns.terms() {
        if e[1].is_integer() && e[3].is_integer() {
            assert!(c.is_integer() && *c >= Rational::zero(), "{e:?} -> {c}");
        }
    }
    let _ = rat(1, 2);
}
