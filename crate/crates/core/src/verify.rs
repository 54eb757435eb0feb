//! Runtime self-check over the headline identities, used by `k3cft verify-all`.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{One, Signed};
use serde::Serialize;

use crate::cft::{
    cft_elliptic_genus, k3_elliptic_genus_closed_form, k3_elliptic_genus_value,
    spectral_flow_check, twisted_ground_state_count, twisted_leading_coefficient, TheoryHandle,
};
use crate::charclass::{
    geometric_elliptic_genus, hrr_euler, todd_class, BundleClass, ChernRing, ManifoldData,
};
use crate::error::{Error, Result};
use crate::kummer::{
    a1_chart_check, classify_cy2, complex_rational, diamond_invariants, fixed_points, kummer_hodge,
    torus_hodge, Cy2Verdict, DiamondInvariants,
};
use crate::matrix::Matrix;
use crate::modforms::{eta_value, jacobi_transform_check, JacobiFormSpec};
use crate::narain::{narain_from_torus, z_gamma_eval, NarainLattice, TorusSpec};
use crate::qseries::ComplexPoint;
use crate::rational::{int, rat};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<String>;

fn fail(msg: impl Into<String>) -> Error {
    Error::IdentityViolation(msg.into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(fail(msg()))
    }
}

/// Tori used by the lattice and spectral-flow checks, `B ≠ 0` included.
pub fn sample_specs() -> Vec<TorusSpec> {
    let m = |rows: &[&[(i64, i64)]]| {
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&(n, d)| rat(n, d)).collect())
                .collect(),
        )
        .expect("square")
    };
    let skew = |d: usize, entries: &[(usize, usize, (i64, i64))]| {
        let mut b = Matrix::zeros(2 * d, 2 * d);
        for &(i, j, (n, den)) in entries {
            b[(i, j)] = rat(n, den);
            b[(j, i)] = rat(-n, den);
        }
        b
    };
    let id1 = || Matrix::identity(2);
    let id2 = || Matrix::identity(4);
    vec![
        Ok(TorusSpec::cubic(1)),
        TorusSpec::new(1, id1(), skew(1, &[(0, 1, (1, 3))])),
        TorusSpec::new(1, m(&[&[(2, 1), (0, 1)], &[(0, 1), (1, 2)]]), skew(1, &[])),
        TorusSpec::new(
            1,
            m(&[&[(1, 1), (1, 2)], &[(0, 1), (1, 1)]]),
            skew(1, &[(0, 1, (2, 5))]),
        ),
        Ok(TorusSpec::cubic(2)),
        TorusSpec::new(2, id2(), skew(2, &[(0, 1, (1, 2)), (2, 3, (1, 2))])),
        TorusSpec::new(
            2,
            m(&[
                &[(1, 1), (1, 2), (0, 1), (0, 1)],
                &[(0, 1), (1, 1), (0, 1), (0, 1)],
                &[(0, 1), (0, 1), (2, 1), (0, 1)],
                &[(0, 1), (0, 1), (1, 3), (1, 1)],
            ]),
            skew(
                2,
                &[
                    (0, 1, (1, 3)),
                    (0, 3, (1, 2)),
                    (1, 2, (1, 1)),
                    (2, 3, (1, 5)),
                ],
            ),
        ),
    ]
    .into_iter()
    .map(|s| s.expect("valid sample spec"))
    .collect()
}

fn lattice(spec: &TorusSpec) -> Result<NarainLattice> {
    narain_from_torus(spec)
}

fn k3_genus(_: f64) -> Outcome {
    let order = int(5);
    let cft = cft_elliptic_genus(
        &TheoryHandle::z2_orbifold(lattice(&TorusSpec::cubic(2))?),
        &order,
    )?;
    let closed = k3_elliptic_genus_closed_form(&order)?;
    let geometric = geometric_elliptic_genus(&ManifoldData::k3(), &order)?;
    ensure(cft == closed, || {
        "CFT genus differs from the theta closed form".into()
    })?;
    ensure(cft == geometric, || {
        "CFT genus differs from the geometric genus".into()
    })?;
    Ok(format!("{} terms equal through q^5", cft.len()))
}

fn genus_at_origin(_: f64) -> Outcome {
    let e = k3_elliptic_genus_closed_form(&int(10))?.at_y_one();
    let expected = crate::qseries::PuiseuxSeries::constant(int(24), &e.order());
    ensure(e == expected, || {
        format!("E(τ,0) = {}", e.to_canonical_text().trim())
    })?;
    Ok("E(τ,0) = 24 + O(q^10)".into())
}

fn torus_genus(_: f64) -> Outcome {
    let specs = sample_specs();
    for spec in &specs {
        let e = cft_elliptic_genus(&TheoryHandle::toroidal(lattice(spec)?), &int(4))?;
        ensure(e.is_zero(), || {
            format!("nonzero toroidal genus at D={}", spec.dim_d())
        })?;
    }
    Ok(format!("{} tori, E = 0 + O(q^4)", specs.len()))
}

fn spectral_flow(_: f64) -> Outcome {
    let specs = sample_specs();
    let mut n = 0;
    for spec in [&specs[1], &specs[5]] {
        let lat = lattice(spec)?;
        for t in [
            TheoryHandle::toroidal(lat.clone()),
            TheoryHandle::z2_orbifold(lat),
        ] {
            n += spectral_flow_check(&t, &int(3))?.identities.len();
        }
    }
    Ok(format!("{n} identities exact through q^3"))
}

fn narain_validity(_: f64) -> Outcome {
    let specs = sample_specs();
    for spec in &specs {
        let lat = lattice(spec)?;
        ensure(
            lat.is_even() && lat.gram_determinant().abs().is_one(),
            || "lattice not even self-dual".into(),
        )?;
    }
    Ok(format!("{} lattices even with |det Gram| = 1", specs.len()))
}

fn lattice_sum(tolerance: f64) -> Outcome {
    let cutoff = int(8);
    let lat = lattice(&TorusSpec::cubic(1))?;
    let z = z_gamma_eval(&lat, Complex64::new(0.0, 1.0), &cutoff)?.value;
    let one_dim: f64 = (-6i64..=6).map(|n| (-PI * (n * n) as f64).exp()).sum();
    let brute = one_dim.powi(4) / eta_value(Complex64::new(0.0, 1.0)).norm().powi(4);
    let dev = (z - brute).norm();
    ensure(dev <= tolerance / 10.0, || {
        format!("brute-force deviation {dev:e}")
    })?;
    let mut worst: f64 = 0.0;
    for spec in &sample_specs()[..4] {
        let lat = lattice(spec)?;
        for tau in [Complex64::new(0.0, 1.0), Complex64::new(1.0 / 3.0, 1.0)] {
            let base = z_gamma_eval(&lat, tau, &cutoff)?.value;
            for image in [tau + 1.0, -tau.inv()] {
                worst = worst.max((z_gamma_eval(&lat, image, &cutoff)?.value - base).norm());
            }
        }
    }
    ensure(worst <= tolerance, || {
        format!("modular deviation {worst:e}")
    })?;
    Ok(format!(
        "brute-force deviation {dev:.1e}, modular deviation {worst:.1e}"
    ))
}

fn twisted_states(_: f64) -> Outcome {
    let lead = twisted_leading_coefficient(2)?;
    let count = twisted_ground_state_count(2)?;
    let fixed = fixed_points(&TorusSpec::cubic(2)).len();
    ensure(lead == int(16) && count == 16 && fixed == 16, || {
        format!("{lead}, {count}, {fixed}")
    })?;
    Ok("16 twisted ground states, 16 fixed points".into())
}

fn kummer_diamond(_: f64) -> Outcome {
    let k = kummer_hodge(2)?;
    let t = torus_hodge(2)?;
    ensure(k.get(1, 0) == 0 && k.get(1, 1) == 20, || {
        "Kummer diamond".into()
    })?;
    ensure(
        diamond_invariants(&k)
            == DiamondInvariants {
                chi: 24,
                chi_o: 2,
                sigma: -16,
            },
        || "Kummer invariants".into(),
    )?;
    ensure(
        diamond_invariants(&t)
            == DiamondInvariants {
                chi: 0,
                chi_o: 0,
                sigma: 0,
            },
        || "torus invariants".into(),
    )?;
    ensure(
        classify_cy2(&k) == Cy2Verdict::K3 && classify_cy2(&t) == Cy2Verdict::Torus,
        || "verdicts".into(),
    )?;
    Ok("(χ, χ(O), σ) = (24, 2, -16); torus (0, 0, 0)".into())
}

fn riemann_roch(_: f64) -> Outcome {
    let k3 = ManifoldData::k3();
    let ring = k3.ring();
    let chi_o = hrr_euler(&k3, &BundleClass::trivial(ring, 1))?;
    let chi = hrr_euler(&k3, &BundleClass::euler(ring))?;
    ensure(chi_o == int(2) && chi == int(24), || {
        format!("χ(O) = {chi_o}, χ = {chi}")
    })?;
    let r = ChernRing::new(2)?;
    let expected = r
        .one()
        .add(&r.c(1).scale(&rat(1, 2)))
        .add(&r.c(1).pow(2).add(&r.c(2)).scale(&rat(1, 12)));
    let td = todd_class(r);
    ensure(td == expected, || format!("Td = {td}"))?;
    Ok(format!("χ(O) = 2, χ = 24, Td = {td}"))
}

fn jacobi(tolerance: f64) -> Outcome {
    let spec = JacobiFormSpec::new(0, int(1))?;
    let samples = [
        ((0.0, 1.0), (0.1, 0.0)),
        ((0.0, 1.0), (0.3, 0.2)),
        ((0.5, 1.0), (0.1, 0.0)),
        ((0.5, 1.0), (0.3, 0.2)),
        ((0.0, 2.0), (0.1, 0.0)),
        ((0.0, 2.0), (0.3, 0.2)),
    ]
    .iter()
    .map(|&((a, b), (c, d))| ComplexPoint::new(Complex64::new(a, b), Complex64::new(c, d)))
    .collect::<Result<Vec<_>>>()?;
    let report = jacobi_transform_check(k3_elliptic_genus_value, &spec, &samples, tolerance)?;
    Ok(format!(
        "{} checks, max deviation {:.1e}",
        report.checks.len(),
        report.max_deviation
    ))
}

fn a1_charts(tolerance: f64) -> Outcome {
    // a fixed spread of rationals with mixed signs and denominators
    let r = |k: i64| rat((k * 37) % 101 - 50, (k * 13) % 29 + 1);
    let samples: Vec<_> = (0..100)
        .map(|k| {
            [
                complex_rational(r(4 * k + 1), r(4 * k + 2)),
                complex_rational(r(4 * k + 3), r(4 * k + 4)),
            ]
        })
        .collect();
    let report = a1_chart_check(&samples, tolerance)?;
    ensure(report.passed, || format!("{report:?}"))?;
    Ok(format!(
        "{} rational samples exact on both charts",
        report.samples
    ))
}

/// Every check, in order, with failures reported rather than propagated.
pub fn verify_all(tolerance: f64) -> Vec<Check> {
    let checks: [(&str, &str, fn(f64) -> Outcome); 11] = [
        (
            "AC-01",
            "K3 elliptic genus: CFT = theta closed form = geometric",
            k3_genus,
        ),
        ("AC-02", "E_K3(τ, 0) = 24", genus_at_origin),
        ("AC-03", "toroidal elliptic genus vanishes", torus_genus),
        ("AC-04", "spectral flow identities", spectral_flow),
        ("AC-05", "Narain lattices even self-dual", narain_validity),
        (
            "AC-06",
            "lattice sum oracle and modular invariance",
            lattice_sum,
        ),
        (
            "AC-07",
            "twisted ground states = fixed points",
            twisted_states,
        ),
        ("AC-08", "Kummer Hodge diamond", kummer_diamond),
        ("AC-09", "Riemann-Roch spot checks", riemann_roch),
        ("AC-10", "weak Jacobi form transformations", jacobi),
        ("AC-11", "A1 chart identities", a1_charts),
    ];
    checks
        .into_iter()
        .map(|(id, name, f)| {
            let (passed, detail) = match f(tolerance) {
                Ok(d) => (true, d),
                Err(e) => (false, e.to_string()),
            };
            Check {
                id: id.into(),
                name: name.into(),
                passed,
                detail,
            }
        })
        .collect()
}
