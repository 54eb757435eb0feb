//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use k3cft::cft::{
    cft_elliptic_genus, k3_elliptic_genus_value, spectral_flow_check, twisted_ground_state_count,
    twisted_leading_coefficient, TheoryHandle,
};
use k3cft::charclass::{
    geometric_elliptic_genus, hrr_euler, todd_class, BundleClass, ChernRing, ManifoldData,
};
use k3cft::kummer::{
    a1_chart_check, classify_cy2, complex_rational, diamond_invariants, fixed_points, kummer_hodge,
    torus_hodge, Cy2Verdict, DiamondInvariants,
};
use k3cft::matrix::Matrix;
use k3cft::modforms::{jacobi_transform_check, JacobiFormSpec};
use k3cft::narain::{narain_from_torus, z_gamma_eval, NarainLattice, TorusSpec};
use k3cft::qseries::{ComplexPoint, PuiseuxSeries};
use k3cft::rational::{int, rat};
use k3cft::Rational;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::function::gamma::gamma;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn specs(d: usize) -> Vec<TorusSpec> {
    let docs: &[&str] = match d {
        1 => &[
            r#"{"D":1,"basis":[["1","0"],["0","1"]],"B":[["0","0"],["0","0"]]}"#,
            r#"{"D":1,"basis":[["1","0"],["0","1"]],"B":[["0","1/3"],["-1/3","0"]]}"#,
            r#"{"D":1,"basis":[["2","0"],["0","1/2"]],"B":[["0","0"],["0","0"]]}"#,
            r#"{"D":1,"basis":[["1","1/2"],["0","1"]],"B":[["0","2/5"],["-2/5","0"]]}"#,
            r#"{"D":1,"basis":[["3/2","1"],["-1","2"]],"B":[["0","-7/4"],["7/4","0"]]}"#,
        ],
        _ => &[
            r#"{"D":2,"basis":[["1","0","0","0"],["0","1","0","0"],["0","0","1","0"],["0","0","0","1"]],
                "B":[["0","0","0","0"],["0","0","0","0"],["0","0","0","0"],["0","0","0","0"]]}"#,
            r#"{"D":2,"basis":[["1","1/2","0","0"],["0","1","0","0"],["0","0","2","0"],["0","0","1/3","1"]],
                "B":[["0","1/3","0","1/2"],["-1/3","0","1","0"],["0","-1","0","1/5"],["-1/2","0","-1/5","0"]]}"#,
            r#"{"D":2,"basis":[["2","0","1","0"],["0","1","0","0"],["0","0","1","1/2"],["1/3","0","0","1"]],
                "B":[["0","0","1/4","0"],["0","0","0","-2/3"],["-1/4","0","0","0"],["0","2/3","0","0"]]}"#,
            r#"{"D":2,"basis":[["1","0","0","0"],["0","1","0","0"],["0","0","1","0"],["0","0","0","1"]],
                "B":[["0","1/2","0","0"],["-1/2","0","0","0"],["0","0","0","1/2"],["0","0","-1/2","0"]]}"#,
        ],
    };
    docs.iter()
        .map(|s| TorusSpec::from_json_str(s).expect("valid spec"))
        .collect()
}

fn lattice(spec: &TorusSpec) -> NarainLattice {
    narain_from_torus(spec).expect("valid lattice")
}

// ---------------------------------------------------------------------------
// independent series oracle for 8 Σ (ϑ_k(τ,z)/ϑ_k(τ,0))²
// ---------------------------------------------------------------------------

/// Exponents: q in 1/8 units, y in 1/2 units.
type Poly = BTreeMap<(i64, i64), Rational>;

fn add_to(p: &mut Poly, k: (i64, i64), c: Rational) {
    let e = p.entry(k).or_insert_with(Rational::zero);
    *e += c;
    if e.is_zero() {
        p.remove(&k);
    }
}

fn poly_mul(a: &Poly, b: &Poly, order8: i64) -> Poly {
    let mut out = Poly::new();
    for (&(qa, ya), ca) in a {
        for (&(qb, yb), cb) in b {
            if qa + qb < order8 {
                add_to(&mut out, (qa + qb, ya + yb), ca * cb);
            }
        }
    }
    out
}

/// ϑ_k(τ, z) for k = 2, 3, 4 directly from the sums, below q^{order8/8}.
fn oracle_theta(k: u8, order8: i64, at_zero: bool) -> Poly {
    let mut p = Poly::new();
    for n in -40i64..=40 {
        // x = n (+ 1/2 for k = 2); q^{x²/2} = q^{4x²/8}; y^x
        let twice_x = if k == 2 { 2 * n + 1 } else { 2 * n };
        let q8 = twice_x * twice_x; // 4x² · (1/8 units) = (2x)²
        if q8 >= order8 {
            continue;
        }
        let sign = if k == 4 && n.rem_euclid(2) == 1 {
            -1
        } else {
            1
        };
        let y = if at_zero { 0 } else { twice_x };
        add_to(&mut p, (q8, y), int(sign));
    }
    p
}

/// `num / den` where `den` has a single lowest monomial `c q^v` and no y.
fn oracle_divide(num: &Poly, den: &Poly, order8: i64) -> Poly {
    let (&(v, _), c) = den.iter().next().expect("nonzero");
    let mut rem = num.clone();
    let mut out = Poly::new();
    while let Some((&(qa, ya), ca)) = rem.iter().next() {
        if qa - v >= order8 {
            break;
        }
        let t = ca / c;
        let key = (qa - v, ya);
        add_to(&mut out, key, t.clone());
        for (&(qd, yd), cd) in den {
            add_to(&mut rem, (qd + key.0, yd + key.1), -(&t * cd));
        }
    }
    out
}

fn oracle_k3_genus(order: i64) -> PuiseuxSeries {
    let order8 = 8 * order;
    // numerator and denominator need the extra room of the leading q^{1/8}
    let work = order8 + 2;
    let mut total = Poly::new();
    for k in [2u8, 3, 4] {
        let quotient = oracle_divide(
            &oracle_theta(k, work, false),
            &oracle_theta(k, work, true),
            order8,
        );
        for (key, c) in poly_mul(&quotient, &quotient, order8) {
            add_to(&mut total, key, c * int(8));
        }
    }
    let terms = total
        .into_iter()
        .map(|((q8, y2), c)| (rat(q8, 8), rat(y2, 2), c));
    PuiseuxSeries::from_terms(terms, &int(order)).expect("lattice exponents")
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

fn ac01() -> Outcome {
    let start = Instant::now();
    let order = int(5);
    let t = TheoryHandle::z2_orbifold(lattice(&TorusSpec::cubic(2)));
    let cft = cft_elliptic_genus(&t, &order).map_err(err)?;
    let oracle = oracle_k3_genus(5);
    let geometric = geometric_elliptic_genus(&ManifoldData::k3(), &order).map_err(err)?;
    ensure(
        cft == oracle,
        format!("CFT genus differs from 8Σ(ϑ_k/ϑ_k(0))²:\n{cft}\nvs\n{oracle}"),
    )?;
    ensure(
        cft == geometric,
        format!("CFT genus differs from χ(𝔼_q,-y):\n{cft}\nvs\n{geometric}"),
    )?;
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(60),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "{} terms equal through q^5 in {:.2?}",
        cft.len(),
        elapsed
    ))
}

fn ac02() -> Outcome {
    let t = TheoryHandle::z2_orbifold(lattice(&TorusSpec::cubic(2)));
    let e = cft_elliptic_genus(&t, &int(10)).map_err(err)?.at_y_one();
    let constant = e.coeff(&Rational::zero()).map_err(err)?;
    ensure(
        constant.get(&Rational::zero()) == Some(&int(24)),
        format!("q^0 coefficient at y=1 is {constant:?}"),
    )?;
    for (q, y, c) in e.terms() {
        ensure(
            q.is_zero(),
            format!("nonzero coefficient {c} at q^{q} y^{y}"),
        )?;
    }
    Ok("E_K3(τ,0) = 24 + O(q^10)".into())
}

fn ac03() -> Outcome {
    let mut n = 0;
    for d in [1, 2] {
        for spec in specs(d) {
            let e = cft_elliptic_genus(&TheoryHandle::toroidal(lattice(&spec)), &int(4))
                .map_err(err)?;
            ensure(e.is_zero(), format!("toroidal genus nonzero at D={d}: {e}"))?;
            n += 1;
        }
    }
    let torus = geometric_elliptic_genus(&ManifoldData::torus(2), &int(4)).map_err(err)?;
    ensure(torus.is_zero(), "geometric genus of the torus is nonzero")?;
    Ok(format!("{n} tori, E = 0 + O(q^4)"))
}

fn ac04() -> Outcome {
    let mut n = 0;
    for (d, i) in [(1, 1), (2, 3)] {
        let lat = lattice(&specs(d)[i]);
        for t in [
            TheoryHandle::toroidal(lat.clone()),
            TheoryHandle::z2_orbifold(lat),
        ] {
            let report = spectral_flow_check(&t, &int(3)).map_err(err)?;
            ensure(report.passed(), format!("{report:?}"))?;
            n += report.identities.len();
        }
    }
    Ok(format!("{n} identities exact through q^3"))
}

fn ac05() -> Outcome {
    let mut n = 0;
    for spec in specs(1).into_iter().chain(specs(2)) {
        let lat = lattice(&spec);
        let r = lat.rank();
        let half_d = r / 2;
        let basis = lat.scaled_basis();
        // ⟨γ,γ'⟩ recomputed from the stored √2γ columns
        let mut gram = Matrix::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                let (a, b) = (basis.column(i), basis.column(j));
                let left: Rational = (0..half_d).map(|k| &a[k] * &b[k]).sum();
                let right: Rational = (half_d..r).map(|k| &a[k] * &b[k]).sum();
                gram[(i, j)] = (left - right) / int(2);
            }
        }
        for i in 0..r {
            for j in 0..r {
                ensure(gram[(i, j)].is_integer(), "Gram entry not integral")?;
                ensure(gram[(i, j)] == gram[(j, i)], "Gram not symmetric")?;
            }
            ensure(gram[(i, i)].to_integer() % 2 == 0.into(), "odd diagonal")?;
        }
        ensure(
            gram.determinant().abs() == Rational::one(),
            "|det Gram| != 1",
        )?;
        n += 1;
    }
    ensure(n >= 5, "too few specs")?;
    Ok(format!("{n} lattices even and unimodular"))
}

fn eta_at_i() -> f64 {
    gamma(0.25) / (2.0 * PI.powf(0.75))
}

fn ac06() -> Outcome {
    let lat = lattice(&TorusSpec::cubic(1));
    let cutoff = int(8);
    let tau = Complex64::new(0.0, 1.0);
    let z = z_gamma_eval(&lat, tau, &cutoff).map_err(err)?.value;
    // at τ = i, q^{γ_L²/2} q̄^{γ_R²/2} = e^{-π(|λ|²+|μ|²)} for L = Z², B = 0
    let mut brute = 0.0;
    for l1 in -6i64..=6 {
        for l2 in -6i64..=6 {
            for m1 in -6i64..=6 {
                for m2 in -6i64..=6 {
                    brute += (-PI * (l1 * l1 + l2 * l2 + m1 * m1 + m2 * m2) as f64).exp();
                }
            }
        }
    }
    brute /= eta_at_i().powi(4);
    let dev = (z - Complex64::new(brute, 0.0)).norm();
    ensure(dev <= 1e-9, format!("|Z_Γ(i) - brute force| = {dev:e}"))?;
    let mut worst: f64 = 0.0;
    for spec in [TorusSpec::cubic(1), specs(1)[3].clone()] {
        let lat = lattice(&spec);
        for tau in [
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0 / 3.0, 1.0),
            Complex64::new(-0.2, 1.3),
        ] {
            let base = z_gamma_eval(&lat, tau, &cutoff).map_err(err)?.value;
            let t = z_gamma_eval(&lat, tau + 1.0, &cutoff).map_err(err)?.value;
            let s = z_gamma_eval(&lat, -tau.inv(), &cutoff).map_err(err)?.value;
            worst = worst.max((t - base).norm()).max((s - base).norm());
        }
    }
    ensure(worst <= 1e-8, format!("modular deviation {worst:e}"))?;
    Ok(format!(
        "brute-force deviation {dev:.1e}, modular deviation {worst:.1e}"
    ))
}

fn ac07() -> Outcome {
    let lead = twisted_leading_coefficient(2).map_err(err)?;
    let count = twisted_ground_state_count(2).map_err(err)?;
    let fixed = fixed_points(&TorusSpec::cubic(2)).len();
    ensure(
        lead == int(16),
        format!("twisted leading coefficient {lead}"),
    )?;
    ensure(
        count == 16 && fixed == 16,
        format!("count {count}, fixed points {fixed}"),
    )?;
    Ok("twisted ground states 16 = |L/2L|".into())
}

fn ac08() -> Outcome {
    let k = kummer_hodge(2).map_err(err)?;
    ensure(
        k.get(1, 0) == 0 && k.get(1, 1) == 20,
        format!("Kummer diamond {:?}", k.h),
    )?;
    let inv = diamond_invariants(&k);
    ensure(
        inv == DiamondInvariants {
            chi: 24,
            chi_o: 2,
            sigma: -16,
        },
        format!("{inv:?}"),
    )?;
    ensure(classify_cy2(&k) == Cy2Verdict::K3, "Kummer verdict")?;
    let t = torus_hodge(2).map_err(err)?;
    let inv_t = diamond_invariants(&t);
    ensure(
        inv_t
            == DiamondInvariants {
                chi: 0,
                chi_o: 0,
                sigma: 0,
            },
        format!("{inv_t:?}"),
    )?;
    ensure(classify_cy2(&t) == Cy2Verdict::Torus, "torus verdict")?;
    Ok("h^{1,1} = 20, (χ, χ(O), σ) = (24, 2, -16); torus (0, 0, 0)".into())
}

fn ac09() -> Outcome {
    let k3 = ManifoldData::k3();
    let ring = k3.ring();
    let chi_o = hrr_euler(&k3, &BundleClass::trivial(ring, 1)).map_err(err)?;
    let chi = hrr_euler(&k3, &BundleClass::euler(ring)).map_err(err)?;
    ensure(chi_o == int(2), format!("χ(O) = {chi_o}"))?;
    ensure(chi == int(24), format!("χ = {chi}"))?;
    let r = ChernRing::new(2).map_err(err)?;
    let expected = r
        .one()
        .add(&r.c(1).scale(&rat(1, 2)))
        .add(&r.c(1).pow(2).add(&r.c(2)).scale(&rat(1, 12)));
    let td = todd_class(r);
    ensure(td == expected, format!("Td = {td}"))?;
    Ok(format!("χ(O) = 2, χ = 24, Td = {td}"))
}

fn ac10() -> Outcome {
    let spec = JacobiFormSpec::new(0, int(1)).map_err(err)?;
    let samples: Vec<ComplexPoint> = [
        ((0.1, 1.1), (0.13, 0.05)),
        ((-0.3, 0.9), (0.21, -0.1)),
        ((0.45, 1.4), (-0.3, 0.2)),
        ((0.0, 1.0), (0.37, 0.0)),
        ((0.2, 0.8), (0.05, 0.12)),
        ((-0.1, 1.7), (0.4, -0.25)),
        ((0.33, 1.2), (-0.17, 0.31)),
    ]
    .iter()
    .map(|&((a, b), (c, d))| {
        ComplexPoint::new(Complex64::new(a, b), Complex64::new(c, d)).expect("upper half plane")
    })
    .collect();
    let report =
        jacobi_transform_check(k3_elliptic_genus_value, &spec, &samples, 1e-8).map_err(err)?;
    Ok(format!(
        "{} checks at {} points, max deviation {:.1e}",
        report.checks.len(),
        samples.len(),
        report.max_deviation
    ))
}

fn ac11() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x4b756d6d6572);
    let mut r = || rat(rng.gen_range(-50..=50), rng.gen_range(1..=30));
    let samples: Vec<_> = (0..100)
        .map(|_| [complex_rational(r(), r()), complex_rational(r(), r())])
        .collect();
    let report = a1_chart_check(&samples, 1e-9).map_err(err)?;
    ensure(
        report.passed && report.samples == 100,
        format!("{report:?}"),
    )?;
    Ok("100 rational samples exact on both charts".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        (
            "AC-01",
            "K3 elliptic genus: CFT = theta closed form = geometric",
            ac01,
        ),
        ("AC-02", "E_K3(τ, 0) = 24", ac02),
        ("AC-03", "toroidal elliptic genus vanishes", ac03),
        ("AC-04", "spectral flow identities", ac04),
        ("AC-05", "Narain lattices even self-dual", ac05),
        ("AC-06", "lattice sum oracle and modular invariance", ac06),
        ("AC-07", "twisted ground states = fixed points", ac07),
        ("AC-08", "Kummer Hodge diamond", ac08),
        ("AC-09", "Riemann-Roch spot checks", ac09),
        ("AC-10", "weak Jacobi form transformations", ac10),
        ("AC-11", "A1 chart identities", ac11),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id} {name} [{secs:.2}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name} [{secs:.2}s]: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
