//! The Kummer construction: fixed points of `z ↦ -z` on a torus, Hodge
//! diamonds, and the local A1 chart of the resolution.

use num_complex::Complex;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::narain::TorusSpec;
use crate::rational::{fmt_rational, rat, Rational};

pub type ComplexRational = Complex<Rational>;

/// Hodge numbers `h^{p,q}`, `0 ≤ p, q ≤ D`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HodgeDiamond {
    pub dim_d: usize,
    pub h: Vec<Vec<u64>>,
}

impl HodgeDiamond {
    /// Checks `h^{p,q} = h^{q,p} = h^{D-p,D-q}`.
    pub fn new(h: Vec<Vec<u64>>) -> Result<Self> {
        let n = h.len();
        if n < 2 || h.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(
                "Hodge numbers must form a square grid of size D+1 ≥ 2".into(),
            ));
        }
        let d = n - 1;
        for p in 0..=d {
            for q in 0..=d {
                if h[p][q] != h[q][p] || h[p][q] != h[d - p][d - q] {
                    return Err(Error::InvariantViolation(format!(
                        "Hodge symmetry fails at ({p},{q})"
                    )));
                }
            }
        }
        Ok(Self { dim_d: d, h })
    }

    pub fn get(&self, p: usize, q: usize) -> u64 {
        self.h[p][q]
    }

    /// `h^{0,0} = h^{D,0} = h^{0,D} = h^{D,D} = 1`.
    pub fn has_calabi_yau_corners(&self) -> bool {
        let d = self.dim_d;
        [self.h[0][0], self.h[d][d], self.h[d][0], self.h[0][d]] == [1, 1, 1, 1]
    }

    /// Rows of the diamond from `h^{0,0}` down to `h^{D,D}`, each row listing
    /// `h^{p,q}` with `p + q` fixed and `p` decreasing.
    pub fn rows(&self) -> Vec<Vec<u64>> {
        let d = self.dim_d;
        (0..=2 * d)
            .map(|s| {
                (0..=d)
                    .rev()
                    .filter(|&p| s >= p && s - p <= d)
                    .map(|p| self.h[p][s - p])
                    .collect()
            })
            .collect()
    }
}

impl std::fmt::Display for HodgeDiamond {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rows: Vec<String> = self
            .rows()
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join("   "))
            .collect();
        let width = rows.iter().map(String::len).max().unwrap_or(0);
        for r in rows {
            writeln!(f, "{:^width$}", r)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DiamondInvariants {
    /// `Σ (-1)^{p+q} h^{p,q}`.
    pub chi: i64,
    /// `Σ_q (-1)^q h^{0,q}`.
    pub chi_o: i64,
    /// `Σ (-1)^q h^{p,q}`.
    pub sigma: i64,
}

pub fn diamond_invariants(d: &HodgeDiamond) -> DiamondInvariants {
    let sign = |k: usize| if k.is_multiple_of(2) { 1i64 } else { -1 };
    let mut inv = DiamondInvariants {
        chi: 0,
        chi_o: 0,
        sigma: 0,
    };
    for p in 0..=d.dim_d {
        for q in 0..=d.dim_d {
            let h = d.h[p][q] as i64;
            inv.chi += sign(p + q) * h;
            inv.sigma += sign(q) * h;
            if p == 0 {
                inv.chi_o += sign(q) * h;
            }
        }
    }
    inv
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// `h^{p,q}(T) = C(D,p)·C(D,q)`.
pub fn torus_hodge(dim_d: usize) -> Result<HodgeDiamond> {
    if dim_d == 0 {
        return Err(Error::InvalidInput("D must be positive".into()));
    }
    HodgeDiamond::new(
        (0..=dim_d)
            .map(|p| {
                (0..=dim_d)
                    .map(|q| binomial(dim_d, p) * binomial(dim_d, q))
                    .collect()
            })
            .collect(),
    )
}

/// The resolved quotient `T⁴/±1`: the part of the torus diamond fixed by
/// `(-1)^{p+q}`, plus one `(1,1)`-class for each of the 16 exceptional curves.
pub fn kummer_hodge(dim_d: usize) -> Result<HodgeDiamond> {
    if dim_d != 2 {
        return Err(Error::UnsupportedDimension(dim_d));
    }
    let torus = torus_hodge(2)?;
    let mut h = torus.h.clone();
    for (p, row) in h.iter_mut().enumerate() {
        for (q, v) in row.iter_mut().enumerate() {
            if (p + q) % 2 == 1 {
                *v = 0;
            }
        }
    }
    h[1][1] += 16;
    HodgeDiamond::new(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cy2Verdict {
    #[serde(rename = "torus")]
    Torus,
    K3,
    #[serde(rename = "invalid")]
    Invalid,
}

impl std::fmt::Display for Cy2Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Torus => "torus",
            Self::K3 => "K3",
            Self::Invalid => "invalid",
        })
    }
}

/// A Calabi-Yau two-fold is a torus iff `(h^{1,0}, h^{1,1}) = (2, 4)` and K3
/// iff it is `(0, 20)`.
pub fn classify_cy2(d: &HodgeDiamond) -> Cy2Verdict {
    if d.dim_d != 2 || !d.has_calabi_yau_corners() {
        return Cy2Verdict::Invalid;
    }
    match (d.h[1][0], d.h[1][1]) {
        (2, 4) => Cy2Verdict::Torus,
        (0, 20) => Cy2Verdict::K3,
        _ => Cy2Verdict::Invalid,
    }
}

/// Points `[z]` with `[z] = [-z]`, i.e. `2z ∈ L`, as coordinates in the
/// basis of `L` with entries in `{0, 1/2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedPointSet {
    pub representatives: Vec<Vec<Rational>>,
}

impl FixedPointSet {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    /// The same points in the ambient coordinates of `R^{2D}`.
    pub fn ambient(&self, spec: &TorusSpec) -> Vec<Vec<Rational>> {
        self.representatives
            .iter()
            .map(|v| spec.basis().mul_vec(v))
            .collect()
    }
}

/// All `2^{2D}` half-lattice points, in lexicographic order.
pub fn fixed_points(spec: &TorusSpec) -> FixedPointSet {
    let n = 2 * spec.dim_d();
    let half = rat(1, 2);
    let representatives = (0u64..1 << n)
        .map(|mask| {
            (0..n)
                .map(|i| {
                    if mask >> (n - 1 - i) & 1 == 1 {
                        half.clone()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect();
    FixedPointSet { representatives }
}

/// `(z¹, z²) ↦ ((z¹)², (z²)², z¹z²)`.
pub fn a1_map(z: &[ComplexRational; 2]) -> [ComplexRational; 3] {
    [&z[0] * &z[0], &z[1] * &z[1], &z[0] * &z[1]]
}

/// `u¹u² - (u³)²`, which vanishes on the image of [`a1_map`].
pub fn a1_equation(u: &[ComplexRational; 3]) -> ComplexRational {
    &u[0] * &u[1] - &u[2] * &u[2]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct A1Report {
    pub samples: usize,
    /// Samples with `u¹u² ≠ (u³)²`.
    pub chart_failures: usize,
    /// Samples `(t¹:t²)` whose image misses `v¹v² = (v³)²`.
    pub divisor_failures: usize,
    /// Largest deviation of `|t·u|/t` from `|u|`, relative to `|u|`.
    pub max_linear_decay_deviation: f64,
    /// Largest deviation of `[t·u]` from `[u]`.
    pub max_class_deviation: f64,
    pub passed: bool,
}

/// Verify the A1 charts on sample pairs.
///
/// Each pair is used as a point `z` of the chart, and (when nonzero) as
/// homogeneous coordinates `(t¹:t²)` on the exceptional curve. The curve
/// `γ_u(t) = (t·u, [u])` through `u = 𝔲(z)` is followed for
/// `t ∈ {10⁻¹, 10⁻², 10⁻³}`.
pub fn a1_chart_check(samples: &[[ComplexRational; 2]], tol: f64) -> Result<A1Report> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let mut report = A1Report {
        samples: samples.len(),
        chart_failures: 0,
        divisor_failures: 0,
        max_linear_decay_deviation: 0.0,
        max_class_deviation: 0.0,
        passed: true,
    };
    for z in samples {
        let u = a1_map(z);
        if !a1_equation(&u).is_zero() {
            report.chart_failures += 1;
        }
        if z.iter().all(Zero::is_zero) {
            continue;
        }
        // (t¹:t²) ↦ ((t¹)² : (t²)² : t¹t²), checked on two representatives
        // of the same point, which must map to proportional vectors
        let scale = complex_rational(rat(2, 1), rat(-1, 3));
        let scaled = [&z[0] * &scale, &z[1] * &scale];
        let (v, w) = (a1_map(z), a1_map(&scaled));
        let proportional =
            (0..3).all(|i| (0..3).all(|j| (&v[i] * &w[j] - &v[j] * &w[i]).is_zero()));
        if !a1_equation(&v).is_zero() || !a1_equation(&w).is_zero() || !proportional {
            report.divisor_failures += 1;
        }
        let uf: Vec<Complex<f64>> = u.iter().map(to_c64).collect();
        let norm = uf.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for t in [1e-1, 1e-2, 1e-3] {
            let point: Vec<Complex<f64>> = uf.iter().map(|c| c * t).collect();
            let pn = point.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let dev = (pn / t - norm).abs() / norm;
            report.max_linear_decay_deviation = report.max_linear_decay_deviation.max(dev);
            // [t·u] versus [u]: all 2x2 minors vanish
            let mut minor: f64 = 0.0;
            for i in 0..3 {
                for j in i + 1..3 {
                    minor = minor.max((point[i] * uf[j] - point[j] * uf[i]).norm() / (pn * norm));
                }
            }
            report.max_class_deviation = report.max_class_deviation.max(minor);
        }
    }
    report.passed = report.chart_failures == 0
        && report.divisor_failures == 0
        && report.max_linear_decay_deviation <= tol
        && report.max_class_deviation <= tol;
    if !report.passed {
        return Err(Error::ToleranceExceeded {
            transformation: "A1 chart".into(),
            tau: String::new(),
            z: format!(
                "chart failures {}, divisor failures {}",
                report.chart_failures, report.divisor_failures
            ),
            deviation: report
                .max_linear_decay_deviation
                .max(report.max_class_deviation),
        });
    }
    Ok(report)
}

fn to_c64(c: &ComplexRational) -> Complex<f64> {
    Complex::new(
        c.re.to_f64().unwrap_or(f64::NAN),
        c.im.to_f64().unwrap_or(f64::NAN),
    )
}

/// Fixed points, diamonds, invariants and verdict for the Kummer surface of a
/// two-dimensional torus.
pub fn kummer_report(spec: &TorusSpec) -> Result<Value> {
    let d = spec.dim_d();
    let fixed = fixed_points(spec);
    let torus = torus_hodge(d)?;
    let kummer = kummer_hodge(d)?;
    let inv_t = diamond_invariants(&torus);
    let inv_k = diamond_invariants(&kummer);
    let pts = |v: &[Vec<Rational>]| -> Vec<Vec<String>> {
        v.iter()
            .map(|p| p.iter().map(fmt_rational).collect())
            .collect()
    };
    Ok(serde_json::json!({
        "D": d,
        "fixed_points": {
            "count": fixed.len(),
            "lattice_coordinates": pts(&fixed.representatives),
            "ambient_coordinates": pts(&fixed.ambient(spec)),
        },
        "torus": {
            "hodge": torus.h,
            "invariants": inv_t,
            "verdict": classify_cy2(&torus),
        },
        "kummer": {
            "hodge": kummer.h,
            "invariants": inv_k,
            "verdict": classify_cy2(&kummer),
        },
    }))
}

/// `Complex<Rational>` from two rationals.
pub fn complex_rational(re: Rational, im: Rational) -> ComplexRational {
    Complex::new(re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn c(re: i64) -> ComplexRational {
        complex_rational(int(re), Rational::zero())
    }

    #[test]
    fn torus_diamonds() {
        let t2 = torus_hodge(2).unwrap();
        assert_eq!((t2.get(1, 0), t2.get(1, 1)), (2, 4));
        assert_eq!(
            diamond_invariants(&t2),
            DiamondInvariants {
                chi: 0,
                chi_o: 0,
                sigma: 0
            }
        );
        assert_eq!(classify_cy2(&t2), Cy2Verdict::Torus);
        let t1 = torus_hodge(1).unwrap();
        assert_eq!(t1.h, vec![vec![1, 1], vec![1, 1]]);
        assert_eq!(diamond_invariants(&t1).chi, 0);
    }

    #[test]
    fn kummer_is_k3() {
        let k = kummer_hodge(2).unwrap();
        assert_eq!((k.get(1, 0), k.get(1, 1)), (0, 20));
        assert_eq!(
            diamond_invariants(&k),
            DiamondInvariants {
                chi: 24,
                chi_o: 2,
                sigma: -16
            }
        );
        assert_eq!(classify_cy2(&k), Cy2Verdict::K3);
        assert_eq!(kummer_hodge(3), Err(Error::UnsupportedDimension(3)));
    }

    #[test]
    fn odd_dimension_has_zero_signature() {
        for d in [1, 3, 5] {
            assert_eq!(diamond_invariants(&torus_hodge(d).unwrap()).sigma, 0);
        }
    }

    #[test]
    fn invalid_diamond() {
        let h = HodgeDiamond::new(vec![vec![1, 1, 1], vec![1, 12, 1], vec![1, 1, 1]]).unwrap();
        assert_eq!(classify_cy2(&h), Cy2Verdict::Invalid);
        assert!(HodgeDiamond::new(vec![vec![1, 2], vec![1, 1]]).is_err());
    }

    #[test]
    fn fixed_point_counts() {
        assert_eq!(fixed_points(&TorusSpec::cubic(2)).len(), 16);
        let one = fixed_points(&TorusSpec::cubic(1));
        assert_eq!(one.len(), 4);
        assert!(one.representatives[0].iter().all(Zero::is_zero));
    }

    #[test]
    fn a1_examples() {
        let u = a1_map(&[c(1), c(2)]);
        assert_eq!(u, [c(1), c(4), c(2)]);
        assert!(a1_equation(&u).is_zero());
        assert_eq!(a1_map(&[c(1), c(1)]), [c(1), c(1), c(1)]);
        let r = a1_chart_check(&[[c(1), c(2)], [c(0), c(0)]], 1e-12).unwrap();
        assert!(r.passed);
        assert_eq!(r.samples, 2);
    }
}
