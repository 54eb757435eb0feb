//! Dedekind eta and the Jacobi theta functions.
//!
//! Conventions, with `q = e^{2πiτ}` and `y = e^{2πiz}`:
//!
//! ```text
//! ϑ1(τ,z) = -i Σ_n (-1)^n q^{(n+1/2)²/2} y^{n+1/2}
//! ϑ2(τ,z) =    Σ_n        q^{(n+1/2)²/2} y^{n+1/2}
//! ϑ3(τ,z) =    Σ_n        q^{n²/2}       y^n
//! ϑ4(τ,z) =    Σ_n (-1)^n q^{n²/2}       y^n
//! η(τ)    = q^{1/24} Π_{n≥1} (1 - q^n)
//! ```
//!
//! With these, `q^{1/8} y^{1/2} ϑ3(τ, z + τ/2) = ϑ2(τ, z)` and
//! `ϑ3(τ, z + 1/2) = ϑ4(τ, z)` hold term by term.
//!
//! Series coefficients are kept rational. The constant `-i` in front of `ϑ1`
//! (and any power of `i` picked up by half-period shifts) is carried
//! separately as a [`Phase`]. In partition functions theta functions enter
//! as `|ϑ|²`, where the phase cancels against its conjugate.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qseries::{ComplexPoint, PuiseuxSeries, Q_DEN};
use crate::rational::{ceil_units, to_f64, Rational};

/// Which of the four Jacobi theta functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ThetaIndex(u8);

impl ThetaIndex {
    pub const ONE: Self = Self(1);
    pub const TWO: Self = Self(2);
    pub const THREE: Self = Self(3);
    pub const FOUR: Self = Self(4);
    pub const ALL: [Self; 4] = [Self::ONE, Self::TWO, Self::THREE, Self::FOUR];

    pub fn new(k: u8) -> Result<Self> {
        if (1..=4).contains(&k) {
            Ok(Self(k))
        } else {
            Err(Error::InvalidInput(format!(
                "theta index must be in 1..=4, got {k}"
            )))
        }
    }

    pub fn k(self) -> u8 {
        self.0
    }

    /// Characteristic shift `c` in `n + c`: 1/2 for ϑ1, ϑ2 and 0 otherwise.
    fn half_shift(self) -> bool {
        matches!(self.0, 1 | 2)
    }

    fn alternating(self) -> bool {
        matches!(self.0, 1 | 4)
    }
}

impl TryFrom<u8> for ThetaIndex {
    type Error = Error;
    fn try_from(k: u8) -> Result<Self> {
        Self::new(k)
    }
}

impl From<ThetaIndex> for u8 {
    fn from(t: ThetaIndex) -> u8 {
        t.0
    }
}

/// A power of `i`, `i^k` with `k mod 4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Self = Self(0);
    pub const I: Self = Self(1);
    pub const MINUS_ONE: Self = Self(2);
    pub const MINUS_I: Self = Self(3);

    pub fn from_power(k: i64) -> Self {
        Self(k.rem_euclid(4) as u8)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn mul(self, other: Self) -> Self {
        Self((self.0 + other.0) % 4)
    }

    pub fn pow(self, n: u32) -> Self {
        Self(((self.0 as u32 * n) % 4) as u8)
    }

    pub fn conj(self) -> Self {
        Self((4 - self.0) % 4)
    }

    /// `Some(±1)` for a real phase.
    pub fn as_sign(self) -> Option<i64> {
        match self.0 {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["1", "i", "-1", "-i"][self.0 as usize])
    }
}

/// `i^phase · series`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasedSeries {
    pub phase: Phase,
    pub series: PuiseuxSeries,
}

impl PhasedSeries {
    pub fn eval(&self, p: &ComplexPoint) -> Complex64 {
        self.phase.to_complex() * self.series.eval(p).value
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            phase: self.phase.mul(other.phase),
            series: self.series.mul(&other.series),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        Self {
            phase: self.phase.pow(n),
            series: self.series.pow(n),
        }
    }
}

/// The argument `z + (tau_halves/2)·τ + halves/2` at which a theta function
/// is evaluated. Spectral flow moves between these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct ThetaArgument {
    pub tau_halves: i64,
    pub halves: i64,
}

impl ThetaArgument {
    pub const ORIGIN: Self = Self {
        tau_halves: 0,
        halves: 0,
    };

    pub fn shifted(self, tau_halves: i64, halves: i64) -> Self {
        Self {
            tau_halves: self.tau_halves + tau_halves,
            halves: self.halves + halves,
        }
    }
}

/// `η(τ)` to `O(q^order)`, by direct expansion of the product.
pub fn eta_series(order: &Rational) -> PuiseuxSeries {
    let units = ceil_units(order, Q_DEN);
    // the product part needs integer powers below order - 1/24
    let prod_order = units - 1;
    let mut coeffs = vec![Rational::zero(); ((prod_order + Q_DEN - 1) / Q_DEN).max(0) as usize];
    if !coeffs.is_empty() {
        coeffs[0] = Rational::one();
    }
    let len = coeffs.len();
    for n in 1..len {
        // multiply by (1 - q^n) in place, high degrees first
        for d in (n..len).rev() {
            let sub = coeffs[d - n].clone();
            coeffs[d] -= sub;
        }
    }
    let terms = coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(d, c)| ((d as i64 * Q_DEN + 1, 0), c))
        .collect();
    PuiseuxSeries::from_units(terms, units)
}

/// `ϑ_k(τ, z)` to `O(q^order)`.
pub fn theta_series(k: ThetaIndex, order: &Rational) -> PhasedSeries {
    theta_series_at(k, ThetaArgument::ORIGIN, order)
}

/// `ϑ_k(τ, z + ατ + β)` to `O(q^order)`, summed directly from the defining
/// series with every index whose exponent lies below the order.
pub fn theta_series_at(k: ThetaIndex, arg: ThetaArgument, order: &Rational) -> PhasedSeries {
    let units = ceil_units(order, Q_DEN);
    let parity = i64::from(k.half_shift());
    let ta = arg.tau_halves;
    let hb = arg.halves;
    // m = 2(n + c); q-exponent (m² + 2·ta·m)/8 = 3(m² + 2·ta·m)/24
    let reach = ((8.0 * (units.max(0) as f64 / Q_DEN as f64) + (ta * ta) as f64).sqrt()) as i64
        + ta.abs()
        + 2;
    let mut terms = std::collections::BTreeMap::new();
    let mut m = -reach;
    if m.rem_euclid(2) != parity {
        m += 1;
    }
    while m <= reach {
        let q_units = 3 * (m * m + 2 * ta * m);
        if q_units < units {
            let n = (m - parity) / 2;
            let mut sign = 1i64;
            if k.alternating() && n.rem_euclid(2) == 1 {
                sign = -sign;
            }
            // e^{2πiβ(n+c)} = i^{hb·m} = i^{hb·parity} · (-1)^{hb·(m-parity)/2}
            if (hb * (m - parity) / 2).rem_euclid(2) == 1 {
                sign = -sign;
            }
            terms.insert((q_units, m), Rational::from_integer(sign.into()));
        }
        m += 2;
    }
    let mut phase = Phase::from_power(hb * parity);
    if k == ThetaIndex::ONE {
        phase = phase.mul(Phase::MINUS_I);
    }
    PhasedSeries {
        phase,
        series: PuiseuxSeries::from_units(terms, units),
    }
}

/// `ϑ_k(τ, 0)` as a real series. It vanishes identically for `k = 1`.
pub fn theta_null_series(k: ThetaIndex, order: &Rational) -> PuiseuxSeries {
    theta_series(k, order).series.at_y_one()
}

// ---------------------------------------------------------------------------
// numeric evaluation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluated {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Partial theta sum over `|n| ≤ terms` with a Gaussian tail bound.
pub fn theta_eval(k: ThetaIndex, p: &ComplexPoint, terms: u32) -> Evaluated {
    let c = if k.half_shift() { 0.5 } else { 0.0 };
    let n_max = terms as i64;
    let mut value = Complex64::new(0.0, 0.0);
    for n in -n_max..=n_max {
        let x = n as f64 + c;
        let sign = if k.alternating() && n.rem_euclid(2) == 1 {
            -1.0
        } else {
            1.0
        };
        value += p.q_pow(x * x / 2.0) * p.y_pow(x) * sign;
    }
    if k == ThetaIndex::ONE {
        value *= Complex64::new(0.0, -1.0);
    }
    Evaluated {
        value,
        tail_bound: theta_tail(p, n_max as f64 + 1.0, c),
    }
}

/// `Σ_{|n| > N}` of `|q|^{x²/2}|y|^x` bounded by two geometric series.
fn theta_tail(p: &ComplexPoint, start: f64, c: f64) -> f64 {
    let s = PI * p.tau.im;
    let w = 2.0 * PI * p.z.im;
    let mut total = 0.0;
    for dir in [1.0, -1.0] {
        let x0 = dir * (start + c) - if dir < 0.0 { 2.0 * c } else { 0.0 };
        let mag = |x: f64| (-s * x * x - w * x).exp();
        let first = mag(x0);
        let ratio = mag(x0 + dir) / first.max(f64::MIN_POSITIVE);
        total += if ratio < 1.0 {
            first / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
    }
    total
}

/// Number of terms for `theta_eval` that leaves a negligible tail at `p`.
pub fn theta_terms_for(p: &ComplexPoint) -> u32 {
    let center = (p.z.im / p.tau.im).abs();
    let width = (60.0 / (PI * p.tau.im)).sqrt();
    (center + width + 3.0).ceil() as u32
}

pub fn theta_value(k: ThetaIndex, p: &ComplexPoint) -> Complex64 {
    theta_eval(k, p, theta_terms_for(p)).value
}

/// `η(τ)` numerically, the product taken until `|q|^n` drops below `1e-18`.
pub fn eta_value(tau: Complex64) -> Complex64 {
    let p = ComplexPoint {
        tau,
        z: Complex64::zero(),
    };
    let mut prod = p.q_pow(1.0 / 24.0);
    let qa = p.abs_q();
    let mut n = 1.0;
    while qa.powf(n) > 1e-18 {
        prod *= Complex64::one() - p.q_pow(n);
        n += 1.0;
    }
    prod
}

// ---------------------------------------------------------------------------
// weak Jacobi form transformation test
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct JacobiFormSpec {
    pub weight: i32,
    pub index: Rational,
}

impl JacobiFormSpec {
    pub fn new(weight: i32, index: Rational) -> Result<Self> {
        if index < Rational::zero() {
            return Err(Error::InvalidInput(
                "Jacobi index must be non-negative".into(),
            ));
        }
        Ok(Self { weight, index })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformCheck {
    pub transformation: String,
    pub tau: [f64; 2],
    pub z: [f64; 2],
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformReport {
    pub max_deviation: f64,
    pub checks: Vec<TransformCheck>,
}

/// Checks `f(τ+1,z) = f`, `f(-1/τ, z/τ) = τ^k e^{2πimz²/τ} f` and
/// `f(τ, z+λτ+μ) = e^{-2πim(λ²τ+2λz)} f` for `(λ, μ) ∈ {0,1}²`.
///
/// Deviations are `|lhs - rhs| / max(1, |rhs|)`. Returns the full report, or
/// `ToleranceExceeded` naming the worst failing transformation.
pub fn jacobi_transform_check<F>(
    f: F,
    spec: &JacobiFormSpec,
    samples: &[ComplexPoint],
    tol: f64,
) -> Result<TransformReport>
where
    F: Fn(&ComplexPoint) -> Complex64,
{
    if samples.is_empty() {
        return Err(Error::InvalidInput("no sample points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let m = to_f64(&spec.index);
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut checks = Vec::new();
    for p in samples {
        let base = f(p);
        let (tau, z) = (p.tau, p.z);
        let mut record = |name: String, lhs: Complex64, rhs: Complex64| {
            let deviation = (lhs - rhs).norm() / rhs.norm().max(1.0);
            checks.push(TransformCheck {
                transformation: name,
                tau: [tau.re, tau.im],
                z: [z.re, z.im],
                deviation,
            });
        };
        let shifted = ComplexPoint::new(tau + 1.0, z)?;
        record("T: tau -> tau+1".into(), f(&shifted), base);

        let s_tau = -tau.inv();
        let s_pt = ComplexPoint::new(s_tau, z / tau)?;
        let factor = tau.powi(spec.weight) * (two_pi_i * m * z * z / tau).exp();
        record(
            "S: (tau,z) -> (-1/tau, z/tau)".into(),
            f(&s_pt),
            factor * base,
        );

        for lambda in 0..=1 {
            for mu in 0..=1 {
                let l = lambda as f64;
                let e_pt = ComplexPoint::new(tau, z + l * tau + mu as f64)?;
                let factor = (-two_pi_i * m * (l * l * tau + 2.0 * l * z)).exp();
                record(
                    format!("E: z -> z + {lambda}tau + {mu}"),
                    f(&e_pt),
                    factor * base,
                );
            }
        }
    }
    let worst = checks
        .iter()
        .max_by(|a, b| a.deviation.total_cmp(&b.deviation))
        .cloned()
        .expect("at least one check per sample");
    if !(worst.deviation <= tol) {
        return Err(Error::ToleranceExceeded {
            transformation: worst.transformation,
            tau: format!("{}+{}i", worst.tau[0], worst.tau[1]),
            z: format!("{}+{}i", worst.z[0], worst.z[1]),
            deviation: worst.deviation,
        });
    }
    Ok(TransformReport {
        max_deviation: worst.deviation,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    #[test]
    fn theta_index_range() {
        assert!(ThetaIndex::new(0).is_err());
        assert!(ThetaIndex::new(5).is_err());
        assert_eq!(ThetaIndex::new(3).unwrap(), ThetaIndex::THREE);
    }

    #[test]
    fn eta_leading_term() {
        let e = eta_series(&int(2));
        let first = e.terms().next().unwrap();
        assert_eq!((first.0, first.2.clone()), (rat(1, 24), int(1)));
        assert_eq!(e.coeff(&(int(1) + rat(1, 24))).unwrap()[&int(0)], int(-1));
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn theta3_first_levels() {
        let t = theta_series(ThetaIndex::THREE, &int(2)).series;
        let half = t.coeff(&rat(1, 2)).unwrap();
        assert_eq!(half.len(), 2);
        assert_eq!(half[&int(1)], int(1));
        assert_eq!(half[&int(-1)], int(1));
        assert_eq!(t.coeff(&int(0)).unwrap()[&int(0)], int(1));
    }

    #[test]
    fn theta2_at_zero() {
        let t = theta_null_series(ThetaIndex::TWO, &int(2));
        assert_eq!(t.coeff(&rat(1, 8)).unwrap()[&int(0)], int(2));
        assert_eq!(t.coeff(&rat(9, 8)).unwrap()[&int(0)], int(2));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn theta1_vanishes_at_origin() {
        for order in [1, 3, 7] {
            assert!(theta_null_series(ThetaIndex::ONE, &int(order)).is_zero());
        }
        let p = ComplexPoint::new(Complex64::new(0.0, 1.0), Complex64::zero()).unwrap();
        assert!(theta_value(ThetaIndex::ONE, &p).norm() < 1e-15);
    }

    #[test]
    fn phase_arithmetic() {
        assert_eq!(Phase::I.mul(Phase::I), Phase::MINUS_ONE);
        assert_eq!(Phase::MINUS_I.conj(), Phase::I);
        assert_eq!(Phase::I.mul(Phase::I.conj()).as_sign(), Some(1));
        assert_eq!(Phase::I.pow(3), Phase::MINUS_I);
    }
}
