//! Exact bivariate series in `q = e^{2πiτ}` and `y = e^{2πiz}`.
//!
//! [`PuiseuxSeries`] stores a sparse map from `(q-exponent, y-exponent)` to a
//! rational coefficient together with an explicit truncation order in `q`:
//! every stored q-exponent is strictly below the order and nothing is known
//! about exponents at or above it. Exponents live on the fixed lattice
//! `(1/24)Z × (1/2)Z`, which holds `η`, all four theta functions and the
//! `y^{-D/2}` prefactor of the elliptic genus. Off-lattice input is rejected.
//!
//! Truncation only ever shrinks through arithmetic. Products use the
//! leading-exponent aware bound `min(A + min(v_b, 0), B + min(v_a, 0))`.
//!
//! [`FourSeries`] is the non-holomorphic companion in `(q, y, q̄, ȳ)` used for
//! partition functions, with rational exponents on a per-series grid.

mod eval;
mod four;
mod text;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{ceil_units, int, rat, units_of, Rational};

pub use eval::{ComplexPoint, EvalResult};
pub use four::FourSeries;

/// Denominator of the q-exponent lattice.
pub const Q_DEN: i64 = 24;
/// Denominator of the y-exponent lattice.
pub const Y_DEN: i64 = 2;

/// Default truncation order used by the command line tools.
pub fn default_order() -> Rational {
    int(10)
}

/// Exact truncated series `Σ c_{a,b} q^a y^b + O(q^order)`.
///
/// Keys are stored in lattice units: `a = qa/24`, `b = yb/2`.
#[derive(Clone, PartialEq, Eq)]
pub struct PuiseuxSeries {
    terms: BTreeMap<(i64, i64), Rational>,
    order: i64,
}

fn q_units(r: &Rational) -> Result<i64> {
    units_of(r, Q_DEN).ok_or_else(|| Error::ExponentOffLattice(format!("q^{r}")))
}

fn y_units(r: &Rational) -> Result<i64> {
    units_of(r, Y_DEN).ok_or_else(|| Error::ExponentOffLattice(format!("y^{r}")))
}

pub(crate) fn q_rat(u: i64) -> Rational {
    rat(u, Q_DEN)
}

pub(crate) fn y_rat(u: i64) -> Rational {
    rat(u, Y_DEN)
}

impl PuiseuxSeries {
    /// The zero series known to `O(q^order)`. Orders off the lattice are
    /// rounded up, which loses nothing since no term can sit between.
    pub fn zero(order: &Rational) -> Self {
        Self {
            terms: BTreeMap::new(),
            order: ceil_units(order, Q_DEN),
        }
    }

    pub fn one(order: &Rational) -> Self {
        Self::constant(Rational::one(), order)
    }

    pub fn constant(c: Rational, order: &Rational) -> Self {
        let mut s = Self::zero(order);
        s.insert_units(0, 0, c);
        s
    }

    pub fn monomial(
        c: Rational,
        q_exp: &Rational,
        y_exp: &Rational,
        order: &Rational,
    ) -> Result<Self> {
        let mut s = Self::zero(order);
        s.insert_units(q_units(q_exp)?, y_units(y_exp)?, c);
        Ok(s)
    }

    /// Builds a series from `(q_exp, y_exp, coeff)` triples; like terms merge.
    pub fn from_terms<I>(terms: I, order: &Rational) -> Result<Self>
    where
        I: IntoIterator<Item = (Rational, Rational, Rational)>,
    {
        let mut s = Self::zero(order);
        for (a, b, c) in terms {
            s.insert_units(q_units(&a)?, y_units(&b)?, c);
        }
        Ok(s)
    }

    pub(crate) fn from_units(terms: BTreeMap<(i64, i64), Rational>, order: i64) -> Self {
        let mut s = Self {
            terms: BTreeMap::new(),
            order,
        };
        for ((a, b), c) in terms {
            s.insert_units(a, b, c);
        }
        s
    }

    /// Adds `c q^{a/24} y^{b/2}`; silently drops terms at or above the order.
    pub(crate) fn insert_units(&mut self, a: i64, b: i64, c: Rational) {
        if a >= self.order || c.is_zero() {
            return;
        }
        match self.terms.entry((a, b)) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn order(&self) -> Rational {
        q_rat(self.order)
    }

    pub(crate) fn order_units(&self) -> i64 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical `(q, y)` order as `(q_exp, y_exp, coeff)`.
    pub fn terms(&self) -> impl Iterator<Item = (Rational, Rational, &Rational)> + '_ {
        self.terms
            .iter()
            .map(|(&(a, b), c)| (q_rat(a), y_rat(b), c))
    }

    pub(crate) fn unit_terms(&self) -> &BTreeMap<(i64, i64), Rational> {
        &self.terms
    }

    /// Smallest stored q-exponent.
    pub fn valuation(&self) -> Option<Rational> {
        self.min_q_units().map(q_rat)
    }

    fn min_q_units(&self) -> Option<i64> {
        self.terms.keys().next().map(|&(a, _)| a)
    }

    /// Leading q-exponent clamped at zero, as used by the truncation rule.
    /// An empty series only contains terms at or above its order.
    fn clamped_valuation(&self) -> i64 {
        self.min_q_units().unwrap_or(self.order).min(0)
    }

    /// Lower the truncation order; raising it is not possible.
    pub fn truncate(&self, order: &Rational) -> Self {
        self.truncate_units(ceil_units(order, Q_DEN))
    }

    pub(crate) fn truncate_units(&self, order: i64) -> Self {
        let order = order.min(self.order);
        Self {
            terms: self
                .terms
                .range(..(order, i64::MIN))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            order,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let mut out = self.truncate_units(order);
        for (&(a, b), c) in other.terms.range(..(order, i64::MIN)) {
            out.insert_units(a, b, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self {
                terms: BTreeMap::new(),
                order: self.order,
            };
        }
        Self {
            terms: self.terms.iter().map(|(k, c)| (*k, c * s)).collect(),
            order: self.order,
        }
    }

    /// Multiply by the exact monomial `c q^a y^b`; the order moves with `q^a`.
    pub fn mul_monomial(&self, c: &Rational, q_exp: &Rational, y_exp: &Rational) -> Result<Self> {
        let (da, db) = (q_units(q_exp)?, y_units(y_exp)?);
        Ok(self.shift_units(c, da, db))
    }

    pub(crate) fn shift_units(&self, c: &Rational, da: i64, db: i64) -> Self {
        Self {
            terms: if c.is_zero() {
                BTreeMap::new()
            } else {
                self.terms
                    .iter()
                    .map(|(&(a, b), v)| ((a + da, b + db), v * c))
                    .collect()
            },
            order: self.order + da,
        }
    }

    /// Cauchy product with exponent addition.
    pub fn mul(&self, other: &Self) -> Self {
        let order =
            (self.order + other.clamped_valuation()).min(other.order + self.clamped_valuation());
        let mut acc: BTreeMap<(i64, i64), Rational> = BTreeMap::new();
        for (&(a1, b1), c1) in &self.terms {
            for (&(a2, b2), c2) in &other.terms {
                let a = a1 + a2;
                if a >= order {
                    // keys are sorted by q, so later a2 only grow
                    break;
                }
                *acc.entry((a, b1 + b2)).or_insert_with(Rational::zero) += c1 * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Self { terms: acc, order }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut result = Self::one(&self.order());
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Multiplicative inverse known to `min(order, A - 2v)` where `A` is the
    /// input order and `v` its leading q-exponent.
    ///
    /// The lowest q-stratum must be a single y-monomial.
    pub fn invert(&self, order: &Rational) -> Result<Self> {
        let v = self
            .min_q_units()
            .ok_or_else(|| Error::NotInvertible("series has no known terms".into()))?;
        let lead: Vec<_> = self.terms.range((v, i64::MIN)..(v + 1, i64::MIN)).collect();
        if lead.len() != 1 {
            return Err(Error::NotInvertible(format!(
                "lowest q-stratum q^{} has {} y-monomials",
                q_rat(v),
                lead.len()
            )));
        }
        let (&(_, w), c) = lead[0];
        let c_inv = c.recip();
        let target = ceil_units(order, Q_DEN).min(self.order - 2 * v);
        // u = self / (c q^v y^w) = 1 + higher terms, known below self.order - v
        let levels = target + v;
        let mut u_levels: BTreeMap<i64, Vec<(i64, Rational)>> = BTreeMap::new();
        for (&(a, b), coeff) in &self.terms {
            let ua = a - v;
            if ua == 0 || ua >= levels {
                continue;
            }
            u_levels
                .entry(ua)
                .or_default()
                .push((b - w, coeff * &c_inv));
        }
        // inverse of u, level by level: inv_k = -Σ_{j>0} u_j inv_{k-j}
        let mut inv: BTreeMap<i64, BTreeMap<i64, Rational>> = BTreeMap::new();
        inv.insert(0, BTreeMap::from([(0, Rational::one())]));
        for k in 1..levels.max(0) {
            let mut level: BTreeMap<i64, Rational> = BTreeMap::new();
            for (&j, uj) in u_levels.range(1..=k) {
                let Some(prev) = inv.get(&(k - j)) else {
                    continue;
                };
                for (bu, cu) in uj {
                    for (bp, cp) in prev {
                        *level.entry(bu + bp).or_insert_with(Rational::zero) -= cu * cp;
                    }
                }
            }
            level.retain(|_, c| !c.is_zero());
            if !level.is_empty() {
                inv.insert(k, level);
            }
        }
        let mut out = Self {
            terms: BTreeMap::new(),
            order: target,
        };
        for (k, level) in inv {
            for (b, coeff) in level {
                out.insert_units(k - v, b - w, coeff * &c_inv);
            }
        }
        Ok(out)
    }

    /// The Laurent polynomial in `y` multiplying `q^{q_exp}`.
    pub fn coeff(&self, q_exp: &Rational) -> Result<BTreeMap<Rational, Rational>> {
        if q_exp >= &self.order() {
            return Err(Error::OrderExceeded {
                exponent: q_exp.to_string(),
                order: self.order().to_string(),
            });
        }
        let Some(a) = units_of(q_exp, Q_DEN) else {
            return Ok(BTreeMap::new());
        };
        Ok(self
            .terms
            .range((a, i64::MIN)..(a + 1, i64::MIN))
            .map(|(&(_, b), c)| (y_rat(b), c.clone()))
            .collect())
    }

    /// Specialise to `z = 0`: every `y^b` becomes 1 (principal branch).
    pub fn at_y_one(&self) -> Self {
        let mut out = Self {
            terms: BTreeMap::new(),
            order: self.order,
        };
        for (&(a, _), c) in &self.terms {
            out.insert_units(a, 0, c.clone());
        }
        out
    }

    /// Substitute `y ↦ (-1)^{b - b0} y` where every y-exponent `b` lies in
    /// the coset `b0 + Z`. Returns `b0` (in half units) so the caller can
    /// carry the leftover phase `e^{iπ b0}`.
    pub fn flip_y_sign(&self) -> Result<(i64, Self)> {
        let Some(&(_, b0)) = self.terms.keys().next() else {
            return Ok((0, self.clone()));
        };
        let parity = b0.rem_euclid(2);
        if self.terms.keys().any(|&(_, b)| b.rem_euclid(2) != parity) {
            return Err(Error::InvalidInput(
                "y-exponents mix integer and half-integer cosets".into(),
            ));
        }
        let terms = self
            .terms
            .iter()
            .map(|(&(a, b), c)| {
                let steps = (b - parity) / 2;
                let c = if steps.rem_euclid(2) == 0 {
                    c.clone()
                } else {
                    -c
                };
                ((a, b), c)
            })
            .collect();
        Ok((
            parity,
            Self {
                terms,
                order: self.order,
            },
        ))
    }

    /// True when every coefficient is an integer.
    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    /// Largest absolute y-exponent among stored terms.
    pub fn y_degree(&self) -> Rational {
        self.terms
            .keys()
            .map(|&(_, b)| b.abs())
            .max()
            .map_or_else(Rational::zero, y_rat)
    }

    /// Symmetric under `y ↦ y^{-1}` at every stored q-power.
    pub fn is_y_symmetric(&self) -> bool {
        self.terms
            .iter()
            .all(|(&(a, b), c)| self.terms.get(&(a, -b)) == Some(c))
    }

    /// Equal on the common range below `min(order_a, order_b)`.
    pub fn agrees_with(&self, other: &Self) -> bool {
        let order = self.order.min(other.order);
        self.truncate_units(order).terms == other.truncate_units(order).terms
    }

    pub fn max_abs_coeff(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

impl fmt::Debug for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self} + O(q^{})", self.order())
    }
}

impl fmt::Display for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            if a != 0 {
                write!(f, "q^{}", q_rat(a))?;
            }
            if b != 0 {
                write!(f, "y^{}", y_rat(b))?;
            }
        }
        Ok(())
    }
}

impl std::ops::Add for &PuiseuxSeries {
    type Output = PuiseuxSeries;
    fn add(self, rhs: &PuiseuxSeries) -> PuiseuxSeries {
        PuiseuxSeries::add(self, rhs)
    }
}

impl std::ops::Sub for &PuiseuxSeries {
    type Output = PuiseuxSeries;
    fn sub(self, rhs: &PuiseuxSeries) -> PuiseuxSeries {
        PuiseuxSeries::sub(self, rhs)
    }
}

impl std::ops::Mul for &PuiseuxSeries {
    type Output = PuiseuxSeries;
    fn mul(self, rhs: &PuiseuxSeries) -> PuiseuxSeries {
        PuiseuxSeries::mul(self, rhs)
    }
}

impl std::ops::Neg for &PuiseuxSeries {
    type Output = PuiseuxSeries;
    fn neg(self) -> PuiseuxSeries {
        PuiseuxSeries::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn poly(terms: &[(i64, i64, i64)], order: i64) -> PuiseuxSeries {
        PuiseuxSeries::from_terms(
            terms.iter().map(|&(a, b, c)| (int(a), int(b), int(c))),
            &int(order),
        )
        .unwrap()
    }

    #[test]
    fn additive_inverse_and_identity() {
        let one = PuiseuxSeries::one(&int(10));
        let minus = one.neg();
        assert!(one.add(&minus).is_zero());

        let s = poly(&[(0, 1, 2), (0, 0, 20), (0, -1, 2)], 10);
        assert_eq!(s.add(&PuiseuxSeries::zero(&int(10))), s);
    }

    #[test]
    fn like_terms_merge() {
        let m = PuiseuxSeries::monomial(int(1), &rat(1, 8), &rat(1, 2), &int(5)).unwrap();
        let two = m.add(&m);
        assert_eq!(two.coeff(&rat(1, 8)).unwrap()[&rat(1, 2)], int(2));
        assert_eq!(two.len(), 1);
    }

    #[test]
    fn product_of_binomials() {
        let a = poly(&[(0, 0, 1), (1, 0, 1)], 10);
        let b = poly(&[(0, 0, 1), (1, 0, -1)], 10);
        assert_eq!(a.mul(&b), poly(&[(0, 0, 1), (2, 0, -1)], 10));
    }

    #[test]
    fn partial_eta_product() {
        // (1-q)(1-q^2)(1-q^3) = 1 - q - q^2 + q^4 + q^5 - q^6; below q^6 the q^4 survives
        let mut p = PuiseuxSeries::one(&int(6));
        for n in 1..=3 {
            p = p.mul(&poly(&[(0, 0, 1), (n, 0, -1)], 6));
        }
        assert_eq!(
            p,
            poly(
                &[(0, 0, 1), (1, 0, -1), (2, 0, -1), (4, 0, 1), (5, 0, 1)],
                6
            )
        );
    }

    #[test]
    fn geometric_series_inverse() {
        let s = poly(&[(0, 0, 1), (1, 0, -1)], 8);
        let inv = s.invert(&int(8)).unwrap();
        let expected = poly(&(0..8).map(|k| (k, 0, 1)).collect::<Vec<_>>(), 8);
        assert_eq!(inv, expected);
    }

    #[test]
    fn monomial_inverse() {
        let m = PuiseuxSeries::monomial(int(2), &rat(1, 8), &rat(1, 2), &int(4)).unwrap();
        let inv = m.invert(&int(4)).unwrap();
        assert_eq!(inv.coeff(&rat(-1, 8)).unwrap()[&rat(-1, 2)], rat(1, 2));
        assert_eq!(inv.len(), 1);
    }

    #[test]
    fn inverse_order_accounts_for_leading_exponent() {
        let m = PuiseuxSeries::monomial(int(2), &rat(1, 8), &int(0), &int(4)).unwrap();
        let inv = m.invert(&int(10)).unwrap();
        assert_eq!(inv.order(), int(4) - rat(1, 4));
    }

    #[test]
    fn not_invertible_when_leading_stratum_is_not_a_monomial() {
        let s = poly(&[(0, 1, 1), (0, -1, 1)], 4);
        assert!(matches!(s.invert(&int(4)), Err(Error::NotInvertible(_))));
        assert!(matches!(
            PuiseuxSeries::zero(&int(3)).invert(&int(3)),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn coefficient_extraction() {
        let s = poly(&[(0, 0, 1), (1, 1, 1)], 5);
        assert_eq!(
            s.coeff(&int(1)).unwrap(),
            BTreeMap::from([(int(1), int(1))])
        );
        assert!(s.coeff(&rat(1, 2)).unwrap().is_empty());
        assert!(matches!(s.coeff(&int(5)), Err(Error::OrderExceeded { .. })));
    }

    #[test]
    fn off_lattice_exponents_are_rejected() {
        assert!(matches!(
            PuiseuxSeries::monomial(int(1), &rat(1, 5), &int(0), &int(1)),
            Err(Error::ExponentOffLattice(_))
        ));
        assert!(matches!(
            PuiseuxSeries::monomial(int(1), &int(0), &rat(1, 3), &int(1)),
            Err(Error::ExponentOffLattice(_))
        ));
    }

    #[test]
    fn truncation_is_min_for_nonnegative_valuations() {
        let a = poly(&[(0, 0, 1), (1, 0, 1)], 5);
        let b = poly(&[(0, 0, 1)], 3);
        assert_eq!(a.mul(&b).order(), int(3));
        assert_eq!(a.add(&b).order(), int(3));
    }

    #[test]
    fn negative_leading_exponent_shrinks_product_order() {
        let a = PuiseuxSeries::monomial(int(1), &rat(-1, 8), &int(0), &int(2)).unwrap();
        let b = poly(&[(0, 0, 1)], 2);
        assert_eq!(a.mul(&b).order(), int(2) - rat(1, 8));
    }

    #[test]
    fn sign_flip_tracks_half_integer_coset() {
        let s = PuiseuxSeries::from_terms(
            [(int(0), rat(1, 2), int(1)), (int(0), rat(-1, 2), int(1))],
            &int(1),
        )
        .unwrap();
        let (b0, flipped) = s.flip_y_sign().unwrap();
        assert_eq!(b0, 1);
        assert_eq!(flipped.coeff(&int(0)).unwrap()[&rat(-1, 2)], int(-1));
        assert_eq!(flipped.coeff(&int(0)).unwrap()[&rat(1, 2)], int(1));
    }
}
