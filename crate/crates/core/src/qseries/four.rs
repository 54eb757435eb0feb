use std::collections::BTreeMap;
use std::fmt::Write;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::{PuiseuxSeries, Q_DEN};
use crate::error::{Error, Result};
use crate::rational::{ceil_units, fmt_rational, rat, units_of, Rational};

/// Exact series in `(q, y, q̄, ȳ)` with box truncation in `q` and `q̄`.
///
/// q- and q̄-exponents are multiples of `1/den`, y- and ȳ-exponents multiples
/// of `1/2`. Besides the two truncation orders the series records a lower
/// bound (`floor`) on the q- and q̄-exponents of *every* term, known or not;
/// products need it because a term can be unknown in one direction while
/// sitting low in the other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FourSeries {
    den: i64,
    terms: BTreeMap<[i64; 4], Rational>,
    order: [i64; 2],
    floor: [i64; 2],
}

impl FourSeries {
    pub fn zero(den: i64, order_q: &Rational, order_qbar: &Rational) -> Self {
        let order = [ceil_units(order_q, den), ceil_units(order_qbar, den)];
        Self {
            den,
            terms: BTreeMap::new(),
            order,
            floor: order,
        }
    }

    /// Series in `q` and `q̄` alone, e.g. a lattice theta numerator.
    ///
    /// Every exponent must be non-negative and a multiple of `1/den`.
    pub fn from_q_qbar_terms<I>(
        den: i64,
        terms: I,
        order_q: &Rational,
        order_qbar: &Rational,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (Rational, Rational, Rational)>,
    {
        let mut s = Self::zero(den, order_q, order_qbar);
        s.floor = [0, 0];
        for (a, b, c) in terms {
            let off =
                |r: &Rational| Error::ExponentOffLattice(format!("{r} with denominator {den}"));
            let ua = units_of(&a, den).ok_or_else(|| off(&a))?;
            let ub = units_of(&b, den).ok_or_else(|| off(&b))?;
            if ua < 0 || ub < 0 {
                return Err(Error::InvalidInput(
                    "negative exponent in q/q̄ series".into(),
                ));
            }
            s.insert([ua, 0, ub, 0], c);
        }
        Ok(s)
    }

    /// `f(q, y) · g(q̄, ȳ)` for a holomorphic and an antiholomorphic factor.
    pub fn from_outer(hol: &PuiseuxSeries, antihol: &PuiseuxSeries) -> Self {
        let floor_of = |s: &PuiseuxSeries| {
            s.unit_terms()
                .keys()
                .next()
                .map_or(s.order_units(), |&(a, _)| a)
        };
        let mut out = Self {
            den: Q_DEN,
            terms: BTreeMap::new(),
            order: [hol.order_units(), antihol.order_units()],
            floor: [floor_of(hol), floor_of(antihol)],
        };
        for (&(a, b), c) in hol.unit_terms() {
            for (&(ab, bb), cb) in antihol.unit_terms() {
                out.insert([a, b, ab, bb], c * cb);
            }
        }
        out
    }

    fn insert(&mut self, key: [i64; 4], c: Rational) {
        if key[0] >= self.order[0] || key[2] >= self.order[1] || c.is_zero() {
            return;
        }
        let e = self.terms.entry(key).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn order_q(&self) -> Rational {
        rat(self.order[0], self.den)
    }

    pub fn order_qbar(&self) -> Rational {
        rat(self.order[1], self.den)
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

    /// Terms as `([q, y, q̄, ȳ] exponents, coeff)` in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = ([Rational; 4], &Rational)> + '_ {
        let den = self.den;
        self.terms.iter().map(move |(k, c)| {
            (
                [rat(k[0], den), rat(k[1], 2), rat(k[2], den), rat(k[3], 2)],
                c,
            )
        })
    }

    pub fn rescale(&self, den: i64) -> Self {
        assert!(den % self.den == 0, "rescale must refine the exponent grid");
        let f = den / self.den;
        Self {
            den,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| ([k[0] * f, k[1], k[2] * f, k[3]], c.clone()))
                .collect(),
            order: [self.order[0] * f, self.order[1] * f],
            floor: [self.floor[0] * f, self.floor[1] * f],
        }
    }

    fn common_den(&self, other: &Self) -> i64 {
        self.den.lcm(&other.den)
    }

    fn restricted(&self, order: [i64; 2]) -> BTreeMap<[i64; 4], Rational> {
        self.terms
            .iter()
            .filter(|(k, _)| k[0] < order[0] && k[2] < order[1])
            .map(|(k, c)| (*k, c.clone()))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let den = self.common_den(other);
        let (a, b) = (self.rescale(den), other.rescale(den));
        let order = [a.order[0].min(b.order[0]), a.order[1].min(b.order[1])];
        let mut out = Self {
            den,
            terms: a.restricted(order),
            order,
            floor: [a.floor[0].min(b.floor[0]), a.floor[1].min(b.floor[1])],
        };
        for (k, c) in b.terms {
            out.insert(k, c);
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = self.clone();
        if s.is_zero() {
            out.terms.clear();
        } else {
            for c in out.terms.values_mut() {
                *c *= s;
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let den = self.common_den(other);
        let (a, b) = (self.rescale(den), other.rescale(den));
        let order = [
            (a.order[0] + b.floor[0].min(0)).min(b.order[0] + a.floor[0].min(0)),
            (a.order[1] + b.floor[1].min(0)).min(b.order[1] + a.floor[1].min(0)),
        ];
        let mut acc: std::collections::HashMap<[i64; 4], Rational> =
            std::collections::HashMap::new();
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                let q = ka[0] + kb[0];
                if q >= order[0] {
                    break;
                }
                let qb = ka[2] + kb[2];
                if qb >= order[1] {
                    continue;
                }
                *acc.entry([q, ka[1] + kb[1], qb, ka[3] + kb[3]])
                    .or_insert_with(Rational::zero) += ca * cb;
            }
        }
        Self {
            den,
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            order,
            floor: [a.floor[0] + b.floor[0], a.floor[1] + b.floor[1]],
        }
    }

    /// Specialise to `z̄ = 0`.
    pub fn at_ybar_one(&self) -> Self {
        let mut out = Self {
            den: self.den,
            terms: BTreeMap::new(),
            order: self.order,
            floor: self.floor,
        };
        for (k, c) in &self.terms {
            out.insert([k[0], k[1], k[2], 0], c.clone());
        }
        out
    }

    /// Specialise to `z = z̄ = 0`.
    pub fn at_y_ybar_one(&self) -> Self {
        let mut out = self.at_ybar_one();
        let terms = std::mem::take(&mut out.terms);
        for (k, c) in terms {
            out.insert([k[0], 0, k[2], 0], c);
        }
        out
    }

    /// The part with q̄- and ȳ-exponent zero, as a holomorphic series.
    ///
    /// Fails with `HolomorphyFailure` if any other antiholomorphic term is
    /// present, or if the q̄⁰ coefficient is not determined (`order_qbar <= 0`).
    pub fn holomorphic_part(&self) -> Result<PuiseuxSeries> {
        if self.order[1] <= 0 {
            return Err(Error::HolomorphyFailure(
                "q̄⁰ lies beyond the truncation order".into(),
            ));
        }
        if let Some((k, c)) = self.terms.iter().find(|(k, _)| k[2] != 0 || k[3] != 0) {
            return Err(Error::HolomorphyFailure(format!(
                "term {} q^{} y^{} qbar^{} ybar^{}",
                c,
                rat(k[0], self.den),
                rat(k[1], 2),
                rat(k[2], self.den),
                rat(k[3], 2)
            )));
        }
        let to24 = |u: i64| {
            units_of(&rat(u, self.den), Q_DEN)
                .ok_or_else(|| Error::ExponentOffLattice(rat(u, self.den).to_string()))
        };
        let mut terms = BTreeMap::new();
        for (k, c) in &self.terms {
            terms.insert((to24(k[0])?, k[1]), c.clone());
        }
        let order = ceil_units(&self.order_q(), Q_DEN);
        Ok(PuiseuxSeries::from_units(terms, order))
    }

    /// Coefficient of `q^a q̄^b` summed into a map `(y, ȳ) → c`.
    pub fn coeff(&self, a: &Rational, b: &Rational) -> BTreeMap<(Rational, Rational), Rational> {
        let (Some(ua), Some(ub)) = (units_of(a, self.den), units_of(b, self.den)) else {
            return BTreeMap::new();
        };
        self.terms
            .iter()
            .filter(|(k, _)| k[0] == ua && k[2] == ub)
            .map(|(k, c)| ((rat(k[1], 2), rat(k[3], 2)), c.clone()))
            .collect()
    }

    /// Compare on the common truncation box; `None` means they agree.
    pub fn first_mismatch(&self, other: &Self) -> Option<String> {
        let den = self.common_den(other);
        let (a, b) = (self.rescale(den), other.rescale(den));
        let order = [a.order[0].min(b.order[0]), a.order[1].min(b.order[1])];
        let (ta, tb) = (a.restricted(order), b.restricted(order));
        let keys: std::collections::BTreeSet<_> = ta.keys().chain(tb.keys()).copied().collect();
        let zero = Rational::zero();
        for k in keys {
            let (ca, cb) = (ta.get(&k).unwrap_or(&zero), tb.get(&k).unwrap_or(&zero));
            if ca != cb {
                return Some(format!(
                    "coefficient of q^{} y^{} qbar^{} ybar^{}: {} vs {}",
                    rat(k[0], den),
                    rat(k[1], 2),
                    rat(k[2], den),
                    rat(k[3], 2),
                    ca,
                    cb
                ));
            }
        }
        None
    }

    /// Smallest box order shared with `other`.
    pub fn common_orders(&self, other: &Self) -> (Rational, Rational) {
        (
            self.order_q().min(other.order_q()),
            self.order_qbar().min(other.order_qbar()),
        )
    }

    pub fn truncate(&self, order_q: &Rational, order_qbar: &Rational) -> Self {
        let order = [
            ceil_units(order_q, self.den).min(self.order[0]),
            ceil_units(order_qbar, self.den).min(self.order[1]),
        ];
        Self {
            den: self.den,
            terms: self.restricted(order),
            order,
            floor: self.floor,
        }
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    /// Canonical text: `q y qbar ybar coeff` per line, sorted.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (e, c) in self.terms() {
            writeln!(
                out,
                "{} {} {} {} {}",
                fmt_rational(&e[0]),
                fmt_rational(&e[1]),
                fmt_rational(&e[2]),
                fmt_rational(&e[3]),
                fmt_rational(c)
            )
            .expect("writing to a String cannot fail");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "order_q": fmt_rational(&self.order_q()),
            "order_qbar": fmt_rational(&self.order_qbar()),
            "terms": self
                .terms()
                .map(|(e, c)| {
                    let mut row: Vec<String> = e.iter().map(fmt_rational).collect();
                    row.push(fmt_rational(c));
                    row
                })
                .collect::<Vec<_>>(),
        })
    }

    /// Numeric value at `(τ, z)` with `q̄ = conj(q)`, `ȳ = conj(y)`.
    pub fn eval(&self, p: &super::ComplexPoint) -> num_complex::Complex64 {
        let mut v = num_complex::Complex64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            let a = k[0] as f64 / self.den as f64;
            let b = k[2] as f64 / self.den as f64;
            let hol = p.q_pow(a) * p.y_pow(k[1] as f64 / 2.0);
            let anti = (p.q_pow(b) * p.y_pow(k[3] as f64 / 2.0)).conj();
            v += hol * anti * c.to_f64().unwrap_or(f64::NAN);
        }
        v
    }
}
