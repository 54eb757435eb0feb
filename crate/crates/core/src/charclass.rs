//! Characteristic classes in terms of Chern classes.
//!
//! A class is a polynomial in `c_1, …, c_D` (`deg c_k = k`) truncated above
//! degree `D`. Formal Chern roots never appear: symmetric functions of the
//! roots are reached through power sums and Newton's identities.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::qseries::PuiseuxSeries;
use crate::rational::{fmt_rational, int, parse_rational, rat, Rational};

/// The truncated polynomial ring `Q[c_1, …, c_D] / (degree > D)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChernRing {
    pub dim_d: usize,
}

impl ChernRing {
    pub fn new(dim_d: usize) -> Result<Self> {
        if dim_d == 0 {
            return Err(Error::InvalidInput("D must be positive".into()));
        }
        Ok(Self { dim_d })
    }

    pub fn zero(self) -> ChernClass {
        ChernClass {
            dim_d: self.dim_d,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(self, c: Rational) -> ChernClass {
        let mut z = self.zero();
        z.insert(vec![0; self.dim_d], c);
        z
    }

    pub fn one(self) -> ChernClass {
        self.constant(Rational::one())
    }

    /// `c_k`, `1 ≤ k ≤ D`.
    pub fn c(self, k: usize) -> ChernClass {
        assert!(
            (1..=self.dim_d).contains(&k),
            "c_{k} outside 1..={}",
            self.dim_d
        );
        let mut e = vec![0; self.dim_d];
        e[k - 1] = 1;
        let mut z = self.zero();
        z.insert(e, Rational::one());
        z
    }

    /// Total Chern classes `c_1 … c_D` of the tangent bundle.
    pub fn tangent_classes(self) -> Vec<ChernClass> {
        (1..=self.dim_d).map(|k| self.c(k)).collect()
    }
}

/// An element of a [`ChernRing`]. Keys are exponent vectors of `c_1 … c_D`.
#[derive(Clone, PartialEq, Eq)]
pub struct ChernClass {
    dim_d: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

fn degree_of(e: &[u32]) -> usize {
    e.iter()
        .enumerate()
        .map(|(i, &m)| (i + 1) * m as usize)
        .sum()
}

impl ChernClass {
    fn insert(&mut self, e: Vec<u32>, c: Rational) {
        if c.is_zero() || degree_of(&e) > self.dim_d {
            return;
        }
        match self.terms.entry(e) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn ring(&self) -> ChernRing {
        ChernRing { dim_d: self.dim_d }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rational)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    /// Coefficient of a monomial given by its exponent vector.
    pub fn coeff(&self, e: &[u32]) -> Rational {
        self.terms.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&vec![0; self.dim_d])
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = self.ring().zero();
        for (k, v) in &self.terms {
            out.insert(k.clone(), v * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.ring().zero();
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let e: Vec<u32> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.insert(e, va * vb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(self.ring().one(), |acc, _| acc.mul(self))
    }

    /// The homogeneous part of degree `d`.
    pub fn degree_part(&self, d: usize) -> Self {
        let mut out = self.ring().zero();
        for (k, v) in &self.terms {
            if degree_of(k) == d {
                out.insert(k.clone(), v.clone());
            }
        }
        out
    }

    /// Adams operation on a Chern character: degree `d` scaled by `k^d`.
    /// `k = -1` gives the dual bundle.
    pub fn adams(&self, k: i64) -> Self {
        let mut out = self.ring().zero();
        for (e, v) in &self.terms {
            let d = degree_of(e) as u32;
            out.insert(e.clone(), v * int(k.pow(d)));
        }
        out
    }

    /// `exp(x)` for `x` without constant term.
    pub fn exp_nilpotent(&self) -> Self {
        assert!(
            self.constant_term().is_zero(),
            "exp needs a nilpotent argument"
        );
        let mut out = self.ring().one();
        let mut power = self.ring().one();
        for m in 1..=self.dim_d as i64 {
            power = power.mul(self).scale(&rat(1, m));
            out = out.add(&power);
        }
        out
    }

    /// `∫_Y`: pair the top-degree part with the Chern numbers.
    pub fn integrate(&self, m: &ManifoldData) -> Result<Rational> {
        if m.dim_d != self.dim_d {
            return Err(Error::InvalidInput(format!(
                "manifold has D = {}, class lives in D = {}",
                m.dim_d, self.dim_d
            )));
        }
        Ok(self
            .terms
            .iter()
            .filter(|(k, _)| degree_of(k) == self.dim_d)
            .map(|(k, v)| {
                v * m
                    .chern_numbers
                    .get(k)
                    .cloned()
                    .unwrap_or_else(Rational::zero)
            })
            .fold(Rational::zero(), |a, b| a + b))
    }
}

pub fn monomial_name(e: &[u32]) -> String {
    let mut s = String::new();
    for (i, &m) in e.iter().enumerate() {
        for _ in 0..m {
            s.push_str(&format!("c{}", i + 1));
        }
    }
    s
}

fn parse_monomial(s: &str, dim_d: usize) -> Result<Vec<u32>> {
    let bad = || Error::InvalidInput(format!("bad Chern monomial {s:?}"));
    let mut e = vec![0u32; dim_d];
    let mut rest = s.trim();
    if rest.is_empty() {
        return Err(bad());
    }
    while !rest.is_empty() {
        rest = rest.strip_prefix('c').ok_or_else(bad)?;
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        let k: usize = digits.parse().map_err(|_| bad())?;
        if k == 0 || k > dim_d {
            return Err(bad());
        }
        e[k - 1] += 1;
        rest = &rest[digits.len()..];
    }
    Ok(e)
}

impl fmt::Display for ChernClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        // by degree, then by monomial
        let mut items: Vec<_> = self.terms.iter().collect();
        items.sort_by_key(|(k, _)| (degree_of(k), std::cmp::Reverse((*k).clone())));
        let parts: Vec<String> = items
            .into_iter()
            .map(|(k, v)| {
                let name = monomial_name(k);
                if name.is_empty() {
                    fmt_rational(v)
                } else {
                    format!("{}*{}", fmt_rational(v), name)
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

impl fmt::Debug for ChernClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A manifold, seen only through its Chern numbers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifoldData {
    pub dim_d: usize,
    /// Top-degree monomials; absent ones integrate to zero.
    pub chern_numbers: BTreeMap<Vec<u32>, Rational>,
}

impl ManifoldData {
    pub fn new(
        dim_d: usize,
        numbers: impl IntoIterator<Item = (Vec<u32>, Rational)>,
    ) -> Result<Self> {
        let mut chern_numbers = BTreeMap::new();
        for (e, v) in numbers {
            if e.len() != dim_d || degree_of(&e) != dim_d {
                return Err(Error::InvalidInput(format!(
                    "{} is not a top-degree monomial for D = {dim_d}",
                    monomial_name(&e)
                )));
            }
            chern_numbers.insert(e, v);
        }
        Ok(Self {
            dim_d,
            chern_numbers,
        })
    }

    /// A K3 surface: `c_1 = 0`, `∫c_2 = 24`.
    pub fn k3() -> Self {
        Self::new(2, [(vec![0, 1], int(24)), (vec![2, 0], int(0))]).expect("valid data")
    }

    /// A complex torus: all Chern numbers vanish.
    pub fn torus(dim_d: usize) -> Self {
        Self {
            dim_d,
            chern_numbers: BTreeMap::new(),
        }
    }

    /// Parse `{"D": int, "chern_numbers": {"c2": 24, "c1c1": 0}}`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let dim_d = v
            .get("D")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidInput("missing integer field \"D\"".into()))?
            as usize;
        if dim_d == 0 {
            return Err(Error::InvalidInput("D must be positive".into()));
        }
        let map = match v.get("chern_numbers") {
            None => serde_json::Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                return Err(Error::InvalidInput(
                    "\"chern_numbers\" must be an object".into(),
                ))
            }
        };
        let mut numbers = Vec::new();
        for (k, val) in &map {
            let e = parse_monomial(k, dim_d)?;
            let r = match val {
                Value::Number(n) => parse_rational(&n.to_string())?,
                Value::String(s) => parse_rational(s)?,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "Chern number {k} is not a number"
                    )))
                }
            };
            numbers.push((e, r));
        }
        Self::new(dim_d, numbers)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn to_json(&self) -> Value {
        let numbers: serde_json::Map<String, Value> = self
            .chern_numbers
            .iter()
            .map(|(k, v)| (monomial_name(k), Value::String(fmt_rational(v))))
            .collect();
        serde_json::json!({"D": self.dim_d, "chern_numbers": numbers})
    }

    pub fn ring(&self) -> ChernRing {
        ChernRing { dim_d: self.dim_d }
    }
}

/// A (possibly virtual) bundle, recorded by its Chern character.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleClass {
    pub rank: i64,
    pub chern_character: ChernClass,
}

impl BundleClass {
    pub fn new(chern_character: ChernClass) -> Result<Self> {
        let r = chern_character.constant_term();
        if !r.is_integer() {
            return Err(Error::InvalidInput(format!("rank {r} is not an integer")));
        }
        let rank = i64::try_from(r.to_integer())
            .map_err(|_| Error::InvalidInput("rank too large".into()))?;
        Ok(Self {
            rank,
            chern_character,
        })
    }

    pub fn trivial(ring: ChernRing, rank: i64) -> Self {
        Self {
            rank,
            chern_character: ring.constant(int(rank)),
        }
    }

    pub fn tangent(ring: ChernRing) -> Self {
        Self {
            rank: ring.dim_d as i64,
            chern_character: chern_character(ring.dim_d as i64, &ring.tangent_classes()),
        }
    }

    pub fn cotangent(ring: ChernRing) -> Self {
        Self::tangent(ring).dual()
    }

    /// A line bundle with first Chern class `e`.
    pub fn line(e: &ChernClass) -> Self {
        Self {
            rank: 1,
            chern_character: e.exp_nilpotent(),
        }
    }

    /// `Σ_p (-1)^p Λ^p T*`, with `ch = Π(1 - e^{-y_j})`.
    pub fn euler(ring: ChernRing) -> Self {
        let lambdas = exterior_powers(&Self::cotangent(ring).chern_character, ring.dim_d);
        let ch = lambdas.iter().enumerate().fold(ring.zero(), |acc, (p, l)| {
            acc.add(&l.scale(&int(if p % 2 == 0 { 1 } else { -1 })))
        });
        Self {
            rank: 0,
            chern_character: ch,
        }
    }

    pub fn dual(&self) -> Self {
        Self {
            rank: self.rank,
            chern_character: self.chern_character.adams(-1),
        }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            rank: self.rank * other.rank,
            chern_character: self.chern_character.mul(&other.chern_character),
        }
    }
}

/// Power sums `p_1 … p_n` of the roots whose elementary symmetric functions
/// are `e_1, e_2, …` (missing ones are zero).
pub fn power_sums(elementary: &[ChernClass], ring: ChernRing, n: usize) -> Vec<ChernClass> {
    let e = |i: usize| {
        if i == 0 {
            ring.one()
        } else {
            elementary
                .get(i - 1)
                .cloned()
                .unwrap_or_else(|| ring.zero())
        }
    };
    let mut p: Vec<ChernClass> = vec![ring.zero()];
    for k in 1..=n {
        // p_k = Σ_{i<k} (-1)^{i-1} e_i p_{k-i} + (-1)^{k-1} k e_k
        let mut acc = e(k).scale(&int(if k % 2 == 1 { k as i64 } else { -(k as i64) }));
        for i in 1..k {
            let term = e(i).mul(&p[k - i]);
            acc = if i % 2 == 1 {
                acc.add(&term)
            } else {
                acc.sub(&term)
            };
        }
        p.push(acc);
    }
    p.remove(0);
    p
}

/// `ch(E) = r + Σ_k p_k / k!` for a bundle of rank `r` with Chern classes
/// `c_1(E), c_2(E), …`.
pub fn chern_character(rank: i64, chern_classes: &[ChernClass]) -> ChernClass {
    let ring = chern_classes
        .first()
        .map(ChernClass::ring)
        .expect("at least one Chern class determines the ring");
    let d = ring.dim_d;
    let p = power_sums(chern_classes, ring, d);
    let mut out = ring.constant(int(rank));
    let mut fact = Rational::one();
    for (k, pk) in p.iter().enumerate() {
        fact *= int(k as i64 + 1);
        out = out.add(&pk.scale(&fact.recip()));
    }
    out
}

/// `ch(Λ^p E)` for `p = 0..=max_p`, from `p·Λ^p = Σ_{i=1}^p (-1)^{i-1} ψ^i(E) Λ^{p-i}`.
pub fn exterior_powers(ch: &ChernClass, max_p: usize) -> Vec<ChernClass> {
    let ring = ch.ring();
    let adams: Vec<ChernClass> = (0..=max_p).map(|i| ch.adams(i as i64)).collect();
    let mut out = vec![ring.one()];
    for p in 1..=max_p {
        let mut acc = ring.zero();
        for i in 1..=p {
            let term = adams[i].mul(&out[p - i]);
            acc = if i % 2 == 1 {
                acc.add(&term)
            } else {
                acc.sub(&term)
            };
        }
        out.push(acc.scale(&rat(1, p as i64)));
    }
    out
}

/// `ch(S^p E)` for `p = 0..=max_p`, from `Σ_i (-1)^i Λ^i S^{p-i} = 0`.
pub fn symmetric_powers(ch: &ChernClass, rank: usize, max_p: usize) -> Vec<ChernClass> {
    let ring = ch.ring();
    let lambdas = exterior_powers(ch, rank);
    let mut out = vec![ring.one()];
    for p in 1..=max_p {
        let mut acc = ring.zero();
        for i in 1..=p.min(rank) {
            let term = lambdas[i].mul(&out[p - i]);
            acc = if i % 2 == 1 {
                acc.add(&term)
            } else {
                acc.sub(&term)
            };
        }
        out.push(acc);
    }
    out
}

/// Coefficients of a univariate power series `Σ_k a_k t^k`, `k < n`.
fn series_inverse(a: &[Rational]) -> Vec<Rational> {
    let n = a.len();
    let mut b = vec![Rational::zero(); n];
    b[0] = a[0].recip();
    for k in 1..n {
        let s = (1..=k).fold(Rational::zero(), |acc, i| acc + &a[i] * &b[k - i]);
        b[k] = -s * &b[0];
    }
    b
}

fn series_log(a: &[Rational]) -> Vec<Rational> {
    // (log a)' = a'/a, a_0 = 1
    let n = a.len();
    let inv = series_inverse(a);
    let da: Vec<Rational> = (1..n).map(|k| &a[k] * int(k as i64)).collect();
    let mut out = vec![Rational::zero(); n];
    for k in 1..n {
        let s = (0..k).fold(Rational::zero(), |acc, i| acc + &da[i] * &inv[k - 1 - i]);
        out[k] = s / int(k as i64);
    }
    out
}

/// `Td(Y) = Π_j y_j/(1 - e^{-y_j}) = exp(Σ_k a_k p_k)` with
/// `log(t/(1-e^{-t})) = Σ_k a_k t^k`.
pub fn todd_class(ring: ChernRing) -> ChernClass {
    let d = ring.dim_d;
    // (1 - e^{-t})/t = Σ_m (-1)^m t^m/(m+1)!
    let mut fact = Rational::one();
    let mut g = Vec::with_capacity(d + 1);
    for m in 0..=d {
        fact *= int(m as i64 + 1);
        let s = if m % 2 == 0 {
            Rational::one()
        } else {
            -Rational::one()
        };
        g.push(s / &fact);
    }
    let td1 = series_inverse(&g);
    let a = series_log(&td1);
    let p = power_sums(&ring.tangent_classes(), ring, d);
    let exponent = (1..=d).fold(ring.zero(), |acc, k| acc.add(&p[k - 1].scale(&a[k])));
    exponent.exp_nilpotent()
}

/// `∫_Y Td(Y) ch(E)`, exactly.
pub fn hrr_integral(m: &ManifoldData, e: &BundleClass) -> Result<Rational> {
    todd_class(m.ring()).mul(&e.chern_character).integrate(m)
}

/// `χ(E) = ∫_Y Td(Y) ch(E)`; `NonIntegral` if the result is not an integer,
/// which means the Chern numbers are inconsistent.
pub fn hrr_euler(m: &ManifoldData, e: &BundleClass) -> Result<Rational> {
    let v = hrr_integral(m, e)?;
    if !v.is_integer() {
        return Err(Error::NonIntegral(format!("∫ Td·ch = {v}")));
    }
    Ok(v)
}

/// A series in `q` and `y` (integer exponents) with [`ChernClass`]
/// coefficients, times `y^{-D/2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassSeries {
    pub dim_d: usize,
    /// Terms `q^a y^b`, known for `a < order`.
    pub terms: BTreeMap<(i64, i64), ChernClass>,
    pub order: i64,
}

impl ClassSeries {
    fn one(ring: ChernRing, order: i64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((0, 0), ring.one());
        Self {
            dim_d: ring.dim_d,
            terms,
            order,
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<(i64, i64), ChernClass> = BTreeMap::new();
        for (&(a1, b1), c1) in &self.terms {
            for (&(a2, b2), c2) in &other.terms {
                let a = a1 + a2;
                if a >= self.order {
                    break;
                }
                let prod = c1.mul(c2);
                let slot = terms
                    .entry((a, b1 + b2))
                    .or_insert_with(|| ChernRing { dim_d: self.dim_d }.zero());
                *slot = slot.add(&prod);
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Self {
            dim_d: self.dim_d,
            terms,
            order: self.order,
        }
    }

    /// `Σ_p x^p ch_p` with `x = sign · y^{y_step} q^{q_step}`.
    fn from_powers(
        ring: ChernRing,
        order: i64,
        chs: &[ChernClass],
        sign: i64,
        q_step: i64,
        y_step: i64,
    ) -> Self {
        let mut terms = BTreeMap::new();
        for (p, ch) in chs.iter().enumerate() {
            let a = q_step * p as i64;
            if a >= order || ch.is_zero() {
                continue;
            }
            let s = if sign < 0 && p % 2 == 1 {
                -Rational::one()
            } else {
                Rational::one()
            };
            terms.insert((a, y_step * p as i64), ch.scale(&s));
        }
        Self {
            dim_d: ring.dim_d,
            terms,
            order,
        }
    }
}

/// Chern character of
/// `y^{-D/2} ⊗_{n≥1} Λ_{-y q^{n-1}} T* ⊗ Λ_{-y^{-1} q^n} T ⊗ S_{q^n} T* ⊗ S_{q^n} T`,
/// through `q^order`.
pub fn elliptic_genus_bundle(ring: ChernRing, order: &Rational) -> ClassSeries {
    let n_order = order.ceil().to_integer();
    let n_order = i64::try_from(n_order).unwrap_or(i64::MAX).max(0);
    let d = ring.dim_d;
    let tangent = BundleClass::tangent(ring).chern_character;
    let cotangent = tangent.adams(-1);
    let lam_t = exterior_powers(&tangent, d);
    let lam_tstar = exterior_powers(&cotangent, d);
    let max_sym = n_order.max(0) as usize;
    let sym_t = symmetric_powers(&tangent, d, max_sym);
    let sym_tstar = symmetric_powers(&cotangent, d, max_sym);
    let mut out = ClassSeries::one(ring, n_order);
    for n in 1..=n_order.max(1) {
        if n - 1 < n_order {
            out = out.mul(&ClassSeries::from_powers(
                ring,
                n_order,
                &lam_tstar,
                -1,
                n - 1,
                1,
            ));
        }
        if n < n_order {
            out = out.mul(&ClassSeries::from_powers(ring, n_order, &lam_t, -1, n, -1));
            let s_steps = (n_order - 1) / n;
            let cap = (s_steps as usize).min(max_sym);
            out = out.mul(&ClassSeries::from_powers(
                ring,
                n_order,
                &sym_tstar[..=cap],
                1,
                n,
                0,
            ));
            out = out.mul(&ClassSeries::from_powers(
                ring,
                n_order,
                &sym_t[..=cap],
                1,
                n,
                0,
            ));
        }
    }
    out
}

/// `E_Y(τ,z) = χ(𝔼_{q,-y})`, applying Riemann-Roch coefficientwise.
pub fn geometric_elliptic_genus(m: &ManifoldData, order: &Rational) -> Result<PuiseuxSeries> {
    if !order.is_positive() {
        return Err(Error::InvalidInput("order must be positive".into()));
    }
    let ring = m.ring();
    let bundle = elliptic_genus_bundle(ring, order);
    let td = todd_class(ring);
    let shift = rat(-(ring.dim_d as i64), 2);
    let mut terms = Vec::new();
    for (&(a, b), ch) in &bundle.terms {
        let v = td.mul(ch).integrate(m)?;
        if !v.is_zero() {
            terms.push((int(a), int(b) + &shift, v));
        }
    }
    PuiseuxSeries::from_terms(terms, order)
}
