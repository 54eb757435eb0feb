//! Charge lattices of toroidal theories.
//!
//! For a torus `R^{2D}/L` with B-field `B` the charge lattice is
//! `Γ = {(μ - Bλ + λ, μ - Bλ - λ)/√2 | λ ∈ L, μ ∈ L*}` inside `R^{2D,2D}`.
//! The factor `1/√2` is never formed: lattice vectors are stored as
//! `√2·γ = (v_L, v_R)` with rational entries, and every inner product carries
//! the matching `1/2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::modforms::eta_value;
use crate::qseries::FourSeries;
use crate::rational::{fmt_rational, int, parse_rational, to_f64, Rational};

/// Default cap on the number of lattice points an enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_ENUMERATION_CAP`].
pub const ENUMERATION_CAP_ENV: &str = "K3CFT_ENUM_CAP";

pub fn enumeration_cap() -> u64 {
    std::env::var(ENUMERATION_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUMERATION_CAP)
}

/// Torus data: generators of `L ⊂ R^{2D}` as matrix columns and a skew `B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusSpec {
    dim_d: usize,
    basis: Matrix,
    b_field: Matrix,
}

impl TorusSpec {
    pub fn new(dim_d: usize, basis: Matrix, b_field: Matrix) -> Result<Self> {
        let n = 2 * dim_d;
        if dim_d == 0 {
            return Err(Error::InvalidInput("D must be positive".into()));
        }
        for (name, m) in [("basis", &basis), ("B", &b_field)] {
            if m.rows() != n || m.cols() != n {
                return Err(Error::InvalidInput(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        if basis.determinant().is_zero() {
            return Err(Error::SingularBasis);
        }
        if !b_field.is_skew_symmetric() {
            return Err(Error::InvalidInput("B-field must be skew-symmetric".into()));
        }
        Ok(Self {
            dim_d,
            basis,
            b_field,
        })
    }

    /// `L = Z^{2D}` with vanishing B-field.
    pub fn cubic(dim_d: usize) -> Self {
        Self::new(
            dim_d,
            Matrix::identity(2 * dim_d),
            Matrix::zeros(2 * dim_d, 2 * dim_d),
        )
        .expect("the cubic torus is valid")
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn b_field(&self) -> &Matrix {
        &self.b_field
    }

    /// Parse `{"D": int, "basis": [[..]], "B": [[..]]}`. Entries are `"p/q"`
    /// strings or JSON numbers. A missing `"B"` means zero.
    pub fn from_json(v: &Value) -> Result<Self> {
        let dim_d = v
            .get("D")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidInput("missing integer field \"D\"".into()))?
            as usize;
        let n = 2 * dim_d;
        let basis = match v.get("basis") {
            Some(b) => parse_matrix(b)?,
            None => Matrix::identity(n),
        };
        let b_field = match v.get("B") {
            Some(b) => parse_matrix(b)?,
            None => Matrix::zeros(n, n),
        };
        Self::new(dim_d, basis, b_field)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn to_json(&self) -> Value {
        let m = |m: &Matrix| -> Vec<Vec<String>> {
            m.to_rows()
                .iter()
                .map(|r| r.iter().map(fmt_rational).collect())
                .collect()
        };
        serde_json::json!({"D": self.dim_d, "basis": m(&self.basis), "B": m(&self.b_field)})
    }
}

fn parse_entry(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(int(i))
            } else {
                parse_rational(&n.to_string())
            }
        }
        other => Err(Error::InvalidInput(format!(
            "matrix entry {other} is not a rational"
        ))),
    }
}

fn parse_matrix(v: &Value) -> Result<Matrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::InvalidInput("matrix must be an array of rows".into()))?;
    let rows = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| Error::InvalidInput("matrix row must be an array".into()))?
                .iter()
                .map(parse_entry)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(rows)
}

/// Generators of `L* = {α : α·λ ∈ Z for all λ ∈ L}` as columns.
pub fn dual_lattice(spec: &TorusSpec) -> Result<Matrix> {
    spec.basis
        .inverse()
        .map(|inv| inv.transpose())
        .ok_or(Error::SingularBasis)
}

/// An even self-dual lattice of signature `(2D, 2D)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NarainLattice {
    dim_d: usize,
    /// Columns are `√2·γ = (v_L; v_R)` for the generators: first the `2D`
    /// generators of `L` (μ = 0), then the `2D` generators of `L*` (λ = 0).
    gamma_basis: Matrix,
    gram: Matrix,
}

/// A charge vector with its lattice coordinates and norms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChargeVector {
    /// Integer coordinates: `2D` for `λ` in the `L` basis, then `2D` for `μ`
    /// in the `L*` basis.
    pub coords: Vec<i64>,
    /// `√2·γ_L = μ - Bλ + λ`.
    pub scaled_left: Vec<Rational>,
    /// `√2·γ_R = μ - Bλ - λ`.
    pub scaled_right: Vec<Rational>,
    /// `γ_L·γ_L`.
    pub norm_left: Rational,
    /// `γ_R·γ_R`.
    pub norm_right: Rational,
}

impl ChargeVector {
    /// `⟨γ,γ⟩ = γ_L² - γ_R²`, always an even integer.
    pub fn pairing(&self) -> Rational {
        &self.norm_left - &self.norm_right
    }

    /// `(γ_L² + γ_R²)/2`.
    pub fn energy(&self) -> Rational {
        (&self.norm_left + &self.norm_right) / int(2)
    }
}

/// Build `Γ` from torus data and check that it is even and unimodular.
pub fn narain_from_torus(spec: &TorusSpec) -> Result<NarainLattice> {
    let n = 2 * spec.dim_d;
    let dual = dual_lattice(spec)?;
    let mut gamma_basis = Matrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        let lambda = spec.basis.column(j);
        let b_lambda = spec.b_field.mul_vec(&lambda);
        for i in 0..n {
            gamma_basis[(i, j)] = &lambda[i] - &b_lambda[i];
            gamma_basis[(n + i, j)] = -&b_lambda[i] - &lambda[i];
        }
        let mu = dual.column(j);
        for i in 0..n {
            gamma_basis[(i, n + j)] = mu[i].clone();
            gamma_basis[(n + i, n + j)] = mu[i].clone();
        }
    }
    let lattice = NarainLattice::from_scaled_basis(spec.dim_d, gamma_basis)?;
    Ok(lattice)
}

impl NarainLattice {
    /// Wrap a basis of `√2·γ` columns, checking evenness and `|det Gram| = 1`.
    pub fn from_scaled_basis(dim_d: usize, gamma_basis: Matrix) -> Result<Self> {
        let n = 4 * dim_d;
        if gamma_basis.rows() != n || gamma_basis.cols() != n {
            return Err(Error::InvalidInput(format!("charge basis must be {n}x{n}")));
        }
        let gram = pairing_gram(dim_d, &gamma_basis);
        for i in 0..n {
            for j in 0..n {
                if !gram[(i, j)].is_integer() {
                    return Err(Error::InvariantViolation(format!(
                        "Gram entry ({i},{j}) = {} is not integral",
                        gram[(i, j)]
                    )));
                }
            }
            if !(gram[(i, i)].to_integer().is_even()) {
                return Err(Error::InvariantViolation(format!(
                    "Gram diagonal entry {i} = {} is odd",
                    gram[(i, i)]
                )));
            }
        }
        let det = gram.determinant();
        if det.abs() != Rational::one() {
            return Err(Error::InvariantViolation(format!(
                "|det Gram| = {} != 1",
                det.abs()
            )));
        }
        Ok(Self {
            dim_d,
            gamma_basis,
            gram,
        })
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn rank(&self) -> usize {
        4 * self.dim_d
    }

    pub fn scaled_basis(&self) -> &Matrix {
        &self.gamma_basis
    }

    /// Gram matrix of `⟨γ,γ'⟩ = γ_L·γ_L' - γ_R·γ_R'` on the generators.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn is_even(&self) -> bool {
        (0..self.rank()).all(|i| {
            (0..self.rank()).all(|j| self.gram[(i, j)].is_integer())
                && self.gram[(i, i)].to_integer().is_even()
        })
    }

    pub fn gram_determinant(&self) -> Rational {
        self.gram.determinant()
    }

    /// Quadratic forms `γ_L²/2` and `γ_R²/2` on integer coordinates.
    pub fn conformal_weight_forms(&self) -> (Matrix, Matrix) {
        let n = 2 * self.dim_d;
        let r = self.rank();
        let mut left = Matrix::zeros(r, r);
        let mut right = Matrix::zeros(r, r);
        let quarter = Rational::new(1.into(), 4.into());
        for i in 0..r {
            for j in 0..r {
                let (ci, cj) = (self.gamma_basis.column(i), self.gamma_basis.column(j));
                left[(i, j)] = dot(&ci[..n], &cj[..n]) * &quarter;
                right[(i, j)] = dot(&ci[n..], &cj[n..]) * &quarter;
            }
        }
        (left, right)
    }

    pub fn charge_vector(&self, coords: &[i64]) -> ChargeVector {
        let n = 2 * self.dim_d;
        let x: Vec<Rational> = coords.iter().map(|&c| int(c)).collect();
        let v = self.gamma_basis.mul_vec(&x);
        let half = Rational::new(1.into(), 2.into());
        let norm_left = dot(&v[..n], &v[..n]) * &half;
        let norm_right = dot(&v[n..], &v[n..]) * &half;
        ChargeVector {
            coords: coords.to_vec(),
            scaled_left: v[..n].to_vec(),
            scaled_right: v[n..].to_vec(),
            norm_left,
            norm_right,
        }
    }
}

fn pairing_gram(dim_d: usize, basis: &Matrix) -> Matrix {
    let n = 2 * dim_d;
    let r = 4 * dim_d;
    let half = Rational::new(1.into(), 2.into());
    let mut g = Matrix::zeros(r, r);
    for i in 0..r {
        let ci = basis.column(i);
        for j in i..r {
            let cj = basis.column(j);
            let v = (dot(&ci[..n], &cj[..n]) - dot(&ci[n..], &cj[n..])) * &half;
            g[(i, j)] = v.clone();
            g[(j, i)] = v;
        }
    }
    g
}

// ---------------------------------------------------------------------------
// enumeration
// ---------------------------------------------------------------------------

/// A rational quadratic form as `M/den` with integer `M`.
struct IntForm {
    m: Vec<Vec<i128>>,
    den: i128,
}

impl IntForm {
    fn new(a: &Matrix) -> Result<Self> {
        let too_big = || Error::InvalidInput("quadratic form entries too large".into());
        let den = a
            .to_rows()
            .iter()
            .flatten()
            .fold(num_bigint::BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let scale = Rational::from_integer(den.clone());
        let m = (0..a.rows())
            .map(|i| {
                (0..a.cols())
                    .map(|j| {
                        (&a[(i, j)] * &scale)
                            .to_integer()
                            .to_i128()
                            .ok_or_else(too_big)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            m,
            den: den.to_i128().ok_or_else(too_big)?,
        })
    }

    fn to_matrix(&self) -> Matrix {
        let den = Rational::from_integer(self.den.into());
        let rows = self
            .m
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| Rational::from_integer(v.into()) / &den)
                    .collect()
            })
            .collect();
        Matrix::from_rows(rows).expect("square form")
    }

    /// LLL-reduced form `UᵀMU` together with the unimodular `U`.
    fn lll_reduced(&self) -> Result<(IntForm, Vec<Vec<i64>>)> {
        const DELTA: f64 = 0.99;
        let n = self.m.len();
        let mut g = self.m.clone();
        let mut u: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
            .collect();
        let mut k = 1;
        while k < n {
            for j in (0..k).rev() {
                let (mu, _) = gram_schmidt(&g)?;
                let r = mu[k][j].round() as i64;
                if r == 0 {
                    continue;
                }
                let rr = r as i128;
                for row in g.iter_mut() {
                    row[k] -= rr * row[j];
                }
                let row_j = g[j].clone();
                for (a, b) in g[k].iter_mut().zip(&row_j) {
                    *a -= rr * b;
                }
                for row in u.iter_mut() {
                    row[k] -= r * row[j];
                }
            }
            let (mu, b) = gram_schmidt(&g)?;
            if b[k] < (DELTA - mu[k][k - 1].powi(2)) * b[k - 1] {
                g.swap(k, k - 1);
                for row in g.iter_mut() {
                    row.swap(k, k - 1);
                }
                for row in u.iter_mut() {
                    row.swap(k, k - 1);
                }
                k = (k - 1).max(1);
            } else {
                k += 1;
            }
        }
        Ok((
            IntForm {
                m: g,
                den: self.den,
            },
            u,
        ))
    }

    /// `den · xᵀAx`.
    fn value(&self, x: &[i64]) -> i128 {
        let mut s: i128 = 0;
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0 {
                continue;
            }
            let row: i128 = self.m[i]
                .iter()
                .zip(x)
                .map(|(&m, &xj)| m * xj as i128)
                .sum();
            s += row * xi as i128;
        }
        s
    }
}

/// All integer `x` with `xᵀAx ≤ bound` (or `< bound` when `strict`), for
/// positive definite rational `A`.
///
/// Candidate ranges come from a floating-point Cholesky traversal widened by
/// a small slack; membership is then decided exactly. The cap is compared
/// against an upper bound on the point count before any work is done.
pub(crate) fn enumerate_form(
    a: &Matrix,
    bound: &Rational,
    strict: bool,
    cap: u64,
) -> Result<Vec<Vec<i64>>> {
    let n = a.rows();
    if bound.is_negative() || (strict && bound.is_zero()) {
        return Ok(Vec::new());
    }
    let (form, u) = IntForm::new(a)?.lll_reduced()?;
    let a = &form.to_matrix();
    let predicted = predicted_count(a, bound)?;
    if predicted > cap {
        return Err(Error::CutoffTooLarge { predicted, cap });
    }
    let (bn, bd) = (
        bound.numer().to_i128().expect("bound fits in i128"),
        bound.denom().to_i128().expect("bound fits in i128"),
    );
    let accept = |x: &[i64]| {
        let s = form.value(x);
        // s/den vs bn/bd
        let lhs = s * bd;
        let rhs = bn * form.den;
        if strict {
            lhs < rhs
        } else {
            lhs <= rhs
        }
    };

    let af: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| to_f64(&a[(i, j)])).collect())
        .collect();
    let (diag, mu) = ldl_upper(&af)?;
    let budget = to_f64(bound) * (1.0 + 1e-9) + 1e-9;

    // split on the last coordinate for parallel traversal
    let last = n - 1;
    let r_last = (budget / diag[last]).sqrt() + 1e-9;
    let top: Vec<i64> = ((-r_last).ceil() as i64..=r_last.floor() as i64).collect();
    let mut out: Vec<Vec<i64>> = top
        .par_iter()
        .flat_map_iter(|&xl| {
            let mut found = Vec::new();
            let mut x = vec![0i64; n];
            x[last] = xl;
            let rem = budget - diag[last] * (xl as f64).powi(2);
            if rem >= -1e-12 {
                descend(last, rem, &diag, &mu, &mut x, &accept, &mut found);
            }
            found
        })
        .map(|y| {
            (0..n)
                .map(|i| u[i].iter().zip(&y).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    out.sort();
    Ok(out)
}

fn descend<F: Fn(&[i64]) -> bool>(
    level: usize,
    remaining: f64,
    diag: &[f64],
    mu: &[Vec<f64>],
    x: &mut Vec<i64>,
    accept: &F,
    found: &mut Vec<Vec<i64>>,
) {
    if level == 0 {
        if accept(x) {
            found.push(x.clone());
        }
        return;
    }
    let i = level - 1;
    let n = x.len();
    let center: f64 = -(i + 1..n).map(|j| mu[i][j] * x[j] as f64).sum::<f64>();
    let radius = (remaining.max(0.0) / diag[i]).sqrt() + 1e-9;
    let lo = (center - radius).ceil() as i64;
    let hi = (center + radius).floor() as i64;
    for xi in lo..=hi {
        let t = xi as f64 - center;
        let rem = remaining - diag[i] * t * t;
        if rem < -1e-9 * (1.0 + remaining.abs()) {
            continue;
        }
        x[i] = xi;
        descend(i, rem, diag, mu, x, accept, found);
    }
    x[i] = 0;
}

/// Gram-Schmidt coefficients `μ_ij` (`j < i`) and squared lengths of a
/// basis given by its Gram matrix.
fn gram_schmidt(g: &[Vec<i128>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = g.len();
    let mut mu = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            let s: f64 = (0..j).map(|k| mu[j][k] * mu[i][k] * b[k]).sum();
            mu[i][j] = (g[i][j] as f64 - s) / b[j];
        }
        b[i] = g[i][i] as f64 - (0..i).map(|k| mu[i][k].powi(2) * b[k]).sum::<f64>();
        if !(b[i] > 0.0) {
            return Err(Error::InvalidInput(
                "quadratic form is not positive definite".into(),
            ));
        }
    }
    Ok((mu, b))
}

/// `xᵀAx = Σ_i d_i (x_i + Σ_{j>i} μ_ij x_j)²`.
fn ldl_upper(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    let mut q = a.to_vec();
    let mut diag = vec![0.0; n];
    let mut mu = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d = q[i][i];
        if !(d > 0.0) {
            return Err(Error::InvalidInput(
                "quadratic form is not positive definite".into(),
            ));
        }
        diag[i] = d;
        for j in i + 1..n {
            mu[i][j] = q[i][j] / d;
        }
        for j in i + 1..n {
            for k in i + 1..n {
                q[j][k] -= mu[i][j] * mu[i][k] * d;
            }
        }
    }
    Ok((diag, mu))
}

/// Upper bound on the number of integer points with `xᵀAx ≤ R`: the smaller
/// of the exact coefficient box `|x_i| ≤ √(R (A⁻¹)_ii)` and the volume of the
/// ellipsoid enlarged by the radius of a fundamental parallelepiped.
fn predicted_count(a: &Matrix, bound: &Rational) -> Result<u64> {
    let n = a.rows();
    let inv = a
        .inverse()
        .ok_or_else(|| Error::InvalidInput("quadratic form is singular".into()))?;
    let r = to_f64(bound);
    let mut box_count = 1.0f64;
    for i in 0..n {
        let b = (r * to_f64(&inv[(i, i)])).sqrt().floor();
        box_count *= 2.0 * b + 1.0;
    }
    let rho2: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| to_f64(&a[(i, j)]).abs())
        .sum::<f64>()
        / 4.0;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| to_f64(&a[(i, j)])).collect())
        .collect();
    let (diag, _) = ldl_upper(&rows)?;
    let rho2 = rho2.min(diag.iter().sum::<f64>() / 4.0);
    let radius = r.sqrt() + rho2.sqrt();
    let det = to_f64(&a.determinant());
    let vol = ball_direct(n) * radius.powi(n as i32) / det.sqrt();
    let est = box_count.min(vol.ceil().max(1.0));
    Ok(if est.is_finite() && est < u64::MAX as f64 {
        est as u64
    } else {
        u64::MAX
    })
}

/// Volume of the unit ball in `R^n`.
fn ball_direct(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    PI.powf(half) / gamma_half_integer(half + 1.0)
}

/// Γ at a positive integer or half-integer.
fn gamma_half_integer(x: f64) -> f64 {
    let mut acc = if (x - x.floor()).abs() < 1e-12 {
        1.0
    } else {
        PI.sqrt()
    };
    let mut t = if (x - x.floor()).abs() < 1e-12 {
        1.0
    } else {
        0.5
    };
    while t < x - 1e-12 {
        acc *= t;
        t += 1.0;
    }
    acc
}

/// Every `γ ∈ Γ` with `(γ_L² + γ_R²)/2 ≤ cutoff`, in lexicographic order of
/// coordinates.
pub fn enumerate_vectors(lat: &NarainLattice, cutoff: &Rational) -> Result<Vec<ChargeVector>> {
    enumerate_vectors_with_cap(lat, cutoff, enumeration_cap())
}

pub fn enumerate_vectors_with_cap(
    lat: &NarainLattice,
    cutoff: &Rational,
    cap: u64,
) -> Result<Vec<ChargeVector>> {
    let (l, r) = lat.conformal_weight_forms();
    let a = l.add(&r);
    let coords = enumerate_form(&a, cutoff, false, cap)?;
    Ok(coords.iter().map(|x| lat.charge_vector(x)).collect())
}

/// The lattice theta numerator of `Z_Γ` and its eta denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct ZGammaSeries {
    /// `Σ_γ q^{γ_L²/2} q̄^{γ_R²/2}` with both exponents below the order.
    pub numerator: FourSeries,
    /// `Z_Γ = numerator / (η^p · η̄^p)` with `p = 2D`.
    pub eta_power: u32,
}

/// `Z_Γ(τ)` as an exact numerator series, box-truncated: all terms with
/// q-exponent `< order` and q̄-exponent `< order`.
pub fn z_gamma_series(lat: &NarainLattice, order: &Rational) -> Result<ZGammaSeries> {
    z_gamma_series_with_cap(lat, order, enumeration_cap())
}

pub fn z_gamma_series_with_cap(
    lat: &NarainLattice,
    order: &Rational,
    cap: u64,
) -> Result<ZGammaSeries> {
    let (l, r) = lat.conformal_weight_forms();
    let den = l
        .to_rows()
        .iter()
        .chain(r.to_rows().iter())
        .flatten()
        .fold(num_bigint::BigInt::one(), |acc, x| acc.lcm(x.denom()))
        .to_i64()
        .ok_or_else(|| Error::InvalidInput("exponent denominator too large".into()))?;
    // both weights < order implies their sum < 2·order
    let coords = enumerate_form(&l.add(&r), &(order * int(2)), true, cap)?;
    let (fl, fr) = (IntForm::new(&l)?, IntForm::new(&r)?);
    let mut counts: std::collections::BTreeMap<(i128, i128), i64> =
        std::collections::BTreeMap::new();
    for x in &coords {
        *counts.entry((fl.value(x), fr.value(x))).or_insert(0) += 1;
    }
    let terms = counts.into_iter().filter_map(|((a, b), c)| {
        let a = Rational::new(a.into(), fl.den.into());
        let b = Rational::new(b.into(), fr.den.into());
        (&a < order && &b < order).then_some((a, b, int(c)))
    });
    let numerator = FourSeries::from_q_qbar_terms(den, terms, order, order)?;
    Ok(ZGammaSeries {
        numerator,
        eta_power: 2 * lat.dim_d as u32,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZGammaValue {
    pub value: Complex64,
    pub tail_estimate: f64,
    pub vectors: usize,
}

/// `Z_Γ(τ)` numerically, summing every `γ` with `(γ_L²+γ_R²)/2 ≤ cutoff`.
///
/// Fails with `PrecisionLoss` if the tail estimate exceeds `1e-9` of the
/// partial sum.
pub fn z_gamma_eval(lat: &NarainLattice, tau: Complex64, cutoff: &Rational) -> Result<ZGammaValue> {
    if !(tau.im > 0.0) {
        return Err(Error::InvalidInput("Im(tau) must be positive".into()));
    }
    let (l, r) = lat.conformal_weight_forms();
    let a = l.add(&r);
    let coords = enumerate_form(&a, cutoff, false, enumeration_cap())?;
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let mut sum = Complex64::new(0.0, 0.0);
    let (fl, fr) = (IntForm::new(&l)?, IntForm::new(&r)?);
    for x in &coords {
        let qa = fl.value(x) as f64 / fl.den as f64;
        let qb = fr.value(x) as f64 / fr.den as f64;
        let term = (two_pi_i * tau * qa).exp() * (two_pi_i * tau * qb).exp().conj();
        sum += term;
    }
    let eta_abs = eta_value(tau).norm();
    let prefactor = eta_abs.powi(-(4 * lat.dim_d as i32));
    let tail = lattice_tail(&a, to_f64(cutoff), 2.0 * PI * tau.im) * prefactor;
    let value = sum * prefactor;
    if tail > 1e-9 * value.norm() {
        return Err(Error::PrecisionLoss {
            tail,
            sum: value.norm(),
        });
    }
    Ok(ZGammaValue {
        value,
        tail_estimate: tail,
        vectors: coords.len(),
    })
}

/// Bound on `Σ_{Q(x) > R} e^{-sQ(x)}` from `N(t) ≤ V_n (√t + ρ)^n / √det A`.
fn lattice_tail(a: &Matrix, cutoff: f64, s: f64) -> f64 {
    let n = a.rows();
    let det = to_f64(&a.determinant());
    let rho: f64 = ((0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| to_f64(&a[(i, j)]).abs())
        .sum::<f64>()
        / 4.0)
        .sqrt();
    let vn = ball_direct(n);
    let count = |t: f64| vn * (t.sqrt() + rho).powi(n as i32) / det.sqrt();
    // s ∫_R^∞ e^{-st} N(t) dt by Simpson's rule on a window of 80/s
    let width = 80.0 / s;
    let steps = 2000;
    let h = width / steps as f64;
    let f = |t: f64| s * (-s * t).exp() * count(t);
    let mut acc = f(cutoff) + f(cutoff + width);
    for i in 1..steps {
        let t = cutoff + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn spec_2d(basis: [[Rational; 2]; 2], b: Rational) -> TorusSpec {
        let basis = Matrix::from_rows(basis.iter().map(|r| r.to_vec()).collect()).unwrap();
        let bf = Matrix::from_rows(vec![vec![int(0), b.clone()], vec![-b, int(0)]]).unwrap();
        TorusSpec::new(1, basis, bf).unwrap()
    }

    #[test]
    fn dual_of_cubic_and_rescaled_lattices() {
        assert_eq!(
            dual_lattice(&TorusSpec::cubic(1)).unwrap(),
            Matrix::identity(2)
        );
        let s = spec_2d([[int(2), int(0)], [int(0), rat(1, 2)]], int(0));
        assert_eq!(
            dual_lattice(&s).unwrap(),
            Matrix::diagonal(&[rat(1, 2), int(2)])
        );
    }

    #[test]
    fn dual_pairs_integrally_with_lattice() {
        let s = spec_2d([[int(1), rat(1, 2)], [int(0), int(1)]], int(0));
        let d = dual_lattice(&s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let p = dot(&s.basis().column(i), &d.column(j));
                assert!(p.is_integer());
                assert_eq!(p, if i == j { int(1) } else { int(0) });
            }
        }
    }

    #[test]
    fn cubic_gram_is_hyperbolic() {
        let lat = narain_from_torus(&TorusSpec::cubic(1)).unwrap();
        let mut expected = Matrix::zeros(4, 4);
        for i in 0..2 {
            expected[(i, 2 + i)] = int(1);
            expected[(2 + i, i)] = int(1);
        }
        assert_eq!(lat.gram(), &expected);
        assert!(lat.is_even());
        assert_eq!(lat.gram_determinant().abs(), int(1));
    }

    #[test]
    fn gram_does_not_see_the_b_field() {
        let a = narain_from_torus(&spec_2d([[int(1), int(0)], [int(0), int(1)]], int(0))).unwrap();
        let b =
            narain_from_torus(&spec_2d([[int(1), int(0)], [int(0), int(1)]], rat(1, 3))).unwrap();
        assert_eq!(a.gram(), b.gram());
        assert_ne!(a.scaled_basis(), b.scaled_basis());
    }

    #[test]
    fn rejects_bad_specs() {
        let singular = Matrix::from_rows(vec![vec![int(1), int(2)], vec![int(2), int(4)]]).unwrap();
        assert_eq!(
            TorusSpec::new(1, singular, Matrix::zeros(2, 2)),
            Err(Error::SingularBasis)
        );
        let not_skew = Matrix::from_rows(vec![vec![int(0), int(1)], vec![int(1), int(0)]]).unwrap();
        assert!(TorusSpec::new(1, Matrix::identity(2), not_skew).is_err());
    }

    #[test]
    fn odd_lattice_is_an_invariant_violation() {
        // Z^{1,1} with the diagonal form: odd
        let basis = Matrix::from_rows(vec![
            vec![rat(2, 1), int(0), int(0), int(0)],
            vec![int(0), int(1), int(0), int(0)],
            vec![int(0), int(0), int(1), int(0)],
            vec![int(0), int(0), int(0), int(1)],
        ])
        .unwrap();
        assert!(matches!(
            NarainLattice::from_scaled_basis(1, basis),
            Err(Error::InvariantViolation(_))
        ));
    }

    #[test]
    fn zero_cutoff_gives_only_the_origin() {
        let lat = narain_from_torus(&TorusSpec::cubic(1)).unwrap();
        let v = enumerate_vectors(&lat, &int(0)).unwrap();
        assert_eq!(v.len(), 1);
        assert!(v[0].coords.iter().all(|&c| c == 0));
    }

    #[test]
    fn cap_is_enforced() {
        let lat = narain_from_torus(&TorusSpec::cubic(2)).unwrap();
        assert!(matches!(
            enumerate_vectors_with_cap(&lat, &int(20), 1000),
            Err(Error::CutoffTooLarge { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let s = spec_2d([[int(1), rat(1, 2)], [int(0), int(1)]], rat(1, 3));
        let back = TorusSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let parsed = TorusSpec::from_json_str(
            r#"{"D": 1, "basis": [["1","0"],[0,"2/1"]], "B": [["0","1/3"],["-1/3","0"]]}"#,
        )
        .unwrap();
        assert_eq!(parsed.b_field()[(0, 1)], rat(1, 3));
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_direct(2) - PI).abs() < 1e-12);
        assert!((ball_direct(4) - PI * PI / 2.0).abs() < 1e-12);
        assert!((ball_direct(3) - 4.0 * PI / 3.0).abs() < 1e-12);
    }
}
