//! Sector partition functions of toroidal theories and their Z2-orbifolds.
//!
//! Every sector is a finite sum of summands
//!
//! ```text
//! weight · [Z_Γ numerator] · f(q, y) · f̄(q̄, ȳ)
//! ```
//!
//! where the chiral factor `f` is a monomial times a power of one theta
//! function, possibly divided by powers of `η` and of a theta constant. The
//! antiholomorphic factor is the complex conjugate of `f` written in the
//! independent variables `(q̄, ȳ)`, so setting `ȳ = 1` alone is a valid
//! series operation.
//!
//! Spectral flow is available both symbolically (on [`ChiralRecipe`]s, using
//! the half-period shifts of the theta functions) and on materialised series,
//! by the substitutions `y ↦ y q^{±1/2}` and `y ↦ -y`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modforms::{
    eta_series, theta_null_series, theta_series, theta_value, Phase, PhasedSeries, ThetaIndex,
};
use crate::narain::{z_gamma_series, NarainLattice};
use crate::qseries::{ComplexPoint, FourSeries, PuiseuxSeries, Q_DEN};
use crate::rational::{ceil_units, fmt_rational, int, rat, to_f64, Rational};

/// The four sectors of a partition function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectorLabel {
    #[serde(rename = "NS")]
    NS,
    #[serde(rename = "NS-tilde")]
    NSTilde,
    #[serde(rename = "R")]
    R,
    #[serde(rename = "R-tilde")]
    RTilde,
}

impl SectorLabel {
    pub const ALL: [Self; 4] = [Self::NS, Self::NSTilde, Self::R, Self::RTilde];

    /// The theta function of the fermionic factor of a toroidal theory.
    pub fn theta_index(self) -> ThetaIndex {
        match self {
            Self::NS => ThetaIndex::THREE,
            Self::NSTilde => ThetaIndex::FOUR,
            Self::R => ThetaIndex::TWO,
            Self::RTilde => ThetaIndex::ONE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NS => "NS",
            Self::NSTilde => "NS-tilde",
            Self::R => "R",
            Self::RTilde => "R-tilde",
        }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SectorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ns" => Ok(Self::NS),
            "ns-tilde" | "nstilde" | "ns~" => Ok(Self::NSTilde),
            "r" => Ok(Self::R),
            "r-tilde" | "rtilde" | "r~" => Ok(Self::RTilde),
            _ => Err(Error::InvalidInput(format!("unknown sector {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoryKind {
    Toroidal,
    Z2Orbifold,
}

/// A toroidal theory or its Z2-orbifold, given by the charge lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TheoryHandle {
    pub kind: TheoryKind,
    pub lattice: NarainLattice,
}

impl TheoryHandle {
    pub fn toroidal(lattice: NarainLattice) -> Self {
        Self {
            kind: TheoryKind::Toroidal,
            lattice,
        }
    }

    pub fn z2_orbifold(lattice: NarainLattice) -> Self {
        Self {
            kind: TheoryKind::Z2Orbifold,
            lattice,
        }
    }

    pub fn dim_d(&self) -> usize {
        self.lattice.dim_d()
    }

    /// `c = c̄ = 3D`.
    pub fn central_charge(&self) -> Rational {
        int(3 * self.dim_d() as i64)
    }

    pub fn sector(&self, s: SectorLabel, order: &Rational) -> Result<SectorFunction> {
        match self.kind {
            TheoryKind::Toroidal => torus_sector(self, s, order),
            TheoryKind::Z2Orbifold => orbifold_sectors(self, s, order),
        }
    }
}

// ---------------------------------------------------------------------------
// recipes
// ---------------------------------------------------------------------------

/// `phase · coefficient · q^{q_exp} y^{y_exp} · ϑ_k(τ,z)^power · η^{eta_power}
/// / ϑ_null(τ,0)^power`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChiralRecipe {
    pub phase: Phase,
    pub coefficient: Rational,
    pub q_exp: Rational,
    pub y_exp: Rational,
    pub theta: ThetaIndex,
    pub power: u32,
    pub eta_power: i32,
    pub theta_null: Option<ThetaIndex>,
}

impl ChiralRecipe {
    fn plain(theta: ThetaIndex, power: u32) -> Self {
        Self {
            phase: Phase::ONE,
            coefficient: Rational::one(),
            q_exp: Rational::zero(),
            y_exp: Rational::zero(),
            theta,
            power,
            eta_power: 0,
            theta_null: None,
        }
    }

    /// `z ↦ z + s/2`, with `s = ±1`.
    pub fn shift_half(&self, s: i64) -> Self {
        // ϑ1(z+1/2) = ϑ2, ϑ2(z+1/2) = -ϑ1, ϑ3(z+1/2) = ϑ4, ϑ4(z+1/2) = ϑ3,
        // and the inverses for s = -1
        let (k, sign) = match (self.theta.k(), s > 0) {
            (1, true) => (2, 1),
            (2, true) => (1, -1),
            (1, false) => (2, -1),
            (2, false) => (1, 1),
            (3, _) => (4, 1),
            (_, _) => (3, 1),
        };
        let mut out = self.clone();
        out.theta = ThetaIndex::new(k).expect("index in range");
        if sign < 0 && self.power % 2 == 1 {
            out.phase = out.phase.mul(Phase::MINUS_ONE);
        }
        // y^b ↦ e^{iπ s b} y^b, b in (1/2)Z
        let two_b = (&self.y_exp * int(2)).to_integer();
        let two_b: i64 = i64::try_from(two_b).expect("small y exponent");
        out.phase = out.phase.mul(Phase::from_power(s * two_b));
        out
    }

    /// `z ↦ z + sτ/2`, with `s = ±1`.
    pub fn shift_tau(&self, s: i64) -> Self {
        // ϑ_k(z + τ/2) = c_k q^{-1/8} y^{-1/2} ϑ_{σk}(z), σ = (1 4)(2 3),
        // c_1 = c_4 = i, c_2 = c_3 = 1
        let k = self.theta.k();
        let sigma = |k: u8| match k {
            1 => 4,
            4 => 1,
            2 => 3,
            _ => 2,
        };
        let c = |k: u8| {
            if k == 1 || k == 4 {
                Phase::I
            } else {
                Phase::ONE
            }
        };
        let factor = if s > 0 { c(k) } else { c(sigma(k)).conj() };
        let p = self.power as i64;
        let mut out = self.clone();
        out.theta = ThetaIndex::new(sigma(k)).expect("index in range");
        out.phase = out.phase.mul(factor.pow(self.power));
        // y^b ↦ y^b q^{s b/2}; then the theta prefactor q^{-p/8} y^{-s p/2}
        out.q_exp = &self.q_exp + &self.y_exp * rat(s, 2) - rat(p, 8);
        out.y_exp = &self.y_exp - rat(s * p, 2);
        out
    }

    pub fn with_prefactor(&self, q_exp: &Rational, y_exp: &Rational) -> Self {
        let mut out = self.clone();
        out.q_exp += q_exp;
        out.y_exp += y_exp;
        out
    }

    /// Lower bound on q-exponents: `q^a y^b` occurs only if `a ≥ cone(b)`.
    fn cone(&self) -> Cone {
        let eta = rat(self.eta_power as i64, Q_DEN);
        let null = match self.theta_null {
            Some(k) if k == ThetaIndex::TWO => -rat(self.power as i64, 8),
            _ => Rational::zero(),
        };
        Cone {
            alpha: &self.q_exp + eta + null,
            beta: self.y_exp.clone(),
            power: self.power.max(1),
            tilt: 0,
        }
    }

    /// Expand to `O(q^order)`.
    pub fn materialize(&self, order: &Rational) -> Result<PhasedSeries> {
        let mut pad = rat(self.power as i64, 4) + rat(1, 2);
        loop {
            let p = order + &pad;
            let mut s = theta_series(self.theta, &p).pow(self.power);
            s.series = s
                .series
                .mul_monomial(&self.coefficient, &self.q_exp, &self.y_exp)?;
            s.phase = s.phase.mul(self.phase);
            if self.eta_power != 0 {
                let eta = eta_series(&p);
                let base = if self.eta_power < 0 {
                    eta.invert(&p)?
                } else {
                    eta
                };
                s.series = s.series.mul(&base.pow(self.eta_power.unsigned_abs()));
            }
            if let Some(k) = self.theta_null {
                let inv = theta_null_series(k, &p).invert(&p)?;
                s.series = s.series.mul(&inv.pow(self.power));
            }
            if s.series.order() >= *order {
                s.series = s.series.truncate(order);
                return Ok(s);
            }
            pad *= int(2);
        }
    }
}

/// `a ≥ alpha + (b-beta)²/(2·power) + tilt·(b-beta)/2` for every term `q^a y^b`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Cone {
    alpha: Rational,
    beta: Rational,
    power: u32,
    tilt: i64,
}

impl Cone {
    fn at(&self, b: &Rational) -> Rational {
        let d = b - &self.beta;
        &self.alpha + &d * &d / int(2 * self.power as i64) + d * rat(self.tilt, 2)
    }

    /// The cone after `y ↦ y q^{s/2}`.
    fn flowed(&self, s: i64) -> Self {
        Self {
            alpha: &self.alpha + &self.beta * rat(s, 2),
            beta: self.beta.clone(),
            power: self.power,
            tilt: self.tilt + s,
        }
    }

    /// Largest order up to which the substituted series is determined, when
    /// the original was known below `order`.
    fn flowed_order(&self, order: &Rational, s: i64) -> Rational {
        // unknown terms have a ≥ max(order, cone(b)); after the shift
        // a + s·b/2. Scan b in (1/2)Z across the region where the bound is
        // lowest.
        let p = self.power as f64;
        let span = to_f64(&(order - &self.alpha)).abs() + 2.0;
        let reach = (to_f64(&self.beta).abs()
            + p * (self.tilt.abs() as f64 + 2.0)
            + 2.0 * (2.0 * p * span).sqrt()
            + 4.0)
            .ceil() as i64;
        let mut best: Option<Rational> = None;
        for u in -2 * reach..=2 * reach {
            let b = rat(u, 2);
            let shift = &b * rat(s, 2);
            let lo = std::cmp::max(order.clone(), self.at(&b)) + shift;
            if best.as_ref().is_none_or(|x| lo < *x) {
                best = Some(lo);
            }
        }
        best.expect("non-empty scan")
    }
}

/// One summand of a sector function, not yet materialised.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SummandRecipe {
    pub weight: Rational,
    /// Multiplied by the lattice numerator `Σ_γ q^{γ_L²/2} q̄^{γ_R²/2}`.
    pub lattice: bool,
    /// Belongs to the twisted sector of an orbifold.
    pub twisted: bool,
    pub chiral: ChiralRecipe,
}

impl SummandRecipe {
    fn map(&self, f: impl Fn(&ChiralRecipe) -> ChiralRecipe) -> Self {
        Self {
            chiral: f(&self.chiral),
            ..self.clone()
        }
    }
}

/// Symbolic form of a sector: a list of summands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorFormula {
    pub sector: SectorLabel,
    pub dim_d: usize,
    pub summands: Vec<SummandRecipe>,
}

impl SectorFormula {
    fn map(&self, sector: SectorLabel, f: impl Fn(&ChiralRecipe) -> ChiralRecipe) -> Self {
        Self {
            sector,
            dim_d: self.dim_d,
            summands: self.summands.iter().map(|s| s.map(&f)).collect(),
        }
    }
}

/// `Z_S = Z_Γ |ϑ_k/η|^{2D}`: per side `ϑ_k^D η^{-3D}`, the lattice numerator
/// carrying the rest.
pub fn torus_formula(dim_d: usize, s: SectorLabel) -> SectorFormula {
    let d = dim_d as u32;
    let mut chiral = ChiralRecipe::plain(s.theta_index(), d);
    chiral.eta_power = -3 * d as i32;
    SectorFormula {
        sector: s,
        dim_d,
        summands: vec![SummandRecipe {
            weight: Rational::one(),
            lattice: true,
            twisted: false,
            chiral,
        }],
    }
}

/// The R-tilde sector of the Z2-orbifold:
/// `½[Z_Γ|ϑ1/η|^{2D} + Σ_{k=2,4,3} |2ϑ_k(z)/ϑ_k(0)|^{2D}]`.
pub fn orbifold_rtilde_formula(dim_d: usize) -> SectorFormula {
    let d = dim_d as u32;
    let half = rat(1, 2);
    let mut summands = vec![SummandRecipe {
        weight: half.clone(),
        lattice: true,
        twisted: false,
        chiral: torus_formula(dim_d, SectorLabel::RTilde).summands[0]
            .chiral
            .clone(),
    }];
    for k in [ThetaIndex::TWO, ThetaIndex::FOUR, ThetaIndex::THREE] {
        let mut chiral = ChiralRecipe::plain(k, d);
        chiral.coefficient = int(1 << d);
        chiral.theta_null = Some(k);
        summands.push(SummandRecipe {
            weight: half.clone(),
            lattice: false,
            twisted: k != ThetaIndex::TWO,
            chiral,
        });
    }
    SectorFormula {
        sector: SectorLabel::RTilde,
        dim_d,
        summands,
    }
}

/// The other orbifold sectors from R-tilde, by inverting the spectral flow:
/// `Z_R(z) = Z_R̃(z - 1/2)`, `Z_NS(z) = (qq̄)^{D/8}(yȳ)^{-D/2} Z_R(z - τ/2)`,
/// `Z_ÑS(z) = Z_NS(z + 1/2)`.
pub fn orbifold_formula(dim_d: usize, s: SectorLabel) -> SectorFormula {
    let rt = orbifold_rtilde_formula(dim_d);
    let d = dim_d as i64;
    let r = rt.map(SectorLabel::R, |c| c.shift_half(-1));
    let ns = r.map(SectorLabel::NS, |c| {
        c.shift_tau(-1).with_prefactor(&rat(d, 8), &rat(-d, 2))
    });
    match s {
        SectorLabel::RTilde => rt,
        SectorLabel::R => r,
        SectorLabel::NS => ns,
        SectorLabel::NSTilde => ns.map(SectorLabel::NSTilde, |c| c.shift_half(1)),
    }
}

// ---------------------------------------------------------------------------
// materialised sector functions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct SectorSummand {
    pub weight: Rational,
    pub lattice: bool,
    pub twisted: bool,
    /// Series in `(q, y)`.
    pub holomorphic: PhasedSeries,
    /// Series in `(q̄, ȳ)`.
    pub antiholomorphic: PhasedSeries,
    cone: Cone,
}

impl SectorSummand {
    fn from_recipe(r: &SummandRecipe, order: &Rational) -> Result<Self> {
        let hol = r.chiral.materialize(order)?;
        let anti = PhasedSeries {
            phase: hol.phase.conj(),
            series: hol.series.clone(),
        };
        Ok(Self {
            weight: r.weight.clone(),
            lattice: r.lattice,
            twisted: r.twisted,
            holomorphic: hol,
            antiholomorphic: anti,
            cone: r.chiral.cone(),
        })
    }

    /// `weight · hol ⊗ anti`, without the lattice numerator.
    fn chiral_product(&self) -> Result<FourSeries> {
        let phase = self.holomorphic.phase.mul(self.antiholomorphic.phase);
        let sign = phase
            .as_sign()
            .ok_or_else(|| Error::InvariantViolation("summand phase is not real".into()))?;
        Ok(
            FourSeries::from_outer(&self.holomorphic.series, &self.antiholomorphic.series)
                .scale(&(&self.weight * int(sign))),
        )
    }

    fn flow_tau(&self, s: i64) -> Self {
        let (hol, hol_order) = flow_series_tau(&self.holomorphic.series, &self.cone, s);
        let (anti, anti_order) = flow_series_tau(&self.antiholomorphic.series, &self.cone, s);
        debug_assert_eq!(hol_order, anti_order);
        Self {
            holomorphic: PhasedSeries {
                phase: self.holomorphic.phase,
                series: hol,
            },
            antiholomorphic: PhasedSeries {
                phase: self.antiholomorphic.phase,
                series: anti,
            },
            cone: self.cone.flowed(s),
            ..self.clone()
        }
    }

    fn flow_half(&self, s: i64) -> Result<Self> {
        let (p_h, hol) = self.holomorphic.series.flip_y_sign()?;
        let (p_a, anti) = self.antiholomorphic.series.flip_y_sign()?;
        // y^b ↦ e^{iπ s b} y^b on the left, ȳ^b ↦ e^{-iπ s b} ȳ^b on the right
        Ok(Self {
            holomorphic: PhasedSeries {
                phase: self.holomorphic.phase.mul(Phase::from_power(s * p_h)),
                series: hol,
            },
            antiholomorphic: PhasedSeries {
                phase: self.antiholomorphic.phase.mul(Phase::from_power(-s * p_a)),
                series: anti,
            },
            ..self.clone()
        })
    }

    fn with_prefactor(&self, q_exp: &Rational, y_exp: &Rational) -> Result<Self> {
        let one = Rational::one();
        let mut cone = self.cone.clone();
        cone.alpha += q_exp;
        cone.beta += y_exp;
        Ok(Self {
            holomorphic: PhasedSeries {
                phase: self.holomorphic.phase,
                series: self.holomorphic.series.mul_monomial(&one, q_exp, y_exp)?,
            },
            antiholomorphic: PhasedSeries {
                phase: self.antiholomorphic.phase,
                series: self
                    .antiholomorphic
                    .series
                    .mul_monomial(&one, q_exp, y_exp)?,
            },
            cone,
            ..self.clone()
        })
    }
}

/// `y ↦ y q^{s/2}` on a truncated series whose support obeys `cone`.
fn flow_series_tau(series: &PuiseuxSeries, cone: &Cone, s: i64) -> (PuiseuxSeries, Rational) {
    let order = cone.flowed_order(&series.order(), s);
    let units = ceil_units(&order, Q_DEN);
    let terms = series
        .unit_terms()
        .iter()
        .map(|(&(a, b), c)| ((a + 6 * s * b, b), c.clone()))
        .collect();
    (PuiseuxSeries::from_units(terms, units), order)
}

/// A sector partition function with materialised chiral factors.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorFunction {
    pub sector: SectorLabel,
    pub central_charge: Rational,
    pub summands: Vec<SectorSummand>,
    lattice: Option<NarainLattice>,
}

impl SectorFunction {
    fn from_formula(f: &SectorFormula, lattice: &NarainLattice, order: &Rational) -> Result<Self> {
        if !order.is_positive() {
            return Err(Error::InvalidInput("order must be positive".into()));
        }
        let summands = f
            .summands
            .par_iter()
            .map(|s| SectorSummand::from_recipe(s, order))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sector: f.sector,
            central_charge: int(3 * f.dim_d as i64),
            summands,
            lattice: f
                .summands
                .iter()
                .any(|s| s.lattice)
                .then(|| lattice.clone()),
        })
    }

    /// Common order of the chiral factors.
    pub fn order(&self) -> Rational {
        self.summands
            .iter()
            .flat_map(|s| {
                [
                    s.holomorphic.series.order(),
                    s.antiholomorphic.series.order(),
                ]
            })
            .min()
            .unwrap_or_else(Rational::zero)
    }

    /// The full four-variable series, truncated to `O(q^order, q̄^order)`.
    pub fn expand(&self) -> Result<FourSeries> {
        let order = self.order();
        let chiral: Vec<(bool, FourSeries)> = self
            .summands
            .par_iter()
            .map(|s| Ok((s.lattice, s.chiral_product()?)))
            .collect::<Result<_>>()?;
        let mut total = FourSeries::zero(Q_DEN, &order, &order);
        let mut lattice_part: Option<FourSeries> = None;
        for (lat, c) in chiral {
            if lat {
                lattice_part = Some(match lattice_part {
                    Some(acc) => acc.add(&c),
                    None => c,
                });
            } else {
                total = total.add(&c);
            }
        }
        if let Some(part) = lattice_part {
            let lattice = self.lattice.as_ref().ok_or_else(|| {
                Error::InvariantViolation("lattice summand without a lattice".into())
            })?;
            // the chiral part may start below q^0
            let dip = self
                .summands
                .iter()
                .filter(|s| s.lattice)
                .flat_map(|s| {
                    [
                        s.holomorphic.series.valuation(),
                        s.antiholomorphic.series.valuation(),
                    ]
                })
                .flatten()
                .min()
                .unwrap_or_else(Rational::zero)
                .min(Rational::zero());
            let numerator = z_gamma_series(lattice, &(&order - dip))?.numerator;
            total = total.add(&numerator.mul(&part));
        }
        if total.order_q() < order || total.order_qbar() < order {
            return Err(Error::InvariantViolation("expansion lost precision".into()));
        }
        Ok(total.truncate(&order, &order))
    }

    /// `z ↦ z + sτ/2` on the series, with the matching `z̄` shift.
    pub fn flow_tau(&self, s: i64) -> Self {
        Self {
            summands: self.summands.iter().map(|x| x.flow_tau(s)).collect(),
            ..self.clone()
        }
    }

    /// `z ↦ z + s/2`, i.e. `y ↦ e^{iπs} y`, `ȳ ↦ e^{-iπs} ȳ`.
    pub fn flow_half(&self, s: i64) -> Result<Self> {
        Ok(Self {
            summands: self
                .summands
                .iter()
                .map(|x| x.flow_half(s))
                .collect::<Result<_>>()?,
            ..self.clone()
        })
    }

    /// Multiply by `(qq̄)^{q_exp} (yȳ)^{y_exp}`.
    pub fn with_prefactor(&self, q_exp: &Rational, y_exp: &Rational) -> Result<Self> {
        Ok(Self {
            summands: self
                .summands
                .iter()
                .map(|x| x.with_prefactor(q_exp, y_exp))
                .collect::<Result<_>>()?,
            ..self.clone()
        })
    }

    pub fn relabel(mut self, sector: SectorLabel) -> Self {
        self.sector = sector;
        self
    }

    pub fn truncated(&self, order: &Rational) -> Self {
        let mut out = self.clone();
        for s in &mut out.summands {
            s.holomorphic.series = s.holomorphic.series.truncate(order);
            s.antiholomorphic.series = s.antiholomorphic.series.truncate(order);
        }
        out
    }
}

/// Working order for a series that will pass through `y ↦ y q^{±1/2}`.
fn padded_order(order: &Rational, dim_d: usize) -> Rational {
    let extra = (dim_d as f64 * to_f64(order)).sqrt().ceil() as i64 + 1;
    order + rat(1, 2) + int(extra)
}

/// `Z_S` of a toroidal theory, to `O(q^order, q̄^order)`.
pub fn torus_sector(t: &TheoryHandle, s: SectorLabel, order: &Rational) -> Result<SectorFunction> {
    SectorFunction::from_formula(&torus_formula(t.dim_d(), s), &t.lattice, order)
}

/// `Z^{orb}_R̃` built from the toroidal theory's lattice.
pub fn orbifold_rtilde(t: &TheoryHandle, order: &Rational) -> Result<SectorFunction> {
    SectorFunction::from_formula(&orbifold_rtilde_formula(t.dim_d()), &t.lattice, order)
}

/// The orbifold sectors, obtained from `Z^{orb}_R̃` by applying the inverse
/// spectral-flow substitutions to its series.
pub fn orbifold_sectors(
    t: &TheoryHandle,
    s: SectorLabel,
    order: &Rational,
) -> Result<SectorFunction> {
    let d = t.dim_d() as i64;
    let mut work = padded_order(order, t.dim_d());
    loop {
        let rt = orbifold_rtilde(t, &work)?;
        let out = match s {
            SectorLabel::RTilde => rt,
            _ => {
                let r = rt.flow_half(-1)?.relabel(SectorLabel::R);
                match s {
                    SectorLabel::R => r,
                    _ => {
                        let ns = r
                            .flow_tau(-1)
                            .with_prefactor(&rat(d, 8), &rat(-d, 2))?
                            .relabel(SectorLabel::NS);
                        match s {
                            SectorLabel::NS => ns,
                            _ => ns.flow_half(1)?.relabel(SectorLabel::NSTilde),
                        }
                    }
                }
            }
        };
        if out.order() >= *order {
            return Ok(out.truncated(order));
        }
        work = &work * int(2);
    }
}

/// Materialise the symbolic orbifold formula directly, without series
/// substitutions.
pub fn orbifold_sector_closed_form(
    t: &TheoryHandle,
    s: SectorLabel,
    order: &Rational,
) -> Result<SectorFunction> {
    SectorFunction::from_formula(&orbifold_formula(t.dim_d(), s), &t.lattice, order)
}

// ---------------------------------------------------------------------------
// spectral flow
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlowIdentity {
    pub identity: String,
    pub passed: bool,
    pub first_mismatch: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpectralFlowReport {
    pub theory: TheoryKind,
    pub dim_d: usize,
    pub order: String,
    pub identities: Vec<FlowIdentity>,
}

impl SpectralFlowReport {
    pub fn passed(&self) -> bool {
        self.identities.iter().all(|i| i.passed)
    }
}

/// Check `Z_R(z) = (qq̄)^{c/24}(yȳ)^{c/6} Z_NS(z + τ/2)` and
/// `Z_S̃(z) = Z_S(z + 1/2)` for `S ∈ {NS, R}`.
///
/// Left-hand sides come from the closed sector formulas; right-hand sides
/// from the substitutions `y ↦ y q^{1/2}` and `y ↦ -y` on the series of the
/// other sector. Returns `IdentityViolation` naming the first coefficient
/// that differs.
pub fn spectral_flow_check(t: &TheoryHandle, order: &Rational) -> Result<SpectralFlowReport> {
    let report = spectral_flow_report(t, order)?;
    if let Some(bad) = report.identities.iter().find(|i| !i.passed) {
        return Err(Error::IdentityViolation(format!(
            "{}: {}",
            bad.identity,
            bad.first_mismatch.clone().unwrap_or_default()
        )));
    }
    Ok(report)
}

/// As [`spectral_flow_check`], but returns failures inside the report.
pub fn spectral_flow_report(t: &TheoryHandle, order: &Rational) -> Result<SpectralFlowReport> {
    let d = t.dim_d();
    let closed = |s: SectorLabel| -> Result<FourSeries> {
        let f = match t.kind {
            TheoryKind::Toroidal => torus_sector(t, s, order)?,
            TheoryKind::Z2Orbifold => orbifold_sector_closed_form(t, s, order)?,
        };
        f.expand()
    };
    let source = |s: SectorLabel| -> Result<SectorFunction> {
        let mut work = padded_order(order, d);
        loop {
            let f = match t.kind {
                TheoryKind::Toroidal => torus_sector(t, s, &work)?,
                TheoryKind::Z2Orbifold => orbifold_sectors(t, s, &work)?,
            };
            let flowed = f.flow_tau(1);
            if flowed.order() >= *order {
                return Ok(f);
            }
            work = &work * int(2);
        }
    };
    let c = t.central_charge();
    let compare = |name: &str, lhs: FourSeries, rhs: FourSeries| {
        let mismatch = lhs.first_mismatch(&rhs);
        FlowIdentity {
            identity: name.to_string(),
            passed: mismatch.is_none(),
            first_mismatch: mismatch,
        }
    };

    let ns = source(SectorLabel::NS)?;
    let r_from_ns = ns
        .flow_tau(1)
        .with_prefactor(&(&c / int(24)), &(&c / int(6)))?
        .truncated(order)
        .expand()?;
    let nst_from_ns = ns.flow_half(1)?.truncated(order).expand()?;
    let rt_from_r = source(SectorLabel::R)?
        .flow_half(1)?
        .truncated(order)
        .expand()?;

    let identities = vec![
        compare(
            "Z_R(z) = (q qbar)^{c/24} (y ybar)^{c/6} Z_NS(z + tau/2)",
            closed(SectorLabel::R)?,
            r_from_ns,
        ),
        compare(
            "Z_NS~(z) = Z_NS(z + 1/2)",
            closed(SectorLabel::NSTilde)?,
            nst_from_ns,
        ),
        compare(
            "Z_R~(z) = Z_R(z + 1/2)",
            closed(SectorLabel::RTilde)?,
            rt_from_r,
        ),
    ];
    Ok(SpectralFlowReport {
        theory: t.kind,
        dim_d: d,
        order: fmt_rational(order),
        identities,
    })
}

/// `Z = ½(Z_NS + Z_ÑS + Z_R + Z_R̃)`.
pub fn full_partition_function(t: &TheoryHandle, order: &Rational) -> Result<FourSeries> {
    let parts = SectorLabel::ALL
        .iter()
        .map(|&s| t.sector(s, order)?.expand())
        .collect::<Result<Vec<_>>>()?;
    let mut total = FourSeries::zero(Q_DEN, order, order);
    for p in parts {
        total = total.add(&p);
    }
    Ok(total.scale(&rat(1, 2)))
}

// ---------------------------------------------------------------------------
// elliptic genus
// ---------------------------------------------------------------------------

/// `E(τ,z) = Z_R̃(τ, z; τ̄, z̄ = 0)`.
///
/// Each summand's antiholomorphic factor is specialised to `ȳ = 1` and must
/// become a constant (or vanish); otherwise `HolomorphyFailure`.
pub fn cft_elliptic_genus(t: &TheoryHandle, order: &Rational) -> Result<PuiseuxSeries> {
    let rt = match t.kind {
        TheoryKind::Toroidal => torus_sector(t, SectorLabel::RTilde, order)?,
        TheoryKind::Z2Orbifold => orbifold_rtilde(t, order)?,
    };
    let mut total = PuiseuxSeries::zero(order);
    for s in &rt.summands {
        let anti = s.antiholomorphic.series.at_y_one();
        if anti.is_zero() {
            continue;
        }
        if s.lattice {
            // the lattice numerator has q̄-dependence a constant cannot absorb
            let lattice = rt.lattice.as_ref().expect("lattice summand has a lattice");
            let numerator = z_gamma_series(lattice, order)?.numerator;
            let f = numerator.mul(&FourSeries::from_outer(&s.holomorphic.series, &anti));
            f.holomorphic_part()?;
            return Err(Error::HolomorphyFailure(
                "lattice summand survives at zbar = 0".into(),
            ));
        }
        let constant = anti.coeff(&Rational::zero())?;
        if anti.len() != 1 || constant.len() != 1 || !constant.contains_key(&Rational::zero()) {
            return Err(Error::HolomorphyFailure(format!(
                "antiholomorphic factor at zbar = 0 is not constant: {anti}"
            )));
        }
        let value = &constant[&Rational::zero()];
        let sign = s
            .holomorphic
            .phase
            .mul(s.antiholomorphic.phase)
            .as_sign()
            .ok_or_else(|| Error::InvariantViolation("summand phase is not real".into()))?;
        total = total.add(&s.holomorphic.series.scale(&(&s.weight * value * int(sign))));
    }
    Ok(total.truncate(order))
}

/// `8 Σ_{k=2,3,4} (ϑ_k(τ,z)/ϑ_k(τ,0))²`, expanded directly.
pub fn k3_elliptic_genus_closed_form(order: &Rational) -> Result<PuiseuxSeries> {
    let mut total = PuiseuxSeries::zero(order);
    for k in [ThetaIndex::TWO, ThetaIndex::THREE, ThetaIndex::FOUR] {
        let p = order + rat(1, 2);
        let theta = theta_series(k, &p).series;
        let null = theta_null_series(k, &p);
        let quotient = theta.mul(&null.invert(&p)?);
        total = total.add(&quotient.mul(&quotient));
    }
    Ok(total.scale(&int(8)).truncate(order))
}

/// `8 Σ_{k=2,3,4} (ϑ_k(τ,z)/ϑ_k(τ,0))²` evaluated numerically.
pub fn k3_elliptic_genus_value(p: &ComplexPoint) -> Complex64 {
    let origin = ComplexPoint {
        tau: p.tau,
        z: Complex64::new(0.0, 0.0),
    };
    [ThetaIndex::TWO, ThetaIndex::THREE, ThetaIndex::FOUR]
        .iter()
        .map(|&k| {
            let r = theta_value(k, p) / theta_value(k, &origin);
            r * r
        })
        .sum::<Complex64>()
        * 8.0
}

/// Dimension of the space of twisted ground states, `2^{2D}`.
///
/// For `D ≤ 2` the value is cross-checked against the `q⁰ q̄⁰` coefficient of
/// the twisted summands of `Z^{orb}_R̃` at `z = z̄ = 0`.
pub fn twisted_ground_state_count(dim_d: usize) -> Result<u64> {
    if dim_d == 0 {
        return Err(Error::InvalidInput("D must be positive".into()));
    }
    let count = 1u64
        .checked_shl(2 * dim_d as u32)
        .ok_or_else(|| Error::InvalidInput(format!("2^(2D) overflows for D = {dim_d}")))?;
    if dim_d <= 2 {
        let observed = twisted_leading_coefficient(dim_d)?;
        if observed != Rational::from_integer(count.into()) {
            return Err(Error::InvariantViolation(format!(
                "twisted ground states: series gives {observed}, expected {count}"
            )));
        }
    }
    Ok(count)
}

/// `q⁰ q̄⁰` coefficient of the twisted part of `Z^{orb}_R̃` at `y = ȳ = 1`.
pub fn twisted_leading_coefficient(dim_d: usize) -> Result<Rational> {
    let formula = orbifold_rtilde_formula(dim_d);
    let order = rat(1, 2);
    let mut total = Rational::zero();
    for s in formula.summands.iter().filter(|s| s.twisted) {
        let m = SectorSummand::from_recipe(s, &order)?;
        let f = m.chiral_product()?.at_y_ybar_one();
        total += f
            .coeff(&Rational::zero(), &Rational::zero())
            .values()
            .fold(Rational::zero(), |acc, c| acc + c);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narain::{narain_from_torus, TorusSpec};

    fn cubic(d: usize) -> TheoryHandle {
        TheoryHandle::toroidal(narain_from_torus(&TorusSpec::cubic(d)).unwrap())
    }

    #[test]
    fn sector_labels_parse() {
        for s in SectorLabel::ALL {
            assert_eq!(s.name().parse::<SectorLabel>().unwrap(), s);
        }
        assert!("X".parse::<SectorLabel>().is_err());
    }

    #[test]
    fn recipe_shifts_match_the_sector_table() {
        let d = 2;
        let ns = torus_formula(d, SectorLabel::NS).summands[0].chiral.clone();
        let r = ns.shift_tau(1).with_prefactor(&rat(1, 4), &int(1));
        assert_eq!(r, torus_formula(d, SectorLabel::R).summands[0].chiral);
        assert_eq!(
            ns.shift_half(1),
            torus_formula(d, SectorLabel::NSTilde).summands[0].chiral
        );
        let rt = torus_formula(d, SectorLabel::R).summands[0]
            .chiral
            .shift_half(1);
        assert_eq!(rt.theta, ThetaIndex::ONE);
    }

    #[test]
    fn recipe_shifts_invert() {
        for k in ThetaIndex::ALL {
            for p in 1..4 {
                let c = ChiralRecipe::plain(k, p);
                assert_eq!(c.shift_tau(1).shift_tau(-1), c);
                assert_eq!(c.shift_half(1).shift_half(-1), c);
            }
        }
    }

    #[test]
    fn rtilde_vanishes_at_the_origin() {
        let f = torus_sector(&cubic(1), SectorLabel::RTilde, &int(2)).unwrap();
        assert!(f.expand().unwrap().at_y_ybar_one().is_zero());
    }

    #[test]
    fn ns_leading_term_is_one() {
        let f = torus_sector(&cubic(1), SectorLabel::NS, &int(1))
            .unwrap()
            .expand()
            .unwrap();
        // (qq̄)^{-1/8} · 1 from γ = 0 and the theta constant term
        assert_eq!(f.coeff(&rat(-1, 8), &rat(-1, 8))[&(int(0), int(0))], int(1));
    }

    #[test]
    fn series_flow_round_trip_is_identity() {
        let t = cubic(1);
        let rt = orbifold_rtilde(&t, &int(4)).unwrap();
        let back = rt
            .flow_half(-1)
            .unwrap()
            .flow_tau(-1)
            .flow_tau(1)
            .flow_half(1)
            .unwrap();
        let order = back.order();
        assert!(order >= rat(3, 2), "{order}");
        assert!(rt
            .truncated(&order)
            .expand()
            .unwrap()
            .first_mismatch(&back.expand().unwrap())
            .is_none());
    }

    #[test]
    fn spectral_flow_torus_d1() {
        let report = spectral_flow_check(&cubic(1), &int(2)).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn twisted_counts() {
        assert_eq!(twisted_ground_state_count(1).unwrap(), 4);
        assert_eq!(twisted_ground_state_count(2).unwrap(), 16);
        assert_eq!(twisted_ground_state_count(3).unwrap(), 64);
    }

    #[test]
    fn torus_elliptic_genus_vanishes() {
        assert!(cft_elliptic_genus(&cubic(1), &int(3)).unwrap().is_zero());
    }
}
