use num_complex::Complex64;
use std::f64::consts::PI;

use super::{q_rat, y_rat, PuiseuxSeries};
use crate::error::{Error, Result};
use crate::rational::to_f64;

/// A point `(τ, z)` of the upper half plane times `C`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexPoint {
    pub tau: Complex64,
    pub z: Complex64,
}

impl ComplexPoint {
    pub fn new(tau: Complex64, z: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Im(tau) must be positive, got {tau}"
            )));
        }
        Ok(Self { tau, z })
    }

    /// `q^a` on the principal branch, `e^{2πiτa}`.
    pub fn q_pow(&self, a: f64) -> Complex64 {
        (Complex64::new(0.0, 2.0 * PI) * self.tau * a).exp()
    }

    /// `y^b = e^{2πizb}`.
    pub fn y_pow(&self, b: f64) -> Complex64 {
        (Complex64::new(0.0, 2.0 * PI) * self.z * b).exp()
    }

    pub fn abs_q(&self) -> f64 {
        (-2.0 * PI * self.tau.im).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    pub value: Complex64,
    /// Magnitude of the first omitted q-power, scaled by the largest stored
    /// level so that it is comparable with the partial sum.
    pub error_estimate: f64,
    /// `|q|^order > 1e-12 · |partial sum|`: the truncation is too coarse for
    /// this point.
    pub precision_loss: bool,
}

impl PuiseuxSeries {
    /// Sum every stored term at `q = e^{2πiτ}`, `y = e^{2πiz}`.
    pub fn eval(&self, p: &ComplexPoint) -> EvalResult {
        let mut value = Complex64::new(0.0, 0.0);
        let mut level_scale: f64 = 1.0;
        let mut current_level = None;
        let mut current_mag = 0.0;
        for (&(a, b), c) in self.unit_terms() {
            let a_f = to_f64(&q_rat(a));
            let b_f = to_f64(&y_rat(b));
            let y = p.y_pow(b_f);
            value += p.q_pow(a_f) * y * to_f64(c);
            if current_level != Some(a) {
                level_scale = level_scale.max(current_mag);
                current_level = Some(a);
                current_mag = 0.0;
            }
            current_mag += to_f64(c).abs() * y.norm();
        }
        level_scale = level_scale.max(current_mag);
        let q_trunc = p.abs_q().powf(to_f64(&self.order()));
        EvalResult {
            value,
            error_estimate: q_trunc * level_scale,
            precision_loss: q_trunc > 1e-12 * value.norm(),
        }
    }
}
