use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly;
use crate::error::{invalid, Error, Result};

/// Hurwitz margin: a pole counts as stable when its real part is below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// Proper real rational function `num(s) / den(s)`, coefficients highest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RationalRepr", into = "RationalRepr")]
pub struct Rational {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RationalRepr {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RationalRepr> for Rational {
    type Error = Error;
    fn try_from(r: RationalRepr) -> Result<Self> {
        Rational::new(r.num, r.den)
    }
}

impl From<Rational> for RationalRepr {
    fn from(r: Rational) -> Self {
        RationalRepr { num: r.num, den: r.den }
    }
}

impl Rational {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(invalid("non-finite polynomial coefficient"));
        }
        let den = poly::trim(&den);
        if den.is_empty() {
            return Err(Error::DegenerateDenominator);
        }
        let mut num = poly::trim(&num);
        if num.is_empty() {
            num.push(0.0);
        }
        let dn = num.len() - 1;
        let dd = den.len() - 1;
        if num != [0.0] && dn > dd {
            return Err(Error::Improper { num: dn, den: dd });
        }
        Ok(Self { num, den })
    }

    pub fn constant(k: f64) -> Self {
        Self { num: vec![k], den: vec![1.0] }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == [0.0]
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    /// `deg den - deg num`, or `None` for the zero function.
    pub fn relative_degree(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.den.len() - self.num.len())
        }
    }

    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = poly::eval(&self.den, s);
        let scale = self.den.iter().map(|c| c.abs()).fold(0.0, f64::max) * (1.0 + s.norm()).powi(self.den_degree() as i32);
        if d.norm() <= 1e-14 * scale {
            return Err(Error::AtPole(s.im));
        }
        Ok(poly::eval(&self.num, s) / d)
    }

    /// `G(j w)`.
    pub fn freq(&self, w: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, w))
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    /// The pole with the largest real part, if it violates the Hurwitz margin.
    pub fn unstable_pole(&self) -> Option<Complex64> {
        self.poles()
            .into_iter()
            .filter(|p| p.re >= -HURWITZ_MARGIN)
            .max_by(|a, b| a.re.total_cmp(&b.re))
    }

    pub fn is_stable(&self) -> bool {
        self.unstable_pole().is_none()
    }

    /// `lim_{w -> inf} G(j w)`.
    pub fn high_freq_limit(&self) -> f64 {
        if !self.is_zero() && self.num.len() == self.den.len() {
            self.num[0] / self.den[0]
        } else {
            0.0
        }
    }

    /// `lim s^k G(s)` as `|s| -> inf`, finite when `k <= relative degree`.
    pub fn asymptotic_coefficient(&self, k: usize) -> f64 {
        match self.relative_degree() {
            Some(r) if r == k => self.num[0] / self.den[0],
            _ => 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self { num: vec![0.0], den: self.den.clone() };
        }
        Self { num: self.num.iter().map(|v| v * c).collect(), den: self.den.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_lag_at_unit_frequency() {
        let g = Rational::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let v = g.freq(1.0).unwrap();
        assert!((v - Complex64::new(0.5, -0.5)).norm() < 1e-15);
        assert!(g.is_stable());
        assert_eq!(g.relative_degree(), Some(1));
        assert_eq!(g.asymptotic_coefficient(1), 1.0);
    }

    #[test]
    fn unstable_witness() {
        let g = Rational::new(vec![1.0], vec![1.0, -1.0]).unwrap();
        let p = g.unstable_pole().unwrap();
        assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_improper_and_degenerate() {
        assert!(matches!(Rational::new(vec![1.0, 0.0], vec![1.0]), Err(Error::Improper { .. })));
        assert!(matches!(Rational::new(vec![1.0], vec![0.0, 0.0]), Err(Error::DegenerateDenominator)));
        assert!(Rational::new(vec![0.0, 0.0, 0.0], vec![2.0]).unwrap().is_zero());
    }

    #[test]
    fn pole_on_axis_is_an_error() {
        let g = Rational::new(vec![1.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(g.freq(1.0), Err(Error::AtPole(_))));
    }

    #[test]
    fn lightly_damped_entry_at_resonance() {
        // (s + 6) / (s^2 + 0.1 s + 1) at s = j: (6 + j) / (0.1 j) = 10 - 60 j
        let g = Rational::new(vec![1.0, 6.0], vec![1.0, 0.1, 1.0]).unwrap();
        let v = g.freq(1.0).unwrap();
        assert!((v - Complex64::new(10.0, -60.0)).norm() < 1e-12);
    }
}
