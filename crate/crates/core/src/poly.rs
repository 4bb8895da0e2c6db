//! Dense univariate polynomials with MPFR coefficients, ascending powers.

use rug::ops::Pow;
use rug::{Float, Integer};

#[derive(Clone, Debug)]
pub struct Polynomial {
    coeffs: Vec<Float>,
    prec: u32,
}

impl Polynomial {
    pub fn zero(degree: usize, prec: u32) -> Self {
        Polynomial {
            coeffs: vec![Float::new(prec); degree + 1],
            prec,
        }
    }

    pub fn from_coeffs(coeffs: Vec<Float>, prec: u32) -> Self {
        let coeffs = if coeffs.is_empty() {
            vec![Float::new(prec)]
        } else {
            coeffs
        };
        Polynomial { coeffs, prec }
    }

    pub fn coeffs(&self) -> &[Float] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Adds `scale · (x − shift)^power`, growing the coefficient vector if needed.
    pub fn add_shifted_power(&mut self, scale: &Float, shift: &Float, power: u32) {
        if self.coeffs.len() <= power as usize {
            self.coeffs
                .resize(power as usize + 1, Float::new(self.prec));
        }
        let neg_shift = Float::with_val(self.prec, -shift);
        for t in 0..=power {
            let binom = Integer::from(Integer::binomial_u(power, t));
            let mut term = Float::with_val(self.prec, (&neg_shift).pow(power - t));
            term *= &binom;
            term *= scale;
            self.coeffs[t as usize] += &term;
        }
    }

    pub fn eval(&self, x: &Float) -> Float {
        let mut acc = Float::new(self.prec);
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::zero(0, self.prec);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| Float::with_val(self.prec, c * k as u32))
            .collect();
        Polynomial::from_coeffs(coeffs, self.prec)
    }

    pub fn antiderivative(&self) -> Polynomial {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Float::new(self.prec));
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(Float::with_val(self.prec, c / (k as u32 + 1)));
        }
        Polynomial::from_coeffs(coeffs, self.prec)
    }

    /// `∫_a^b p(x) dx`.
    pub fn integrate(&self, a: &Float, b: &Float) -> Float {
        let anti = self.antiderivative();
        anti.eval(b) - anti.eval(a)
    }
}
