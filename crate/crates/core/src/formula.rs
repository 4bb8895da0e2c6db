//! The optimal weights `C[0..N]`, `A`, `B` and the formula value that carries
//! them.

use rug::{Float, Rational};

use crate::euler_frobenius::{unit_disk_roots, RootSet};
use crate::optimal_system::{assemble, pow, solve, RootPowers, SystemSolution};
use crate::{Error, Result};

/// `Σ C[β] φ(hβ) + A φ′(0) + B φ′(1)` on `N + 1` equally spaced nodes.
#[derive(Clone, Debug)]
pub struct QuadratureFormula {
    m: usize,
    n: usize,
    prec: u32,
    weights: Vec<Float>,
    a: Float,
    b: Float,
}

impl QuadratureFormula {
    /// Wraps arbitrary weights, for example a suboptimal rule to compare
    /// against. All values are rounded to `prec` bits.
    pub fn new(m: usize, weights: Vec<Float>, a: Float, b: Float, prec: u32) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::parameter("N", "need at least two nodes"));
        }
        let n = weights.len() - 1;
        Ok(QuadratureFormula {
            m,
            n,
            prec,
            weights: weights
                .into_iter()
                .map(|w| Float::with_val(prec, w))
                .collect(),
            a: Float::with_val(prec, a),
            b: Float::with_val(prec, b),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Working precision of the stored values.
    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn h(&self) -> Float {
        Float::with_val(self.prec, 1) / self.n as u32
    }

    /// Node `hβ`.
    pub fn node(&self, beta: usize) -> Float {
        Float::with_val(self.prec, beta as u32) / self.n as u32
    }

    pub fn weights(&self) -> &[Float] {
        &self.weights
    }

    pub fn a(&self) -> &Float {
        &self.a
    }

    pub fn b(&self) -> &Float {
        &self.b
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(Float::to_f64).collect()
    }

    pub fn a_f64(&self) -> f64 {
        self.a.to_f64()
    }

    pub fn b_f64(&self) -> f64 {
        self.b.to_f64()
    }

    /// Quadrature error `(ℓ, xᵅ) = 1/(α+1) − Σ C[β](hβ)ᵅ − A·α·0^{α−1} − B·α`
    /// for `α = 0..m−1`.
    pub fn moment_residuals(&self) -> Vec<Float> {
        (0..self.m)
            .map(|alpha| self.monomial_error(alpha as u32))
            .collect()
    }

    pub fn monomial_error(&self, alpha: u32) -> Float {
        let prec = self.prec;
        let mut err = Float::with_val(prec, 1) / (alpha + 1);
        for (beta, c) in self.weights.iter().enumerate() {
            err -= Float::with_val(prec, c * pow(&self.node(beta), alpha));
        }
        if alpha == 1 {
            err -= &self.a;
        }
        err -= Float::with_val(prec, &self.b * alpha);
        err
    }

    /// Fails with the first moment condition whose error exceeds `tolerance`.
    pub fn check_moments(&self, tolerance: f64) -> Result<()> {
        for (alpha, r) in self.moment_residuals().iter().enumerate() {
            let residual = r.to_f64().abs();
            if residual.is_nan() || residual > tolerance {
                return Err(Error::MomentViolation {
                    alpha,
                    residual,
                    tolerance,
                });
            }
        }
        Ok(())
    }

    /// `max(max_β |C[β] − C[N−β]|, |A + B|)`.
    pub fn reflection_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = Float::with_val(self.prec, &self.a + &self.b).abs().to_f64();
        for beta in 0..=n / 2 {
            let d = Float::with_val(self.prec, &self.weights[beta] - &self.weights[n - beta]);
            worst = worst.max(d.to_f64().abs());
        }
        worst
    }
}

/// Everything produced on the way to the optimal formula.
#[derive(Clone, Debug)]
pub struct Construction {
    pub roots: RootSet,
    pub solution: SystemSolution,
    pub formula: QuadratureFormula,
}

/// Interior weight `h (1 + Σ_k (d_k q_k^β + p_k q_k^{N−β}))`, `1 ≤ β ≤ N − 1`.
pub fn interior_weight(sol: &SystemSolution, roots: &RootSet, beta: usize) -> Float {
    assert!(
        beta >= 1 && beta < sol.n,
        "interior index {beta} outside 1..{}",
        sol.n
    );
    let prec = roots.working_bits;
    let mut acc = Float::with_val(prec, 1);
    for ((q, d), p) in roots.roots.iter().zip(&sol.d).zip(&sol.p) {
        acc += Float::with_val(prec, d * pow(q, beta as u32));
        acc += Float::with_val(prec, p * pow(q, (sol.n - beta) as u32));
    }
    acc / sol.n as u32
}

fn weights_from(sol: &SystemSolution, roots: &RootSet) -> QuadratureFormula {
    let prec = roots.working_bits;
    let n = sol.n;
    let h = Float::with_val(prec, 1) / n as u32;
    let h2 = Float::with_val(prec, &h * &h);
    let half = Float::with_val(prec, 0.5);

    let mut c0 = half.clone();
    let mut cn = half;
    let mut a = Float::with_val(prec, &Rational::from((1, 12)));
    let mut b = Float::with_val(prec, &Rational::from((-1, 12)));
    for ((q, d), p) in roots.roots.iter().zip(&sol.d).zip(&sol.p) {
        let r = RootPowers::new(q, n, 1);
        let q_n1 = Float::with_val(prec, &r.q_n * q);
        let inv1 = r.inv_1mq(0);
        let inv2 = r.inv_1mq(1);

        let t = Float::with_val(prec, p * &r.q_n) - Float::with_val(prec, d * q);
        c0 += t * &inv1;
        let t = Float::with_val(prec, d * &r.q_n) - Float::with_val(prec, p * q);
        cn += t * &inv1;
        let t = Float::with_val(prec, d * q) + Float::with_val(prec, p * &q_n1);
        a -= t * &inv2;
        let t = Float::with_val(prec, d * &q_n1) + Float::with_val(prec, p * q);
        b += t * &inv2;
    }

    let mut weights = Vec::with_capacity(n + 1);
    weights.push(c0 * &h);
    for beta in 1..n {
        weights.push(interior_weight(sol, roots, beta));
    }
    weights.push(cn * &h);
    QuadratureFormula {
        m: sol.m,
        n,
        prec,
        weights,
        a: a * &h2,
        b: b * &h2,
    }
}

/// Roots, amplitudes and weights of the optimal formula for order `m` on
/// `N` subintervals.
pub fn construct(m: usize, n: usize, precision_bits: u32) -> Result<Construction> {
    crate::check_order_and_nodes(m, n, 2)?;
    let roots = unit_disk_roots(m, precision_bits)?;
    let system = assemble(m, n, &roots)?;
    let solution = solve(&system)?;
    let formula = weights_from(&solution, &roots);
    Ok(Construction {
        roots,
        solution,
        formula,
    })
}

/// The optimal formula alone.
pub fn build(m: usize, n: usize, precision_bits: u32) -> Result<QuadratureFormula> {
    construct(m, n, precision_bits).map(|c| c.formula)
}
