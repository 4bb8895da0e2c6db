//! Three independent evaluations of the squared error-functional norm
//! `‖ℓ‖²` in `L₂^(m)(0,1)*`:
//!
//! * the closed form in the roots and amplitudes,
//! * the quadratic form in `C`, `A`, `B` obtained by pairing `ℓ` with itself
//!   through the fundamental solution `G(x) = |x|^{2m−1}/(2(2m−1)!)`,
//! * the Riesz pairing `(ℓ, ψ_ℓ)` with the extremal function `ψ_ℓ = ℓ ∗ G`,
//!   built as an explicit piecewise polynomial.
//!
//! The last two need the formula to be exact on polynomials of degree
//! `m − 1`; outside that subspace the kernel `G` does not represent the
//! norm.

use std::fmt;

use rug::{Float, Integer, Rational};

use crate::combinatorics::{bernoulli, fd_zero};
use crate::euler_frobenius::RootSet;
use crate::formula::QuadratureFormula;
use crate::optimal_system::{pow, RootPowers, SystemSolution};
use crate::poly::Polynomial;
use crate::Result;

/// Moment tolerance below which the kernel representation is trusted.
pub const MOMENT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormMethod {
    ClosedForm,
    QuadraticForm,
    ExtremalPairing,
}

impl NormMethod {
    pub const ALL: [NormMethod; 3] = [
        NormMethod::ClosedForm,
        NormMethod::QuadraticForm,
        NormMethod::ExtremalPairing,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormMethod::ClosedForm => "closed_form",
            NormMethod::QuadraticForm => "quadratic_form",
            NormMethod::ExtremalPairing => "extremal_pairing",
        }
    }
}

impl fmt::Display for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct ErrorNorm {
    pub m: usize,
    pub n: usize,
    pub value_sq: Float,
    pub method: NormMethod,
}

impl ErrorNorm {
    pub fn value_f64(&self) -> f64 {
        self.value_sq.to_f64()
    }

    /// `|a − b| / |b|`, in working precision.
    pub fn relative_difference(&self, other: &ErrorNorm) -> f64 {
        let d = Float::with_val(self.value_sq.prec(), &self.value_sq - &other.value_sq);
        (d / &other.value_sq).abs().to_f64()
    }
}

fn factorial(prec: u32, n: u32) -> Float {
    Float::with_val(prec, Integer::from(Integer::factorial(n)))
}

fn signed(v: Float, negative: bool) -> Float {
    if negative {
        -v
    } else {
        v
    }
}

/// `(−1)^{m+1} [B_{2m} h^{2m}/(2m)! + h^{2m+1}/(2m)! Σ_k Σ_{i=0}^{2m} (1 − q_k^N)(d_k q_kⁱ + (−1)ⁱ p_k q_k)/(1 − q_k)^{i+1} Δⁱ0^{2m}]`.
pub fn norm_sq_closed(sol: &SystemSolution, roots: &RootSet) -> ErrorNorm {
    let prec = roots.working_bits;
    let m = sol.m;
    let two_m = 2 * m as u32;
    let h = Float::with_val(prec, 1) / sol.n as u32;
    let fact = factorial(prec, two_m);

    let mut sum = Float::new(prec);
    for ((q, d), p) in roots.roots.iter().zip(&sol.d).zip(&sol.p) {
        let r = RootPowers::new(q, sol.n, 2 * m);
        let one_minus_qn = Float::with_val(prec, 1 - &r.q_n);
        let pq = Float::with_val(prec, p * q);
        for i in 0..=(2 * m) {
            let f = fd_zero(i as u32, two_m);
            if f == 0 {
                continue;
            }
            let mut t = Float::with_val(prec, d * &r.q_pow[i]);
            if i % 2 == 0 {
                t += &pq;
            } else {
                t -= &pq;
            }
            t *= &one_minus_qn;
            t *= r.inv_1mq(i);
            t *= &f;
            sum += t;
        }
    }
    let mut value = Float::with_val(prec, &bernoulli(2 * m)) * pow(&h, two_m);
    value += sum * pow(&h, two_m + 1);
    value /= &fact;
    ErrorNorm {
        m,
        n: sol.n,
        value_sq: signed(value, m.is_multiple_of(2)),
        method: NormMethod::ClosedForm,
    }
}

/// The quadratic form `(ℓ, ℓ ∗ G)` written out in the coefficients.
pub fn norm_sq_direct(f: &QuadratureFormula) -> Result<ErrorNorm> {
    f.check_moments(MOMENT_TOLERANCE)?;
    let prec = f.prec();
    let m = f.m() as u32;
    let n = f.n();
    let h = f.h();
    let c = f.weights();
    let (a, b) = (f.a(), f.b());
    let f1 = factorial(prec, 2 * m - 1);
    let f2 = factorial(prec, 2 * m - 2);
    let f3 = factorial(prec, 2 * m - 3);
    let f0 = factorial(prec, 2 * m);

    let mut s = Float::with_val(prec, a * b) / &f3;
    s -= Float::with_val(prec, a - b) / &f1;

    let mut cross = Float::new(prec);
    let mut source = Float::new(prec);
    for (beta, cb) in c.iter().enumerate() {
        let x = f.node(beta);
        let one_minus = Float::with_val(prec, 1 - &x);
        let mut t = Float::with_val(prec, a * pow(&x, 2 * m - 2));
        t -= Float::with_val(prec, b * pow(&one_minus, 2 * m - 2));
        cross += t * cb;
        let t = pow(&x, 2 * m) + pow(&one_minus, 2 * m);
        source += t * cb;
    }
    s += cross / &f2;
    s += source / &f0;

    // Σ_β Σ_γ C[β] C[γ] |β − γ|^{2m−1}, grouped by the lag |β − γ|
    let mut double = Float::new(prec);
    for lag in 1..=n {
        let mut acc = Float::new(prec);
        for beta in 0..=(n - lag) {
            acc += Float::with_val(prec, &c[beta] * &c[beta + lag]);
        }
        double +=
            acc * Float::with_val(prec, Integer::from(Integer::u_pow_u(lag as u32, 2 * m - 1)));
    }
    s -= double * pow(&h, 2 * m - 1) / &f1;
    s -= Float::with_val(prec, 1) / factorial(prec, 2 * m + 1);

    Ok(ErrorNorm {
        m: m as usize,
        n,
        value_sq: signed(s, m.is_multiple_of(2)),
        method: NormMethod::QuadraticForm,
    })
}

/// `ψ_ℓ` on `[0, 1]` as one polynomial per subinterval `[hβ, h(β+1)]`.
///
/// The pieces have degree `2m`: besides the shifted `|x − hγ|^{2m−1}`
/// kernels, the convolution of `G` with the integral part of `ℓ` contributes
/// `(x^{2m} + (1 − x)^{2m})/(2(2m)!)`.
#[derive(Clone, Debug)]
pub struct ExtremalSpline {
    m: usize,
    breakpoints: Vec<Float>,
    pieces: Vec<Polynomial>,
}

impl ExtremalSpline {
    pub fn breakpoints(&self) -> &[Float] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    fn piece_index(&self, x: &Float) -> usize {
        let n = self.pieces.len();
        self.breakpoints[1..n]
            .iter()
            .take_while(|b| *b <= x)
            .count()
    }

    pub fn eval(&self, x: &Float) -> Float {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// Largest jump of `ψ^{(r)}`, `r = 0..=2m−2`, across interior breakpoints.
    pub fn continuity_jumps(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, x) in self
            .breakpoints
            .iter()
            .enumerate()
            .skip(1)
            .take(self.pieces.len() - 1)
        {
            let mut left = self.pieces[k - 1].clone();
            let mut right = self.pieces[k].clone();
            for _ in 0..=(2 * self.m - 2) {
                let jump = Float::with_val(x.prec(), left.eval(x) - right.eval(x));
                worst = worst.max(jump.to_f64().abs());
                left = left.derivative();
                right = right.derivative();
            }
        }
        worst
    }
}

/// Builds `(−1)^m [F(x) − Σ C[γ] G(x − hγ) + A G′(x) + B G′(x − 1)]` with
/// `F(x) = ∫₀¹ G(x − y) dy`, taking the polynomial part to be zero.
pub fn build_extremal(f: &QuadratureFormula) -> Result<ExtremalSpline> {
    f.check_moments(MOMENT_TOLERANCE)?;
    let prec = f.prec();
    let m = f.m() as u32;
    let n = f.n();
    let negate = m % 2 == 1;
    let zero = Float::new(prec);
    let one = Float::with_val(prec, 1);
    let inv_f0 = Float::with_val(prec, 1) / (factorial(prec, 2 * m) * 2u32);
    let inv_f1 = Float::with_val(prec, 1) / (factorial(prec, 2 * m - 1) * 2u32);
    let inv_f2 = Float::with_val(prec, 1) / (factorial(prec, 2 * m - 2) * 2u32);
    let outer = |v: Float| signed(v, negate);

    let breakpoints: Vec<Float> = (0..=n).map(|b| f.node(b)).collect();
    let mut pieces = Vec::with_capacity(n);
    for beta in 0..n {
        let mut p = Polynomial::zero(2 * m as usize, prec);
        // F(x); (1 − x)^{2m} = (x − 1)^{2m}
        p.add_shifted_power(&outer(inv_f0.clone()), &zero, 2 * m);
        p.add_shifted_power(&outer(inv_f0.clone()), &one, 2 * m);
        for (gamma, c) in f.weights().iter().enumerate() {
            // |x − hγ|^{2m−1} is (x − hγ)^{2m−1} to the right of the node
            let scale = Float::with_val(prec, c * &inv_f1);
            let scale = if gamma <= beta { -scale } else { scale };
            p.add_shifted_power(&outer(scale), &breakpoints[gamma], 2 * m - 1);
        }
        p.add_shifted_power(
            &outer(Float::with_val(prec, f.a() * &inv_f2)),
            &zero,
            2 * m - 2,
        );
        p.add_shifted_power(
            &outer(-Float::with_val(prec, f.b() * &inv_f2)),
            &one,
            2 * m - 2,
        );
        pieces.push(p);
    }
    Ok(ExtremalSpline {
        m: m as usize,
        breakpoints,
        pieces,
    })
}

/// `(ℓ, ψ) = ∫₀¹ ψ − Σ C[β] ψ(hβ) − A ψ′(0) − B ψ′(1)`, with one-sided
/// derivatives at the ends.
pub fn pair_with_functional(f: &QuadratureFormula, psi: &ExtremalSpline) -> ErrorNorm {
    let prec = f.prec();
    let n = f.n();
    let mut value = Float::new(prec);
    for (k, piece) in psi.pieces.iter().enumerate() {
        value += piece.integrate(&psi.breakpoints[k], &psi.breakpoints[k + 1]);
    }
    for (beta, c) in f.weights().iter().enumerate() {
        let piece = &psi.pieces[beta.min(n - 1)];
        value -= Float::with_val(prec, c * piece.eval(&psi.breakpoints[beta]));
    }
    let d_first = psi.pieces[0].derivative().eval(&psi.breakpoints[0]);
    let d_last = psi.pieces[n - 1].derivative().eval(&psi.breakpoints[n]);
    value -= Float::with_val(prec, f.a() * d_first);
    value -= Float::with_val(prec, f.b() * d_last);
    ErrorNorm {
        m: f.m(),
        n,
        value_sq: value,
        method: NormMethod::ExtremalPairing,
    }
}

/// All three routes for the optimal formula of order `m` on `N` intervals.
pub fn all_routes(construction: &crate::Construction) -> Result<[ErrorNorm; 3]> {
    let f = &construction.formula;
    let closed = norm_sq_closed(&construction.solution, &construction.roots);
    let direct = norm_sq_direct(f)?;
    let psi = build_extremal(f)?;
    let pairing = pair_with_functional(f, &psi);
    Ok([closed, direct, pairing])
}

/// `h^{2m}|B_{2m}|/(2m)!`, the norm of the order-`m` formula when the root
/// corrections vanish (`m = 2, 3`).
pub fn leading_term(m: usize, n: usize, prec: u32) -> Float {
    let h = Rational::from((1, n as u32));
    let mut v = Float::with_val(prec, &bernoulli(2 * m)).abs();
    v *= pow(&Float::with_val(prec, &h), 2 * m as u32);
    v / factorial(prec, 2 * m as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build, construct, linalg, Error};

    fn rel(a: &Float, b: f64) -> f64 {
        (a.to_f64() - b).abs() / b.abs()
    }

    #[test]
    fn closed_form_for_low_orders() {
        let c = construct(2, 2, 128).unwrap();
        let v = norm_sq_closed(&c.solution, &c.roots);
        assert!(rel(&v.value_sq, 1.0 / 11520.0) < 1e-14);
        let c = construct(3, 4, 128).unwrap();
        let v = norm_sq_closed(&c.solution, &c.roots);
        assert!(rel(&v.value_sq, 0.25f64.powi(6) / 30240.0) < 1e-14);
        assert!(rel(&leading_term(3, 4, 128), 0.25f64.powi(6) / 30240.0) < 1e-14);
    }

    #[test]
    fn quadratic_form_for_order_two() {
        for (n, want) in [(2, 1.0 / 11520.0), (4, 0.25f64.powi(4) / 720.0)] {
            let v = norm_sq_direct(&build(2, n, 128).unwrap()).unwrap();
            assert!(rel(&v.value_sq, want) < 1e-14);
        }
    }

    #[test]
    fn plain_trapezoid_is_worse() {
        let prec = 200;
        for n in [2usize, 4, 8] {
            let h = Float::with_val(prec, 1) / n as u32;
            let mut w = vec![h.clone(); n + 1];
            w[0] /= 2u32;
            w[n] /= 2u32;
            let trap =
                QuadratureFormula::new(2, w, Float::new(prec), Float::new(prec), prec).unwrap();
            let worse = norm_sq_direct(&trap).unwrap().value_f64();
            let best = 1.0 / (n as f64).powi(4) / 720.0;
            assert!(worse > best * (1.0 + 1e-6), "N={n}");
        }
    }

    #[test]
    fn moment_violations_are_rejected() {
        let prec = 128;
        let w = vec![Float::with_val(prec, 0.5); 3];
        let f = QuadratureFormula::new(2, w, Float::new(prec), Float::new(prec), prec).unwrap();
        assert!(matches!(
            norm_sq_direct(&f),
            Err(Error::MomentViolation { alpha: 0, .. })
        ));
        assert!(build_extremal(&f).is_err());
    }

    #[test]
    fn extremal_pairing_examples() {
        let f = build(2, 2, 128).unwrap();
        let psi = build_extremal(&f).unwrap();
        assert_eq!(psi.pieces().len(), 2);
        assert!(rel(&pair_with_functional(&f, &psi).value_sq, 1.0 / 11520.0) < 1e-10);
        let f = build(3, 8, 128).unwrap();
        let psi = build_extremal(&f).unwrap();
        assert!(
            rel(
                &pair_with_functional(&f, &psi).value_sq,
                0.125f64.powi(6) / 30240.0
            ) < 1e-10
        );
    }

    #[test]
    fn extremal_function_is_smooth() {
        for (m, n) in [(2, 2), (3, 5), (4, 10), (6, 8)] {
            let f = build(m, n, 128).unwrap();
            let psi = build_extremal(&f).unwrap();
            assert!(psi.continuity_jumps() < 1e-10, "m={m} N={n}");
            let mid = Float::with_val(f.prec(), 0.5);
            assert!(psi.eval(&mid).is_finite());
        }
    }

    #[test]
    fn three_routes_agree() {
        for m in 2..=6 {
            for n in [2, 4, 8, 16] {
                let c = construct(m, n, 128).unwrap();
                let [closed, direct, pairing] = all_routes(&c).unwrap();
                assert!(closed.value_sq > 0, "m={m} N={n}");
                assert!(closed.relative_difference(&direct) < 1e-8, "m={m} N={n}");
                assert!(closed.relative_difference(&pairing) < 1e-8, "m={m} N={n}");
                assert!(direct.relative_difference(&pairing) < 1e-8, "m={m} N={n}");
            }
        }
    }

    #[test]
    fn frozen_values() {
        for (m, n, want) in [
            (4, 10, 9.867896666e-15),
            (4, 20, 3.542437645e-17),
            (5, 10, 5.934810028e-18),
            (6, 5, 1.384421305e-16),
            (6, 20, 1.49576244e-24),
        ] {
            let c = construct(m, n, 128).unwrap();
            let v = norm_sq_closed(&c.solution, &c.roots);
            assert!(
                rel(&v.value_sq, want) < 1e-8,
                "m={m} N={n}: {}",
                v.value_f64()
            );
        }
    }

    #[test]
    fn decay_under_refinement() {
        let norm = |m: usize, n: usize| {
            let c = construct(m, n, 128).unwrap();
            norm_sq_closed(&c.solution, &c.roots).value_f64()
        };
        for m in [2, 3] {
            for n in [2, 4, 8, 16, 32] {
                let ratio = norm(m, 2 * n) / norm(m, n);
                let want = 0.5f64.powi(2 * m as i32);
                assert!((ratio - want).abs() <= 1e-12 * want, "m={m} N={n}");
            }
        }
        // beyond m = 3 the ratio carries an O(h) relative correction, so the
        // deviation from 2^{−2m} shrinks with N rather than vanishing
        let deviation =
            |m: usize, n: usize| (norm(m, 2 * n) / norm(m, n) * 4f64.powi(m as i32) - 1.0).abs();
        for m in [4, 5, 6] {
            let devs: Vec<f64> = [16, 32, 64].iter().map(|&n| deviation(m, n)).collect();
            assert!(devs.windows(2).all(|w| w[1] < w[0]), "m={m}: {devs:?}");
        }
        assert!(deviation(4, 64) < 0.6 * deviation(4, 32));
        assert!(deviation(4, 128) < 0.01);
    }

    /// Moves `f` back onto the moment constraints along their gradients.
    fn project(
        f: &QuadratureFormula,
        weights: Vec<Float>,
        a: Float,
        b: Float,
    ) -> QuadratureFormula {
        let prec = f.prec();
        let m = f.m();
        let n = f.n();
        let mut g = QuadratureFormula::new(m, weights, a, b, prec).unwrap();
        // gradient of Σ C (hβ)^α + [α=1] A + α B with respect to (C, A, B)
        let rows: Vec<Vec<Float>> = (0..m as u32)
            .map(|alpha| {
                let mut r: Vec<Float> = (0..=n).map(|beta| pow(&f.node(beta), alpha)).collect();
                r.push(Float::with_val(prec, u32::from(alpha == 1)));
                r.push(Float::with_val(prec, alpha));
                r
            })
            .collect();
        let gram: Vec<Vec<Float>> = rows
            .iter()
            .map(|ri| {
                rows.iter()
                    .map(|rj| {
                        ri.iter().zip(rj).fold(Float::new(prec), |acc, (x, y)| {
                            acc + Float::with_val(prec, x * y)
                        })
                    })
                    .collect()
            })
            .collect();
        let residuals = g.moment_residuals();
        let mu = linalg::solve(&gram, &residuals, prec).unwrap().x;
        let mut w = g.weights().to_vec();
        let mut a = g.a().clone();
        let mut b = g.b().clone();
        for (r, mu) in rows.iter().zip(&mu) {
            for (wi, ri) in w.iter_mut().zip(r) {
                *wi += Float::with_val(prec, ri * mu);
            }
            a += Float::with_val(prec, &r[n + 1] * mu);
            b += Float::with_val(prec, &r[n + 2] * mu);
        }
        g = QuadratureFormula::new(m, w, a, b, prec).unwrap();
        g
    }

    #[test]
    fn optimum_is_a_constrained_minimum() {
        for (m, n) in [(2, 4), (3, 6), (4, 10), (5, 8)] {
            let f = build(m, n, 128).unwrap();
            let best = norm_sq_direct(&f).unwrap();
            let step = Float::with_val(f.prec(), 1e-3) * f.h();
            for idx in 0..(n + 3) {
                for sign in [1i32, -1] {
                    let mut w = f.weights().to_vec();
                    let mut a = f.a().clone();
                    let mut b = f.b().clone();
                    let delta = Float::with_val(f.prec(), &step * sign);
                    match idx {
                        i if i <= n => w[i] += &delta,
                        i if i == n + 1 => a += &delta,
                        _ => b += &delta,
                    }
                    let g = project(&f, w, a, b);
                    let v = norm_sq_direct(&g).unwrap();
                    assert!(v.value_sq >= best.value_sq, "m={m} N={n} idx={idx}");
                }
            }
        }
    }
}
