//! Optimal quadrature formulas of the form
//!
//! ```text
//! ∫₀¹ φ(x) dx ≈ Σ_{β=0}^{N} C[β] φ(hβ) + A φ'(0) + B φ'(1),   h = 1/N,
//! ```
//!
//! that minimise the norm of the error functional in the Sobolev space
//! `L₂^(m)(0,1)`, for any `m ≥ 2` and `N ≥ 2`.
//!
//! The construction runs in three stages:
//!
//! 1. [`euler_frobenius`] builds the Euler–Frobenius polynomial `E_{2m−2}`
//!    with exact integer coefficients and isolates its `m − 1` roots in
//!    `(−1, 0)` by exact rational bisection.
//! 2. [`optimal_system`] assembles and solves the `2m − 2` linear system for
//!    the correction amplitudes `d_k`, `p_k`.
//! 3. [`formula`] turns those amplitudes into the weights `C[β]`, `A`, `B`.
//!
//! Every stage has an independent check. [`oracle`] solves the full
//! Wiener–Hopf system for the same coefficients by dense elimination, and
//! [`error_norm`] evaluates the squared error norm three ways (closed form,
//! direct quadratic form, pairing with the extremal function).
//!
//! ```
//! let f = optquad::build(2, 4, optquad::DEFAULT_PRECISION_BITS).unwrap();
//! // m = 2 reproduces the Euler–Maclaurin corrected trapezoidal rule.
//! let w = f.weights_f64();
//! assert!((w[0] - 0.125).abs() < 1e-15);
//! assert!((w[1] - 0.25).abs() < 1e-15);
//! assert!((f.a_f64() - 1.0 / 192.0).abs() < 1e-15);
//! ```
//!
//! All arithmetic that is not exact runs in MPFR floating point at a working
//! precision derived from the requested bits, see [`working_bits`].

pub mod cli;
pub mod combinatorics;
pub mod error_norm;
pub mod euler_frobenius;
pub mod formula;
pub mod integrator;
pub mod linalg;
pub mod optimal_system;
pub mod oracle;
pub mod poly;

mod error;

pub use error::{Error, Result};
pub use formula::{build, construct, Construction, QuadratureFormula};

/// Largest Sobolev order accepted by the public constructors.
pub const MAX_ORDER: usize = 20;

/// Precision used when the caller does not ask for one.
pub const DEFAULT_PRECISION_BITS: u32 = 128;

/// Smallest precision accepted anywhere.
pub const MIN_PRECISION_BITS: u32 = 64;

/// Working precision for order `m`.
///
/// The system coefficients and norm expressions are alternating sums of
/// `Δⁱ0ʲ` with `j ≤ 2m`, whose terms reach `(2m)!` in magnitude, and the
/// amplitude system's condition number grows at a similar rate. The
/// requested bits are padded with `2 log₂((2m+1)!)` plus a fixed margin.
pub fn working_bits(m: usize, precision_bits: u32) -> u32 {
    let factorial_bits: f64 = (2..=(2 * m + 1)).map(|k| (k as f64).log2()).sum();
    precision_bits + 2 * factorial_bits.ceil() as u32 + 32
}

/// Checks that `(m, n)` admits an optimal formula and that `m` is in the
/// supported range.
///
/// A formula with `N + 1` nodes and two endpoint derivatives has `N + 3`
/// functionals and must be exact on the `m` monomials `1, …, x^{m−1}`.
/// With `N + 3 ≥ m` that is always possible. With `N + 3 = m − 1` the
/// conditions are rank deficient but still consistent when `N` is even,
/// because the one polynomial annihilated by all functionals is odd about
/// `x = 1/2` and has zero integral. Anything smaller has no solution.
pub fn check_order_and_nodes(m: usize, n: usize, min_nodes: usize) -> Result<()> {
    if !(2..=MAX_ORDER).contains(&m) {
        return Err(Error::parameter(
            "m",
            format!("order must lie in 2..={MAX_ORDER}, got {m}"),
        ));
    }
    if n < min_nodes {
        return Err(Error::parameter(
            "N",
            format!("need N ≥ {min_nodes}, got {n}"),
        ));
    }
    if !moment_conditions_feasible(m, n) {
        return Err(Error::parameter(
            "N",
            format!(
                "no formula with N = {n} is exact on polynomials of degree {}; need N ≥ {}",
                m - 1,
                m.saturating_sub(3).max(min_nodes)
            ),
        ));
    }
    Ok(())
}

/// True when some formula with `N` subintervals satisfies all `m` moment
/// conditions.
pub fn moment_conditions_feasible(m: usize, n: usize) -> bool {
    n + 3 >= m || (n + 4 == m && n.is_multiple_of(2))
}

/// True when the `m` moment conditions are linearly independent for `N`
/// subintervals, which makes the Lagrange multipliers unique.
pub fn moment_conditions_independent(m: usize, n: usize) -> bool {
    n + 3 >= m
}

pub(crate) fn check_precision(precision_bits: u32) -> Result<()> {
    if precision_bits < MIN_PRECISION_BITS {
        return Err(Error::parameter(
            "precision-bits",
            format!("need at least {MIN_PRECISION_BITS} bits, got {precision_bits}"),
        ));
    }
    Ok(())
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/combinatorics.md")]
    mod combinatorics {}
    #[doc = include_str!("../../../book/src/euler_frobenius.md")]
    mod euler_frobenius {}
    #[doc = include_str!("../../../book/src/optimal_system.md")]
    mod optimal_system {}
    #[doc = include_str!("../../../book/src/error_norm.md")]
    mod error_norm {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/integrator.md")]
    mod integrator {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
