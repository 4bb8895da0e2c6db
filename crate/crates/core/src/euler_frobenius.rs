//! Euler–Frobenius polynomials and the real roots of `E_{2m−2}` inside the
//! unit interval `(−1, 0)`.
//!
//! `E_k(x) = Σ_{i=0}^{k+1} Δⁱ0^{k+1} (x − 1)^{k+1−i}` has integer
//! coefficients, is palindromic, and for even `k` has `k` simple negative
//! roots that pair up as `q ↔ 1/q`. Roots are isolated with a Sturm sequence
//! and refined by bisection on dyadic rationals, so no floating-point
//! evaluation of the (badly conditioned) polynomial ever decides a sign.

use std::cmp::Ordering;

use rug::{Float, Integer, Rational};

use crate::combinatorics::{binomial, fd_zero};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerFrobeniusPoly {
    coeffs: Vec<Integer>,
}

impl EulerFrobeniusPoly {
    /// Wraps arbitrary integer coefficients (ascending powers). Trailing
    /// zeros are dropped.
    pub fn from_coeffs(mut coeffs: Vec<Integer>) -> Self {
        trim(&mut coeffs);
        EulerFrobeniusPoly { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Integer] {
        &self.coeffs
    }

    pub fn is_palindromic(&self) -> bool {
        let n = self.coeffs.len();
        (0..n / 2).all(|j| self.coeffs[j] == self.coeffs[n - 1 - j])
    }

    pub fn eval_integer(&self, x: &Integer) -> Integer {
        let mut acc = Integer::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_rational(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_float(&self, x: &Float) -> Float {
        let mut acc = Float::new(x.prec());
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    /// `Σ |c_j| |x|ʲ`, the scale against which a residual is judged.
    pub fn magnitude_at(&self, x: &Float) -> Float {
        let ax = Float::with_val(x.prec(), x.abs_ref());
        let mut acc = Float::new(x.prec());
        for c in self.coeffs.iter().rev() {
            acc *= &ax;
            acc += &*c.as_abs();
        }
        acc
    }

    /// Sign of `p(x)` computed exactly.
    pub fn sign_at(&self, x: &Rational) -> Ordering {
        sign_at(&self.coeffs, x)
    }
}

fn trim(coeffs: &mut Vec<Integer>) {
    while coeffs.len() > 1 && coeffs.last().is_some_and(|c| *c == 0) {
        coeffs.pop();
    }
    if coeffs.is_empty() {
        coeffs.push(Integer::new());
    }
}

/// `E_k` with exact integer coefficients.
pub fn euler_polynomial(k: usize) -> EulerFrobeniusPoly {
    let top = k as u32 + 1;
    let mut coeffs = vec![Integer::new(); k + 2];
    for i in 0..=top {
        let d = fd_zero(i, top);
        if d == 0 {
            continue;
        }
        // expand d · (x − 1)^{top − i}
        let e = top - i;
        for t in 0..=e {
            let term = &d * binomial(e, t);
            if (e - t).is_multiple_of(2) {
                coeffs[t as usize] += term;
            } else {
                coeffs[t as usize] -= term;
            }
        }
    }
    EulerFrobeniusPoly::from_coeffs(coeffs)
}

/// The reciprocal identity `E_k(x) = xᵏ E_k(1/x)` restated on coefficients.
pub fn reciprocal_check(p: &EulerFrobeniusPoly) -> bool {
    p.is_palindromic()
}

// ---------------------------------------------------------------------------
// exact sign evaluation and Sturm sequences

/// Sign of `Σ c_j xʲ` at `x = a/b` via `Σ c_j aʲ b^{d−j}` in integers.
fn sign_at(coeffs: &[Integer], x: &Rational) -> Ordering {
    let (num, den) = x.clone().into_numer_denom();
    let mut acc = coeffs.last().cloned().unwrap_or_default();
    let mut den_pow = Integer::from(1);
    for c in coeffs.iter().rev().skip(1) {
        den_pow *= &den;
        acc *= &num;
        acc += Integer::from(c * &den_pow);
    }
    acc.cmp0()
}

fn make_primitive(p: &mut Vec<Integer>) {
    trim(p);
    let mut g = Integer::new();
    for c in p.iter() {
        g.gcd_mut(c);
    }
    if g > 1 {
        for c in p.iter_mut() {
            c.div_exact_mut(&g);
        }
    }
}

/// Remainder of `a` by `b` up to a positive factor, which leaves every sign
/// the Sturm count depends on untouched.
fn positive_remainder(a: &[Integer], b: &[Integer]) -> Vec<Integer> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lc_b = b[db].clone();
    let lc_abs = Integer::from(lc_b.abs_ref());
    let lc_sign = lc_b.cmp0();
    while r.len() > db && !(r.len() == 1 && r[0] == 0) {
        let dr = r.len() - 1;
        let lc_r = r[dr].clone();
        let shift = dr - db;
        for c in r.iter_mut() {
            *c *= &lc_abs;
        }
        for (j, bj) in b.iter().enumerate() {
            let t = Integer::from(&lc_r * bj);
            if lc_sign == Ordering::Greater {
                r[j + shift] -= t;
            } else {
                r[j + shift] += t;
            }
        }
        r.pop();
        make_primitive(&mut r);
        if r.len() == 1 && r[0] == 0 {
            break;
        }
    }
    r
}

fn derivative(p: &[Integer]) -> Vec<Integer> {
    if p.len() <= 1 {
        return vec![Integer::new()];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| Integer::from(c * j as u32))
        .collect()
}

/// Sturm chain of a square-free integer polynomial.
#[derive(Clone, Debug)]
pub struct SturmSequence {
    chain: Vec<Vec<Integer>>,
}

impl SturmSequence {
    pub fn new(p: &EulerFrobeniusPoly) -> Self {
        let mut chain = vec![p.coeffs.clone()];
        let mut d = derivative(&p.coeffs);
        make_primitive(&mut d);
        if !(d.len() == 1 && d[0] == 0) {
            chain.push(d);
        }
        while chain.len() >= 2 {
            let n = chain.len();
            let r = positive_remainder(&chain[n - 2], &chain[n - 1]);
            if r.len() == 1 && r[0] == 0 {
                break;
            }
            chain.push(r.into_iter().map(|c| -c).collect());
        }
        SturmSequence { chain }
    }

    fn sign_changes(&self, x: &Rational) -> usize {
        let mut changes = 0;
        let mut last = Ordering::Equal;
        for p in &self.chain {
            let s = sign_at(p, x);
            if s == Ordering::Equal {
                continue;
            }
            if last != Ordering::Equal && s != last {
                changes += 1;
            }
            last = s;
        }
        changes
    }

    /// Distinct real roots in `(lo, hi]`.
    pub fn count(&self, lo: &Rational, hi: &Rational) -> usize {
        self.sign_changes(lo).saturating_sub(self.sign_changes(hi))
    }
}

/// `1 + max |c_j / c_d|`, a bound on the modulus of every root.
pub fn cauchy_bound(p: &EulerFrobeniusPoly) -> Rational {
    let lead = Integer::from(p.coeffs[p.degree()].abs_ref());
    let max = p
        .coeffs
        .iter()
        .map(|c| Integer::from(c.abs_ref()))
        .max()
        .unwrap_or_default();
    Rational::from((max, lead)) + 1
}

/// Brackets `[a, b]` of width below `2^−bits`, one per root of the square-free
/// polynomial `p` in the open interval `(lo, hi)`, ascending. Exact roots
/// come back as degenerate brackets `[r, r]`.
pub fn isolate_real_roots(
    p: &EulerFrobeniusPoly,
    lo: &Rational,
    hi: &Rational,
    bits: u32,
) -> Vec<(Rational, Rational)> {
    let sturm = SturmSequence::new(p);
    let width = Rational::from((Integer::from(1), Integer::from(1) << bits));
    let mut out = Vec::new();
    // roots on the endpoints themselves are excluded by the open interval
    let mut stack = vec![(lo.clone(), hi.clone())];
    while let Some((a, b)) = stack.pop() {
        let mut count = sturm.count(&a, &b);
        if p.sign_at(&b) == Ordering::Equal {
            if b != *hi {
                out.push((b.clone(), b.clone()));
            }
            count -= 1;
        }
        match count {
            0 => {}
            1 => out.push(refine(p, a, b, &width)),
            _ => {
                let mid = Rational::from(&a + &b) / 2u32;
                stack.push((a, mid.clone()));
                stack.push((mid, b));
            }
        }
    }
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out
}

/// Bisection on a bracket holding exactly one simple root, with the right
/// endpoint known not to be a root.
fn refine(
    p: &EulerFrobeniusPoly,
    mut a: Rational,
    mut b: Rational,
    width: &Rational,
) -> (Rational, Rational) {
    let sign_b = p.sign_at(&b);
    // a may be a root of p that lies outside (a, b]; step inside first
    while p.sign_at(&a) == Ordering::Equal || p.sign_at(&a) == sign_b {
        let mid = Rational::from(&a + &b) / 2u32;
        match p.sign_at(&mid) {
            Ordering::Equal => return (mid.clone(), mid),
            s if s == sign_b => b = mid,
            _ => a = mid,
        }
    }
    while Rational::from(&b - &a) >= *width {
        let mid = Rational::from(&a + &b) / 2u32;
        match p.sign_at(&mid) {
            Ordering::Equal => return (mid.clone(), mid),
            s if s == sign_b => b = mid,
            _ => a = mid,
        }
    }
    (a, b)
}

// ---------------------------------------------------------------------------

/// The `m − 1` roots `q_k` of `E_{2m−2}` with `|q_k| < 1`.
#[derive(Clone, Debug)]
pub struct RootSet {
    pub m: usize,
    /// Ascending, in `working_bits` precision.
    pub roots: Vec<Float>,
    /// Exact dyadic brackets around each root.
    pub brackets: Vec<(Rational, Rational)>,
    pub precision_bits: u32,
    pub working_bits: u32,
}

impl RootSet {
    pub fn roots_f64(&self) -> Vec<f64> {
        self.roots.iter().map(Float::to_f64).collect()
    }
}

/// Isolates the roots of `E_{2m−2}` in `(−1, 0)`.
///
/// Brackets are refined to width below `2^−w` where `w` is the working
/// precision for `m`, which is at least `precision_bits`.
pub fn unit_disk_roots(m: usize, precision_bits: u32) -> Result<RootSet> {
    if !(2..=crate::MAX_ORDER).contains(&m) {
        return Err(Error::parameter(
            "m",
            format!("order must lie in 2..={}, got {m}", crate::MAX_ORDER),
        ));
    }
    crate::check_precision(precision_bits)?;
    let working = crate::working_bits(m, precision_bits);
    let degree = 2 * m - 2;
    let poly = euler_polynomial(degree);
    let brackets = isolate_real_roots(&poly, &Rational::from(-1), &Rational::new(), working);
    if brackets.len() != m - 1 {
        return Err(Error::RootIsolation {
            degree,
            found: brackets.len(),
            expected: m - 1,
        });
    }
    let roots = brackets
        .iter()
        .map(|(a, b)| Float::with_val(working, &(Rational::from(a + b) / 2u32)))
        .collect();
    Ok(RootSet {
        m,
        roots,
        brackets,
        precision_bits,
        working_bits: working,
    })
}
