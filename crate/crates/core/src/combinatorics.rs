//! Exact integer and rational building blocks: binomials, Bernoulli numbers,
//! the finite differences `Δⁱ0ᵏ`, and the power-sum identities built on them.

use std::sync::RwLock;

use rug::ops::Pow;
use rug::{Integer, Rational};

use crate::{Error, Result};

/// `C(n, k)`, zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> Integer {
    if k > n {
        return Integer::new();
    }
    Integer::from(Integer::binomial_u(n, k))
}

static BERNOULLI: RwLock<Vec<Rational>> = RwLock::new(Vec::new());

/// Bernoulli number `B_n` with `B₁ = −1/2`.
///
/// Values are memoised; the cache is filled up to the largest index seen.
pub fn bernoulli(n: usize) -> Rational {
    if let Some(b) = BERNOULLI.read().unwrap().get(n) {
        return b.clone();
    }
    let mut cache = BERNOULLI.write().unwrap();
    if cache.len() <= n {
        *cache = akiyama_tanigawa(n);
    }
    cache[n].clone()
}

/// `B_0 ..= B_n` by the Akiyama–Tanigawa transform.
fn akiyama_tanigawa(n: usize) -> Vec<Rational> {
    let mut row: Vec<Rational> = Vec::with_capacity(n + 1);
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..=n {
        row.push(Rational::from((1, m as u32 + 1)));
        for j in (1..=m).rev() {
            let diff = Rational::from(&row[j - 1] - &row[j]);
            row[j - 1] = diff * j as u32;
        }
        out.push(row[0].clone());
    }
    // the transform yields B₁ = +1/2
    if n >= 1 {
        out[1] = Rational::from((-1, 2));
    }
    out
}

/// `Δⁱ0ᵏ = Σ_{j=0}^{i} (−1)^{i−j} C(i,j) jᵏ`, with `0⁰ = 1`.
pub fn fd_zero(i: u32, k: u32) -> Integer {
    let mut acc = Integer::new();
    for j in 0..=i {
        let term = binomial(i, j) * Integer::from(Integer::u_pow_u(j, k));
        if (i - j).is_multiple_of(2) {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// `Δⁱγᵏ` evaluated at `γ = x`, expanded through the binomial shift
/// `Δⁱ xᵏ = Σ_p C(k,p) Δⁱ0ᵖ x^{k−p}`.
pub fn fd_at(i: u32, k: u32, x: &Integer) -> Integer {
    let mut acc = Integer::new();
    for p in 0..=k {
        let d = fd_zero(i, p);
        if d == 0 {
            continue;
        }
        let mut xp = Integer::from(x.pow(k - p));
        xp *= d;
        xp *= binomial(k, p);
        acc += xp;
    }
    acc
}

/// `Σ_{γ=0}^{β−1} γᵏ` through the Bernoulli expansion
/// `Σ_{j=1}^{k+1} k! B_{k+1−j} / (j! (k+1−j)!) βʲ`.
pub fn power_sum_bernoulli(beta: u32, k: u32) -> Rational {
    let k_fact = Integer::from(Integer::factorial(k));
    let mut acc = Rational::new();
    for j in 1..=(k + 1) {
        let denom =
            Integer::from(Integer::factorial(j)) * Integer::from(Integer::factorial(k + 1 - j));
        let mut term = bernoulli((k + 1 - j) as usize);
        term *= Rational::from((k_fact.clone(), denom));
        term *= Integer::from(Integer::u_pow_u(beta, j));
        acc += term;
    }
    acc
}

/// `Σ_{γ=0}^{n−1} q^γ γᵏ` through the closed form
///
/// ```text
/// 1/(1−q) Σ_i (q/(1−q))ⁱ Δⁱ0ᵏ − qⁿ/(1−q) Σ_i (q/(1−q))ⁱ Δⁱγᵏ|_{γ=n}
/// ```
///
/// evaluated exactly in rational arithmetic from the binary value of `q`.
pub fn geometric_power_sum(q: f64, n: u32, k: u32) -> Result<f64> {
    if q == 1.0 {
        return Err(Error::UnitRatio);
    }
    let q = Rational::from_f64(q).ok_or_else(|| Error::parameter("q", "must be finite"))?;
    let one_minus_q = Rational::from(1 - &q);
    let ratio = Rational::from(&q / &one_minus_q);
    let n_int = Integer::from(n);

    let mut head = Rational::new();
    let mut tail = Rational::new();
    let mut ratio_pow = Rational::from(1);
    for i in 0..=k {
        head += Rational::from(&ratio_pow * fd_zero(i, k));
        tail += Rational::from(&ratio_pow * fd_at(i, k, &n_int));
        ratio_pow *= &ratio;
    }
    let q_n = Rational::from((&q).pow(n));
    let value = (head - tail * q_n) / one_minus_q;
    Ok(value.to_f64())
}
