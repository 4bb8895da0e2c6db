//! The `2m − 2` linear system for the correction amplitudes `d_k`, `p_k`.
//!
//! The optimal weights are `h` in the interior plus geometric corrections
//! `d_k q_k^β + p_k q_k^{N−β}`, one pair per root `q_k` of `E_{2m−2}` inside
//! the unit disk. Substituting that ansatz into the moment conditions and
//! the stationarity equations leaves `2m − 2` conditions on the amplitudes.
//!
//! Rows come in a fixed order: the moment rows for `j = 2..m−1` (right-hand
//! side `B_{j+1}/(j+1)`), one moment row with `j = 2m − 2`, the stationarity
//! rows for `j = 2..m−1`, and one stationarity row with `j = 2m − 2`. Columns
//! are `d_1..d_{m−1}` then `p_1..p_{m−1}`.
//!
//! For `m = 2, 3` the right-hand side vanishes and so do all amplitudes.

use rug::ops::Pow;
use rug::{Float, Rational};

use crate::combinatorics::{bernoulli, fd_zero};
use crate::euler_frobenius::RootSet;
use crate::linalg;
use crate::{Error, Result};

/// Powers of one root that every row and weight formula needs.
#[derive(Clone, Debug)]
pub(crate) struct RootPowers {
    pub q: Float,
    /// `q^N`
    pub q_n: Float,
    /// `qⁱ` for `i = 0..=top`
    pub q_pow: Vec<Float>,
    /// `1/(q − 1)^{i+1}` for `i = 0..=top`
    pub inv_qm1: Vec<Float>,
}

impl RootPowers {
    pub fn new(q: &Float, n: usize, top: usize) -> Self {
        let prec = q.prec();
        let mut q_pow = Vec::with_capacity(top + 1);
        let mut inv_qm1 = Vec::with_capacity(top + 1);
        let inv = Float::with_val(prec, 1) / Float::with_val(prec, q - 1u32);
        let mut qp = Float::with_val(prec, 1);
        let mut ip = inv.clone();
        for _ in 0..=top {
            q_pow.push(qp.clone());
            inv_qm1.push(ip.clone());
            qp *= q;
            ip *= &inv;
        }
        RootPowers {
            q: q.clone(),
            q_n: pow(q, n as u32),
            q_pow,
            inv_qm1,
        }
    }

    /// `1/(1 − q)^{i+1}`
    pub fn inv_1mq(&self, i: usize) -> Float {
        let v = self.inv_qm1[i].clone();
        if i.is_multiple_of(2) {
            -v
        } else {
            v
        }
    }
}

/// `x^e` by binary powering.
pub(crate) fn pow(x: &Float, e: u32) -> Float {
    Float::with_val(x.prec(), x.pow(e))
}

fn sign(i: usize) -> i32 {
    if i.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// `Δⁱ0ʲ` for `i = 0..=j` as floats.
fn fd_row(j: usize, prec: u32) -> Vec<Float> {
    (0..=j as u32)
        .map(|i| Float::with_val(prec, fd_zero(i, j as u32)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SystemMatrix {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<Vec<Float>>,
    pub rhs: Vec<Float>,
    pub prec: u32,
}

impl SystemMatrix {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

pub fn assemble(m: usize, n: usize, roots: &RootSet) -> Result<SystemMatrix> {
    crate::check_order_and_nodes(m, n, 2)?;
    if roots.m != m || roots.roots.len() != m - 1 {
        return Err(Error::parameter(
            "roots",
            format!(
                "expected the {} roots for m = {m}, got a set for m = {}",
                m - 1,
                roots.m
            ),
        ));
    }
    let prec = roots.working_bits;
    let k_count = m - 1;
    let top = 2 * m - 2;
    let powers: Vec<RootPowers> = roots
        .roots
        .iter()
        .map(|q| RootPowers::new(q, n, top))
        .collect();

    let mut entries = Vec::with_capacity(2 * k_count);
    let mut rhs = Vec::with_capacity(2 * k_count);
    let moment_js: Vec<usize> = (2..m).chain([top]).collect();

    for &j in &moment_js {
        let fd = fd_row(j, prec);
        let mut row = vec![Float::new(prec); 2 * k_count];
        for (k, r) in powers.iter().enumerate() {
            for (i, f) in fd.iter().enumerate() {
                let w = Float::with_val(prec, &r.inv_qm1[i] * f);
                row[k] += Float::with_val(prec, &r.q * &w);
                let t = Float::with_val(prec, &r.q_n * &r.q_pow[i]) * w * sign(i + 1);
                row[k_count + k] += t;
            }
        }
        entries.push(row);
        if j == top {
            rhs.push(Float::new(prec));
        } else {
            let b = bernoulli(j + 1) / Rational::from(j as u32 + 1);
            rhs.push(Float::with_val(prec, &b));
        }
    }

    for &j in &moment_js {
        let fd = fd_row(j, prec);
        let mut row = vec![Float::new(prec); 2 * k_count];
        for (k, r) in powers.iter().enumerate() {
            let one_minus_qn = Float::with_val(prec, 1 - &r.q_n);
            for (i, f) in fd.iter().enumerate() {
                let w = Float::with_val(prec, &r.inv_qm1[i] * f);
                if j == top {
                    let t = Float::with_val(prec, &r.q_n * &r.q_pow[i]) * &w * sign(i + 1);
                    row[k] += t;
                    row[k_count + k] += Float::with_val(prec, &r.q * &w);
                } else {
                    let t = Float::with_val(prec, &one_minus_qn * &r.q_pow[i]) * &w * sign(i + 1);
                    row[k] += t;
                    let t = Float::with_val(prec, &one_minus_qn * &r.q) * &w;
                    row[k_count + k] -= t;
                }
            }
        }
        entries.push(row);
        rhs.push(Float::new(prec));
    }

    Ok(SystemMatrix {
        m,
        n,
        entries,
        rhs,
        prec,
    })
}

#[derive(Clone, Debug)]
pub struct SystemSolution {
    pub m: usize,
    pub n: usize,
    pub d: Vec<Float>,
    pub p: Vec<Float>,
    /// `max |M x − b|`
    pub residual_norm: Float,
    pub rhs_norm: Float,
    pub growth_factor: f64,
}

impl SystemSolution {
    pub fn d_f64(&self) -> Vec<f64> {
        self.d.iter().map(Float::to_f64).collect()
    }

    pub fn p_f64(&self) -> Vec<f64> {
        self.p.iter().map(Float::to_f64).collect()
    }
}

/// Solves the amplitude system.
///
/// When `N + 3 = m − 1` the moment conditions are dependent, the system has
/// a one-dimensional null space, and the formula is already pinned down by
/// the moments alone. Any solution then yields the same weights, and the
/// basic solution from complete pivoting is returned.
pub fn solve(sys: &SystemMatrix) -> Result<SystemSolution> {
    let k_count = sys.m - 1;
    let sol = if crate::moment_conditions_independent(sys.m, sys.n) {
        linalg::solve(&sys.entries, &sys.rhs, sys.prec)?
    } else {
        linalg::solve_deficient(&sys.entries, &sys.rhs, sys.prec, 1)?
    };
    let mut x = sol.x;
    let p = x.split_off(k_count);
    Ok(SystemSolution {
        m: sys.m,
        n: sys.n,
        d: x,
        p,
        residual_norm: sol.residual_norm,
        rhs_norm: linalg::max_norm(&sys.rhs),
        growth_factor: sol.growth_factor,
    })
}

/// `Z_p = Σ_k Σ_{i=0}^{p} (d_k q_k^{N+i} − (−1)ⁱ p_k q_k) / (1 − q_k)^{i+1} · Δⁱ0ᵖ`.
pub fn z_p(sol: &SystemSolution, roots: &RootSet, p: usize) -> Float {
    let prec = roots.working_bits;
    let fd = fd_row(p, prec);
    let mut acc = Float::new(prec);
    for ((q, d), pk) in roots.roots.iter().zip(&sol.d).zip(&sol.p) {
        let r = RootPowers::new(q, sol.n, p);
        for (i, f) in fd.iter().enumerate() {
            let mut t = Float::with_val(prec, &r.q_n * &r.q_pow[i]) * d;
            let s = Float::with_val(prec, pk * &r.q) * sign(i + 1);
            t += s;
            t *= r.inv_1mq(i);
            t *= f;
            acc += t;
        }
    }
    acc
}
