//! Reference solution of the full stationarity system for the optimal
//! weights, by dense elimination, with no use of the Euler–Frobenius
//! structure.
//!
//! Unknowns are `C[0..N]`, `A`, `B` and the Lagrange multipliers
//! `λ_0..λ_{m−1}` of the moment conditions. Rows are, in order:
//!
//! * for each node `hβ`, stationarity in `C[β]`:
//!   `Σ_γ C[γ] G(hβ − hγ) − A G′(hβ) − B G′(hβ − 1) + Σ_α λ_α (hβ)^α = F(hβ)`,
//!   scaled by `(2m − 1)!`;
//! * stationarity in `A` and in `B`;
//! * the moment conditions for `α = 0..m−1`.
//!
//! When `N + 3 = m − 1` the moment conditions are dependent and the
//! multipliers are not unique. The highest moment row and its multiplier
//! are then dropped (that multiplier is reported as zero), and the dropped
//! condition is checked afterwards.

use rug::{Float, Integer, Rational};

use crate::combinatorics::{bernoulli, fd_zero};
use crate::euler_frobenius::RootSet;
use crate::formula::QuadratureFormula;
use crate::linalg;
use crate::optimal_system::{pow, RootPowers, SystemSolution};
use crate::{Construction, Error, Result};

/// Elimination growth above this is reported so precision can be raised.
pub const GROWTH_FLAG: f64 = 1e6;

/// Largest dense system the oracle agrees to solve.
pub const MAX_DENSE_DIM: usize = 2000;

#[derive(Clone, Debug)]
pub struct WienerHopfSolution {
    pub m: usize,
    pub n: usize,
    pub weights: Vec<Float>,
    pub a: Float,
    pub b: Float,
    /// `λ_0..λ_{m−1}`
    pub lambda: Vec<Float>,
    pub residual_norm: Float,
    pub rhs_norm: Float,
    pub growth_factor: f64,
    /// False when the moment conditions are dependent and `lambda` is one
    /// of many valid multiplier vectors.
    pub multipliers_unique: bool,
    pub prec: u32,
}

impl WienerHopfSolution {
    pub fn growth_flagged(&self) -> bool {
        self.growth_factor > GROWTH_FLAG
    }

    pub fn formula(&self) -> QuadratureFormula {
        QuadratureFormula::new(
            self.m,
            self.weights.clone(),
            self.a.clone(),
            self.b.clone(),
            self.prec,
        )
        .expect("oracle always has at least two nodes")
    }

    pub fn lambda_f64(&self) -> Vec<f64> {
        self.lambda.iter().map(Float::to_f64).collect()
    }
}

fn factorial(prec: u32, n: u32) -> Float {
    Float::with_val(prec, Integer::from(Integer::factorial(n)))
}

struct Kernel {
    prec: u32,
    m: u32,
    /// `(2m − 1)!`
    f1: Float,
    f2: Float,
    f3: Float,
}

impl Kernel {
    fn new(m: usize, prec: u32) -> Self {
        let m = m as u32;
        Kernel {
            prec,
            m,
            f1: factorial(prec, 2 * m - 1),
            f2: factorial(prec, 2 * m - 2),
            f3: factorial(prec, 2 * m - 3),
        }
    }

    /// Node-row coefficients of `C[γ]`, `A`, `B`, `λ_α` and the right-hand
    /// side, all times `(2m − 1)!`.
    fn node_row(&self, x: &Float, nodes: &[Float], multipliers: usize) -> (Vec<Float>, Float) {
        let prec = self.prec;
        let m = self.m;
        let mut row = Vec::with_capacity(nodes.len() + 2 + multipliers);
        for y in nodes {
            let d = Float::with_val(prec, x - y).abs();
            row.push(pow(&d, 2 * m - 1) / 2u32);
        }
        // (2m − 1)! / (2 (2m − 2)!) = (2m − 1)/2
        let half_odd = Float::with_val(prec, 2 * m - 1) / 2u32;
        row.push(-pow(x, 2 * m - 2) * &half_odd);
        let xm1 = Float::with_val(prec, x - 1u32);
        row.push(pow(&xm1, 2 * m - 2) * &half_odd);
        for alpha in 0..multipliers {
            row.push(pow(x, alpha as u32) * &self.f1);
        }
        // F(x)·(2m − 1)! = (x^{2m} + (1 − x)^{2m}) / (4m)
        let one_minus = Float::with_val(prec, 1 - x);
        let rhs = (pow(x, 2 * m) + pow(&one_minus, 2 * m)) / (4 * m);
        (row, rhs)
    }
}

/// Dense solve of the full system for `N ≥ 1`.
pub fn solve_full(m: usize, n: usize, precision_bits: u32) -> Result<WienerHopfSolution> {
    crate::check_order_and_nodes(m, n, 1)?;
    crate::check_precision(precision_bits)?;
    let dim = n + 3 + m;
    if dim > MAX_DENSE_DIM {
        return Err(Error::parameter(
            "N",
            format!("dense system of size {dim} exceeds the budget of {MAX_DENSE_DIM}"),
        ));
    }
    let prec = crate::working_bits(m, precision_bits);
    let unique = crate::moment_conditions_independent(m, n);
    // moments α ≥ N + 3 are dependent on the lower ones
    let kept = if unique { m } else { n + 3 };
    let kernel = Kernel::new(m, prec);
    let nodes: Vec<Float> = (0..=n)
        .map(|b| Float::with_val(prec, b as u32) / n as u32)
        .collect();
    let (ia, ib, il) = (n + 1, n + 2, n + 3);
    let size = n + 3 + kept;

    let mut matrix = Vec::with_capacity(size);
    let mut rhs = Vec::with_capacity(size);
    for x in &nodes {
        let (row, r) = kernel.node_row(x, &nodes, kept);
        matrix.push(row);
        rhs.push(r);
    }

    let two_f1 = Float::with_val(prec, &kernel.f1 * 2u32);
    let inv_two_f2 = Float::with_val(prec, 1) / (Float::with_val(prec, &kernel.f2 * 2u32));
    let inv_two_f3 = Float::with_val(prec, 1) / (Float::with_val(prec, &kernel.f3 * 2u32));
    let e = 2 * m as u32 - 2;

    let mut row = vec![Float::new(prec); size];
    for (g, y) in nodes.iter().enumerate() {
        row[g] = pow(y, e) * &inv_two_f2;
    }
    row[ib] = inv_two_f3.clone();
    if kept > 1 {
        row[il + 1] = Float::with_val(prec, -1);
    }
    matrix.push(row);
    rhs.push(Float::with_val(prec, 1) / &two_f1);

    let mut row = vec![Float::new(prec); size];
    for (g, y) in nodes.iter().enumerate() {
        row[g] = pow(&Float::with_val(prec, y - 1u32), e) * &inv_two_f2;
    }
    row[ia] = -inv_two_f3.clone();
    for alpha in 1..kept {
        row[il + alpha] = Float::with_val(prec, alpha as u32);
    }
    matrix.push(row);
    rhs.push(Float::with_val(prec, 1) / &two_f1);

    for alpha in 0..kept as u32 {
        let mut row = vec![Float::new(prec); size];
        for (g, y) in nodes.iter().enumerate() {
            row[g] = pow(y, alpha);
        }
        if alpha == 1 {
            row[ia] = Float::with_val(prec, 1);
        }
        if alpha >= 1 {
            row[ib] = Float::with_val(prec, alpha);
        }
        matrix.push(row);
        rhs.push(Float::with_val(prec, 1) / (alpha + 1));
    }

    let sol = linalg::solve(&matrix, &rhs, prec)?;
    let mut x = sol.x;
    let mut lambda = x.split_off(il);
    lambda.resize(m, Float::new(prec));
    let b = x.pop().expect("B");
    let a = x.pop().expect("A");
    let out = WienerHopfSolution {
        m,
        n,
        weights: x,
        a,
        b,
        lambda,
        residual_norm: sol.residual_norm,
        rhs_norm: linalg::max_norm(&rhs),
        growth_factor: sol.growth_factor,
        multipliers_unique: unique,
        prec,
    };
    if !unique {
        // the dropped moment conditions must hold on their own
        out.formula().check_moments(1e-20)?;
    }
    Ok(out)
}

/// Largest residual of the stationarity rows (node rows scaled by
/// `(2m − 1)!`, then the `A` and `B` rows) for the given weights and
/// multipliers.
pub fn stationarity_residual(f: &QuadratureFormula, lambda: &[Float]) -> Float {
    let prec = f.prec();
    let m = f.m();
    let n = f.n();
    let kernel = Kernel::new(m, prec);
    let nodes: Vec<Float> = (0..=n).map(|b| f.node(b)).collect();
    let mut unknowns: Vec<Float> = f.weights().to_vec();
    unknowns.push(f.a().clone());
    unknowns.push(f.b().clone());
    unknowns.extend(lambda.iter().cloned());

    let mut worst = Float::new(prec);
    let mut check = |row: &[Float], rhs: Float| {
        let mut r = rhs;
        for (c, u) in row.iter().zip(&unknowns) {
            r -= Float::with_val(prec, c * u);
        }
        let r = r.abs();
        if r > worst {
            worst = r;
        }
    };
    for x in &nodes {
        let (row, rhs) = kernel.node_row(x, &nodes, m);
        check(&row, rhs);
    }
    let e = 2 * m as u32 - 2;
    let two_f1 = Float::with_val(prec, &kernel.f1 * 2u32);
    let inv_two_f2 = Float::with_val(prec, 1) / (Float::with_val(prec, &kernel.f2 * 2u32));
    let inv_two_f3 = Float::with_val(prec, 1) / (Float::with_val(prec, &kernel.f3 * 2u32));

    let mut row = vec![Float::new(prec); n + 3 + m];
    for (g, y) in nodes.iter().enumerate() {
        row[g] = pow(y, e) * &inv_two_f2;
    }
    row[n + 2] = inv_two_f3.clone();
    row[n + 4] = Float::with_val(prec, -1);
    check(&row, Float::with_val(prec, 1) / &two_f1);

    let mut row = vec![Float::new(prec); n + 3 + m];
    for (g, y) in nodes.iter().enumerate() {
        row[g] = pow(&Float::with_val(prec, y - 1u32), e) * &inv_two_f2;
    }
    row[n + 1] = -inv_two_f3;
    for alpha in 1..m {
        row[n + 3 + alpha] = Float::with_val(prec, alpha as u32);
    }
    check(&row, Float::with_val(prec, 1) / &two_f1);
    worst
}

/// Closed-form multiplier `λ_j` from the roots, amplitudes and weights.
pub fn lambda_closed(
    sol: &SystemSolution,
    roots: &RootSet,
    f: &QuadratureFormula,
    j: usize,
) -> Float {
    let m = sol.m;
    assert!(j < m, "multiplier index {j} out of range for m = {m}");
    let prec = roots.working_bits;
    let n = sol.n;
    let h = Float::with_val(prec, 1) / n as u32;
    let neg_nodes: Vec<Float> = (0..=n).map(|g| -f.node(g)).collect();
    let moment = |e: u32| {
        f.weights()
            .iter()
            .zip(&neg_nodes)
            .fold(Float::new(prec), |acc, (c, x)| {
                acc + Float::with_val(prec, c * pow(x, e))
            })
    };
    let two_m = 2 * m as u32;

    if j == 0 {
        let mut v = Float::with_val(prec, 1) / (factorial(prec, two_m) * 2u32);
        v += moment(two_m - 1) / (factorial(prec, two_m - 1) * 2u32);
        v -= Float::with_val(prec, f.b()) / (factorial(prec, two_m - 2) * 2u32);
        return v;
    }

    let j32 = j as u32;
    let e = two_m - j32;
    let mut v = Float::with_val(prec, 1) / (2 * e);
    if e % 2 == 1 {
        v = -v;
    }
    let h_e = pow(&h, e);
    v -= Float::with_val(prec, &bernoulli(e as usize)) * &h_e / e;

    let mut sum = Float::new(prec);
    for ((q, d), p) in roots.roots.iter().zip(&sol.d).zip(&sol.p) {
        let r = RootPowers::new(q, n, e as usize);
        let dq = Float::with_val(prec, d * q);
        for i in 0..e as usize {
            let fd = fd_zero(i as u32, e - 1);
            if fd == 0 {
                continue;
            }
            let mut t = Float::with_val(prec, p * &r.q_n) * &r.q_pow[i];
            if i % 2 == 1 {
                t = -t;
            }
            t -= &dq;
            t *= &r.inv_qm1[i];
            t *= &fd;
            sum += t;
        }
    }
    v -= sum * &h_e;
    v += moment(e - 1) / 2u32;
    let mut bt = Float::with_val(prec, f.b() * (e - 1)) / 2u32;
    if e % 2 == 1 {
        // (−1)^{2m−2−j} = (−1)^{e}
        bt = -bt;
    }
    v -= bt;
    let denom = Float::with_val(
        prec,
        Integer::from(Integer::factorial(e - 1)) * Integer::from(Integer::factorial(j32)),
    );
    v / denom
}

/// `λ_0..λ_{m−1}` for a constructed formula.
pub fn lambda_closed_all(c: &Construction) -> Vec<Float> {
    (0..c.solution.m)
        .map(|j| lambda_closed(&c.solution, &c.roots, &c.formula, j))
        .collect()
}

/// `‖x − y‖∞ / max(‖y‖∞, floor)` with `floor = 1/(2m+1)!`, the natural size
/// of the multipliers, so that multipliers that vanish exactly do not blow
/// the comparison up.
pub fn lambda_deviation(m: usize, closed: &[Float], dense: &[Float]) -> f64 {
    let prec = dense.first().map_or(53, Float::prec);
    let diff: Vec<Float> = closed
        .iter()
        .zip(dense)
        .map(|(x, y)| Float::with_val(prec, x - y))
        .collect();
    let floor = Float::with_val(
        prec,
        &Rational::from((1, Integer::from(Integer::factorial(2 * m as u32 + 1)))),
    );
    let scale = linalg::max_norm(dense).max(&floor);
    (linalg::max_norm(&diff) / scale).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct;

    #[test]
    fn low_order_weights() {
        let s = solve_full(2, 2, 128).unwrap();
        let w: Vec<f64> = s.weights.iter().map(Float::to_f64).collect();
        assert_eq!(w.len(), 3);
        for (got, want) in w.iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-30);
        }
        assert!((s.a.to_f64() - 1.0 / 48.0).abs() < 1e-30);
        assert!((s.b.to_f64() + 1.0 / 48.0).abs() < 1e-30);
        assert!(s.multipliers_unique);

        let s = solve_full(3, 4, 128).unwrap();
        for (got, want) in s.weights.iter().zip([0.125, 0.25, 0.25, 0.25, 0.125]) {
            assert!((got.to_f64() - want).abs() < 1e-30);
        }
        assert!((s.a.to_f64() - 1.0 / 192.0).abs() < 1e-30);
    }

    #[test]
    fn matches_closed_form_weights() {
        for (m, n) in [(4, 10), (5, 12), (6, 5)] {
            let s = solve_full(m, n, 128).unwrap();
            let c = construct(m, n, 128).unwrap();
            let h = 1.0 / n as f64;
            for (x, y) in s.weights.iter().zip(c.formula.weights()) {
                assert!((x.to_f64() - y.to_f64()).abs() <= 1e-9 * h, "m={m} N={n}");
            }
            assert!((s.a.to_f64() - c.formula.a_f64()).abs() <= 1e-9 * h * h);
            assert!((s.b.to_f64() - c.formula.b_f64()).abs() <= 1e-9 * h * h);
            assert!(s.residual_norm.to_f64() < 1e-10 * (1.0 + s.rhs_norm.to_f64()));
            assert!(!s.growth_flagged());
        }
    }

    #[test]
    fn closed_form_multipliers_match() {
        for (m, n) in [(2, 2), (3, 4), (4, 10), (5, 5), (6, 20)] {
            let s = solve_full(m, n, 128).unwrap();
            let c = construct(m, n, 128).unwrap();
            let closed = lambda_closed_all(&c);
            assert!(
                lambda_deviation(m, &closed, &s.lambda) < 1e-8,
                "m={m} N={n}"
            );
            assert!(stationarity_residual(&c.formula, &closed).to_f64() < 1e-10);
        }
    }

    #[test]
    fn single_interval() {
        for m in 2..=4 {
            let s = solve_full(m, 1, 128).unwrap();
            s.formula().check_moments(1e-12).unwrap();
            assert!(s.formula().reflection_defect() < 1e-11);
        }
        assert!(solve_full(5, 1, 128).is_err());
    }

    #[test]
    fn dependent_moments() {
        let s = solve_full(6, 2, 128).unwrap();
        assert!(!s.multipliers_unique);
        assert!(s.lambda[5].is_zero());
        let w: Vec<f64> = s.weights.iter().map(Float::to_f64).collect();
        assert!((w[0] - 7.0 / 30.0).abs() < 1e-14);
        assert!((w[1] - 8.0 / 15.0).abs() < 1e-14);
        // any valid multiplier vector satisfies stationarity, closed form included
        let c = construct(6, 2, 128).unwrap();
        let closed = lambda_closed_all(&c);
        assert!(stationarity_residual(&s.formula(), &closed).to_f64() < 1e-10);
        assert!(stationarity_residual(&s.formula(), &s.lambda).to_f64() < 1e-10);
    }

    #[test]
    fn budget_and_range() {
        assert!(solve_full(2, MAX_DENSE_DIM, 128).is_err());
        assert!(solve_full(2, 0, 128).is_err());
    }
}
