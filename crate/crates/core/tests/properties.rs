use optquad::combinatorics::{bernoulli, fd_zero, geometric_power_sum, power_sum_bernoulli};
use optquad::euler_frobenius::euler_polynomial;
use optquad::integrator::{apply, error_and_bound, TestFunction};
use optquad::oracle::{lambda_closed_all, lambda_deviation, solve_full, stationarity_residual};
use optquad::{build, construct, moment_conditions_feasible};
use proptest::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

fn stirling2(n: usize, k: usize) -> Integer {
    let mut table = vec![vec![Integer::new(); n + 1]; n + 1];
    table[0][0] = Integer::from(1);
    for i in 1..=n {
        for j in 1..=i {
            table[i][j] = Integer::from(&table[i - 1][j] * j as u32) + &table[i - 1][j - 1];
        }
    }
    table[n][k].clone()
}

#[test]
fn finite_differences_are_scaled_stirling_numbers() {
    for k in 0..=30usize {
        for i in 0..=30usize {
            let want = if i > k {
                Integer::new()
            } else {
                stirling2(k, i) * Integer::from(Integer::factorial(i as u32))
            };
            assert_eq!(fd_zero(i as u32, k as u32), want, "i={i} k={k}");
        }
    }
}

#[test]
fn odd_bernoulli_numbers_vanish() {
    for n in (3..=29).step_by(2) {
        assert_eq!(bernoulli(n), 0);
    }
    assert_eq!(bernoulli(1), Rational::from((-1, 2)));
}

#[test]
fn euler_polynomials_at_one() {
    for k in 0..=20usize {
        let e = euler_polynomial(k);
        assert!(e.is_palindromic(), "k={k}");
        assert_eq!(
            e.eval_integer(&Integer::from(1)),
            Integer::from(Integer::factorial(k as u32 + 1))
        );
    }
}

fn rational_in(lo: i64, hi: i64) -> impl Strategy<Value = Rational> {
    (2i64..=997).prop_flat_map(move |den| {
        ((lo * den + 1)..(hi * den)).prop_map(move |num| Rational::from((num, den)))
    })
}

/// Both sides of
/// `Σ_i (dq + (−1)^{i+1} p q^{N+i}) / (q−1)^{i+1} Δⁱ0^α
///   = (−1)^{α+1} Σ_i (d qⁱ + (−1)^{i+1} p q^{N+1}) / (1−q)^{i+1} Δⁱ0^α`.
fn reflected_sums(
    d: &Rational,
    p: &Rational,
    q: &Rational,
    alpha: u32,
    n: u32,
) -> (Rational, Rational) {
    let qm1 = Rational::from(q - 1u32);
    let one_mq = Rational::from(1u32 - q);
    let mut left = Rational::new();
    let mut right = Rational::new();
    for i in 0..=alpha {
        let fd = Rational::from(fd_zero(i, alpha));
        let sign = if i % 2 == 1 { 1 } else { -1 };
        let num = Rational::from(d * q) + (p * Rational::from(q.pow(n + i))) * sign;
        left += num / qm1.clone().pow(i + 1) * &fd;
        let num = (d * Rational::from(q.pow(i))) + (p * Rational::from(q.pow(n + 1))) * sign;
        right += num / one_mq.clone().pow(i + 1) * &fd;
    }
    if alpha.is_multiple_of(2) {
        right = -right;
    }
    (left, right)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reflected_geometric_sums_agree_exactly(
        d in rational_in(-10, 10),
        p in rational_in(-10, 10),
        q in rational_in(-1, 0),
        alpha in 1u32..=8,
        n in 1u32..=12,
    ) {
        let (left, right) = reflected_sums(&d, &p, &q, alpha, n);
        prop_assert_eq!(left, right);
    }

    #[test]
    fn reflected_sum_factors_through_euler_polynomial(
        d in rational_in(-10, 10),
        p in rational_in(-10, 10),
        q in rational_in(-1, 0),
        alpha in 1u32..=8,
        n in 1u32..=12,
    ) {
        // Σ_i Δⁱ0^α qⁱ/(q−1)^{i+1} = q E_{α−1}(q)/(q−1)^{α+1} splits both halves of the left side
        let (left, _) = reflected_sums(&d, &p, &q, alpha, n);
        let e = euler_polynomial(alpha as usize - 1).eval_rational(&q);
        let qm1 = Rational::from(&q - 1u32);
        let denom = qm1.pow(alpha + 1);
        let sign = if alpha % 2 == 1 { 1 } else { -1 };
        let head = Rational::from(&d * &q) + (&p * Rational::from((&q).pow(n + 1))) * sign;
        let want = head * e / denom;
        prop_assert_eq!(left, want);
    }

    #[test]
    fn power_sums_match_direct_summation(beta in 0u32..=50, k in 0u32..=12) {
        let mut direct = Integer::new();
        for g in 0..beta {
            direct += Integer::from(Integer::u_pow_u(g, k));
        }
        prop_assert_eq!(power_sum_bernoulli(beta, k), Rational::from(direct));
    }

    #[test]
    fn geometric_power_sums_match_direct_summation(
        qi in 0usize..3,
        n in 1u32..=100,
        k in 0u32..=10,
    ) {
        let q = [-0.9, -0.5, -0.04][qi];
        let qr = Rational::from_f64(q).unwrap();
        let mut direct = Rational::new();
        for g in 0..n {
            direct += Rational::from((&qr).pow(g)) * Integer::from(Integer::u_pow_u(g, k));
        }
        let direct = direct.to_f64();
        let got = geometric_power_sum(q, n, k).unwrap();
        let scale = if direct == 0.0 { 1.0 } else { direct.abs() };
        prop_assert!((got - direct).abs() <= 1e-13 * scale);
    }
}

fn feasible_pair() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=8, 2usize..=64).prop_filter("moment conditions must be feasible", |(m, n)| {
        moment_conditions_feasible(*m, *n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn formulas_satisfy_moments_and_symmetry((m, n) in feasible_pair()) {
        let f = build(m, n, 128).unwrap();
        prop_assert_eq!(f.weights().len(), n + 1);
        prop_assert!(f.check_moments(1e-12).is_ok());
        prop_assert!(f.reflection_defect() < 1e-12);
        for k in 0..m as u32 {
            let v = apply(&f, &TestFunction::monomial(k)).to_f64();
            prop_assert!((v - 1.0 / (k as f64 + 1.0)).abs() <= 1e-13);
        }
    }

    #[test]
    fn bound_is_never_exceeded(m in 2usize..=6, n in 4usize..=64, which in 0usize..4) {
        let g = match which {
            0 => TestFunction::exp(),
            1 => TestFunction::sin_two_pi(),
            2 => TestFunction::reciprocal_shift(),
            _ => TestFunction::monomial(m as u32 + 1),
        };
        let c = construct(m, n, 128).unwrap();
        let e = error_and_bound(&c, &g).unwrap();
        prop_assert!(e.ratio >= 0.0 && e.ratio <= 1.0 + 1e-10, "ratio {}", e.ratio);
    }

    #[test]
    fn closed_form_agrees_with_dense_oracle(m in 2usize..=6, n in 2usize..=20) {
        prop_assume!(moment_conditions_feasible(m, n));
        let c = construct(m, n, 128).unwrap();
        let s = solve_full(m, n, 128).unwrap();
        let h = 1.0 / n as f64;
        for (x, y) in c.formula.weights().iter().zip(&s.weights) {
            prop_assert!(Float::with_val(128, x - y).abs().to_f64() <= 1e-9 * h);
        }
        prop_assert!(Float::with_val(128, c.formula.a() - &s.a).abs().to_f64() <= 1e-9 * h * h);
        prop_assert!(Float::with_val(128, c.formula.b() - &s.b).abs().to_f64() <= 1e-9 * h * h);
        let closed = lambda_closed_all(&c);
        if s.multipliers_unique {
            prop_assert!(lambda_deviation(m, &closed, &s.lambda) <= 1e-8);
        } else {
            prop_assert!(stationarity_residual(&c.formula, &closed).to_f64() <= 1e-10);
        }
    }
}
