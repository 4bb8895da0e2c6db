//! Applying formulas to concrete integrands and checking the worst-case
//! bound `|(ℓ, φ)| ≤ ‖ℓ‖ · ‖φ^(m)‖_{L₂}`.

use std::fmt;
use std::sync::Arc;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer};

use crate::error_norm::norm_sq_closed;
use crate::formula::QuadratureFormula;
use crate::optimal_system::pow;
use crate::{construct, Construction, Error, Result};

type RealFn = Arc<dyn Fn(&Float) -> Float + Send + Sync>;
type IntegralFn = Arc<dyn Fn(u32) -> Float + Send + Sync>;
type SeminormFn = Arc<dyn Fn(usize, u32) -> Option<Float> + Send + Sync>;

/// An integrand with analytically known integral, endpoint derivatives and
/// Sobolev seminorms. All callbacks receive or return values at the caller's
/// precision.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    eval: RealFn,
    derivative: RealFn,
    integral: IntegralFn,
    seminorm: SeminormFn,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .finish()
    }
}

impl TestFunction {
    /// `seminorm(m, prec)` returns `‖φ^(m)‖_{L₂(0,1)}`, or `None` when it is
    /// not known for that order.
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&Float) -> Float + Send + Sync + 'static,
        derivative: impl Fn(&Float) -> Float + Send + Sync + 'static,
        integral: impl Fn(u32) -> Float + Send + Sync + 'static,
        seminorm: impl Fn(usize, u32) -> Option<Float> + Send + Sync + 'static,
    ) -> Self {
        TestFunction {
            name: name.into(),
            eval: Arc::new(eval),
            derivative: Arc::new(derivative),
            integral: Arc::new(integral),
            seminorm: Arc::new(seminorm),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &Float) -> Float {
        (self.eval)(x)
    }

    pub fn derivative(&self, x: &Float) -> Float {
        (self.derivative)(x)
    }

    pub fn exact_integral(&self, prec: u32) -> Float {
        (self.integral)(prec)
    }

    pub fn sobolev_seminorm(&self, m: usize, prec: u32) -> Option<Float> {
        (self.seminorm)(m, prec)
    }

    /// `xᵏ`.
    pub fn monomial(k: u32) -> Self {
        let name = match k {
            0 => "one".to_string(),
            1 => "x".to_string(),
            k => format!("x{k}"),
        };
        TestFunction::new(
            name,
            move |x| pow(x, k),
            move |x| {
                if k == 0 {
                    Float::new(x.prec())
                } else {
                    pow(x, k - 1) * k
                }
            },
            move |prec| Float::with_val(prec, 1) / (k + 1),
            move |m, prec| {
                let m = m as u32;
                if m > k {
                    return Some(Float::new(prec));
                }
                // (k!/(k−m)!)² / (2(k−m) + 1)
                let falling =
                    Integer::from(Integer::factorial(k)) / Integer::from(Integer::factorial(k - m));
                let sq = Float::with_val(prec, falling.square()) / (2 * (k - m) + 1);
                Some(sq.sqrt())
            },
        )
    }

    pub fn exp() -> Self {
        TestFunction::new(
            "expx",
            |x| Float::with_val(x.prec(), x.exp_ref()),
            |x| Float::with_val(x.prec(), x.exp_ref()),
            |prec| Float::with_val(prec, 1).exp() - 1u32,
            |_, prec| {
                let e2 = Float::with_val(prec, 2).exp();
                Some(((e2 - 1u32) / 2u32).sqrt())
            },
        )
    }

    pub fn sin_two_pi() -> Self {
        let two_pi = |prec: u32| Float::with_val(prec, Constant::Pi) * 2u32;
        TestFunction::new(
            "sin2pix",
            move |x| (two_pi(x.prec()) * x).sin(),
            move |x| {
                let w = two_pi(x.prec());
                Float::with_val(x.prec(), &w * x).cos() * w
            },
            Float::new,
            move |m, prec| {
                let w = two_pi(prec);
                Some(w.pow(m as u32) / Float::with_val(prec, 2).sqrt())
            },
        )
    }

    /// `1/(1 + x)`.
    pub fn reciprocal_shift() -> Self {
        TestFunction::new(
            "inv1px",
            |x| Float::with_val(x.prec(), 1) / Float::with_val(x.prec(), x + 1u32),
            |x| {
                let s = Float::with_val(x.prec(), x + 1u32);
                -(Float::with_val(x.prec(), 1) / s.square())
            },
            |prec| Float::with_val(prec, Constant::Log2),
            |m, prec| {
                // ∫₀¹ (m!)² (1 + x)^{−2m−2} dx
                let m = m as u32;
                let fact = Float::with_val(prec, Integer::from(Integer::factorial(m)));
                let tail: Float = 1 - Float::with_val(prec, Float::i_exp(1, -(2 * m as i32 + 1)));
                let sq: Float = fact.square() * tail / (2 * m + 1);
                Some(sq.sqrt())
            },
        )
    }

    /// The built-in corpus, with `xm` resolved for order `m`.
    pub fn by_name(name: &str, m: usize) -> Result<Self> {
        match name {
            "one" => Ok(Self::monomial(0)),
            "x" => Ok(Self::monomial(1)),
            "x2" => Ok(Self::monomial(2)),
            "x3" => Ok(Self::monomial(3)),
            "xm" => {
                let mut f = Self::monomial(m as u32);
                f.name = "xm".into();
                Ok(f)
            }
            "expx" => Ok(Self::exp()),
            "sin2pix" => Ok(Self::sin_two_pi()),
            "inv1px" => Ok(Self::reciprocal_shift()),
            other => Err(Error::UnknownFunction(other.to_string())),
        }
    }
}

/// Names accepted by [`TestFunction::by_name`].
pub const CORPUS: [&str; 8] = ["one", "x", "x2", "x3", "xm", "expx", "sin2pix", "inv1px"];

/// `Σ C[β] g(hβ) + A g′(0) + B g′(1)`.
pub fn apply(f: &QuadratureFormula, g: &TestFunction) -> Float {
    terms(f, g)
        .into_iter()
        .fold(Float::new(f.prec()), |acc, t| acc + t)
}

fn terms(f: &QuadratureFormula, g: &TestFunction) -> Vec<Float> {
    let prec = f.prec();
    let mut out: Vec<Float> = f
        .weights()
        .iter()
        .enumerate()
        .map(|(beta, c)| Float::with_val(prec, c * g.eval(&f.node(beta))))
        .collect();
    out.push(Float::with_val(
        prec,
        f.a() * g.derivative(&Float::new(prec)),
    ));
    out.push(Float::with_val(
        prec,
        f.b() * g.derivative(&Float::with_val(prec, 1)),
    ));
    out
}

#[derive(Clone, Debug)]
pub struct ErrorBound {
    pub approx: Float,
    pub exact: Float,
    pub error: Float,
    /// `‖ℓ‖ · ‖g^(m)‖`
    pub bound: Float,
    /// `error / bound`, zero when the bound vanishes.
    pub ratio: f64,
    /// `2^−precision_bits · (Σ|terms| + |exact|)`: errors below this are
    /// rounding, not truncation.
    pub rounding_floor: Float,
}

impl ErrorBound {
    pub fn at_rounding_floor(&self) -> bool {
        self.error <= self.rounding_floor
    }
}

/// Error of the optimal formula on `g` against its worst-case bound.
pub fn error_and_bound(c: &Construction, g: &TestFunction) -> Result<ErrorBound> {
    let f = &c.formula;
    let prec = f.prec();
    let seminorm = g
        .sobolev_seminorm(f.m(), prec)
        .ok_or_else(|| Error::MissingSeminorm {
            name: g.name().to_string(),
            m: f.m(),
        })?;
    let norm = norm_sq_closed(&c.solution, &c.roots).value_sq.sqrt();
    let terms = terms(f, g);
    let approx = terms.iter().fold(Float::new(prec), |acc, t| acc + t);
    let exact = g.exact_integral(prec);
    let scale = terms
        .iter()
        .fold(Float::with_val(prec, exact.abs_ref()), |acc, t| {
            acc + Float::with_val(prec, t.abs_ref())
        });
    let rounding_floor =
        scale * Float::with_val(prec, Float::i_exp(1, -(c.roots.precision_bits as i32)));
    let error = Float::with_val(prec, &exact - &approx).abs();
    let bound = norm * seminorm;
    let ratio = if bound.is_zero() {
        0.0
    } else {
        Float::with_val(prec, &error / &bound).to_f64()
    };
    Ok(ErrorBound {
        approx,
        exact,
        error,
        bound,
        ratio,
        rounding_floor,
    })
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub n: usize,
    pub error: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `log₂(error(N)/error(N′)) / log₂(N′/N)` toward the next row. `None`
    /// on the last row, when the seminorm vanishes, or when either error
    /// sits at the rounding floor (`sin 2πx` is integrated exactly by every
    /// symmetric rule with `A = −B`).
    pub observed_order: Option<f64>,
    /// Decay rate guaranteed by the bound, `m`.
    pub bound_order: usize,
    pub residual_norm: f64,
    pub growth_factor: f64,
}

pub fn convergence_sweep(
    m: usize,
    ns: &[usize],
    g: &TestFunction,
    precision_bits: u32,
) -> Result<Vec<SweepRow>> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parameter(
            "N-list",
            "values must be strictly ascending",
        ));
    }
    let mut rows: Vec<SweepRow> = Vec::with_capacity(ns.len());
    let mut errors = Vec::with_capacity(ns.len());
    for &n in ns {
        let c = construct(m, n, precision_bits)?;
        let e = error_and_bound(&c, g)?;
        rows.push(SweepRow {
            n,
            error: e.error.to_f64(),
            bound: e.bound.to_f64(),
            ratio: e.ratio,
            observed_order: None,
            bound_order: m,
            residual_norm: c.solution.residual_norm.to_f64(),
            growth_factor: c.solution.growth_factor,
        });
        errors.push(e);
    }
    for i in 0..rows.len().saturating_sub(1) {
        if errors[i].bound.is_zero()
            || errors[i].at_rounding_floor()
            || errors[i + 1].at_rounding_floor()
        {
            continue;
        }
        let ratio = Float::with_val(
            errors[i].error.prec(),
            &errors[i].error / &errors[i + 1].error,
        );
        let steps = (rows[i + 1].n as f64 / rows[i].n as f64).log2();
        rows[i].observed_order = Some(ratio.log2().to_f64() / steps);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build;

    #[test]
    fn exact_on_low_monomials() {
        let f = build(4, 8, 128).unwrap();
        for k in 0..4u32 {
            let g = TestFunction::monomial(k);
            let v = apply(&f, &g);
            assert!((v.to_f64() - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "x^{k}");
        }
    }

    #[test]
    fn seminorms() {
        let prec = 128;
        let s = TestFunction::monomial(3)
            .sobolev_seminorm(2, prec)
            .unwrap()
            .to_f64();
        // (6x)² integrates to 12
        assert!((s - 12f64.sqrt()).abs() < 1e-15);
        assert!(TestFunction::monomial(3)
            .sobolev_seminorm(4, prec)
            .unwrap()
            .is_zero());
        let s = TestFunction::exp()
            .sobolev_seminorm(5, prec)
            .unwrap()
            .to_f64();
        assert!((s - ((1f64.exp().powi(2) - 1.0) / 2.0).sqrt()).abs() < 1e-15);
        let s = TestFunction::sin_two_pi()
            .sobolev_seminorm(3, prec)
            .unwrap()
            .to_f64();
        assert!((s - (2.0 * std::f64::consts::PI).powi(3) / 2f64.sqrt()).abs() < 1e-12);
        // m = 1: ∫ (1+x)^{−4} = (1 − 1/8)/3
        let s = TestFunction::reciprocal_shift()
            .sobolev_seminorm(1, prec)
            .unwrap()
            .to_f64();
        assert!((s - (7.0f64 / 24.0).sqrt()).abs() < 1e-15);
        assert!(
            (TestFunction::reciprocal_shift()
                .exact_integral(prec)
                .to_f64()
                - 2f64.ln())
            .abs()
                < 1e-16
        );
    }

    #[test]
    fn bound_holds_for_smooth_functions() {
        for m in 2..=6 {
            for n in [4, 8, 16] {
                let c = construct(m, n, 128).unwrap();
                for g in [
                    TestFunction::exp(),
                    TestFunction::sin_two_pi(),
                    TestFunction::reciprocal_shift(),
                ] {
                    let e = error_and_bound(&c, &g).unwrap();
                    assert!(
                        e.ratio >= 0.0 && e.ratio <= 1.0 + 1e-10,
                        "m={m} N={n} {}",
                        g.name()
                    );
                }
            }
        }
    }

    #[test]
    fn polynomials_below_order_have_zero_ratio() {
        let c = construct(4, 8, 128).unwrap();
        let e = error_and_bound(&c, &TestFunction::monomial(3)).unwrap();
        assert_eq!(e.ratio, 0.0);
        assert!(e.error.to_f64() < 1e-30);
    }

    #[test]
    fn sweep_orders() {
        let rows = convergence_sweep(2, &[8, 16, 32, 64], &TestFunction::exp(), 128).unwrap();
        for r in &rows[..3] {
            assert!(r.observed_order.unwrap() >= 2.0);
        }
        assert!(rows[3].observed_order.is_none());
        for m in 4..=6 {
            let rows =
                convergence_sweep(m, &[8, 16, 32, 64], &TestFunction::reciprocal_shift(), 128)
                    .unwrap();
            for r in &rows[..3] {
                assert!(r.observed_order.unwrap() >= m as f64);
            }
        }
        let rows = convergence_sweep(3, &[8, 16, 32], &TestFunction::sin_two_pi(), 128).unwrap();
        assert!(rows.iter().all(|r| r.observed_order.is_none()));
        let rows = convergence_sweep(3, &[8, 16], &TestFunction::monomial(2), 128).unwrap();
        assert!(rows.iter().all(|r| r.observed_order.is_none()));
        assert!(convergence_sweep(3, &[16, 8], &TestFunction::exp(), 128).is_err());
    }

    #[test]
    fn odd_integrand_is_exact_by_symmetry() {
        for m in 2..=6 {
            for n in [4, 7, 16] {
                let c = construct(m, n, 128).unwrap();
                let e = error_and_bound(&c, &TestFunction::sin_two_pi()).unwrap();
                assert!(e.at_rounding_floor(), "m={m} N={n}");
                assert!(!error_and_bound(&c, &TestFunction::exp())
                    .unwrap()
                    .at_rounding_floor());
            }
        }
    }

    #[test]
    fn corpus_lookup() {
        for name in CORPUS {
            assert!(TestFunction::by_name(name, 4).is_ok());
        }
        assert_eq!(
            TestFunction::by_name("xm", 5)
                .unwrap()
                .sobolev_seminorm(5, 64)
                .unwrap()
                .to_f64(),
            120.0
        );
        assert!(matches!(
            TestFunction::by_name("cosh", 4),
            Err(Error::UnknownFunction(_))
        ));
    }
}
