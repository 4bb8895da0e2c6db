//! Dense Gaussian elimination with one step of iterative refinement, in MPFR
//! arithmetic.
//!
//! The systems here are small (`2m − 2` unknowns for the reduced system,
//! `N + 3 + m` for the full Wiener–Hopf system), so there is no blocking or
//! structure exploitation. Full-rank systems use partial pivoting. Systems
//! with a known rank deficiency use complete pivoting and return the basic
//! solution that sets the trailing free unknowns to zero.

use rug::Float;

use crate::{Error, Result};

/// A pivot counts as zero once it falls below the largest initial entry
/// times `2^−(prec − PIVOT_GUARD_BITS)`, i.e. when fewer than this many bits
/// of working precision separate it from rounding noise.
pub const PIVOT_GUARD_BITS: u32 = 64;

#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub x: Vec<Float>,
    /// `max_i |b_i − (A x)_i|` after refinement, computed in doubled precision.
    pub residual_norm: Float,
    /// Largest entry of the eliminated matrix over the largest initial entry.
    pub growth_factor: f64,
}

struct Lu {
    lu: Vec<Vec<Float>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    rank: usize,
    growth_factor: f64,
}

fn abs_max<'a>(values: impl Iterator<Item = &'a Float>, prec: u32) -> Float {
    values.fold(Float::new(prec), |acc, v| {
        if *v.as_abs() > acc {
            Float::with_val(prec, &*v.as_abs())
        } else {
            acc
        }
    })
}

/// Eliminates `rank` columns. With `complete` the pivot is the largest entry
/// of the whole trailing block, otherwise the largest in its column.
fn factor(a: &[Vec<Float>], prec: u32, rank: usize, complete: bool) -> Result<Lu> {
    let n = a.len();
    let mut lu: Vec<Vec<Float>> = a
        .iter()
        .map(|row| row.iter().map(|v| Float::with_val(prec, v)).collect())
        .collect();
    let mut rows: Vec<usize> = (0..n).collect();
    let mut cols: Vec<usize> = (0..n).collect();
    let initial_max = abs_max(lu.iter().flatten(), prec);
    let mut threshold = initial_max.clone();
    threshold >>= prec.saturating_sub(PIVOT_GUARD_BITS);
    let mut running_max = initial_max.clone();

    for step in 0..rank {
        let (pr, pc) = if complete {
            let mut best = (step, step);
            for i in step..n {
                for j in step..n {
                    if *lu[i][j].as_abs() > *lu[best.0][best.1].as_abs() {
                        best = (i, j);
                    }
                }
            }
            best
        } else {
            let mut best = step;
            for i in step..n {
                if *lu[i][step].as_abs() > *lu[best][step].as_abs() {
                    best = i;
                }
            }
            (best, step)
        };
        if *lu[pr][pc].as_abs() <= threshold {
            return Err(Error::SingularSystem {
                column: step,
                pivot: lu[pr][pc].to_f64().abs(),
                threshold: threshold.to_f64(),
            });
        }
        lu.swap(step, pr);
        rows.swap(step, pr);
        if pc != step {
            for row in lu.iter_mut() {
                row.swap(step, pc);
            }
            cols.swap(step, pc);
        }
        let (upper, lower) = lu.split_at_mut(step + 1);
        let pivot_row = &upper[step];
        for row in lower.iter_mut() {
            if row[step].is_zero() {
                continue;
            }
            let factor = Float::with_val(prec, &row[step] / &pivot_row[step]);
            for k in (step + 1)..n {
                let t = Float::with_val(prec, &factor * &pivot_row[k]);
                row[k] -= t;
                if *row[k].as_abs() > running_max {
                    running_max = Float::with_val(prec, &*row[k].as_abs());
                }
            }
            row[step] = factor;
        }
    }
    let growth_factor = if initial_max.is_zero() {
        1.0
    } else {
        Float::with_val(prec, &running_max / &initial_max).to_f64()
    };
    Ok(Lu {
        lu,
        rows,
        cols,
        rank,
        growth_factor,
    })
}

impl Lu {
    fn solve(&self, b: &[Float], prec: u32) -> Vec<Float> {
        let n = self.lu.len();
        let r = self.rank;
        let mut y: Vec<Float> = self
            .rows
            .iter()
            .map(|&i| Float::with_val(prec, &b[i]))
            .collect();
        for i in 0..r {
            for k in 0..i {
                let t = Float::with_val(prec, &self.lu[i][k] * &y[k]);
                y[i] -= t;
            }
        }
        for v in y.iter_mut().skip(r) {
            *v = Float::new(prec);
        }
        for i in (0..r).rev() {
            for k in (i + 1)..r {
                let t = Float::with_val(prec, &self.lu[i][k] * &y[k]);
                y[i] -= t;
            }
            y[i] /= &self.lu[i][i];
        }
        let mut x = vec![Float::new(prec); n];
        for (pos, &c) in self.cols.iter().enumerate() {
            x[c] = y[pos].clone();
        }
        x
    }
}

/// `b − A x` evaluated at precision `prec`.
pub fn residual(a: &[Vec<Float>], x: &[Float], b: &[Float], prec: u32) -> Vec<Float> {
    a.iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = Float::with_val(prec, bi);
            for (aij, xj) in row.iter().zip(x) {
                r -= Float::with_val(prec, aij * xj);
            }
            r
        })
        .collect()
}

pub fn max_norm(v: &[Float]) -> Float {
    let prec = v.first().map_or(53, |x| x.prec());
    abs_max(v.iter(), prec)
}

fn refine(a: &[Vec<Float>], b: &[Float], prec: u32, lu: Lu) -> DenseSolution {
    let mut x = lu.solve(b, prec);
    let r = residual(a, &x, b, 2 * prec);
    let correction = lu.solve(&r, prec);
    for (xi, ci) in x.iter_mut().zip(&correction) {
        *xi += ci;
    }
    let r = residual(a, &x, b, 2 * prec);
    DenseSolution {
        residual_norm: Float::with_val(prec, max_norm(&r)),
        x,
        growth_factor: lu.growth_factor,
    }
}

/// Solves the nonsingular system `A x = b` in precision `prec` by partial
/// pivoting.
pub fn solve(a: &[Vec<Float>], b: &[Float], prec: u32) -> Result<DenseSolution> {
    assert_eq!(
        a.len(),
        b.len(),
        "matrix and right-hand side disagree in size"
    );
    let lu = factor(a, prec, a.len(), false)?;
    Ok(refine(a, b, prec, lu))
}

/// Solves a consistent system whose rank is `n − deficiency`, returning the
/// basic solution chosen by complete pivoting. Consistency is the caller's
/// to check through `residual_norm`.
pub fn solve_deficient(
    a: &[Vec<Float>],
    b: &[Float],
    prec: u32,
    deficiency: usize,
) -> Result<DenseSolution> {
    assert_eq!(
        a.len(),
        b.len(),
        "matrix and right-hand side disagree in size"
    );
    let lu = factor(a, prec, a.len() - deficiency, true)?;
    Ok(refine(a, b, prec, lu))
}
