//! Levenberg–Marquardt least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when every column of J is within this cosine of orthogonal to r.
    pub gradient_tolerance: f64,
    /// Relative step of the central differences.
    pub relative_step: f64,
    /// Converged when ‖r‖ drops below this fraction of `reference_norm`.
    pub residual_tolerance: f64,
    /// Scale for `residual_tolerance`, usually the data norm.
    pub reference_norm: f64,
    /// Columns whose normalized singular value falls below this are degenerate.
    pub rank_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            relative_step: 1e-6,
            residual_tolerance: 1e-14,
            reference_norm: 1.0,
            rank_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Jacobian at the returned point.
    pub jacobian: DMatrix<f64>,
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Central-difference Jacobian; columns are evaluated in parallel.
pub fn jacobian<F>(f: &F, x: &[f64], rows: usize, relative_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    use rayon::prelude::*;
    let cols: Result<Vec<Vec<f64>>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let h = relative_step * x[j].abs().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let rp = f(&xp)?;
            let rm = f(&xm)?;
            Ok(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect();
    let cols = cols?;
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| cols[j][i]))
}

/// Fails with [`Error::Degenerate`] if the column-normalized Jacobian is rank deficient.
pub fn check_rank(j: &DMatrix<f64>, tolerance: f64, names: &[String]) -> Result<()> {
    let mut scaled = j.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            let name = names.get(c).cloned().unwrap_or_else(|| format!("#{c}"));
            return Err(Error::Degenerate(format!("residuals do not depend on {name}")));
        }
        col /= n;
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= tolerance * max {
        return Err(Error::Degenerate(format!(
            "Jacobian condition {:.2e} exceeds {:.0e}",
            max / min.max(f64::MIN_POSITIVE),
            1.0 / tolerance
        )));
    }
    Ok(())
}

/// Minimizes `‖f(x)‖²` from `x0`.
pub fn minimize<F>(f: F, x0: &[f64], names: &[String], options: &LmOptions) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let rows = r.len();
    if rows < x.len() {
        return Err(Error::Degenerate(format!(
            "{} residuals for {} parameters",
            rows,
            x.len()
        )));
    }
    let mut cost = norm(&r);
    let mut j = jacobian(&f, &x, rows, options.relative_step)?;
    check_rank(&j, options.rank_tolerance, names)?;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        if cost <= options.residual_tolerance * options.reference_norm {
            converged = true;
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let g = j.transpose() * &rv;
        let cosine = (0..x.len())
            .map(|c| g[c].abs() / (j.column(c).norm() * cost).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        if cosine <= options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = j.transpose() * &j;
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for c in 0..x.len() {
                a[(c, c)] += lambda * jtj[(c, c)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            match f(&trial) {
                Ok(rt) => {
                    let ct = norm(&rt);
                    if ct.is_finite() && ct < cost {
                        let small = step.norm() <= 1e-15 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
                        x = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 3.0).max(1e-12);
                        accepted = true;
                        if small {
                            converged = true;
                        }
                        break;
                    }
                    lambda *= 4.0;
                }
                Err(_) => lambda *= 4.0,
            }
        }
        if !accepted {
            // No downhill step at any damping: a stationary point to machine precision.
            converged = true;
            break;
        }
        j = jacobian(&f, &x, rows, options.relative_step)?;
        if converged {
            break;
        }
    }
    Ok(LmReport {
        x,
        residual_norm: cost,
        iterations,
        converged,
        jacobian: j,
    })
}
