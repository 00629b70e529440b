//! Box-constrained Levenberg–Marquardt with finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub ftol: f64,
    /// Stop when the scaled step norm falls below this.
    pub xtol: f64,
    /// Relative central-difference step.
    pub rel_step: f64,
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 200, ftol: 1e-14, xtol: 1e-12, rel_step: 1e-6, lambda0: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// ½‖r‖² after every accepted iteration, starting with the initial point.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// σ²(JᵀJ)⁻¹ in the original parameter units, when JᵀJ is invertible.
    pub covariance: Option<DMatrix<f64>>,
}

impl LmReport {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().unwrap_or(&f64::NAN)
    }

    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        match &self.covariance {
            Some(c) => (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
            None => vec![f64::NAN; self.x.len()],
        }
    }
}

/// Bounds and per-parameter scale for a fit.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![f64::NEG_INFINITY; n], upper: vec![f64::INFINITY; n] }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

fn half_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn jacobian<F>(f: &F, x: &[f64], scale: &[f64], rel_step: f64, bounds: &Bounds, m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let n = x.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = rel_step * x[j].abs().max(scale[j]);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] = (x[j] + h).min(bounds.upper[j]);
            xm[j] = (x[j] - h).max(bounds.lower[j]);
            let d = xp[j] - xm[j];
            let rp = f(&xp);
            let rm = f(&xm);
            // derivative with respect to the scaled variable x/scale
            rp.iter().zip(&rm).map(|(a, b)| (a - b) / d * scale[j]).collect()
        })
        .collect();
    DMatrix::from_fn(m, n, |i, j| cols[j][i])
}

/// Minimizes ½‖f(x)‖² subject to `bounds`.
///
/// `scale` gives the typical magnitude of each parameter; the solver works in
/// `x / scale` so that rates in rad/s and dimensionless coefficients mix well.
pub fn levenberg_marquardt<F>(
    f: F,
    x0: &[f64],
    scale: &[f64],
    bounds: &Bounds,
    opts: &LmOptions,
) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut r = f(&x);
    let m = r.len();
    if m < n {
        return Err(Error::FitFailure(format!("{m} residuals for {n} parameters")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite residual at the initial point".into()));
    }
    let mut cost = half_sq(&r);
    let mut history = vec![cost];
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;

    let mut jac = jacobian(&f, &x, scale, opts.rel_step, bounds, m);
    'outer: while iterations < opts.max_iter {
        iterations += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() <= 1e-300 {
            converged = true;
            break;
        }
        loop {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-12 * a.diagonal().max());
            }
            let step = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match damped.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > 1e20 {
                            break 'outer;
                        }
                        continue;
                    }
                },
            };
            let mut x_new: Vec<f64> = (0..n).map(|i| x[i] + step[i] * scale[i]).collect();
            bounds.clamp(&mut x_new);
            let r_new = f(&x_new);
            let cost_new = if r_new.iter().all(|v| v.is_finite()) { half_sq(&r_new) } else { f64::INFINITY };
            if cost_new < cost {
                let step_norm = (0..n)
                    .map(|i| ((x_new[i] - x[i]) / scale[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let x_norm = (0..n).map(|i| (x[i] / scale[i]).powi(2)).sum::<f64>().sqrt();
                let rel_drop = (cost - cost_new) / cost.max(1e-300);
                x = x_new;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                if rel_drop < opts.ftol || step_norm < opts.xtol * (x_norm + opts.xtol) || cost == 0.0 {
                    converged = true;
                    break 'outer;
                }
                jac = jacobian(&f, &x, scale, opts.rel_step, bounds, m);
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // no descent direction left: we sit at a (possibly constrained) minimum
                converged = true;
                break 'outer;
            }
        }
    }

    let jac = jacobian(&f, &x, scale, opts.rel_step, bounds, m);
    let dof = (m - n).max(1) as f64;
    let s2 = 2.0 * cost / dof;
    let covariance = (jac.transpose() * &jac).try_inverse().map(|inv| {
        DMatrix::from_fn(n, n, |i, j| s2 * inv[(i, j)] * scale[i] * scale[j])
    });

    Ok(LmReport { x, residuals: r, cost_history: history, iterations, converged, covariance })
}

/// Central-difference Jacobian of `f` at `x` with absolute steps `steps`.
pub fn central_jacobian<F>(f: F, x: &[f64], steps: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += steps[j];
            xm[j] -= steps[j];
            let (rp, rm) = (f(&xp), f(&xm));
            rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * steps[j])).collect()
        })
        .collect();
    let m = cols.first().map_or(0, Vec::len);
    DMatrix::from_fn(m, x.len(), |i, j| cols[j][i])
}

/// Parameter covariance contributed by inputs that were held fixed during a
/// fit but carry their own variances `var_c`: S·diag(var_c)·Sᵀ with
/// S = (JᵀJ)⁻¹JᵀJ_c.
pub fn nuisance_covariance(jx: &DMatrix<f64>, jc: &DMatrix<f64>, var_c: &[f64]) -> Option<DMatrix<f64>> {
    let inv = (jx.transpose() * jx).try_inverse()?;
    let s = inv * jx.transpose() * jc;
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(var_c));
    Some(&s * d * s.transpose())
}
