//! Smoothness-regularised nonnegative least squares.
//!
//! Minimises `||F s - p||^2 + lambda ||D s||^2` over `s >= 0` with a
//! Lawson–Hanson active-set method working on the normal equations of the
//! stacked system `[F; sqrt(lambda) D] s = [p; 0]`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot, norm2, Matrix};

/// `(n-1) x n` forward-difference operator.
pub fn first_derivative_operator(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::invalid("n", "derivative operator needs n >= 2"));
    }
    let mut d = Matrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d[(i, i)] = -1.0;
        d[(i, i + 1)] = 1.0;
    }
    Ok(d)
}

/// `D^T D` for the forward-difference operator (tridiagonal).
pub fn derivative_gram(n: usize) -> Matrix {
    let mut g = Matrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        g[(i, i)] += 1.0;
        g[(i + 1, i + 1)] += 1.0;
        g[(i, i + 1)] -= 1.0;
        g[(i + 1, i)] -= 1.0;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Cap on outer (variable-adding) iterations.
    pub max_iterations: usize,
    /// Relative KKT tolerance, scaled by the problem's gradient magnitude.
    pub tolerance: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        NnlsOptions {
            max_iterations: 2000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub s: Vec<f64>,
    /// `||F s - p||^2 + lambda ||D s||^2`.
    pub objective: f64,
    /// `||F s - p||`.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Objective after each outer iteration, starting at `s = 0`.
    pub objective_trace: Vec<f64>,
    /// Largest KKT violation at the returned point (absolute).
    pub kkt_violation: f64,
    /// Absolute tolerance the violation was checked against.
    pub kkt_tolerance: f64,
}

/// A quadratic `x^T G x - 2 c^T x + b` with `G` symmetric positive semidefinite.
pub struct Quadratic<'a> {
    pub gram: &'a Matrix,
    pub linear: &'a [f64],
    pub constant: f64,
}

impl Quadratic<'_> {
    pub fn value(&self, x: &[f64]) -> f64 {
        let gx = self.gram.mul_vec(x);
        dot(x, &gx) - 2.0 * dot(self.linear, x) + self.constant
    }
}

/// Lawson–Hanson NNLS on a quadratic in Gram form.
///
/// `objective` evaluates the true objective (used for the trace and the
/// returned value, so it can avoid the cancellation of the Gram form).
/// `warm_support` seeds the passive set.
pub fn nnls_gram<O>(
    q: &Quadratic<'_>,
    objective: O,
    warm_support: Option<&[bool]>,
    opts: &NnlsOptions,
) -> Result<NnlsSolution>
where
    O: Fn(&[f64]) -> f64,
{
    let g = q.gram;
    let c = q.linear;
    let n = c.len();
    if g.rows() != n || g.cols() != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "gram is {}x{}, linear term has {n}",
            g.rows(),
            g.cols()
        )));
    }
    let scale = c
        .iter()
        .map(|v| v.abs())
        .chain((0..n).map(|i| g[(i, i)]))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = opts.tolerance * scale;

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut trace = vec![objective(&x)];
    let mut iterations = 0usize;
    let mut blocked = vec![false; n];

    let gradient = |x: &[f64]| -> Vec<f64> {
        let gx = g.mul_vec(x);
        c.iter().zip(&gx).map(|(ci, gi)| ci - gi).collect()
    };

    let mut pending: Option<Vec<bool>> = warm_support.map(|w| w.to_vec());

    loop {
        let w = gradient(&x);
        let mut entered = None;
        if let Some(seed) = pending.take() {
            passive.copy_from_slice(&seed);
        } else {
            let mut best = None;
            for j in 0..n {
                if !passive[j] && !blocked[j] && w[j] > tol && best.is_none_or(|b: usize| w[j] > w[b]) {
                    best = Some(j);
                }
            }
            match best {
                Some(j) => {
                    passive[j] = true;
                    entered = Some(j);
                }
                None => break,
            }
        }
        iterations += 1;
        if iterations > opts.max_iterations {
            let obj = objective(&x);
            return Err(Error::SolverIterationCap {
                iterations: opts.max_iterations,
                residual: obj.max(0.0).sqrt(),
                best: x,
            });
        }

        let before = x.clone();
        // Inner loop: move toward the unconstrained optimum on the passive set.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            if idx.is_empty() {
                break;
            }
            let z = match solve_subproblem(g, c, &idx) {
                Some(z) => z,
                None => {
                    // Dependent columns: drop a variable that is still at zero.
                    let drop = entered
                        .filter(|&j| passive[j])
                        .or_else(|| idx.iter().rev().copied().find(|&j| x[j] == 0.0))
                        .unwrap_or(idx[idx.len() - 1]);
                    passive[drop] = false;
                    blocked[drop] = true;
                    x[drop] = 0.0;
                    continue;
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[j] - z[k];
                    let a = if denom > 0.0 { x[j] / denom } else { 0.0 };
                    alpha = alpha.min(a);
                }
            }
            let xmax = idx.iter().fold(0.0f64, |m, &j| m.max(x[j]));
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
                if x[j] <= 0.0 || (z[k] <= 0.0 && x[j] <= 4.0 * f64::EPSILON * xmax) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
        if x != before {
            blocked.iter_mut().for_each(|b| *b = false);
        } else if let Some(j) = entered {
            // The candidate could not enter; keep it out until x moves.
            passive[j] = false;
            blocked[j] = true;
        }
        trace.push(objective(&x));
    }

    let w = gradient(&x);
    let mut violation: f64 = 0.0;
    for j in 0..n {
        let v = if x[j] > 0.0 { w[j].abs() } else { w[j].max(0.0) };
        violation = violation.max(v);
    }
    let obj = objective(&x);
    Ok(NnlsSolution {
        s: x,
        objective: obj,
        residual_norm: f64::NAN,
        iterations,
        objective_trace: trace,
        kkt_violation: violation,
        kkt_tolerance: tol,
    })
}

fn solve_subproblem(g: &Matrix, c: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let p = idx.len();
    let mut a = vec![0.0; p * p];
    for (r, &i) in idx.iter().enumerate() {
        for (k, &j) in idx.iter().enumerate() {
            a[r * p + k] = g[(i, j)];
        }
    }
    if !cholesky_in_place(&mut a, p) {
        return None;
    }
    let mut b: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
    cholesky_solve(&a, p, &mut b);
    b.iter().all(|v| v.is_finite()).then_some(b)
}

/// Precomputed normal equations for repeated solves with one `F` and `lambda`.
#[derive(Debug, Clone)]
pub struct RegularizedProblem<'a> {
    f: &'a Matrix,
    lambda: f64,
    gram: Matrix,
}

impl<'a> RegularizedProblem<'a> {
    pub fn new(f: &'a Matrix, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be finite and >= 0"));
        }
        let mut gram = f.gram();
        if lambda > 0.0 {
            gram.add_scaled(&derivative_gram(f.cols()), lambda);
        }
        Ok(RegularizedProblem { f, lambda, gram })
    }

    pub fn objective(&self, s: &[f64], p: &[f64]) -> f64 {
        let r = residual(self.f, s, p);
        let smooth: f64 = s.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        dot(&r, &r) + self.lambda * smooth
    }

    pub fn solve(&self, p: &[f64], warm: Option<&[f64]>, opts: &NnlsOptions) -> Result<NnlsSolution> {
        if p.len() != self.f.rows() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} measurements for {} filter rows",
                p.len(),
                self.f.rows()
            )));
        }
        let c = self.f.tr_mul_vec(p);
        let q = Quadratic {
            gram: &self.gram,
            linear: &c,
            constant: dot(p, p),
        };
        let support: Option<Vec<bool>> = warm.map(|w| w.iter().map(|&v| v > 0.0).collect());
        let mut sol = nnls_gram(&q, |s| self.objective(s, p), support.as_deref(), opts)?;
        sol.residual_norm = norm2(&residual(self.f, &sol.s, p));
        Ok(sol)
    }
}

fn residual(f: &Matrix, s: &[f64], p: &[f64]) -> Vec<f64> {
    f.mul_vec(s).iter().zip(p).map(|(a, b)| a - b).collect()
}

/// One-shot solve of `min ||F s - p||^2 + lambda ||D s||^2, s >= 0`.
pub fn solve_regularized_nnls(f: &Matrix, p: &[f64], lambda: f64, opts: &NnlsOptions) -> Result<NnlsSolution> {
    RegularizedProblem::new(f, lambda)?.solve(p, None, opts)
}
