//! Blue-sideband Rabi flopping of a thermal state and the `n̄` fit.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, Matrix};
use crate::par::map_indexed;

pub const DEFAULT_TRUNCATION: usize = 100;

/// Starting values of `n̄` for the multi-start fit.
pub const NBAR_STARTS: [f64; 5] = [0.05, 0.2, 0.5, 1.0, 2.0];

const MIN_POINTS: usize = 6;
const FREQUENCY_GRID: usize = 400;
const FREQUENCY_STARTS: usize = 3;

/// `1/(n̄+1) sum_{n<=n_max} q^n/2 (1 - e^{-gamma t} cos(Omega_0 eta sqrt(n+1) t))`
/// with `q = n̄/(n̄+1)`.
pub fn sideband_p1_model(t: f64, nbar: f64, base_rabi: f64, decay: f64, eta: f64, n_max: usize) -> f64 {
    let q = nbar / (nbar + 1.0);
    let envelope = (-decay * t).exp();
    let mut weight = 1.0 / (nbar + 1.0);
    let mut sum = 0.0;
    for n in 0..=n_max {
        let rabi = base_rabi * eta * ((n + 1) as f64).sqrt();
        sum += 0.5 * weight * (1.0 - envelope * (rabi * t).cos());
        weight *= q;
        if weight == 0.0 {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermometryFit {
    pub nbar: f64,
    /// rad/s.
    pub base_rabi: f64,
    /// 1/s.
    pub decay: f64,
    /// `(J^T W J)^{-1}` over `(n̄, Omega_0, gamma)`; NaN if singular.
    pub covariance: [[f64; 3]; 3],
    pub chi2: f64,
    pub dof: usize,
    pub truncation: usize,
}

impl ThermometryFit {
    pub fn nbar_std(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }
}

/// Point `(t_s, p1, sigma)`.
pub type FlopPoint = (f64, f64, f64);

struct Problem<'a> {
    data: &'a [FlopPoint],
    eta: f64,
    n_max: usize,
    rabi_scale: f64,
    decay_scale: f64,
}

impl Problem<'_> {
    /// Scaled coordinates `(n̄, Omega_0 / rabi_scale, gamma / decay_scale)`.
    fn physical(&self, y: &[f64; 3]) -> (f64, f64, f64) {
        (y[0].abs(), y[1].abs() * self.rabi_scale, y[2].abs() * self.decay_scale)
    }

    fn residuals(&self, y: &[f64; 3], out: &mut Vec<f64>) {
        let (nbar, rabi, decay) = self.physical(y);
        out.clear();
        out.extend(
            self.data
                .iter()
                .map(|&(t, p, s)| (sideband_p1_model(t, nbar, rabi, decay, self.eta, self.n_max) - p) / s),
        );
    }

    fn chi2(&self, y: &[f64; 3]) -> f64 {
        let (nbar, rabi, decay) = self.physical(y);
        self.data
            .iter()
            .map(|&(t, p, s)| {
                let r = (sideband_p1_model(t, nbar, rabi, decay, self.eta, self.n_max) - p) / s;
                r * r
            })
            .sum()
    }

    /// Jacobian of the weighted residuals in scaled coordinates, row-major.
    fn jacobian(&self, y: &[f64; 3]) -> Vec<f64> {
        let m = self.data.len();
        let mut jac = alloc::vec![0.0; 3 * m];
        let (mut lo, mut hi) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for k in 0..3 {
            let h = 1e-6 * y[k].abs().max(1e-3);
            let mut a = *y;
            let mut b = *y;
            // stay inside the feasible orthant
            let span = if y[k] - h < 0.0 {
                b[k] += h;
                h
            } else {
                a[k] -= h;
                b[k] += h;
                2.0 * h
            };
            self.residuals(&a, &mut lo);
            self.residuals(&b, &mut hi);
            for i in 0..m {
                jac[3 * i + k] = (hi[i] - lo[i]) / span;
            }
        }
        jac
    }
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: F, start: [f64; 3], step: [f64; 3], max_iter: usize) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(&start)));
    for k in 0..3 {
        let mut p = start;
        p[k] += step[k];
        simplex.push((p, f(&p)));
    }
    let point = |c: &[f64; 3], d: &[f64; 3], s: f64| -> [f64; 3] {
        [
            c[0] + s * (d[0] - c[0]),
            c[1] + s * (d[1] - c[1]),
            c[2] + s * (d[2] - c[2]),
        ]
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[3].1;
        if (worst - best).abs() <= 1e-12 * (best.abs() + 1e-300) {
            break;
        }
        let mut c = [0.0; 3];
        for (p, _) in &simplex[..3] {
            for k in 0..3 {
                c[k] += p[k] / 3.0;
            }
        }
        let xr = point(&c, &simplex[3].0, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = point(&c, &simplex[3].0, -2.0);
            let fe = f(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let x = point(&c, &xr, 0.5);
                (x, f(&x))
            } else {
                let x = point(&c, &simplex[3].0, 0.5);
                (x, f(&x))
            };
            if fc < worst.min(fr) {
                simplex[3] = (xc, fc);
            } else {
                let x0 = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = point(&x0, &v.0, 0.5);
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Levenberg–Marquardt polish with the iterate held in the feasible orthant.
/// Returns the point, its chi2 and whether it converged.
fn levenberg_marquardt(problem: &Problem<'_>, start: [f64; 3], max_iter: usize) -> ([f64; 3], f64, bool) {
    let mut y = [start[0].abs(), start[1].abs(), start[2].abs()];
    let mut chi2 = problem.chi2(&y);
    let mut mu = 1e-3;
    let mut r = Vec::new();
    for _ in 0..max_iter {
        let jac = problem.jacobian(&y);
        problem.residuals(&y, &mut r);
        let mut jtj = [0.0; 9];
        let mut jtr = [0.0; 3];
        for (i, ri) in r.iter().enumerate() {
            let row = &jac[3 * i..3 * i + 3];
            for a in 0..3 {
                jtr[a] += row[a] * ri;
                for b in 0..3 {
                    jtj[3 * a + b] += row[a] * row[b];
                }
            }
        }
        let grad = jtr.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad <= 1e-10 * (chi2 + 1e-300).sqrt() {
            return (y, chi2, true);
        }
        let mut improved = false;
        while mu < 1e12 {
            let mut a = jtj;
            for k in 0..3 {
                a[4 * k] += mu * jtj[4 * k].max(1e-30);
            }
            let mut step = [-jtr[0], -jtr[1], -jtr[2]];
            if !crate::linalg::cholesky_in_place(&mut a, 3) {
                mu *= 10.0;
                continue;
            }
            crate::linalg::cholesky_solve(&a, 3, &mut step);
            let trial = [
                (y[0] + step[0]).max(0.0),
                (y[1] + step[1]).max(0.0),
                (y[2] + step[2]).max(0.0),
            ];
            let c = problem.chi2(&trial);
            if c < chi2 {
                let moved = (0..3).map(|k| (trial[k] - y[k]).abs()).fold(0.0, f64::max);
                let gain = chi2 - c;
                y = trial;
                chi2 = c;
                mu = (mu / 10.0).max(1e-12);
                improved = true;
                if moved <= 1e-12 || gain <= 1e-14 * chi2 {
                    return (y, chi2, true);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            // no descent direction left
            return (y, chi2, true);
        }
    }
    (y, chi2, false)
}

/// Local minima of chi2 over `Omega_0 eta` on a log grid between one flop over
/// the record and the sampling Nyquist rate, at `n̄ = 0.2`, `gamma = 0`.
fn frequency_starts(data: &[FlopPoint], eta: f64, n_max: usize) -> Vec<f64> {
    let mut times: Vec<f64> = data.iter().map(|d| d.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let span = times[times.len() - 1] - times[0];
    let min_dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let lo = PI / times[times.len() - 1];
    let hi = (PI / min_dt).max(2.0 * lo).max(PI / span);
    let chi2: Vec<(f64, f64)> = (0..FREQUENCY_GRID)
        .map(|i| {
            let w = lo * (hi / lo).powf(i as f64 / (FREQUENCY_GRID - 1) as f64);
            let c = data
                .iter()
                .map(|&(t, p, s)| {
                    let r = (sideband_p1_model(t, 0.2, w / eta, 0.0, eta, n_max) - p) / s;
                    r * r
                })
                .sum();
            (w / eta, c)
        })
        .collect();
    let mut minima: Vec<(f64, f64)> = (0..chi2.len())
        .filter(|&i| (i == 0 || chi2[i].1 <= chi2[i - 1].1) && (i + 1 == chi2.len() || chi2[i].1 <= chi2[i + 1].1))
        .map(|i| chi2[i])
        .collect();
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    minima.truncate(FREQUENCY_STARTS);
    minima.into_iter().map(|m| m.0).collect()
}

/// Weighted least-squares fit of `(n̄, Omega_0, gamma)` to blue-sideband
/// flopping data. Starts from every `n̄` in [`NBAR_STARTS`] crossed with the
/// best few Rabi frequencies of a coarse scan, runs a simplex search from each
/// and polishes with Levenberg–Marquardt.
pub fn thermometry_fit(data: &[FlopPoint], eta: f64, n_max: usize) -> Result<ThermometryFit> {
    if data.len() < MIN_POINTS {
        return Err(Error::invalid(
            "data",
            alloc::format!("need at least {MIN_POINTS} points, got {}", data.len()),
        ));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", "must be finite and > 0"));
    }
    if n_max < 1 {
        return Err(Error::invalid("n_max", "must be >= 1"));
    }
    for &(t, p, s) in data {
        if !(t.is_finite() && t >= 0.0 && p.is_finite() && s.is_finite() && s > 0.0) {
            return Err(Error::invalid("data", "need t >= 0, finite p1 and sigma > 0"));
        }
    }
    let t_max = data.iter().map(|d| d.0).fold(0.0, f64::max);
    let t_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    if !(t_max > t_min) {
        return Err(Error::invalid("data", "times must not all coincide"));
    }

    let rabi_starts = frequency_starts(data, eta, n_max);
    let decay_scale = 1.0 / t_max;
    let rabi_scale = rabi_starts[0];
    let problem = Problem {
        data,
        eta,
        n_max,
        rabi_scale,
        decay_scale,
    };
    let starts: Vec<[f64; 3]> = rabi_starts
        .iter()
        .flat_map(|&w| NBAR_STARTS.iter().map(move |&n| [n, w / rabi_scale, 0.1]))
        .collect();
    let runs = map_indexed(starts.len(), |i| {
        let s = starts[i];
        let (y, _) = nelder_mead(|y| problem.chi2(y), s, [0.5 * s[0], 0.02 * s[1], 0.5], 2000);
        levenberg_marquardt(&problem, y, 500)
    });

    let mut best: Option<([f64; 3], f64)> = None;
    let mut best_any = f64::INFINITY;
    for (y, c, converged) in runs {
        if c.is_finite() {
            best_any = best_any.min(c);
        }
        if converged && c.is_finite() && best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((y, c));
        }
    }
    let (y, chi2) = best.ok_or(Error::FitNoConvergence { best_chi2: best_any })?;
    let (nbar, base_rabi, decay) = problem.physical(&y);
    if base_rabi * eta * (t_max - t_min) < 2.0 * PI {
        return Err(Error::invalid(
            "data",
            "record spans less than one Rabi period of the fit",
        ));
    }

    let jac = problem.jacobian(&y);
    let scale = [1.0, rabi_scale, decay_scale];
    let mut acc = alloc::vec![0.0; 9];
    for i in 0..data.len() {
        for a in 0..3 {
            for b in 0..3 {
                acc[3 * a + b] += jac[3 * i + a] / scale[a] * jac[3 * i + b] / scale[b];
            }
        }
    }
    let jtj = Matrix::from_row_major(3, 3, acc)?;
    let covariance = match spd_inverse(&jtj) {
        Some(inv) => {
            let mut c = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    c[a][b] = inv[(a, b)];
                }
            }
            c
        }
        None => [[f64::NAN; 3]; 3],
    };
    Ok(ThermometryFit {
        nbar,
        base_rabi,
        decay,
        covariance,
        chi2,
        dof: data.len().saturating_sub(3),
        truncation: n_max,
    })
}
