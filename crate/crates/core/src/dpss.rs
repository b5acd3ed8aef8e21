//! Zeroth-order discrete prolate spheroidal (Slepian) sequences.
//!
//! The sequence is the dominant eigenvector of the symmetric tridiagonal
//! matrix that commutes with the time-and-band limiting operator: diagonal
//! `((N-1-2m)/2)^2 cos(2 pi W)` and off-diagonal `m (N-m) / 2`. The largest
//! eigenvalue is isolated with Sturm-sequence bisection and the eigenvector is
//! obtained by shifted inverse iteration, so memory stays O(N).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};

const MAX_INVERSE_ITERATIONS: usize = 50;

/// Diagonal and off-diagonal of the DPSS tridiagonal matrix.
///
/// `off[m - 1]` couples rows `m - 1` and `m`.
pub fn tridiagonal(num_points: usize, half_bandwidth: f64) -> (Vec<f64>, Vec<f64>) {
    let n = num_points as f64;
    let c = (2.0 * PI * half_bandwidth).cos();
    let diag = (0..num_points)
        .map(|m| {
            let x = (n - 1.0 - 2.0 * m as f64) / 2.0;
            x * x * c
        })
        .collect();
    let off = (1..num_points).map(|m| m as f64 * (n - m as f64) / 2.0).collect();
    (diag, off)
}

/// Zeroth-order DPSS of length `num_points`, rescaled so that its minimum is 0
/// and its maximum is 1.
///
/// The result is symmetric about its midpoint (enforced exactly) and unimodal.
/// For `num_points == 2` the sequence is flat and all ones are returned.
pub fn dpss_zeroth(num_points: usize, half_bandwidth: f64) -> Result<Vec<f64>> {
    validate(num_points, half_bandwidth)?;
    let (diag, off) = tridiagonal(num_points, half_bandwidth);
    let mut v = dominant_eigenvector(&diag, &off, None)?;
    symmetrize(&mut v);
    Ok(rescale_unit(v))
}

fn validate(num_points: usize, half_bandwidth: f64) -> Result<()> {
    if num_points < 2 {
        return Err(Error::invalid("num_points", "DPSS needs at least 2 points"));
    }
    if !(half_bandwidth > 0.0 && half_bandwidth < 0.5) {
        return Err(Error::invalid(
            "half_bandwidth",
            alloc::format!("must lie in (0, 1/2), got {half_bandwidth}"),
        ));
    }
    Ok(())
}

fn symmetrize(v: &mut [f64]) {
    let n = v.len();
    for m in 0..n / 2 {
        let avg = 0.5 * (v[m] + v[n - 1 - m]);
        v[m] = avg;
        v[n - 1 - m] = avg;
    }
}

fn rescale_unit(v: Vec<f64>) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span <= f64::EPSILON * hi.abs().max(1.0) {
        return vec![1.0; v.len()];
    }
    v.into_iter().map(|x| (x - lo) / span).collect()
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q.abs() < tiny { tiny.copysign(q) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue by bisection on the Sturm count.
pub fn largest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if sturm_count(diag, off, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Dominant (largest-eigenvalue) unit eigenvector of a symmetric tridiagonal
/// matrix, with the sign chosen so the entries sum to a nonnegative value.
///
/// `start` seeds the inverse iteration; all ones when `None`.
pub fn dominant_eigenvector(diag: &[f64], off: &[f64], start: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = diag.len();
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch(alloc::format!(
            "tridiagonal with {n} diagonal entries needs {} off-diagonal entries, got {}",
            n.saturating_sub(1),
            off.len()
        )));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let lambda = largest_eigenvalue(diag, off);
    let scale = diag
        .iter()
        .chain(off.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(1.0);
    // Shift just above the top of the spectrum: T - sigma I is then negative
    // definite and the LDL^T sweep below needs no pivoting.
    let sigma = lambda + 1e-10 * scale;

    let mut x: Vec<f64> = match start {
        Some(s) if s.len() == n => s.to_vec(),
        _ => vec![1.0; n],
    };
    normalize(&mut x);
    for iteration in 0..MAX_INVERSE_ITERATIONS {
        let mut y = solve_shifted(diag, off, sigma, &x);
        normalize(&mut y);
        if y.iter().sum::<f64>() < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        let change = x.iter().zip(&y).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        x = y;
        if change < 1e-14 && iteration > 0 {
            return Ok(x);
        }
    }
    Err(Error::EigenNoConvergence {
        iterations: MAX_INVERSE_ITERATIONS,
    })
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Solves `(T - sigma I) y = b` with a Thomas sweep.
fn solve_shifted(diag: &[f64], off: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    let mut denom = diag[0] - sigma;
    if denom.abs() < tiny {
        denom = -tiny;
    }
    c_prime[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d_prime[0] = b[0] / denom;
    for i in 1..n {
        let mut denom = diag[i] - sigma - off[i - 1] * c_prime[i - 1];
        if denom.abs() < tiny {
            denom = -tiny;
        }
        c_prime[i] = if i + 1 < n { off[i] / denom } else { 0.0 };
        d_prime[i] = (b[i] - off[i - 1] * d_prime[i - 1]) / denom;
    }
    let mut y = d_prime;
    for i in (0..n - 1).rev() {
        y[i] -= c_prime[i] * y[i + 1];
    }
    y
}
