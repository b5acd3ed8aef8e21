//! Quadrature helpers shared by the waveform, filter and simulator code.

use alloc::vec::Vec;
use num_complex::Complex64;

/// Composite Simpson over samples `lo..=hi` of a uniform grid with step `dt`.
///
/// An odd interval count is closed with Simpson's 3/8 rule on the last three
/// intervals; a single interval falls back to the trapezoid rule.
pub(crate) fn simpson<F>(lo: usize, hi: usize, dt: f64, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64,
{
    let intervals = hi - lo;
    match intervals {
        0 => Complex64::new(0.0, 0.0),
        1 => (f(lo) + f(hi)) * (0.5 * dt),
        _ => {
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (hi, false)
            } else {
                (hi - 3, true)
            };
            let mut acc = Complex64::new(0.0, 0.0);
            if even_end > lo {
                acc += f(lo) + f(even_end);
                let mut i = lo + 1;
                while i < even_end {
                    acc += f(i) * 4.0;
                    if i + 1 < even_end {
                        acc += f(i + 1) * 2.0;
                    }
                    i += 2;
                }
                acc *= dt / 3.0;
            }
            if tail {
                let a = even_end;
                let tail_sum = f(a) + f(a + 1) * 3.0 + f(a + 2) * 3.0 + f(a + 3);
                acc += tail_sum * (3.0 * dt / 8.0);
            }
            acc
        }
    }
}

/// Cumulative integral of uniformly sampled data with a fourth-order local
/// rule: interior steps use the four-point cubic `h/24 (-y0 + 13 y1 + 13 y2 - y3)`,
/// the first and last steps the one-sided cubic equivalents.
pub(crate) fn cumulative_integral(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = alloc::vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * dt * (values[i - 1] + values[i]);
        }
        return out;
    }
    let h = dt / 24.0;
    for i in 0..n - 1 {
        let step = if i == 0 {
            h * (9.0 * values[0] + 19.0 * values[1] - 5.0 * values[2] + values[3])
        } else if i == n - 2 {
            h * (9.0 * values[n - 1] + 19.0 * values[n - 2] - 5.0 * values[n - 3] + values[n - 4])
        } else {
            h * (-values[i - 1] + 13.0 * values[i] + 13.0 * values[i + 1] - values[i + 2])
        };
        out[i + 1] = out[i] + step;
    }
    out
}

/// Moments `M_k = \int_0^h u^k e^{i kappa u} du` for `k = 0..=K`.
pub(crate) fn oscillatory_moments<const K: usize>(kappa: f64, h: f64) -> [Complex64; K] {
    let mut m = [Complex64::new(0.0, 0.0); K];
    let z = kappa * h;
    if z.abs() < 1.0 {
        // Power series in (i kappa h), truncated once terms drop below 1e-18.
        let mut terms = [Complex64::new(0.0, 0.0); 24];
        let mut term = Complex64::new(1.0, 0.0);
        let mut used = 0;
        for (j, slot) in terms.iter_mut().enumerate() {
            if j > 0 {
                term *= Complex64::new(0.0, z / j as f64);
            }
            *slot = term;
            used = j + 1;
            if term.norm_sqr() < 1e-36 {
                break;
            }
        }
        let mut hk = h;
        for (k, mk) in m.iter_mut().enumerate() {
            let mut sum = Complex64::new(0.0, 0.0);
            for (j, t) in terms[..used].iter().enumerate() {
                sum += t / (k + j + 1) as f64;
            }
            *mk = sum * hk;
            hk *= h;
        }
    } else {
        let e = Complex64::new(0.0, z).exp();
        let ik = Complex64::new(0.0, kappa);
        let mut hk = 1.0;
        m[0] = (e - 1.0) / ik;
        for k in 1..K {
            hk *= h;
            m[k] = (e * hk - m[k - 1] * k as f64) / ik;
        }
    }
    m
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn simpson_exact_on_cubics() {
        let dt = 0.1;
        let f = |i: usize| {
            let t = i as f64 * dt;
            Complex64::new(t * t * t - 2.0 * t, 0.5 * t * t)
        };
        for &n in &[2usize, 4, 5, 7, 10] {
            let got = simpson(0, n, dt, f);
            let b = n as f64 * dt;
            let want = Complex64::new(b.powi(4) / 4.0 - b * b, b.powi(3) / 6.0);
            assert!((got - want).norm() < 1e-12, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn cumulative_integral_of_sine() {
        let n = 201;
        let dt = 2.0 * PI / 200.0;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * dt).sin()).collect();
        let c = cumulative_integral(&y, dt);
        for i in 0..n {
            let want = 1.0 - (i as f64 * dt).cos();
            assert!((c[i] - want).abs() < 1e-7);
        }
    }

    #[test]
    fn moments_series_and_recursion_agree() {
        for &(kappa, h) in &[
            (0.3, 1.0),
            (0.999, 1.0),
            (1.001, 1.0),
            (5.0, 0.7),
            (-3.0, 0.2),
            (0.0, 2.0),
        ] {
            let m = oscillatory_moments::<5>(kappa, h);
            // brute-force midpoint reference
            let steps = 20000;
            for k in 0..5 {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..steps {
                    let u = (s as f64 + 0.5) * h / steps as f64;
                    acc += Complex64::new(0.0, kappa * u).exp() * u.powi(k as i32);
                }
                acc *= h / steps as f64;
                assert!((m[k] - acc).norm() < 1e-7 * h.powi(k as i32 + 1), "k={k} kappa={kappa}");
            }
        }
    }
}
