//! Trapezoid quadrature on circles via FFT, and the parallel map used by the heavy loops.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

/// `M` equally spaced points `r·e^{2πij/M}`.
pub fn circle(r: f64, m: usize) -> Vec<C64> {
    (0..m).map(|j| C64::from_polar(r, 2.0 * PI * j as f64 / m as f64)).collect()
}

/// Laurent coefficients `c_0..c_{n-1}` of `f` from samples on `|z| = r`.
pub fn taylor_coeffs(samples: &[C64], r: f64, n: usize) -> Vec<C64> {
    let m = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mut scale = 1.0 / m as f64;
    (0..n)
        .map(|k| {
            let v = buf[k] * scale;
            scale /= r;
            v
        })
        .collect()
}

/// Coefficients of `x^{k} y^{l}` for `k, l < n` from a row-major `m × m` grid on `|x| = rx`, `|y| = ry`.
pub fn taylor_coeffs_2d(grid: &[C64], m: usize, rx: f64, ry: f64, n: usize) -> Vec<Vec<C64>> {
    let mut buf = grid.to_vec();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut buf);
    let mut cols = vec![C64::new(0.0, 0.0); m];
    let mut out = vec![vec![C64::new(0.0, 0.0); n]; n];
    let norm = 1.0 / (m * m) as f64;
    for l in 0..n {
        for j in 0..m {
            cols[j] = buf[j * m + l];
        }
        fft.process(&mut cols);
        for k in 0..n {
            out[k][l] = cols[k] * norm / (rx.powi(k as i32) * ry.powi(l as i32));
        }
    }
    out
}

#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_polynomial_coefficients() {
        let coeffs = [C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.0, 3.0)];
        let samples: Vec<C64> = circle(0.3, 16)
            .into_iter()
            .map(|z| coeffs[0] + coeffs[1] * z + coeffs[2] * z * z)
            .collect();
        let got = taylor_coeffs(&samples, 0.3, 4);
        for k in 0..3 {
            assert!((got[k] - coeffs[k]).norm() < 1e-13);
        }
        assert!(got[3].norm() < 1e-12);
    }

    #[test]
    fn recovers_bivariate_coefficients() {
        let m = 16;
        let (rx, ry) = (0.5, 0.2);
        let xs = circle(rx, m);
        let ys = circle(ry, m);
        let f = |x: C64, y: C64| C64::new(2.0, 0.0) + x * y * 3.0 + x * x * C64::new(0.0, 1.0) - y * y * y;
        let grid: Vec<C64> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| f(x, y))).collect();
        let c = taylor_coeffs_2d(&grid, m, rx, ry, 4);
        assert!((c[0][0] - 2.0).norm() < 1e-13);
        assert!((c[1][1] - 3.0).norm() < 1e-12);
        assert!((c[2][0] - C64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((c[0][3] + 1.0).norm() < 1e-10);
        assert!(c[1][2].norm() < 1e-10);
    }
}
