//! Dense eigenvalue helpers: diagonal balancing, Schur eigenvalues and
//! inverse-iteration polishing.

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const RADIX: f64 = 2.0;

/// Diagonal similarity scaling (Parlett-Reinsch) that evens out row and
/// column norms. Scales are powers of two, so eigenvalues are unchanged
/// exactly.
pub fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let sqrdx = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= inv;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// All eigenvalues of a real square matrix, via balancing and a dense
/// real Schur solver.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut work = m.clone();
    balance(&mut work);
    let dense = Mat::<f64>::from_fn(n, n, |i, j| work[(i, j)]);
    let ev = dense.eigenvalues().map_err(|_| Error::EigenFailure(n))?;
    if ev.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::EigenFailure(n));
    }
    Ok(ev.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// Eigenvalues refined by inverse iteration on `m` itself, then by Newton
/// steps on `det(m - λI)` for isolated estimates.
///
/// Inverse iteration only replaces an estimate when it lowers the
/// eigen-residual and moves little, so clusters cannot collapse onto a
/// neighbour. The determinant step corrects simple eigenvalues sitting next
/// to a defective cluster, where unstructured backward error is amplified;
/// it is kept only if it converges and stays within half the gap to the
/// nearest other estimate.
pub fn eigenvalues_polished(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let raw = eigenvalues(m)?;
    let mc: DMatrix<Complex64> = m.map(|x| Complex64::new(x, 0.0));
    Ok(raw
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let gap = raw
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, z)| (z - mu).norm())
                .fold(f64::INFINITY, f64::min);
            let z = polish(&mc, mu);
            determinant_newton(&mc, z)
                .filter(|w| (w - mu).norm() < 0.5 * gap)
                .unwrap_or(z)
        })
        .collect())
}

fn polish(m: &DMatrix<Complex64>, mu: Complex64) -> Complex64 {
    let n = m.nrows();
    let scale = m.iter().fold(0.0_f64, |s, z| s.max(z.norm())).max(1.0);
    let max_move = 1e-5 * scale;
    let shifted = |s: Complex64| {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= s;
        }
        a
    };
    // nudge the shift off the eigenvalue so the factorization stays regular
    let shift = mu + Complex64::new(1e-13 * scale, 1e-13 * scale);
    let lu = shifted(shift).lu();
    let mut x = DVector::from_fn(n, |i, _| Complex64::new(1.0 + (i % 7) as f64 * 0.1, 0.0));
    let mut best = mu;
    let mut best_res = residual(m, mu, &x);
    for _ in 0..4 {
        let Some(y) = lu.solve(&x) else { break };
        let norm = y.norm();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        x = y.unscale(norm);
        let ax = m * &x;
        let lambda = x.dotc(&ax) / x.dotc(&x);
        let res = (ax - &x * lambda).norm();
        if (lambda - mu).norm() <= max_move && res < best_res {
            best = lambda;
            best_res = res;
        }
    }
    best
}

/// Newton's method on `det(m - λI)`, whose logarithmic derivative is
/// `-tr((m - λI)^-1)`. `None` unless the steps shrink to rounding level.
fn determinant_newton(m: &DMatrix<Complex64>, start: Complex64) -> Option<Complex64> {
    let n = m.nrows();
    let scale = m.iter().fold(0.0_f64, |s, z| s.max(z.norm())).max(1.0);
    let mut lambda = start;
    for _ in 0..6 {
        let mut a = m.clone();
        for i in 0..n {
            a[(i, i)] -= lambda;
        }
        let inv = a.lu().try_inverse()?;
        let trace: Complex64 = (0..n).map(|i| inv[(i, i)]).sum();
        let step = trace.inv();
        if !step.is_finite() {
            return None;
        }
        lambda += step;
        if step.norm() <= 1e-14 * scale {
            return Some(lambda);
        }
    }
    None
}

fn residual(m: &DMatrix<Complex64>, lambda: Complex64, x: &DVector<Complex64>) -> f64 {
    let norm = x.norm();
    ((m * x) - x * lambda).norm() / norm
}
