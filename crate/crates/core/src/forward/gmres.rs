//! Restarted GMRES with modified Gram-Schmidt and Givens rotations.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::parallel::{cdot, norm_sqr};

pub struct GmresOutcome {
    pub x: Vec<Complex64>,
    /// True relative residual `‖b - Ax‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += a * x);
}

fn residual(apply: &impl Fn(&[Complex64], &mut [Complex64]), b: &[Complex64], x: &[Complex64], r: &mut [Complex64]) {
    apply(x, r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
}

/// Solves `A x = b` from a zero initial guess.
pub fn gmres(
    apply: impl Fn(&[Complex64], &mut [Complex64]),
    b: &[Complex64],
    tol: f64,
    restart: usize,
    max_iterations: usize,
) -> GmresOutcome {
    let n = b.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let bnorm = norm_sqr(b).sqrt();
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let m = restart.max(1);
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut iterations = 0;
    let mut w = vec![zero; n];

    loop {
        if beta / bnorm <= tol {
            return GmresOutcome {
                x,
                residual: beta / bnorm,
                iterations,
                converged: true,
            };
        }
        if iterations >= max_iterations {
            return GmresOutcome {
                x,
                residual: beta / bnorm,
                iterations,
                converged: false,
            };
        }

        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut cols = 0;

        for j in 0..m {
            apply(&basis[j], &mut w);
            iterations += 1;
            for (i, v) in basis.iter().enumerate() {
                let hij = cdot(v, &w);
                h[i][j] = hij;
                axpy(&mut w, -hij, v);
            }
            let wnorm = norm_sqr(&w).sqrt();
            h[j + 1][j] = Complex64::new(wnorm, 0.0);

            for i in 0..j {
                let t = h[i][j] * cs[i] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i].conj() * h[i][j] + h[i + 1][j] * cs[i];
                h[i][j] = t;
            }
            let a = h[j][j];
            let rr = (a.norm_sqr() + wnorm * wnorm).sqrt();
            if a.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = Complex64::new(1.0, 0.0);
            } else {
                let phase = a / a.norm();
                cs[j] = a.norm() / rr;
                sn[j] = phase * (wnorm / rr);
            }
            h[j][j] = if a.norm() == 0.0 {
                Complex64::new(rr, 0.0)
            } else {
                a / a.norm() * rr
            };
            h[j + 1][j] = zero;
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            cols = j + 1;

            let estimate = g[j + 1].norm() / bnorm;
            if estimate <= tol || wnorm == 0.0 || iterations >= max_iterations || j + 1 == m {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }

        let mut y = vec![zero; cols];
        for i in (0..cols).rev() {
            let mut s = g[i];
            for c in i + 1..cols {
                s -= h[i][c] * y[c];
            }
            y[i] = s / h[i][i];
        }
        for (v, yi) in basis.iter().zip(&y) {
            axpy(&mut x, *yi, v);
        }
        residual(&apply, b, &x, &mut r);
        beta = norm_sqr(&r).sqrt();
    }
}
