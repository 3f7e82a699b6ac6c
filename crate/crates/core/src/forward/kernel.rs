//! Fourier coefficients of the truncated free-space Green's function.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// `Φ(r) = e^{ikr} / (4πr)`.
pub fn green(k: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r)
}

/// `(e^{iθ} - 1) / (iθ)`, evaluated without cancellation near `θ = 0`.
fn phase_mean(theta: f64) -> Complex64 {
    if theta.abs() < 1e-4 {
        let t2 = theta * theta;
        Complex64::new(1.0 - t2 / 6.0, theta / 2.0 - theta * t2 / 24.0)
    } else {
        let half = (0.5 * theta).sin();
        Complex64::new(theta.sin() / theta, 2.0 * half * half / theta)
    }
}

/// `∫_{|x|<R} Φ(x) e^{-iξ·x} dx` as a function of `a = |ξ|`.
///
/// Closed form `[1 - e^{ikR}(cos aR - i(k/a) sin aR)] / (a² - k²)`, evaluated
/// as `(R / 2ia)[E((k+a)R) - E((k-a)R)]` with `E(θ) = (e^{iθ} - 1)/(iθ)`,
/// which has no removable singularity at `a = k`.
pub fn truncated_kernel_transform(k: f64, radius: f64, a: f64) -> Complex64 {
    let a = a.abs();
    if a * radius < 1e-9 {
        // ∫₀ᴿ r e^{ikr} dr
        let kr = k * radius;
        let e = Complex64::from_polar(1.0, kr);
        return (e * Complex64::new(1.0, -kr) - 1.0) / (k * k);
    }
    let diff = phase_mean((k + a) * radius) - phase_mean((k - a) * radius);
    diff * Complex64::new(0.0, -radius / (2.0 * a))
}

/// Kernel coefficients on the frequency lattice `ξ = 2π m / L` of a periodic
/// box, one per node, stored in FFT order (`x` fastest).
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub k: f64,
    pub radius: f64,
    pub n: [usize; 3],
    pub lengths: [f64; 3],
    coeffs: Vec<Complex64>,
}

impl KernelTable {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn at(&self, i: usize, j: usize, l: usize) -> Complex64 {
        self.coeffs[(l * self.n[1] + j) * self.n[0] + i]
    }
}

fn signed_frequency(i: usize, n: usize) -> f64 {
    if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Tabulates the truncated-kernel transform on the box frequency lattice.
///
/// The box must be longer than `R` along every axis; the caller is
/// responsible for the stronger condition `L ≥ extent + R` that makes the
/// periodic convolution exact on the scatterer support.
pub fn precompute_kernel(k: f64, radius: f64, n: [usize; 3], lengths: [f64; 3]) -> Result<KernelTable> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::config("wavenumber must be positive"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::config("truncation radius must be positive"));
    }
    if n.iter().any(|&m| m == 0) {
        return Err(Error::config("periodic box needs at least one node per axis"));
    }
    for (a, &l) in lengths.iter().enumerate() {
        if !(l > radius) {
            return Err(Error::config(format!(
                "periodic box side {l} along axis {a} does not exceed the truncation radius {radius}"
            )));
        }
    }
    let w: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            (0..n[a])
                .map(|i| 2.0 * PI * signed_frequency(i, n[a]) / lengths[a])
                .collect()
        })
        .collect();
    let plane = n[0] * n[1];
    let mut coeffs = vec![Complex64::new(0.0, 0.0); plane * n[2]];
    coeffs.par_chunks_mut(plane).enumerate().for_each(|(l, layer)| {
        let wz = w[2][l];
        for j in 0..n[1] {
            let wy = w[1][j];
            for i in 0..n[0] {
                let wx = w[0][i];
                let a = (wx * wx + wy * wy + wz * wz).sqrt();
                layer[j * n[0] + i] = truncated_kernel_transform(k, radius, a);
            }
        }
    });
    Ok(KernelTable {
        k,
        radius,
        n,
        lengths,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Spec-form closed expression, valid away from `a = 0` and `a = k`.
    fn closed_form(k: f64, r: f64, a: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, k * r);
        let inner = Complex64::new((a * r).cos(), -(k / a) * (a * r).sin());
        (1.0 - e * inner) / (a * a - k * k)
    }

    /// Composite Gauss-Legendre (5 points) of `(1/a) ∫₀ᴿ e^{ikr} sin(ar) dr`.
    fn quadrature(k: f64, r: f64, a: f64) -> Complex64 {
        let nodes = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        let weights = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 4000;
        let h = r / panels as f64;
        let mut sum = Complex64::new(0.0, 0.0);
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(weights) {
                let t = mid + 0.5 * h * x;
                let f = if a == 0.0 { t } else { (a * t).sin() / a };
                sum += Complex64::from_polar(1.0, k * t) * f * (w * 0.5 * h);
            }
        }
        sum
    }

    #[test]
    fn matches_radial_quadrature() {
        let k = 15.2;
        let r = 0.9;
        for a in [0.0, 0.7, 2.0 * k, k, 3.3 * k] {
            let got = truncated_kernel_transform(k, r, a);
            let want = quadrature(k, r, a);
            assert!((got - want).norm() <= 1e-6 * want.norm(), "a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn agrees_with_closed_form() {
        let k = 16.2;
        let r = 1.3;
        for a in [0.3, 5.0, 20.0, 100.0] {
            let got = truncated_kernel_transform(k, r, a);
            let want = closed_form(k, r, a);
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1e-3), "a={a}");
        }
    }

    #[test]
    fn continuous_at_resonant_frequency() {
        let k = 15.2;
        let r = 0.8;
        let at = truncated_kernel_transform(k, r, k);
        let lo = closed_form(k, r, k * (1.0 - 1e-6));
        let hi = closed_form(k, r, k * (1.0 + 1e-6));
        let limit = (lo + hi) * 0.5;
        assert!((at - limit).norm() <= 1e-6 * at.norm());
        assert!(at.re.is_finite() && at.im.is_finite());
    }

    #[test]
    fn decays_like_inverse_square() {
        let k = 15.2;
        let r = 0.8;
        for a in [1e3, 1e4, 1e5, 1e6] {
            let v = truncated_kernel_transform(k, r, a).norm() * a * a;
            assert!(v.is_finite() && v <= 2.0 + 1e-6, "a={a}: {v}");
        }
    }

    #[test]
    fn rejects_small_box() {
        assert!(precompute_kernel(15.2, 1.0, [8, 8, 8], [0.9, 2.0, 2.0]).is_err());
        assert!(precompute_kernel(15.2, 1.0, [8, 8, 8], [2.0, 2.0, 2.0]).is_ok());
    }
}
