//! Measured-data processing: relative noise, angular-spectrum propagation
//! toward the scatterer, the depth scan, and the boundary functions on `Γ`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PlaneLattice, WavenumberGrid};

/// Complex samples on a plane `z = const` at one wavenumber.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneField {
    pub lattice: PlaneLattice,
    pub z: f64,
    pub k: f64,
    /// Row-major, `x` fastest.
    pub values: Vec<Complex64>,
}

impl PlaneField {
    pub fn from_fn(lattice: PlaneLattice, z: f64, k: f64, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..lattice.ny)
            .flat_map(|s| (0..lattice.nx).map(move |j| (j, s)))
            .map(|(j, s)| f(lattice.x(j), lattice.y(s)))
            .collect();
        Self { lattice, z, k, values }
    }

    pub fn at(&self, j: usize, s: usize) -> Complex64 {
        self.values[s * self.lattice.nx + j]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        if self.values.len() != self.lattice.len() {
            return Err(Error::Shape(format!(
                "plane field has {} values for a {}x{} lattice",
                self.values.len(),
                self.lattice.nx,
                self.lattice.ny
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { delta: 0.15, seed: 1 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!("noise level {} outside [0, 1)", self.delta)));
        }
        Ok(())
    }
}

/// `f + δ‖f‖σ/‖σ‖` with `σ = σ₁ + iσ₂` uniform on `(-1, 1)²`. The random
/// stream is selected by `stream` (the wavenumber index in a stack) so each
/// plane draws independent noise from one seed.
pub fn add_noise(f: &PlaneField, spec: &NoiseSpec, stream: u64) -> Result<PlaneField> {
    spec.validate()?;
    f.check_shape()?;
    if spec.delta == 0.0 {
        return Ok(f.clone());
    }
    let fnorm = f.norm();
    if fnorm == 0.0 {
        return Err(Error::DegenerateData("relative noise of a zero field is undefined".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let sigma: Vec<Complex64> = (0..f.values.len())
        .map(|_| {
            let re = rng.random_range(-1.0..1.0);
            let im = rng.random_range(-1.0..1.0);
            Complex64::new(re, im)
        })
        .collect();
    let snorm = sigma.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let scale = spec.delta * fnorm / snorm;
    let mut out = f.clone();
    for (v, s) in out.values.iter_mut().zip(&sigma) {
        *v += s * scale;
    }
    Ok(out)
}

pub fn add_noise_stack(fields: &[PlaneField], spec: &NoiseSpec) -> Result<Vec<PlaneField>> {
    fields
        .iter()
        .enumerate()
        .map(|(n, f)| add_noise(f, spec, n as u64))
        .collect()
}

fn fft2(values: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let (px, py) = if inverse {
        (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny))
    } else {
        (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny))
    };
    px.process(values);
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for j in 0..nx {
        for s in 0..ny {
            col[s] = values[s * nx + j];
        }
        py.process(&mut col);
        for s in 0..ny {
            values[s * nx + j] = col[s];
        }
    }
}

fn frequency(i: usize, n: usize, h: f64) -> f64 {
    let m = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
    2.0 * std::f64::consts::PI * m / (n as f64 * h)
}

/// Moves the field to the plane `target_z` by the angular spectrum method.
///
/// The incident wave `e^{ikz}` is removed, each plane-wave mode `κ` of the
/// scattered part is multiplied by `e^{-i k_z Δz}` with
/// `k_z = √(k² - |κ|²)` (a wave travelling toward `-z`), modes with
/// `|κ| > k` are discarded, and the incident wave at the target is added back.
pub fn propagate(f: &PlaneField, target_z: f64) -> Result<PlaneField> {
    f.check_shape()?;
    let PlaneLattice { nx, ny, hx, hy, .. } = f.lattice;
    let k = f.k;
    let inc_src = Complex64::from_polar(1.0, k * f.z);
    let mut spec: Vec<Complex64> = f.values.iter().map(|v| v - inc_src).collect();
    fft2(&mut spec, nx, ny, false);
    let dz = target_z - f.z;
    let norm = 1.0 / (nx * ny) as f64;
    for s in 0..ny {
        let ky = frequency(s, ny, hy);
        for j in 0..nx {
            let kx = frequency(j, nx, hx);
            let kappa2 = kx * kx + ky * ky;
            let v = &mut spec[s * nx + j];
            if kappa2 > k * k {
                *v = Complex64::new(0.0, 0.0);
            } else {
                let kz = (k * k - kappa2).sqrt();
                *v *= Complex64::from_polar(norm, -kz * dz);
            }
        }
    }
    fft2(&mut spec, nx, ny, true);
    let inc_dst = Complex64::from_polar(1.0, k * target_z);
    Ok(PlaneField {
        lattice: f.lattice,
        z: target_z,
        k,
        values: spec.into_iter().map(|v| v + inc_dst).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub depths: Vec<f64>,
    pub maxima: Vec<f64>,
    pub argmax: f64,
}

/// Which field the depth scan measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanQuantity {
    /// The propagated total field.
    #[default]
    Total,
    /// The propagated field minus the incident wave at the target plane.
    Scattered,
}

/// `M(a) = max |propagate(f, a)|` on `n` equispaced depths from `a_lo` to
/// `a_hi` inclusive. Ties resolve to the first maximal sample.
pub fn scan_depth(f: &PlaneField, a_lo: f64, a_hi: f64, n: usize) -> Result<DepthScan> {
    scan_depth_of(f, a_lo, a_hi, n, ScanQuantity::Total)
}

pub fn scan_depth_of(f: &PlaneField, a_lo: f64, a_hi: f64, n: usize, quantity: ScanQuantity) -> Result<DepthScan> {
    if n == 0 || !(a_lo <= a_hi) {
        return Err(Error::config("depth scan needs a non-empty range"));
    }
    if !(a_lo > f.z) {
        return Err(Error::config(format!(
            "depth scan must start beyond the data plane z = {}",
            f.z
        )));
    }
    let depths: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                a_lo
            } else {
                a_lo + (a_hi - a_lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let maxima = depths
        .par_iter()
        .map(|&a| {
            propagate(f, a).map(|g| match quantity {
                ScanQuantity::Total => g.max_abs(),
                ScanQuantity::Scattered => {
                    let inc = Complex64::from_polar(1.0, f.k * a);
                    g.values.iter().map(|v| (v - inc).norm()).fold(0.0, f64::max)
                }
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let top = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = maxima
        .iter()
        .position(|&m| m >= top - 1e-12 * top.abs())
        .unwrap_or(0);
    Ok(DepthScan {
        argmax: depths[first],
        depths,
        maxima,
    })
}

/// Near-field data on `Γ`: `g₀ = u(·, -ξ)` and the one-sided difference
/// `g₁ = (g₀ - u(·, -ξ-ε)) / ε ≈ ∂_z u(·, -ξ)`.
pub fn extract_boundary_data(fields: &[PlaneField], xi: f64, epsilon: f64) -> Result<(Vec<PlaneField>, Vec<PlaneField>)> {
    if !(epsilon > 0.0) {
        return Err(Error::config("finite-difference offset must be positive"));
    }
    let pairs = fields
        .par_iter()
        .map(|f| {
            let g0 = propagate(f, -xi)?;
            let shifted = propagate(f, -xi - epsilon)?;
            let mut g1 = g0.clone();
            for (d, s) in g1.values.iter_mut().zip(&shifted.values) {
                *d = (*d - s) / epsilon;
            }
            Ok((g0, g1))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Boundary functions on `Γ` for every wavenumber, one plane per `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDataSet {
    pub lattice: PlaneLattice,
    pub kgrid: WavenumberGrid,
    pub xi: f64,
    pub v: Vec<Vec<Complex64>>,
    pub vz: Vec<Vec<Complex64>>,
    pub phi0: Vec<Vec<Complex64>>,
    pub phi1: Vec<Vec<Complex64>>,
    pub psi0: Vec<Complex64>,
    pub psi1: Vec<Complex64>,
}

/// `∂_k` of samples on the wavenumber grid: central inside, second-order
/// one-sided at both ends (first order when only two samples exist).
pub(crate) fn k_derivative(f: &[Complex64], hk: f64) -> Vec<Complex64> {
    let n = f.len();
    if n == 2 {
        let d = (f[1] - f[0]) / hk;
        return vec![d, d];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * hk)
            } else if i + 1 == n {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * hk)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * hk)
            }
        })
        .collect()
}

/// Logarithm of a sequence along `k`, principal at the last sample and
/// continued toward smaller `k` so the phase never jumps by more than `π`.
pub(crate) fn unwrapped_log(w: &[Complex64]) -> Vec<Complex64> {
    let n = w.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[n - 1] = w[n - 1].ln();
    for i in (0..n - 1).rev() {
        let step = (w[i] / w[i + 1]).arg();
        out[i] = Complex64::new(w[i].norm().ln(), out[i + 1].im + step);
    }
    out
}

/// `w = g₀ e^{ikξ}`, `v = log w / k²`, `v_z = (g₁/g₀ - ik) / k²`, then
/// `φ₀ = ∂_k v`, `φ₁ = ∂_k v_z`, `ψ₀ = v(k̄)`, `ψ₁ = v_z(k̄)`.
pub fn log_and_differentiate(
    g0: &[PlaneField],
    g1: &[PlaneField],
    kgrid: &WavenumberGrid,
    xi: f64,
) -> Result<BoundaryDataSet> {
    kgrid.validate()?;
    let nk = kgrid.nk;
    if g0.len() != nk || g1.len() != nk {
        return Err(Error::Shape(format!(
            "expected {nk} planes of g0 and g1, got {} and {}",
            g0.len(),
            g1.len()
        )));
    }
    let lattice = g0[0].lattice;
    for f in g0.iter().chain(g1) {
        f.check_shape()?;
        if f.lattice != lattice {
            return Err(Error::Shape("boundary planes use different lattices".into()));
        }
    }
    let m = lattice.len();
    let scale = g0.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    for (n, f) in g0.iter().enumerate() {
        for (q, v) in f.values.iter().enumerate() {
            if !(v.norm() > 1e-12 * scale) {
                let (j, s) = (q % lattice.nx, q / lattice.nx);
                return Err(Error::DegenerateData(format!(
                    "g0 vanishes at node ({j}, {s}) for k = {}",
                    kgrid.k(n)
                )));
            }
        }
    }
    let ks = kgrid.values();
    let hk = kgrid.step();
    let per_node: Vec<[Vec<Complex64>; 4]> = (0..m)
        .into_par_iter()
        .map(|q| {
            let w: Vec<Complex64> = (0..nk)
                .map(|n| g0[n].values[q] * Complex64::from_polar(1.0, ks[n] * xi))
                .collect();
            let logw = unwrapped_log(&w);
            let v: Vec<Complex64> = (0..nk).map(|n| logw[n] / (ks[n] * ks[n])).collect();
            let vz: Vec<Complex64> = (0..nk)
                .map(|n| {
                    let k = ks[n];
                    (g1[n].values[q] / g0[n].values[q] - Complex64::new(0.0, k)) / (k * k)
                })
                .collect();
            let p0 = k_derivative(&v, hk);
            let p1 = k_derivative(&vz, hk);
            [v, vz, p0, p1]
        })
        .collect();
    let gather = |i: usize| -> Vec<Vec<Complex64>> {
        (0..nk)
            .map(|n| per_node.iter().map(|node| node[i][n]).collect())
            .collect()
    };
    let v = gather(0);
    let vz = gather(1);
    Ok(BoundaryDataSet {
        lattice,
        kgrid: *kgrid,
        xi,
        psi0: v[nk - 1].clone(),
        psi1: vz[nk - 1].clone(),
        phi0: gather(2),
        phi1: gather(3),
        v,
        vz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    fn lattice() -> PlaneLattice {
        DomainSpec::default().with_resolution(21).lattice().unwrap()
    }

    #[test]
    fn zero_noise_is_bitwise_identity() {
        let f = PlaneField::from_fn(lattice(), -8.0, 15.2, |x, y| Complex64::new(x, y * y));
        let g = add_noise(&f, &NoiseSpec { delta: 0.0, seed: 3 }, 0).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn noise_of_zero_field_is_rejected() {
        let f = PlaneField::from_fn(lattice(), -8.0, 15.2, |_, _| Complex64::new(0.0, 0.0));
        assert!(add_noise(&f, &NoiseSpec::default(), 0).is_err());
    }

    #[test]
    fn streams_differ() {
        let f = PlaneField::from_fn(lattice(), -8.0, 15.2, |x, _| Complex64::new(1.0, x));
        let a = add_noise(&f, &NoiseSpec::default(), 0).unwrap();
        let b = add_noise(&f, &NoiseSpec::default(), 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn unwrap_anchors_principal_branch_at_top() {
        let w: Vec<Complex64> = (0..11)
            .map(|n| Complex64::from_polar(1.0, (15.2 + 0.1 * n as f64) * 0.15))
            .collect();
        let l = unwrapped_log(&w);
        for (n, v) in l.iter().enumerate() {
            assert!((v.im - (15.2 + 0.1 * n as f64) * 0.15).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let f: Vec<Complex64> = (0..5).map(|n| Complex64::new((n * n) as f64 * 0.01, 0.0)).collect();
        let d = k_derivative(&f, 0.1);
        for (n, v) in d.iter().enumerate() {
            assert!((v.re - 2.0 * n as f64 * 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_rejects_bad_ranges() {
        let f = PlaneField::from_fn(lattice(), -8.0, 15.2, |_, _| Complex64::new(1.0, 0.0));
        assert!(scan_depth(&f, 0.0, -1.0, 5).is_err());
        assert!(scan_depth(&f, -9.0, 1.0, 5).is_err());
        assert!(scan_depth(&f, -1.0, 1.0, 0).is_err());
    }
}
