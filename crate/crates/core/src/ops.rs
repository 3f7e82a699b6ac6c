//! Finite-difference stencils, the exponential Carleman weight, and
//! trapezoidal integration along the wavenumber axis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexVolume, Grid, MultiKVolume, WavenumberGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Seven-point Laplacian at an interior node of a flat field.
#[inline]
pub(crate) fn laplacian_at(f: &[Complex64], g: &Grid, p: usize) -> Complex64 {
    let sx = 1;
    let sy = g.nx;
    let sz = g.layer_len();
    let c = f[p];
    (f[p + sx] + f[p - sx] - 2.0 * c) / (g.hx * g.hx)
        + (f[p + sy] + f[p - sy] - 2.0 * c) / (g.hy * g.hy)
        + (f[p + sz] + f[p - sz] - 2.0 * c) / (g.hz * g.hz)
}

/// Central-difference gradient at an interior node.
#[inline]
pub(crate) fn gradient_at(f: &[Complex64], g: &Grid, p: usize) -> [Complex64; 3] {
    let sy = g.nx;
    let sz = g.layer_len();
    [
        (f[p + 1] - f[p - 1]) / (2.0 * g.hx),
        (f[p + sy] - f[p - sy]) / (2.0 * g.hy),
        (f[p + sz] - f[p - sz]) / (2.0 * g.hz),
    ]
}

/// Laplacian at interior nodes; boundary nodes are set to zero because no
/// functional sums over them.
pub fn laplacian(f: &ComplexVolume) -> ComplexVolume {
    let g = f.grid;
    let mut out = ComplexVolume::zeros(g);
    for p in 0..g.len() {
        let (j, s, l) = g.unravel(p);
        if g.is_interior(j, s, l) {
            out.data[p] = laplacian_at(&f.data, &g, p);
        }
    }
    out
}

/// First derivative along one axis of a line of samples: central inside,
/// second-order one-sided at both ends.
#[inline]
fn diff1(line: impl Fn(usize) -> Complex64, i: usize, n: usize, h: f64) -> Complex64 {
    if i == 0 {
        (-3.0 * line(0) + 4.0 * line(1) - line(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * line(n - 1) - 4.0 * line(n - 2) + line(n - 3)) / (2.0 * h)
    } else {
        (line(i + 1) - line(i - 1)) / (2.0 * h)
    }
}

/// Gradient `(∂x, ∂y, ∂z)` at every node: central differences inside,
/// second-order one-sided differences on the faces.
pub fn gradient3(f: &ComplexVolume) -> [ComplexVolume; 3] {
    let g = f.grid;
    let d = &f.data;
    let mut out = [ComplexVolume::zeros(g), ComplexVolume::zeros(g), ComplexVolume::zeros(g)];
    for p in 0..g.len() {
        let (j, s, l) = g.unravel(p);
        out[0].data[p] = diff1(|i| d[g.idx(i, s, l)], j, g.nx, g.hx);
        out[1].data[p] = diff1(|i| d[g.idx(j, i, l)], s, g.ny, g.hy);
        out[2].data[p] = diff1(|i| d[g.idx(j, s, i)], l, g.nz, g.hz);
    }
    out
}

/// Pure second differences `(∂xx, ∂yy, ∂zz)`; face nodes reuse the value of
/// the adjacent node.
pub fn second_differences(f: &ComplexVolume) -> [ComplexVolume; 3] {
    let g = f.grid;
    let d = &f.data;
    let dd = |line: &dyn Fn(usize) -> Complex64, i: usize, n: usize, h: f64| {
        let c = i.clamp(1, n - 2);
        (line(c + 1) - 2.0 * line(c) + line(c - 1)) / (h * h)
    };
    let mut out = [ComplexVolume::zeros(g), ComplexVolume::zeros(g), ComplexVolume::zeros(g)];
    for p in 0..g.len() {
        let (j, s, l) = g.unravel(p);
        out[0].data[p] = dd(&|i| d[g.idx(i, s, l)], j, g.nx, g.hx);
        out[1].data[p] = dd(&|i| d[g.idx(j, i, l)], s, g.ny, g.hy);
        out[2].data[p] = dd(&|i| d[g.idx(j, s, i)], l, g.nz, g.hz);
    }
    out
}

/// Trapezoidal weights of `∫_{k_n}^{k_max} f(κ) dκ` over the samples
/// `n..nk`.
#[derive(Clone, Debug)]
pub struct TailQuadrature {
    nk: usize,
    hk: f64,
}

impl TailQuadrature {
    pub fn new(kgrid: &WavenumberGrid) -> Self {
        Self {
            nk: kgrid.nk,
            hk: kgrid.step(),
        }
    }

    /// Weight of sample `m` in the integral starting at `n`.
    #[inline]
    pub fn weight(&self, n: usize, m: usize) -> f64 {
        if m < n || n + 1 >= self.nk {
            0.0
        } else if m == n || m + 1 == self.nk {
            0.5 * self.hk
        } else {
            self.hk
        }
    }

    /// All tail integrals of one sample sequence, by backward recurrence.
    pub fn integrate<T>(&self, f: &[T], out: &mut [T])
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let nk = self.nk;
        out[nk - 1] = T::default();
        for n in (0..nk - 1).rev() {
            out[n] = out[n + 1] + (f[n] + f[n + 1]) * (0.5 * self.hk);
        }
    }

    /// Adjoint of [`integrate`](Self::integrate): `out[m] = Σ_n w(n, m)·x[n]`.
    pub fn adjoint<T>(&self, x: &[T], out: &mut [T])
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let nk = self.nk;
        let half = 0.5 * self.hk;
        // prefix[p] = Σ_{n <= p} x[n]; panel p covers samples p and p + 1.
        let mut prefix = T::default();
        let mut prev_prefix = T::default();
        for m in 0..nk {
            if m + 1 < nk {
                prefix = prefix + x[m];
            }
            let mut acc = T::default();
            if m + 1 < nk {
                acc = acc + prefix * half;
            }
            if m >= 1 {
                acc = acc + prev_prefix * half;
            }
            out[m] = acc;
            prev_prefix = prefix;
        }
    }
}

/// `∫_{k_n}^{k_max} q(x, κ) dκ` at every node by the trapezoidal rule.
pub fn k_tail_integral(q: &MultiKVolume, n: usize) -> ComplexVolume {
    let quad = TailQuadrature::new(&q.kgrid);
    let mut out = ComplexVolume::zeros(q.grid);
    for m in n..q.kgrid.nk {
        let w = quad.weight(n, m);
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.data.iter_mut().zip(q.slab(m)) {
            *o += v * w;
        }
    }
    out
}

/// Tail integrals for every starting wavenumber.
pub fn k_tail_integrals(q: &MultiKVolume) -> MultiKVolume {
    let quad = TailQuadrature::new(&q.kgrid);
    let nk = q.kgrid.nk;
    let m = q.grid.len();
    let mut out = MultiKVolume::zeros(q.grid, q.kgrid);
    let mut line = vec![ZERO; nk];
    let mut res = vec![ZERO; nk];
    for p in 0..m {
        for n in 0..nk {
            line[n] = q.data[n * m + p];
        }
        quad.integrate(&line, &mut res);
        for n in 0..nk {
            out.data[n * m + p] = res[n];
        }
    }
    out
}

/// Exponential weight `e^{-2λ(z + ξ)}` per z-layer, normalised to 1 on the
/// front face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanWeight {
    pub lambda: f64,
    pub weights: Vec<f64>,
}

impl CarlemanWeight {
    #[inline]
    pub fn at_layer(&self, l: usize) -> f64 {
        self.weights[l]
    }
}

pub fn weight_table(lambda: f64, grid: &Grid) -> Result<CarlemanWeight> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("weight exponent must be positive, got {lambda}")));
    }
    let weights = (0..grid.nz)
        .map(|l| (-2.0 * lambda * (l as f64 * grid.hz)).exp())
        .collect();
    Ok(CarlemanWeight { lambda, weights })
}
