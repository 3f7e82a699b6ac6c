//! Periodic collocation box around the support of `c - 1`.
//!
//! The fine lattice is a refinement of the volume grid (integer ratio per
//! axis, shared origin), so every volume node inside the box is also a box
//! node. The box side along each axis is at least `extent + R`, where `R` is
//! the kernel truncation radius and exceeds the support diameter; then the
//! periodised truncated kernel coincides with `Φ` for every pair of support
//! points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft3::IndexBox;
use crate::error::{Error, Result};
use crate::grid::{DielectricField, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardParams {
    /// Relative residual target for the Krylov solve.
    pub tol: f64,
    pub restart: usize,
    pub max_iterations: usize,
    /// Truncation radius as a multiple of the support diameter (> 1).
    pub radius_factor: f64,
    /// Collocation nodes per wavelength inside the densest part of the
    /// scatterer at the largest wavenumber.
    pub points_per_wavelength: f64,
}

impl Default for ForwardParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 60,
            max_iterations: 3000,
            radius_factor: 1.1,
            points_per_wavelength: 6.0,
        }
    }
}

impl ForwardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("forward tolerance must lie in (0, 1)"));
        }
        if self.restart == 0 || self.max_iterations == 0 {
            return Err(Error::config("forward restart and iteration cap must be positive"));
        }
        if !(self.radius_factor > 1.0 && self.radius_factor.is_finite()) {
            return Err(Error::config("truncation radius factor must exceed 1"));
        }
        if !(self.points_per_wavelength > 0.0 && self.points_per_wavelength.is_finite()) {
            return Err(Error::config("points per wavelength must be positive"));
        }
        Ok(())
    }
}

/// Smallest `m ≥ n` whose prime factors are all ≤ 7.
pub(crate) fn fft_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

#[derive(Clone, Debug)]
pub struct ScattererGrid {
    /// Nodes per axis of the periodic box.
    pub n: [usize; 3],
    pub h: [f64; 3],
    /// Coordinates of box node `(0, 0, 0)`.
    pub origin: [f64; 3],
    /// Volume-grid step divided by box step, per axis.
    pub refinement: [usize; 3],
    /// Offset of box index 0 in fine-lattice units relative to the volume
    /// grid origin.
    pub offset: [i64; 3],
    pub radius: f64,
    /// Flat box indices of nodes with `c > 1`.
    pub support: Vec<usize>,
    /// `c - 1` at the support nodes.
    pub contrast: Vec<f64>,
    /// Index bounding box of the support.
    pub active: IndexBox,
    pub diameter: f64,
}

impl ScattererGrid {
    pub fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.n[a] as f64 * self.h[a])
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    pub fn node(&self, p: usize) -> [f64; 3] {
        let j = p % self.n[0];
        let s = (p / self.n[0]) % self.n[1];
        let l = p / (self.n[0] * self.n[1]);
        [
            self.origin[0] + j as f64 * self.h[0],
            self.origin[1] + s as f64 * self.h[1],
            self.origin[2] + l as f64 * self.h[2],
        ]
    }

    /// Box index of volume node `(j, s, l)`, if it lies in the box.
    pub fn box_index_of(&self, j: usize, s: usize, l: usize) -> Option<usize> {
        let mut idx = [0usize; 3];
        for (a, v) in [j, s, l].into_iter().enumerate() {
            let i = (v * self.refinement[a]) as i64 - self.offset[a];
            if i < 0 || i >= self.n[a] as i64 {
                return None;
            }
            idx[a] = i as usize;
        }
        Some((idx[2] * self.n[1] + idx[1]) * self.n[0] + idx[0])
    }

    /// Lower and upper `z` of the support nodes.
    pub fn z_range(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let lo = self.origin[2] + self.active.lo[2] as f64 * self.h[2];
        let hi = self.origin[2] + (self.active.hi[2] - 1) as f64 * self.h[2];
        Some((lo, hi))
    }

    pub fn build(c: &DielectricField, k_max: f64, params: &ForwardParams) -> Result<Self> {
        params.validate()?;
        if !(k_max > 0.0 && k_max.is_finite()) {
            return Err(Error::config("wavenumber must be positive"));
        }
        let g = c.grid;
        if c.values.iter().any(|v| !v.is_finite() || *v < 1.0) {
            return Err(Error::config("dielectric values must be finite and >= 1"));
        }
        let c_max = c.values.iter().cloned().fold(1.0, f64::max);
        let geometry = support_geometry(c);
        let c_max = match c.inclusions() {
            Some(list) => list.iter().map(|i| i.c_max).fold(c_max, f64::max),
            None => c_max,
        };
        let Some((lo, hi, diameter)) = geometry else {
            return Ok(Self {
                n: [1, 1, 1],
                h: [g.hx, g.hy, g.hz],
                origin: [g.x0, g.y0, g.z0],
                refinement: [1, 1, 1],
                offset: [0, 0, 0],
                radius: 0.0,
                support: Vec::new(),
                contrast: Vec::new(),
                active: IndexBox { lo: [0; 3], hi: [0; 3] },
                diameter: 0.0,
            });
        };

        let wavelength = 2.0 * std::f64::consts::PI / (k_max * c_max.sqrt());
        let target = wavelength / params.points_per_wavelength;
        let coarse = [g.hx, g.hy, g.hz];
        let base = [g.x0, g.y0, g.z0];
        let refinement = coarse.map(|h| ((h / target) - 1e-9).ceil().max(1.0) as usize);
        let h = [0, 1, 2].map(|a| coarse[a] / refinement[a] as f64);
        let radius = params.radius_factor * diameter;

        let mut n = [0usize; 3];
        let mut offset = [0i64; 3];
        let mut origin = [0.0; 3];
        let mut span_lo = [0i64; 3];
        let mut span_hi = [0i64; 3];
        for a in 0..3 {
            let i_lo = ((lo[a] - base[a]) / h[a] - 1e-9).floor() as i64;
            let i_hi = ((hi[a] - base[a]) / h[a] + 1e-9).ceil() as i64;
            let nodes = (i_hi - i_lo + 1) as usize;
            let need = (i_hi - i_lo) as usize + (radius / h[a]).ceil() as usize + 1;
            n[a] = fft_size(need.max(nodes));
            let pad = (n[a] - nodes) as i64;
            offset[a] = i_lo - pad / 2;
            origin[a] = base[a] + offset[a] as f64 * h[a];
            span_lo[a] = i_lo - offset[a];
            span_hi[a] = i_hi - offset[a] + 1;
        }

        let contrast_at = contrast_fn(c);
        let mut support = Vec::new();
        let mut contrast = Vec::new();
        let mut act_lo = [usize::MAX; 3];
        let mut act_hi = [0usize; 3];
        for l in span_lo[2] as usize..span_hi[2] as usize {
            for s in span_lo[1] as usize..span_hi[1] as usize {
                for j in span_lo[0] as usize..span_hi[0] as usize {
                    let x = [
                        origin[0] + j as f64 * h[0],
                        origin[1] + s as f64 * h[1],
                        origin[2] + l as f64 * h[2],
                    ];
                    let m = contrast_at(x);
                    if m > 0.0 {
                        support.push((l * n[1] + s) * n[0] + j);
                        contrast.push(m);
                        for (a, v) in [j, s, l].into_iter().enumerate() {
                            act_lo[a] = act_lo[a].min(v);
                            act_hi[a] = act_hi[a].max(v + 1);
                        }
                    }
                }
            }
        }
        if support.is_empty() {
            act_lo = [0; 3];
            act_hi = [0; 3];
        }
        Ok(Self {
            n,
            h,
            origin,
            refinement,
            offset,
            radius,
            support,
            contrast,
            active: IndexBox { lo: act_lo, hi: act_hi },
            diameter,
        })
    }
}

/// Bounding box and diameter of the closure of `{c > 1}`, or `None` for a
/// vacuum field.
fn support_geometry(c: &DielectricField) -> Option<([f64; 3], [f64; 3], f64)> {
    let g = c.grid;
    if let Some(list) = c.inclusions() {
        let list: Vec<_> = list.iter().filter(|i| i.c_max > 1.0).collect();
        if list.is_empty() {
            return None;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut diameter: f64 = 0.0;
        for a in &list {
            for d in 0..3 {
                lo[d] = lo[d].min(a.center[d] - a.radius);
                hi[d] = hi[d].max(a.center[d] + a.radius);
            }
            for b in &list {
                diameter = diameter.max(a.distance(b.center) + a.radius + b.radius);
            }
        }
        return Some((lo, hi, diameter));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, &v) in c.values.iter().enumerate() {
        if v > 1.0 {
            let x = g.point(p);
            for d in 0..3 {
                lo[d] = lo[d].min(x[d]);
                hi[d] = hi[d].max(x[d]);
            }
        }
    }
    if lo[0] > hi[0] {
        return None;
    }
    // the interpolated contrast reaches one cell beyond the marked nodes
    let step = [g.hx, g.hy, g.hz];
    let origin = [g.x0, g.y0, g.z0];
    let top = [g.x(g.nx - 1), g.y(g.ny - 1), g.z_max()];
    for d in 0..3 {
        lo[d] = (lo[d] - step[d]).max(origin[d]);
        hi[d] = (hi[d] + step[d]).min(top[d]);
    }
    let diameter = (0..3).map(|d| (hi[d] - lo[d]).powi(2)).sum::<f64>().sqrt();
    Some((lo, hi, diameter))
}

/// `c - 1` at an arbitrary point: the analytic profile for phantoms, trilinear
/// interpolation of the samples otherwise; zero outside the open box.
fn contrast_fn(c: &DielectricField) -> Box<dyn Fn([f64; 3]) -> f64 + '_> {
    let g: Grid = c.grid;
    let top = [g.x(g.nx - 1), g.y(g.ny - 1), g.z_max()];
    let origin = [g.x0, g.y0, g.z0];
    let inside = move |x: [f64; 3]| (0..3).all(|d| x[d] > origin[d] && x[d] < top[d]);
    if let Some(list) = c.inclusions() {
        return Box::new(move |x| {
            if !inside(x) {
                return 0.0;
            }
            for inc in list {
                let v = inc.value_at(x);
                if v > 1.0 {
                    return v - 1.0;
                }
            }
            0.0
        });
    }
    Box::new(move |x| {
        if !inside(x) {
            return 0.0;
        }
        let step = [g.hx, g.hy, g.hz];
        let counts = [g.nx, g.ny, g.nz];
        let mut i0 = [0usize; 3];
        let mut t = [0.0; 3];
        for d in 0..3 {
            let u = (x[d] - origin[d]) / step[d];
            let i = (u.floor() as usize).min(counts[d] - 2);
            i0[d] = i;
            t[d] = u - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let b = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let mut w = 1.0;
            for d in 0..3 {
                w *= if b[d] == 1 { t[d] } else { 1.0 - t[d] };
            }
            if w != 0.0 {
                let p = g.idx(i0[0] + b[0], i0[1] + b[1], i0[2] + b[2]);
                acc += w * (c.values[p] - 1.0);
            }
        }
        acc.max(0.0)
    })
}

/// Complex-valued `m·u` density at the support, scattered into a zeroed box.
pub(crate) fn scatter_density(grid: &ScattererGrid, values: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for ((&p, &m), &u) in grid.support.iter().zip(&grid.contrast).zip(values) {
        out[p] = u * m;
    }
}
