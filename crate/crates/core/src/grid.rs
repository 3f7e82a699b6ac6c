//! Geometry of the computational box, vertex-centred grids, complex fields
//! on them, and ball-shaped dielectric phantoms.
//!
//! Field layout: `x` fastest, then `y`, then `z`, then (for multi-wavenumber
//! fields) the wavenumber index, i.e. flat index
//! `((n * nz + l) * ny + s) * nx + j`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops;

/// Box `(-b, b)² × (-ξ, d)` with the backscatter face `Γ` at `z = -ξ`, plus
/// the measurement plane and grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    /// Lateral half width `b`.
    pub half_width: f64,
    /// Offset `ξ` of the front face: `Γ` lies on `z = -ξ`.
    pub front_offset: f64,
    /// Back face `z = d`.
    pub back_z: f64,
    /// Measurement plane `z = meas_z`, in front of `Γ`.
    pub meas_z: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            front_offset: 0.5,
            back_z: 4.5,
            meas_z: -8.0,
            nx: 51,
            ny: 51,
            nz: 51,
        }
    }
}

impl DomainSpec {
    /// Same geometry with `n` nodes along every axis.
    pub fn with_resolution(mut self, n: usize) -> Self {
        self.nx = n;
        self.ny = n;
        self.nz = n;
        self
    }

    pub fn front_z(&self) -> f64 {
        -self.front_offset
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.half_width, self.front_offset, self.back_z, self.meas_z]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("domain extents must be finite"));
        }
        if self.half_width <= 0.0 {
            return Err(Error::config("half width must be positive"));
        }
        if !(self.front_z() < self.back_z) {
            return Err(Error::config("front face -ξ must lie below the back face d"));
        }
        if !(self.meas_z < self.front_z()) {
            return Err(Error::config("measurement plane must lie in front of the face -ξ"));
        }
        if self.nx < 3 || self.ny < 3 || self.nz < 3 {
            return Err(Error::config("every axis needs at least 3 nodes"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.validate()?;
        let b = self.half_width;
        Ok(Grid {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            hx: 2.0 * b / (self.nx - 1) as f64,
            hy: 2.0 * b / (self.ny - 1) as f64,
            hz: (self.back_z - self.front_z()) / (self.nz - 1) as f64,
            x0: -b,
            y0: -b,
            z0: self.front_z(),
        })
    }

    /// Node lattice of the measurement rectangle and of `Γ`; it shares the
    /// `(x, y)` nodes of the volume grid.
    pub fn lattice(&self) -> Result<PlaneLattice> {
        Ok(self.grid()?.lattice())
    }
}

/// Vertex-centred uniform grid. Both faces `z = -ξ` and `z = d` are node
/// layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

impl Grid {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn layer_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, j: usize, s: usize, l: usize) -> usize {
        (l * self.ny + s) * self.nx + j
    }

    #[inline]
    pub fn unravel(&self, p: usize) -> (usize, usize, usize) {
        let j = p % self.nx;
        let s = (p / self.nx) % self.ny;
        let l = p / self.layer_len();
        (j, s, l)
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, s: usize) -> f64 {
        self.y0 + s as f64 * self.hy
    }

    #[inline]
    pub fn z(&self, l: usize) -> f64 {
        self.z0 + l as f64 * self.hz
    }

    pub fn point(&self, p: usize) -> [f64; 3] {
        let (j, s, l) = self.unravel(p);
        [self.x(j), self.y(s), self.z(l)]
    }

    pub fn z_max(&self) -> f64 {
        self.z(self.nz - 1)
    }

    #[inline]
    pub fn is_interior(&self, j: usize, s: usize, l: usize) -> bool {
        j > 0 && s > 0 && l > 0 && j + 1 < self.nx && s + 1 < self.ny && l + 1 < self.nz
    }

    /// Lateral faces `|x| = b` or `|y| = b`.
    #[inline]
    pub fn is_lateral(&self, j: usize, s: usize) -> bool {
        j == 0 || s == 0 || j + 1 == self.nx || s + 1 == self.ny
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy * self.hz
    }

    /// Trapezoidal quadrature weight of a node (half weight per boundary axis).
    pub fn quadrature_weight(&self, j: usize, s: usize, l: usize) -> f64 {
        let w = |i: usize, n: usize, h: f64| if i == 0 || i + 1 == n { 0.5 * h } else { h };
        w(j, self.nx, self.hx) * w(s, self.ny, self.hy) * w(l, self.nz, self.hz)
    }

    pub fn lattice(&self) -> PlaneLattice {
        PlaneLattice {
            nx: self.nx,
            ny: self.ny,
            hx: self.hx,
            hy: self.hy,
            x0: self.x0,
            y0: self.y0,
        }
    }
}

/// `(x, y)` node lattice of a plane perpendicular to `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneLattice {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl PlaneLattice {
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, s: usize) -> f64 {
        self.y0 + s as f64 * self.hy
    }
}

/// Uniform wavenumber samples `k_n = k_min + n·h_k`, `n = 0..nk`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavenumberGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub nk: usize,
}

impl Default for WavenumberGrid {
    fn default() -> Self {
        Self {
            k_min: 15.2,
            k_max: 16.2,
            nk: 11,
        }
    }
}

impl WavenumberGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0 && self.k_min < self.k_max && self.k_max.is_finite()) {
            return Err(Error::config("wavenumbers must satisfy 0 < k_min < k_max"));
        }
        if self.nk < 2 {
            return Err(Error::config("at least two wavenumbers are required"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.k_max - self.k_min) / (self.nk - 1) as f64
    }

    pub fn k(&self, n: usize) -> f64 {
        if n + 1 == self.nk {
            self.k_max
        } else {
            self.k_min + n as f64 * self.step()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.nk).map(|n| self.k(n)).collect()
    }
}

/// Complex scalar field on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    pub grid: Grid,
    pub data: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|p| f(grid.point(p))).collect();
        Self { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Shape(format!(
                "volume needs {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    #[inline]
    pub fn at(&self, j: usize, s: usize, l: usize) -> Complex64 {
        self.data[self.grid.idx(j, s, l)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * a).collect(),
        }
    }
}

/// Complex field on a [`Grid`] × [`WavenumberGrid`]; each wavenumber is a
/// contiguous slab.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiKVolume {
    pub grid: Grid,
    pub kgrid: WavenumberGrid,
    pub data: Vec<Complex64>,
}

impl MultiKVolume {
    pub fn zeros(grid: Grid, kgrid: WavenumberGrid) -> Self {
        Self {
            grid,
            kgrid,
            data: vec![Complex64::new(0.0, 0.0); grid.len() * kgrid.nk],
        }
    }

    /// Builds the field from `f(point, k)`.
    pub fn from_fn(grid: Grid, kgrid: WavenumberGrid, f: impl Fn([f64; 3], f64) -> Complex64) -> Self {
        let mut out = Self::zeros(grid, kgrid);
        for n in 0..kgrid.nk {
            let k = kgrid.k(n);
            for (p, v) in out.slab_mut(n).iter_mut().enumerate() {
                *v = f(grid.point(p), k);
            }
        }
        out
    }

    pub fn from_vec(grid: Grid, kgrid: WavenumberGrid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() * kgrid.nk {
            return Err(Error::Shape(format!(
                "multi-wavenumber volume needs {} values, got {}",
                grid.len() * kgrid.nk,
                data.len()
            )));
        }
        Ok(Self { grid, kgrid, data })
    }

    pub fn slab(&self, n: usize) -> &[Complex64] {
        let m = self.grid.len();
        &self.data[n * m..(n + 1) * m]
    }

    pub fn slab_mut(&mut self, n: usize) -> &mut [Complex64] {
        let m = self.grid.len();
        &mut self.data[n * m..(n + 1) * m]
    }

    pub fn volume(&self, n: usize) -> ComplexVolume {
        ComplexVolume {
            grid: self.grid,
            data: self.slab(n).to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Ball-shaped inclusion with a smooth raised-cosine profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub c_max: f64,
}

impl InclusionSpec {
    pub fn new(center: [f64; 3], radius: f64, c_max: f64) -> Self {
        Self { center, radius, c_max }
    }

    pub fn distance(&self, p: [f64; 3]) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// `c(p) = 1 + (c_max - 1)·cos²(π|p - x₀| / 2r)` inside the ball, exactly 1
    /// outside. C¹ across the sphere, maximum `c_max` at the centre.
    pub fn value_at(&self, p: [f64; 3]) -> f64 {
        let rho = self.distance(p);
        if rho >= self.radius {
            1.0
        } else {
            let c = (PI * rho / (2.0 * self.radius)).cos();
            1.0 + (self.c_max - 1.0) * c * c
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config("inclusion radius must be positive"));
        }
        if !(self.c_max >= 1.0 && self.c_max.is_finite()) {
            return Err(Error::config("inclusion c_max must be >= 1"));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::config("inclusion centre must be finite"));
        }
        Ok(())
    }
}

/// The inclusions of the numbered test cases (1, 2, 3, and the two-target
/// case 4 with the left target first).
pub fn table1_case(case: u32) -> Option<Vec<InclusionSpec>> {
    let origin = [0.0, 0.0, 0.0];
    match case {
        1 => Some(vec![InclusionSpec::new(origin, 0.3, 3.0)]),
        2 => Some(vec![InclusionSpec::new(origin, 0.5, 3.0)]),
        3 => Some(vec![InclusionSpec::new(origin, 0.3, 5.0)]),
        4 => Some(vec![
            InclusionSpec::new([-0.75, 0.0, 0.0], 0.3, 7.0),
            InclusionSpec::new([0.75, 0.0, 0.0], 0.5, 3.0),
        ]),
        _ => None,
    }
}

/// Real dielectric constant `c` on a grid. Phantoms built from inclusions keep
/// their analytic description so the forward solver can resample them.
#[derive(Clone, Debug, PartialEq)]
pub struct DielectricField {
    pub grid: Grid,
    pub values: Vec<f64>,
    inclusions: Option<Vec<InclusionSpec>>,
}

impl DielectricField {
    pub fn vacuum(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![1.0; grid.len()],
            inclusions: Some(Vec::new()),
        }
    }

    /// Field from sampled values only (e.g. a reconstruction).
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "dielectric field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            inclusions: None,
        })
    }

    pub fn inclusions(&self) -> Option<&[InclusionSpec]> {
        self.inclusions.as_deref()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.values.iter().map(|c| c - 1.0).collect()
    }

    /// Largest value and the flat index of its first occurrence.
    pub fn max(&self) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (p, &c) in self.values.iter().enumerate() {
            if c > best.0 {
                best = (c, p);
            }
        }
        best
    }

    pub fn to_complex(&self) -> ComplexVolume {
        ComplexVolume {
            grid: self.grid,
            data: self.values.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }
}

/// Samples the smoothed inclusions on the grid of `spec`.
///
/// Balls must lie in the closed box and must not overlap (touching is
/// allowed); the profile vanishes at each radius so `c = 1` on `∂Ω`.
pub fn build_dielectric(inclusions: &[InclusionSpec], spec: &DomainSpec) -> Result<DielectricField> {
    let grid = spec.grid()?;
    let tol = 1e-12;
    for inc in inclusions {
        inc.validate()?;
        let [cx, cy, cz] = inc.center;
        let r = inc.radius;
        let inside = cx.abs() + r <= spec.half_width + tol
            && cy.abs() + r <= spec.half_width + tol
            && cz - r >= spec.front_z() - tol
            && cz + r <= spec.back_z + tol;
        if !inside {
            return Err(Error::config(format!(
                "inclusion at {:?} with radius {r} is not contained in the domain",
                inc.center
            )));
        }
    }
    for (a, ia) in inclusions.iter().enumerate() {
        for ib in &inclusions[a + 1..] {
            if ia.distance(ib.center) < ia.radius + ib.radius - tol {
                return Err(Error::config(format!(
                    "inclusions at {:?} and {:?} overlap",
                    ia.center, ib.center
                )));
            }
        }
    }

    let mut values = vec![1.0; grid.len()];
    for (p, c) in values.iter_mut().enumerate() {
        let (j, s, l) = grid.unravel(p);
        if !grid.is_interior(j, s, l) {
            continue;
        }
        let x = grid.point(p);
        for inc in inclusions {
            let v = inc.value_at(x);
            if v > 1.0 {
                *c = v;
                break;
            }
        }
    }
    Ok(DielectricField {
        grid,
        values,
        inclusions: Some(inclusions.to_vec()),
    })
}

/// Squared discrete Sobolev-type norm with trapezoidal node weights.
///
/// Order 0 is the discrete L² norm; order 1 adds the three first
/// differences; order 2 adds the three pure second differences.
pub fn discrete_norm_sq(f: &ComplexVolume, order: u8) -> f64 {
    let g = f.grid;
    let mut terms: Vec<Vec<Complex64>> = vec![f.data.clone()];
    if order >= 1 {
        let [dx, dy, dz] = ops::gradient3(f);
        terms.extend([dx.data, dy.data, dz.data]);
    }
    if order >= 2 {
        terms.extend(ops::second_differences(f).map(|v| v.data));
    }
    let mut total = 0.0;
    for p in 0..g.len() {
        let (j, s, l) = g.unravel(p);
        let w = g.quadrature_weight(j, s, l);
        total += w * terms.iter().map(|t| t[p].norm_sqr()).sum::<f64>();
    }
    total
}

pub fn discrete_norm(f: &ComplexVolume, order: u8) -> f64 {
    discrete_norm_sq(f, order).sqrt()
}

/// Multi-wavenumber analogue: trapezoidal weights in `k` over the volume norms.
pub fn discrete_norm_sq_multik(f: &MultiKVolume, order: u8) -> f64 {
    let nk = f.kgrid.nk;
    let hk = f.kgrid.step();
    (0..nk)
        .map(|n| {
            let w = if n == 0 || n + 1 == nk { 0.5 * hk } else { hk };
            w * discrete_norm_sq(&f.volume(n), order)
        })
        .sum()
}
