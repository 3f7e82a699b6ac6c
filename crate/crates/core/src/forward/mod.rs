//! Lippmann-Schwinger forward solver.
//!
//! `u = e^{ikz} + k² ∫ Φ(x - y)(c(y) - 1) u(y) dy` is discretised by
//! trigonometric collocation on a periodic box around the support of `c - 1`
//! with the Green's function truncated at a radius larger than the support
//! diameter. The operator is applied with FFTs and the system, restricted to
//! the support nodes, is solved by restarted GMRES. Fields away from the box
//! are evaluated by direct quadrature.

mod fft3;
mod gmres;
mod kernel;
mod scatterer;

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fft3::IndexBox;
pub use kernel::{green, precompute_kernel, truncated_kernel_transform, KernelTable};
pub use scatterer::{ForwardParams, ScattererGrid};

use crate::error::{Error, Result};
use crate::grid::{ComplexVolume, DielectricField, Grid, PlaneLattice, WavenumberGrid};
use crate::pipeline::PlaneField;
use fft3::Fft3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardSolveReport {
    pub k: f64,
    /// Relative residual of the discrete system at the returned solution.
    pub residual: f64,
    pub iterations: usize,
    pub unknowns: usize,
    /// Not serialised so that stored reports are reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Forward solver for one dielectric field, reusable across wavenumbers up to
/// the `k_max` it was built for.
pub struct ForwardSolver {
    grid: Arc<ScattererGrid>,
    fft: Option<Fft3>,
    params: ForwardParams,
    k_max: f64,
}

impl ForwardSolver {
    pub fn new(c: &DielectricField, k_max: f64, params: &ForwardParams) -> Result<Self> {
        let grid = ScattererGrid::build(c, k_max, params)?;
        let fft = (!grid.is_empty()).then(|| Fft3::new(grid.n));
        Ok(Self {
            grid: Arc::new(grid),
            fft,
            params: *params,
            k_max,
        })
    }

    pub fn scatterer(&self) -> &ScattererGrid {
        &self.grid
    }

    /// `k²·K(m·x)` on the whole box, valid inside the support's bounding box.
    fn convolve(&self, kernel: &KernelTable, x: &[Complex64], buf: &mut [Complex64], wanted: IndexBox) {
        let fft = self.fft.as_ref().expect("non-empty support");
        scatterer::scatter_density(&self.grid, x, buf);
        fft.forward(buf, self.grid.active);
        let scale = kernel.k * kernel.k / fft.len() as f64;
        buf.par_iter_mut()
            .zip(kernel.coeffs().par_iter())
            .for_each(|(v, c)| *v *= c * scale);
        fft.inverse(buf, wanted);
    }

    pub fn solve(&self, k: f64) -> Result<TotalField> {
        if !(k > 0.0 && k <= self.k_max * (1.0 + 1e-12)) {
            return Err(Error::config(format!(
                "wavenumber {k} outside (0, {}] used to size the solver",
                self.k_max
            )));
        }
        let start = Instant::now();
        let sg = &self.grid;
        if sg.is_empty() {
            return Ok(TotalField {
                k,
                scatterer: Arc::clone(&self.grid),
                support_values: Vec::new(),
                report: ForwardSolveReport {
                    k,
                    residual: 0.0,
                    iterations: 0,
                    unknowns: 0,
                    wall_seconds: start.elapsed().as_secs_f64(),
                },
            });
        }
        let kernel = precompute_kernel(k, sg.radius, sg.n, sg.lengths())?;
        let incident: Vec<Complex64> = sg
            .support
            .iter()
            .map(|&p| Complex64::from_polar(1.0, k * sg.node(p)[2]))
            .collect();
        let buf = std::sync::Mutex::new(vec![Complex64::new(0.0, 0.0); sg.len()]);
        let apply = |x: &[Complex64], y: &mut [Complex64]| {
            let mut buf = buf.lock().expect("buffer lock");
            self.convolve(&kernel, x, &mut buf, sg.active);
            for ((yi, xi), &p) in y.iter_mut().zip(x).zip(&sg.support) {
                *yi = xi - buf[p];
            }
        };
        let out = gmres::gmres(
            apply,
            &incident,
            self.params.tol,
            self.params.restart,
            self.params.max_iterations,
        );
        let report = ForwardSolveReport {
            k,
            residual: out.residual,
            iterations: out.iterations,
            unknowns: sg.support.len(),
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        if !out.converged {
            return Err(Error::ForwardSolver { k, report });
        }
        Ok(TotalField {
            k,
            scatterer: Arc::clone(&self.grid),
            support_values: out.x,
            report,
        })
    }

    /// Relative residual `‖u - u_inc - k²K(mu)‖ / ‖u_inc‖` of `u` on the support.
    pub fn residual(&self, u: &TotalField) -> Result<f64> {
        let sg = &self.grid;
        if sg.is_empty() {
            return Ok(0.0);
        }
        let kernel = precompute_kernel(u.k, sg.radius, sg.n, sg.lengths())?;
        let mut buf = vec![Complex64::new(0.0, 0.0); sg.len()];
        self.convolve(&kernel, &u.support_values, &mut buf, sg.active);
        let mut num = 0.0;
        let mut den = 0.0;
        for (&p, &x) in sg.support.iter().zip(&u.support_values) {
            let inc = Complex64::from_polar(1.0, u.k * sg.node(p)[2]);
            num += (x - inc - buf[p]).norm_sqr();
            den += inc.norm_sqr();
        }
        Ok((num / den).sqrt())
    }
}

/// Total field at one wavenumber, represented by its values on the support.
#[derive(Clone, Debug)]
pub struct TotalField {
    pub k: f64,
    scatterer: Arc<ScattererGrid>,
    pub support_values: Vec<Complex64>,
    pub report: ForwardSolveReport,
}

impl TotalField {
    pub fn scatterer(&self) -> &ScattererGrid {
        &self.scatterer
    }

    /// `(c - 1)·u·h³` at the support nodes.
    fn sources(&self) -> Vec<([f64; 3], Complex64)> {
        let sg = &self.scatterer;
        let cv = sg.cell_volume();
        sg.support
            .iter()
            .zip(&sg.contrast)
            .zip(&self.support_values)
            .map(|((&p, &m), &u)| (sg.node(p), u * (m * cv)))
            .collect()
    }

    /// Scattered field by direct quadrature at points off the support.
    pub fn scattered_at(&self, points: &[[f64; 3]]) -> Vec<Complex64> {
        let sources = self.sources();
        let k = self.k;
        points
            .par_iter()
            .map(|x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (y, d) in &sources {
                    let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                    acc += green(k, r) * d;
                }
                acc * (k * k)
            })
            .collect()
    }

    /// Total field at the nodes of a volume grid aligned with the box
    /// lattice. Nodes whose distance to every support point is below the
    /// truncation radius take the collocation value; the rest use direct
    /// quadrature.
    pub fn sample_on_grid(&self, solver: &ForwardSolver, grid: &Grid) -> Result<ComplexVolume> {
        let k = self.k;
        let mut out = ComplexVolume::from_fn(*grid, |x| Complex64::from_polar(1.0, k * x[2]));
        let sg = &self.scatterer;
        if sg.is_empty() {
            return Ok(out);
        }
        if !Arc::ptr_eq(sg, &solver.grid) {
            return Err(Error::config("total field was produced by a different solver"));
        }
        let kernel = precompute_kernel(k, sg.radius, sg.n, sg.lengths())?;
        let mut buf = vec![Complex64::new(0.0, 0.0); sg.len()];
        solver.convolve(&kernel, &self.support_values, &mut buf, sg.active);
        let support_points: Vec<[f64; 3]> = sg.support.iter().map(|&p| sg.node(p)).collect();

        let mut far = Vec::new();
        let mut far_points = Vec::new();
        for p in 0..grid.len() {
            let (j, s, l) = grid.unravel(p);
            let inside = sg.box_index_of(j, s, l).filter(|&b| {
                let idx = [b % sg.n[0], (b / sg.n[0]) % sg.n[1], b / (sg.n[0] * sg.n[1])];
                (0..3).all(|a| idx[a] >= sg.active.lo[a] && idx[a] < sg.active.hi[a])
            });
            let x = grid.point(p);
            match inside {
                Some(b)
                    if support_points.iter().all(|y| {
                        (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)
                            < sg.radius * sg.radius
                    }) =>
                {
                    out.data[p] += buf[b];
                }
                _ => {
                    far.push(p);
                    far_points.push(x);
                }
            }
        }
        for (p, v) in far.into_iter().zip(self.scattered_at(&far_points)) {
            out.data[p] += v;
        }
        Ok(out)
    }
}

pub fn solve_total_field(c: &DielectricField, k: f64, params: &ForwardParams) -> Result<TotalField> {
    ForwardSolver::new(c, k, params)?.solve(k)
}

/// `f = e^{ik z_p} + k² Σ Φ(x - y)(c - 1)u h³` on a plane that misses the support.
pub fn evaluate_on_plane(u: &TotalField, plane_z: f64, lattice: &PlaneLattice) -> Result<PlaneField> {
    if let Some((lo, hi)) = u.scatterer.z_range() {
        if plane_z >= lo && plane_z <= hi {
            return Err(Error::config(format!(
                "plane z = {plane_z} intersects the scatterer support [{lo}, {hi}]"
            )));
        }
    }
    let k = u.k;
    let inc = Complex64::from_polar(1.0, k * plane_z);
    let points: Vec<[f64; 3]> = (0..lattice.ny)
        .flat_map(|s| (0..lattice.nx).map(move |j| [lattice.x(j), lattice.y(s), plane_z]))
        .collect();
    let values = if u.scatterer.is_empty() {
        vec![inc; points.len()]
    } else {
        u.scattered_at(&points).into_iter().map(|v| v + inc).collect()
    };
    Ok(PlaneField {
        lattice: *lattice,
        z: plane_z,
        k,
        values,
    })
}

/// Measured data on `plane_z` for every wavenumber of `kgrid`.
pub fn simulate(
    c: &DielectricField,
    kgrid: &WavenumberGrid,
    lattice: &PlaneLattice,
    plane_z: f64,
    params: &ForwardParams,
) -> Result<(Vec<PlaneField>, Vec<ForwardSolveReport>)> {
    kgrid.validate()?;
    let solver = ForwardSolver::new(c, kgrid.k_max, params)?;
    let mut fields = Vec::with_capacity(kgrid.nk);
    let mut reports = Vec::with_capacity(kgrid.nk);
    for k in kgrid.values() {
        let u = solver.solve(k)?;
        fields.push(evaluate_on_plane(&u, plane_z, lattice)?);
        reports.push(u.report.clone());
    }
    Ok((fields, reports))
}
