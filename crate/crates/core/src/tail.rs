//! Tail function: the value of `v` at the top wavenumber, approximated by
//! minimising a Carleman-weighted quasi-reversibility functional for the
//! Laplace equation with over-determined data on the front face.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cg::{self, CgParams, MinimizeTrace, Objective};
use crate::error::{Error, Result};
use crate::grid::{ComplexVolume, Grid};
use crate::ops::{laplacian_at, weight_table};
use crate::parallel::sum_f64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct TailProblem {
    pub grid: Grid,
    /// `V` on the front face, one value per `(x, y)` node.
    pub psi0: Vec<Complex64>,
    /// `∂z V` on the front face.
    pub psi1: Vec<Complex64>,
    pub mu: f64,
    pub alpha: f64,
}

/// Full-grid field with a mask of nodes held fixed by boundary data.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedField {
    pub fixed: Vec<bool>,
    pub field: ComplexVolume,
}

impl ConstrainedField {
    pub fn free_count(&self) -> usize {
        self.fixed.iter().filter(|f| !**f).count()
    }
}

/// Fixes the first two z-layers from Dirichlet/Neumann data
/// (`layer0 = d0`, `layer1 = d0 + h_z·d1`) and zeroes the lateral and back
/// faces, which take precedence on shared edges.
pub(crate) fn boundary_layers(
    grid: &Grid,
    d0: &[Complex64],
    d1: &[Complex64],
    fixed: &mut [bool],
    values: &mut [Complex64],
) {
    let m = grid.layer_len();
    for p in 0..grid.len() {
        let (j, s, l) = grid.unravel(p);
        let q = p % m;
        if grid.is_lateral(j, s) || l + 1 == grid.nz {
            fixed[p] = true;
            values[p] = ZERO;
        } else if l == 0 {
            fixed[p] = true;
            values[p] = d0[q];
        } else if l == 1 {
            fixed[p] = true;
            values[p] = d0[q] + d1[q] * grid.hz;
        } else {
            fixed[p] = false;
            values[p] = ZERO;
        }
    }
}

pub(crate) fn fixed_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.len())
        .map(|p| {
            let (j, s, l) = grid.unravel(p);
            grid.is_lateral(j, s) || l <= 1 || l + 1 == grid.nz
        })
        .collect()
}

impl TailProblem {
    pub fn validate(&self) -> Result<()> {
        let m = self.grid.layer_len();
        if self.psi0.len() != m || self.psi1.len() != m {
            return Err(Error::Shape(format!(
                "tail data must have {m} values per face, got {} and {}",
                self.psi0.len(),
                self.psi1.len()
            )));
        }
        if !(self.mu > 0.0) {
            return Err(Error::config("tail weight exponent must be positive"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::config("tail regularisation must be non-negative"));
        }
        Ok(())
    }
}

pub fn assemble_tail_unknowns(problem: &TailProblem) -> Result<ConstrainedField> {
    problem.validate()?;
    let g = problem.grid;
    let mut fixed = vec![false; g.len()];
    let mut field = ComplexVolume::zeros(g);
    boundary_layers(&g, &problem.psi0, &problem.psi1, &mut fixed, &mut field.data);
    Ok(ConstrainedField { fixed, field })
}

/// `Σ_interior w(z)·|ΔV|²·h³ + α Σ_nodes ω|V|²` with trapezoidal node weights `ω`.
pub struct TailFunctional {
    grid: Grid,
    layer_weight: Vec<f64>,
    node_weight: Vec<f64>,
    alpha: f64,
    fixed: Vec<bool>,
}

impl TailFunctional {
    pub fn new(problem: &TailProblem) -> Result<Self> {
        problem.validate()?;
        let g = problem.grid;
        let cw = weight_table(problem.mu, &g)?;
        let cv = g.cell_volume();
        Ok(Self {
            grid: g,
            layer_weight: cw.weights.iter().map(|w| w * cv).collect(),
            node_weight: (0..g.len())
                .map(|p| {
                    let (j, s, l) = g.unravel(p);
                    g.quadrature_weight(j, s, l)
                })
                .collect(),
            alpha: problem.alpha,
            fixed: fixed_mask(&g),
        })
    }

    /// Weighted residual `w(z)·h³·ΔV` at interior nodes, zero elsewhere.
    fn weighted_residual(&self, v: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid;
        let m = g.layer_len();
        let mut r = vec![ZERO; g.len()];
        r.par_chunks_mut(m).enumerate().for_each(|(l, layer)| {
            if l == 0 || l + 1 == g.nz {
                return;
            }
            let w = self.layer_weight[l];
            for s in 1..g.ny - 1 {
                for j in 1..g.nx - 1 {
                    let p = g.idx(j, s, l);
                    layer[s * g.nx + j] = laplacian_at(v, &g, p) * w;
                }
            }
        });
        r
    }

    fn value_from_residual(&self, v: &[Complex64], r: &[Complex64]) -> f64 {
        let g = self.grid;
        let m = g.layer_len();
        let fidelity = sum_f64(g.len(), |p| {
            let w = self.layer_weight[p / m];
            if w == 0.0 {
                0.0
            } else {
                r[p].norm_sqr() / w
            }
        });
        let reg = if self.alpha > 0.0 {
            self.alpha * sum_f64(g.len(), |p| self.node_weight[p] * v[p].norm_sqr())
        } else {
            0.0
        };
        fidelity + reg
    }
}

impl Objective for TailFunctional {
    fn value(&self, v: &[Complex64]) -> f64 {
        let r = self.weighted_residual(v);
        self.value_from_residual(v, &r)
    }

    fn value_and_gradient(&self, v: &[Complex64], grad: &mut [Complex64]) -> f64 {
        let g = self.grid;
        let r = self.weighted_residual(v);
        let value = self.value_from_residual(v, &r);
        let m = g.layer_len();
        grad.par_chunks_mut(m).enumerate().for_each(|(l, layer)| {
            for s in 0..g.ny {
                for j in 0..g.nx {
                    let p = g.idx(j, s, l);
                    layer[s * g.nx + j] = if self.fixed[p] {
                        ZERO
                    } else {
                        // free nodes are interior, and the stencil is symmetric
                        2.0 * (laplacian_at(&r, &g, p) + v[p] * (self.alpha * self.node_weight[p]))
                    };
                }
            }
        });
        value
    }
}

pub fn tail_functional(problem: &TailProblem, v: &ComplexVolume) -> Result<f64> {
    Ok(TailFunctional::new(problem)?.value(&v.data))
}

pub fn tail_gradient(problem: &TailProblem, v: &ComplexVolume) -> Result<ComplexVolume> {
    let f = TailFunctional::new(problem)?;
    let mut grad = ComplexVolume::zeros(problem.grid);
    f.value_and_gradient(&v.data, &mut grad.data);
    Ok(grad)
}

/// CG from zero on the free nodes with the boundary layers held at the data.
pub fn minimize_tail(problem: &TailProblem, params: &CgParams) -> Result<(ComplexVolume, MinimizeTrace)> {
    let start = assemble_tail_unknowns(problem)?;
    let functional = TailFunctional::new(problem)?;
    let (v, trace) = cg::minimize(&functional, start.field.data, params);
    if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numeric("tail minimisation produced non-finite values".into()));
    }
    Ok((ComplexVolume { grid: problem.grid, data: v }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    fn grid(n: usize) -> Grid {
        DomainSpec::default().with_resolution(n).grid().unwrap()
    }

    #[test]
    fn zero_data_layout() {
        let g = grid(7);
        let m = g.layer_len();
        let p = TailProblem {
            grid: g,
            psi0: vec![ZERO; m],
            psi1: vec![ZERO; m],
            mu: 8.0,
            alpha: 1e-5,
        };
        let layout = assemble_tail_unknowns(&p).unwrap();
        assert!(layout.field.data.iter().all(|v| *v == ZERO));
        assert_eq!(layout.free_count(), 5 * 5 * 4);
    }

    #[test]
    fn unit_dirichlet_layout() {
        let g = grid(7);
        let m = g.layer_len();
        let one = Complex64::new(1.0, 0.0);
        let p = TailProblem {
            grid: g,
            psi0: vec![one; m],
            psi1: vec![ZERO; m],
            mu: 8.0,
            alpha: 0.0,
        };
        let layout = assemble_tail_unknowns(&p).unwrap();
        for l in 0..2 {
            for s in 0..g.ny {
                for j in 0..g.nx {
                    let expect = if g.is_lateral(j, s) { ZERO } else { one };
                    assert_eq!(layout.field.at(j, s, l), expect);
                }
            }
        }
    }

    #[test]
    fn zero_is_stationary_for_zero_data() {
        let g = grid(7);
        let m = g.layer_len();
        let p = TailProblem {
            grid: g,
            psi0: vec![ZERO; m],
            psi1: vec![ZERO; m],
            mu: 8.0,
            alpha: 1e-3,
        };
        let v = ComplexVolume::zeros(g);
        assert_eq!(tail_functional(&p, &v).unwrap(), 0.0);
        assert!(tail_gradient(&p, &v).unwrap().data.iter().all(|z| *z == ZERO));
        let (vmin, trace) = minimize_tail(&p, &CgParams::default()).unwrap();
        assert!(vmin.data.iter().all(|z| *z == ZERO));
        assert_eq!(trace.values, vec![0.0]);
    }
}
