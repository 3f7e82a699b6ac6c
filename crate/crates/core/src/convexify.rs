//! Weighted least-squares functional for the integro-differential equation
//! satisfied by `q = ∂_k v`, its analytic gradient, and its minimisation.
//!
//! With `G_n = ∇q(·, k_n)`, the tail integrals `S_n = ∫_{k_n}^{k̄} ∇q dκ`
//! (trapezoidal) and `A_n = ∇V - S_n` (the gradient of `v(·, k_n)`), the
//! residual at an interior node is
//!
//! `L_n = Δq_n + 2k_n A_n·(k_n G_n + A_n) + 2i(k_n G_n^z + A_n^z)`
//!
//! with the bilinear (unconjugated) dot product. The functional is
//! `J = Σ_n Σ_interior w(z) h³ h_k |L_n|² + ρ Σ_n Σ_free h³ h_k |q|²`.
//!
//! The gradient uses `∂L_n/∂G_n = 2k_n² A_n + 2ik_n e_z` and
//! `∂L_n/∂A_n = 2k_n² G_n + 4k_n A_n + 2i e_z`; the dependence of `A_n` on
//! every `G_m` with `m ≥ n` is pulled back by the adjoint of the tail
//! quadrature.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cg::{self, CgParams, MinimizeTrace, Objective};
use crate::error::{Error, Result};
use crate::grid::{ComplexVolume, Grid, MultiKVolume, WavenumberGrid};
use crate::ops::{gradient_at, laplacian_at, weight_table, TailQuadrature};
use crate::parallel::real_dot;
use crate::tail::{boundary_layers, fixed_mask};

type C = Complex64;
type V3 = [C; 3];
const ZERO: C = C::new(0.0, 0.0);
const ZERO3: V3 = [ZERO; 3];
const I: C = C::new(0.0, 1.0);

#[inline]
fn dot(a: &V3, b: &V3) -> C {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Clone, Debug)]
pub struct ConvexifyProblem {
    pub grid: Grid,
    pub kgrid: WavenumberGrid,
    /// Tail function `V ≈ v(·, k̄)`.
    pub tail: ComplexVolume,
    /// `q` on `Γ`, one plane per wavenumber.
    pub phi0: Vec<Vec<C>>,
    /// `∂_z q` on `Γ`, one plane per wavenumber.
    pub phi1: Vec<Vec<C>>,
    pub lambda: f64,
    pub rho: f64,
}

impl ConvexifyProblem {
    pub fn validate(&self) -> Result<()> {
        self.kgrid.validate()?;
        let m = self.grid.layer_len();
        if self.tail.grid != self.grid {
            return Err(Error::Shape("tail function lives on a different grid".into()));
        }
        let nk = self.kgrid.nk;
        if self.phi0.len() != nk || self.phi1.len() != nk {
            return Err(Error::Shape(format!("boundary data must have {nk} planes")));
        }
        if self.phi0.iter().chain(&self.phi1).any(|p| p.len() != m) {
            return Err(Error::Shape(format!("boundary planes must have {m} values")));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::config("Carleman exponent must be positive"));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::config("regularisation weight must be non-negative"));
        }
        if !self.tail.is_finite() {
            return Err(Error::Numeric("tail function has non-finite values".into()));
        }
        Ok(())
    }

    /// Problem whose boundary data and tail are all zero.
    pub fn homogeneous(grid: Grid, kgrid: WavenumberGrid, lambda: f64, rho: f64) -> Self {
        let m = grid.layer_len();
        Self {
            grid,
            kgrid,
            tail: ComplexVolume::zeros(grid),
            phi0: vec![vec![ZERO; m]; kgrid.nk],
            phi1: vec![vec![ZERO; m]; kgrid.nk],
            lambda,
            rho,
        }
    }
}

/// `q` with the boundary layers set from data and the mask of fixed nodes
/// (identical for every wavenumber).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedMultiK {
    pub fixed: Vec<bool>,
    pub field: MultiKVolume,
}

pub fn assemble_q_constraints(problem: &ConvexifyProblem) -> Result<ConstrainedMultiK> {
    problem.validate()?;
    let g = problem.grid;
    let mut field = MultiKVolume::zeros(g, problem.kgrid);
    let mut fixed = vec![false; g.len()];
    for n in 0..problem.kgrid.nk {
        boundary_layers(&g, &problem.phi0[n], &problem.phi1[n], &mut fixed, field.slab_mut(n));
    }
    Ok(ConstrainedMultiK { fixed, field })
}

/// Per-node workspace sized by the number of wavenumbers.
struct NodeScratch {
    g: Vec<V3>,
    lap: Vec<C>,
    s: Vec<V3>,
    /// Adjoint sources per component, then their tail-adjoint images.
    x: [Vec<C>; 3],
    y: [Vec<C>; 3],
}

impl NodeScratch {
    fn new(nk: usize) -> Self {
        Self {
            g: vec![ZERO3; nk],
            lap: vec![ZERO; nk],
            s: vec![ZERO3; nk],
            x: [vec![ZERO; nk], vec![ZERO; nk], vec![ZERO; nk]],
            y: [vec![ZERO; nk], vec![ZERO; nk], vec![ZERO; nk]],
        }
    }
}

struct Kernel<'a> {
    grid: Grid,
    ks: Vec<f64>,
    hk: f64,
    quad: TailQuadrature,
    grad_v: &'a [V3],
}

impl Kernel<'_> {
    /// Loads `∇q_n`, `Δq_n` and the tail integrals `S_n` at node `p`.
    fn load(&self, q: &[C], p: usize, w: &mut NodeScratch) {
        let nk = self.ks.len();
        let len = self.grid.len();
        for n in 0..nk {
            let slab = &q[n * len..(n + 1) * len];
            w.g[n] = gradient_at(slab, &self.grid, p);
            w.lap[n] = laplacian_at(slab, &self.grid, p);
        }
        let h = 0.5 * self.hk;
        w.s[nk - 1] = ZERO3;
        for n in (0..nk - 1).rev() {
            for a in 0..3 {
                w.s[n][a] = w.s[n + 1][a] + (w.g[n][a] + w.g[n + 1][a]) * h;
            }
        }
    }

    #[inline]
    fn residual(&self, n: usize, p: usize, w: &NodeScratch) -> (C, V3, V3) {
        let k = self.ks[n];
        let gv = self.grad_v[p];
        let a = [gv[0] - w.s[n][0], gv[1] - w.s[n][1], gv[2] - w.s[n][2]];
        let g = w.g[n];
        let kg_a = [g[0] * k + a[0], g[1] * k + a[1], g[2] * k + a[2]];
        let l = w.lap[n] + dot(&a, &kg_a) * (2.0 * k) + I * (g[2] * k + a[2]) * 2.0;
        (l, a, g)
    }
}

fn gradient_of_tail(v: &ComplexVolume) -> Vec<V3> {
    let g = v.grid;
    (0..g.len())
        .into_par_iter()
        .map(|p| {
            let (j, s, l) = g.unravel(p);
            if g.is_interior(j, s, l) {
                gradient_at(&v.data, &g, p)
            } else {
                ZERO3
            }
        })
        .collect()
}

/// `L(q)` at interior nodes for every wavenumber (zero on the boundary).
pub fn apply_l(q: &MultiKVolume, v: &ComplexVolume) -> Result<MultiKVolume> {
    if q.grid != v.grid {
        return Err(Error::Shape("q and V must share a grid".into()));
    }
    let g = q.grid;
    let grad_v = gradient_of_tail(v);
    let kernel = Kernel {
        grid: g,
        ks: q.kgrid.values(),
        hk: q.kgrid.step(),
        quad: TailQuadrature::new(&q.kgrid),
        grad_v: &grad_v,
    };
    let nk = q.kgrid.nk;
    let len = g.len();
    let mut out = MultiKVolume::zeros(g, q.kgrid);
    let per_node: Vec<(usize, Vec<C>)> = (0..len)
        .into_par_iter()
        .filter(|&p| {
            let (j, s, l) = g.unravel(p);
            g.is_interior(j, s, l)
        })
        .map_init(
            || NodeScratch::new(nk),
            |w, p| {
                kernel.load(&q.data, p, w);
                (p, (0..nk).map(|n| kernel.residual(n, p, w).0).collect())
            },
        )
        .collect();
    for (p, ls) in per_node {
        for (n, l) in ls.into_iter().enumerate() {
            out.data[n * len + p] = l;
        }
    }
    Ok(out)
}

/// The functional as an [`Objective`] over the flat multi-wavenumber layout.
pub struct ConvexifyFunctional {
    grid: Grid,
    kgrid: WavenumberGrid,
    grad_v: Vec<V3>,
    /// `w(z_l) h³ h_k` per layer.
    layer_weight: Vec<f64>,
    rho_weight: f64,
    fixed: Vec<bool>,
}

impl ConvexifyFunctional {
    pub fn new(problem: &ConvexifyProblem) -> Result<Self> {
        problem.validate()?;
        let g = problem.grid;
        let cw = weight_table(problem.lambda, &g)?;
        let scale = g.cell_volume() * problem.kgrid.step();
        Ok(Self {
            grid: g,
            kgrid: problem.kgrid,
            grad_v: gradient_of_tail(&problem.tail),
            layer_weight: cw.weights.iter().map(|w| w * scale).collect(),
            rho_weight: problem.rho * scale,
            fixed: fixed_mask(&g),
        })
    }

    fn kernel(&self) -> Kernel<'_> {
        Kernel {
            grid: self.grid,
            ks: self.kgrid.values(),
            hk: self.kgrid.step(),
            quad: TailQuadrature::new(&self.kgrid),
            grad_v: &self.grad_v,
        }
    }

    /// Value, and when `adjoint` is given, the per-layer adjoint sources
    /// `r_n = c·L_n` and `E_n` stored layer-major: `((l·nk + n)·ny + s)·nx + j`.
    fn forward_pass(&self, q: &[C], adjoint: Option<(&mut [C], &mut [V3])>) -> f64 {
        let g = self.grid;
        let nk = self.kgrid.nk;
        let m = g.layer_len();
        let kernel = self.kernel();
        let quad = &kernel.quad;

        let layer_value = |l: usize, mut out: Option<(&mut [C], &mut [V3])>| -> f64 {
            if l == 0 || l + 1 == g.nz {
                return 0.0;
            }
            let c = self.layer_weight[l];
            let mut w = NodeScratch::new(nk);
            let mut sum = 0.0;
            for s in 1..g.ny - 1 {
                for j in 1..g.nx - 1 {
                    let p = g.idx(j, s, l);
                    let local = s * g.nx + j;
                    kernel.load(q, p, &mut w);
                    for n in 0..nk {
                        let (lv, a, gq) = kernel.residual(n, p, &w);
                        sum += c * lv.norm_sqr();
                        if let Some((r_out, e_out)) = out.as_mut() {
                            let k = kernel.ks[n];
                            let r = lv * c;
                            let dl_dg = [a[0] * (2.0 * k * k), a[1] * (2.0 * k * k), a[2] * (2.0 * k * k) + I * (2.0 * k)];
                            let dl_da = [
                                gq[0] * (2.0 * k * k) + a[0] * (4.0 * k),
                                gq[1] * (2.0 * k * k) + a[1] * (4.0 * k),
                                gq[2] * (2.0 * k * k) + a[2] * (4.0 * k) + I * 2.0,
                            ];
                            r_out[n * m + local] = r;
                            for d in 0..3 {
                                e_out[n * m + local][d] = dl_dg[d].conj() * r;
                                w.x[d][n] = dl_da[d].conj() * r;
                            }
                        }
                    }
                    if let Some((_, e_out)) = out.as_mut() {
                        for d in 0..3 {
                            quad.adjoint(&w.x[d], &mut w.y[d]);
                        }
                        for n in 0..nk {
                            for d in 0..3 {
                                e_out[n * m + local][d] -= w.y[d][n];
                            }
                        }
                    }
                }
            }
            sum
        };

        let partial: Vec<f64> = match adjoint {
            Some((r, e)) => r
                .par_chunks_mut(nk * m)
                .zip(e.par_chunks_mut(nk * m))
                .enumerate()
                .map(|(l, (r, e))| layer_value(l, Some((r, e))))
                .collect(),
            None => (0..g.nz).into_par_iter().map(|l| layer_value(l, None)).collect(),
        };
        let mut value: f64 = partial.iter().sum();
        if self.rho_weight > 0.0 {
            let len = g.len();
            let reg: Vec<f64> = (0..nk)
                .into_par_iter()
                .map(|n| {
                    (0..len)
                        .filter(|&p| !self.fixed[p])
                        .map(|p| q[n * len + p].norm_sqr())
                        .sum::<f64>()
                })
                .collect();
            value += self.rho_weight * reg.iter().sum::<f64>();
        }
        value
    }
}

impl Objective for ConvexifyFunctional {
    fn value(&self, q: &[C]) -> f64 {
        self.forward_pass(q, None)
    }

    fn value_and_gradient(&self, q: &[C], grad: &mut [C]) -> f64 {
        let g = self.grid;
        let nk = self.kgrid.nk;
        let m = g.layer_len();
        let len = g.len();
        let mut r = vec![ZERO; len * nk];
        let mut e = vec![ZERO3; len * nk];
        let value = self.forward_pass(q, Some((&mut r, &mut e)));

        let inv2 = [1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy), 1.0 / (g.hz * g.hz)];
        let centre = -2.0 * (inv2[0] + inv2[1] + inv2[2]);
        let half = [0.5 / g.hx, 0.5 / g.hy, 0.5 / g.hz];
        // adjoint arrays are layer-major; address of (n, node (j,s,l))
        let at = |n: usize, j: usize, s: usize, l: usize| (l * nk + n) * m + s * g.nx + j;
        grad.par_chunks_mut(m).enumerate().for_each(|(chunk, out)| {
            let n = chunk / g.nz;
            let l = chunk % g.nz;
            for s in 0..g.ny {
                for j in 0..g.nx {
                    let p = g.idx(j, s, l);
                    out[s * g.nx + j] = if self.fixed[p] {
                        ZERO
                    } else {
                        let lap = (r[at(n, j + 1, s, l)] + r[at(n, j - 1, s, l)]) * inv2[0]
                            + (r[at(n, j, s + 1, l)] + r[at(n, j, s - 1, l)]) * inv2[1]
                            + (r[at(n, j, s, l + 1)] + r[at(n, j, s, l - 1)]) * inv2[2]
                            + r[at(n, j, s, l)] * centre;
                        let div = (e[at(n, j - 1, s, l)][0] - e[at(n, j + 1, s, l)][0]) * half[0]
                            + (e[at(n, j, s - 1, l)][1] - e[at(n, j, s + 1, l)][1]) * half[1]
                            + (e[at(n, j, s, l - 1)][2] - e[at(n, j, s, l + 1)][2]) * half[2];
                        let reg = q[n * len + p] * self.rho_weight;
                        (lap + div + reg) * 2.0
                    };
                }
            }
        });
        value
    }
}

pub fn j_functional(problem: &ConvexifyProblem, q: &MultiKVolume) -> Result<f64> {
    check_q(problem, q)?;
    Ok(ConvexifyFunctional::new(problem)?.value(&q.data))
}

/// Gradient `∂J/∂Re q + i ∂J/∂Im q` at free nodes, zero at fixed nodes.
pub fn j_gradient(problem: &ConvexifyProblem, q: &MultiKVolume) -> Result<MultiKVolume> {
    check_q(problem, q)?;
    let f = ConvexifyFunctional::new(problem)?;
    let mut grad = MultiKVolume::zeros(problem.grid, problem.kgrid);
    f.value_and_gradient(&q.data, &mut grad.data);
    Ok(grad)
}

fn check_q(problem: &ConvexifyProblem, q: &MultiKVolume) -> Result<()> {
    if q.grid != problem.grid || q.kgrid != problem.kgrid {
        return Err(Error::Shape("q does not match the problem grids".into()));
    }
    Ok(())
}

/// Conjugate-gradient minimisation from zero on the free nodes.
pub fn minimize_j(problem: &ConvexifyProblem, params: &CgParams) -> Result<(MultiKVolume, MinimizeTrace)> {
    let start = assemble_q_constraints(problem)?;
    let functional = ConvexifyFunctional::new(problem)?;
    let (q, trace) = cg::minimize(&functional, start.field.data, params);
    let q = MultiKVolume::from_vec(problem.grid, problem.kgrid, q)?;
    if !q.is_finite() {
        return Err(Error::Numeric("minimisation produced non-finite values".into()));
    }
    Ok((q, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BregmanProbe {
    pub j1: f64,
    pub j2: f64,
    /// `J(q₂) - J(q₁) - J′(q₁)(q₂ - q₁)`.
    pub gap: f64,
    /// Discrete L² distance of the free parts.
    pub distance: f64,
}

/// Bregman gap of `J` between two iterates obeying the same constraints.
pub fn bregman_probe(problem: &ConvexifyProblem, q1: &MultiKVolume, q2: &MultiKVolume) -> Result<BregmanProbe> {
    check_q(problem, q1)?;
    check_q(problem, q2)?;
    let f = ConvexifyFunctional::new(problem)?;
    let len = problem.grid.len();
    for (i, (a, b)) in q1.data.iter().zip(&q2.data).enumerate() {
        if f.fixed[i % len] && a != b {
            return Err(Error::config("probe iterates differ on constrained nodes"));
        }
    }
    let mut grad = vec![ZERO; q1.data.len()];
    let j1 = f.value_and_gradient(&q1.data, &mut grad);
    let j2 = f.value(&q2.data);
    let diff: Vec<C> = q2.data.iter().zip(&q1.data).map(|(b, a)| b - a).collect();
    let scale = problem.grid.cell_volume() * problem.kgrid.step();
    Ok(BregmanProbe {
        j1,
        j2,
        gap: j2 - j1 - real_dot(&grad, &diff),
        distance: (scale * real_dot(&diff, &diff)).sqrt(),
    })
}
