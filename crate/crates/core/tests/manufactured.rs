//! Manufactured solution of the integro-differential equation: with a
//! discrete-harmonic `P` vanishing on the lateral and back faces,
//! `v = P/k` solves the equation for `β = -∇P·∇P - 2iP_z`, so `q = -P/k²`
//! and `V = P/k̄` drive the residual to quadrature error.

use backscatter::cg::CgParams;
use backscatter::convexify::{apply_l, j_functional, minimize_j, ConvexifyProblem};
use backscatter::grid::{ComplexVolume, DomainSpec, Grid, MultiKVolume, WavenumberGrid};
use backscatter::reconstruct::{assemble_v, recover_beta, VzSign};
use num_complex::Complex64;

type C = Complex64;

struct Manufactured {
    grid: Grid,
    kgrid: WavenumberGrid,
    amp: f64,
    a: f64,
    gamma: f64,
    b: f64,
    d: f64,
}

impl Manufactured {
    fn new(n: usize, nk: usize) -> Self {
        let spec = DomainSpec::default().with_resolution(n);
        let grid = spec.grid().unwrap();
        let b = spec.half_width;
        let a = std::f64::consts::PI / (2.0 * b);
        // 7-point Laplacian of P vanishes exactly
        let lat = 2.0 * (1.0 - (a * grid.hx).cos()) / (grid.hx * grid.hx)
            + 2.0 * (1.0 - (a * grid.hy).cos()) / (grid.hy * grid.hy);
        let gamma = (1.0 + 0.5 * lat * grid.hz * grid.hz).acosh() / grid.hz;
        Self {
            grid,
            kgrid: WavenumberGrid {
                k_min: 15.2,
                k_max: 16.2,
                nk,
            },
            amp: 0.01,
            a,
            gamma,
            b,
            d: spec.back_z,
        }
    }

    fn p(&self, x: [f64; 3]) -> f64 {
        self.amp * (self.a * (x[0] + self.b)).sin() * (self.a * (x[1] + self.b)).sin() * (self.gamma * (self.d - x[2])).sinh()
    }

    fn grad_p(&self, x: [f64; 3]) -> [f64; 3] {
        let (sx, cx) = (self.a * (x[0] + self.b)).sin_cos();
        let (sy, cy) = (self.a * (x[1] + self.b)).sin_cos();
        let sh = (self.gamma * (self.d - x[2])).sinh();
        let ch = (self.gamma * (self.d - x[2])).cosh();
        [
            self.amp * self.a * cx * sy * sh,
            self.amp * self.a * sx * cy * sh,
            -self.amp * self.gamma * sx * sy * ch,
        ]
    }

    fn beta(&self, x: [f64; 3]) -> C {
        let g = self.grad_p(x);
        C::new(-(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]), -2.0 * g[2])
    }

    fn q(&self) -> MultiKVolume {
        MultiKVolume::from_fn(self.grid, self.kgrid, |x, k| C::new(-self.p(x) / (k * k), 0.0))
    }

    fn v(&self, k: f64) -> ComplexVolume {
        ComplexVolume::from_fn(self.grid, |x| C::new(self.p(x) / k, 0.0))
    }

    fn problem(&self, lambda: f64) -> ConvexifyProblem {
        let g = self.grid;
        let m = g.layer_len();
        let q = self.q();
        let mut problem = ConvexifyProblem::homogeneous(g, self.kgrid, lambda, 0.0);
        problem.tail = self.v(self.kgrid.k_max);
        for n in 0..self.kgrid.nk {
            let slab = q.slab(n);
            problem.phi0[n] = slab[..m].to_vec();
            problem.phi1[n] = (0..m).map(|i| (slab[m + i] - slab[i]) / g.hz).collect();
        }
        problem
    }
}

fn interior_max(g: &Grid, f: impl Fn(usize) -> f64) -> f64 {
    (0..g.len())
        .filter(|&p| {
            let (j, s, l) = g.unravel(p);
            g.is_interior(j, s, l)
        })
        .map(f)
        .fold(0.0, f64::max)
}

#[test]
fn residual_is_quadrature_error() {
    let m = Manufactured::new(21, 11);
    let q = m.q();
    let l = apply_l(&q, &m.v(m.kgrid.k_max)).unwrap();
    let scale = interior_max(&m.grid, |p| m.p(m.grid.point(p)).abs());
    let worst = l.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // trapezoid error of ∫ κ⁻² over [15.2, 16.2] with h_k = 0.1, times the
    // O(|∇P|·k) factors of the residual
    assert!(worst < 1e-4 * scale, "residual {worst:e} vs |P| {scale:e}");
    let coarse = Manufactured::new(21, 3);
    let lc = apply_l(&coarse.q(), &coarse.v(coarse.kgrid.k_max)).unwrap();
    let worst_c = lc.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    // halving h_k five times shrinks the error by about 25
    assert!(worst_c / worst > 15.0, "{worst_c:e} / {worst:e}");
}

#[test]
fn manufactured_q_sits_at_the_floor() {
    let m = Manufactured::new(21, 11);
    let problem = m.problem(8.0);
    let j_star = j_functional(&problem, &m.q()).unwrap();
    let start = backscatter::convexify::assemble_q_constraints(&problem).unwrap().field;
    let j0 = j_functional(&problem, &start).unwrap();
    assert!(j_star < 1e-8 * j0, "J(q*) = {j_star:e}, J(start) = {j0:e}");
}

#[test]
fn minimisation_reaches_the_floor() {
    let m = Manufactured::new(13, 3);
    let problem = m.problem(8.0);
    let j_star = j_functional(&problem, &m.q()).unwrap();
    let params = CgParams {
        initial_step: 256.0,
        min_step: 1e-12,
        max_iterations: 20_000,
    };
    let (_, trace) = minimize_j(&problem, &params).unwrap();
    let j0 = trace.values[0];
    let gap = trace.final_value() - j_star;
    assert!(trace.is_monotone());
    assert!(gap < 1e-6 * j0, "J = {:e}, floor {j_star:e}, start {j0:e}", trace.final_value());
}

#[test]
fn assembled_v_matches_to_quadrature_order() {
    let m = Manufactured::new(21, 11);
    let v = assemble_v(&m.q(), &m.v(m.kgrid.k_max)).unwrap();
    let exact = m.v(m.kgrid.k_min);
    let hk = m.kgrid.step();
    let k = m.kgrid.k_min;
    for (p, (a, b)) in v.data.iter().zip(&exact.data).enumerate() {
        let bound = m.p(m.grid.point(p)).abs() * hk * hk * 6.0 / k.powi(4) / 12.0 * 1.01 + 1e-15;
        assert!((a - b).norm() <= bound, "node {p}: {} vs {}", a, b);
    }
}

fn beta_error(n: usize) -> f64 {
    let m = Manufactured::new(n, 3);
    let k = m.kgrid.k_min;
    let beta = recover_beta(&m.v(k), k, VzSign::Pde, true);
    interior_max(&m.grid, |p| (beta.data[p] - m.beta(m.grid.point(p))).norm())
}

#[test]
fn beta_converges_at_second_order() {
    let e1 = beta_error(21);
    let e2 = beta_error(41);
    let ratio = e1 / e2;
    assert!(ratio > 3.5 && ratio < 4.5, "errors {e1:e} {e2:e}");
}

#[test]
fn flipped_sign_misses_the_manufactured_beta() {
    let m = Manufactured::new(21, 3);
    let k = m.kgrid.k_min;
    let beta = recover_beta(&m.v(k), k, VzSign::Flipped, true);
    let err = interior_max(&m.grid, |p| (beta.data[p] - m.beta(m.grid.point(p))).norm());
    assert!(err > 100.0 * beta_error(21));
}

#[test]
fn beta_splits_into_linear_and_quadratic_parts() {
    let m = Manufactured::new(15, 3);
    let k = m.kgrid.k_min;
    let v = m.v(k);
    let t = 3.0;
    let full1 = recover_beta(&v, k, VzSign::Pde, true);
    let lin1 = recover_beta(&v, k, VzSign::Pde, false);
    let vt = v.scale(C::new(t, 0.0));
    let full_t = recover_beta(&vt, k, VzSign::Pde, true);
    let lin_t = recover_beta(&vt, k, VzSign::Pde, false);
    for p in 0..m.grid.len() {
        let quad1 = full1.data[p] - lin1.data[p];
        let quad_t = full_t.data[p] - lin_t.data[p];
        assert!((lin_t.data[p] - lin1.data[p] * t).norm() <= 1e-12 * (1.0 + lin1.data[p].norm() * t));
        assert!((quad_t - quad1 * (t * t)).norm() <= 1e-12 * (1.0 + quad1.norm() * t * t));
    }
}
