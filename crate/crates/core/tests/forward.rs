//! Forward solver against independent oracles: the vacuum identity, a dense
//! trigonometric-collocation solve assembled from the closed-form kernel
//! transform, and the Born approximation for weak contrast.

use std::f64::consts::PI;

use backscatter::forward::{evaluate_on_plane, green, simulate, truncated_kernel_transform, ForwardParams, ForwardSolver};
use backscatter::grid::{build_dielectric, DielectricField, DomainSpec, InclusionSpec, PlaneLattice, WavenumberGrid};
use num_complex::Complex64;

type C = Complex64;

fn small_lattice() -> PlaneLattice {
    PlaneLattice {
        nx: 11,
        ny: 11,
        hx: 0.6,
        hy: 0.6,
        x0: -3.0,
        y0: -3.0,
    }
}

#[test]
fn vacuum_gives_incident_field_everywhere() {
    let spec = DomainSpec::default().with_resolution(21);
    let g = spec.grid().unwrap();
    let c = DielectricField::vacuum(g);
    let kg = WavenumberGrid::default();
    let solver = ForwardSolver::new(&c, kg.k_max, &ForwardParams::default()).unwrap();
    for k in kg.values() {
        let u = solver.solve(k).unwrap();
        let vol = u.sample_on_grid(&solver, &g).unwrap();
        for p in 0..g.len() {
            let x = g.point(p);
            assert!((vol.data[p] - C::from_polar(1.0, k * x[2])).norm() < 1e-10);
        }
        let f = evaluate_on_plane(&u, -8.0, &spec.lattice().unwrap()).unwrap();
        for v in &f.values {
            assert!((v - C::from_polar(1.0, -8.0 * k)).norm() < 1e-10);
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<C>, mut b: Vec<C>, n: usize) -> Vec<C> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))
            .unwrap();
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f == C::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let t = a[col * n + k];
                a[i * n + k] -= f * t;
            }
            let t = b[col];
            b[i] -= f * t;
        }
    }
    let mut x = vec![C::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    x
}

fn signed(i: usize, n: usize) -> f64 {
    if 2 * i < n {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

#[test]
fn matches_dense_collocation_solve() {
    let spec = DomainSpec::default();
    let inc = InclusionSpec::new([0.0, 0.0, 0.0], 0.3, 3.0);
    let c = build_dielectric(&[inc], &spec).unwrap();
    let params = ForwardParams {
        points_per_wavelength: 2.5,
        tol: 1e-12,
        ..ForwardParams::default()
    };
    let k = 16.2;
    let solver = ForwardSolver::new(&c, k, &params).unwrap();
    let sg = solver.scatterer().clone();
    let u = solver.solve(k).unwrap();
    let ns = sg.support.len();
    assert!(ns > 100 && ns < 1500, "support of {ns} nodes");

    // periodised kernel at every lattice offset spanned by the support
    let idx = |p: usize| [p % sg.n[0], (p / sg.n[0]) % sg.n[1], p / (sg.n[0] * sg.n[1])];
    let span: [usize; 3] = [0, 1, 2].map(|a| sg.active.hi[a] - sg.active.lo[a]);
    let total: f64 = sg.n.iter().product::<usize>() as f64;
    let phases: Vec<Vec<Vec<C>>> = (0..3)
        .map(|a| {
            (0..sg.n[a])
                .map(|m| {
                    let xi = 2.0 * PI * signed(m, sg.n[a]) / (sg.n[a] as f64);
                    (0..2 * span[a] - 1)
                        .map(|d| C::from_polar(1.0, xi * (d as f64 - (span[a] as f64 - 1.0))))
                        .collect()
                })
                .collect()
        })
        .collect();
    let w = [2 * span[0] - 1, 2 * span[1] - 1, 2 * span[2] - 1];
    let mut kper = vec![C::new(0.0, 0.0); w[0] * w[1] * w[2]];
    for m2 in 0..sg.n[2] {
        for m1 in 0..sg.n[1] {
            for m0 in 0..sg.n[0] {
                let xi = [
                    2.0 * PI * signed(m0, sg.n[0]) / (sg.n[0] as f64 * sg.h[0]),
                    2.0 * PI * signed(m1, sg.n[1]) / (sg.n[1] as f64 * sg.h[1]),
                    2.0 * PI * signed(m2, sg.n[2]) / (sg.n[2] as f64 * sg.h[2]),
                ];
                let a = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                let coeff = truncated_kernel_transform(k, sg.radius, a) / (total * sg.cell_volume());
                for d2 in 0..w[2] {
                    let c2 = coeff * phases[2][m2][d2];
                    for d1 in 0..w[1] {
                        let c1 = c2 * phases[1][m1][d1];
                        let row = (d2 * w[1] + d1) * w[0];
                        for d0 in 0..w[0] {
                            kper[row + d0] += c1 * phases[0][m0][d0];
                        }
                    }
                }
            }
        }
    }

    let cv = sg.cell_volume();
    let mut a = vec![C::new(0.0, 0.0); ns * ns];
    for (i, &pi) in sg.support.iter().enumerate() {
        let ii = idx(pi);
        for (j, &pj) in sg.support.iter().enumerate() {
            let jj = idx(pj);
            let d: [usize; 3] = [0, 1, 2].map(|ax| (ii[ax] + span[ax] - 1) - jj[ax]);
            let kv = kper[(d[2] * w[1] + d[1]) * w[0] + d[0]];
            a[i * ns + j] = -kv * (k * k * sg.contrast[j] * cv);
        }
        a[i * ns + i] += 1.0;
    }
    let b: Vec<C> = sg.support.iter().map(|&p| C::from_polar(1.0, k * sg.node(p)[2])).collect();
    let dense = dense_solve(a, b, ns);

    let num: f64 = dense.iter().zip(&u.support_values).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = dense.iter().map(|x| x.norm_sqr()).sum();
    let err = (num / den).sqrt();
    assert!(err < 1e-8, "collocation mismatch {err:e}");

    // measured data from the dense solution by direct quadrature
    let lattice = small_lattice();
    let f = evaluate_on_plane(&u, -8.0, &lattice).unwrap();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for s in 0..lattice.ny {
        for j in 0..lattice.nx {
            let x = [lattice.x(j), lattice.y(s), -8.0];
            let mut acc = C::new(0.0, 0.0);
            for (i, &p) in sg.support.iter().enumerate() {
                let y = sg.node(p);
                let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                acc += green(k, r) * dense[i] * (sg.contrast[i] * cv);
            }
            let us = acc * (k * k);
            let got = f.values[s * lattice.nx + j] - C::from_polar(1.0, -8.0 * k);
            worst = worst.max((got - us).norm());
            scale = scale.max(us.norm());
        }
    }
    assert!(worst < 1e-6 * scale, "plane mismatch {worst:e} of {scale:e}");
}

/// Relative distance between the scattered data and its Born approximation.
fn born_gap(contrast: f64) -> f64 {
    let spec = DomainSpec::default();
    let inc = InclusionSpec::new([0.0, 0.0, 0.0], 0.3, 1.0 + contrast);
    let c = build_dielectric(&[inc], &spec).unwrap();
    let params = ForwardParams {
        points_per_wavelength: 3.0,
        tol: 1e-13,
        ..ForwardParams::default()
    };
    let k = 15.2;
    let solver = ForwardSolver::new(&c, k, &params).unwrap();
    let sg = solver.scatterer().clone();
    let u = solver.solve(k).unwrap();
    let lattice = small_lattice();
    let f = evaluate_on_plane(&u, -8.0, &lattice).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..lattice.ny {
        for j in 0..lattice.nx {
            let x = [lattice.x(j), lattice.y(s), -8.0];
            let mut born = C::new(0.0, 0.0);
            for (i, &p) in sg.support.iter().enumerate() {
                let y = sg.node(p);
                let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
                born += green(k, r) * C::from_polar(1.0, k * y[2]) * (sg.contrast[i] * sg.cell_volume());
            }
            born *= k * k;
            let us = f.values[s * lattice.nx + j] - C::from_polar(1.0, -8.0 * k);
            num += (us - born).norm_sqr();
            den += us.norm_sqr();
        }
    }
    (num / den).sqrt()
}

#[test]
fn weak_contrast_is_born_to_first_order() {
    let g1 = born_gap(1e-4);
    let g2 = born_gap(2e-4);
    assert!(g1 < 1e-2, "Born gap {g1:e}");
    let ratio = g2 / g1;
    assert!((ratio - 2.0).abs() < 0.05, "gap ratio {ratio}");
}

#[test]
fn simulation_is_deterministic() {
    let spec = DomainSpec::default().with_resolution(21);
    let c = build_dielectric(&[InclusionSpec::new([0.0, 0.0, 0.0], 0.3, 3.0)], &spec).unwrap();
    let kg = WavenumberGrid {
        k_min: 15.2,
        k_max: 16.2,
        nk: 2,
    };
    let params = ForwardParams {
        points_per_wavelength: 3.0,
        ..ForwardParams::default()
    };
    let lattice = small_lattice();
    let (a, _) = simulate(&c, &kg, &lattice, -8.0, &params).unwrap();
    let (b, _) = simulate(&c, &kg, &lattice, -8.0, &params).unwrap();
    assert_eq!(a, b);
}
