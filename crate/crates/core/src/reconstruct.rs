//! Recovery of the coefficient from `v(·, k̲)` and comparison with the
//! phantom.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexVolume, DielectricField, InclusionSpec, MultiKVolume};
use crate::ops::{gradient_at, k_tail_integral, laplacian_at};

/// Sign of the `2ikv_z` term when solving for `β`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VzSign {
    /// `β = -Δv - k²∇v·∇v - 2ikv_z`, consistent with the PDE for `v`.
    #[default]
    Pde,
    /// `β = -Δv - k²∇v·∇v + 2ikv_z`.
    Flipped,
}

/// `v(·, k̲) = V - ∫_{k̲}^{k̄} q dκ`.
pub fn assemble_v(q: &MultiKVolume, tail: &ComplexVolume) -> Result<ComplexVolume> {
    if q.grid != tail.grid {
        return Err(Error::Shape("q and V must share a grid".into()));
    }
    let integral = k_tail_integral(q, 0);
    Ok(ComplexVolume {
        grid: tail.grid,
        data: tail.data.iter().zip(&integral.data).map(|(v, t)| v - t).collect(),
    })
}

/// `β` at interior nodes (zero on the boundary), optionally without the
/// quadratic gradient term.
pub fn recover_beta(v: &ComplexVolume, k: f64, sign: VzSign, quadratic: bool) -> ComplexVolume {
    let g = v.grid;
    let s = match sign {
        VzSign::Pde => -1.0,
        VzSign::Flipped => 1.0,
    };
    let data = (0..g.len())
        .into_par_iter()
        .map(|p| {
            let (j, sy, l) = g.unravel(p);
            if !g.is_interior(j, sy, l) {
                return Complex64::new(0.0, 0.0);
            }
            let lap = laplacian_at(&v.data, &g, p);
            let gr = gradient_at(&v.data, &g, p);
            let quad = if quadratic {
                gr[0] * gr[0] + gr[1] * gr[1] + gr[2] * gr[2]
            } else {
                Complex64::new(0.0, 0.0)
            };
            -lap - quad * (k * k) + Complex64::new(0.0, 2.0 * k * s) * gr[2]
        })
        .collect();
    ComplexVolume { grid: g, data }
}

/// `c = 1 + Re β` where `Re β ≥ 0` inside the box, `c = 1` elsewhere.
pub fn recover_c(v: &ComplexVolume, k_min: f64, sign: VzSign) -> Result<(DielectricField, ReconstructionReport)> {
    if !v.is_finite() {
        return Err(Error::Numeric("v has non-finite values".into()));
    }
    let g = v.grid;
    let beta = recover_beta(v, k_min, sign, true);
    let values: Vec<f64> = (0..g.len())
        .map(|p| {
            let (j, s, l) = g.unravel(p);
            let b = beta.data[p].re;
            if g.is_interior(j, s, l) && b >= 0.0 {
                1.0 + b
            } else {
                1.0
            }
        })
        .collect();
    let field = DielectricField::from_values(g, values)?;
    let report = ReconstructionReport::from_field(&field);
    Ok((field, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub center: [f64; 3],
    pub c_exact: f64,
    pub c_comp: f64,
    /// `|c_comp - c_exact| / c_exact` in percent.
    pub rel_error: f64,
    pub location: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub c_comp: f64,
    pub location: [f64; 3],
    /// Per-target breakdown, present once compared with a phantom.
    pub targets: Vec<TargetReport>,
    /// For two or more targets: whether every neighbouring pair is resolved.
    pub separated: Option<bool>,
}

impl ReconstructionReport {
    pub fn from_field(c: &DielectricField) -> Self {
        let (c_comp, p) = c.max();
        Self {
            c_comp,
            location: c.grid.point(p),
            targets: Vec::new(),
            separated: None,
        }
    }

    /// Error of the single target, if there is exactly one.
    pub fn rel_error(&self) -> Option<f64> {
        match self.targets.as_slice() {
            [t] => Some(t.rel_error),
            _ => None,
        }
    }
}

pub fn relative_error_percent(c_comp: f64, c_exact: f64) -> f64 {
    (c_comp - c_exact).abs() / c_exact * 100.0
}

fn nearest(truth: &[InclusionSpec], x: [f64; 3]) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, t) in truth.iter().enumerate() {
        let d = t.distance(x);
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Per-target maxima, each taken over the nodes closer to that target's
/// centre than to any other.
pub fn evaluate_against_truth(c: &DielectricField, truth: &[InclusionSpec]) -> Result<ReconstructionReport> {
    if truth.is_empty() {
        return Err(Error::config("ground truth needs at least one inclusion"));
    }
    let g = c.grid;
    let mut best = vec![(f64::NEG_INFINITY, 0usize); truth.len()];
    for (p, &v) in c.values.iter().enumerate() {
        let i = nearest(truth, g.point(p));
        if v > best[i].0 {
            best[i] = (v, p);
        }
    }
    let targets = truth
        .iter()
        .zip(&best)
        .map(|(t, &(v, p))| TargetReport {
            center: t.center,
            c_exact: t.c_max,
            c_comp: v,
            rel_error: relative_error_percent(v, t.c_max),
            location: g.point(p),
        })
        .collect::<Vec<_>>();
    let mut report = ReconstructionReport::from_field(c);
    if truth.len() > 1 {
        report.separated = Some(
            targets
                .windows(2)
                .all(|w| targets_separated(c, w[0].location, w[1].location, w[0].c_comp, w[1].c_comp)),
        );
    }
    report.targets = targets;
    Ok(report)
}

/// Two peaks count as separated when the profile `P(t) = max c` over slices
/// orthogonal to the segment joining them dips, somewhere strictly between
/// the peaks, below half of the smaller peak's excess over 1.
pub fn targets_separated(c: &DielectricField, a: [f64; 3], b: [f64; 3], ca: f64, cb: f64) -> bool {
    let g = c.grid;
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if len == 0.0 {
        return false;
    }
    let u = [d[0] / len, d[1] / len, d[2] / len];
    let bin = g.hx.min(g.hy).min(g.hz);
    let nbins = (len / bin).round() as usize;
    if nbins < 2 {
        return false;
    }
    let mut profile = vec![f64::NEG_INFINITY; nbins + 1];
    for (p, &v) in c.values.iter().enumerate() {
        let x = g.point(p);
        let t = (x[0] - a[0]) * u[0] + (x[1] - a[1]) * u[1] + (x[2] - a[2]) * u[2];
        let i = (t / bin).round();
        if i >= 0.0 && i <= nbins as f64 {
            let i = i as usize;
            profile[i] = profile[i].max(v);
        }
    }
    let threshold = 1.0 + 0.5 * (ca.min(cb) - 1.0);
    profile[1..nbins].iter().any(|&v| v < threshold)
}
