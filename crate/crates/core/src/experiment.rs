//! End-to-end experiment: simulate, add noise, propagate, build boundary
//! data, solve for the tail, minimise the convexified functional, recover
//! the coefficient.

use serde::{Deserialize, Serialize};

use crate::cg::{CgParams, MinimizeTrace};
use crate::convexify::{minimize_j, ConvexifyProblem};
use crate::error::{Error, Result};
use crate::forward::{simulate, ForwardParams, ForwardSolveReport};
use crate::grid::{build_dielectric, table1_case, ComplexVolume, DielectricField, DomainSpec, InclusionSpec, MultiKVolume, WavenumberGrid};
use crate::pipeline::{add_noise_stack, extract_boundary_data, log_and_differentiate, scan_depth_of, BoundaryDataSet, ScanQuantity, DepthScan, NoiseSpec, PlaneField};
use crate::reconstruct::{assemble_v, evaluate_against_truth, recover_c, ReconstructionReport, VzSign};
use crate::tail::{minimize_tail, TailProblem};

/// Offset of the second propagation plane used for `∂_z u` on `Γ`.
/// `k·ε` must be small; the total field oscillates like `e^{ikz}`.
pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    pub a_min: f64,
    pub a_max: f64,
    pub samples: usize,
    pub quantity: ScanQuantity,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            a_min: -7.9,
            a_max: 2.0,
            samples: 100,
            quantity: ScanQuantity::Total,
        }
    }
}

/// Every parameter of one run. Serialised as JSON; the SHA-256 of the
/// canonical serialisation identifies the run in stored artefacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub wavenumbers: WavenumberGrid,
    pub inclusions: Vec<InclusionSpec>,
    pub noise: NoiseSpec,
    /// Weight exponent of the tail functional.
    pub mu: f64,
    /// Weight exponent of the main functional.
    pub lambda: f64,
    /// Regularisation weight of the tail functional.
    pub alpha: f64,
    /// Regularisation weight of the main functional.
    pub rho: f64,
    pub tail_cg: CgParams,
    pub cg: CgParams,
    pub forward: ForwardParams,
    /// Offset of the second propagation plane; `None` uses [`DEFAULT_EPSILON`].
    pub epsilon: Option<f64>,
    pub vz_sign: VzSign,
    pub scan: ScanParams,
    /// Where the command-line pipeline writes its artefacts. Not part of
    /// the config hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<std::path::PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::production(1)
    }
}

impl ExperimentConfig {
    /// Full-resolution setup for one of the numbered test cases.
    pub fn production(case: u32) -> Self {
        Self {
            domain: DomainSpec::default(),
            wavenumbers: WavenumberGrid::default(),
            inclusions: table1_case(case).unwrap_or_default(),
            noise: NoiseSpec::default(),
            mu: 8.0,
            lambda: 8.0,
            alpha: 1e-5,
            rho: 0.0,
            tail_cg: CgParams {
                initial_step: 1.0,
                max_iterations: 8000,
                ..CgParams::default()
            },
            cg: CgParams {
                initial_step: 1.0,
                max_iterations: 4000,
                ..CgParams::default()
            },
            forward: ForwardParams::default(),
            epsilon: None,
            vz_sign: VzSign::Pde,
            scan: ScanParams::default(),
            output: None,
        }
    }

    /// Reduced 31³ setup used by the continuous-integration profile.
    pub fn ci(case: u32) -> Self {
        let mut c = Self::production(case);
        c.domain = c.domain.with_resolution(31);
        c.forward.points_per_wavelength = 4.0;
        c.tail_cg.max_iterations = 4000;
        c.cg.max_iterations = 3000;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.wavenumbers.validate()?;
        self.noise.validate()?;
        self.forward.validate()?;
        if !(self.mu > 0.0 && self.lambda > 0.0) {
            return Err(Error::config("weight exponents must be positive"));
        }
        if !(self.alpha >= 0.0 && self.rho >= 0.0) {
            return Err(Error::config("regularisation weights must be non-negative"));
        }
        for cg in [self.cg, self.tail_cg] {
            if !(cg.initial_step > 0.0 && cg.min_step > 0.0 && cg.max_iterations > 0) {
                return Err(Error::config("CG step sizes and iteration cap must be positive"));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::config("propagation offset must be positive"));
            }
        }
        if !(self.scan.samples > 0 && self.scan.a_min <= self.scan.a_max) {
            return Err(Error::config("depth scan range is empty"));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> Result<f64> {
        Ok(match self.epsilon {
            Some(e) => e,
            None => DEFAULT_EPSILON,
        })
    }

    pub fn dielectric(&self) -> Result<DielectricField> {
        build_dielectric(&self.inclusions, &self.domain)
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

pub fn run_simulation(config: &ExperimentConfig) -> Result<(Vec<PlaneField>, Vec<ForwardSolveReport>)> {
    config.validate()?;
    let c = stage("simulate", config.dielectric())?;
    let lattice = config.domain.lattice()?;
    stage(
        "simulate",
        simulate(&c, &config.wavenumbers, &lattice, config.domain.meas_z, &config.forward),
    )
}

pub fn run_noise(config: &ExperimentConfig, fields: &[PlaneField]) -> Result<Vec<PlaneField>> {
    stage("noise", add_noise_stack(fields, &config.noise))
}

/// Depth scan of the top-wavenumber plane.
pub fn run_scan(config: &ExperimentConfig, fields: &[PlaneField]) -> Result<DepthScan> {
    let f = fields
        .last()
        .ok_or_else(|| Error::config("no measured planes"))?;
    stage("scan", scan_depth_of(f, config.scan.a_min, config.scan.a_max, config.scan.samples, config.scan.quantity))
}

pub fn run_boundary(config: &ExperimentConfig, fields: &[PlaneField]) -> Result<BoundaryDataSet> {
    let xi = config.domain.front_offset;
    let (g0, g1) = stage("boundary", extract_boundary_data(fields, xi, config.epsilon()?))?;
    stage("boundary", log_and_differentiate(&g0, &g1, &config.wavenumbers, xi))
}

pub fn run_tail(config: &ExperimentConfig, data: &BoundaryDataSet) -> Result<(ComplexVolume, MinimizeTrace)> {
    let problem = TailProblem {
        grid: config.domain.grid()?,
        psi0: data.psi0.clone(),
        psi1: data.psi1.clone(),
        mu: config.mu,
        alpha: config.alpha,
    };
    stage("tail", minimize_tail(&problem, &config.tail_cg))
}

pub fn run_convexify(
    config: &ExperimentConfig,
    data: &BoundaryDataSet,
    tail: &ComplexVolume,
) -> Result<(MultiKVolume, MinimizeTrace)> {
    let problem = ConvexifyProblem {
        grid: config.domain.grid()?,
        kgrid: config.wavenumbers,
        tail: tail.clone(),
        phi0: data.phi0.clone(),
        phi1: data.phi1.clone(),
        lambda: config.lambda,
        rho: config.rho,
    };
    stage("convexify", minimize_j(&problem, &config.cg))
}

pub fn run_reconstruct(
    config: &ExperimentConfig,
    q: &MultiKVolume,
    tail: &ComplexVolume,
) -> Result<(ComplexVolume, DielectricField, ReconstructionReport)> {
    let v = stage("reconstruct", assemble_v(q, tail))?;
    let (c, mut report) = stage("reconstruct", recover_c(&v, config.wavenumbers.k_min, config.vz_sign))?;
    if !config.inclusions.is_empty() {
        report = stage("reconstruct", evaluate_against_truth(&c, &config.inclusions))?;
    }
    Ok((v, c, report))
}

/// Everything the inversion produces from measured data.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub boundary: BoundaryDataSet,
    pub tail: ComplexVolume,
    pub tail_trace: MinimizeTrace,
    pub q: MultiKVolume,
    pub q_trace: MinimizeTrace,
    pub v: ComplexVolume,
    pub c: DielectricField,
    pub report: ReconstructionReport,
}

pub fn run_inversion(config: &ExperimentConfig, measured: &[PlaneField]) -> Result<Inversion> {
    config.validate()?;
    let boundary = run_boundary(config, measured)?;
    let (tail, tail_trace) = run_tail(config, &boundary)?;
    let (q, q_trace) = run_convexify(config, &boundary, &tail)?;
    let (v, c, report) = run_reconstruct(config, &q, &tail)?;
    Ok(Inversion {
        boundary,
        tail,
        tail_trace,
        q,
        q_trace,
        v,
        c,
        report,
    })
}
