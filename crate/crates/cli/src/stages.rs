//! Pipeline stages backed by containers in an output directory. Each stage
//! writes its artefacts and, with `resume`, reuses artefacts produced by the
//! same config instead of recomputing them.

use std::fs;
use std::path::{Path, PathBuf};

use backscatter::cg::MinimizeTrace;
use backscatter::experiment::{self, ExperimentConfig};
use backscatter::io::{self, container_exists, FieldContainer};
use backscatter::pipeline::{extract_boundary_data, DepthScan, PlaneField};
use backscatter::reconstruct::ReconstructionReport;
use backscatter::{Error, Result};
use serde::{Deserialize, Serialize};

pub struct Workspace {
    pub config: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
    pub resume: bool,
    pub force: bool,
}

/// Everything `invert` reports, written to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub config_hash: String,
    pub xi: f64,
    pub epsilon: f64,
    pub tail_trace: MinimizeTrace,
    pub q_trace: MinimizeTrace,
    pub reconstruction: ReconstructionReport,
}

impl Workspace {
    pub fn new(config: ExperimentConfig, out: PathBuf, resume: bool, force: bool) -> Result<Self> {
        config.validate()?;
        let hash = io::config_hash(&config)?;
        fs::create_dir_all(&out)?;
        io::write_config(&out.join("config.json"), &config)?;
        Ok(Self {
            config,
            hash,
            out,
            resume,
            force,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// An existing artefact from this config, when resuming.
    fn reusable(&self, dir: &Path) -> Option<FieldContainer> {
        if !self.resume || !container_exists(dir) {
            return None;
        }
        FieldContainer::read(dir).ok().filter(|c| c.manifest.config_hash == self.hash)
    }

    /// An input produced by an earlier command; a different config is an
    /// error unless forced.
    fn input(&self, name: &str) -> Result<FieldContainer> {
        let dir = self.path(name);
        if !container_exists(&dir) {
            return Err(Error::Container {
                path: dir,
                msg: "missing; run the earlier stage first".into(),
            });
        }
        FieldContainer::read_checked(&dir, &self.hash, self.force)
    }

    pub fn simulate(&self) -> Result<Vec<PlaneField>> {
        let dir = self.path("measured");
        if let Some(c) = self.reusable(&dir) {
            return c.to_planes();
        }
        let (fields, reports) = experiment::run_simulation(&self.config)?;
        FieldContainer::from_planes("measured", &self.hash, &fields)?.write(&dir)?;
        write_json(&self.path("forward_reports.json"), &reports)?;
        Ok(fields)
    }

    pub fn noise(&self) -> Result<Vec<PlaneField>> {
        let dir = self.path("noisy");
        if let Some(c) = self.reusable(&dir) {
            return c.to_planes();
        }
        let measured = self.input("measured")?.to_planes()?;
        let noisy = experiment::run_noise(&self.config, &measured)?;
        FieldContainer::from_planes("noisy", &self.hash, &noisy)?.write(&dir)?;
        Ok(noisy)
    }

    pub fn scan(&self) -> Result<DepthScan> {
        let noisy = self.input("noisy")?.to_planes()?;
        let scan = experiment::run_scan(&self.config, &noisy)?;
        io::write_scan_csv(&self.path("scan.csv"), &scan)?;
        write_json(&self.path("scan.json"), &scan)?;
        Ok(scan)
    }

    pub fn invert(&self) -> Result<InversionReport> {
        let cfg = &self.config;
        let xi = cfg.domain.front_offset;
        let epsilon = cfg.epsilon()?;
        let noisy = self.input("noisy")?.to_planes()?;

        let boundary_dir = self.path("boundary");
        let boundary = match self.resume && container_exists(&boundary_dir.join("phi1")) {
            true => io::read_boundary(&boundary_dir, &self.hash, false).ok(),
            false => None,
        };
        let boundary = match boundary {
            Some(b) => b,
            None => {
                let (g0, _) = extract_boundary_data(&noisy, xi, epsilon)?;
                FieldContainer::from_planes("g0", &self.hash, &g0)?.write(&self.path("g0"))?;
                let b = experiment::run_boundary(cfg, &noisy)?;
                io::write_boundary(&boundary_dir, &self.hash, &b)?;
                b
            }
        };

        let tail_dir = self.path("tail");
        let (tail, tail_trace) = match (self.reusable(&tail_dir), read_trace(&self.path("tail_trace.json"))) {
            (Some(c), Some(t)) if self.resume => (c.to_volume()?, t),
            _ => {
                let (tail, trace) = experiment::run_tail(cfg, &boundary)?;
                FieldContainer::from_volume("tail", &self.hash, &tail).write(&tail_dir)?;
                write_json(&self.path("tail_trace.json"), &trace)?;
                (tail, trace)
            }
        };

        let q_dir = self.path("q");
        let (q, q_trace) = match (self.reusable(&q_dir), read_trace(&self.path("q_trace.json"))) {
            (Some(c), Some(t)) if self.resume => (c.to_multik()?, t),
            _ => {
                let (q, trace) = experiment::run_convexify(cfg, &boundary, &tail)?;
                FieldContainer::from_multik("q", &self.hash, &q).write(&q_dir)?;
                write_json(&self.path("q_trace.json"), &trace)?;
                (q, trace)
            }
        };

        let (v, c, reconstruction) = experiment::run_reconstruct(cfg, &q, &tail)?;
        FieldContainer::from_volume("v", &self.hash, &v).write(&self.path("v"))?;
        FieldContainer::from_dielectric("c", &self.hash, &c).write(&self.path("c"))?;
        let report = InversionReport {
            config_hash: self.hash.clone(),
            xi,
            epsilon,
            tail_trace,
            q_trace,
            reconstruction,
        };
        write_json(&self.path("report.json"), &report)?;
        Ok(report)
    }
}

fn read_trace(path: &Path) -> Option<MinimizeTrace> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
