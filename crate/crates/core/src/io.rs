//! On-disk artefacts: field containers, config hashing, and exports for
//! visualisation.
//!
//! A container is a directory with `manifest.json` and `data.bin`. The
//! payload is little-endian `f64`, real and imaginary parts interleaved, in
//! the flat order of the in-memory type (x fastest).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::grid::{ComplexVolume, DielectricField, Grid, MultiKVolume, PlaneLattice, WavenumberGrid};
use crate::pipeline::{BoundaryDataSet, DepthScan, PlaneField};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "data.bin";
const DTYPE: &str = "complex128";
const BYTE_ORDER: &str = "little";

/// SHA-256 of the config's JSON serialisation, with the output directory
/// cleared. Hex encoded.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut c = config.clone();
    c.output = None;
    let bytes = serde_json::to_vec(&c)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("writing to a string");
    }
    Ok(hex)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Container {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn write_config(path: &Path, config: &ExperimentConfig) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(config)?)?;
    Ok(())
}

/// What the payload axes mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Shape `[planes, ny, nx]`; one `z` and one `k` per plane.
    Planes { lattice: PlaneLattice, z: Vec<f64>, k: Vec<f64> },
    /// Shape `[nz, ny, nx]`.
    Volume { grid: Grid },
    /// Shape `[nk, nz, ny, nx]`.
    MultiK { grid: Grid, kgrid: WavenumberGrid },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub shape: Vec<usize>,
    pub axes: Vec<String>,
    pub dtype: String,
    pub byte_order: String,
    pub config_hash: String,
    pub geometry: Geometry,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldContainer {
    pub manifest: Manifest,
    pub data: Vec<Complex64>,
}

fn axes(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

impl FieldContainer {
    fn new(name: &str, hash: &str, shape: Vec<usize>, axis_names: &[&str], geometry: Geometry, data: Vec<Complex64>) -> Self {
        Self {
            manifest: Manifest {
                name: name.to_string(),
                shape,
                axes: axes(axis_names),
                dtype: DTYPE.to_string(),
                byte_order: BYTE_ORDER.to_string(),
                config_hash: hash.to_string(),
                geometry,
            },
            data,
        }
    }

    pub fn from_planes(name: &str, hash: &str, planes: &[PlaneField]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Shape("no planes to store".into()))?;
        let lattice = first.lattice;
        if planes.iter().any(|p| p.lattice != lattice || p.values.len() != lattice.len()) {
            return Err(Error::Shape("planes use different lattices".into()));
        }
        let data = planes.iter().flat_map(|p| p.values.iter().copied()).collect();
        Ok(Self::new(
            name,
            hash,
            vec![planes.len(), lattice.ny, lattice.nx],
            &["plane", "y", "x"],
            Geometry::Planes {
                lattice,
                z: planes.iter().map(|p| p.z).collect(),
                k: planes.iter().map(|p| p.k).collect(),
            },
            data,
        ))
    }

    pub fn to_planes(&self) -> Result<Vec<PlaneField>> {
        let Geometry::Planes { lattice, z, k } = &self.manifest.geometry else {
            return Err(self.wrong_kind("planes"));
        };
        let m = lattice.len();
        if z.len() != k.len() || self.data.len() != m * z.len() {
            return Err(Error::Shape(format!("container '{}' is inconsistent", self.manifest.name)));
        }
        Ok(self
            .data
            .chunks(m)
            .zip(z.iter().zip(k))
            .map(|(values, (&z, &k))| PlaneField {
                lattice: *lattice,
                z,
                k,
                values: values.to_vec(),
            })
            .collect())
    }

    pub fn from_volume(name: &str, hash: &str, v: &ComplexVolume) -> Self {
        let g = v.grid;
        Self::new(name, hash, vec![g.nz, g.ny, g.nx], &["z", "y", "x"], Geometry::Volume { grid: g }, v.data.clone())
    }

    pub fn to_volume(&self) -> Result<ComplexVolume> {
        let Geometry::Volume { grid } = self.manifest.geometry else {
            return Err(self.wrong_kind("volume"));
        };
        ComplexVolume::from_vec(grid, self.data.clone())
    }

    /// Real field stored with zero imaginary part.
    pub fn from_dielectric(name: &str, hash: &str, c: &DielectricField) -> Self {
        Self::from_volume(name, hash, &c.to_complex())
    }

    pub fn to_dielectric(&self) -> Result<DielectricField> {
        let v = self.to_volume()?;
        DielectricField::from_values(v.grid, v.data.iter().map(|z| z.re).collect())
    }

    pub fn from_multik(name: &str, hash: &str, q: &MultiKVolume) -> Self {
        let g = q.grid;
        Self::new(
            name,
            hash,
            vec![q.kgrid.nk, g.nz, g.ny, g.nx],
            &["k", "z", "y", "x"],
            Geometry::MultiK { grid: g, kgrid: q.kgrid },
            q.data.clone(),
        )
    }

    pub fn to_multik(&self) -> Result<MultiKVolume> {
        let Geometry::MultiK { grid, kgrid } = self.manifest.geometry else {
            return Err(self.wrong_kind("multi-wavenumber volume"));
        };
        MultiKVolume::from_vec(grid, kgrid, self.data.clone())
    }

    fn wrong_kind(&self, expected: &str) -> Error {
        Error::Shape(format!("container '{}' does not hold a {expected}", self.manifest.name))
    }

    /// Writes the payload, then the manifest; a directory without a
    /// manifest is incomplete.
    pub fn write(&self, dir: &Path) -> Result<()> {
        if self.data.len() != self.manifest.len() {
            return Err(Error::Shape(format!(
                "container '{}' has {} values for shape {:?}",
                self.manifest.name,
                self.data.len(),
                self.manifest.shape
            )));
        }
        fs::create_dir_all(dir)?;
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            fs::remove_file(&manifest_path)?;
        }
        let mut bytes = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        let mut f = fs::File::create(dir.join(PAYLOAD_FILE))?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::write(manifest_path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let fail = |msg: String| Error::Container {
            path: dir.to_path_buf(),
            msg,
        };
        let text = fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| fail(format!("manifest: {e}")))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| fail(format!("manifest: {e}")))?;
        if manifest.dtype != DTYPE || manifest.byte_order != BYTE_ORDER {
            return Err(fail(format!(
                "unsupported dtype {} / byte order {}",
                manifest.dtype, manifest.byte_order
            )));
        }
        let bytes = fs::read(dir.join(PAYLOAD_FILE)).map_err(|e| fail(format!("payload: {e}")))?;
        let expected = manifest.len() * 16;
        if bytes.len() != expected {
            return Err(fail(format!("payload has {} bytes, manifest implies {expected}", bytes.len())));
        }
        let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let data = bytes.chunks_exact(16).map(|c| Complex64::new(word(&c[..8]), word(&c[8..]))).collect();
        Ok(Self { manifest, data })
    }

    /// Reads the container and checks that it was produced by the given
    /// config, unless `force` is set.
    pub fn read_checked(dir: &Path, hash: &str, force: bool) -> Result<Self> {
        let c = Self::read(dir)?;
        if !force && c.manifest.config_hash != hash {
            return Err(Error::Container {
                path: dir.to_path_buf(),
                msg: format!(
                    "produced by config {}, current config is {hash}; pass --force to use it anyway",
                    c.manifest.config_hash
                ),
            });
        }
        Ok(c)
    }
}

pub fn container_exists(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file()
}

fn planes_of(data: &BoundaryDataSet, values: &[Vec<Complex64>]) -> Vec<PlaneField> {
    let ks = data.kgrid.values();
    values
        .iter()
        .zip(ks)
        .map(|(v, k)| PlaneField {
            lattice: data.lattice,
            z: -data.xi,
            k,
            values: v.clone(),
        })
        .collect()
}

/// Stores `v`, `v_z`, `φ₀`, `φ₁` as four plane stacks under `dir`; the
/// `ψ` planes are the top-wavenumber slices of `v` and `v_z`.
pub fn write_boundary(dir: &Path, hash: &str, data: &BoundaryDataSet) -> Result<()> {
    for (name, values) in [("v", &data.v), ("vz", &data.vz), ("phi0", &data.phi0), ("phi1", &data.phi1)] {
        FieldContainer::from_planes(name, hash, &planes_of(data, values))?.write(&dir.join(name))?;
    }
    Ok(())
}

pub fn read_boundary(dir: &Path, hash: &str, force: bool) -> Result<BoundaryDataSet> {
    let mut stacks = Vec::with_capacity(4);
    for name in ["v", "vz", "phi0", "phi1"] {
        stacks.push(FieldContainer::read_checked(&dir.join(name), hash, force)?.to_planes()?);
    }
    let first = &stacks[0];
    let nk = first.len();
    if nk < 2 || stacks.iter().any(|s| s.len() != nk) {
        return Err(Error::Container {
            path: dir.to_path_buf(),
            msg: "boundary stacks have inconsistent lengths".into(),
        });
    }
    let kgrid = WavenumberGrid {
        k_min: first[0].k,
        k_max: first[nk - 1].k,
        nk,
    };
    let values = |i: usize| -> Vec<Vec<Complex64>> { stacks[i].iter().map(|p| p.values.clone()).collect() };
    let v = values(0);
    let vz = values(1);
    Ok(BoundaryDataSet {
        lattice: first[0].lattice,
        kgrid,
        xi: -first[0].z,
        psi0: v[nk - 1].clone(),
        psi1: vz[nk - 1].clone(),
        phi0: values(2),
        phi1: values(3),
        v,
        vz,
    })
}

/// `a,M(a)` rows with the chosen depth in a leading comment.
pub fn write_scan_csv(path: &Path, scan: &DepthScan) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# argmax a0 = {:?}", scan.argmax).expect("string write");
    writeln!(out, "a,M").expect("string write");
    for (a, m) in scan.depths.iter().zip(&scan.maxima) {
        writeln!(out, "{a:?},{m:?}").expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// A 3-D block of nodes with uniform spacing, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredBlock {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub values: Vec<Complex64>,
}

impl StructuredBlock {
    /// The block for one plane, volume, or wavenumber slice of a container.
    /// `index` selects the plane or wavenumber and is ignored for volumes.
    pub fn from_container(c: &FieldContainer, index: usize) -> Result<Self> {
        match &c.manifest.geometry {
            Geometry::Volume { grid } => Ok(Self::of_grid(grid, c.data.clone())),
            Geometry::MultiK { grid, kgrid } => {
                if index >= kgrid.nk {
                    return Err(Error::config(format!("wavenumber index {index} out of range 0..{}", kgrid.nk)));
                }
                let len = grid.len();
                Ok(Self::of_grid(grid, c.data[index * len..(index + 1) * len].to_vec()))
            }
            Geometry::Planes { lattice, z, .. } => {
                if index >= z.len() {
                    return Err(Error::config(format!("plane index {index} out of range 0..{}", z.len())));
                }
                let m = lattice.len();
                Ok(Self {
                    dims: [lattice.nx, lattice.ny, 1],
                    origin: [lattice.x0, lattice.y0, z[index]],
                    spacing: [lattice.hx, lattice.hy, 1.0],
                    values: c.data[index * m..(index + 1) * m].to_vec(),
                })
            }
        }
    }

    fn of_grid(g: &Grid, values: Vec<Complex64>) -> Self {
        Self {
            dims: [g.nx, g.ny, g.nz],
            origin: [g.x(0), g.y(0), g.z(0)],
            spacing: [g.hx, g.hy, g.hz],
            values,
        }
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }
}

/// Legacy VTK structured points: ASCII header, big-endian binary payload,
/// scalar arrays `real`, `imag` and `abs`. Point order is x fastest, then
/// y, then z.
pub fn write_vtk(path: &Path, block: &StructuredBlock, title: &str) -> Result<()> {
    let [nx, ny, nz] = block.dims;
    let n = nx * ny * nz;
    if block.values.len() != n {
        return Err(Error::Shape("block size does not match its dimensions".into()));
    }
    let mut out: Vec<u8> = Vec::with_capacity(3 * n * 8 + 512);
    let title: String = title.chars().filter(|c| *c != '\n').take(200).collect();
    write!(
        out,
        "# vtk DataFile Version 3.0\n{title} (point order: x fastest, then y, then z)\nBINARY\nDATASET STRUCTURED_POINTS\nDIMENSIONS {nx} {ny} {nz}\nORIGIN {:?} {:?} {:?}\nSPACING {:?} {:?} {:?}\nPOINT_DATA {n}\n",
        block.origin[0], block.origin[1], block.origin[2], block.spacing[0], block.spacing[1], block.spacing[2]
    )?;
    let parts: [(&str, fn(&Complex64) -> f64); 3] = [("real", |z| z.re), ("imag", |z| z.im), ("abs", |z| z.norm())];
    for (name, f) in parts {
        write!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default\n")?;
        for z in &block.values {
            out.extend_from_slice(&f(z).to_be_bytes());
        }
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// A plane of the block: `axis` is 0, 1 or 2 for x, y or z; the node
/// nearest `coordinate` is used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceSpec {
    pub axis: usize,
    pub coordinate: f64,
}

impl std::str::FromStr for SliceSpec {
    type Err = Error;

    /// Parses `x=0.5`, `y=-1` or `z=0`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, v) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("slice '{s}' must look like z=0.0")))?;
        let axis = match a.trim() {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            other => return Err(Error::config(format!("unknown slice axis '{other}'"))),
        };
        let coordinate = v
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("slice coordinate '{v}' is not a number")))?;
        Ok(Self { axis, coordinate })
    }
}

/// CSV rows `x,y,z,re,im,abs` for one slice, first varying axis fastest.
/// Values use the shortest representation that reads back exactly.
pub fn write_csv_slice(path: &Path, block: &StructuredBlock, slice: SliceSpec) -> Result<usize> {
    let axis = slice.axis;
    let steps = (slice.coordinate - block.origin[axis]) / block.spacing[axis];
    let idx = steps.round().clamp(0.0, (block.dims[axis] - 1) as f64) as usize;
    let free: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let mut out = String::from("x,y,z,re,im,abs\n");
    let mut rows = 0;
    for b in 0..block.dims[free[1]] {
        for a in 0..block.dims[free[0]] {
            let mut ijk = [0usize; 3];
            ijk[axis] = idx;
            ijk[free[0]] = a;
            ijk[free[1]] = b;
            let p = (ijk[2] * block.dims[1] + ijk[1]) * block.dims[0] + ijk[0];
            let z = block.values[p];
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{:?}",
                block.coord(0, ijk[0]),
                block.coord(1, ijk[1]),
                block.coord(2, ijk[2]),
                z.re,
                z.im,
                z.norm()
            )
            .expect("string write");
            rows += 1;
        }
    }
    fs::write(path, out)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::ci(1);
        let mut b = a.clone();
        b.output = Some("/tmp/elsewhere".into());
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.lambda = 7.0;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn slice_spec_parsing() {
        let s: SliceSpec = "z=0.25".parse().unwrap();
        assert_eq!(s, SliceSpec { axis: 2, coordinate: 0.25 });
        assert!("w=1".parse::<SliceSpec>().is_err());
        assert!("z".parse::<SliceSpec>().is_err());
        assert!("x=abc".parse::<SliceSpec>().is_err());
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let g = DomainSpec::default().with_resolution(5).grid().unwrap();
        let c = FieldContainer::from_volume("v", "h", &ComplexVolume::zeros(g));
        assert!(c.to_planes().is_err());
        assert!(c.to_multik().is_err());
        assert!(c.to_volume().is_ok());
    }
}
