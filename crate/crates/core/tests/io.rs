//! Container round trips, hash checks, and the VTK and CSV export formats.

use std::fs;

use backscatter::experiment::ExperimentConfig;
use backscatter::grid::{build_dielectric, ComplexVolume, DomainSpec, InclusionSpec, MultiKVolume, WavenumberGrid};
use backscatter::io::{self, FieldContainer, SliceSpec, StructuredBlock};
use backscatter::pipeline::PlaneField;
use num_complex::Complex64;
use proptest::prelude::*;

type C = Complex64;

fn awkward(i: usize) -> C {
    // values whose decimal forms are long, plus signed zeros and subnormals
    let x = (i as f64 * 0.7316).sin() / 3.0;
    match i % 7 {
        0 => C::new(-0.0, f64::MIN_POSITIVE / 4.0),
        1 => C::new(1e300 * x, -1e-300 * x),
        _ => C::new(x, 1.0 / (1.0 + i as f64)),
    }
}

#[test]
fn volume_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let g = DomainSpec::default().with_resolution(9).grid().unwrap();
    let v = ComplexVolume::from_vec(g, (0..g.len()).map(awkward).collect()).unwrap();
    FieldContainer::from_volume("v", "h", &v).write(dir.path()).unwrap();
    let back = FieldContainer::read(dir.path()).unwrap().to_volume().unwrap();
    assert_eq!(back.grid, v.grid);
    for (a, b) in back.data.iter().zip(&v.data) {
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}

#[test]
fn multik_planes_and_dielectric_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DomainSpec::default().with_resolution(9);
    let g = spec.grid().unwrap();
    let kg = WavenumberGrid {
        k_min: 15.2,
        k_max: 16.2,
        nk: 3,
    };
    let q = MultiKVolume::from_vec(g, kg, (0..g.len() * 3).map(awkward).collect()).unwrap();
    FieldContainer::from_multik("q", "h", &q).write(&dir.path().join("q")).unwrap();
    assert_eq!(FieldContainer::read(&dir.path().join("q")).unwrap().to_multik().unwrap(), q);

    let lat = spec.lattice().unwrap();
    let planes: Vec<PlaneField> = kg
        .values()
        .into_iter()
        .map(|k| PlaneField::from_fn(lat, -8.0, k, |x, y| C::new(x * k, y)))
        .collect();
    FieldContainer::from_planes("f", "h", &planes).unwrap().write(&dir.path().join("f")).unwrap();
    assert_eq!(FieldContainer::read(&dir.path().join("f")).unwrap().to_planes().unwrap(), planes);

    let c = build_dielectric(&[InclusionSpec::new([0.0, 0.0, 1.0], 0.9, 3.0)], &spec).unwrap();
    FieldContainer::from_dielectric("c", "h", &c).write(&dir.path().join("c")).unwrap();
    let back = FieldContainer::read(&dir.path().join("c")).unwrap().to_dielectric().unwrap();
    assert_eq!(back.values, c.values);
}

#[test]
fn wrong_payload_size_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = DomainSpec::default().with_resolution(5).grid().unwrap();
    FieldContainer::from_volume("v", "h", &ComplexVolume::zeros(g)).write(dir.path()).unwrap();
    let payload = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "bin"))
        .unwrap();
    let mut bytes = fs::read(&payload).unwrap();
    bytes.truncate(bytes.len() - 16);
    fs::write(&payload, bytes).unwrap();
    assert!(FieldContainer::read(dir.path()).is_err());
}

#[test]
fn hash_mismatch_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let g = DomainSpec::default().with_resolution(5).grid().unwrap();
    FieldContainer::from_volume("v", "aaaa", &ComplexVolume::zeros(g)).write(dir.path()).unwrap();
    let err = FieldContainer::read_checked(dir.path(), "bbbb", false).unwrap_err();
    assert!(err.to_string().contains("--force"));
    assert!(FieldContainer::read_checked(dir.path(), "bbbb", true).is_ok());
    assert!(FieldContainer::read_checked(dir.path(), "aaaa", false).is_ok());
}

#[test]
fn config_hash_tracks_content() {
    let a = ExperimentConfig::ci(1);
    let mut b = a.clone();
    assert_eq!(io::config_hash(&a).unwrap(), io::config_hash(&b).unwrap());
    b.noise.seed += 1;
    assert_ne!(io::config_hash(&a).unwrap(), io::config_hash(&b).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    io::write_config(&path, &a).unwrap();
    assert_eq!(io::read_config(&path).unwrap(), a);
    fs::write(&path, "{ not json").unwrap();
    assert!(io::read_config(&path).unwrap_err().is_config());
}

fn dielectric_block() -> StructuredBlock {
    let spec = DomainSpec::default();
    let c = build_dielectric(&[InclusionSpec::new([0.0, 0.0, 0.0], 0.3, 3.0)], &spec).unwrap();
    StructuredBlock::from_container(&FieldContainer::from_dielectric("c", "h", &c), 0).unwrap()
}

#[test]
fn vtk_header_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.vtk");
    let block = dielectric_block();
    io::write_vtk(&path, &block, "c").unwrap();
    let bytes = fs::read(&path).unwrap();
    let mut lines = bytes.split(|&b| b == b'\n');
    let mut next = || String::from_utf8(lines.next().unwrap().to_vec()).unwrap();
    assert_eq!(next(), "# vtk DataFile Version 3.0");
    assert!(next().starts_with('c'));
    assert_eq!(next(), "BINARY");
    assert_eq!(next(), "DATASET STRUCTURED_POINTS");
    assert_eq!(next(), "DIMENSIONS 51 51 51");
    let origin: Vec<f64> = next().strip_prefix("ORIGIN ").unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
    assert_eq!(origin, vec![-3.0, -3.0, -0.5]);
    let spacing: Vec<f64> = next().strip_prefix("SPACING ").unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
    assert!((spacing[0] - 0.12).abs() < 1e-15 && (spacing[2] - 0.1).abs() < 1e-15);
    let n = 51 * 51 * 51;
    assert_eq!(next(), format!("POINT_DATA {n}"));
    assert_eq!(next(), "SCALARS real double 1");
    assert_eq!(next(), "LOOKUP_TABLE default");

    // first array: big-endian doubles equal to the field
    let header_len = bytes.windows(21).position(|w| w == b"LOOKUP_TABLE default\n").unwrap() + 21;
    let payload = &bytes[header_len..header_len + 8 * n];
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        assert_eq!(f64::from_be_bytes(chunk.try_into().unwrap()), block.values[i].re);
    }
    let text = String::from_utf8_lossy(&bytes);
    assert!(text.contains("SCALARS imag double 1"));
    assert!(text.contains("SCALARS abs double 1"));
}

#[test]
fn csv_slice_has_one_row_per_node_and_reads_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let block = dielectric_block();
    let rows = io::write_csv_slice(&path, &block, "z=0".parse().unwrap()).unwrap();
    assert_eq!(rows, 51 * 51);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z,re,im,abs"));
    let l = 5; // z = -0.5 + 5·0.1
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (j, s) = (i % 51, i / 51);
        let v = block.values[(l * 51 + s) * 51 + j];
        assert_eq!(f[3], v.re);
        assert_eq!(f[4], v.im);
        assert_eq!(f[0], block.origin[0] + j as f64 * block.spacing[0]);
        assert!(f[2].abs() < 1e-12);
        count += 1;
    }
    assert_eq!(count, 51 * 51);
}

#[test]
fn slice_axes_and_bad_specs() {
    assert_eq!("x=0.5".parse::<SliceSpec>().unwrap(), SliceSpec { axis: 0, coordinate: 0.5 });
    assert!("w=1".parse::<SliceSpec>().is_err());
    assert!("z".parse::<SliceSpec>().is_err());
    assert!("z=abc".parse::<SliceSpec>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn arbitrary_values_survive_a_roundtrip(values in prop::collection::vec((any::<f64>(), any::<f64>()), 125)) {
        let dir = tempfile::tempdir().unwrap();
        let g = DomainSpec::default().with_resolution(5).grid().unwrap();
        let v = ComplexVolume::from_vec(g, values.iter().map(|&(a, b)| C::new(a, b)).collect()).unwrap();
        FieldContainer::from_volume("v", "h", &v).write(dir.path()).unwrap();
        let back = FieldContainer::read(dir.path()).unwrap().to_volume().unwrap();
        for (a, b) in back.data.iter().zip(&v.data) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
