use faer::Mat;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use monorec::dtn::BoundaryKernel;
use monorec::error::Error;
use monorec::forward::TorusKernel;
use monorec::io::{self, Container, Provenance};
use monorec::numerics::CircleGrid;
use monorec::potentials::{FrequencyField, MatrixField};
use monorec::rhp::{ReconstructionField, Window};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    // Bit patterns include signed zeros and subnormals.
    let f = prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), Just(-0.0), Just(f64::MIN_POSITIVE / 4.0)];
    prop::collection::vec((f.clone(), f).prop_map(|(a, b)| C64::new(a, b)), len)
}

fn bits(v: &[C64]) -> Vec<(u64, u64)> {
    v.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

fn roundtrip<T: Container>(x: &T) -> T {
    let bytes = io::to_bytes(x);
    let y: T = io::from_bytes(&bytes).unwrap();
    assert_eq!(io::to_bytes(&y), bytes);
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matrix_field_roundtrips_bit_exactly(n in 1usize..3, values in complex_vec(8 * 8 * 4)) {
        let values: Vec<C64> = values.into_iter().take(8 * 8 * n * n).collect();
        let v = MatrixField::new(n, 8, 1.5, 1.0, values.clone()).unwrap();
        prop_assert_eq!(bits(roundtrip(&v).values()), bits(&values));
    }

    #[test]
    fn torus_kernel_roundtrips_bit_exactly(values in complex_vec(8 * 8 * 4), e in 1.0f64..500.0) {
        let k = TorusKernel::new(CircleGrid::new(8).unwrap(), 2, e, values.clone()).unwrap();
        let back = roundtrip(&k);
        prop_assert_eq!(back.energy().to_bits(), e.to_bits());
        prop_assert_eq!(bits(back.values()), bits(&values));
    }

    #[test]
    fn boundary_kernel_roundtrips_bit_exactly(values in complex_vec(16 * 16)) {
        let k = BoundaryKernel::new(CircleGrid::new(16).unwrap(), 1, 100.0, values.clone()).unwrap();
        prop_assert_eq!(bits(roundtrip(&k).values()), bits(&values));
    }

    #[test]
    fn frequency_field_roundtrips_bit_exactly(values in complex_vec(8 * 8), h in 0.01f64..2.0) {
        let f = FrequencyField::new(1, 8, h, values.clone()).unwrap();
        let back = roundtrip(&f);
        prop_assert_eq!(back.spacing().to_bits(), h.to_bits());
        prop_assert_eq!(bits(back.values()), bits(&values));
    }

    #[test]
    fn truncation_anywhere_is_reported(cut in 0usize..1000) {
        let v = MatrixField::zeros(2, 8, 1.5, 1.0).unwrap();
        let bytes = io::to_bytes(&v);
        let cut = cut % bytes.len();
        let err = io::from_bytes::<MatrixField>(&bytes[..cut]).unwrap_err();
        prop_assert!(matches!(err, Error::TruncatedFile { .. }), "{err:?}");
    }
}

fn sample_field() -> MatrixField {
    MatrixField::from_fn(2, 16, 1.5, 1.0, |x1, x2| Mat::from_fn(2, 2, |a, b| C64::new(x1 + a as f64, x2 * b as f64))).unwrap()
}

#[test]
fn reconstruction_field_roundtrips() {
    let w = Window::new(16, 1.5, 2, 1.2).unwrap();
    let vals: Vec<Mat<C64>> = w.indices().iter().map(|&(i, j)| Mat::from_fn(2, 2, |a, b| C64::new(i as f64, (j + a + b) as f64))).collect();
    let r = ReconstructionField::new(w, 2, 100.0, 64, "algo2", vals).unwrap();
    let back = roundtrip(&r);
    assert_eq!(back.source, "algo2");
    assert_eq!(back.window, r.window);
    for (a, b) in back.values().iter().zip(r.values()) {
        assert_eq!(a, b);
    }
}

#[test]
fn wrong_magic_is_bad_magic() {
    let mut bytes = io::to_bytes(&sample_field());
    bytes[..4].copy_from_slice(b"NOPE");
    assert!(matches!(io::from_bytes::<MatrixField>(&bytes), Err(Error::BadMagic { found, .. }) if &found == b"NOPE"));
    assert!(matches!(io::any_from_bytes(&bytes), Err(Error::BadMagic { .. })));
}

#[test]
fn other_variant_is_bad_magic() {
    let k = TorusKernel::zeros(CircleGrid::new(8).unwrap(), 1, 10.0);
    let err = io::from_bytes::<MatrixField>(&io::to_bytes(&k)).unwrap_err();
    assert!(matches!(err, Error::BadMagic { expected: "MCIP", .. }));
}

#[test]
fn future_version_is_version_mismatch() {
    let mut bytes = io::to_bytes(&sample_field());
    bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(io::from_bytes::<MatrixField>(&bytes), Err(Error::VersionMismatch { expected: 1, found: 7 })));
}

#[test]
fn three_failures_are_distinct_io_errors() {
    let bytes = io::to_bytes(&sample_field());
    let mut magic = bytes.clone();
    magic[0] = b'X';
    let mut version = bytes.clone();
    version[4] = 9;
    let errs = [
        io::from_bytes::<MatrixField>(&magic).unwrap_err(),
        io::from_bytes::<MatrixField>(&version).unwrap_err(),
        io::from_bytes::<MatrixField>(&bytes[..bytes.len() - 3]).unwrap_err(),
    ];
    let names: Vec<String> = errs.iter().map(|e| format!("{e:?}").split([' ', '{', '(']).next().unwrap().to_string()).collect();
    assert_eq!(names, ["BadMagic", "VersionMismatch", "TruncatedFile"]);
    assert!(errs.iter().all(|e| e.is_io() && e.exit_code() == 4));
}

#[test]
fn trailing_bytes_are_rejected() {
    let mut bytes = io::to_bytes(&sample_field());
    bytes.push(0);
    assert!(matches!(io::from_bytes::<MatrixField>(&bytes), Err(Error::InvalidParams(_))));
}

#[test]
fn save_writes_sidecar_with_matching_hash() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/v.mcip");
    let prov = Provenance { stage: "test".into(), config_hash: Some("abc".into()), extra: serde_json::Value::Null };
    let side = io::save(&sample_field(), &path, &prov).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(side.sha256, io::sha256_hex(&bytes));
    let stored: io::Sidecar = serde_json::from_slice(&std::fs::read(io::sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(stored, side);
    assert_eq!(stored.variant, "MCIP");
    let any = io::load_any(&path).unwrap();
    assert_eq!(any.variant(), "MCIP");
}

#[test]
fn csv_exports_have_one_row_per_entry() {
    let v = sample_field();
    let mut out = Vec::new();
    io::matrix_field_csv(&v, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 16 * 16 * 4);
    let k = TorusKernel::zeros(CircleGrid::new(8).unwrap(), 2, 10.0);
    let mut out = Vec::new();
    io::torus_kernel_csv(&k, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 1 + 8 * 8 * 4);
}
