//! Binary containers, JSON sidecars and CSV exports.
//!
//! Layout: 4-byte magic, `u32` version, variant header, `u64` value count,
//! then `(re, im)` pairs; all little-endian. Floats are stored by bit
//! pattern so a roundtrip is exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::dtn::BoundaryKernel;
use crate::error::{Error, Result};
use crate::forward::TorusKernel;
use crate::numerics::CircleGrid;
use crate::potentials::{FrequencyField, MatrixField};
use crate::rhp::{ReconstructionField, Window};

pub const VERSION: u32 = 1;
const ALL_MAGICS: &str = "MCIP, MCTK, MCBK, MCRF, MCFF";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn values(&mut self, v: &[C64]) {
        self.0.extend_from_slice(&(v.len() as u64).to_le_bytes());
        for z in v {
            self.f64(z.re);
            self.f64(z.im);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::TruncatedFile { needed: self.pos.saturating_add(n), found: self.bytes.len() }),
        }
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(self.take(8)?.try_into().unwrap())))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::InvalidParams("container string is not UTF-8".into()))
    }

    fn values(&mut self) -> Result<Vec<C64>> {
        let n = u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize;
        let raw = self.take(n.checked_mul(16).ok_or(Error::TruncatedFile { needed: usize::MAX, found: self.bytes.len() })?)?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_bits(u64::from_le_bytes(c[..8].try_into().unwrap()));
                let im = f64::from_bits(u64::from_le_bytes(c[8..].try_into().unwrap()));
                C64::new(re, im)
            })
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::InvalidParams(format!("{} trailing bytes after payload", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

/// An object with a binary container representation.
pub trait Container: Sized {
    const MAGIC: &'static [u8; 4];
    const MAGIC_STR: &'static str;
    fn write_body(&self, w: &mut Vec<u8>);
    fn read_body(bytes: &[u8], pos: usize) -> Result<(Self, usize)>;
    /// Shape metadata for the sidecar.
    fn describe(&self) -> serde_json::Value;
}

fn body<F: FnOnce(&mut Writer)>(out: &mut Vec<u8>, f: F) {
    let mut w = Writer(std::mem::take(out));
    f(&mut w);
    *out = w.0;
}

fn read<T>(bytes: &[u8], pos: usize, f: impl FnOnce(&mut Reader) -> Result<T>) -> Result<(T, usize)> {
    let mut r = Reader { bytes, pos };
    let v = f(&mut r)?;
    Ok((v, r.pos))
}

fn matrices(values: &[C64], n: usize) -> Vec<Mat<C64>> {
    values.chunks_exact(n * n).map(|c| Mat::from_fn(n, n, |a, b| c[a * n + b])).collect()
}

impl Container for MatrixField {
    const MAGIC: &'static [u8; 4] = b"MCIP";
    const MAGIC_STR: &'static str = "MCIP";

    fn write_body(&self, out: &mut Vec<u8>) {
        body(out, |w| {
            w.u32(self.channels());
            w.u32(self.nx());
            w.f64(self.half_width());
            w.f64(self.support_radius());
            w.values(self.values());
        })
    }

    fn read_body(bytes: &[u8], pos: usize) -> Result<(Self, usize)> {
        let ((n, nx, l, rho, v), p) = read(bytes, pos, |r| Ok((r.u32()?, r.u32()?, r.f64()?, r.f64()?, r.values()?)))?;
        Ok((MatrixField::new(n, nx, l, rho, v)?, p))
    }

    fn describe(&self) -> serde_json::Value {
        json!({"channels": self.channels(), "nx": self.nx(), "half_width": self.half_width(), "support_radius": self.support_radius()})
    }
}

impl Container for TorusKernel {
    const MAGIC: &'static [u8; 4] = b"MCTK";
    const MAGIC_STR: &'static str = "MCTK";

    fn write_body(&self, out: &mut Vec<u8>) {
        body(out, |w| {
            w.u32(self.size());
            w.u32(self.channels());
            w.f64(self.energy());
            w.values(self.values());
        })
    }

    fn read_body(bytes: &[u8], pos: usize) -> Result<(Self, usize)> {
        let ((nt, n, e, v), p) = read(bytes, pos, |r| Ok((r.u32()?, r.u32()?, r.f64()?, r.values()?)))?;
        Ok((TorusKernel::new(CircleGrid::new(nt)?, n, e, v)?, p))
    }

    fn describe(&self) -> serde_json::Value {
        json!({"N": self.size(), "channels": self.channels(), "energy": self.energy()})
    }
}

impl Container for BoundaryKernel {
    const MAGIC: &'static [u8; 4] = b"MCBK";
    const MAGIC_STR: &'static str = "MCBK";

    fn write_body(&self, out: &mut Vec<u8>) {
        body(out, |w| {
            w.u32(self.size());
            w.u32(self.channels());
            w.f64(self.energy());
            w.values(self.values());
        })
    }

    fn read_body(bytes: &[u8], pos: usize) -> Result<(Self, usize)> {
        let ((nb, n, e, v), p) = read(bytes, pos, |r| Ok((r.u32()?, r.u32()?, r.f64()?, r.values()?)))?;
        Ok((BoundaryKernel::new(CircleGrid::new(nb)?, n, e, v)?, p))
    }

    fn describe(&self) -> serde_json::Value {
        json!({"N_b": self.size(), "channels": self.channels(), "energy": self.energy()})
    }
}

impl Container for ReconstructionField {
    const MAGIC: &'static [u8; 4] = b"MCRF";
    const MAGIC_STR: &'static str = "MCRF";

    fn write_body(&self, out: &mut Vec<u8>) {
        let flat: Vec<C64> = self.values().iter().flat_map(|m| (0..self.channels * self.channels).map(move |e| m[(e / self.channels, e % self.channels)])).collect();
        body(out, |w| {
            w.u32(self.window.nx);
            w.f64(self.window.half_width);
            w.u32(self.window.stride);
            w.f64(self.window.radius);
            w.u32(self.channels);
            w.f64(self.energy);
            w.u32(self.torus_size);
            w.str(&self.source);
            w.values(&flat);
        })
    }

    fn read_body(bytes: &[u8], pos: usize) -> Result<(Self, usize)> {
        let ((nx, l, stride, radius, n, e, nt, source, v), p) =
            read(bytes, pos, |r| Ok((r.u32()?, r.f64()?, r.u32()?, r.f64()?, r.u32()?, r.f64()?, r.u32()?, r.str()?, r.values()?)))?;
        if n == 0 || v.len() % (n * n) != 0 {
            return Err(Error::GridMismatch("reconstruction payload size".into()));
        }
        Ok((ReconstructionField::new(Window::new(nx, l, stride, radius)?, n, e, nt, &source, matrices(&v, n))?, p))
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "nx": self.window.nx, "half_width": self.window.half_width, "stride": self.window.stride,
            "radius": self.window.radius, "channels": self.channels, "energy": self.energy,
            "N": self.torus_size, "source": self.source, "points": self.values().len(),
        })
    }
}

impl Container for FrequencyField {
    const MAGIC: &'static [u8; 4] = b"MCFF";
    const MAGIC_STR: &'static str = "MCFF";

    fn write_body(&self, out: &mut Vec<u8>) {
        body(out, |w| {
            w.u32(self.channels());
            w.u32(self.size());
            w.f64(self.spacing());
            w.values(self.values());
        })
    }

    fn read_body(bytes: &[u8], pos: usize) -> Result<(Self, usize)> {
        let ((n, m, dp, v), p) = read(bytes, pos, |r| Ok((r.u32()?, r.u32()?, r.f64()?, r.values()?)))?;
        Ok((FrequencyField::new(n, m, dp, v)?, p))
    }

    fn describe(&self) -> serde_json::Value {
        json!({"channels": self.channels(), "size": self.size(), "spacing": self.spacing()})
    }
}

pub fn to_bytes<T: Container>(x: &T) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(T::MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    x.write_body(&mut out);
    out
}

fn header(bytes: &[u8]) -> Result<([u8; 4], u32)> {
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile { needed: 8, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    Ok((magic, version))
}

pub fn from_bytes<T: Container>(bytes: &[u8]) -> Result<T> {
    let (magic, version) = header(bytes)?;
    if &magic != T::MAGIC {
        return Err(Error::BadMagic { expected: T::MAGIC_STR, found: magic });
    }
    if version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, found: version });
    }
    let (x, pos) = T::read_body(bytes, 8)?;
    Reader { bytes, pos }.finish()?;
    Ok(x)
}

/// Provenance written next to every container as `<file>.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub config_hash: Option<String>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub variant: String,
    pub version: u32,
    pub producer: String,
    pub sha256: String,
    pub shape: serde_json::Value,
    pub provenance: Provenance,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the container and its sidecar.
pub fn save<T: Container>(x: &T, path: &Path, provenance: &Provenance) -> Result<Sidecar> {
    let bytes = to_bytes(x);
    let sidecar = Sidecar {
        variant: T::MAGIC_STR.into(),
        version: VERSION,
        producer: format!("monorec {}", env!("CARGO_PKG_VERSION")),
        sha256: sha256_hex(&bytes),
        shape: x.describe(),
        provenance: provenance.clone(),
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, &bytes)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(sidecar)
}

pub fn load<T: Container>(path: &Path) -> Result<T> {
    from_bytes(&fs::read(path)?)
}

/// Any container, dispatched on the magic.
#[derive(Debug, Clone)]
pub enum AnyContainer {
    Matrix(MatrixField),
    Torus(TorusKernel),
    Boundary(BoundaryKernel),
    Reconstruction(ReconstructionField),
    Frequency(FrequencyField),
}

impl AnyContainer {
    pub fn variant(&self) -> &'static str {
        match self {
            AnyContainer::Matrix(_) => MatrixField::MAGIC_STR,
            AnyContainer::Torus(_) => TorusKernel::MAGIC_STR,
            AnyContainer::Boundary(_) => BoundaryKernel::MAGIC_STR,
            AnyContainer::Reconstruction(_) => ReconstructionField::MAGIC_STR,
            AnyContainer::Frequency(_) => FrequencyField::MAGIC_STR,
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            AnyContainer::Matrix(x) => x.describe(),
            AnyContainer::Torus(x) => x.describe(),
            AnyContainer::Boundary(x) => x.describe(),
            AnyContainer::Reconstruction(x) => x.describe(),
            AnyContainer::Frequency(x) => x.describe(),
        }
    }
}

pub fn any_from_bytes(bytes: &[u8]) -> Result<AnyContainer> {
    let (magic, _) = header(bytes)?;
    Ok(match &magic {
        b"MCIP" => AnyContainer::Matrix(from_bytes(bytes)?),
        b"MCTK" => AnyContainer::Torus(from_bytes(bytes)?),
        b"MCBK" => AnyContainer::Boundary(from_bytes(bytes)?),
        b"MCRF" => AnyContainer::Reconstruction(from_bytes(bytes)?),
        b"MCFF" => AnyContainer::Frequency(from_bytes(bytes)?),
        _ => return Err(Error::BadMagic { expected: ALL_MAGICS, found: magic }),
    })
}

pub fn load_any(path: &Path) -> Result<AnyContainer> {
    any_from_bytes(&fs::read(path)?)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write_rows<W: Write>(out: W, head: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(head).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

/// `x1, x2, a, b, re, im` for every node and entry.
pub fn matrix_field_csv<W: Write>(v: &MatrixField, out: W) -> Result<()> {
    let n = v.channels();
    let rows = (0..v.nx()).flat_map(move |i1| (0..v.nx()).flat_map(move |i2| (0..n * n).map(move |e| (i1, i2, e / n, e % n))));
    write_rows(
        out,
        &["x1", "x2", "a", "b", "re", "im"],
        rows.map(|(i1, i2, a, b)| {
            let z = v.entry(i1, i2, a, b);
            vec![fmt(v.coord(i1)), fmt(v.coord(i2)), a.to_string(), b.to_string(), fmt(z.re), fmt(z.im)]
        }),
    )
}

/// `x1, x2, a, b, re, im` for every reconstruction point.
pub fn reconstruction_csv<W: Write>(r: &ReconstructionField, out: W) -> Result<()> {
    let n = r.channels;
    let pts = r.points();
    write_rows(
        out,
        &["x1", "x2", "a", "b", "re", "im"],
        pts.iter().zip(r.values()).flat_map(|(p, m)| {
            (0..n * n).map(move |e| {
                let (a, b) = (e / n, e % n);
                vec![fmt(p[0]), fmt(p[1]), a.to_string(), b.to_string(), fmt(m[(a, b)].re), fmt(m[(a, b)].im)]
            })
        }),
    )
}

fn pair_csv<W: Write>(size: usize, n: usize, grid: CircleGrid, entry: impl Fn(usize, usize, usize, usize) -> C64, out: W) -> Result<()> {
    let rows = (0..size).flat_map(move |i| (0..size).flat_map(move |j| (0..n * n).map(move |e| (i, j, e / n, e % n))));
    write_rows(
        out,
        &["i", "j", "theta_i", "theta_j", "a", "b", "re", "im"],
        rows.map(|(i, j, a, b)| {
            let z = entry(i, j, a, b);
            vec![i.to_string(), j.to_string(), fmt(grid.angle(i)), fmt(grid.angle(j)), a.to_string(), b.to_string(), fmt(z.re), fmt(z.im)]
        }),
    )
}

pub fn torus_kernel_csv<W: Write>(k: &TorusKernel, out: W) -> Result<()> {
    pair_csv(k.size(), k.channels(), k.grid(), |i, j, a, b| k.entry(i, j, a, b), out)
}

pub fn boundary_kernel_csv<W: Write>(k: &BoundaryKernel, out: W) -> Result<()> {
    pair_csv(k.size(), k.channels(), k.grid(), |i, j, a, b| k.entry(i, j, a, b), out)
}

pub fn any_csv<W: Write>(c: &AnyContainer, out: W) -> Result<()> {
    match c {
        AnyContainer::Matrix(x) => matrix_field_csv(x, out),
        AnyContainer::Torus(x) => torus_kernel_csv(x, out),
        AnyContainer::Boundary(x) => boundary_kernel_csv(x, out),
        AnyContainer::Reconstruction(x) => reconstruction_csv(x, out),
        AnyContainer::Frequency(x) => {
            let n = x.channels();
            let m = x.size();
            let rows = (0..m).flat_map(move |i1| (0..m).flat_map(move |i2| (0..n * n).map(move |e| (i1, i2, e / n, e % n))));
            write_rows(
                out,
                &["p1", "p2", "a", "b", "re", "im"],
                rows.map(|(i1, i2, a, b)| {
                    let p = x.frequency(i1, i2);
                    let z = x.entry(i1, i2, a, b);
                    vec![fmt(p[0]), fmt(p[1]), a.to_string(), b.to_string(), fmt(z.re), fmt(z.im)]
                }),
            )
        }
    }
}
