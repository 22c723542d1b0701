//! Little-endian field file.
//!
//! ```text
//! magic "FESD" | version u32 | dims 3 x u32 | origin 3 x f64 | resolution f64
//! | alpha beta d D (f64, all zero when the field has no camera) |
//! values f32 x N (x fastest) | gradients 3 x f32 x N
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FovParams, ScalarField3};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Vec3};

pub const FIELD_MAGIC: &[u8; 4] = b"FESD";
pub const FIELD_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 12 + 24 + 8 + 32;

/// Refuse grids beyond this many voxels (about 4.3 GB of payload).
const MAX_VOXELS: u64 = 1 << 28;

pub fn write_field<W: Write>(field: &ScalarField3, mut w: W) -> Result<()> {
    let spec = field.spec();
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(FIELD_MAGIC);
    header.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    for &d in &spec.dims {
        let d = u32::try_from(d).map_err(|_| Error::FieldFormat("dimension exceeds u32".into()))?;
        header.extend_from_slice(&d.to_le_bytes());
    }
    for a in 0..3 {
        header.extend_from_slice(&spec.origin[a].to_le_bytes());
    }
    header.extend_from_slice(&spec.resolution.to_le_bytes());
    let cam = field.fov().map_or([0.0; 4], |f| [f.alpha, f.beta, f.distance, f.depth]);
    for v in cam {
        header.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header)?;

    let mut buf = Vec::with_capacity(field.values().len() * 16);
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for g in field.gradients() {
        for c in g {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn save_field(field: &ScalarField3, path: impl AsRef<Path>) -> Result<()> {
    write_field(field, BufWriter::new(File::create(path)?))
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::FieldFormat("truncated file".into()));
    }
    let (head, rest) = buf.split_at(n);
    *buf = rest;
    Ok(head)
}

fn u32_at(buf: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(take(buf, 4)?.try_into().unwrap()))
}

fn f64_at(buf: &mut &[u8]) -> Result<f64> {
    Ok(f64::from_le_bytes(take(buf, 8)?.try_into().unwrap()))
}

pub fn read_field<R: Read>(mut r: R) -> Result<ScalarField3> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut buf = bytes.as_slice();

    if take(&mut buf, 4)? != FIELD_MAGIC {
        return Err(Error::FieldFormat("bad magic".into()));
    }
    let version = u32_at(&mut buf)?;
    if version != FIELD_VERSION {
        return Err(Error::FieldFormat(format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    let mut count: u64 = 1;
    for d in &mut dims {
        let v = u32_at(&mut buf)?;
        count = count
            .checked_mul(v as u64)
            .filter(|&c| c <= MAX_VOXELS)
            .ok_or_else(|| Error::FieldFormat("dimension overflow".into()))?;
        *d = v as usize;
    }
    let origin = Vec3::new(f64_at(&mut buf)?, f64_at(&mut buf)?, f64_at(&mut buf)?);
    let resolution = f64_at(&mut buf)?;
    let cam = [f64_at(&mut buf)?, f64_at(&mut buf)?, f64_at(&mut buf)?, f64_at(&mut buf)?];
    let spec = GridSpec::new(origin, resolution, dims)
        .ok_or_else(|| Error::FieldFormat("invalid grid in header".into()))?;
    let fov = (cam != [0.0; 4]).then_some(FovParams {
        alpha: cam[0],
        beta: cam[1],
        distance: cam[2],
        depth: cam[3],
    });

    let n = count as usize;
    if buf.len() != n * 16 {
        return Err(Error::FieldFormat(if buf.len() < n * 16 {
            "truncated file".into()
        } else {
            "trailing bytes after payload".into()
        }));
    }
    let (vals, grads) = buf.split_at(n * 4);
    let values = vals
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let gradients = grads
        .chunks_exact(12)
        .map(|c| {
            std::array::from_fn(|k| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap()))
        })
        .collect();
    Ok(ScalarField3::from_parts(spec, fov, values, gradients))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<ScalarField3> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::super::{build_fov_esdf, build_robot_field, RobotShape};
    use super::*;

    fn small() -> ScalarField3 {
        build_fov_esdf(&FovParams::standard(), 0.2).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fesd");
        for field in [small(), build_robot_field(RobotShape::Sphere { radius: 0.3 }, 0.1, 0.05).unwrap()] {
            save_field(&field, &path).unwrap();
            let back = load_field(&path).unwrap();
            assert_eq!(back.spec(), field.spec());
            assert_eq!(back.fov(), field.fov());
            assert!(back.values().iter().zip(field.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(back
                .gradients()
                .iter()
                .zip(field.gradients())
                .all(|(a, b)| (0..3).all(|k| a[k].to_bits() == b[k].to_bits())));
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut bytes = Vec::new();
        write_field(&small(), &mut bytes).unwrap();
        for cut in [3, HEADER_LEN - 1, HEADER_LEN + 5, bytes.len() - 1] {
            let err = read_field(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::FieldFormat(_)), "{err}");
        }
    }

    #[test]
    fn wrong_magic_and_version_are_rejected() {
        let mut bytes = Vec::new();
        write_field(&small(), &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_field(bad.as_slice()).unwrap_err().to_string().contains("magic"));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(read_field(bad.as_slice()).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn huge_dimensions_are_rejected() {
        let mut bytes = Vec::new();
        write_field(&small(), &mut bytes).unwrap();
        for k in 0..3 {
            bytes[8 + 4 * k..12 + 4 * k].copy_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(read_field(bytes.as_slice()).unwrap_err().to_string().contains("overflow"));
    }
}
