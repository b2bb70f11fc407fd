//! On-disk artifact formats: binary spectral-field files, CSV tables with
//! full double precision, JSON documents, and SHA-256 checksums. All
//! writers go through a temp-file + rename so partially written artifacts
//! never appear under their final name.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::lattice::LatticeSpec;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

/// File magic for the binary field format.
pub const FIELD_MAGIC: &[u8; 6] = b"NPEF1\0";
/// Norm-convention tag stored in every field file: all Sobolev norms carry
/// the (2pi)^3 volume factor.
pub const VOLUME_TAG: &[u8; 8] = b"vol2pi3\0";

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialize a spectral field: magic, N, K (u64 LE), volume tag, then
/// 3 (2K+1)^3 coefficients as little-endian (re, im) f64 pairs in the
/// lexicographic mode order, component-interleaved.
pub fn field_to_bytes(field: &SpectralField) -> Vec<u8> {
    let lat = field.lattice();
    let mut out = Vec::with_capacity(6 + 16 + 8 + field.coeffs().len() * 16);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(lat.n as u64).to_le_bytes());
    out.extend_from_slice(&(lat.k as u64).to_le_bytes());
    out.extend_from_slice(VOLUME_TAG);
    for c in field.coeffs() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn write_field(path: &Path, field: &SpectralField) -> Result<()> {
    write_atomic(path, &field_to_bytes(field))
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<SpectralField> {
    let bad = |msg: &str| Error::Config(format!("field file: {msg}"));
    if bytes.len() < 6 + 16 + 8 {
        return Err(bad("truncated header"));
    }
    if &bytes[..6] != FIELD_MAGIC {
        return Err(bad("bad magic"));
    }
    let n = u64::from_le_bytes(bytes[6..14].try_into().unwrap()) as usize;
    let k = u64::from_le_bytes(bytes[14..22].try_into().unwrap()) as usize;
    if &bytes[22..30] != VOLUME_TAG {
        return Err(bad("unknown norm-convention tag"));
    }
    let lattice = LatticeSpec::new(n, k)?;
    let count = 3 * lattice.mode_count();
    let body = &bytes[30..];
    if body.len() != count * 16 {
        return Err(bad(&format!(
            "expected {} coefficient bytes, found {}",
            count * 16,
            body.len()
        )));
    }
    let coeffs = (0..count)
        .map(|i| {
            let re = f64::from_le_bytes(body[16 * i..16 * i + 8].try_into().unwrap());
            let im = f64::from_le_bytes(body[16 * i + 8..16 * i + 16].try_into().unwrap());
            num_complex::Complex64::new(re, im)
        })
        .collect();
    SpectralField::from_coeffs(lattice, coeffs)
}

pub fn read_field(path: &Path) -> Result<SpectralField> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    field_from_bytes(&bytes)
}

/// Full-precision float formatting for CSV: 17 significant digits, so a
/// round-trip through the text is exact.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Write a CSV table atomically. Cells are pre-formatted strings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut body = String::new();
    body.push_str(&header.join(","));
    body.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        body.push_str(&row.join(","));
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())
}

/// Write pretty-printed JSON atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path)?;
    let mut buf = [0u8; 65536];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::random_divfree_field;

    #[test]
    fn field_roundtrip_is_exact() {
        let lat = LatticeSpec::new(16, 4).unwrap();
        let f = random_divfree_field(lat, 99, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.field");
        write_field(&path, &f).unwrap();
        let g = read_field(&path).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let lat = LatticeSpec::new(16, 4).unwrap();
        let f = random_divfree_field(lat, 1, 0.5);
        let mut bytes = field_to_bytes(&f);
        bytes[0] ^= 0xff;
        assert!(field_from_bytes(&bytes).is_err());
        let mut bytes = field_to_bytes(&f);
        bytes.truncate(bytes.len() - 8);
        assert!(field_from_bytes(&bytes).is_err());
        let mut bytes = field_to_bytes(&f);
        bytes[25] ^= 0x01; // volume tag
        assert!(field_from_bytes(&bytes).is_err());
    }

    #[test]
    fn fmt_f64_roundtrips() {
        for &x in &[0.0, 1.0 / 3.0, -2.5e-308, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn csv_and_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["a", "b"], &[vec![fmt_f64(1.0), fmt_f64(2.0)]]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("a,b\n"));
        let h1 = sha256_file(&path).unwrap();
        assert_eq!(h1, sha256_bytes(text.as_bytes()));
        assert_eq!(h1.len(), 64);
    }
}
