//! KPS1 sample files.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "KPS1"
//! 4       4         T (u32 LE)
//! 8       4         D (u32 LE)
//! 12      4*T*D     f32 LE, frame-major; NaN marks a missing value
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const KPS_MAGIC: &[u8; 4] = b"KPS1";
const HEADER_LEN: usize = 12;

/// Serializes frames. Values are written bit-for-bit, NaN payloads included.
pub fn encode_sample(frames: ArrayView2<f32>) -> Vec<u8> {
    let (t, d) = frames.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t * d);
    out.extend_from_slice(KPS_MAGIC);
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for v in frames.iter() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

/// Parses a KPS1 buffer. `path` is only used in error messages.
pub fn decode_sample(bytes: &[u8], path: &Path) -> Result<Array2<f32>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            path: path.to_owned(),
            detail: format!("{} byte(s), shorter than the magic", bytes.len()),
        });
    }
    let magic = &bytes[..4];
    if magic != KPS_MAGIC {
        if &magic[..3] == b"KPS" {
            return Err(Error::Version {
                path: path.to_owned(),
                found: String::from_utf8_lossy(magic).into_owned(),
                expected: "KPS1".into(),
            });
        }
        return Err(Error::BadMagic {
            path: path.to_owned(),
            expected: "KPS1",
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_owned(),
            detail: "incomplete header".into(),
        });
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if d == 0 {
        return Err(Error::Malformed {
            path: path.to_owned(),
            detail: "feature dimension is 0".into(),
        });
    }
    let expected = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Malformed {
            path: path.to_owned(),
            detail: format!("header T={t} D={d} overflows"),
        })?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            path: path.to_owned(),
            detail: format!(
                "header claims T={t} D={d} ({expected} payload bytes), found {}",
                payload.len()
            ),
        });
    }
    if payload.len() > expected {
        return Err(Error::Malformed {
            path: path.to_owned(),
            detail: format!("{} trailing byte(s)", payload.len() - expected),
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(Array2::from_shape_vec((t, d), values).expect("length checked"))
}

pub fn write_sample(path: &Path, frames: ArrayView2<f32>) -> Result<()> {
    fs::write(path, encode_sample(frames)).map_err(|e| Error::io(path, e))
}

pub fn read_sample(path: &Path) -> Result<Array2<f32>> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_owned())
        } else {
            Error::io(path, e)
        }
    })?;
    decode_sample(&bytes, path)
}
