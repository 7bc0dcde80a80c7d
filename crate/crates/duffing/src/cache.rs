//! On-disk cache of sampled special functions.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "DUFFSPF1"
//! 8       4     format version (u32, currently 1)
//! 12      4     n (u32)
//! 16      8     tolerance (f64)
//! 24      8     period T* (f64)
//! 32      8     node count (u64)
//! 40      16k   k pairs (C, S) as f64
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use duffing_core::SpecialFunctions;

use crate::AppError;

const MAGIC: &[u8; 8] = b"DUFFSPF1";
const VERSION: u32 = 1;
const HEADER: usize = 40;

pub fn encode(sf: &SpecialFunctions, tol: f64) -> Vec<u8> {
    let values = sf.node_values();
    let mut out = Vec::with_capacity(HEADER + 16 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&sf.n().to_le_bytes());
    out.extend_from_slice(&tol.to_le_bytes());
    out.extend_from_slice(&sf.period().to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for [c, s] in values {
        out.extend_from_slice(&c.to_le_bytes());
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Decode a cache image, checking that it was written for `(n, tol)`.
pub fn decode(bytes: &[u8], n: u32, tol: f64) -> Result<SpecialFunctions, AppError> {
    let bad = |what: &str| AppError::Validation(format!("special-function cache: {what}"));
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(bad("unsupported version"));
    }
    let file_n = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if file_n != n || f64_at(bytes, 16).to_bits() != tol.to_bits() {
        return Err(bad("key mismatch"));
    }
    let period = f64_at(bytes, 24);
    let count = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
    if bytes.len() != HEADER + 16 * count {
        return Err(bad("truncated"));
    }
    let values = (0..count).map(|k| [f64_at(bytes, HEADER + 16 * k), f64_at(bytes, HEADER + 16 * k + 8)]).collect();
    Ok(SpecialFunctions::from_samples(n, period, values)?)
}

pub fn cache_path(dir: &Path, n: u32, tol: f64) -> PathBuf {
    dir.join(format!("special_n{n}_tol{tol:e}.bin"))
}

/// Compute the special functions, going through `dir` when given. A corrupt
/// or mismatched cache file is recomputed and overwritten.
pub fn load_or_compute(dir: Option<&Path>, n: u32, tol: f64) -> Result<SpecialFunctions, AppError> {
    let Some(dir) = dir else {
        return Ok(SpecialFunctions::compute(n, tol)?);
    };
    let path = cache_path(dir, n, tol);
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(sf) = decode(&bytes, n, tol) {
            return Ok(sf);
        }
    }
    let sf = SpecialFunctions::compute(n, tol)?;
    fs::create_dir_all(dir)?;
    fs::write(&path, encode(&sf, tol))?;
    Ok(sf)
}
