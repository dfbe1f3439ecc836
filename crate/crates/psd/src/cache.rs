//! Binary cache of Piatetski-Shapiro prime sets.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `PSP1` |
//! | 8 | `gamma` as IEEE-754 bits |
//! | 8 | limit |
//! | 8 | count |
//! | 8 * count | primes, ascending |
//! | 8 | FNV-1a 64 of everything before it |
//!
//! A file holds the set over `(0, limit]`; weights are recomputed on load.

use std::env;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use psd_core::params::GammaExponent;
use psd_core::primes::{ps_primes_in, sieve_primes, PsPrimeSet};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PSP1";
pub const CACHE_DIR_ENV: &str = "PSD_CACHE_DIR";

const HEADER_LEN: usize = 4 + 8 + 8 + 8;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("cache {0}: not a PSP1 file")]
    BadMagic(String),
    #[error("cache {0}: checksum mismatch (truncated or corrupt)")]
    Checksum(String),
    #[error("cache {path}: holds gamma = {found}, requested {requested}")]
    GammaMismatch { path: String, found: f64, requested: f64 },
    #[error("cache {path}: holds limit {found}, requested {requested}")]
    LimitMismatch { path: String, found: u64, requested: u64 },
    #[error("cache {0}: malformed contents")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] psd_core::Error),
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn encode(set: &PsPrimeSet, limit: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * set.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&set.gamma().value().to_bits().to_le_bytes());
    out.extend_from_slice(&limit.to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for p in set.primes() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

fn word(bytes: &[u8], at: usize) -> u64 {
    let mut w = [0u8; 8];
    w.copy_from_slice(&bytes[at..at + 8]);
    u64::from_le_bytes(w)
}

/// Decode and check a cache image against the requested `gamma` and `limit`.
pub fn decode(bytes: &[u8], gamma: GammaExponent, limit: u64, name: &str) -> Result<PsPrimeSet, CacheError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CacheError::BadMagic(name.to_string()));
    }
    if bytes.len() < HEADER_LEN + 8 {
        return Err(CacheError::Checksum(name.to_string()));
    }
    let body = &bytes[..bytes.len() - 8];
    if fnv1a64(body) != word(bytes, bytes.len() - 8) {
        return Err(CacheError::Checksum(name.to_string()));
    }
    let found_gamma = f64::from_bits(word(bytes, 4));
    if found_gamma.to_bits() != gamma.value().to_bits() {
        return Err(CacheError::GammaMismatch {
            path: name.to_string(),
            found: found_gamma,
            requested: gamma.value(),
        });
    }
    let found_limit = word(bytes, 12);
    if found_limit != limit {
        return Err(CacheError::LimitMismatch { path: name.to_string(), found: found_limit, requested: limit });
    }
    let count = word(bytes, 20) as usize;
    if body.len() != HEADER_LEN + 8 * count {
        return Err(CacheError::Malformed(name.to_string()));
    }
    let primes: Vec<u64> = (0..count).map(|i| word(bytes, HEADER_LEN + 8 * i)).collect();
    if primes.windows(2).any(|w| w[0] >= w[1]) || primes.last().is_some_and(|&p| p > limit) {
        return Err(CacheError::Malformed(name.to_string()));
    }
    Ok(PsPrimeSet::from_primes(gamma, 0.0, limit as f64, primes))
}

pub fn cache_store(set: &PsPrimeSet, limit: u64, path: &Path) -> Result<(), CacheError> {
    let io_err = |source| CacheError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    // write then rename so a crash never leaves a half-written cache behind
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(set, limit)).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn cache_load(path: &Path, gamma: GammaExponent, limit: u64) -> Result<PsPrimeSet, CacheError> {
    let bytes = fs::read(path).map_err(|source| CacheError::Io { path: path.display().to_string(), source })?;
    decode(&bytes, gamma, limit, &path.display().to_string())
}

/// Default file name for a `(gamma, limit)` pair.
pub fn cache_file_name(gamma: GammaExponent, limit: u64) -> String {
    format!("ps-{:016x}-{limit}.psp1", gamma.value().to_bits())
}

/// `$PSD_CACHE_DIR/<name>` when the variable is set and non-empty.
pub fn env_cache_path(gamma: GammaExponent, limit: u64) -> Option<PathBuf> {
    env::var_os(CACHE_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join(cache_file_name(gamma, limit)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Stored,
    Disabled,
}

/// The set over `(0, limit]`, through the cache at `path` when one is given.
///
/// A missing file is built and stored; a corrupt or mismatched one is an error
/// rather than silently rebuilt.
pub fn ps_set_cached(
    gamma: GammaExponent,
    limit: u64,
    path: Option<&Path>,
) -> Result<(PsPrimeSet, CacheOutcome), CacheError> {
    if let Some(path) = path {
        if path.exists() {
            return Ok((cache_load(path, gamma, limit)?, CacheOutcome::Hit));
        }
    }
    let table = sieve_primes(limit.max(2))?;
    let set = ps_primes_in(0.0, limit as f64, gamma, &table)?;
    match path {
        Some(path) => {
            cache_store(&set, limit, path)?;
            Ok((set, CacheOutcome::Stored))
        }
        None => Ok((set, CacheOutcome::Disabled)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: f64) -> GammaExponent {
        GammaExponent::new(v).unwrap()
    }

    fn small_set() -> PsPrimeSet {
        let table = sieve_primes(50).unwrap();
        ps_primes_in(0.0, 50.0, g(0.9), &table).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn round_trip() {
        let set = small_set();
        let bytes = encode(&set, 50);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * set.len() + 8);
        let back = decode(&bytes, g(0.9), 50, "mem").unwrap();
        assert_eq!(back.primes().collect::<Vec<_>>(), set.primes().collect::<Vec<_>>());
        assert_eq!(back.entries(), set.entries());
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let bytes = encode(&small_set(), 50);
        for cut in [bytes.len() - 1, bytes.len() - 8, HEADER_LEN + 3, 6] {
            let err = decode(&bytes[..cut], g(0.9), 50, "mem").unwrap_err();
            assert!(matches!(err, CacheError::Checksum(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn flipped_bit_is_detected() {
        let mut bytes = encode(&small_set(), 50);
        bytes[HEADER_LEN + 2] ^= 1;
        assert!(matches!(decode(&bytes, g(0.9), 50, "mem"), Err(CacheError::Checksum(_))));
    }

    #[test]
    fn header_mismatches() {
        let bytes = encode(&small_set(), 50);
        assert!(matches!(decode(&bytes, g(0.91), 50, "mem"), Err(CacheError::GammaMismatch { .. })));
        assert!(matches!(decode(&bytes, g(0.9), 60, "mem"), Err(CacheError::LimitMismatch { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, g(0.9), 50, "mem"), Err(CacheError::BadMagic(_))));
    }
}
