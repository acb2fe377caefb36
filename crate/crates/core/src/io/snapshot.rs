//! Binary snapshots of spectral fields.
//!
//! Layout (little endian): magic `GMNS`, `u32` version, `u32` cutoff,
//! `u64` record count, then per stored mode three `i32` wave-vector
//! components followed by `Re, Im` of the three velocity components.

use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{CVec3, ModeSet, SpectralVelocity};

const MAGIC: &[u8; 4] = b"GMNS";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 4 + 8;
const RECORD: usize = 3 * 4 + 6 * 8;

pub fn snapshot_bytes(u: &SpectralVelocity) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + RECORD * u.coeffs().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&u.cutoff().to_le_bytes());
    out.extend_from_slice(&(u.coeffs().len() as u64).to_le_bytes());
    for (k, v) in u.iter() {
        for c in k.0 {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for c in v {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> [u8; N] {
    let out = bytes[*at..*at + N].try_into().expect("length checked");
    *at += N;
    out
}

/// Decodes a snapshot and validates every field invariant.
pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<SpectralVelocity> {
    if bytes.len() < HEADER {
        return Err(Error::Snapshot(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic number".into()));
    }
    let mut at = 4;
    let version = u32::from_le_bytes(take(bytes, &mut at));
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!(
            "version {version} is not the supported version {SNAPSHOT_VERSION}"
        )));
    }
    let cutoff = u32::from_le_bytes(take(bytes, &mut at));
    let count = u64::from_le_bytes(take(bytes, &mut at));
    if cutoff > 256 {
        return Err(Error::Snapshot(format!("cutoff {cutoff} is implausibly large")));
    }
    let modes = ModeSet::ball(cutoff);
    if count != modes.len() as u64 {
        return Err(Error::Snapshot(format!(
            "cutoff {cutoff} stores {} modes, header declares {count}",
            modes.len()
        )));
    }
    let expected = HEADER + RECORD * modes.len();
    if bytes.len() != expected {
        return Err(Error::Snapshot(format!(
            "length {} does not match the expected {expected} bytes",
            bytes.len()
        )));
    }
    let mut coeffs = Vec::with_capacity(modes.len());
    for &k in modes.modes() {
        let stored = [0; 3].map(|_| i32::from_le_bytes(take(bytes, &mut at)));
        if stored != k.0 {
            return Err(Error::Snapshot(format!("record for {k} holds wave vector {stored:?}")));
        }
        let mut v: CVec3 = [Complex64::new(0.0, 0.0); 3];
        for c in v.iter_mut() {
            let re = f64::from_le_bytes(take(bytes, &mut at));
            let im = f64::from_le_bytes(take(bytes, &mut at));
            *c = Complex64::new(re, im);
        }
        coeffs.push(v);
    }
    SpectralVelocity::from_stored(cutoff, coeffs)
}

pub fn save_snapshot(u: &SpectralVelocity, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot_bytes(u))
        .map_err(|source| Error::Io { path: Some(path.to_path_buf()), source })
}

pub fn load_snapshot(path: &Path) -> Result<SpectralVelocity> {
    let bytes =
        std::fs::read(path).map_err(|source| Error::Io { path: Some(path.to_path_buf()), source })?;
    snapshot_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::InitialCondition;

    fn field() -> SpectralVelocity {
        InitialCondition { kmax: 4.0, ..InitialCondition::default() }.build(4)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let u = field();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.gmns");
        save_snapshot(&u, &path).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(snapshot_bytes(&back), snapshot_bytes(&u));
        assert_eq!(back, u);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = snapshot_bytes(&field());
        let err = snapshot_from_bytes(&bytes[..bytes.len() - 5]).unwrap_err();
        assert!(matches!(err, Error::Snapshot(_)));
        assert!(matches!(snapshot_from_bytes(&bytes[..10]), Err(Error::Snapshot(_))));
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = snapshot_bytes(&field());
        bytes[4] = 7;
        assert!(snapshot_from_bytes(&bytes).unwrap_err().to_string().contains("version 7"));
        bytes[0] = b'X';
        assert!(snapshot_from_bytes(&bytes).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn compressible_record_is_rejected() {
        let u = field();
        let mut bytes = snapshot_bytes(&u);
        // Shift Re û_1 at a mode with k_1 ≠ 0, breaking k·û = 0.
        let i = u.modes().modes().iter().position(|k| k.0[0] != 0).unwrap();
        let at = HEADER + i * RECORD + 12;
        let re = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) + 1.0;
        bytes[at..at + 8].copy_from_slice(&re.to_le_bytes());
        let err = snapshot_from_bytes(&bytes).unwrap_err();
        assert!(matches!(err, Error::NotDivergenceFree { .. }), "{err}");
    }
}
