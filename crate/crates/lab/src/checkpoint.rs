//! Binary field checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 4 | magic `b"SSNS"` |
//! | 4 | 4 | format version, `u32` (currently 1) |
//! | 8 | 4 | `n`, `u32` |
//! | 12 | 8 | `period`, `f64` |
//! | 20 | `48 n^3` | coefficients |
//!
//! Coefficients are stored mode by mode in row-major order over the FFT
//! positions `(i0, i1, i2)`, position `i` holding frequency `i` for
//! `i <= n/2` and `i - n` otherwise. Each mode holds its three components
//! `x, y, z`, each as `(re, im)`. So component `c` of the mode at flat index
//! `idx = (i0 n + i1) n + i2` starts at byte `20 + 16 (3 idx + c)`.
//!
//! The dealias fraction is not part of the file; readers supply it.

use num_complex::Complex64;
use steadylab_core::{Lattice, SpectralVectorField};

pub const MAGIC: [u8; 4] = *b"SSNS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a field checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("truncated checkpoint: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("checkpoint holds non-finite coefficients")]
    NotFinite,
    #[error("invalid lattice in checkpoint: {0}")]
    Lattice(steadylab_core::Error),
}

pub fn encode(u: &SpectralVectorField) -> Vec<u8> {
    let l = u.lattice();
    let mut out = Vec::with_capacity(HEADER_LEN + 48 * l.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(l.n() as u32).to_le_bytes());
    out.extend_from_slice(&l.period().to_le_bytes());
    let comps = u.components();
    for idx in 0..l.len() {
        for c in comps {
            out.extend_from_slice(&c[idx].re.to_le_bytes());
            out.extend_from_slice(&c[idx].im.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], dealias: f64) -> Result<SpectralVectorField, CheckpointError> {
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Length {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let n = u32_at(8) as usize;
    let lattice = Lattice::new(n, f64_at(12), dealias).map_err(CheckpointError::Lattice)?;
    let expected = HEADER_LEN + 48 * lattice.len();
    if bytes.len() != expected {
        return Err(CheckpointError::Length {
            expected,
            found: bytes.len(),
        });
    }
    let mut comps: [Vec<Complex64>; 3] = std::array::from_fn(|_| Vec::with_capacity(lattice.len()));
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        if !(re.is_finite() && im.is_finite()) {
            return Err(CheckpointError::NotFinite);
        }
        comps[i % 3].push(Complex64::new(re, im));
    }
    SpectralVectorField::from_components(lattice, comps).map_err(CheckpointError::Lattice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use steadylab_core::{random_solenoidal, DEFAULT_DEALIAS};

    #[test]
    fn layout_of_one_mode() {
        let l = Lattice::new(4, 2.0, DEFAULT_DEALIAS).unwrap();
        let mut u = SpectralVectorField::zeros(l);
        let z = Complex64::new(0.0, 0.0);
        u.set_mode([0, 0, 1], [z, Complex64::new(1.5, -0.5), z]);
        let b = encode(&u);
        assert_eq!(&b[..4], b"SSNS");
        assert_eq!(b.len(), HEADER_LEN + 48 * 64);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(b[12..20].try_into().unwrap()), 2.0);
        // k = (0,0,1) sits at flat index 1, component y
        let at = HEADER_LEN + 16 * (3 + 1);
        assert_eq!(f64::from_le_bytes(b[at..at + 8].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(b[at + 8..at + 16].try_into().unwrap()), -0.5);
        // its conjugate k = (0,0,-1) at position 3
        let at = HEADER_LEN + 16 * (3 * 3 + 1);
        assert_eq!(f64::from_le_bytes(b[at + 8..at + 16].try_into().unwrap()), 0.5);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let l = Lattice::new(8, 1.0, DEFAULT_DEALIAS).unwrap();
        let u = random_solenoidal(&l, 3, 0.0, 3.0);
        let b = encode(&u);
        let back = decode(&b, DEFAULT_DEALIAS).unwrap();
        assert_eq!(back, u);
        assert_eq!(encode(&back), b);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let l = Lattice::new(4, 1.0, DEFAULT_DEALIAS).unwrap();
        let mut b = encode(&SpectralVectorField::zeros(l));
        assert!(matches!(decode(&b[..b.len() - 1], DEFAULT_DEALIAS), Err(CheckpointError::Length { .. })));
        b[4] = 9;
        assert_eq!(decode(&b, DEFAULT_DEALIAS), Err(CheckpointError::Version(9)));
        b[0] = b'X';
        assert_eq!(decode(&b, DEFAULT_DEALIAS), Err(CheckpointError::BadMagic));
        let mut b = encode(&SpectralVectorField::zeros(l));
        b[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(decode(&b, DEFAULT_DEALIAS), Err(CheckpointError::NotFinite));
    }
}
