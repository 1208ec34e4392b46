//! Seeded band-limited solenoidal fields.
//!
//! Every mode draws its coefficients from a ChaCha stream keyed by
//! `(seed, k)`, so the result does not depend on iteration order.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{NormKind, SpectralVectorField};
use crate::lattice::Lattice;

/// Band `[rho0, rho1]` (continuous wavenumber units), target X-norm and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForcingSpec {
    pub rho0: f64,
    pub rho1: f64,
    pub target_x_norm: f64,
    pub seed: u64,
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "forcing.rho0",
                reason: alloc::format!("must be positive (got {})", self.rho0),
            });
        }
        if !(self.rho1 > self.rho0 && self.rho1.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "forcing.rho1",
                reason: alloc::format!(
                    "band must satisfy rho0 < rho1 (got rho0 = {}, rho1 = {})",
                    self.rho0,
                    self.rho1
                ),
            });
        }
        if !(self.target_x_norm >= 0.0 && self.target_x_norm.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "forcing.target_x_norm",
                reason: alloc::format!("must be non-negative (got {})", self.target_x_norm),
            });
        }
        Ok(())
    }
}

fn in_band(radius: f64, lo: f64, hi: f64) -> bool {
    radius >= lo * (1.0 - 1e-12) && radius <= hi * (1.0 + 1e-12)
}

/// Stream id for an integer frequency; injective for |k_j| < 2^20.
fn stream_key(k: [i64; 3]) -> u64 {
    let off = 1i64 << 20;
    (((k[0] + off) as u64) << 42) | (((k[1] + off) as u64) << 21) | ((k[2] + off) as u64)
}

/// True for the representative of the pair `{k, -k}` whose first nonzero component is positive.
fn is_canonical(k: [i64; 3]) -> bool {
    k.iter().find(|&&c| c != 0).map_or(false, |&c| c > 0)
}

fn draw_mode(seed: u64, k: [i64; 3]) -> [Complex64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_key(k));
    let mut next = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for v in &mut out {
        let re = next();
        let im = next();
        *v = Complex64::new(re, im);
    }
    out
}

/// Projected Gaussian field supported on `lo <= |xi| <= hi` inside the dealias shell.
///
/// Unnormalized; returns the zero field when no mode qualifies.
pub fn random_solenoidal(lattice: &Lattice, seed: u64, lo: f64, hi: f64) -> SpectralVectorField {
    let mut u = SpectralVectorField::zeros(*lattice);
    for idx in 0..lattice.len() {
        let k = lattice.k(idx);
        let k2 = lattice.k2(idx);
        if k2 == 0 || !lattice.retained_k2(k2) || !is_canonical(k) {
            continue;
        }
        if !in_band(lattice.radius(k2), lo, hi) {
            continue;
        }
        // The Nyquist plane is outside every dealias shell, so `-k` is on the lattice.
        u.set_mode(k, draw_mode(seed, k));
    }
    u.leray_project_in_place();
    u
}

/// Band-pass forcing obeying the spectral-gap assumption, rescaled to `spec.target_x_norm`.
pub fn random_bandpass_forcing(lattice: &Lattice, spec: &ForcingSpec) -> Result<SpectralVectorField> {
    spec.validate()?;
    let shells = lattice.shells();
    let radii = shells.iter().map(|&s| lattice.radius(s));
    if !radii.clone().any(|r| in_band(r, spec.rho0, spec.rho1)) {
        let below = radii.clone().filter(|&r| r < spec.rho0).fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |a| a.max(r)))
        });
        let above = radii.filter(|&r| r > spec.rho1).fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |a| a.min(r)))
        });
        return Err(Error::EmptyBand {
            rho0: spec.rho0,
            rho1: spec.rho1,
            below,
            above,
        });
    }
    let mut f = random_solenoidal(lattice, spec.seed, spec.rho0, spec.rho1);
    if spec.target_x_norm == 0.0 {
        return Ok(SpectralVectorField::zeros(*lattice));
    }
    let x = f.norm(NormKind::X);
    f.scale(spec.target_x_norm / x);
    Ok(f)
}
