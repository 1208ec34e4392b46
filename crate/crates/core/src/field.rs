//! Spectral vector fields and the linear algebra on them.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, WaveTable};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which norm to evaluate; all are computed through Parseval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NormKind {
    /// `|u|_2`.
    L2,
    /// `|grad u|_2`.
    H1dot,
    /// Dual of the homogeneous H^1 norm, `|(2 pi |xi|)^-1 u|_2` on mean-free fields.
    Hminus1,
    /// `max(L2, Hminus1)`.
    X,
}

/// A real, three-component vector field stored as Fourier-series coefficients.
///
/// Coefficients follow `u(x) = sum_k c(k) exp(2 pi i k.x / period)`; a real
/// field has `c(-k) = conj(c(k))` and the mean mode is kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    lattice: Lattice,
    comps: [Vec<Complex64>; 3],
}

impl SpectralVectorField {
    pub fn zeros(lattice: Lattice) -> Self {
        let len = lattice.len();
        SpectralVectorField {
            lattice,
            comps: [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]],
        }
    }

    /// Build from raw component arrays, each of length `n^3`.
    pub fn from_components(lattice: Lattice, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != lattice.len()) {
            return Err(Error::Malformed(alloc::format!(
                "component length does not match n^3 = {}",
                lattice.len()
            )));
        }
        Ok(SpectralVectorField { lattice, comps })
    }

    /// Sets `c(k) = value` and `c(-k) = conj(value)`.
    pub fn set_mode(&mut self, k: [i64; 3], value: [Complex64; 3]) {
        let idx = self
            .lattice
            .index(k)
            .expect("frequency outside the lattice");
        let cj = self.lattice.conjugate_index(idx);
        for c in 0..3 {
            self.comps[c][idx] = value[c];
            self.comps[c][cj] = value[c].conj();
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<Complex64>; 3] {
        self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [Complex64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [Complex64; 3]) {
        for c in 0..3 {
            self.comps[c][idx] = v[c];
        }
    }

    pub fn ensure_same_lattice(&self, other: &Self) -> Result<()> {
        if self.lattice == other.lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for comp in &mut self.comps {
            for v in comp.iter_mut() {
                *v *= alpha;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.ensure_same_lattice(other)?;
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * alpha;
            }
        }
        Ok(())
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(-1.0, other)?;
        Ok(out)
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(1.0, other)?;
        Ok(out)
    }

    /// Multiply coefficient `idx` by `multiplier(idx)`.
    pub fn apply_multiplier(&mut self, mut multiplier: impl FnMut(usize) -> f64) {
        let len = self.lattice.len();
        for idx in 0..len {
            let m = multiplier(idx);
            for comp in &mut self.comps {
                comp[idx] *= m;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.lattice.len())
            .map(|i| mode_abs(&self.at(i)))
            .fold(0.0, f64::max)
    }

    /// Weighted Parseval sum `volume * sum_k w(k) |c(k)|^2`.
    pub fn weighted_energy(&self, table: &WaveTable, weight: impl Fn(usize, &WaveTable) -> f64) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.lattice.len() {
            let e = mode_abs2(&self.at(idx));
            if e != 0.0 {
                acc += weight(idx, table) * e;
            }
        }
        acc * self.lattice.volume()
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        let table = self.lattice.table();
        self.norm_with(&table, kind)
    }

    /// [`norm`](Self::norm) with a precomputed wave table.
    pub fn norm_with(&self, table: &WaveTable, kind: NormKind) -> f64 {
        match kind {
            NormKind::L2 => libm::sqrt(self.weighted_energy(table, |_, _| 1.0)),
            NormKind::H1dot => libm::sqrt(self.weighted_energy(table, |i, t| t.lap[i])),
            NormKind::Hminus1 => libm::sqrt(self.weighted_energy(table, |i, t| {
                if t.k2[i] == 0 {
                    0.0
                } else {
                    1.0 / t.lap[i]
                }
            })),
            NormKind::X => {
                let a = self.norm_with(table, NormKind::L2);
                let b = self.norm_with(table, NormKind::Hminus1);
                a.max(b)
            }
        }
    }

    /// Real Parseval pairing `int u . v dx`.
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.ensure_same_lattice(other)?;
        let mut acc = 0.0;
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for (x, y) in a.iter().zip(b) {
                acc += x.re * y.re + x.im * y.im;
            }
        }
        Ok(acc * self.lattice.volume())
    }

    /// Leray projection `(I - k k^T / |k|^2)` mode by mode; the mean mode is set to zero.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        out.leray_project_in_place();
        out
    }

    pub fn leray_project_in_place(&mut self) {
        let lattice = self.lattice;
        for idx in 0..lattice.len() {
            let k = lattice.k(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0 {
                self.set(idx, [ZERO; 3]);
                continue;
            }
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let v = self.at(idx);
            let dot = v[0] * kf[0] + v[1] * kf[1] + v[2] * kf[2];
            let s = dot / k2 as f64;
            self.set(idx, [v[0] - s * kf[0], v[1] - s * kf[1], v[2] - s * kf[2]]);
        }
    }

    /// `max_k |k.c(k)|/|k|` over `max_k |c(k)|`; zero for the zero field.
    pub fn divergence_ratio(&self) -> f64 {
        let lattice = self.lattice;
        let mut div: f64 = 0.0;
        let mut mag: f64 = 0.0;
        for idx in 0..lattice.len() {
            let v = self.at(idx);
            mag = mag.max(mode_abs(&v));
            let k = lattice.k(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0 {
                continue;
            }
            let d = v[0] * k[0] as f64 + v[1] * k[1] as f64 + v[2] * k[2] as f64;
            div = div.max(d.norm() / libm::sqrt(k2 as f64));
        }
        if mag == 0.0 {
            0.0
        } else {
            div / mag
        }
    }

    /// `max_k |c(-k) - conj(c(k))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let lattice = self.lattice;
        let mag = self.max_abs();
        if mag == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for idx in 0..lattice.len() {
            let cj = lattice.conjugate_index(idx);
            for c in 0..3 {
                worst = worst.max((self.comps[c][cj] - self.comps[c][idx].conj()).norm());
            }
        }
        worst / mag
    }

    /// Coefficients of the mean mode.
    pub fn mean(&self) -> [Complex64; 3] {
        self.at(0)
    }

    /// Zero every mode outside the dealias shell (and the mean).
    pub fn truncate(&mut self, table: &WaveTable) {
        for idx in 0..self.lattice.len() {
            if !table.retained[idx] {
                self.set(idx, [ZERO; 3]);
            }
        }
    }

    /// Zero the modes outside the dealias shell and Leray-project the rest in one pass.
    pub fn truncate_project(&mut self, table: &WaveTable) {
        let [c0, c1, c2] = &mut self.comps;
        for idx in 0..c0.len() {
            if !table.retained[idx] {
                c0[idx] = ZERO;
                c1[idx] = ZERO;
                c2[idx] = ZERO;
                continue;
            }
            let g = table.grad[idx];
            let dot = c0[idx] * g[0] + c1[idx] * g[1] + c2[idx] * g[2];
            let s = dot / table.lap[idx];
            c0[idx] -= s * g[0];
            c1[idx] -= s * g[1];
            c2[idx] -= s * g[2];
        }
    }

    /// Energy `volume * sum |c|^2` grouped by integer squared radius. Index `s`
    /// of the result holds shell `|k|^2 = s`.
    pub fn shell_energies(&self) -> Vec<f64> {
        let lattice = self.lattice;
        let mut out = vec![0.0; lattice.max_k2() as usize + 1];
        for idx in 0..lattice.len() {
            out[lattice.k2(idx) as usize] += mode_abs2(&self.at(idx));
        }
        let vol = lattice.volume();
        for v in &mut out {
            *v *= vol;
        }
        out
    }
}

#[inline]
pub(crate) fn mode_abs2(v: &[Complex64; 3]) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()
}

#[inline]
pub(crate) fn mode_abs(v: &[Complex64; 3]) -> f64 {
    libm::sqrt(mode_abs2(v))
}

/// Shell-resolved real pairing `volume * sum_{|k|^2 = s} Re(a(k) . conj(b(k)))`.
pub fn shell_pairing(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<Vec<f64>> {
    a.ensure_same_lattice(b)?;
    let lattice = *a.lattice();
    let mut out = vec![0.0; lattice.max_k2() as usize + 1];
    for idx in 0..lattice.len() {
        let x = a.at(idx);
        let y = b.at(idx);
        let p: f64 = (0..3).map(|c| x[c].re * y[c].re + x[c].im * y[c].im).sum();
        out[lattice.k2(idx) as usize] += p;
    }
    let vol = lattice.volume();
    for v in &mut out {
        *v *= vol;
    }
    Ok(out)
}
