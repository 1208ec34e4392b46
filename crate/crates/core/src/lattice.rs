//! The discrete frequency set of a periodic box.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Resolution, box period and dealiasing cutoff of a cubic periodic grid.
///
/// Integer frequencies run over `-n/2 < k_j <= n/2`; the continuous
/// wavenumber is `xi = k / period`. Storage order is the FFT order
/// `k = 0, 1, .., n/2, -n/2 + 1, .., -1` along each axis, row-major `[x][y][z]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lattice {
    n: usize,
    period: f64,
    dealias_fraction: f64,
}

pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;

impl Lattice {
    pub fn new(n: usize, period: f64, dealias_fraction: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::BadResolution(n));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::BadPeriod(period));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::BadDealias(dealias_fraction));
        }
        Ok(Lattice {
            n,
            period,
            dealias_fraction,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Number of lattice points, `n^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Box volume `period^3`; converts coefficient sums into integrals.
    pub fn volume(&self) -> f64 {
        self.period * self.period * self.period
    }

    pub fn grid_spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Dealiasing radius in integer-frequency units.
    pub fn cutoff(&self) -> f64 {
        self.dealias_fraction * (self.n / 2) as f64
    }

    /// Signed frequency of storage position `i` along one axis.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Storage position of signed frequency `k`, if it is on the lattice.
    #[inline]
    pub fn position(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k > half || k <= -half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Integer frequency vector at flat index `idx`.
    #[inline]
    pub fn k(&self, idx: usize) -> [i64; 3] {
        let n = self.n;
        [self.freq(idx / (n * n)), self.freq((idx / n) % n), self.freq(idx % n)]
    }

    #[inline]
    pub fn k2(&self, idx: usize) -> i64 {
        let [a, b, c] = self.k(idx);
        a * a + b * b + c * c
    }

    /// Flat index of an integer frequency.
    pub fn index(&self, k: [i64; 3]) -> Option<usize> {
        let n = self.n;
        Some((self.position(k[0])? * n + self.position(k[1])?) * n + self.position(k[2])?)
    }

    /// Flat index of `-k`. The Nyquist plane maps onto itself.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let neg = |i: usize| (n - i) % n;
        (neg(idx / (n * n)) * n + neg((idx / n) % n)) * n + neg(idx % n)
    }

    /// `|xi| = |k| / period` at integer squared radius `k2`.
    pub fn radius(&self, k2: i64) -> f64 {
        libm::sqrt(k2 as f64) / self.period
    }

    /// True when `|k|` lies inside the dealias shell.
    #[inline]
    pub fn retained_k2(&self, k2: i64) -> bool {
        let c = self.cutoff();
        (k2 as f64) <= c * c * (1.0 + 1e-12)
    }

    /// Distinct squared integer radii inside the dealias shell, ascending, excluding 0.
    pub fn shells(&self) -> Vec<i64> {
        let mut seen: Vec<i64> = (0..self.len())
            .map(|i| self.k2(i))
            .filter(|&k2| k2 > 0 && self.retained_k2(k2))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// Largest squared integer radius on the lattice.
    pub fn max_k2(&self) -> i64 {
        let h = (self.n / 2) as i64;
        3 * h * h
    }

    pub fn table(&self) -> WaveTable {
        WaveTable::new(self)
    }
}

/// Per-index wavenumber data, precomputed for inner loops.
#[derive(Debug, Clone)]
pub struct WaveTable {
    /// Gradient symbol `2 pi xi` per index.
    pub grad: Vec<[f64; 3]>,
    /// Squared integer radius per index.
    pub k2: Vec<i64>,
    /// `4 pi^2 |xi|^2`, the symbol of `-Laplacian`.
    pub lap: Vec<f64>,
    /// Inside the dealias shell and not the mean mode.
    pub retained: Vec<bool>,
}

impl WaveTable {
    pub fn new(lattice: &Lattice) -> Self {
        let len = lattice.len();
        let mut grad = Vec::with_capacity(len);
        let mut k2 = Vec::with_capacity(len);
        let mut lap = Vec::with_capacity(len);
        let mut retained = Vec::with_capacity(len);
        let s = 2.0 * PI / lattice.period();
        for idx in 0..len {
            let k = lattice.k(idx);
            let g = [s * k[0] as f64, s * k[1] as f64, s * k[2] as f64];
            let q = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            grad.push(g);
            k2.push(q);
            lap.push(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
            retained.push(q > 0 && lattice.retained_k2(q));
        }
        WaveTable {
            grad,
            k2,
            lap,
            retained,
        }
    }
}
