//! Complex FFTs on cubic grids.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey kernel; any
//! other length falls back to a tabulated O(n^2) DFT. Both are exact up to
//! rounding and deterministic: the same input always produces the same bits.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
enum Kernel {
    Radix2 { bitrev: Vec<usize> },
    Dft,
}

/// One-dimensional transform of a fixed length.
#[derive(Debug, Clone)]
pub struct Fft1d {
    n: usize,
    /// `twiddles[j] = exp(-2 pi i j / n)`.
    twiddles: Vec<Complex64>,
    /// Conjugates of `twiddles`.
    twiddles_inv: Vec<Complex64>,
    kernel: Kernel,
}

impl Fft1d {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let twiddles: Vec<Complex64> = (0..n)
            .map(|j| {
                let theta = -2.0 * PI * j as f64 / n as f64;
                Complex64::new(libm::cos(theta), libm::sin(theta))
            })
            .collect();
        let twiddles_inv = twiddles.iter().map(|w| w.conj()).collect();
        let kernel = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            let bitrev = (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect();
            Kernel::Radix2 { bitrev }
        } else {
            Kernel::Dft
        };
        Fft1d {
            n,
            twiddles,
            twiddles_inv,
            kernel,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn table(&self, inverse: bool) -> &[Complex64] {
        if inverse {
            &self.twiddles_inv
        } else {
            &self.twiddles
        }
    }

    /// Unnormalized transform with kernel `exp(-2 pi i jk/n)` (`inverse` flips the sign).
    /// `scratch` must hold at least `n` values.
    pub fn process(&self, data: &mut [Complex64], scratch: &mut [Complex64], inverse: bool) {
        self.process_blocks(data, 1, scratch, inverse);
    }

    /// Transform `n` elements that are themselves contiguous blocks of `b`
    /// values: element `j` is `data[j*b..(j+1)*b]`, and every block position
    /// is transformed independently. `scratch` must hold at least `n * b` values.
    pub fn process_blocks(&self, data: &mut [Complex64], b: usize, scratch: &mut [Complex64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * b);
        let tw = self.table(inverse);
        match &self.kernel {
            Kernel::Radix2 { bitrev } => {
                for i in 0..n {
                    let j = bitrev[i];
                    if i < j {
                        let (lo, hi) = data.split_at_mut(j * b);
                        lo[i * b..(i + 1) * b].swap_with_slice(&mut hi[..b]);
                    }
                }
                let mut len = 2;
                while len <= n {
                    let half = len / 2;
                    let stride = n / len;
                    for start in (0..n).step_by(len) {
                        for j in 0..half {
                            let w = tw[j * stride];
                            let (lo, hi) = data.split_at_mut((start + j + half) * b);
                            let xa = &mut lo[(start + j) * b..(start + j + 1) * b];
                            let xb = &mut hi[..b];
                            if j == 0 {
                                for (a, c) in xa.iter_mut().zip(xb.iter_mut()) {
                                    let t = *c;
                                    *c = *a - t;
                                    *a += t;
                                }
                            } else {
                                for (a, c) in xa.iter_mut().zip(xb.iter_mut()) {
                                    let t = *c * w;
                                    *c = *a - t;
                                    *a += t;
                                }
                            }
                        }
                    }
                    len <<= 1;
                }
            }
            Kernel::Dft => {
                let out = &mut scratch[..n * b];
                for v in out.iter_mut() {
                    *v = Complex64::new(0.0, 0.0);
                }
                for k in 0..n {
                    let dst = &mut out[k * b..(k + 1) * b];
                    for j in 0..n {
                        let w = tw[(j * k) % n];
                        for (o, x) in dst.iter_mut().zip(&data[j * b..(j + 1) * b]) {
                            *o += x * w;
                        }
                    }
                }
                data.copy_from_slice(out);
            }
        }
    }
}

/// Three-dimensional transform on an `n^3` array stored row-major as `[x][y][z]`.
#[derive(Debug, Clone)]
pub struct Fft3d {
    line: Fft1d,
    scratch: Vec<Complex64>,
}

impl Fft3d {
    pub fn new(n: usize) -> Self {
        Fft3d {
            line: Fft1d::new(n),
            scratch: vec![Complex64::new(0.0, 0.0); n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.line.len()
    }

    /// Physical to spectral, normalized by `1/n^3` so that outputs are
    /// Fourier-series coefficients.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
        let n = self.n();
        let scale = 1.0 / (n * n * n) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Spectral to physical (unnormalized synthesis).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let n = self.n();
        assert_eq!(data.len(), n * n * n);
        // z lines are contiguous
        for line in data.chunks_exact_mut(n) {
            self.line.process(line, &mut self.scratch, inverse);
        }
        // y: per x-slab, elements are z rows of length n
        for slab in data.chunks_exact_mut(n * n) {
            self.line.process_blocks(slab, n, &mut self.scratch, inverse);
        }
        // x: elements are whole slabs
        self.line.process_blocks(data, n * n, &mut self.scratch, inverse);
    }
}
