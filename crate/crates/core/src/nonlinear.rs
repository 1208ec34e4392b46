//! Pseudo-spectral evaluation of the projected advection term `P(a . grad b)`.
//!
//! Real fields are transformed two at a time: the synthesis of `A + iB` for
//! Hermitian `A`, `B` is `a + ib`, and the analysis of `p + iq` splits back
//! into `P`, `Q` through `Z(k)` and `conj(Z(-k))`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::Result;
use crate::fft::Fft3d;
use crate::field::SpectralVectorField;
use crate::lattice::{Lattice, WaveTable};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Transform workspace bound to one lattice. Not shared between threads.
#[derive(Debug, Clone)]
pub struct Transformer {
    lattice: Lattice,
    table: WaveTable,
    fft: Fft3d,
    buf: Vec<Complex64>,
    conj: Vec<usize>,
}

/// A velocity field sampled on the physical grid.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub comps: [Vec<f64>; 3],
}

impl PhysicalField {
    /// `max_x |u(x)|`.
    pub fn max_speed(&self) -> f64 {
        let [a, b, c] = &self.comps;
        let mut m: f64 = 0.0;
        for i in 0..a.len() {
            m = m.max(a[i] * a[i] + b[i] * b[i] + c[i] * c[i]);
        }
        libm::sqrt(m)
    }
}

impl Transformer {
    pub fn new(lattice: &Lattice) -> Self {
        Transformer {
            lattice: *lattice,
            table: lattice.table(),
            fft: Fft3d::new(lattice.n()),
            buf: vec![ZERO; lattice.len()],
            conj: (0..lattice.len()).map(|i| lattice.conjugate_index(i)).collect(),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn table(&self) -> &WaveTable {
        &self.table
    }

    /// Synthesize two Hermitian spectra at once; `b` may be absent.
    fn synthesize_pair(&mut self, a: &[Complex64], b: Option<&[Complex64]>) {
        match b {
            Some(b) => {
                for ((z, x), y) in self.buf.iter_mut().zip(a).zip(b) {
                    *z = x + I * y;
                }
            }
            None => self.buf.copy_from_slice(a),
        }
        self.fft.inverse(&mut self.buf);
    }

    /// Analyze two real arrays at once into `out_p` (and `out_q`).
    fn analyze_pair(&mut self, p: &[f64], q: Option<&[f64]>, out_p: &mut [Complex64], out_q: Option<&mut [Complex64]>) {
        match q {
            Some(q) => {
                for ((z, x), y) in self.buf.iter_mut().zip(p).zip(q) {
                    *z = Complex64::new(*x, *y);
                }
            }
            None => {
                for (z, x) in self.buf.iter_mut().zip(p) {
                    *z = Complex64::new(*x, 0.0);
                }
            }
        }
        self.fft.forward(&mut self.buf);
        match out_q {
            Some(out_q) => {
                for idx in 0..self.buf.len() {
                    let z = self.buf[idx];
                    let zc = self.buf[self.conj[idx]].conj();
                    out_p[idx] = (z + zc) * 0.5;
                    out_q[idx] = (z - zc) * Complex64::new(0.0, -0.5);
                }
            }
            None => {
                for idx in 0..self.buf.len() {
                    let z = self.buf[idx];
                    let zc = self.buf[self.conj[idx]].conj();
                    out_p[idx] = (z + zc) * 0.5;
                }
            }
        }
    }

    pub fn to_physical(&mut self, u: &SpectralVectorField) -> PhysicalField {
        let len = self.lattice.len();
        let mut comps = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        self.synthesize_pair(u.component(0), Some(u.component(1)));
        for (i, z) in self.buf.iter().enumerate() {
            comps[0][i] = z.re;
            comps[1][i] = z.im;
        }
        self.synthesize_pair(u.component(2), None);
        for (i, z) in self.buf.iter().enumerate() {
            comps[2][i] = z.re;
        }
        PhysicalField { comps }
    }

    pub fn to_spectral(&mut self, u: &PhysicalField) -> SpectralVectorField {
        let len = self.lattice.len();
        let mut c0 = vec![ZERO; len];
        let mut c1 = vec![ZERO; len];
        let mut c2 = vec![ZERO; len];
        self.analyze_pair(&u.comps[0], Some(&u.comps[1]), &mut c0, Some(&mut c1));
        self.analyze_pair(&u.comps[2], None, &mut c2, None);
        SpectralVectorField::from_components(self.lattice, [c0, c1, c2]).expect("lengths match")
    }

    /// Unprojected, undealiased `a . grad b` on the physical grid.
    pub fn advection_physical(&mut self, a: &PhysicalField, b: &SpectralVectorField) -> PhysicalField {
        let len = self.lattice.len();
        let mut prod = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        // (d, j) pairs: derivative direction d of component j
        let pairs: [(usize, usize); 9] = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (2, 2)];
        for chunk in pairs.chunks(2) {
            let (d0, j0) = chunk[0];
            let second = chunk.get(1).copied();
            {
                let g = &self.table.grad;
                let b0 = b.component(j0);
                match second {
                    Some((d1, j1)) => {
                        let b1 = b.component(j1);
                        for idx in 0..len {
                            // i g_d0 b_j0 + i (i g_d1 b_j1)
                            self.buf[idx] = I * (g[idx][d0] * b0[idx]) - g[idx][d1] * b1[idx];
                        }
                    }
                    None => {
                        for idx in 0..len {
                            self.buf[idx] = I * (g[idx][d0] * b0[idx]);
                        }
                    }
                }
            }
            self.fft.inverse(&mut self.buf);
            let ad0 = &a.comps[d0];
            for idx in 0..len {
                prod[j0][idx] += ad0[idx] * self.buf[idx].re;
            }
            if let Some((d1, j1)) = second {
                let ad1 = &a.comps[d1];
                for idx in 0..len {
                    prod[j1][idx] += ad1[idx] * self.buf[idx].im;
                }
            }
        }
        PhysicalField { comps: prod }
    }

    /// All nine derivatives `d[j][i] = d_j b_i` on the physical grid.
    pub fn gradient_physical(&mut self, b: &SpectralVectorField) -> [[Vec<f64>; 3]; 3] {
        let len = self.lattice.len();
        let mut d: [[Vec<f64>; 3]; 3] = core::array::from_fn(|_| core::array::from_fn(|_| vec![0.0; len]));
        let pairs: [(usize, usize); 9] = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 2), (1, 2), (2, 2)];
        for chunk in pairs.chunks(2) {
            let (j0, i0) = chunk[0];
            let second = chunk.get(1).copied();
            let g = &self.table.grad;
            let b0 = b.component(i0);
            for idx in 0..len {
                self.buf[idx] = I * (g[idx][j0] * b0[idx]);
            }
            if let Some((j1, i1)) = second {
                let b1 = b.component(i1);
                for idx in 0..len {
                    self.buf[idx] -= g[idx][j1] * b1[idx];
                }
            }
            self.fft.inverse(&mut self.buf);
            for idx in 0..len {
                d[j0][i0][idx] = self.buf[idx].re;
            }
            if let Some((j1, i1)) = second {
                for idx in 0..len {
                    d[j1][i1][idx] = self.buf[idx].im;
                }
            }
        }
        d
    }

    /// `P(sum_j a_j M[j][i])` for a physical field `a` and matrix field `M`,
    /// dealiased and projected. With `M = grad b` and `transpose` unset this
    /// is `P(a . grad b)`; with `transpose` set it is `P((grad b)^T a)`.
    pub fn contract(&mut self, a: &PhysicalField, m: &[[Vec<f64>; 3]; 3], transpose: bool) -> SpectralVectorField {
        let len = self.lattice.len();
        let mut prod = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for (i, out) in prod.iter_mut().enumerate() {
            for j in 0..3 {
                let (aj, mji) = if transpose { (&a.comps[j], &m[i][j]) } else { (&a.comps[j], &m[j][i]) };
                for idx in 0..len {
                    out[idx] += aj[idx] * mji[idx];
                }
            }
        }
        let mut out = self.to_spectral(&PhysicalField { comps: prod });
        out.truncate_project(&self.table);
        out
    }

    /// `P(a . grad b)` dealiased by zeroing modes outside the cutoff shell.
    pub fn nonlinear_physical(&mut self, a: &PhysicalField, b: &SpectralVectorField) -> SpectralVectorField {
        let prod = self.advection_physical(a, b);
        let mut out = self.to_spectral(&prod);
        out.truncate_project(&self.table);
        out
    }

    pub fn nonlinear(&mut self, a: &SpectralVectorField, b: &SpectralVectorField) -> Result<SpectralVectorField> {
        a.ensure_same_lattice(b)?;
        let ap = self.to_physical(a);
        Ok(self.nonlinear_physical(&ap, b))
    }
}

/// `P(a . grad b)` with a one-off workspace.
pub fn nonlinear_term(a: &SpectralVectorField, b: &SpectralVectorField) -> Result<SpectralVectorField> {
    a.ensure_same_lattice(b)?;
    Transformer::new(a.lattice()).nonlinear(a, b)
}
