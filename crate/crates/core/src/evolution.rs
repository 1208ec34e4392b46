//! Time integration of the zero-data difference equation
//! `w_t + P(U . grad w) = nu Laplacian w - P(U . grad Phi)`, `w(0) = 0`,
//! and reconstruction of `int_0^inf v dt` for `v = w + Phi`.
//!
//! Stepping is exponential time differencing (ETD2RK): diffusion enters
//! through exact per-mode exponentials, the projected advection and source
//! through a two-stage explicit correction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{NormKind, SpectralVectorField};
use crate::lattice::{Lattice, WaveTable};
use crate::nonlinear::{PhysicalField, Transformer};
use crate::params::PhysicalParams;
use crate::semigroup::heat_evolve_with;

/// Safety factor in the step restriction.
pub const C_CFL: f64 = 0.5;

/// `C_CFL * min(dx / max|u|, dx^2 / nu)`.
pub fn cfl_limit(lattice: &Lattice, max_speed: f64, nu: f64) -> f64 {
    let dx = lattice.grid_spacing();
    let adv = if max_speed > 0.0 { dx / max_speed } else { f64::INFINITY };
    let diff = if nu > 0.0 { dx * dx / nu } else { f64::INFINITY };
    C_CFL * adv.min(diff)
}

fn check_cfl(lattice: &Lattice, max_speed: f64, nu: f64, dt: f64) -> Result<()> {
    let limit = cfl_limit(lattice, max_speed, nu);
    if dt > limit {
        return Err(Error::Cfl { dt, limit });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvolutionConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Stop once `|v|_2` falls to this level.
    pub tail_tolerance: f64,
    /// Record diagnostics every this many steps.
    pub snapshot_stride: usize,
    /// Keep a copy of `w` at every recorded sample.
    pub store_fields: bool,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "evolution.dt",
                reason: alloc::format!("must be positive (got {})", self.dt),
            });
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "evolution.horizon",
                reason: alloc::format!("must be at least dt (got {} < {})", self.horizon, self.dt),
            });
        }
        if !(self.tail_tolerance >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "evolution.tail_tolerance",
                reason: alloc::format!("must be non-negative (got {})", self.tail_tolerance),
            });
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "evolution.snapshot_stride",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Number of steps needed to reach the horizon.
    pub fn max_steps(&self) -> usize {
        libm::ceil(self.horizon / self.dt - 1e-9) as usize
    }
}

/// ETD2RK coefficients for one `(nu, dt)`, stored per lattice index.
#[derive(Debug, Clone)]
pub struct Etd2 {
    dt: f64,
    e: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
}

/// `(exp(-z), dt phi_1(-z), dt phi_2(-z))` for `z = lambda dt`.
fn etd_coefficients(z: f64, dt: f64) -> (f64, f64, f64) {
    if z < 1e-3 {
        let p1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        let p2 = 0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0;
        (libm::exp(-z), dt * p1, dt * p2)
    } else {
        let em1 = libm::expm1(-z);
        (em1 + 1.0, dt * (-em1) / z, dt * (em1 + z) / (z * z))
    }
}

impl Etd2 {
    pub fn new(table: &WaveTable, nu: f64, dt: f64) -> Self {
        let len = table.lap.len();
        let mut e = Vec::with_capacity(len);
        let mut phi1 = Vec::with_capacity(len);
        let mut phi2 = Vec::with_capacity(len);
        for &lap in &table.lap {
            let (a, b, c) = etd_coefficients(nu * lap * dt, dt);
            e.push(a);
            phi1.push(b);
            phi2.push(c);
        }
        Etd2 { dt, e, phi1, phi2 }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `w' = -nu(-Laplacian) w + F(w, t)` from `t` to `t + dt`.
    pub fn step<F>(&self, w: &SpectralVectorField, t: f64, mut rhs: F) -> Result<SpectralVectorField>
    where
        F: FnMut(&SpectralVectorField, f64) -> Result<SpectralVectorField>,
    {
        let fn0 = rhs(w, t)?;
        let mut a = w.clone();
        for c in 0..3 {
            let src = fn0.component(c);
            for (i, x) in a.component_mut(c).iter_mut().enumerate() {
                *x = *x * self.e[i] + src[i] * self.phi1[i];
            }
        }
        let fa = rhs(&a, t + self.dt)?;
        for c in 0..3 {
            let f0 = fn0.component(c);
            let f1 = fa.component(c);
            for (i, x) in a.component_mut(c).iter_mut().enumerate() {
                *x += (f1[i] - f0[i]) * self.phi2[i];
            }
        }
        Ok(a)
    }
}

/// One step of `w_t = nu Laplacian w - P(advect . grad w) + source` with
/// `source` held fixed over the step.
pub fn imex_step(
    w: &SpectralVectorField,
    advect: &SpectralVectorField,
    source: &SpectralVectorField,
    nu: f64,
    dt: f64,
) -> Result<SpectralVectorField> {
    w.ensure_same_lattice(advect)?;
    w.ensure_same_lattice(source)?;
    let lattice = *w.lattice();
    let mut tr = Transformer::new(&lattice);
    let ap = tr.to_physical(advect);
    check_cfl(&lattice, ap.max_speed(), nu, dt)?;
    let etd = Etd2::new(tr.table(), nu, dt);
    etd.step(w, 0.0, |x, _| {
        let mut out = tr.nonlinear_physical(&ap, x);
        out.scale(-1.0);
        out.add_scaled(1.0, source)?;
        Ok(out)
    })
}

/// Trapezoid sums of a uniformly sampled field at spacing `h` and `2h`.
#[derive(Debug, Clone)]
pub struct RunningIntegral {
    h: f64,
    count: usize,
    sum_all: SpectralVectorField,
    sum_even: SpectralVectorField,
    first: SpectralVectorField,
    last: SpectralVectorField,
    last_even: SpectralVectorField,
    /// The sample just before `last`.
    prev: SpectralVectorField,
}

impl RunningIntegral {
    pub fn new(lattice: Lattice, h: f64) -> Self {
        let z = SpectralVectorField::zeros(lattice);
        RunningIntegral {
            h,
            count: 0,
            sum_all: z.clone(),
            sum_even: z.clone(),
            first: z.clone(),
            last: z.clone(),
            last_even: z.clone(),
            prev: z,
        }
    }

    pub fn push(&mut self, v: &SpectralVectorField) -> Result<()> {
        if self.count == 0 {
            self.first = v.clone();
        }
        self.sum_all.add_scaled(1.0, v)?;
        if self.count % 2 == 0 {
            self.sum_even.add_scaled(1.0, v)?;
            self.last_even = v.clone();
        }
        self.prev = core::mem::replace(&mut self.last, v.clone());
        self.count += 1;
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.count
    }

    /// Trapezoid rule at spacing `h` over all pushed samples.
    pub fn fine(&self) -> SpectralVectorField {
        let mut out = self.sum_all.clone();
        if self.count == 0 {
            return out;
        }
        out.add_scaled(-0.5, &self.first).expect("same lattice");
        out.add_scaled(-0.5, &self.last).expect("same lattice");
        out.scale(self.h);
        out
    }

    /// Trapezoid rule at spacing `2h`; an odd final interval is closed at spacing `h`.
    pub fn coarse(&self) -> SpectralVectorField {
        let mut out = self.sum_even.clone();
        if self.count == 0 {
            return out;
        }
        out.add_scaled(-0.5, &self.first).expect("same lattice");
        out.add_scaled(-0.5, &self.last_even).expect("same lattice");
        out.scale(2.0 * self.h);
        if self.count % 2 == 0 {
            // samples 0..count-1; last even index is count-2
            let mut tail = self.prev.clone();
            tail.add_scaled(1.0, &self.last).expect("same lattice");
            out.add_scaled(0.5 * self.h, &tail).expect("same lattice");
        }
        out
    }
}

/// Scalar diagnostics of an evolution run, plus optional field copies.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub lattice: Lattice,
    pub nu: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `|w|_2`.
    pub l2: Vec<f64>,
    /// `|grad w|_2`.
    pub h1dot: Vec<f64>,
    /// `|v|_2` with `v = w + Phi`.
    pub l2_v: Vec<f64>,
    /// `nu int_0^t |grad w|_2^2 ds`, trapezoid over every step.
    pub cumulative_enstrophy: Vec<f64>,
    /// `|Phi|_2`.
    pub l2_phi: Vec<f64>,
    /// `|grad Phi|_2`.
    pub h1dot_phi: Vec<f64>,
    /// `(t, w(t))` at recorded samples when requested.
    pub snapshots: Vec<(f64, SpectralVectorField)>,
    /// Running quadrature of `v` on the integrator grid.
    pub integral: Option<RunningIntegral>,
    /// `v` at the final time.
    pub v_final: SpectralVectorField,
    pub steps: usize,
    /// True when the run ended on the tail tolerance rather than the horizon.
    pub stopped_on_tail: bool,
}

impl TrajectoryRecord {
    fn empty(lattice: Lattice, nu: f64, dt: f64) -> Self {
        TrajectoryRecord {
            lattice,
            nu,
            dt,
            times: Vec::new(),
            l2: Vec::new(),
            h1dot: Vec::new(),
            l2_v: Vec::new(),
            cumulative_enstrophy: Vec::new(),
            l2_phi: Vec::new(),
            h1dot_phi: Vec::new(),
            snapshots: Vec::new(),
            integral: None,
            v_final: SpectralVectorField::zeros(lattice),
            steps: 0,
            stopped_on_tail: false,
        }
    }

    /// Record built from uniformly spaced samples of `v` alone (`w = v`, `Phi = 0`).
    pub fn from_v_samples(nu: f64, dt: f64, samples: &[SpectralVectorField]) -> Result<Self> {
        let first = samples.first().ok_or(Error::NoSnapshots)?;
        let lattice = *first.lattice();
        let table = lattice.table();
        let mut rec = TrajectoryRecord::empty(lattice, nu, dt);
        let mut integral = RunningIntegral::new(lattice, dt);
        let mut cum = 0.0;
        let mut last_g2 = 0.0;
        for (j, v) in samples.iter().enumerate() {
            v.ensure_same_lattice(first)?;
            integral.push(v)?;
            let l2 = v.norm_with(&table, NormKind::L2);
            let g = v.norm_with(&table, NormKind::H1dot);
            if j > 0 {
                cum += 0.5 * nu * dt * (last_g2 + g * g);
            }
            last_g2 = g * g;
            rec.times.push(j as f64 * dt);
            rec.l2.push(l2);
            rec.h1dot.push(g);
            rec.l2_v.push(l2);
            rec.cumulative_enstrophy.push(cum);
            rec.l2_phi.push(0.0);
            rec.h1dot_phi.push(0.0);
        }
        rec.steps = samples.len() - 1;
        rec.v_final = samples[samples.len() - 1].clone();
        rec.integral = Some(integral);
        Ok(rec)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `|Phi|_2 |grad Phi|_2` per sample.
    pub fn phi_l3_surrogate(&self) -> Vec<f64> {
        self.l2_phi.iter().zip(&self.h1dot_phi).map(|(a, b)| a * b).collect()
    }

    /// `int_0^t |w|_2 ds` per sample, trapezoid over recorded samples.
    pub fn running_l2_integral(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for j in 0..self.len() {
            if j > 0 {
                acc += 0.5 * (self.times[j] - self.times[j - 1]) * (self.l2[j] + self.l2[j - 1]);
            }
            out.push(acc);
        }
        out
    }
}

/// Integrate the difference equation for `w^{i+1}` with frozen `u_prev = U^i`.
pub fn evolve_difference(
    u_prev: &SpectralVectorField,
    f: &SpectralVectorField,
    params: &PhysicalParams,
    cfg: &EvolutionConfig,
) -> Result<TrajectoryRecord> {
    let mut tr = Transformer::new(u_prev.lattice());
    evolve_difference_with(&mut tr, u_prev, f, params, cfg)
}

/// [`evolve_difference`] reusing a transform workspace.
pub fn evolve_difference_with(
    tr: &mut Transformer,
    u_prev: &SpectralVectorField,
    f: &SpectralVectorField,
    params: &PhysicalParams,
    cfg: &EvolutionConfig,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    cfg.validate()?;
    u_prev.ensure_same_lattice(f)?;
    if tr.lattice() != u_prev.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let lattice = *f.lattice();
    let table = tr.table().clone();
    let nu = params.nu;

    check_support(f, params.rho0)?;
    let bound = f.norm_with(&table, NormKind::X) / nu;
    let grad = u_prev.norm_with(&table, NormKind::H1dot);
    if grad > bound * (1.0 + 1e-10) {
        return Err(Error::GradientBound { grad, bound });
    }

    let up: PhysicalField = tr.to_physical(u_prev);
    check_cfl(&lattice, up.max_speed(), nu, cfg.dt)?;
    let etd = Etd2::new(&table, nu, cfg.dt);
    let advect_zero = up.max_speed() == 0.0;

    let mut rec = TrajectoryRecord::empty(lattice, nu, cfg.dt);
    let mut integral = RunningIntegral::new(lattice, cfg.dt);
    let mut w = SpectralVectorField::zeros(lattice);
    let mut cum = 0.0;
    let mut last_g2 = 0.0;
    let max_steps = cfg.max_steps();
    let mut step = 0usize;

    loop {
        let t = step as f64 * cfg.dt;
        let phi = heat_evolve_with(&table, f, nu, t)?;
        let v = w.add(&phi)?;
        integral.push(&v)?;
        let l2 = w.norm_with(&table, NormKind::L2);
        let g = w.norm_with(&table, NormKind::H1dot);
        let lv = v.norm_with(&table, NormKind::L2);
        if step > 0 {
            cum += 0.5 * nu * cfg.dt * (last_g2 + g * g);
        }
        last_g2 = g * g;
        if !(l2.is_finite() && lv.is_finite()) {
            return Err(Error::NotFinite { step });
        }
        let on_tail = lv <= cfg.tail_tolerance;
        let done = on_tail || step >= max_steps;
        if step % cfg.snapshot_stride == 0 || done {
            rec.times.push(t);
            rec.l2.push(l2);
            rec.h1dot.push(g);
            rec.l2_v.push(lv);
            rec.cumulative_enstrophy.push(cum);
            rec.l2_phi.push(phi.norm_with(&table, NormKind::L2));
            rec.h1dot_phi.push(phi.norm_with(&table, NormKind::H1dot));
            if cfg.store_fields {
                rec.snapshots.push((t, w.clone()));
            }
        }
        if done {
            rec.stopped_on_tail = on_tail;
            rec.v_final = v;
            break;
        }
        if advect_zero {
            // the source vanishes identically; w stays zero
            step += 1;
            continue;
        }
        w = etd.step(&w, t, |x, s| {
            let phi_s = heat_evolve_with(&table, f, nu, s)?;
            let mut out = tr.nonlinear_physical(&up, &x.add(&phi_s)?);
            out.scale(-1.0);
            Ok(out)
        })?;
        step += 1;
    }
    rec.steps = step;
    rec.integral = Some(integral);
    Ok(rec)
}

/// Fail when `f` carries energy on a shell below `rho0`.
pub(crate) fn check_support(f: &SpectralVectorField, rho0: f64) -> Result<()> {
    let lattice = f.lattice();
    let shells: Vec<f64> = f
        .shell_energies()
        .iter()
        .enumerate()
        .filter(|&(s, &e)| s > 0 && e > 0.0 && lattice.radius(s as i64) < rho0 * (1.0 - 1e-12))
        .map(|(s, _)| lattice.radius(s as i64))
        .collect();
    if shells.is_empty() {
        Ok(())
    } else {
        Err(Error::SupportViolation { rho0, shells })
    }
}

/// `int_0^inf v dt` with its error budget.
#[derive(Debug, Clone)]
pub struct TimeIntegral {
    pub field: SpectralVectorField,
    /// `|T_h - T_2h|_2`, a conservative bound on the trapezoid error.
    pub quadrature_error: f64,
    /// Uncertainty of the analytic tail `v(T) / rate`.
    pub tail_error: f64,
    /// Exponential rate used for the tail.
    pub rate: f64,
    /// True when the rate came from the fit rather than the hint.
    pub rate_measured: bool,
}

impl TimeIntegral {
    pub fn error_estimate(&self) -> f64 {
        self.quadrature_error + self.tail_error
    }
}

/// Least-squares slope of `ln y` against `t`.
fn log_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let lx: Vec<f64> = y.iter().map(|v| libm::log(*v)).collect();
    let mt = t.iter().sum::<f64>() / n;
    let ml = lx.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in t.iter().zip(&lx) {
        num += (a - mt) * (b - ml);
        den += (a - mt) * (a - mt);
    }
    num / den
}

/// Trapezoid integral of `v` over the run plus the analytic tail `v(T) / rate`.
///
/// The rate is fitted to the last decade of `|v|_2`; `rate_hint` is used
/// when that window holds fewer than four samples.
pub fn time_integral(traj: &TrajectoryRecord, rate_hint: f64) -> Result<TimeIntegral> {
    let integral = traj.integral.as_ref().ok_or(Error::NoSnapshots)?;
    let fine = integral.fine();
    let coarse = integral.coarse();
    let quadrature_error = fine.sub(&coarse)?.norm(NormKind::L2);
    let v_t = &traj.v_final;
    let v_norm = traj.l2_v.last().copied().unwrap_or(0.0);
    if v_norm == 0.0 {
        return Ok(TimeIntegral {
            field: fine,
            quadrature_error,
            tail_error: 0.0,
            rate: rate_hint,
            rate_measured: false,
        });
    }
    // last decade of |v|
    let mut start = traj.len() - 1;
    while start > 0 && traj.l2_v[start - 1] > 0.0 && traj.l2_v[start - 1] <= 10.0 * v_norm {
        start -= 1;
    }
    let window = traj.len() - start;
    let (rate, measured) = if window >= 4 {
        (-log_slope(&traj.times[start..], &traj.l2_v[start..]), true)
    } else {
        (rate_hint, false)
    };
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::TailNotIntegrable { rate });
    }
    // spread between the fitted rate and the rate over the final interval
    let k = traj.len();
    let tail_error = if k >= 2 && traj.l2_v[k - 2] > 0.0 {
        let local = libm::log(traj.l2_v[k - 2] / traj.l2_v[k - 1]) / (traj.times[k - 1] - traj.times[k - 2]);
        if local > 0.0 {
            v_norm * (1.0 / rate - 1.0 / local).abs()
        } else {
            v_norm / rate
        }
    } else {
        v_norm / rate
    };
    let mut field = fine;
    field.add_scaled(1.0 / rate, v_t)?;
    Ok(TimeIntegral {
        field,
        quadrature_error,
        tail_error,
        rate,
        rate_measured: measured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{random_bandpass_forcing, random_solenoidal, ForcingSpec};
    use crate::lattice::DEFAULT_DEALIAS;
    use core::f64::consts::PI;
    use num_complex::Complex64;

    fn lat(n: usize) -> Lattice {
        Lattice::new(n, 1.0, DEFAULT_DEALIAS).unwrap()
    }

    #[test]
    fn pure_diffusion_is_exact() {
        let l = lat(8);
        let mut w = SpectralVectorField::zeros(l);
        w.set_mode([1, 2, 0], [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.3, -0.1)]);
        let z = SpectralVectorField::zeros(l);
        let out = imex_step(&w, &z, &z, 0.2, 1e-3).unwrap();
        let factor = libm::exp(-0.2 * 4.0 * PI * PI * 5.0 * 1e-3);
        let want = w.scaled(factor);
        assert!(out.sub(&want).unwrap().max_abs() <= 1e-12 * w.max_abs());
        assert_eq!(imex_step(&z, &w, &z, 0.2, 1e-3).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cfl_is_enforced() {
        let l = lat(8);
        let a = random_solenoidal(&l, 1, 0.0, 3.0);
        let z = SpectralVectorField::zeros(l);
        assert!(matches!(imex_step(&z, &a, &z, 0.1, 1.0), Err(Error::Cfl { .. })));
    }

    #[test]
    fn second_order_in_time() {
        let l = lat(16);
        let mut a = random_solenoidal(&l, 11, 0.0, 3.0);
        a.scale(0.5 / a.norm(NormKind::L2));
        let mut w0 = random_solenoidal(&l, 12, 0.0, 4.0);
        w0.scale(1.0 / w0.norm(NormKind::L2));
        let mut s = random_solenoidal(&l, 13, 1.0, 3.0);
        s.scale(1.0 / s.norm(NormKind::L2));
        let t_end = 0.04;
        let run = |steps: usize| {
            let dt = t_end / steps as f64;
            let mut w = w0.clone();
            for _ in 0..steps {
                w = imex_step(&w, &a, &s, 0.05, dt).unwrap();
            }
            w
        };
        let w1 = run(8);
        let w2 = run(16);
        let w4 = run(32);
        let e1 = w1.sub(&w2).unwrap().norm(NormKind::L2);
        let e2 = w2.sub(&w4).unwrap().norm(NormKind::L2);
        let order = libm::log2(e1 / e2);
        assert!(order >= 1.9, "order {order}");
    }

    #[test]
    fn running_integral_matches_trapezoid() {
        let l = lat(4);
        let mut base = SpectralVectorField::zeros(l);
        base.set_mode([1, 0, 0], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        for count in [1usize, 2, 5, 6] {
            let h = 0.1;
            let mut ri = RunningIntegral::new(l, h);
            let vals: Vec<f64> = (0..count).map(|j| 1.0 + j as f64 * j as f64).collect();
            for v in &vals {
                ri.push(&base.scaled(*v)).unwrap();
            }
            let idx = l.index([1, 0, 0]).unwrap();
            let fine = ri.fine().at(idx)[1].re;
            let mut want = 0.0;
            for j in 1..count {
                want += 0.5 * h * (vals[j] + vals[j - 1]);
            }
            assert!((fine - want).abs() < 1e-12, "count {count}");
            let coarse = ri.coarse().at(idx)[1].re;
            let mut want2 = 0.0;
            let mut j = 0;
            while j + 2 < count {
                want2 += h * (vals[j] + vals[j + 2]);
                j += 2;
            }
            if j + 1 < count {
                want2 += 0.5 * h * (vals[j] + vals[j + 1]);
            }
            assert!((coarse - want2).abs() < 1e-12, "count {count}");
        }
    }

    #[test]
    fn synthetic_exponential_integral() {
        let l = lat(8);
        let f0 = random_solenoidal(&l, 4, 1.0, 2.0);
        let lambda = 3.0;
        let dt = 0.01;
        let samples: Vec<SpectralVectorField> = (0..=400)
            .map(|j| f0.scaled(libm::exp(-lambda * j as f64 * dt)))
            .collect();
        let rec = TrajectoryRecord::from_v_samples(0.1, dt, &samples).unwrap();
        let ti = time_integral(&rec, 1.0).unwrap();
        assert!(ti.rate_measured);
        assert!((ti.rate - lambda).abs() < 1e-9);
        let err = ti.field.sub(&f0.scaled(1.0 / lambda)).unwrap().norm(NormKind::L2);
        assert!(err <= ti.error_estimate(), "{err} > {}", ti.error_estimate());
    }

    #[test]
    fn zero_cases() {
        let l = lat(8);
        let p = PhysicalParams::new(0.1, 1.0, 1.0).unwrap();
        let cfg = EvolutionConfig {
            dt: 1e-3,
            horizon: 0.05,
            tail_tolerance: 0.0,
            snapshot_stride: 5,
            store_fields: false,
        };
        let spec = ForcingSpec {
            rho0: 1.0,
            rho1: 2.0,
            target_x_norm: 1.0,
            seed: 3,
        };
        let f = random_bandpass_forcing(&l, &spec).unwrap();
        let z = SpectralVectorField::zeros(l);
        let rec = evolve_difference(&z, &f, &p, &cfg).unwrap();
        assert!(rec.l2.iter().all(|&v| v == 0.0));
        let rec = evolve_difference(&z, &z, &p, &cfg).unwrap();
        assert!(rec.l2.iter().all(|&v| v == 0.0));
        let ti = time_integral(&rec, 1.0).unwrap();
        assert_eq!(ti.field.max_abs(), 0.0);
    }

    #[test]
    fn rejects_gradient_bound_violation() {
        let l = lat(8);
        let p = PhysicalParams::new(0.1, 1.0, 1.0).unwrap();
        let cfg = EvolutionConfig {
            dt: 1e-4,
            horizon: 1e-3,
            tail_tolerance: 0.0,
            snapshot_stride: 1,
            store_fields: false,
        };
        let spec = ForcingSpec {
            rho0: 1.0,
            rho1: 2.0,
            target_x_norm: 1e-3,
            seed: 3,
        };
        let f = random_bandpass_forcing(&l, &spec).unwrap();
        let u = random_solenoidal(&l, 9, 0.0, 2.0);
        assert!(matches!(
            evolve_difference(&u, &f, &p, &cfg),
            Err(Error::GradientBound { .. })
        ));
    }
}
