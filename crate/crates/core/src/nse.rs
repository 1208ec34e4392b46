//! The forced Navier-Stokes equations `u_t + P(u . grad u) = nu Laplacian u + f`
//! and the perturbation experiment around a steady state.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::decay::{majorant_constants, MajorantConstants};
use crate::error::{Error, Result};
use crate::evolution::{cfl_limit, Etd2, EvolutionConfig};
use crate::field::{shell_pairing, NormKind, SpectralVectorField};
use crate::lattice::{Lattice, WaveTable};
use crate::nonlinear::Transformer;
use crate::params::PhysicalParams;

/// Sharp constant `S` of `|u|_6 <= S |grad u|_2` in three dimensions.
pub fn sobolev_constant() -> f64 {
    libm::cbrt(4.0) / (libm::sqrt(3.0) * libm::cbrt(PI * PI))
}

/// ETD2RK integrator for the full equations with constant forcing.
#[derive(Debug, Clone)]
pub struct NseSolver {
    tr: Transformer,
    etd: Etd2,
    f: SpectralVectorField,
    nu: f64,
    dt: f64,
}

impl NseSolver {
    pub fn new(f: &SpectralVectorField, nu: f64, dt: f64) -> Result<Self> {
        if !(nu > 0.0 && dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "evolution.dt",
                reason: alloc::format!("nu and dt must be positive (got nu = {nu}, dt = {dt})"),
            });
        }
        let tr = Transformer::new(f.lattice());
        let etd = Etd2::new(tr.table(), nu, dt);
        Ok(NseSolver {
            tr,
            etd,
            f: f.clone(),
            nu,
            dt,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        self.tr.lattice()
    }

    pub fn table(&self) -> &WaveTable {
        self.tr.table()
    }

    pub fn transformer(&mut self) -> &mut Transformer {
        &mut self.tr
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step; `step` is only used to label failures.
    pub fn step(&mut self, u: &SpectralVectorField, step: usize) -> Result<SpectralVectorField> {
        u.ensure_same_lattice(&self.f)?;
        let NseSolver { tr, etd, f, nu, dt } = self;
        let up = tr.to_physical(u);
        let limit = cfl_limit(tr.lattice(), up.max_speed(), *nu);
        if *dt > limit {
            return Err(Error::Cfl { dt: *dt, limit });
        }
        let mut first = Some(up);
        let out = etd.step(u, 0.0, |x, _| {
            let xp = match first.take() {
                Some(p) => p,
                None => tr.to_physical(x),
            };
            let mut r = tr.nonlinear_physical(&xp, x);
            r.scale(-1.0);
            r.add_scaled(1.0, f)?;
            Ok(r)
        })?;
        if !out.is_finite() {
            return Err(Error::NotFinite { step });
        }
        Ok(out)
    }
}

/// One step of the full equations with a throwaway solver.
pub fn nse_step(u: &SpectralVectorField, f: &SpectralVectorField, nu: f64, dt: f64) -> Result<SpectralVectorField> {
    NseSolver::new(f, nu, dt)?.step(u, 0)
}

/// Smallness gate for the perturbation energy inequality.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateReport {
    /// `S^{3/2}` with the sharp Sobolev constant `S`.
    pub constant: f64,
    /// `C |U|_2^{1/2} |grad U|_2^{1/2}`.
    pub value: f64,
    /// `nu / 2`.
    pub threshold: f64,
    pub analytic_pass: bool,
    /// `|<P(w0 . grad U), w0>| / (nu |grad w0|_2^2)`.
    pub production_ratio: f64,
    pub empirical_pass: bool,
}

impl GateReport {
    pub fn passes(&self) -> bool {
        self.analytic_pass || self.empirical_pass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    /// Weight exponent in `E(t) = (1+t)^alpha` and split radius `rho^2 = alpha / (2 nu (1+t))`.
    pub alpha: f64,
    /// Stop once `|w|_2 <= decay_target * |w0|_2`.
    pub decay_target: f64,
    pub max_steps: usize,
    /// Per-step monotonicity tolerance relative to `|w0|_2`.
    pub monotone_tolerance: f64,
    /// Keep shell-resolved energy and transfer spectra at every recorded sample.
    pub record_shells: bool,
    /// Run with the nonlinear terms of the perturbation switched off.
    pub linear_only: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            alpha: 4.0,
            decay_target: 1e-3,
            max_steps: 100_000,
            monotone_tolerance: 1e-9,
            record_shells: true,
            linear_only: false,
        }
    }
}

/// Shell-resolved state of the perturbation at one time.
///
/// Entry `j` of each vector refers to shell `StabilityRunRecord::shells[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSample {
    pub t: f64,
    /// `|u|_2` of the full solution.
    pub u_l2: f64,
    /// `|grad w|_2`.
    pub w_h1dot: f64,
    /// `sum |w(k)|^2`.
    pub energy: Vec<f64>,
    /// `sum Re(P(u . grad w)(k) . conj w(k))`.
    pub advection: Vec<f64>,
    /// `sum Re(P(w . grad U)(k) . conj w(k))`.
    pub stretching: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StabilityRunRecord {
    pub lattice: Lattice,
    pub nu: f64,
    pub dt: f64,
    pub alpha: f64,
    /// Squared integer radii of the retained shells.
    pub shells: Vec<i64>,
    pub times: Vec<f64>,
    /// `|u - U|_2`.
    pub pert_l2: Vec<f64>,
    /// `|grad (u - U)|_2`.
    pub pert_h1dot: Vec<f64>,
    /// Sharp split at `rho(t)`.
    pub low_energy: Vec<f64>,
    pub high_energy: Vec<f64>,
    /// Split by the Gaussian weight `phi = exp(-|xi|^2)`: `|phi w|^2`, `|(1-phi) w|^2`.
    pub gauss_low: Vec<f64>,
    pub gauss_high: Vec<f64>,
    pub violations_so_far: Vec<usize>,
    pub monotonicity_violations: usize,
    pub initial_l2: f64,
    pub steady_l2: f64,
    pub steady_h1dot: f64,
    pub gate: GateReport,
    pub reached_target: bool,
    pub steps: usize,
    /// Largest per-step defect of the energy balance of `u`, relative to `|u|_2^2`.
    pub energy_balance_defect: f64,
    pub samples: Vec<ShellSample>,
    /// Pairing majorant constants from the initial state, when shells are recorded.
    pub majorants: Option<MajorantConstants>,
    pub warnings: Vec<String>,
}

impl StabilityRunRecord {
    pub fn final_ratio(&self) -> f64 {
        match (self.pert_l2.first(), self.pert_l2.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => 0.0,
        }
    }

    /// `|w|^2` at the tested split radius, `(low, high)` at the final sample.
    pub fn final_split(&self) -> (f64, f64) {
        (
            self.low_energy.last().copied().unwrap_or(0.0),
            self.high_energy.last().copied().unwrap_or(0.0),
        )
    }

    pub fn sample_at(&self, t: f64) -> Option<&ShellSample> {
        let tol = 1e-9 * self.dt.max(1e-300);
        self.samples.iter().find(|s| (s.t - t).abs() <= tol)
    }
}

/// `rho(t)^2 = alpha / (2 nu (1 + t))`.
pub fn split_radius(alpha: f64, nu: f64, t: f64) -> f64 {
    libm::sqrt(alpha / (2.0 * nu * (1.0 + t)))
}

fn shell_positions(lattice: &Lattice) -> (Vec<i64>, Vec<usize>) {
    let shells = lattice.shells();
    let mut pos = alloc::vec![usize::MAX; lattice.max_k2() as usize + 1];
    for (j, &s) in shells.iter().enumerate() {
        pos[s as usize] = j;
    }
    (shells, pos)
}

fn compact(full: &[f64], shells: &[i64]) -> Vec<f64> {
    shells.iter().map(|&s| full[s as usize]).collect()
}

/// Integrate `u(0) = U + w0` and record the decay of `w = u - U`.
pub fn stability_experiment(
    steady: &SpectralVectorField,
    f: &SpectralVectorField,
    w0: &SpectralVectorField,
    params: &PhysicalParams,
    cfg: &EvolutionConfig,
    opts: &StabilityOptions,
) -> Result<StabilityRunRecord> {
    params.validate()?;
    cfg.validate()?;
    steady.ensure_same_lattice(f)?;
    steady.ensure_same_lattice(w0)?;
    if !(opts.alpha > 3.0) {
        return Err(Error::InvalidParameter {
            name: "stability.alpha",
            reason: alloc::format!("must exceed 3 (got {})", opts.alpha),
        });
    }
    let lattice = *f.lattice();
    let nu = params.nu;
    let mut solver = NseSolver::new(f, nu, cfg.dt)?;
    let table = solver.table().clone();
    let (shells, _) = shell_positions(&lattice);

    let steady_l2 = steady.norm_with(&table, NormKind::L2);
    let steady_h1 = steady.norm_with(&table, NormKind::H1dot);
    let w0_l2 = w0.norm_with(&table, NormKind::L2);
    let w0_h1 = w0.norm_with(&table, NormKind::H1dot);

    let constant = libm::pow(sobolev_constant(), 1.5);
    let value = constant * libm::sqrt(steady_l2 * steady_h1);
    let production = if w0_h1 > 0.0 {
        let p = solver.transformer().nonlinear(w0, steady)?;
        p.inner_product(w0)?.abs() / (nu * w0_h1 * w0_h1)
    } else {
        0.0
    };
    let gate = GateReport {
        constant,
        value,
        threshold: nu / 2.0,
        analytic_pass: value <= nu / 2.0,
        production_ratio: production,
        empirical_pass: production <= 0.5,
    };
    let mut warnings = Vec::new();
    if !gate.analytic_pass {
        warnings.push(alloc::format!(
            "smallness gate C |U|^(1/2) |grad U|^(1/2) = {:.4e} exceeds nu/2 = {:.4e}",
            value,
            nu / 2.0
        ));
    }
    if !gate.empirical_pass {
        warnings.push(alloc::format!(
            "measured energy production ratio {production:.4e} exceeds 1/2"
        ));
    }

    let mut rec = StabilityRunRecord {
        lattice,
        nu,
        dt: cfg.dt,
        alpha: opts.alpha,
        shells: shells.clone(),
        times: Vec::new(),
        pert_l2: Vec::new(),
        pert_h1dot: Vec::new(),
        low_energy: Vec::new(),
        high_energy: Vec::new(),
        gauss_low: Vec::new(),
        gauss_high: Vec::new(),
        violations_so_far: Vec::new(),
        monotonicity_violations: 0,
        initial_l2: w0_l2,
        steady_l2,
        steady_h1dot: steady_h1,
        gate,
        reached_target: false,
        steps: 0,
        energy_balance_defect: 0.0,
        samples: Vec::new(),
        majorants: None,
        warnings,
    };

    let gauss: Vec<f64> = shells
        .iter()
        .map(|&s| {
            let r = lattice.radius(s);
            libm::exp(-r * r)
        })
        .collect();
    let balance = |u: &SpectralVectorField| -> Result<(f64, f64)> {
        let e = u.norm_with(&table, NormKind::L2);
        let g = u.norm_with(&table, NormKind::H1dot);
        Ok((e * e, 2.0 * f.inner_product(u)? - 2.0 * nu * g * g))
    };

    let mut u = steady.add(w0)?;
    let mut w = w0.clone();
    if opts.record_shells {
        let advector = if opts.linear_only { steady } else { &u };
        rec.majorants = Some(majorant_constants(solver.transformer(), advector, steady, 0.0)?);
    }
    let (mut energy_u, mut source_u) = balance(&u)?;
    let mut last_l2 = w0_l2;
    let max_steps = cfg.max_steps().min(opts.max_steps);
    let tol = opts.monotone_tolerance * w0_l2;
    let target = opts.decay_target * w0_l2;
    let mut step = 0usize;
    loop {
        let t = step as f64 * cfg.dt;
        let l2 = w.norm_with(&table, NormKind::L2);
        if step > 0 && l2 > last_l2 + tol {
            rec.monotonicity_violations += 1;
        }
        last_l2 = l2;
        // a zero perturbation runs to the horizon so drift away from U is visible
        let reached = w0_l2 > 0.0 && l2 <= target;
        let done = reached || step >= max_steps;
        if step % cfg.snapshot_stride == 0 || done {
            let full = w.shell_energies();
            let e = compact(&full, &shells);
            let rho = split_radius(opts.alpha, nu, t);
            let mut low = 0.0;
            let mut high = 0.0;
            let mut glow = 0.0;
            let mut ghigh = 0.0;
            for (j, &s) in shells.iter().enumerate() {
                if lattice.radius(s) < rho {
                    low += e[j];
                } else {
                    high += e[j];
                }
                glow += gauss[j] * gauss[j] * e[j];
                ghigh += (1.0 - gauss[j]) * (1.0 - gauss[j]) * e[j];
            }
            let g = w.norm_with(&table, NormKind::H1dot);
            rec.times.push(t);
            rec.pert_l2.push(l2);
            rec.pert_h1dot.push(g);
            rec.low_energy.push(low);
            rec.high_energy.push(high);
            rec.gauss_low.push(glow);
            rec.gauss_high.push(ghigh);
            rec.violations_so_far.push(rec.monotonicity_violations);
            if opts.record_shells {
                let tr = solver.transformer();
                // without the quadratic term the advecting field is U itself
                let advector = if opts.linear_only { steady } else { &u };
                let adv = compact(&shell_pairing(&tr.nonlinear(advector, &w)?, &w)?, &shells);
                let stretch = compact(&shell_pairing(&tr.nonlinear(&w, steady)?, &w)?, &shells);
                rec.samples.push(ShellSample {
                    t,
                    u_l2: advector.norm_with(&table, NormKind::L2),
                    w_h1dot: g,
                    energy: e,
                    advection: adv,
                    stretching: stretch,
                });
            }
        }
        if done {
            rec.reached_target = reached;
            break;
        }
        let next = if opts.linear_only {
            linear_perturbation_step(&mut solver, steady, &w, step)?
        } else {
            solver.step(&u, step)?
        };
        if opts.linear_only {
            w = next;
            u = steady.add(&w)?;
        } else {
            u = next;
            w = u.sub(steady)?;
        }
        let (e1, s1) = balance(&u)?;
        if !opts.linear_only {
            let predicted = 0.5 * cfg.dt * (source_u + s1);
            let defect = ((e1 - energy_u) - predicted).abs() / e1.max(f64::MIN_POSITIVE);
            rec.energy_balance_defect = rec.energy_balance_defect.max(defect);
        }
        energy_u = e1;
        source_u = s1;
        step += 1;
    }
    rec.steps = step;
    Ok(rec)
}

/// `w_t = nu Laplacian w - P(U . grad w) - P(w . grad U)`, the perturbation
/// equation with its quadratic term dropped.
fn linear_perturbation_step(
    solver: &mut NseSolver,
    steady: &SpectralVectorField,
    w: &SpectralVectorField,
    step: usize,
) -> Result<SpectralVectorField> {
    let NseSolver { tr, etd, nu, dt, .. } = solver;
    let sp = tr.to_physical(steady);
    let limit = cfl_limit(tr.lattice(), sp.max_speed(), *nu);
    if *dt > limit {
        return Err(Error::Cfl { dt: *dt, limit });
    }
    let out = etd.step(w, 0.0, |x, _| {
        let mut r = tr.nonlinear_physical(&sp, x);
        r.add_scaled(1.0, &tr.nonlinear(x, steady)?)?;
        r.scale(-1.0);
        Ok(r)
    })?;
    if !out.is_finite() {
        return Err(Error::NotFinite { step });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_DEALIAS;
    use num_complex::Complex64;

    /// `(sin 2pi x cos 2pi y, -cos 2pi x sin 2pi y, 0)` in coefficients.
    pub(crate) fn taylor_green(l: Lattice) -> SpectralVectorField {
        let mut u = SpectralVectorField::zeros(l);
        let z = Complex64::new(0.0, 0.0);
        let q = 0.25;
        // sin a cos b = (sin(a+b) + sin(a-b))/2, sin c = (e^{ic} - e^{-ic})/(2i)
        u.set_mode([1, 1, 0], [Complex64::new(0.0, -q), Complex64::new(0.0, q), z]);
        u.set_mode([1, -1, 0], [Complex64::new(0.0, -q), Complex64::new(0.0, -q), z]);
        u
    }

    #[test]
    fn sobolev_constant_value() {
        assert!((sobolev_constant() - 0.4273).abs() < 1e-4);
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let l = Lattice::new(8, 1.0, DEFAULT_DEALIAS).unwrap();
        let u = taylor_green(l);
        assert!(u.divergence_ratio() < 1e-15);
        assert!(u.hermitian_defect() < 1e-15);
        // |u|_2^2 = 1/2 on the unit box
        assert!((u.norm(NormKind::L2).powi(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_state_stays_zero() {
        let l = Lattice::new(8, 1.0, DEFAULT_DEALIAS).unwrap();
        let z = SpectralVectorField::zeros(l);
        assert_eq!(nse_step(&z, &z, 0.1, 1e-3).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn taylor_green_decays_like_heat() {
        let l = Lattice::new(16, 1.0, DEFAULT_DEALIAS).unwrap();
        let u0 = taylor_green(l);
        let z = SpectralVectorField::zeros(l);
        let nu = 0.1;
        let mut s = NseSolver::new(&z, nu, 1e-3).unwrap();
        let mut u = u0.clone();
        for k in 0..100 {
            u = s.step(&u, k).unwrap();
        }
        let want = u0.scaled(libm::exp(-8.0 * PI * PI * nu * 0.1));
        let err = u.sub(&want).unwrap().norm(NormKind::L2) / want.norm(NormKind::L2);
        assert!(err <= 1e-6, "{err}");
    }
}
