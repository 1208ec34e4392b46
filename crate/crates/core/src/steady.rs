//! Construction of the steady state by the outer fixed-point iteration
//! `U^{i+1}` solving `P(U^i . grad U^{i+1}) = nu Laplacian U^{i+1} + f`.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::evolution::{evolve_difference_with, time_integral, EvolutionConfig};
use crate::field::{NormKind, SpectralVectorField};
use crate::forcing::random_solenoidal;
use crate::lattice::WaveTable;
use crate::nonlinear::Transformer;
use crate::params::PhysicalParams;

/// Diagonal inverse of `-nu Laplacian`: `U(k) = f(k) / (4 pi^2 nu |xi|^2)`.
pub fn stokes_solve(f: &SpectralVectorField, nu: f64) -> SpectralVectorField {
    stokes_solve_with(&f.lattice().table(), f, nu)
}

pub fn stokes_solve_with(table: &WaveTable, f: &SpectralVectorField, nu: f64) -> SpectralVectorField {
    let mut u = f.clone();
    u.apply_multiplier(|i| if table.k2[i] == 0 { 0.0 } else { 1.0 / (nu * table.lap[i]) });
    u
}

/// `n + nu (-Laplacian) u - f`.
fn defect(table: &WaveTable, n: Option<&SpectralVectorField>, u: &SpectralVectorField, f: &SpectralVectorField, nu: f64) -> SpectralVectorField {
    let mut r = u.clone();
    r.apply_multiplier(|i| nu * table.lap[i]);
    if let Some(n) = n {
        r.add_scaled(1.0, n).expect("same lattice");
    }
    r.add_scaled(-1.0, f).expect("same lattice");
    r
}

fn relative_hminus1(table: &WaveTable, r: &SpectralVectorField, f: &SpectralVectorField) -> f64 {
    let fr = f.norm_with(table, NormKind::Hminus1);
    let rr = r.norm_with(table, NormKind::Hminus1);
    if fr == 0.0 {
        rr
    } else {
        rr / fr
    }
}

/// `|P(u . grad u) - nu Laplacian u - f|_{H^-1} / |f|_{H^-1}` (absolute when `f = 0`).
pub fn steady_residual(u: &SpectralVectorField, f: &SpectralVectorField, nu: f64) -> Result<f64> {
    let mut tr = Transformer::new(u.lattice());
    steady_residual_with(&mut tr, u, f, nu)
}

pub fn steady_residual_with(tr: &mut Transformer, u: &SpectralVectorField, f: &SpectralVectorField, nu: f64) -> Result<f64> {
    u.ensure_same_lattice(f)?;
    let n = tr.nonlinear(u, u)?;
    let table = tr.table();
    Ok(relative_hminus1(table, &defect(table, Some(&n), u, f, nu), f))
}

/// Residual of the linear steady problem with frozen advecting field;
/// `advect = None` measures the Stokes residual.
pub fn linear_residual(
    advect: Option<&SpectralVectorField>,
    u: &SpectralVectorField,
    f: &SpectralVectorField,
    nu: f64,
) -> Result<f64> {
    u.ensure_same_lattice(f)?;
    let mut tr = Transformer::new(u.lattice());
    let n = match advect {
        Some(a) => Some(tr.nonlinear(a, u)?),
        None => None,
    };
    let table = tr.table();
    Ok(relative_hminus1(table, &defect(table, n.as_ref(), u, f, nu), f))
}

/// Result of the inner Picard loop.
#[derive(Debug, Clone)]
pub struct LinearSolve {
    pub field: SpectralVectorField,
    /// Number of Stokes solves performed.
    pub iterations: usize,
    /// Relative `H^-1` residual of `field`.
    pub residual: f64,
    /// Last measured residual ratio between consecutive inner steps.
    pub ratio: f64,
}

/// Solve `nu Laplacian U = P(u_prev . grad U) - f` by `U <- stokes(f - P(u_prev . grad U))`.
pub fn linear_steady_solve(
    u_prev: &SpectralVectorField,
    f: &SpectralVectorField,
    nu: f64,
    tol: f64,
    max_inner: usize,
) -> Result<LinearSolve> {
    let mut tr = Transformer::new(u_prev.lattice());
    linear_steady_solve_with(&mut tr, u_prev, f, nu, tol, max_inner)
}

pub fn linear_steady_solve_with(
    tr: &mut Transformer,
    u_prev: &SpectralVectorField,
    f: &SpectralVectorField,
    nu: f64,
    tol: f64,
    max_inner: usize,
) -> Result<LinearSolve> {
    u_prev.ensure_same_lattice(f)?;
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter {
            name: "physics.nu",
            reason: alloc::format!("must be strictly positive (got {nu})"),
        });
    }
    let table = tr.table().clone();
    let up = tr.to_physical(u_prev);
    let advect_zero = up.max_speed() == 0.0;
    let mut u = stokes_solve_with(&table, f, nu);
    let mut prev_res = f64::INFINITY;
    let mut ratio = 0.0;
    let mut rising = 0;
    for j in 0..max_inner.max(1) {
        let n = if advect_zero {
            SpectralVectorField::zeros(*f.lattice())
        } else {
            tr.nonlinear_physical(&up, &u)
        };
        let res = relative_hminus1(&table, &defect(&table, Some(&n), &u, f, nu), f);
        if !res.is_finite() {
            return Err(Error::NotFinite { step: j });
        }
        if prev_res.is_finite() && prev_res > 0.0 {
            ratio = res / prev_res;
        }
        if res <= tol {
            return Ok(LinearSolve {
                field: u,
                iterations: j + 1,
                residual: res,
                ratio,
            });
        }
        if res > prev_res {
            rising += 1;
            if rising >= 3 {
                return Err(Error::InnerDivergence { ratio });
            }
        } else {
            rising = 0;
        }
        prev_res = res;
        let mut rhs = f.clone();
        rhs.add_scaled(-1.0, &n)?;
        u = stokes_solve_with(&table, &rhs, nu);
    }
    Err(Error::InnerNotConverged {
        tol,
        iterations: max_inner,
        residual: prev_res,
    })
}

/// How each outer iterate is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Route {
    /// Inner Picard solve of the steady linear problem.
    Direct,
    /// Time integral of `v = w + Phi` from the difference equation.
    Quadrature(EvolutionConfig),
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Direct => "direct",
            Route::Quadrature(_) => "quadrature",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub tol_outer: f64,
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub route: Route,
    /// Starting iterate; zero when absent.
    pub start: Option<SpectralVectorField>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            tol_outer: 1e-8,
            tol_inner: 1e-10,
            max_outer: 60,
            max_inner: 200,
            route: Route::Direct,
            start: None,
        }
    }
}

/// Per-iterate diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iterate: usize,
    /// `|U^i|_2`.
    pub l2: f64,
    /// `|grad U^i|_2`.
    pub h1dot: f64,
    /// `|grad (U^i - U^{i-1})|_2`.
    pub contraction: f64,
    /// `contraction_i / contraction_{i-1}`; absent for the first iterate.
    pub ratio: Option<f64>,
    /// Relative `H^-1` steady residual.
    pub residual: f64,
    /// Inner iterations, or evolution steps on the quadrature route.
    pub inner_work: usize,
    /// Quadrature error estimate (zero on the direct route).
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationTrace {
    pub iterates: Vec<IterationRecord>,
    pub route: String,
    pub converged: bool,
    pub f_xnorm: f64,
    /// `|f|_X / nu`.
    pub gradient_bound: f64,
    pub m_energy: f64,
    pub tol_outer: f64,
}

impl IterationTrace {
    /// Ratios `q_i` for `i >= 2`.
    pub fn ratios(&self) -> Vec<f64> {
        self.iterates.iter().filter_map(|r| r.ratio).collect()
    }

    /// Largest `q_i` among iterates whose update is still well above the
    /// inner solver's noise floor.
    pub fn max_ratio(&self) -> Option<f64> {
        let floor = 1e3 * self.tol_outer.min(1e-6) * self.gradient_bound;
        self.iterates
            .iter()
            .filter(|r| r.contraction > floor)
            .filter_map(|r| r.ratio)
            .fold(None, |acc: Option<f64>, q| Some(acc.map_or(q, |a| a.max(q))))
    }

    /// Count of iterates violating `|U^i|_2 <= M` or `|grad U^i|_2 <= |f|_X / nu`.
    pub fn bound_violations(&self) -> usize {
        self.iterates
            .iter()
            .filter(|r| r.l2 > self.m_energy || r.h1dot > self.gradient_bound * (1.0 + 1e-10))
            .count()
    }
}

/// Run the outer iteration from `opts.start` (zero by default).
pub fn build_steady(
    f: &SpectralVectorField,
    params: &PhysicalParams,
    opts: &BuildOptions,
) -> Result<(SpectralVectorField, IterationTrace)> {
    params.validate()?;
    let lattice = *f.lattice();
    let mut tr = Transformer::new(&lattice);
    let table = tr.table().clone();
    let nu = params.nu;
    let f_x = f.norm_with(&table, NormKind::X);
    let bound = f_x / nu;
    let mut trace = IterationTrace {
        iterates: Vec::new(),
        route: opts.route.name().into(),
        converged: false,
        f_xnorm: f_x,
        gradient_bound: bound,
        m_energy: params.m_energy,
        tol_outer: opts.tol_outer,
    };
    let mut u = match &opts.start {
        Some(s) => {
            s.ensure_same_lattice(f)?;
            s.clone()
        }
        None => SpectralVectorField::zeros(lattice),
    };
    let mut last_contraction: Option<f64> = None;
    let mut above_one = 0;
    for i in 1..=opts.max_outer {
        let (next, work, qerr) = match &opts.route {
            Route::Direct => {
                let s = linear_steady_solve_with(&mut tr, &u, f, nu, opts.tol_inner, opts.max_inner)?;
                (s.field, s.iterations, 0.0)
            }
            Route::Quadrature(cfg) => {
                let rec = evolve_difference_with(&mut tr, &u, f, params, cfg)?;
                let hint = 4.0 * PI * PI * nu / (lattice.period() * lattice.period());
                let ti = time_integral(&rec, hint)?;
                let err = ti.error_estimate();
                let mut field = ti.field;
                // the quadrature sum is exact up to rounding outside the shell
                field.truncate(&table);
                field.leray_project_in_place();
                (field, rec.steps, err)
            }
        };
        let l2 = next.norm_with(&table, NormKind::L2);
        let h1 = next.norm_with(&table, NormKind::H1dot);
        let contraction = next.sub(&u)?.norm_with(&table, NormKind::H1dot);
        let ratio = last_contraction.and_then(|c| if c > 0.0 { Some(contraction / c) } else { None });
        let residual = steady_residual_with(&mut tr, &next, f, nu)?;
        trace.iterates.push(IterationRecord {
            iterate: i,
            l2,
            h1dot: h1,
            contraction,
            ratio,
            residual,
            inner_work: work,
            quadrature_error: qerr,
        });
        if l2 > params.m_energy {
            return Err(Error::EnergyBudget {
                iterate: i,
                l2,
                budget: params.m_energy,
            });
        }
        if h1 > bound * (1.0 + 1e-10) {
            return Err(Error::GradientBound { grad: h1, bound });
        }
        u = next;
        if contraction <= opts.tol_outer * bound {
            trace.converged = true;
            break;
        }
        match ratio {
            Some(q) if q >= 1.0 => {
                above_one += 1;
                if above_one >= 3 {
                    return Err(Error::NonContraction { ratio: q });
                }
            }
            _ => above_one = 0,
        }
        last_contraction = Some(contraction);
    }
    Ok((u, trace))
}

/// Admissible alternative start: a seeded field scaled to half of the tighter
/// of `|U|_2 <= M` and `|grad U|_2 <= |f|_X / nu`.
pub fn alternative_start(f: &SpectralVectorField, params: &PhysicalParams, seed: u64) -> SpectralVectorField {
    let lattice = *f.lattice();
    let table = lattice.table();
    let mut r = random_solenoidal(&lattice, seed, 0.0, f64::INFINITY);
    let l2 = r.norm_with(&table, NormKind::L2);
    let h1 = r.norm_with(&table, NormKind::H1dot);
    let bound = f.norm_with(&table, NormKind::X) / params.nu;
    if l2 == 0.0 || bound == 0.0 {
        return SpectralVectorField::zeros(lattice);
    }
    let s = 0.5 * (params.m_energy / l2).min(bound / h1);
    r.scale(s);
    r
}

/// Relative distance between the steady states reached from zero and from
/// an alternative admissible start seeded by `alt_seed`.
pub fn uniqueness_probe(
    f: &SpectralVectorField,
    params: &PhysicalParams,
    opts: &BuildOptions,
    alt_seed: u64,
) -> Result<f64> {
    let mut a_opts = opts.clone();
    a_opts.start = None;
    let (ua, ta) = build_steady(f, params, &a_opts)?;
    let mut b_opts = opts.clone();
    b_opts.start = Some(alternative_start(f, params, alt_seed));
    let (ub, tb) = build_steady(f, params, &b_opts)?;
    if !ta.converged {
        return Err(Error::OuterNotConverged(ta.iterates.len()));
    }
    if !tb.converged {
        return Err(Error::OuterNotConverged(tb.iterates.len()));
    }
    let na = ua.norm(NormKind::L2);
    let d = ua.sub(&ub)?.norm(NormKind::L2);
    Ok(if na == 0.0 { d } else { d / na })
}
