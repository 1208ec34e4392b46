//! The five experiment commands.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use steadylab_core::decay::{
    check_bootstrap_inequality, check_decay_envelope, check_energy_inequality, check_generalized_inequalities, fit_rate,
    InequalityReport, RateFit, RateModel,
};
use steadylab_core::evolution::{evolve_difference, EvolutionConfig, TrajectoryRecord};
use steadylab_core::nse::{stability_experiment, StabilityOptions, StabilityRunRecord};
use steadylab_core::semigroup::{heat_envelope_check, HeatEnvelopeReport};
use steadylab_core::steady::{alternative_start, build_steady, steady_residual, BuildOptions, IterationTrace, Route};
use steadylab_core::{random_bandpass_forcing, random_solenoidal, NormKind, SpectralVectorField};

use crate::checkpoint;
use crate::config::{Command, ExperimentConfig, RouteName};
use crate::output::{fmt_f64, unix_ms, write_outputs, ArtifactRecord, Cell, Check, IoError, Outcome, OutputDir, RunManifest, Table};

/// Relative divergence allowed in any stored field.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-12;
/// Split energies at the end of a stability run, relative to `|w0|^2`.
pub const SPLIT_TOLERANCE: f64 = 1e-6;
pub const ENERGY_BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        source: steadylab_core::Error,
    },
    #[error("{0}")]
    Setup(String),
}

trait Context<T> {
    fn ctx(self, context: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for steadylab_core::Result<T> {
    fn ctx(self, context: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Core { context, source })
    }
}

/// Run `cmd` into `out_dir` and seal it with a manifest.
///
/// Numerical failures end up in the manifest (`error` set, `passed` false)
/// together with whatever was written before they occurred. Only failures
/// to write the output itself are returned as errors.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out_dir: &Path, workers: usize) -> Result<RunManifest, IoError> {
    let started = unix_ms();
    let mut out = OutputDir::create(out_dir)?;
    let mut outcome = Outcome::default();
    let result = match cmd {
        Command::BuildSteady => build_command(cfg, &mut out, &mut outcome),
        Command::Decay => decay_command(cfg, &mut out, &mut outcome),
        Command::Stability => stability_command(cfg, &mut out, &mut outcome),
        Command::VerifyBounds => verify_command(cfg, &mut out, &mut outcome),
        Command::Sweep => sweep_command(cfg, &mut out, &mut outcome, workers),
    };
    match result {
        Ok(()) => {}
        Err(RunError::Io(e)) => return Err(e),
        Err(e) => outcome.error = Some(e.to_string()),
    }
    let echo = serde_json::to_value(cfg).expect("config serializes");
    write_outputs(&out, cmd.name(), echo, started, outcome)
}

fn forcing(cfg: &ExperimentConfig) -> Result<SpectralVectorField, RunError> {
    random_bandpass_forcing(&cfg.lattice(), &cfg.forcing).ctx("forcing")
}

fn build_options(cfg: &ExperimentConfig) -> BuildOptions {
    BuildOptions {
        tol_outer: cfg.build.tol_outer,
        tol_inner: cfg.build.tol_inner,
        max_outer: cfg.build.max_outer,
        max_inner: cfg.build.max_inner,
        route: match cfg.build.route {
            RouteName::Direct => Route::Direct,
            RouteName::Quadrature => Route::Quadrature(cfg.evolution),
        },
        start: None,
    }
}

/// Build `U`, record its metrics and the convergence check.
fn build(
    cfg: &ExperimentConfig,
    f: &SpectralVectorField,
    outcome: &mut Outcome,
) -> Result<(SpectralVectorField, IterationTrace), RunError> {
    let (u, trace) = build_steady(f, &cfg.physics, &build_options(cfg)).ctx("build_steady")?;
    outcome.metric("build_iterations", trace.iterates.len());
    outcome.metric("build_max_ratio", trace.max_ratio());
    outcome.metric("f_xnorm", trace.f_xnorm);
    outcome.metric("u_l2", u.norm(NormKind::L2));
    outcome.metric("u_h1dot", u.norm(NormKind::H1dot));
    outcome.check(Check::new(
        "outer iteration converged",
        trace.converged,
        format!("{} iterates, route {}", trace.iterates.len(), trace.route),
    ));
    Ok((u, trace))
}

/// Bounds and residual of a candidate steady state.
///
/// `residual_tolerance` absorbs the quadrature error when `u` came from time integrals.
fn bound_checks(
    cfg: &ExperimentConfig,
    u: &SpectralVectorField,
    f: &SpectralVectorField,
    residual_tolerance: f64,
    outcome: &mut Outcome,
) -> Result<(), RunError> {
    let p = &cfg.physics;
    let residual = steady_residual(u, f, p.nu).ctx("steady_residual")?;
    outcome.metric("steady_residual", residual);
    let f_x = f.norm(NormKind::X);
    outcome.check(Check::at_most("energy bound |U|_2 <= M", u.norm(NormKind::L2), p.m_energy));
    outcome.check(Check::at_most(
        "gradient bound |grad U|_2 <= |f|_X / nu",
        u.norm(NormKind::H1dot),
        f_x / p.nu * (1.0 + 1e-10),
    ));
    outcome.check(Check::at_most("steady residual", residual, residual_tolerance));
    outcome.check(Check::at_most("divergence", u.divergence_ratio(), DIVERGENCE_TOLERANCE));
    Ok(())
}

fn iterations_csv(trace: &IterationTrace) -> Vec<u8> {
    let mut t = Table::new(&["iterate", "l2", "h1dot", "contraction", "ratio", "residual", "inner_work", "quadrature_error"]);
    for r in &trace.iterates {
        t.row(&[
            Cell::I(r.iterate as i64),
            Cell::F(r.l2),
            Cell::F(r.h1dot),
            Cell::F(r.contraction),
            r.ratio.map_or(Cell::Empty, Cell::F),
            Cell::F(r.residual),
            Cell::I(r.inner_work as i64),
            Cell::F(r.quadrature_error),
        ]);
    }
    t.into_bytes()
}

fn build_command(cfg: &ExperimentConfig, out: &mut OutputDir, outcome: &mut Outcome) -> Result<(), RunError> {
    let f = forcing(cfg)?;
    out.write("forcing.ssns", &checkpoint::encode(&f))?;
    let (u, trace) = build(cfg, &f, outcome)?;
    out.write("U.ssns", &checkpoint::encode(&u))?;
    out.write("iterations.csv", &iterations_csv(&trace))?;
    out.write_json("trace.json", &trace)?;
    outcome.check(Check::new(
        "iterates respect energy and gradient bounds",
        trace.bound_violations() == 0,
        format!("{} violations", trace.bound_violations()),
    ));
    let ratios = trace.ratios();
    outcome.check(Check::new(
        "contraction ratios below one",
        ratios.iter().all(|&q| q < 1.0),
        format!("max measured ratio {}", trace.max_ratio().map_or("n/a".into(), fmt_f64)),
    ));
    let quadrature = trace
        .iterates
        .last()
        .filter(|r| r.l2 > 0.0)
        .map_or(0.0, |r| r.quadrature_error / r.l2);
    outcome.metric("relative_quadrature_error", quadrature);
    bound_checks(cfg, &u, &f, 10.0 * cfg.build.tol_outer + quadrature, outcome)?;
    if cfg.build.uniqueness_probe {
        let mut opts = build_options(cfg);
        opts.start = Some(alternative_start(&f, &cfg.physics, cfg.build.alt_seed));
        let (ub, tb) = build_steady(&f, &cfg.physics, &opts).ctx("uniqueness probe")?;
        let na = u.norm(NormKind::L2);
        let d = u.sub(&ub).ctx("uniqueness probe")?.norm(NormKind::L2);
        let rel = if na == 0.0 { d } else { d / na };
        outcome.metric("uniqueness_discrepancy", rel);
        let mut c = Check::at_most("second start reaches the same state", rel, 10.0 * cfg.build.tol_outer);
        c.passed &= tb.converged;
        outcome.check(c);
    }
    Ok(())
}

fn verify_command(cfg: &ExperimentConfig, out: &mut OutputDir, outcome: &mut Outcome) -> Result<(), RunError> {
    let path = cfg
        .verify_checkpoint
        .as_ref()
        .ok_or_else(|| RunError::Setup("verify-bounds needs verify.checkpoint or --checkpoint".into()))?;
    let bytes = fs::read(path).map_err(|source| IoError {
        path: path.clone(),
        source,
    })?;
    let u = checkpoint::decode(&bytes, cfg.lattice.dealias).map_err(|e| RunError::Setup(format!("{}: {e}", path.display())))?;
    let l = u.lattice();
    if l.n() != cfg.lattice.n || l.period() != cfg.lattice.period {
        return Err(RunError::Setup(format!(
            "{} holds an n = {}, period = {} field but the configuration asks for n = {}, period = {}",
            path.display(),
            l.n(),
            l.period(),
            cfg.lattice.n,
            cfg.lattice.period
        )));
    }
    outcome.check(Check::new(
        "checkpoint re-serializes byte-identically",
        checkpoint::encode(&u) == bytes,
        path.display().to_string(),
    ));
    outcome.check(Check::at_most("conjugate symmetry defect", u.hermitian_defect(), 1e-14));
    let f = forcing(cfg)?;
    let tol = cfg.verify_residual.unwrap_or(10.0 * cfg.build.tol_outer);
    bound_checks(cfg, &u, &f, tol, outcome)?;
    out.write_json(
        "bounds.json",
        &json!({
            "checkpoint_sha256": crate::output::sha256_hex(&bytes),
            "u_l2": u.norm(NormKind::L2),
            "u_h1dot": u.norm(NormKind::H1dot),
            "f_xnorm": f.norm(NormKind::X),
            "m_energy": cfg.physics.m_energy,
            "gradient_bound": f.norm(NormKind::X) / cfg.physics.nu,
            "steady_residual": outcome.metrics.get("steady_residual"),
            "divergence": u.divergence_ratio(),
        }),
    )?;
    Ok(())
}

pub fn trajectory_csv(rec: &TrajectoryRecord) -> Vec<u8> {
    let mut t = Table::new(&["t", "l2_w", "h1dot_w", "l2_v", "cum_enstrophy"]);
    for i in 0..rec.len() {
        t.row(&[
            Cell::F(rec.times[i]),
            Cell::F(rec.l2[i]),
            Cell::F(rec.h1dot[i]),
            Cell::F(rec.l2_v[i]),
            Cell::F(rec.cumulative_enstrophy[i]),
        ]);
    }
    t.into_bytes()
}

pub fn stability_csv(rec: &StabilityRunRecord) -> Vec<u8> {
    let mut t = Table::new(&["t", "pert_l2", "pert_h1dot", "low_energy", "high_energy", "violations_so_far"]);
    for i in 0..rec.times.len() {
        t.row(&[
            Cell::F(rec.times[i]),
            Cell::F(rec.pert_l2[i]),
            Cell::F(rec.pert_h1dot[i]),
            Cell::F(rec.low_energy[i]),
            Cell::F(rec.high_energy[i]),
            Cell::I(rec.violations_so_far[i] as i64),
        ]);
    }
    t.into_bytes()
}

fn heat_csv(r: &HeatEnvelopeReport) -> Vec<u8> {
    let mut t = Table::new(&["t", "phi_l2_sq", "exact_bound", "literal_bound", "holds", "literal_holds"]);
    for i in 0..r.times.len() {
        t.row(&[
            Cell::F(r.times[i]),
            Cell::F(r.measured[i]),
            Cell::F(r.exact_bound[i]),
            Cell::F(r.literal_bound[i]),
            Cell::I(r.holds[i] as i64),
            Cell::I(r.literal_form_holds[i] as i64),
        ]);
    }
    t.into_bytes()
}

fn inequality_table(reports: &[&InequalityReport]) -> Vec<u8> {
    let mut t = Table::new(&["name", "holds", "slack", "scale", "fitted_constant", "samples"]);
    for r in reports {
        t.row(&[
            Cell::S(r.name.clone()),
            Cell::I(r.holds as i64),
            Cell::F(r.slack),
            Cell::F(r.scale),
            r.fitted_constant.map_or(Cell::Empty, Cell::F),
            Cell::I(r.sample_points.len() as i64),
        ]);
    }
    t.into_bytes()
}

fn report_check(r: &InequalityReport) -> Check {
    Check::new(
        r.name.clone(),
        r.holds,
        format!("slack {} at scale {}", fmt_f64(r.slack), fmt_f64(r.scale)),
    )
}

fn decay_command(cfg: &ExperimentConfig, out: &mut OutputDir, outcome: &mut Outcome) -> Result<(), RunError> {
    let p = &cfg.physics;
    let f = forcing(cfg)?;
    let f_x = f.norm(NormKind::X);
    let (u, _) = build(cfg, &f, outcome)?;

    let k = cfg.decay.heat_samples;
    let times: Vec<f64> = (0..k).map(|i| cfg.evolution.horizon * i as f64 / (k - 1) as f64).collect();
    let heat = heat_envelope_check(&f, p, &times).ctx("heat envelope")?;
    out.write("heat_envelope.csv", &heat_csv(&heat))?;
    outcome.check(Check::new(
        "heat envelope",
        heat.all_hold(),
        format!("{} of {} samples respected", heat.holds.iter().filter(|&&h| h).count(), k),
    ));
    outcome.check(
        Check::new(
            "heat envelope, literal form",
            heat.literal_form_holds.iter().all(|&h| h),
            "recorded only".to_string(),
        )
        .info(),
    );

    let rec = evolve_difference(&u, &f, p, &cfg.evolution).ctx("evolve_difference")?;
    out.write("trajectory.csv", &trajectory_csv(&rec))?;
    outcome.metric("evolution_steps", rec.steps);
    outcome.metric("stopped_on_tail", rec.stopped_on_tail);

    let u_l2 = u.norm(NormKind::L2);
    let mut reports = Vec::new();
    for &m in &cfg.decay.m {
        match check_bootstrap_inequality(&rec, u_l2, f_x, p, m) {
            Ok(r) => {
                outcome.check(report_check(&r));
                reports.push(r);
            }
            Err(e) => outcome.check(Check::new(format!("bootstrap inequality, m = {m}"), false, e.to_string())),
        }
    }
    reports.push(check_decay_envelope(&rec, cfg.decay.envelope_exponent).ctx("decay envelope")?);
    reports.push(check_energy_inequality(&rec, f_x, p).ctx("energy inequality")?);
    for r in &reports[reports.len() - 2..] {
        outcome.check(report_check(r));
    }

    let window = [0.5 * rec.times.last().copied().unwrap_or(0.0), f64::INFINITY];
    let fits: Vec<RateFit> = [RateModel::Exponential, RateModel::Algebraic]
        .into_iter()
        .filter_map(|model| fit_rate(&rec.times, &rec.l2, model, window).ok())
        .collect();
    for fit in &fits {
        outcome.metric(&format!("{:?}_rate", fit.model).to_lowercase(), fit.exponent);
    }

    out.write("inequalities.csv", &inequality_table(&reports.iter().collect::<Vec<_>>()))?;
    out.write_json("reports.json", &json!({ "heat_envelope": heat, "inequalities": reports, "fits": fits }))?;
    Ok(())
}

/// `(s, t)` pairs spread over the recorded times of a run.
pub fn default_pairs(times: &[f64]) -> Vec<(f64, f64)> {
    if times.len() < 2 {
        return Vec::new();
    }
    let at = |x: f64| times[((times.len() - 1) as f64 * x) as usize];
    let mut pairs = vec![(0.0, at(0.1)), (at(0.1), at(0.3)), (0.0, at(0.5)), (at(0.3), at(0.8)), (at(0.5), at(1.0))];
    pairs.retain(|(s, t)| s < t);
    pairs
}

pub fn perturbation(cfg: &ExperimentConfig, u: &SpectralVectorField) -> SpectralVectorField {
    let mut w0 = random_solenoidal(&cfg.lattice(), cfg.stability.w0_seed, 0.0, cfg.stability.w0_rho1);
    let n = w0.norm(NormKind::L2);
    let target = cfg.stability.amplitude * u.norm(NormKind::L2);
    w0.scale(if n > 0.0 { target / n } else { 0.0 });
    w0
}

fn stability_command(cfg: &ExperimentConfig, out: &mut OutputDir, outcome: &mut Outcome) -> Result<(), RunError> {
    let p = &cfg.physics;
    let s = &cfg.stability;
    let f = forcing(cfg)?;
    let (u, _) = build(cfg, &f, outcome)?;
    let w0 = perturbation(cfg, &u);
    let ecfg = EvolutionConfig {
        horizon: s.horizon,
        tail_tolerance: 0.0,
        ..cfg.evolution
    };
    let opts = StabilityOptions {
        alpha: s.alpha,
        decay_target: s.decay_target,
        max_steps: s.max_steps,
        record_shells: true,
        linear_only: s.linear_only,
        ..StabilityOptions::default()
    };
    let rec = stability_experiment(&u, &f, &w0, p, &ecfg, &opts).ctx("stability_experiment")?;
    out.write("stability.csv", &stability_csv(&rec))?;
    outcome.warnings.extend(rec.warnings.iter().cloned());
    outcome.metric("steps", rec.steps);
    outcome.metric("final_time", rec.times.last().copied().unwrap_or(0.0));
    outcome.metric("final_ratio", rec.final_ratio());

    let w02 = rec.initial_l2 * rec.initial_l2;
    if rec.initial_l2 > 0.0 {
        outcome.check(Check::new(
            "perturbation reached the decay target",
            rec.reached_target,
            format!("|w|/|w0| = {} after {} steps", fmt_f64(rec.final_ratio()), rec.steps),
        ));
    }
    outcome.check(Check::new(
        "perturbation norm non-increasing",
        rec.monotonicity_violations == 0,
        format!("{} violations", rec.monotonicity_violations),
    ));
    let (low, high) = rec.final_split();
    outcome.check(Check::at_most("final low-frequency energy", low, SPLIT_TOLERANCE * w02));
    outcome.check(Check::at_most("final high-frequency energy", high, SPLIT_TOLERANCE * w02));
    outcome.check(Check::at_most("energy balance defect", rec.energy_balance_defect, ENERGY_BALANCE_TOLERANCE));
    outcome.check(
        Check::new(
            "smallness gate",
            rec.gate.passes(),
            format!(
                "analytic {} vs {}, production ratio {}",
                fmt_f64(rec.gate.value),
                fmt_f64(rec.gate.threshold),
                fmt_f64(rec.gate.production_ratio)
            ),
        )
        .info(),
    );

    let pairs = s.pairs.clone().unwrap_or_else(|| default_pairs(&rec.times));
    let gen = check_generalized_inequalities(&rec, &pairs, s.alpha).ctx("generalized inequalities")?;
    outcome.check(report_check(&gen.low_majorant));
    outcome.check(report_check(&gen.high_majorant));
    outcome.check(report_check(&gen.low).info());
    outcome.check(report_check(&gen.high).info());
    out.write("inequalities.csv", &inequality_table(&gen.reports()))?;
    out.write_json(
        "reports.json",
        &json!({
            "pairs": pairs,
            "gate": rec.gate,
            "majorants": rec.majorants,
            "generalized": gen,
            "initial_l2": rec.initial_l2,
            "steady_l2": rec.steady_l2,
            "steady_h1dot": rec.steady_h1dot,
            "energy_balance_defect": rec.energy_balance_defect,
        }),
    )?;
    Ok(())
}

/// One sweep point, as reported in the roll-up.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub value: f64,
    pub dir: String,
    pub manifest: Result<RunManifest, String>,
}

impl SweepPoint {
    pub fn status(&self) -> &'static str {
        match &self.manifest {
            Ok(m) if m.error.is_some() => "error",
            Ok(m) if m.passed => "pass",
            Ok(_) => "fail",
            Err(_) => "error",
        }
    }

    fn metric(&self, key: &str) -> Option<f64> {
        self.manifest.as_ref().ok()?.metrics.get(key)?.as_f64()
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.metric("build_max_ratio")
    }
}

/// Least-squares slope of `log q` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn sweep_command(cfg: &ExperimentConfig, out: &mut OutputDir, outcome: &mut Outcome, workers: usize) -> Result<(), RunError> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| RunError::Setup("sweep needs a [sweep] section".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Setup(format!("worker pool: {e}")))?;
    let root: PathBuf = out.root().to_path_buf();
    let points: Vec<SweepPoint> = pool.install(|| {
        sweep
            .values
            .par_iter()
            .enumerate()
            .map(|(index, &value)| {
                let dir = format!("point-{index:03}");
                let manifest = cfg
                    .point(&sweep.parameter, value)
                    .map_err(|e| e.to_string())
                    .and_then(|pcfg| run_command(sweep.command, &pcfg, &root.join(&dir), 1).map_err(|e| e.to_string()));
                SweepPoint {
                    index,
                    value,
                    dir,
                    manifest,
                }
            })
            .collect()
    });

    let mut t = Table::new(&["index", "value", "status", "max_ratio", "iterations", "steady_residual", "failed_checks", "error"]);
    for p in &points {
        let (failed, error) = match &p.manifest {
            Ok(m) => (
                m.failed_checks().map(|c| c.name.as_str()).collect::<Vec<_>>().join("; "),
                m.error.clone().unwrap_or_default(),
            ),
            Err(e) => (String::new(), e.clone()),
        };
        t.row(&[
            Cell::I(p.index as i64),
            Cell::F(p.value),
            Cell::S(p.status().into()),
            p.max_ratio().map_or(Cell::Empty, Cell::F),
            p.metric("build_iterations").map_or(Cell::Empty, |x| Cell::I(x as i64)),
            p.metric("steady_residual").map_or(Cell::Empty, Cell::F),
            Cell::S(failed),
            Cell::S(error),
        ]);
        if let Ok(m) = &p.manifest {
            for a in &m.artifacts {
                out.record(ArtifactRecord {
                    path: format!("{}/{}", p.dir, a.path),
                    ..a.clone()
                });
            }
        }
        let mut c = Check::new(
            format!("point {} ({} = {})", p.index, sweep.parameter, p.value),
            p.status() == "pass",
            p.status(),
        );
        if let Err(e) = &p.manifest {
            c.detail = e.clone();
        }
        outcome.check(c);
    }
    out.write("sweep.csv", &t.into_bytes())?;

    let first_failure = points.iter().find(|p| p.status() != "pass").map(|p| p.value);
    outcome.metric("first_failing_value", first_failure);
    let q: Vec<(f64, f64)> = points.iter().filter_map(|p| Some((p.value, p.max_ratio()?))).collect();
    outcome.metric("contraction_ratios", q.iter().map(|&(v, r)| json!([v, r])).collect::<Vec<_>>());
    if sweep.parameter == "forcing.x_norm" {
        let slope = log_log_slope(&q);
        outcome.metric("contraction_slope", slope);
        if q.len() >= 3 {
            if let Some(s) = slope {
                let mut c = Check::at_most("contraction ratio linear in |f|_X", (s - 1.0).abs(), 0.2);
                c.detail = format!("log-log slope {}", fmt_f64(s));
                outcome.check(c);
            }
        }
    }
    Ok(())
}
