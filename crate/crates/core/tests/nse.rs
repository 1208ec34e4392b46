use std::f64::consts::PI;

use num_complex::Complex64;
use steadylab_core::decay::check_generalized_inequalities;
use steadylab_core::evolution::EvolutionConfig;
use steadylab_core::nse::*;
use steadylab_core::steady::{build_steady, BuildOptions};
use steadylab_core::*;

fn lat(n: usize) -> Lattice {
    Lattice::new(n, 1.0, DEFAULT_DEALIAS).unwrap()
}

struct Setup {
    f: SpectralVectorField,
    u: SpectralVectorField,
    p: PhysicalParams,
}

fn setup(n: usize) -> Setup {
    let l = lat(n);
    let spec = ForcingSpec {
        rho0: 2.0,
        rho1: 3.0,
        target_x_norm: 2.0,
        seed: 7,
    };
    let f = random_bandpass_forcing(&l, &spec).unwrap();
    let p = PhysicalParams::new(0.1, 2.0, 1.0).unwrap();
    let opts = BuildOptions {
        tol_outer: 1e-12,
        tol_inner: 1e-13,
        ..BuildOptions::default()
    };
    let (u, trace) = build_steady(&f, &p, &opts).unwrap();
    assert!(trace.converged);
    Setup { f, u, p }
}

fn cfg(dt: f64, horizon: f64, stride: usize) -> EvolutionConfig {
    EvolutionConfig {
        dt,
        horizon,
        tail_tolerance: 0.0,
        snapshot_stride: stride,
        store_fields: false,
    }
}

fn scaled_to(mut w: SpectralVectorField, target: f64) -> SpectralVectorField {
    let n = w.norm(NormKind::L2);
    w.scale(target / n);
    w
}

/// Sample times at the given fractions of the run, paired as in the acceptance suite.
fn pairs(times: &[f64]) -> Vec<(f64, f64)> {
    let at = |x: f64| times[((times.len() - 1) as f64 * x) as usize];
    vec![
        (0.0, at(0.1)),
        (at(0.1), at(0.3)),
        (0.0, at(0.5)),
        (at(0.3), at(0.8)),
        (at(0.5), at(1.0)),
    ]
}

#[test]
fn taylor_green_is_heat_decay() {
    let l = lat(16);
    let mut u0 = SpectralVectorField::zeros(l);
    let z = Complex64::new(0.0, 0.0);
    u0.set_mode([1, 1, 0], [Complex64::new(0.0, -0.25), Complex64::new(0.0, 0.25), z]);
    u0.set_mode([1, -1, 0], [Complex64::new(0.0, -0.25), Complex64::new(0.0, -0.25), z]);
    let zero = SpectralVectorField::zeros(l);
    let nu = 0.1;
    let mut solver = NseSolver::new(&zero, nu, 1e-3).unwrap();
    let mut u = u0.clone();
    for step in 0..100 {
        u = solver.step(&u, step).unwrap();
    }
    let exact = u0.scaled((-8.0 * PI * PI * nu * 0.1).exp());
    let rel = u.sub(&exact).unwrap().norm(NormKind::L2) / exact.norm(NormKind::L2);
    assert!(rel <= 1e-6, "relative error {rel}");
    assert_eq!(nse_step(&zero, &zero, nu, 1e-3).unwrap().max_abs(), 0.0);
}

#[test]
fn steady_state_is_a_fixed_point() {
    let s = setup(16);
    let mut solver = NseSolver::new(&s.f, s.p.nu, 1e-3).unwrap();
    let mut u = s.u.clone();
    let scale = s.u.norm(NormKind::L2);
    for step in 0..1000 {
        u = solver.step(&u, step).unwrap();
    }
    let drift = u.sub(&s.u).unwrap().norm(NormKind::L2);
    assert!(drift <= 1e-8 * scale, "drift {}", drift / scale);
}

#[test]
fn zero_perturbation_stays_zero() {
    let s = setup(16);
    let l = *s.f.lattice();
    let opts = StabilityOptions {
        record_shells: false,
        ..StabilityOptions::default()
    };
    let rec = stability_experiment(&s.u, &s.f, &SpectralVectorField::zeros(l), &s.p, &cfg(1e-3, 0.5, 10), &opts).unwrap();
    assert_eq!(rec.steps, 500);
    let scale = s.u.norm(NormKind::L2);
    assert!(rec.pert_l2.iter().all(|&x| x <= 1e-10 * scale));
}

#[test]
fn single_mode_perturbation_decays_linearly() {
    let s = setup(16);
    let l = *s.f.lattice();
    let z = Complex64::new(0.0, 0.0);
    let mut w0 = SpectralVectorField::zeros(l);
    w0.set_mode([1, 0, 0], [z, Complex64::new(0.5, 0.5), z]);
    let w0 = scaled_to(w0, 1e-3 * s.u.norm(NormKind::L2));
    let opts = StabilityOptions {
        record_shells: false,
        ..StabilityOptions::default()
    };
    let c = cfg(1e-3, 20.0, 10);
    let full = stability_experiment(&s.u, &s.f, &w0, &s.p, &c, &opts).unwrap();
    assert!(full.reached_target);
    assert_eq!(full.monotonicity_violations, 0);
    assert!(full.final_ratio() <= 1e-3);
    assert!(full.pert_l2.windows(2).all(|w| w[1] <= w[0] + 1e-9 * full.initial_l2));

    let half = stability_experiment(&s.u, &s.f, &w0.scaled(0.5), &s.p, &c, &opts).unwrap();
    let n = full.pert_l2.len().min(half.pert_l2.len());
    for i in 0..n {
        let r = half.pert_l2[i] / (0.5 * full.pert_l2[i]);
        assert!((r - 1.0).abs() <= 0.05, "t = {}: ratio {r}", full.times[i]);
    }
}

#[test]
fn stability_run_and_generalized_inequalities() {
    let s = setup(16);
    let l = *s.f.lattice();
    let w0 = scaled_to(random_solenoidal(&l, 11, 0.0, 4.0), 0.1 * s.u.norm(NormKind::L2));
    let rec = stability_experiment(&s.u, &s.f, &w0, &s.p, &cfg(1e-3, 20.0, 1), &StabilityOptions::default()).unwrap();
    assert!(rec.reached_target);
    assert_eq!(rec.monotonicity_violations, 0);
    assert!(rec.final_ratio() <= 1e-3);
    assert!(rec.gate.passes());
    assert!(rec.energy_balance_defect <= 1e-6, "balance {}", rec.energy_balance_defect);
    let w02 = rec.initial_l2 * rec.initial_l2;
    let (low, high) = rec.final_split();
    assert!(low <= 1e-6 * w02 && high <= 1e-6 * w02);
    for i in 0..rec.times.len() {
        let total = rec.pert_l2[i] * rec.pert_l2[i];
        assert!((rec.low_energy[i] + rec.high_energy[i] - total).abs() <= 1e-12 * total.max(1e-300));
    }

    let report = check_generalized_inequalities(&rec, &pairs(&rec.times), 4.0).unwrap();
    assert!(report.low_majorant.holds, "{:?}", report.low_majorant.margins());
    assert!(report.high_majorant.holds, "{:?}", report.high_majorant.margins());
    assert!(report.low.holds);
    assert!(matches!(
        check_generalized_inequalities(&rec, &[(0.0, 1e-4)], 4.0),
        Err(Error::MissingSample(_))
    ));
    assert!(check_generalized_inequalities(&rec, &pairs(&rec.times), 3.0).is_err());
}

#[test]
fn linear_runs_satisfy_generalized_inequalities() {
    let s = setup(16);
    let l = *s.f.lattice();
    let w0 = scaled_to(random_solenoidal(&l, 11, 0.0, 4.0), 0.1 * s.u.norm(NormKind::L2));
    let opts = StabilityOptions {
        linear_only: true,
        ..StabilityOptions::default()
    };
    let rec = stability_experiment(&s.u, &s.f, &w0, &s.p, &cfg(1e-3, 2.0, 1), &opts).unwrap();
    let report = check_generalized_inequalities(&rec, &pairs(&rec.times), 4.0).unwrap();
    assert!(report.low.holds && report.low.slack >= 0.0, "{:?}", report.low.margins());
    assert!(report.low_majorant.holds && report.high_majorant.holds);

    // pure heat flow: the low-frequency inequality is an identity
    let zero = SpectralVectorField::zeros(l);
    let rec = stability_experiment(&zero, &zero, &w0, &s.p, &cfg(1e-3, 0.3, 1), &opts).unwrap();
    let report = check_generalized_inequalities(&rec, &pairs(&rec.times), 4.0).unwrap();
    for r in report.reports() {
        assert!(r.holds, "{}: {:?}", r.name, r.margins());
    }
    for (a, b) in report.low.lhs.iter().zip(&report.low.rhs) {
        assert!((a - b).abs() <= 1e-12 * b);
    }
}

#[test]
fn zero_run_gives_equality() {
    let l = lat(16);
    let zero = SpectralVectorField::zeros(l);
    let p = PhysicalParams::new(0.1, 2.0, 1.0).unwrap();
    let rec = stability_experiment(&zero, &zero, &zero, &p, &cfg(1e-3, 0.1, 1), &StabilityOptions::default()).unwrap();
    let report = check_generalized_inequalities(&rec, &pairs(&rec.times), 4.0).unwrap();
    for r in report.reports() {
        assert!(r.holds);
        assert_eq!(r.slack, 0.0);
        assert!(r.lhs.iter().chain(&r.rhs).all(|&x| x == 0.0));
    }
}
