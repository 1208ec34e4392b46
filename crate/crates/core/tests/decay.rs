use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use steadylab_core::decay::*;
use steadylab_core::evolution::{evolve_difference, EvolutionConfig, TrajectoryRecord};
use steadylab_core::semigroup::heat_evolve;
use steadylab_core::steady::stokes_solve;
use steadylab_core::*;

fn lat(n: usize) -> Lattice {
    Lattice::new(n, 1.0, DEFAULT_DEALIAS).unwrap()
}

fn forcing(l: Lattice) -> SpectralVectorField {
    let spec = ForcingSpec {
        rho0: 2.0,
        rho1: 3.0,
        target_x_norm: 2.0,
        seed: 7,
    };
    random_bandpass_forcing(&l, &spec).unwrap()
}

fn config(horizon: f64) -> EvolutionConfig {
    EvolutionConfig {
        dt: 1e-3,
        horizon,
        tail_tolerance: 0.0,
        snapshot_stride: 1,
        store_fields: false,
    }
}

#[test]
fn noisy_algebraic_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            3.0 * (1.0 + t).powf(-1.25) * (1.0 + 0.01 * z)
        })
        .collect();
    let fit = fit_rate(&t, &y, RateModel::Algebraic, [0.0, 10.0]).unwrap();
    assert!((fit.exponent - 1.25).abs() <= 0.05, "beta {}", fit.exponent);
    assert!(fit.rms_log_residual > 0.0 && fit.rms_log_residual < 0.03);
    assert_eq!(fit.samples, 200);
    assert!((fit.eval(0.0) - 3.0).abs() < 0.1);
}

#[test]
fn split_of_a_known_mode() {
    let l = lat(16);
    let mut w = SpectralVectorField::zeros(l);
    let z = num_complex::Complex64::new(0.0, 0.0);
    w.set_mode([0, 3, 4], [num_complex::Complex64::new(1.0, 0.0), z, z]);
    // |k| = 5: the radius 5 itself belongs to the high part
    assert_eq!(fourier_split(&w, 5.0), (0.0, 2.0));
    assert_eq!(fourier_split(&w, 5.0 + 1e-9), (2.0, 0.0));
}

#[test]
fn bootstrap_on_zero_trajectory() {
    let l = lat(16);
    let f = forcing(l);
    let p = PhysicalParams::new(0.1, 2.0, 1.0).unwrap();
    let zero = SpectralVectorField::zeros(l);
    let rec = evolve_difference(&zero, &f, &p, &config(0.2)).unwrap();
    let r = check_bootstrap_inequality(&rec, 0.0, f.norm(NormKind::X), &p, 4).unwrap();
    assert!(r.holds);
    assert_eq!(r.slack, 0.0);
    assert!(r.rhs.iter().all(|&x| x >= 0.0));
    assert!(matches!(
        check_bootstrap_inequality(&rec, 0.0, 1.0, &p, 3),
        Err(Error::InvalidParameter { .. })
    ));
}

#[test]
fn bootstrap_on_heat_trajectory() {
    let l = lat(16);
    let f = forcing(l);
    let p = PhysicalParams::new(0.1, 2.0, 1.0).unwrap();
    let dt = 1e-3;
    let samples: Vec<SpectralVectorField> = (0..=1000).map(|j| heat_evolve(&f, p.nu, j as f64 * dt).unwrap()).collect();
    let rec = TrajectoryRecord::from_v_samples(p.nu, dt, &samples).unwrap();
    for m in [4, 6] {
        let r = check_bootstrap_inequality(&rec, 0.0, f.norm(NormKind::X), &p, m).unwrap();
        assert!(r.holds);
        // exponential decay beats the polynomial weight on this window
        assert!(r.lhs.iter().all(|&x| x < 0.0));
    }
}

#[test]
fn coarse_trajectory_is_rejected() {
    let l = lat(16);
    let f = forcing(l);
    let p = PhysicalParams::new(0.1, 2.0, 1.0).unwrap();
    let u = stokes_solve(&f, p.nu);
    let mut cfg = config(1.0);
    cfg.dt = 5e-3;
    cfg.snapshot_stride = 20;
    let rec = evolve_difference(&u, &f, &p, &cfg).unwrap();
    assert!(matches!(
        check_bootstrap_inequality(&rec, u.norm(NormKind::L2), f.norm(NormKind::X), &p, 4),
        Err(Error::UnderResolved(_))
    ));
}

#[test]
fn recorded_run_satisfies_bootstrap_and_envelope() {
    let l = lat(16);
    let f = forcing(l);
    let p = PhysicalParams::new(0.1, 2.0, 1.0).unwrap();
    let u = stokes_solve(&f, p.nu);
    let rec = evolve_difference(&u, &f, &p, &config(3.0)).unwrap();
    let (ul2, fx) = (u.norm(NormKind::L2), f.norm(NormKind::X));
    for m in [4, 6] {
        let r = check_bootstrap_inequality(&rec, ul2, fx, &p, m).unwrap();
        assert!(r.holds, "m = {m}: slack {} scale {}", r.slack, r.scale);
        assert!(r.fitted_constant.unwrap() > 0.0);
        assert!(r.sample_points.len() > rec.len() / 2);
    }
    let env = check_decay_envelope(&rec, 2.5).unwrap();
    assert!(env.holds);
    let fit = fit_rate(&rec.times, &rec.l2, RateModel::Exponential, [1.5, 3.0]).unwrap();
    assert!(fit.exponent > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_partitions_energy(seed in 0u64..1000, radius in 0.0f64..8.0) {
        let l = lat(8);
        let w = random_solenoidal(&l, seed, 0.0, f64::INFINITY);
        let (lo, hi) = fourier_split(&w, radius);
        let e = w.norm(NormKind::L2).powi(2);
        prop_assert!((lo + hi - e).abs() <= 1e-14 * e);
        prop_assert!(lo >= 0.0 && hi >= 0.0);
    }

    #[test]
    fn split_is_monotone_in_radius(seed in 0u64..1000, a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let l = lat(8);
        let w = random_solenoidal(&l, seed, 0.0, f64::INFINITY);
        let (r0, r1) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(fourier_split(&w, r0).0 <= fourier_split(&w, r1).0);
    }
}
