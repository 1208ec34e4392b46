use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use steadylab_core::decay::{fit_rate, RateModel};
use steadylab_core::semigroup::*;
use steadylab_core::*;

fn lat(n: usize) -> Lattice {
    Lattice::new(n, 1.0, DEFAULT_DEALIAS).unwrap()
}

fn band(l: Lattice, rho0: f64, rho1: f64, seed: u64) -> SpectralVectorField {
    let spec = ForcingSpec {
        rho0,
        rho1,
        target_x_norm: 1.0,
        seed,
    };
    random_bandpass_forcing(&l, &spec).unwrap()
}

/// `sum |c_k|^2 exp(-8 pi^2 nu |k|^2 t)` straight from the coefficients.
fn modewise_energy(f: &SpectralVectorField, nu: f64, t: f64) -> f64 {
    let l = f.lattice();
    (0..l.len())
        .map(|idx| {
            let k2 = l.k2(idx) as f64;
            let a: f64 = f.at(idx).iter().map(|z| z.norm_sqr()).sum();
            a * (-8.0 * PI * PI * nu * k2 * t).exp()
        })
        .sum()
}

#[test]
fn single_mode_factor() {
    let l = lat(16);
    let mut f = SpectralVectorField::zeros(l);
    let z = Complex64::new(0.0, 0.0);
    f.set_mode([0, 3, 4], [Complex64::new(1.0, 0.5), z, z]);
    let phi = heat_evolve(&f, 1.0, 0.01).unwrap();
    let got = phi.at(l.index([0, 3, 4]).unwrap())[0];
    let want = Complex64::new(1.0, 0.5) * (-PI * PI).exp();
    assert!((got - want).norm() <= 1e-12 * want.norm());
    assert!(((-PI * PI).exp() - 5.1724e-5).abs() < 1e-8);
    assert_eq!(heat_evolve(&f, 1.0, 0.0).unwrap(), f);
    assert!(matches!(heat_evolve(&f, 1.0, -1.0), Err(Error::NegativeTime(_))));
}

#[test]
fn band_decay_rate_is_lowest_shell() {
    let l = lat(16);
    let nu = 0.1;
    let f = band(l, 3.0, 3.5, 4);
    let times: Vec<f64> = (0..=40).map(|i| 2.0 + 0.05 * i as f64).collect();
    let energy: Vec<f64> = times
        .iter()
        .map(|&t| heat_evolve(&f, nu, t).unwrap().norm(NormKind::L2).powi(2))
        .collect();
    for (t, e) in times.iter().zip(&energy) {
        let want = modewise_energy(&f, nu, *t);
        assert!((e - want).abs() <= 1e-12 * want, "t = {t}: {e} vs {want}");
    }
    let fit = fit_rate(&times, &energy, RateModel::Exponential, [2.0, 4.0]).unwrap();
    let rate = 8.0 * PI * PI * nu * 9.0;
    assert!((fit.exponent - rate).abs() <= 1e-6 * rate, "{} vs {rate}", fit.exponent);
}

#[test]
fn envelope_examples() {
    let l = lat(16);
    let p = PhysicalParams::new(0.1, 3.0, 1.0).unwrap();
    let times: Vec<f64> = (0..50).map(|i| 0.02 * i as f64).collect();

    // one shell: measured equals the sharp envelope
    let single = band(l, 3.0, 3.1, 2);
    let r = heat_envelope_check(&single, &p, &times).unwrap();
    assert!(r.all_hold());
    for (m, e) in r.measured.iter().zip(&r.exact_bound) {
        assert!((m - e).abs() <= 1e-12 * e);
    }

    let multi = band(l, 3.0, 4.5, 2);
    let r = heat_envelope_check(&multi, &p, &times).unwrap();
    assert_eq!(r.rho_bar, 3.0);
    assert!(r.all_hold());
    assert_eq!(r.times.len(), r.literal_bound.len());
    for i in 1..times.len() {
        assert!(r.measured[i] < r.exact_bound[i]);
        let oracle = modewise_energy(&multi, p.nu, times[i]);
        assert!((r.measured[i] - oracle).abs() <= 1e-12 * oracle);
    }

    let low = band(l, 2.0, 4.0, 2);
    match heat_envelope_check(&low, &p, &times) {
        Err(Error::SupportViolation { shells, .. }) => assert!(shells.iter().all(|&r| r < 3.0)),
        other => panic!("expected a support violation, got {other:?}"),
    }
}

#[test]
fn energy_identity() {
    let l = lat(16);
    let f = band(l, 2.0, 4.0, 8);
    let s = ShellSpectrum::of(&f);
    let f2 = f.norm(NormKind::L2).powi(2);
    for t in [0.0, 0.01, 0.3, 2.0, 50.0] {
        let lhs = s.energy(0.05, t) + s.dissipation(0.05, t);
        assert!((lhs - f2).abs() <= 1e-10 * f2);
    }
}

#[test]
fn surrogate_integral_converges() {
    let l = lat(16);
    let f = band(l, 2.0, 4.0, 9);
    let s = ShellSpectrum::of(&f);
    let nu = 0.1;
    let ts = [0.5, 1.0, 2.0, 4.0, 8.0];
    let vals: Vec<f64> = ts.iter().map(|&t| s.l3_surrogate_integral(nu, t, (2000.0 * t) as usize)).collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
    // the tail beyond t = 4 is far below the quadrature error of the whole integral
    assert!(vals[4] - vals[3] <= 1e-9 * vals[4]);
    assert!(vals[1] - vals[0] > 0.0);
    // closed-form bound: |Phi|_2 |grad Phi|_2 <= |f|_2 |grad f|_2 exp(-4 pi^2 nu rho^2 t) per factor
    let g = f.norm(NormKind::L2) * f.norm(NormKind::H1dot);
    let lim = g / (8.0 * PI * PI * nu * 4.0);
    assert!(vals[4] <= lim);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn semigroup_property(seed in 0u64..1000, s in 0.0f64..0.5, t in 0.0f64..0.5) {
        let l = lat(8);
        let f = random_solenoidal(&l, seed, 0.0, f64::INFINITY);
        let a = heat_evolve(&heat_evolve(&f, 0.3, s).unwrap(), 0.3, t).unwrap();
        let b = heat_evolve(&f, 0.3, s + t).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-13 * f.max_abs());
    }
}
