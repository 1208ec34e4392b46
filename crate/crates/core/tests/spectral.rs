use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use steadylab_core::*;

const Z: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn lat(n: usize) -> Lattice {
    Lattice::new(n, 1.0, DEFAULT_DEALIAS).unwrap()
}

/// `(sin 2pi x cos 2pi y, -cos 2pi x sin 2pi y, 0)`.
fn taylor_green(l: Lattice) -> SpectralVectorField {
    let mut u = SpectralVectorField::zeros(l);
    u.set_mode([1, 1, 0], [c(0.0, -0.25), c(0.0, 0.25), Z]);
    u.set_mode([1, -1, 0], [c(0.0, -0.25), c(0.0, -0.25), Z]);
    u
}

/// Direct synthesis of `u` and `grad u` at one point, summing every stored mode.
fn synth(u: &SpectralVectorField, x: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let l = u.lattice();
    let mut val = [0.0; 3];
    let mut grad = [[0.0; 3]; 3];
    for idx in 0..l.len() {
        let v = u.at(idx);
        if v.iter().all(|z| *z == Z) {
            continue;
        }
        let k = l.k(idx);
        let phase = 2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
        let e = c(phase.cos(), phase.sin());
        for i in 0..3 {
            let z = v[i] * e;
            val[i] += z.re;
            for j in 0..3 {
                grad[j][i] += (z * c(0.0, 2.0 * PI * k[j] as f64)).re;
            }
        }
    }
    (val, grad)
}

#[test]
fn lattice_examples() {
    let l = lat(4);
    let mut freqs: Vec<i64> = (0..4).map(|i| l.freq(i)).collect();
    freqs.sort();
    assert_eq!(freqs, [-1, 0, 1, 2]);
    assert!((l.cutoff() - 4.0 / 3.0).abs() < 1e-15);
    assert!((lat(32).cutoff() - 32.0 / 3.0).abs() < 1e-15);
    let err = Lattice::new(5, 1.0, DEFAULT_DEALIAS).unwrap_err();
    assert!(err.to_string().contains("n must be even"));
}

#[test]
fn forcing_band_and_determinism() {
    let l = lat(32);
    let spec = ForcingSpec {
        rho0: 3.0,
        rho1: 5.0,
        target_x_norm: 1.0,
        seed: 17,
    };
    let f = random_bandpass_forcing(&l, &spec).unwrap();
    for idx in 0..l.len() {
        let r = (l.k2(idx) as f64).sqrt();
        if r < 3.0 || r > 5.0 {
            assert!(f.at(idx).iter().all(|z| *z == Z), "mode {:?} not zero", l.k(idx));
        }
    }
    assert_eq!(f, random_bandpass_forcing(&l, &spec).unwrap());
    assert!((f.norm(NormKind::X) - 1.0).abs() < 1e-12);
    assert!(f.divergence_ratio() <= 1e-12);
    assert!(f.hermitian_defect() <= 1e-14);
}

#[test]
fn forcing_empty_band() {
    let l = lat(8);
    let spec = ForcingSpec {
        rho0: 3.0,
        rho1: 3.1,
        target_x_norm: 1.0,
        seed: 1,
    };
    let shells_in_band = l
        .shells()
        .into_iter()
        .filter(|&s| (9.0..=9.61).contains(&(s as f64)) && l.retained_k2(s))
        .count();
    // |k| = 3 exists on the grid but lies beyond the 8^3 dealias cutoff 8/3
    assert_eq!(shells_in_band, 0);
    assert!(matches!(
        random_bandpass_forcing(&l, &spec),
        Err(Error::EmptyBand { .. })
    ));
}

#[test]
fn leray_examples() {
    let l = lat(16);
    let k = [0.0, 3.0, 4.0];
    let mut grad = SpectralVectorField::zeros(l);
    grad.set_mode([0, 3, 4], [c(0.0, k[0]), c(0.0, k[1]), c(0.0, k[2])]);
    assert!(grad.leray_project().max_abs() <= 1e-14);
    assert!((grad.divergence_ratio() - 1.0).abs() < 1e-12);

    let mut free = SpectralVectorField::zeros(l);
    free.set_mode([0, 3, 4], [c(1.0, 0.0), Z, Z]);
    let p = free.leray_project();
    assert!(p.sub(&free).unwrap().max_abs() <= 1e-14);
}

#[test]
fn leray_matches_scalar_loop() {
    let l = lat(8);
    let mut u = random_solenoidal(&l, 3, 0.0, f64::INFINITY);
    // add a gradient part so the projector has work to do
    for idx in 0..l.len() {
        let k = l.k(idx);
        let s = c(0.1 * (idx % 7) as f64, 0.0);
        let mut v = u.at(idx);
        for j in 0..3 {
            v[j] += s * k[j] as f64;
        }
        u.set(idx, v);
    }
    let p = u.leray_project();
    for idx in 0..l.len() {
        let k = l.k(idx);
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let v = u.at(idx);
        let got = p.at(idx);
        for i in 0..3 {
            let mut want = Z;
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let m = if k2 == 0.0 { 0.0 } else { delta - k[i] as f64 * k[j] as f64 / k2 };
                want += v[j] * m;
            }
            assert!((got[i] - want).norm() <= 1e-14 * (1.0 + want.norm()));
        }
    }
    assert!(p.divergence_ratio() <= 1e-12);
    assert!(p.leray_project().sub(&p).unwrap().norm(NormKind::L2) <= 1e-14);
}

#[test]
fn norm_examples() {
    let l = lat(16);
    let mut u = SpectralVectorField::zeros(l);
    u.set_mode([0, 3, 4], [c(1.0, 0.0), Z, Z]);
    let s2 = 2f64.sqrt();
    assert!((u.norm(NormKind::L2) - s2).abs() < 1e-14);
    assert!((u.norm(NormKind::Hminus1) - s2 / (10.0 * PI)).abs() < 1e-15);
    assert!((u.norm(NormKind::H1dot) - s2 * 10.0 * PI).abs() < 1e-12);
    assert!((u.norm(NormKind::X) - s2).abs() < 1e-14);
}

#[test]
fn inner_product_examples() {
    let l = lat(16);
    let u = random_solenoidal(&l, 4, 0.0, 3.0);
    let n = u.norm(NormKind::L2);
    assert!((u.inner_product(&u).unwrap() - n * n).abs() <= 1e-14 * n * n);
    let v = random_solenoidal(&l, 5, 3.5, 5.0);
    assert_eq!(u.inner_product(&v).unwrap(), 0.0);

    let mut g = SpectralVectorField::zeros(l);
    g.set_mode([0, 3, 4], [Z, c(0.0, 3.0), c(0.0, 4.0)]);
    let mut d = SpectralVectorField::zeros(l);
    d.set_mode([0, 3, 4], [c(0.7, -0.2), c(0.0, 4.0), c(0.0, -3.0)]);
    assert!(g.inner_product(&d).unwrap().abs() <= 1e-14);
    assert!(matches!(u.inner_product(&SpectralVectorField::zeros(lat(8))), Err(Error::LatticeMismatch)));
}

#[test]
fn taylor_green_advection_is_a_gradient() {
    let l = lat(8);
    let u = taylor_green(l);
    // brute force: u . grad u against grad of -(cos 4pi x + cos 4pi y)/4
    let n = l.n();
    for a in 0..n {
        for b in 0..n {
            for cz in [0, 3] {
                let x = [a as f64 / n as f64, b as f64 / n as f64, cz as f64 / n as f64];
                let (v, g) = synth(&u, x);
                let adv: Vec<f64> = (0..3).map(|i| (0..3).map(|j| v[j] * g[j][i]).sum()).collect();
                let want = [PI * (4.0 * PI * x[0]).sin(), PI * (4.0 * PI * x[1]).sin(), 0.0];
                for i in 0..3 {
                    assert!((adv[i] - want[i]).abs() <= 1e-12, "{adv:?} vs {want:?} at {x:?}");
                }
            }
        }
    }
    let n = nonlinear_term(&u, &u).unwrap();
    assert!(n.max_abs() <= 1e-12);
}

#[test]
fn two_mode_product_support() {
    let l = lat(16);
    let mut a = SpectralVectorField::zeros(l);
    a.set_mode([0, 3, 4], [c(1.0, 0.0), Z, Z]);
    let mut b = SpectralVectorField::zeros(l);
    b.set_mode([1, 0, 0], [Z, c(0.5, 0.5), Z]);
    let out = nonlinear_term(&a, &b).unwrap();
    let allowed: Vec<[i64; 3]> = vec![[1, 3, 4], [-1, 3, 4], [1, -3, -4], [-1, -3, -4]];
    let mut seen = 0;
    for idx in 0..l.len() {
        let k = l.k(idx);
        let mag = out.at(idx).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if allowed.contains(&k) {
            assert!(mag > 1e-3, "expected a coefficient at {k:?}");
            seen += 1;
        } else {
            assert!(mag <= 1e-14, "stray coefficient {mag} at {k:?}");
        }
    }
    assert_eq!(seen, 4);
}

#[test]
fn divergence_ratio_examples() {
    let l = lat(8);
    assert_eq!(SpectralVectorField::zeros(l).divergence_ratio(), 0.0);
    let u = random_solenoidal(&l, 9, 0.0, f64::INFINITY);
    assert!(u.divergence_ratio() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projector_idempotent_and_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
        let l = lat(8);
        let mut u = random_solenoidal(&l, s1, 0.0, f64::INFINITY);
        let v0 = random_solenoidal(&l, s2, 0.0, f64::INFINITY);
        // break solenoidality with a gradient component
        for idx in 0..l.len() {
            let k = l.k(idx);
            let w = c(0.3, -0.1) * ((idx % 5) as f64);
            let mut x = u.at(idx);
            for j in 0..3 { x[j] += w * k[j] as f64; }
            u.set(idx, x);
        }
        // restore Hermitian symmetry of the perturbed field
        let mut h = u.clone();
        for idx in 0..l.len() {
            let j = l.conjugate_index(idx);
            let (a, b) = (u.at(idx), u.at(j));
            h.set(idx, [(a[0] + b[0].conj()) * 0.5, (a[1] + b[1].conj()) * 0.5, (a[2] + b[2].conj()) * 0.5]);
        }
        let pu = h.leray_project();
        let n = h.norm(NormKind::L2);
        prop_assert!(pu.leray_project().sub(&pu).unwrap().norm(NormKind::L2) <= 1e-13 * n);
        let v = v0.add(&h).unwrap();
        let a = pu.inner_product(&v).unwrap();
        let b = h.inner_product(&v.leray_project()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (a.abs().max(b.abs()).max(1e-300)));
    }

    #[test]
    fn parseval_round_trip(seed in 0u64..1000) {
        let l = lat(8);
        let u = random_solenoidal(&l, seed, 0.0, f64::INFINITY);
        let mut tr = Transformer::new(&l);
        let p = tr.to_physical(&u);
        let mean_sq: f64 = (0..l.len())
            .map(|i| p.comps.iter().map(|c| c[i] * c[i]).sum::<f64>())
            .sum::<f64>() / l.len() as f64;
        let n2 = u.norm(NormKind::L2).powi(2);
        prop_assert!((mean_sq - n2).abs() <= 1e-12 * n2);
        let back = tr.to_spectral(&p);
        prop_assert!((back.norm(NormKind::L2).powi(2) - n2).abs() <= 1e-12 * n2);
    }

    #[test]
    fn trilinear_orthogonality(s1 in 0u64..1000, s2 in 0u64..1000) {
        let l = lat(8);
        let a = random_solenoidal(&l, s1, 0.0, f64::INFINITY);
        let w = random_solenoidal(&l, s2, 0.0, f64::INFINITY);
        let n = nonlinear_term(&a, &w).unwrap();
        let bound = a.norm(NormKind::L2) * w.norm(NormKind::H1dot) * w.norm(NormKind::L2);
        prop_assert!(n.inner_product(&w).unwrap().abs() <= 1e-12 * bound);
    }

    #[test]
    fn band_support(rho0 in 1.0f64..3.0, width in 0.5f64..2.0, seed in 0u64..1000) {
        let l = lat(16);
        let spec = ForcingSpec { rho0, rho1: rho0 + width, target_x_norm: 2.0, seed };
        let f = random_bandpass_forcing(&l, &spec).unwrap();
        for idx in 0..l.len() {
            let r = (l.k2(idx) as f64).sqrt();
            if r < rho0 || r > rho0 + width {
                prop_assert!(f.at(idx).iter().all(|z| *z == Z));
            }
        }
    }
}
