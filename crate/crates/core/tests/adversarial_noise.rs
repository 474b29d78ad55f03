mod common;

use common::{gauss_1d, gauss_2d, unit};
use nalgebra::{DMatrix, DVector};
use phaselab_core::adversarial::*;
use phaselab_core::ensembles::{estimate_moments, sample_ensemble};
use phaselab_core::geometry::dist_ell;
use phaselab_core::rng::stream;
use phaselab_core::stats::lq_norm;
use phaselab_core::{Complex64, EnsembleSpec, Error, FieldTag};

fn real_phi(n: usize, m: usize, seed: u64) -> phaselab_core::MeasurementMatrix<f64> {
    sample_ensemble(&EnsembleSpec::gaussian(FieldTag::Real, n, m, seed)).unwrap()
}

fn k_proxy() -> f64 {
    estimate_moments(&EnsembleSpec::gaussian(FieldTag::Real, 1, 1, 0), 100_000)
        .unwrap()
        .psi2_proxy
}

#[test]
fn doubling_the_target_triples_the_intensities() {
    let phi = real_phi(6, 20, 1);
    let x0: DVector<f64> = unit(6, &mut stream(1, 0));
    let inst = make_phase_noise(&phi, 2, &x0, &x0.scale(2.0), 2.0).unwrap();
    for (z, b) in inst.z.iter().zip(phi.intensity(&x0).unwrap()) {
        assert!((z - 3.0 * b).abs() <= 1e-12 * b.max(1.0));
    }
}

#[test]
fn equivalent_targets_are_rejected() {
    let phi = sample_ensemble::<Complex64>(&EnsembleSpec::gaussian(FieldTag::Complex, 5, 10, 2)).unwrap();
    let x0: DVector<Complex64> = unit(5, &mut stream(2, 0));
    for target in [x0.clone(), -&x0, &x0 * Complex64::new(0.0, 1.0)] {
        assert!(matches!(make_phase_noise(&phi, 1, &x0, &target, 1.0), Err(Error::EquivalentTargets(_))));
    }
    let bad_q = make_phase_noise(&phi, 1, &x0, &x0.scale(2.0), f64::INFINITY);
    assert!(matches!(bad_q, Err(Error::Config(_))));
}

#[test]
fn matrix_noise_examples() {
    let n = 4;
    let phi = real_phi(n, 12, 3);
    let x0 = DMatrix::<f64>::identity(n, n);
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    let up = make_matrix_noise(&phi, &x0, &e1, 1.0, 2.0).unwrap();
    for k in 0..12 {
        assert!((up.z[k] - phi.row(k)[0].powi(2)).abs() < 1e-12);
    }
    let down = make_matrix_noise(&phi, &x0, &e1, -1.0, 2.0).unwrap();
    assert!(up.z.iter().zip(&down.z).all(|(a, b)| *a == -b));
    assert!(matches!(make_matrix_noise(&phi, &x0, &e1, 0.0, 2.0), Err(Error::ZeroPerturbation)));
    assert!(matches!(
        make_matrix_noise(&phi, &x0, &DVector::zeros(n), 1.0, 2.0),
        Err(Error::ZeroPerturbation)
    ));
}

#[test]
fn perturbation_size_leaves_the_ratio_fixed() {
    let n = 8;
    let phi = real_phi(n, 64, 4);
    let x: DVector<f64> = unit(n, &mut stream(4, 0));
    let w: DVector<f64> = unit(n, &mut stream(4, 1));
    let x0 = &x * x.transpose();
    let base = make_matrix_noise(&phi, &x0, &w, 1.0, 1.5).unwrap();
    for t in [-3.0, 0.25, 17.0] {
        let inst = make_matrix_noise(&phi, &x0, &w, t, 1.5).unwrap();
        assert!((inst.z_norm_q - t.abs() * base.z_norm_q).abs() <= 1e-10 * inst.z_norm_q);
        assert!((inst.d_error - t.abs()).abs() < 1e-12);
        assert!((inst.ratio - base.ratio).abs() <= 1e-10 * base.ratio);
        let Signal::Matrix(star) = &inst.x_star else { panic!() };
        let eig = phaselab_core::linalg::eigh(&(star - &x0)).unwrap();
        let nonzero = eig.eigenvalues.iter().filter(|l| l.abs() > 1e-8 * t.abs()).count();
        assert_eq!(nonzero, 1);
    }
}

#[test]
fn gamma_moment_half_normal() {
    let truth = gauss_1d(|x| x.abs());
    let spec = EnsembleSpec::gaussian(FieldTag::Real, 5, 1, 50);
    let u: DVector<f64> = unit::<f64, _>(5, &mut stream(50, 0)).scale(3.0);
    let (est, se) = gamma_moment(&spec, 1, 1.0, &u, &DVector::zeros(5), 100_000).unwrap();
    assert!((est - truth).abs() <= 3.0 * se, "{est} vs {truth}");
}

#[test]
fn gamma_moment_orthogonal_intensities() {
    let truth = gauss_2d(|x, y| (x * x - y * y).abs()) / 2f64.sqrt();
    let spec = EnsembleSpec::gaussian(FieldTag::Real, 3, 1, 51);
    let u = DVector::from_vec(vec![0.0, 1.0, 0.0]);
    let v = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let (est, se) = gamma_moment(&spec, 2, 1.0, &u, &v, 100_000).unwrap();
    assert!((est - truth).abs() <= 3.0 * se, "{est} vs {truth}");
    assert!(matches!(gamma_moment(&spec, 2, 1.0, &u, &u, 100_000), Err(Error::EquivalentTargets(_))));
    assert!(matches!(gamma_moment(&spec, 2, 1.0, &u, &v, 10), Err(Error::Config(_))));
}

#[test]
fn gamma_moment_respects_the_subgaussian_bound() {
    let k = k_proxy();
    let spec = EnsembleSpec::gaussian(FieldTag::Real, 16, 1, 52);
    let mut rng = stream(52, 0);
    for _ in 0..5 {
        let u: DVector<f64> = unit(16, &mut rng);
        let v: DVector<f64> = unit::<f64, _>(16, &mut rng).scale(0.5);
        for ell in [1u8, 2] {
            for q in [1.0, 2.0, 3.0] {
                let (est, _) = gamma_moment(&spec, ell, q, &u, &v, 20_000).unwrap();
                let bound = (q.sqrt() * k).powf(ell as f64 * q);
                assert!(est <= 10.0 * bound, "ell {ell} q {q}: {est} vs {bound}");
            }
        }
    }
}

#[test]
fn sharpness_ratios_clear_the_moment_floor() {
    let k = k_proxy();
    let spec = EnsembleSpec::gaussian(FieldTag::Real, 32, 1, 60);
    let amp = sharpness_experiment::<f64>(&spec, SharpnessMode::Amplitude, 1.0, 512, 100).unwrap();
    let floor = 1.0 / (2.0 * k);
    assert!(amp.rows.iter().filter(|r| r.ratio >= floor).count() >= 99);
    let mat = sharpness_experiment::<f64>(&spec, SharpnessMode::Matrix, 2.0, 512, 100).unwrap();
    let floor = 1.0 / (4.0 * 2.0 * k * k);
    assert!(mat.rows.iter().filter(|r| r.ratio >= floor).count() >= 99);
    assert!(amp.max_residual <= RESIDUAL_TOL && mat.max_residual <= RESIDUAL_TOL);
}

#[test]
fn sharpness_median_is_stable_in_m() {
    let spec = EnsembleSpec::gaussian(FieldTag::Complex, 16, 1, 61);
    for q in [1.0, 2.0] {
        let a = sharpness_experiment::<Complex64>(&spec, SharpnessMode::Intensity, q, 128, 60).unwrap();
        let b = sharpness_experiment::<Complex64>(&spec, SharpnessMode::Intensity, q, 256, 60).unwrap();
        let ratio = a.ratio_quantiles[1] / b.ratio_quantiles[1];
        assert!((0.5..=2.0).contains(&ratio));
        assert!(a.rows.iter().all(|r| r.ell_or_matrix == "2" && r.m == 128));
    }
}

#[test]
fn sharpness_rows_are_deterministic_and_ordered() {
    let spec = EnsembleSpec::gaussian(FieldTag::Real, 8, 1, 62);
    let a = sharpness_experiment::<f64>(&spec, SharpnessMode::Amplitude, 2.0, 40, 20).unwrap();
    let b = sharpness_experiment::<f64>(&spec, SharpnessMode::Amplitude, 2.0, 40, 20).unwrap();
    assert_eq!(a, b);
    assert!(a.rows.iter().enumerate().all(|(i, r)| r.trial == i));
}

#[test]
fn intensity_ratio_ignores_a_global_phase() {
    let n = 8;
    let phi = sample_ensemble::<Complex64>(&EnsembleSpec::gaussian(FieldTag::Complex, n, 64, 63)).unwrap();
    let mut rng = stream(63, 0);
    let x0: DVector<Complex64> = unit(n, &mut rng);
    let xs: DVector<Complex64> = unit(n, &mut rng);
    let a = make_phase_noise(&phi, 2, &x0, &xs, 1.0).unwrap();
    let b = make_phase_noise(&phi, 2, &(&x0 * Complex64::from_polar(1.0, 2.1)), &xs, 1.0).unwrap();
    assert!((a.ratio - b.ratio).abs() <= 1e-10 * a.ratio);
}

#[test]
fn noise_norm_obeys_the_chebyshev_envelope() {
    let (n, m, q) = (8usize, 64usize, 1.5);
    let spec = EnsembleSpec::gaussian(FieldTag::Real, n, 1, 64);
    let mut rng = stream(64, 0);
    let x0: DVector<f64> = unit(n, &mut rng);
    let xs: DVector<f64> = unit(n, &mut rng);
    let d = dist_ell(1, &xs, &x0).unwrap();
    let (g1, _) = gamma_moment(&spec, 1, q, &xs, &x0, 100_000).unwrap();
    let (g2, _) = gamma_moment(&spec, 1, 2.0 * q, &xs, &x0, 100_000).unwrap();
    let envelope = m as f64 * (g1 + (g2 / m as f64).sqrt() * (m as f64).sqrt());
    let draws = 200;
    let inside = (0..draws)
        .filter(|s| {
            let phi = real_phi(n, m, 10_000 + s);
            let inst = make_phase_noise(&phi, 1, &x0, &xs, q).unwrap();
            (lq_norm(&inst.z, q) / d).powf(q) <= envelope
        })
        .count();
    assert!(inside as f64 / draws as f64 >= 1.0 - 1.0 / m as f64 - 0.05);
}
