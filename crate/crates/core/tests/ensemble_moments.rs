mod common;

use common::{simpson, unit};
use nalgebra::{DMatrix, DVector};
use phaselab_core::ensembles::{estimate_moments, sample_ensemble};
use phaselab_core::rng::stream;
use phaselab_core::{Complex64, Distribution, EnsembleSpec, Error, FieldTag, MeasurementMatrix, Scalar};
use proptest::prelude::*;

fn within_sigma(estimate: f64, se: f64, truth: f64, k: f64) -> bool {
    (estimate - truth).abs() <= k * se
}

#[test]
fn gaussian_fourth_moments() {
    let real = estimate_moments(&EnsembleSpec::gaussian(FieldTag::Real, 1, 1, 3), 100_000).unwrap();
    assert!(within_sigma(real.fourth_moment, real.fourth_moment_se, 3.0, 3.0), "{real:?}");
    assert!(within_sigma(real.variance, real.variance_se, 1.0, 3.0));
    let complex = estimate_moments(&EnsembleSpec::gaussian(FieldTag::Complex, 1, 1, 3), 100_000).unwrap();
    assert!(within_sigma(complex.fourth_moment, complex.fourth_moment_se, 2.0, 3.0), "{complex:?}");
    assert!(complex.pseudo_variance < 0.02);
}

#[test]
fn uniform_fourth_moment_matches_quadrature() {
    let a = 3f64.sqrt();
    // E x^4 for x uniform on [-sqrt 3, sqrt 3], by quadrature
    let mu4 = simpson(|x| x.powi(4) / (2.0 * a), -a, a, 2000);
    let spec = EnsembleSpec {
        dist: Distribution::UniformSymmetric,
        ..EnsembleSpec::gaussian(FieldTag::Real, 1, 1, 9)
    };
    let est = estimate_moments(&spec, 100_000).unwrap();
    assert!(within_sigma(est.fourth_moment, est.fourth_moment_se, mu4, 3.0), "{est:?} vs {mu4}");
    assert!((spec.sampler().unwrap().fourth_moment() - mu4).abs() < 1e-9);
    let complex = EnsembleSpec {
        field: FieldTag::Complex,
        ..spec
    };
    assert!((complex.sampler().unwrap().fourth_moment() - (mu4 + 1.0) / 2.0).abs() < 1e-9);
}

#[test]
fn psi2_proxy_for_gaussian() {
    // (E g^2)^{1/2} / sqrt 2 = 0.7071 dominates the higher even moments
    let est = estimate_moments(&EnsembleSpec::gaussian(FieldTag::Real, 1, 1, 5), 100_000).unwrap();
    assert!((est.psi2_proxy - 0.5f64.sqrt()).abs() < 0.01, "{}", est.psi2_proxy);
}

#[test]
fn rademacher_rejected_in_both_fields() {
    for field in [FieldTag::Real, FieldTag::Complex] {
        let spec = EnsembleSpec {
            dist: Distribution::DiscreteSymmetric {
                values: vec![-1.0, 1.0],
                probs: vec![0.5, 0.5],
            },
            ..EnsembleSpec::gaussian(field, 4, 4, 0)
        };
        assert!(matches!(sample_ensemble::<f64>(&spec), Err(Error::InvalidDistribution(_)) | Err(Error::FieldMismatch { .. })));
        assert!(matches!(spec.sampler(), Err(Error::InvalidDistribution(_))));
    }
}

#[test]
fn three_point_law_is_admissible() {
    // P(0) = 1/2, P(+-sqrt 2) = 1/4: unit variance, fourth moment 2
    let spec = EnsembleSpec {
        dist: Distribution::DiscreteSymmetric {
            values: vec![-(2f64.sqrt()), 0.0, 2f64.sqrt()],
            probs: vec![0.25, 0.5, 0.25],
        },
        ..EnsembleSpec::gaussian(FieldTag::Real, 1, 1, 0)
    };
    assert!((spec.sampler().unwrap().fourth_moment() - 2.0).abs() < 1e-12);
}

/// Sample second-moment matrix `(1/m) sum phi_k phi_k^*`.
fn empirical_covariance<T: Scalar>(phi: &MeasurementMatrix<T>) -> DMatrix<T> {
    phi.weighted_gram(&vec![1.0; phi.m()]).unscale(phi.m() as f64)
}

#[test]
fn rows_are_isotropic() {
    let phi = sample_ensemble::<Complex64>(&EnsembleSpec::gaussian(FieldTag::Complex, 6, 200_000, 17)).unwrap();
    let cov = empirical_covariance(&phi);
    // each entry has standard deviation 1/sqrt(m) ~ 0.0022
    assert!((cov - DMatrix::identity(6, 6)).iter().all(|z| z.norm() < 0.015));
}

#[test]
fn quadratic_form_second_moment() {
    // E (phi^T A phi)^2 = (Tr A)^2 + 2 ||A||_F^2 for real Gaussian phi
    let a: DMatrix<f64> = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -1.0, 0.5, 1.0, 0.25, -1.0, 0.25, -0.5]);
    let truth = a.trace().powi(2) + 2.0 * a.norm_squared();
    let phi = sample_ensemble::<f64>(&EnsembleSpec::gaussian(FieldTag::Real, 3, 200_000, 4)).unwrap();
    let vals: Vec<f64> = phi.rank_one(&a).unwrap().iter().map(|v| v * v).collect();
    let (mean, se) = phaselab_core::stats::mean_se(&vals);
    assert!(within_sigma(mean, se, truth, 4.0), "{mean} +- {se} vs {truth}");
}

#[test]
fn lifting_reproduces_phaseless_maps() {
    let phi = sample_ensemble::<Complex64>(&EnsembleSpec::gaussian(FieldTag::Complex, 10, 40, 2)).unwrap();
    let mut rng = stream(99, 0);
    for _ in 0..100 {
        let u: DVector<Complex64> = unit(10, &mut rng).scale(3.0);
        let lifted = &u * u.adjoint();
        let m = phi.m() as f64;
        let b1 = phi.lifting(&lifted, 1.0).unwrap();
        let bh = phi.lifting(&lifted, 0.5).unwrap();
        for ((x, i), (y, a)) in b1.iter().zip(phi.intensity(&u).unwrap()).zip(bh.iter().zip(phi.amplitude(&u).unwrap())) {
            assert!((m * x - i).abs() <= 1e-12 * i.max(1.0));
            assert!((m * y - a).abs() <= 1e-12 * a.max(1.0));
        }
    }
}

#[test]
fn ensembles_are_reproducible() {
    let spec = EnsembleSpec::gaussian(FieldTag::Real, 7, 33, 1234);
    let a = sample_ensemble::<f64>(&spec).unwrap();
    let b = sample_ensemble::<f64>(&spec).unwrap();
    assert_eq!(a, b);
    let c = sample_ensemble::<f64>(&spec.with_seed(1235)).unwrap();
    assert_ne!(a, c);
    // rows are independent of m: a larger ensemble extends a smaller one
    let d = sample_ensemble::<f64>(&spec.with_m(50)).unwrap();
    assert_eq!(a.conj_rows(), &d.conj_rows().rows(0, 33).into_owned());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rank_one_map_is_linear(seed in any::<u64>(), s in -5.0..5.0f64, t in -5.0..5.0f64) {
        let n = 5;
        let phi = sample_ensemble::<Complex64>(&EnsembleSpec::gaussian(FieldTag::Complex, n, 12, seed)).unwrap();
        let mut rng = stream(seed, 1);
        let herm = |rng: &mut _| {
            let g: DMatrix<Complex64> = DMatrix::from_fn(n, n, |_, _| Complex64::standard_normal(rng));
            (&g + g.adjoint()).unscale(2.0)
        };
        let x = herm(&mut rng);
        let y = herm(&mut rng);
        let lhs = phi.rank_one(&(x.scale(s) + y.scale(t))).unwrap();
        let ax = phi.rank_one(&x).unwrap();
        let ay = phi.rank_one(&y).unwrap();
        for k in 0..12 {
            let rhs = s * ax[k] + t * ay[k];
            prop_assert!((lhs[k] - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn phaseless_maps_ignore_global_phase(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU) {
        let phi = sample_ensemble::<Complex64>(&EnsembleSpec::gaussian(FieldTag::Complex, 6, 20, seed)).unwrap();
        let x: DVector<Complex64> = unit(6, &mut stream(seed, 2));
        let cx = &x * Complex64::from_polar(1.0, theta);
        for ell in [1u8, 2] {
            let a = phi.phaseless(ell, &x).unwrap();
            let b = phi.phaseless(ell, &cx).unwrap();
            for (a, b) in a.iter().zip(&b) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            }
        }
    }
}
