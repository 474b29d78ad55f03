//! Worst-case noise showing that the recovery error bound
//! `||z||_q / m^{1/q}` cannot be improved: the noise is chosen so that a
//! wrong target fits the corrupted measurements exactly.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_ensemble, EnsembleSpec, MeasurementMatrix};
use crate::field::random_vector;
use crate::geometry::{dist_d1, dist_ell};
use crate::rng::{child_seed, stream};
use crate::stats::{lq_norm, mean_se, quantiles};
use crate::{Error, Result, Scalar};

/// Targets closer than this in `d_1` count as the same signal.
pub const EQUIVALENCE_TOL: f64 = 1e-8;
/// Minimum relative `d_1` separation of random wrong targets.
pub const TARGET_MARGIN: f64 = 0.1;
pub const MIN_GAMMA_TRIALS: usize = 10_000;
/// Relative tolerance of the zero-residual check.
pub const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessMode {
    Amplitude,
    Intensity,
    Matrix,
}

impl SharpnessMode {
    pub fn from_ell(ell: u8) -> Result<Self> {
        match ell {
            1 => Ok(SharpnessMode::Amplitude),
            2 => Ok(SharpnessMode::Intensity),
            _ => Err(Error::Config(format!("ell must be 1 or 2, got {ell}"))),
        }
    }

    /// `"1"`, `"2"` or `"matrix"`.
    pub fn label(self) -> &'static str {
        match self {
            SharpnessMode::Amplitude => "1",
            SharpnessMode::Intensity => "2",
            SharpnessMode::Matrix => "matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Signal<T: Scalar> {
    Vector(DVector<T>),
    Matrix(DMatrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialInstance<T: Scalar> {
    pub mode: SharpnessMode,
    pub x0: Signal<T>,
    pub x_star: Signal<T>,
    pub z: Vec<f64>,
    pub q: f64,
    /// `d_ell(x_star, x0)`, or `||X_star - X0||_F`.
    pub d_error: f64,
    pub z_norm_q: f64,
    /// `d_error * m^{1/q} / ||z||_q`.
    pub ratio: f64,
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("q must be finite and >= 1, got {q}")))
    }
}

fn finish<T: Scalar>(mode: SharpnessMode, x0: Signal<T>, x_star: Signal<T>, z: Vec<f64>, q: f64, d: f64) -> Result<AdversarialInstance<T>> {
    let z_norm_q = lq_norm(&z, q);
    if z_norm_q <= 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    let ratio = d * (z.len() as f64).powf(1.0 / q) / z_norm_q;
    Ok(AdversarialInstance {
        mode,
        x0,
        x_star,
        z,
        q,
        d_error: d,
        z_norm_q,
        ratio,
    })
}

/// `z = A^ell(x_star) - A^ell(x0)`, so `x_star` fits `A^ell(x0) + z` exactly.
pub fn make_phase_noise<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    ell: u8,
    x0: &DVector<T>,
    x_star: &DVector<T>,
    q: f64,
) -> Result<AdversarialInstance<T>> {
    let mode = SharpnessMode::from_ell(ell)?;
    check_q(q)?;
    let d1 = dist_d1(x0, x_star)?;
    if d1 < EQUIVALENCE_TOL {
        return Err(Error::EquivalentTargets(d1));
    }
    let a = phi.phaseless(ell, x_star)?;
    let b = phi.phaseless(ell, x0)?;
    let z = a.iter().zip(&b).map(|(a, b)| a - b).collect();
    let d = dist_ell(ell, x_star, x0)?;
    finish(mode, Signal::Vector(x0.clone()), Signal::Vector(x_star.clone()), z, q, d)
}

/// `X_star = X0 + t w w^*` with `w` normalized; `z = A(t w w^*)`.
pub fn make_matrix_noise<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    x0: &DMatrix<T>,
    w: &DVector<T>,
    t: f64,
    q: f64,
) -> Result<AdversarialInstance<T>> {
    check_q(q)?;
    let norm = w.norm();
    if t == 0.0 || !t.is_finite() || norm == 0.0 {
        return Err(Error::ZeroPerturbation);
    }
    let w = w.unscale(norm);
    let delta = (&w * w.adjoint()).scale(t);
    let z = phi.rank_one(&delta)?;
    let x_star = x0 + &delta;
    finish(SharpnessMode::Matrix, Signal::Matrix(x0.clone()), Signal::Matrix(x_star), z, q, t.abs())
}

impl<T: Scalar> AdversarialInstance<T> {
    /// `||A(x_star) - (A(x0) + z)||_q / max(||A(x0) + z||_q, 1)`; zero up to
    /// rounding by construction.
    pub fn zero_residual(&self, phi: &MeasurementMatrix<T>) -> Result<f64> {
        let (fit, base) = match (&self.x_star, &self.x0, self.mode) {
            (Signal::Vector(s), Signal::Vector(x), SharpnessMode::Amplitude) => (phi.amplitude(s)?, phi.amplitude(x)?),
            (Signal::Vector(s), Signal::Vector(x), SharpnessMode::Intensity) => (phi.intensity(s)?, phi.intensity(x)?),
            (Signal::Matrix(s), Signal::Matrix(x), SharpnessMode::Matrix) => (phi.rank_one(s)?, phi.rank_one(x)?),
            _ => return Err(Error::Config("instance signals do not match its mode".into())),
        };
        let b: Vec<f64> = base.iter().zip(&self.z).map(|(a, z)| a + z).collect();
        let r: Vec<f64> = fit.iter().zip(&b).map(|(f, b)| f - b).collect();
        Ok(lq_norm(&r, self.q) / lq_norm(&b, self.q).max(1.0))
    }
}

/// Monte Carlo estimate (and standard error) of
/// `E |(|<phi,u>|^ell - |<phi,v>|^ell) / d_ell(u,v)|^q` over `trials`
/// vectors drawn from `spec` (its `m` is ignored).
pub fn gamma_moment<T: Scalar>(
    spec: &EnsembleSpec,
    ell: u8,
    q: f64,
    u: &DVector<T>,
    v: &DVector<T>,
    trials: usize,
) -> Result<(f64, f64)> {
    SharpnessMode::from_ell(ell)?;
    check_q(q)?;
    if trials < MIN_GAMMA_TRIALS {
        return Err(Error::Config(format!("trials must be at least {MIN_GAMMA_TRIALS}")));
    }
    let d = dist_ell(ell, u, v)?;
    if d < EQUIVALENCE_TOL {
        return Err(Error::EquivalentTargets(d));
    }
    let phi = sample_ensemble::<T>(&spec.with_m(trials))?;
    let a = phi.phaseless(ell, u)?;
    let b = phi.phaseless(ell, v)?;
    let values: Vec<f64> = a.iter().zip(&b).map(|(a, b)| ((a - b) / d).abs().powf(q)).collect();
    Ok(mean_se(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub q: f64,
    pub ell_or_matrix: String,
    pub d_error: f64,
    pub z_norm_q: f64,
    pub ratio: f64,
    /// Relative zero-residual check, see [`AdversarialInstance::zero_residual`].
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSummary {
    pub rows: Vec<SharpnessRow>,
    /// `(p01, p50, p99)` of the ratio.
    pub ratio_quantiles: [f64; 3],
    pub max_residual: f64,
}

/// One adversarial instance per trial: a fresh ensemble with `m` rows from
/// stream `child_seed(spec.seed, trial)`, a random unit `x0`, and either a
/// random unit `x_star` with `d_1(x0, x_star) >= 0.1` or `X0 = x0 x0^*`
/// perturbed by `w w^*` for a random unit `w`.
pub fn sharpness_experiment<T: Scalar>(
    spec: &EnsembleSpec,
    mode: SharpnessMode,
    q: f64,
    m: usize,
    trials: usize,
) -> Result<SharpnessSummary> {
    check_q(q)?;
    if trials == 0 || m == 0 {
        return Err(Error::Config("trials and m must be positive".into()));
    }
    let n = spec.n;
    let rows = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = child_seed(spec.seed, trial as u64);
            let phi = sample_ensemble::<T>(&spec.with_m(m).with_seed(seed))?;
            let mut rng = stream(seed, u64::MAX);
            let unit = |rng: &mut _| {
                let v: DVector<T> = random_vector(n, rng);
                let norm = v.norm();
                v.unscale(norm)
            };
            let x0 = unit(&mut rng);
            let inst = match mode {
                SharpnessMode::Matrix => {
                    let w = unit(&mut rng);
                    make_matrix_noise(&phi, &(&x0 * x0.adjoint()), &w, 1.0, q)?
                }
                _ => {
                    let ell = if mode == SharpnessMode::Amplitude { 1 } else { 2 };
                    let mut x_star = unit(&mut rng);
                    while dist_d1(&x0, &x_star)? < TARGET_MARGIN {
                        x_star = unit(&mut rng);
                    }
                    make_phase_noise(&phi, ell, &x0, &x_star, q)?
                }
            };
            Ok(SharpnessRow {
                trial,
                seed,
                n,
                m,
                q,
                ell_or_matrix: mode.label().to_string(),
                d_error: inst.d_error,
                z_norm_q: inst.z_norm_q,
                ratio: inst.ratio,
                residual: inst.zero_residual(&phi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(SharpnessSummary {
        ratio_quantiles: quantiles(&ratios),
        max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        rows,
    })
}
