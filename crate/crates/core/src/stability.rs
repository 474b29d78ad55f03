//! Monte Carlo certificates for stability, robust injectivity, the lifting
//! embedding, the small-ball quantities and the empirical chaos process.
//!
//! Every estimator takes a `u64` seed and gives sample `i` its own stream
//! `(seed, i)`, so the sample set for `N` trials is a prefix of the sample
//! set for `N' > N` trials and results do not depend on thread count.
//! Suprema over continuous sets are replaced by maxima over finite sampled
//! subsets, so `RademacherR` and `ChaosS` statistics are lower
//! approximations of the true suprema; `*Lower` statistics are minima over
//! sampled points and therefore upper bounds on the true infimum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_ensemble, EnsembleSpec, MeasurementMatrix};
use crate::geometry::{
    dist_d2, dist_ell, matrix_budget, sample_matrix_direction, sample_vector_direction, MatrixSetDescriptor,
    SampleMode, VectorSetDescriptor, MAX_RESAMPLES,
};
use crate::linalg::{eigh, frob_inner};
use crate::rng::{child_seed, stream, StreamRng};
use crate::stats::{lq_norm, mean_se, quantiles};
use crate::{Error, Result, Scalar};

/// Pairs closer than this in `d_ell` are resampled.
pub const DEGENERATE_PAIR: f64 = 1e-10;
pub const MIN_PAIRS: usize = 100;
pub const MIN_TAIL_TRIALS: usize = 1000;
pub const MIN_SMALL_BALL_SET: usize = 50;
pub const MIN_OUTER: usize = 50;
pub const MIN_INNER: usize = 100;
/// Radii for sampled pair members are log-uniform on this range.
pub const RADIUS_RANGE: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    StabilityLower,
    InjectivityLower,
    EmbedLower,
    EmbedUpper,
    SmallBallQ,
    RademacherR,
    ChaosS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChaosVariant {
    /// `E sup <phi phi^* - I, X>` for a single vector.
    S,
    /// `E sup <sum_k phi_k phi_k^* - m I, X>`.
    Sbar,
    /// `E sup <sum_k eps_k phi_k phi_k^*, X>` with Rademacher signs.
    Stilde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEstimate {
    pub kind: CertificateKind,
    /// Minimum for lower kinds, maximum for `EmbedUpper`, mean for
    /// `RademacherR` and `ChaosS`, minimum over sampled matrices for
    /// `SmallBallQ`.
    pub statistic: f64,
    pub trials: usize,
    pub seed: u64,
    /// Nearest-rank `(p01, p50, p99)` of the per-sample values.
    pub quantiles: [f64; 3],
    /// Standard error of the mean, for mean-type statistics.
    pub std_error: Option<f64>,
}

#[derive(Clone, Copy)]
enum Reduce {
    Min,
    Max,
    Mean,
}

fn summarize(kind: CertificateKind, values: &[f64], reduce: Reduce, seed: u64) -> CertificateEstimate {
    let (statistic, std_error) = match reduce {
        Reduce::Min => (values.iter().copied().fold(f64::INFINITY, f64::min), None),
        Reduce::Max => (values.iter().copied().fold(f64::NEG_INFINITY, f64::max), None),
        Reduce::Mean => {
            let (m, se) = mean_se(values);
            (m, Some(se))
        }
    };
    CertificateEstimate {
        kind,
        statistic,
        trials: values.len(),
        seed,
        quantiles: quantiles(values),
        std_error,
    }
}

fn require(name: &str, got: usize, min: usize) -> Result<()> {
    if got < min {
        return Err(Error::Config(format!("{name} must be at least {min}, got {got}")));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("q must be finite and >= 1, got {q}")))
    }
}

fn check_n(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Collects per-sample values; any sample that exhausted its resampling
/// budget makes the whole set degenerate.
fn collect(values: Vec<Result<Option<f64>>>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        out.push(v?.ok_or(Error::DegenerateSet)?);
    }
    Ok(out)
}

fn log_uniform_radius(rng: &mut StreamRng) -> f64 {
    let (lo, hi) = RADIUS_RANGE;
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

/// A point of the set: a member for finite sets, otherwise a cone-sphere
/// direction scaled by a log-uniform radius.
pub fn sample_point<T: Scalar>(set: &VectorSetDescriptor, rng: &mut StreamRng) -> Result<DVector<T>> {
    match set {
        VectorSetDescriptor::Finite { .. } => crate::geometry::sample_vector_member(set, rng),
        _ => {
            let d: DVector<T> = sample_vector_direction(set, SampleMode::Member, rng)?;
            Ok(d.scale(log_uniform_radius(rng)))
        }
    }
}

/// Draws `(u, v)` with `u` from `t1`, `v` from `t2`, resampling while
/// `d_ell(u, v) < DEGENERATE_PAIR`. `None` if every attempt was degenerate.
fn sample_pair<T: Scalar>(
    t1: &VectorSetDescriptor,
    t2: &VectorSetDescriptor,
    ell: u8,
    rng: &mut StreamRng,
) -> Result<Option<(DVector<T>, DVector<T>)>> {
    for _ in 0..MAX_RESAMPLES {
        let u = sample_point(t1, rng)?;
        let v = sample_point(t2, rng)?;
        if dist_ell(ell, &u, &v)? >= DEGENERATE_PAIR {
            return Ok(Some((u, v)));
        }
    }
    Ok(None)
}

/// `||A^ell(u) - A^ell(v)||_q / (m^{1/q} d_ell(u, v))`, or `None` for an
/// equivalent pair.
pub fn stability_ratio<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    ell: u8,
    q: f64,
    u: &DVector<T>,
    v: &DVector<T>,
) -> Result<Option<f64>> {
    let d = dist_ell(ell, u, v)?;
    if d < DEGENERATE_PAIR {
        return Ok(None);
    }
    let a = phi.phaseless(ell, u)?;
    let b = phi.phaseless(ell, v)?;
    let r: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a - b).collect();
    Ok(Some(lq_norm(&r, q) / ((phi.m() as f64).powf(1.0 / q) * d)))
}

/// Minimum of [`stability_ratio`] over `pairs` sampled pairs.
pub fn stability_constant_lower<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    set: &VectorSetDescriptor,
    ell: u8,
    q: f64,
    pairs: usize,
    seed: u64,
) -> Result<CertificateEstimate> {
    require("pairs", pairs, MIN_PAIRS)?;
    check_q(q)?;
    set.validate()?;
    check_n(phi.n(), set.n())?;
    let values = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            match sample_pair::<T>(set, set, ell, &mut rng)? {
                Some((u, v)) => stability_ratio(phi, ell, q, &u, &v),
                None => Ok(None),
            }
        })
        .collect();
    Ok(summarize(CertificateKind::StabilityLower, &collect(values)?, Reduce::Min, seed))
}

/// `||A(X)||_q / (m^{1/q} ||X||_F)`.
pub fn injectivity_ratio<T: Scalar>(phi: &MeasurementMatrix<T>, q: f64, x: &DMatrix<T>) -> Result<Option<f64>> {
    let norm = x.norm();
    if norm < DEGENERATE_PAIR {
        return Ok(None);
    }
    let a = phi.rank_one(x)?;
    Ok(Some(lq_norm(&a, q) / ((phi.m() as f64).powf(1.0 / q) * norm)))
}

/// Minimum of [`injectivity_ratio`] over unit-Frobenius samples of
/// `cone(M - M)`.
pub fn injectivity_constant_lower<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    set: &MatrixSetDescriptor,
    q: f64,
    samples: usize,
    seed: u64,
) -> Result<CertificateEstimate> {
    require("samples", samples, MIN_PAIRS)?;
    check_q(q)?;
    set.validate()?;
    check_n(phi.n(), set.n())?;
    let values = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            match sample_matrix_direction::<T, _>(set, SampleMode::Difference, &mut rng) {
                Ok(x) => injectivity_ratio(phi, q, &x),
                Err(Error::DegenerateSample(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    Ok(summarize(CertificateKind::InjectivityLower, &collect(values)?, Reduce::Min, seed))
}

/// `||B^p(uu^* - vv^*)||_1 / d_2(u, v)^p`, computed from intensities.
pub fn embed_ratio<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    p: f64,
    u: &DVector<T>,
    v: &DVector<T>,
) -> Result<Option<f64>> {
    let d2 = dist_d2(u, v)?;
    if d2 < DEGENERATE_PAIR {
        return Ok(None);
    }
    let a = phi.intensity(u)?;
    let b = phi.intensity(v)?;
    let total: f64 = a.iter().zip(&b).map(|(a, b)| (a - b).abs().powf(p)).sum();
    Ok(Some(total / phi.m() as f64 / d2.powf(p)))
}

fn check_p(p: f64) -> Result<()> {
    if (0.5..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

fn embed_values<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    p: f64,
    t1: &VectorSetDescriptor,
    t2: &VectorSetDescriptor,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let values = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            match sample_pair::<T>(t1, t2, 2, &mut rng)? {
                Some((u, v)) => embed_ratio(phi, p, &u, &v),
                None => Ok(None),
            }
        })
        .collect();
    collect(values)
}

/// `(min, max)` of [`embed_ratio`] over pairs `u in T1`, `v in T2`.
pub fn embed_bounds<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    p: f64,
    t1: &VectorSetDescriptor,
    t2: &VectorSetDescriptor,
    samples: usize,
    seed: u64,
) -> Result<(CertificateEstimate, CertificateEstimate)> {
    require("samples", samples, MIN_PAIRS)?;
    check_p(p)?;
    t1.validate()?;
    t2.validate()?;
    check_n(phi.n(), t1.n())?;
    check_n(phi.n(), t2.n())?;
    let values = embed_values(phi, p, t1, t2, samples, seed)?;
    Ok((
        summarize(CertificateKind::EmbedLower, &values, Reduce::Min, seed),
        summarize(CertificateKind::EmbedUpper, &values, Reduce::Max, seed),
    ))
}

/// The three consequences of the embedding on a single set `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingChecks {
    /// Max over `u` of `(1/m) sum_k |<phi_k, u>| / ||u||`.
    pub amplitude_upper: CertificateEstimate,
    /// Min over pairs of the `p = 1/2` embedding ratio.
    pub half_power_lower: CertificateEstimate,
    /// Min over pairs of the `p = 1` embedding ratio.
    pub linear_lower: CertificateEstimate,
}

/// Pair draws use the same streams as [`embed_bounds`] with `T1 = T2 = T`
/// and the same seed, so `half_power_lower` equals that call's lower
/// statistic at `p = 1/2`.
pub fn embedding_checks<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    set: &VectorSetDescriptor,
    samples: usize,
    seed: u64,
) -> Result<EmbeddingChecks> {
    require("samples", samples, MIN_PAIRS)?;
    set.validate()?;
    check_n(phi.n(), set.n())?;
    let m = phi.m() as f64;
    let amp_seed = child_seed(seed, 1);
    let amps = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(amp_seed, i as u64);
            let u: DVector<T> = sample_vector_direction(set, SampleMode::Member, &mut rng)?;
            Ok(phi.amplitude(&u)?.iter().sum::<f64>() / m / u.norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let half = embed_values(phi, 0.5, set, set, samples, seed)?;
    let linear = embed_values(phi, 1.0, set, set, samples, seed)?;
    Ok(EmbeddingChecks {
        amplitude_upper: summarize(CertificateKind::EmbedUpper, &amps, Reduce::Max, amp_seed),
        half_power_lower: summarize(CertificateKind::EmbedLower, &half, Reduce::Min, seed),
        linear_lower: summarize(CertificateKind::EmbedLower, &linear, Reduce::Min, seed),
    })
}

/// Empirical `P(|phi^* X phi| >= xi)` over `trials` fresh vectors drawn
/// from `spec` (its `m` is ignored) with base seed `seed`.
pub fn tail_probability<T: Scalar>(spec: &EnsembleSpec, x: &DMatrix<T>, xi: f64, trials: usize, seed: u64) -> Result<f64> {
    require("trials", trials, MIN_TAIL_TRIALS)?;
    check_n(spec.n, x.nrows())?;
    let phi = sample_ensemble::<T>(&spec.with_m(trials).with_seed(seed))?;
    let a = phi.rank_one(x)?;
    Ok(a.iter().filter(|v| v.abs() >= xi).count() as f64 / trials as f64)
}

/// Minimum of [`tail_probability`] over `set_size` unit-Frobenius samples
/// of `cone(M - M)`.
pub fn small_ball_q<T: Scalar>(
    spec: &EnsembleSpec,
    set: &MatrixSetDescriptor,
    xi: f64,
    trials: usize,
    set_size: usize,
    seed: u64,
) -> Result<CertificateEstimate> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Config(format!("xi must lie in (0, 1), got {xi}")));
    }
    require("trials", trials, MIN_TAIL_TRIALS)?;
    require("set_size", set_size, MIN_SMALL_BALL_SET)?;
    set.validate()?;
    check_n(spec.n, set.n())?;
    let values = (0..set_size)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, j as u64);
            let x: DMatrix<T> = sample_matrix_direction(set, SampleMode::Difference, &mut rng)?;
            tail_probability(spec, &x, xi, trials, child_seed(seed, j as u64))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(CertificateKind::SmallBallQ, &values, Reduce::Min, seed))
}

/// Test matrices standing in for the supremum: every nonzero normalized
/// difference for finite sets, otherwise `count` unit-Frobenius samples of
/// `cone(M - M)`.
fn difference_sample<T: Scalar>(set: &MatrixSetDescriptor, count: usize, seed: u64) -> Result<Vec<DMatrix<T>>> {
    if let MatrixSetDescriptor::Finite { .. } = set {
        return Ok(set
            .finite_differences::<T>()?
            .into_iter()
            .filter(|d| d.norm() > DEGENERATE_PAIR)
            .map(|d| {
                let n = d.norm();
                d.unscale(n)
            })
            .collect());
    }
    (0..count)
        .map(|i| sample_matrix_direction(set, SampleMode::Difference, &mut stream(seed, i as u64)))
        .collect()
}

fn rademacher_signs(m: usize, rng: &mut StreamRng) -> Vec<f64> {
    (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Mean over `mc_outer` draws of `max_X |(1/m) sum_k eps_k phi_k^* X phi_k|`
/// with the maximum over a fixed sample of `mc_inner` normalized
/// differences.
pub fn rademacher_r<T: Scalar>(
    spec: &EnsembleSpec,
    set: &MatrixSetDescriptor,
    m: usize,
    mc_outer: usize,
    mc_inner: usize,
    seed: u64,
) -> Result<CertificateEstimate> {
    require("mc_outer", mc_outer, MIN_OUTER)?;
    require("mc_inner", mc_inner, MIN_INNER)?;
    require("m", m, 1)?;
    set.validate()?;
    check_n(spec.n, set.n())?;
    let inner = difference_sample::<T>(set, mc_inner, child_seed(seed, 0))?;
    let outer_seed = child_seed(seed, 1);
    let values = (0..mc_outer)
        .into_par_iter()
        .map(|o| {
            let phi = sample_ensemble::<T>(&spec.with_m(m).with_seed(child_seed(outer_seed, o as u64)))?;
            let eps = rademacher_signs(m, &mut stream(outer_seed, o as u64));
            let g = phi.weighted_gram(&eps).unscale(m as f64);
            Ok(inner.iter().map(|x| frob_inner(&g, x).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(CertificateKind::RademacherR, &values, Reduce::Mean, seed))
}

/// Monte Carlo estimate of the chaos-process supremum. For finite sets the
/// supremum runs over the members themselves (the set is taken to be the
/// already-normalized index set); otherwise over `inner_samples`
/// unit-Frobenius samples of `cone(M - M)`, a symmetric set, so the
/// absolute pairing is used. The `S` variant ignores `m`.
pub fn chaos_s<T: Scalar>(
    spec: &EnsembleSpec,
    set: &MatrixSetDescriptor,
    m: usize,
    variant: ChaosVariant,
    trials: usize,
    inner_samples: usize,
    seed: u64,
) -> Result<CertificateEstimate> {
    require("trials", trials, MIN_OUTER)?;
    require("m", m, 1)?;
    set.validate()?;
    check_n(spec.n, set.n())?;
    let (inner, symmetric): (Vec<DMatrix<T>>, bool) = match set {
        MatrixSetDescriptor::Finite { .. } => (set.members::<T>()?, false),
        _ => {
            require("inner_samples", inner_samples, 1)?;
            (difference_sample::<T>(set, inner_samples, child_seed(seed, 0))?, true)
        }
    };
    let rows = if variant == ChaosVariant::S { 1 } else { m };
    let n = spec.n;
    let outer_seed = child_seed(seed, 1);
    let values = (0..trials)
        .into_par_iter()
        .map(|t| {
            let phi = sample_ensemble::<T>(&spec.with_m(rows).with_seed(child_seed(outer_seed, t as u64)))?;
            let g = match variant {
                ChaosVariant::S | ChaosVariant::Sbar => {
                    phi.weighted_gram(&vec![1.0; rows]) - DMatrix::<T>::identity(n, n).scale(rows as f64)
                }
                ChaosVariant::Stilde => phi.weighted_gram(&rademacher_signs(rows, &mut stream(outer_seed, t as u64))),
            };
            Ok(inner
                .iter()
                .map(|x| {
                    let v = frob_inner(&g, x);
                    if symmetric { v.abs() } else { v }
                })
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(CertificateKind::ChaosS, &values, Reduce::Mean, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    /// `sqrt(m) gamma_2 + gamma_1 + sqrt(m) sup Tr`.
    pub k33: f64,
    /// `sqrt(m) sqrt(R0) gamma_2 + gamma_1`.
    pub k44: f64,
    /// `(sup ||X||_* / ||X||_F)^2` over differences.
    pub r0: f64,
}

fn nuclear_ratio_sq<T: Scalar>(diffs: &[DMatrix<T>]) -> Result<f64> {
    let mut best = 0.0f64;
    for d in diffs {
        let f = d.norm();
        if f <= DEGENERATE_PAIR {
            continue;
        }
        let nuclear: f64 = eigh(d)?.eigenvalues.iter().map(|l| l.abs()).sum();
        best = best.max((nuclear / f).powi(2));
    }
    Ok(best)
}

/// Chaos-process bounds with unit constants: the trace-term form and the
/// form that trades the trace term for a `sqrt(R0)` factor.
pub fn bound_compare(set: &MatrixSetDescriptor, m: usize) -> Result<BoundComparison> {
    set.validate()?;
    let b = matrix_budget(set);
    let r0 = match set {
        MatrixSetDescriptor::FullSymmetric { n } => *n as f64,
        MatrixSetDescriptor::LowRank { rank, .. } | MatrixSetDescriptor::SparseLowRank { rank, .. } => 2.0 * *rank as f64,
        MatrixSetDescriptor::Finite { .. } => match set.finite_differences::<f64>() {
            Ok(d) => nuclear_ratio_sq(&d)?,
            Err(_) => nuclear_ratio_sq(&set.finite_differences::<crate::Complex64>()?)?,
        },
    };
    let sm = (m as f64).sqrt();
    let g2 = b.gamma2_sq.sqrt();
    Ok(BoundComparison {
        k33: sm * g2 + b.gamma1 + sm * b.trace_sup,
        k44: sm * r0.sqrt() * g2 + b.gamma1,
        r0,
    })
}
