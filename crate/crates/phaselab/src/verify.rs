//! Acceptance checks. Each check runs at fixed seeds and reports what it
//! measured; failures are reported, never thrown.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use phaselab_core::adversarial::{sharpness_experiment, SharpnessMode, RESIDUAL_TOL};
use phaselab_core::ensembles::{estimate_moments, sample_ensemble};
use phaselab_core::geometry::{dist_d1, dist_d2, dist_d2_materialized};
use phaselab_core::rng::{child_seed, stream};
use phaselab_core::solvers::{solve_finite_oracle, solve_phase};
use phaselab_core::stability::{bound_compare, chaos_s, embed_bounds, injectivity_constant_lower, stability_constant_lower};
use phaselab_core::stats::median;
use phaselab_core::{
    ChaosVariant, Complex64, Distribution, EnsembleSpec, Error as CoreError, FieldTag, MatrixSetDescriptor, Scalar,
    SolverConfig, VectorSetDescriptor,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Kind, NoiseModel, Params, SetDescriptor};
use crate::experiments::{execute, recovery_trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Deterministic metric, moment, lifting and oracle checks.
    Fast,
    /// Every check.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: Vec<Measure>,
    /// One entry per violated invariant.
    pub failures: Vec<String>,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds
        )?;
        for m in &self.measured {
            write!(f, " {}={:.6e}", m.name, m.value)?;
        }
        for x in &self.failures {
            write!(f, "\n       violated: {x}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub criteria: Vec<CriterionResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// Accumulates measurements and violations for one criterion.
struct Check {
    measured: Vec<Measure>,
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            measured: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn measure(&mut self, name: impl Into<String>, value: f64) {
        self.measured.push(Measure {
            name: name.into(),
            value,
        });
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn error(&mut self, e: impl fmt::Display) {
        self.failures.push(format!("error: {e}"));
    }
}

fn timed(id: u8, name: &'static str, body: impl FnOnce(&mut Check)) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::new();
    body(&mut c);
    CriterionResult {
        id,
        name,
        passed: c.failures.is_empty(),
        measured: c.measured,
        failures: c.failures,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Lifted-distance implementation under test; swapped out by negative
/// controls.
#[derive(Clone, Copy)]
pub struct D2Impl {
    pub real: fn(&DVector<f64>, &DVector<f64>) -> phaselab_core::Result<f64>,
    pub complex: fn(&DVector<Complex64>, &DVector<Complex64>) -> phaselab_core::Result<f64>,
}

impl Default for D2Impl {
    fn default() -> Self {
        D2Impl {
            real: dist_d2::<f64>,
            complex: dist_d2::<Complex64>,
        }
    }
}

pub const METRIC_PAIRS: usize = 10_000;
pub const UNIT_PAIRS: usize = 1000;
const METRIC_SEED: u64 = 101;

fn random_pair<T: Scalar>(rng: &mut impl Rng, k: usize) -> (DVector<T>, DVector<T>) {
    let n = rng.random_range(1..=32);
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let u = DVector::from_fn(n, |_, _| T::standard_normal(rng)).scale(scale);
    // Every fourth pair is a close perturbation. The materialized reference
    // carries relative error ~1e-16/eps, so eps stays above 1e-4.
    let v = if k % 4 == 0 {
        let eps = 10f64.powf(rng.random_range(-4.0..-1.0));
        &u + DVector::from_fn(n, |_, _| T::standard_normal(rng)).scale(eps * scale)
    } else {
        DVector::from_fn(n, |_, _| T::standard_normal(rng)).scale(10f64.powf(rng.random_range(-2.0..2.0)))
    };
    (u, v)
}

fn metric_pairs<T: Scalar>(
    d2: fn(&DVector<T>, &DVector<T>) -> phaselab_core::Result<f64>,
    pairs: usize,
    seed: u64,
) -> phaselab_core::Result<(f64, f64)> {
    let mut rng = stream(seed, 0);
    let mut worst_rel = 0.0f64;
    let mut worst_gap = f64::NEG_INFINITY;
    for k in 0..pairs {
        let (u, v) = random_pair::<T>(&mut rng, k);
        let closed = d2(&u, &v)?;
        let materialized = dist_d2_materialized(&u, &v)?;
        worst_rel = worst_rel.max((closed - materialized).abs() / materialized);
        // 2 d2 >= (|u| + |v|) d1, as a relative violation
        let lhs = 2.0 * closed;
        let rhs = (u.norm() + v.norm()) * dist_d1(&u, &v)?;
        worst_gap = worst_gap.max((rhs - lhs) / rhs.max(f64::MIN_POSITIVE));
    }
    Ok((worst_rel, worst_gap))
}

/// `||h g^* + g h^*||_F` over unit pairs; complex pairs are phase-aligned so
/// that `h^* g` is real.
fn symmetrized_outer_range(pairs: usize, seed: u64) -> (f64, f64, f64) {
    let mut rng = stream(seed, 1);
    let (mut lo, mut hi, mut identity) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for k in 0..pairs {
        let n = rng.random_range(2..=32);
        let (norm, inner) = if k % 2 == 0 {
            let h: DVector<f64> = DVector::from_fn(n, |_, _| f64::standard_normal(&mut rng)).normalize();
            let g: DVector<f64> = DVector::from_fn(n, |_, _| f64::standard_normal(&mut rng)).normalize();
            ((&h * g.transpose() + &g * h.transpose()).norm(), h.dot(&g).abs())
        } else {
            let h: DVector<Complex64> = DVector::from_fn(n, |_, _| Complex64::standard_normal(&mut rng)).normalize();
            let g: DVector<Complex64> = DVector::from_fn(n, |_, _| Complex64::standard_normal(&mut rng)).normalize();
            let align = Scalar::phase(h.dotc(&g)).conj();
            let g = g * align;
            ((&h * g.adjoint() + &g * h.adjoint()).norm(), h.dotc(&g).norm())
        };
        lo = lo.min(norm);
        hi = hi.max(norm);
        identity = identity.max((norm - (2.0 + 2.0 * inner * inner).sqrt()).abs());
    }
    (lo, hi, identity)
}

/// `d2` closed form, the d2/d1 inequality, and the range of the
/// symmetrized outer product.
pub fn metric_suite(d2: D2Impl) -> CriterionResult {
    timed(1, "metric and identity invariants", |c| {
        let half = METRIC_PAIRS / 2;
        let real = metric_pairs::<f64>(d2.real, half, METRIC_SEED);
        let complex = metric_pairs::<Complex64>(d2.complex, METRIC_PAIRS - half, METRIC_SEED + 1);
        let ((rel_r, gap_r), (rel_c, gap_c)) = match (real, complex) {
            (Ok(r), Ok(z)) => (r, z),
            (Err(e), _) | (_, Err(e)) => return c.error(e),
        };
        let rel = rel_r.max(rel_c);
        let gap = gap_r.max(gap_c);
        c.measure("d2_max_rel_err", rel);
        c.measure("d2_d1_max_violation", gap);
        c.require(rel <= 1e-10, || format!("d2 closed form vs materialized norm: max relative error {rel:e} > 1e-10"));
        c.require(gap <= 1e-12, || format!("2 d2 >= (|u|+|v|) d1 violated by relative {gap:e}"));
        let (lo, hi, identity) = symmetrized_outer_range(UNIT_PAIRS, METRIC_SEED);
        c.measure("outer_min", lo);
        c.measure("outer_max", hi);
        c.require(lo >= 2f64.sqrt() - 1e-9 && hi <= 2.0 + 1e-9, || {
            format!("|hg*+gh*|_F range [{lo}, {hi}] not inside [sqrt 2, 2]")
        });
        c.require(identity <= 1e-12, || format!("|hg*+gh*|_F identity off by {identity:e}"));
    })
}

pub const MOMENT_TRIALS: usize = 100_000;

/// Gaussian fourth moments and rejection of Rademacher laws.
pub fn moment_suite() -> CriterionResult {
    timed(2, "ensemble fourth moments", |c| {
        for (field, truth, label) in [(FieldTag::Real, 3.0, "real"), (FieldTag::Complex, 2.0, "complex")] {
            match estimate_moments(&EnsembleSpec::gaussian(field, 1, 1, 202), MOMENT_TRIALS) {
                Ok(r) => {
                    let z = (r.fourth_moment - truth) / r.fourth_moment_se;
                    c.measure(format!("{label}_fourth"), r.fourth_moment);
                    c.measure(format!("{label}_z"), z);
                    c.require(z.abs() <= 3.0, || format!("{label} Gaussian fourth moment {} is {z:.2} sigma from {truth}", r.fourth_moment));
                }
                Err(e) => c.error(e),
            }
        }
        for field in [FieldTag::Real, FieldTag::Complex] {
            let spec = EnsembleSpec {
                dist: Distribution::DiscreteSymmetric {
                    values: vec![-1.0, 1.0],
                    probs: vec![0.5, 0.5],
                },
                ..EnsembleSpec::gaussian(field, 4, 4, 0)
            };
            let rejected = matches!(spec.sampler(), Err(CoreError::InvalidDistribution(_)));
            c.require(rejected, || format!("Rademacher law accepted for {field:?} entries"));
        }
    })
}

fn lifting_errors<T: Scalar>(seed: u64) -> phaselab_core::Result<f64> {
    let n = 12;
    let phi = sample_ensemble::<T>(&EnsembleSpec::gaussian(T::FIELD, n, 50, seed))?;
    let m = phi.m() as f64;
    let mut rng = stream(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let u = DVector::from_fn(n, |_, _| T::standard_normal(&mut rng));
        let lifted = &u * u.adjoint();
        let pairs = [(phi.lifting(&lifted, 1.0)?, phi.intensity(&u)?), (phi.lifting(&lifted, 0.5)?, phi.amplitude(&u)?)];
        for (lift, direct) in pairs {
            for (x, y) in lift.iter().zip(&direct) {
                worst = worst.max((m * x - y).abs() / y.max(1.0));
            }
        }
    }
    Ok(worst)
}

/// `m B^1(uu^*)` is the intensity map and `m B^{1/2}(uu^*)` the
/// amplitude map.
pub fn lifting_suite() -> CriterionResult {
    timed(3, "lifting consistency", |c| {
        match (lifting_errors::<f64>(303), lifting_errors::<Complex64>(304)) {
            (Ok(r), Ok(z)) => {
                let worst = r.max(z);
                c.measure("max_err", worst);
                c.require(worst <= 1e-12, || format!("lifting differs from the phaseless maps by {worst:e}"));
            }
            (Err(e), _) | (_, Err(e)) => c.error(e),
        }
    })
}

pub const STABILITY_FLOOR: f64 = 0.05;
pub const CERT_SAMPLES: usize = 1000;

/// Stability lower certificate on Full(32) and Sparse(128,4).
pub fn stability_suite() -> CriterionResult {
    timed(4, "stability certificate", |c| {
        let sets = [
            ("full", VectorSetDescriptor::Full { n: 32 }),
            ("sparse", VectorSetDescriptor::Sparse { n: 128, s: 4 }),
        ];
        for (label, set) in sets {
            let n = set.n();
            let phi = match sample_ensemble::<f64>(&EnsembleSpec::gaussian(FieldTag::Real, n, 16 * n, 404)) {
                Ok(p) => p,
                Err(e) => return c.error(e),
            };
            for ell in [1u8, 2] {
                for q in [1.0, 2.0] {
                    match stability_constant_lower(&phi, &set, ell, q, CERT_SAMPLES, 405) {
                        Ok(est) => {
                            let v = est.statistic;
                            c.measure(format!("{label}_l{ell}_q{q}"), v);
                            c.require(v >= STABILITY_FLOOR, || {
                                format!("stability lower certificate {v} < {STABILITY_FLOOR} ({label}, l={ell}, q={q})")
                            });
                        }
                        Err(e) => c.error(e),
                    }
                }
            }
        }
    })
}

pub const CERT_SEEDS: u64 = 20;

fn injectivity_seeds(set: &MatrixSetDescriptor, m: usize, q: f64) -> phaselab_core::Result<Vec<f64>> {
    (0..CERT_SEEDS)
        .into_par_iter()
        .map(|s| {
            let seed = child_seed(505, s);
            let phi = sample_ensemble::<f64>(&EnsembleSpec::gaussian(FieldTag::Real, set.n(), m, seed))?;
            Ok(injectivity_constant_lower(&phi, set, q, CERT_SAMPLES, child_seed(seed, 1))?.statistic)
        })
        .collect()
}

/// Injectivity certificate on LowRank(32,1) above budget, and
/// its drop below budget.
pub fn injectivity_suite() -> CriterionResult {
    timed(5, "injectivity certificate", |c| {
        let set = MatrixSetDescriptor::LowRank { n: 32, rank: 1 };
        let budget = phaselab_core::geometry::matrix_budget(&set).m_budget;
        let above = (8.0 * budget).ceil() as usize;
        let below = (budget / 4.0).ceil() as usize;
        c.measure("m_above", above as f64);
        c.measure("m_below", below as f64);
        for q in [1.0, 2.0] {
            let (hi, lo) = match (injectivity_seeds(&set, above, q), injectivity_seeds(&set, below, q)) {
                (Ok(h), Ok(l)) => (h, l),
                (Err(e), _) | (_, Err(e)) => return c.error(e),
            };
            let min_hi = hi.iter().copied().fold(f64::INFINITY, f64::min);
            let (med_hi, med_lo) = (median(&hi), median(&lo));
            c.measure(format!("q{q}_min_above"), min_hi);
            c.measure(format!("q{q}_median_above"), med_hi);
            c.measure(format!("q{q}_median_below"), med_lo);
            c.require(min_hi >= STABILITY_FLOOR, || format!("injectivity certificate {min_hi} < {STABILITY_FLOOR} at m={above}, q={q}"));
            c.require(med_lo < med_hi, || format!("below-budget median {med_lo} not below oversampled median {med_hi} (q={q})"));
        }
    })
}

/// `0 < lower <= upper <= 4` for the embedding ratios.
pub fn embedding_suite() -> CriterionResult {
    timed(6, "embedding sandwich", |c| {
        let n = 32;
        let set = VectorSetDescriptor::Full { n };
        for p in [0.5, 1.0] {
            let res: phaselab_core::Result<Vec<(f64, f64)>> = (0..CERT_SEEDS)
                .into_par_iter()
                .map(|s| {
                    let seed = child_seed(606, s);
                    let phi = sample_ensemble::<f64>(&EnsembleSpec::gaussian(FieldTag::Real, n, 16 * n, seed))?;
                    let (lo, hi) = embed_bounds(&phi, p, &set, &set, CERT_SAMPLES, child_seed(seed, 1))?;
                    Ok((lo.statistic, hi.statistic))
                })
                .collect();
            let res = match res {
                Ok(r) => r,
                Err(e) => return c.error(e),
            };
            let min_lo = res.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
            let max_hi = res.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            let ordered = res.iter().all(|(lo, hi)| lo <= hi);
            c.measure(format!("p{p}_min_lower"), min_lo);
            c.measure(format!("p{p}_max_upper"), max_hi);
            c.require(min_lo > 0.0, || format!("embedding lower bound {min_lo} not positive (p={p})"));
            c.require(ordered, || format!("embedding lower exceeds upper for some seed (p={p})"));
            c.require(max_hi <= 4.0, || format!("embedding upper bound {max_hi} > 4 (p={p})"));
        }
    })
}

pub const ORACLE_INSTANCES: u64 = 50;

fn oracle_gap(inst: u64) -> phaselab_core::Result<f64> {
    let n = 8;
    let mut rng = stream(707, inst);
    let size = rng.random_range(8..=64);
    let members: Vec<Vec<f64>> = (0..size)
        .map(|_| {
            let v = DVector::<f64>::from_fn(n, |_, _| f64::standard_normal(&mut rng)).normalize();
            v.scale(rng.random_range(0.5..2.0)).iter().copied().collect()
        })
        .collect();
    let truth = DVector::from_vec(members[rng.random_range(0..size)].clone());
    let set = VectorSetDescriptor::Finite { n, members };
    let ell = (inst % 2 + 1) as u8;
    let q = if inst % 4 < 2 { 1.0 } else { 2.0 };
    let phi = sample_ensemble::<f64>(&EnsembleSpec::gaussian(FieldTag::Real, n, 64, child_seed(707, inst)))?;
    let b: Vec<f64> = phi
        .phaseless(ell, &truth)?
        .iter()
        .map(|v| v + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    let cfg = SolverConfig {
        q,
        seed: inst,
        ..Default::default()
    };
    let solved = solve_phase(ell, &phi, &b, &set, &cfg)?;
    let oracle = solve_finite_oracle(ell, &phi, &b, &set, q)?;
    Ok((solved.objective_final - oracle.objective_final).abs())
}

/// The solver matches exhaustive enumeration on finite sets.
pub fn oracle_suite() -> CriterionResult {
    timed(7, "finite-set oracle equivalence", |c| {
        match (0..ORACLE_INSTANCES).into_par_iter().map(oracle_gap).collect::<phaselab_core::Result<Vec<f64>>>() {
            Ok(gaps) => {
                let worst = gaps.iter().copied().fold(0.0, f64::max);
                let bad = gaps.iter().filter(|g| **g > 1e-9).count();
                c.measure("max_objective_gap", worst);
                c.require(bad == 0, || format!("{bad}/{ORACLE_INSTANCES} instances differ from the oracle by more than 1e-9"));
            }
            Err(e) => c.error(e),
        }
    })
}

pub const SWEEP_FACTORS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
pub const SWEEP_TRIALS: usize = 50;

/// Configuration of the Sparse(128,4) intensity sweep.
pub fn sweep_config() -> ExperimentConfig {
    ExperimentConfig {
        kind: Some(Kind::Sweep),
        ensemble: EnsembleSpec::gaussian(FieldTag::Real, 128, 1, 808),
        set: SetDescriptor::Vector(VectorSetDescriptor::Sparse { n: 128, s: 4 }),
        solver: Some(SolverConfig {
            q: 2.0,
            restarts: 5,
            seed: 809,
            ..Default::default()
        }),
        trials: SWEEP_TRIALS,
        output_path: "results".into(),
        oversample_factors: SWEEP_FACTORS.to_vec(),
        params: Params {
            ell: 2,
            ..Default::default()
        },
    }
}

/// The success rate is nondecreasing in the oversample factor
/// and at least 80% at the largest one.
pub fn sweep_suite() -> CriterionResult {
    timed(8, "recovery phase transition", |c| {
        let out = match execute(Kind::Sweep, &sweep_config()) {
            Ok(o) => o,
            Err(e) => return c.error(e),
        };
        let rates: Vec<f64> = out.summary["points"]
            .as_array()
            .map(|p| p.iter().filter_map(|x| x["success_rate"].as_f64()).collect())
            .unwrap_or_default();
        for (f, r) in SWEEP_FACTORS.iter().zip(&rates) {
            c.measure(format!("rate_x{f}"), *r);
        }
        let monotone = rates.len() == SWEEP_FACTORS.len() && rates.windows(2).all(|w| w[1] >= w[0]);
        c.require(monotone, || format!("success rates {rates:?} not nondecreasing"));
        let last = rates.last().copied().unwrap_or(0.0);
        c.require(last >= 0.8, || format!("success rate {last} < 0.8 at the largest oversample"));
    })
}

pub const SHARPNESS_TRIALS: usize = 100;

/// Median-ratio floor for the adversarial construction: `1/(2 sqrt(q) K)`
/// for amplitudes and `1/(4 q K^2)` for intensities and matrices.
pub fn sharpness_floor(mode: SharpnessMode, q: f64, k: f64) -> f64 {
    match mode {
        SharpnessMode::Amplitude => 1.0 / (2.0 * q.sqrt() * k),
        SharpnessMode::Intensity | SharpnessMode::Matrix => 1.0 / (4.0 * q * k * k),
    }
}

/// Adversarial ratios are bounded below, stable in `m`, and
/// the wrong target fits the corrupted data exactly.
pub fn sharpness_suite() -> CriterionResult {
    timed(9, "adversarial sharpness", |c| {
        let spec = EnsembleSpec::gaussian(FieldTag::Real, 32, 1, 909);
        let k = match estimate_moments(&spec, MOMENT_TRIALS) {
            Ok(r) => r.psi2_proxy,
            Err(e) => return c.error(e),
        };
        c.measure("k_proxy", k);
        for mode in [SharpnessMode::Amplitude, SharpnessMode::Intensity, SharpnessMode::Matrix] {
            for q in [1.0, 2.0] {
                let floor = sharpness_floor(mode, q, k);
                let mut medians = Vec::new();
                for m in [256usize, 1024] {
                    let s = match sharpness_experiment::<f64>(&spec, mode, q, m, SHARPNESS_TRIALS) {
                        Ok(s) => s,
                        Err(e) => return c.error(e),
                    };
                    let med = s.ratio_quantiles[1];
                    let tag = format!("{}_q{q}_m{m}", mode.label());
                    c.measure(format!("{tag}_median"), med);
                    c.measure(format!("{tag}_max_residual"), s.max_residual);
                    c.require(med >= floor, || format!("{tag}: median ratio {med} < floor {floor}"));
                    c.require(s.max_residual <= RESIDUAL_TOL, || {
                        format!("{tag}: zero-residual certificate off by {:e}", s.max_residual)
                    });
                    medians.push(med);
                }
                let change = medians[0] / medians[1];
                c.require((0.5..=2.0).contains(&change), || {
                    format!("{} q={q}: median ratio changes by {change} between m=256 and m=1024", mode.label())
                });
            }
        }
    })
}

fn scaled_identity(n: usize) -> MatrixSetDescriptor {
    let x = DMatrix::<f64>::identity(n, n).unscale((n as f64).sqrt());
    MatrixSetDescriptor::Finite {
        n,
        members: vec![x.iter().copied().collect(), x.iter().map(|v| -v).collect()],
    }
}

pub const CHAOS_TRIALS: usize = 2000;

/// Chaos growth on the scaled identity, ordering of the two
/// bounds, and the trace-form bound on LowRank(16,1).
pub fn chaos_suite() -> CriterionResult {
    timed(10, "chaos bound comparison", |c| {
        for n in [16usize, 64, 256] {
            let spec = EnsembleSpec::gaussian(FieldTag::Real, n, 1, 1010);
            match chaos_s::<f64>(&spec, &scaled_identity(n), 1, ChaosVariant::Stilde, CHAOS_TRIALS, 0, 1011) {
                Ok(est) => {
                    let ratio = est.statistic / (n as f64).sqrt();
                    c.measure(format!("identity_n{n}_ratio"), ratio);
                    c.require((0.5..=2.0).contains(&ratio), || format!("S/sqrt(n) = {ratio} outside [0.5, 2] at n={n}"));
                }
                Err(e) => c.error(e),
            }
        }
        let mut worst_gap = f64::INFINITY;
        for n in [3usize, 8, 16, 32] {
            for rank in [2usize, 3] {
                let set = MatrixSetDescriptor::LowRank { n, rank };
                for m in [1usize, 2, 10, 64, 256, 1000, 10_000] {
                    match bound_compare(&set, m) {
                        Ok(b) => {
                            worst_gap = worst_gap.min(b.k44 - b.k33);
                            c.require(b.k33 < b.k44, || format!("LowRank({n},{rank}), m={m}: K33 {} >= K44 {}", b.k33, b.k44));
                        }
                        Err(e) => c.error(e),
                    }
                }
            }
        }
        c.measure("min_k44_minus_k33", worst_gap);
        let set = MatrixSetDescriptor::LowRank { n: 16, rank: 1 };
        let spec = EnsembleSpec::gaussian(FieldTag::Real, 16, 1, 1012);
        for m in [64usize, 256] {
            let est = chaos_s::<f64>(&spec, &set, m, ChaosVariant::Stilde, 50, 200, 1013);
            match (est, bound_compare(&set, m)) {
                (Ok(est), Ok(b)) => {
                    let ratio = est.statistic / b.k33;
                    c.measure(format!("lowrank_m{m}_over_k33"), ratio);
                    c.require(ratio <= 10.0, || format!("LowRank(16,1), m={m}: S = {} exceeds 10 K33 = {}", est.statistic, 10.0 * b.k33));
                }
                (Err(e), _) | (_, Err(e)) => c.error(e),
            }
        }
    })
}

pub const ROBUST_SEEDS: usize = 50;
pub const ROBUST_FRACTION: f64 = 0.05;
pub const ROBUST_LEVEL: f64 = 10.0;
pub const ROBUST_OVERSAMPLE: usize = 10;

/// Matrix recovery on LowRank(32,1) with 5% gross outliers.
pub fn robustness_config(q: f64) -> ExperimentConfig {
    let n = 32;
    ExperimentConfig {
        kind: Some(Kind::Recover),
        ensemble: EnsembleSpec::gaussian(FieldTag::Real, n, ROBUST_OVERSAMPLE * n, 1111),
        set: SetDescriptor::Matrix(MatrixSetDescriptor::LowRank { n, rank: 1 }),
        solver: Some(SolverConfig {
            q,
            seed: 1112,
            ..Default::default()
        }),
        trials: ROBUST_SEEDS,
        output_path: "results".into(),
        oversample_factors: Vec::new(),
        params: Params {
            noise: NoiseModel::Outliers {
                fraction: ROBUST_FRACTION,
                level: ROBUST_LEVEL,
            },
            ..Default::default()
        },
    }
}

/// Under gross corruption `q = 1` beats `q = 2` in median
/// error over paired seeds.
pub fn robustness_suite() -> CriterionResult {
    timed(11, "robustness ordering", |c| {
        let mut medians = Vec::new();
        for q in [1.0, 2.0] {
            let cfg = robustness_config(q);
            let m = cfg.ensemble.m;
            let errs: crate::Result<Vec<f64>> = (0..ROBUST_SEEDS)
                .into_par_iter()
                .map(|t| Ok(recovery_trial::<f64>(&cfg, m, t)?.relative_error))
                .collect();
            match errs {
                Ok(e) => {
                    let med = median(&e);
                    c.measure(format!("q{q}_median_rel_err"), med);
                    medians.push(med);
                }
                Err(e) => return c.error(e),
            }
        }
        c.require(medians[0] < medians[1], || {
            format!("median error with q=1 ({}) not below q=2 ({})", medians[0], medians[1])
        });
    })
}

/// Runs the checks of `suite` in criterion order.
pub fn run_suite(suite: Suite) -> Report {
    let mut criteria = vec![metric_suite(D2Impl::default()), moment_suite(), lifting_suite()];
    if suite == Suite::Full {
        criteria.push(stability_suite());
        criteria.push(injectivity_suite());
        criteria.push(embedding_suite());
    }
    criteria.push(oracle_suite());
    if suite == Suite::Full {
        criteria.push(sweep_suite());
        criteria.push(sharpness_suite());
        criteria.push(chaos_suite());
        criteria.push(robustness_suite());
    }
    Report { suite, criteria }
}
