//! One runner per experiment kind. Every trial draws its ensemble from
//! `child_seed(ensemble.seed, trial)`, independent of `m`, so runs at
//! different measurement counts are paired (the rows of the smaller
//! ensemble are a prefix of the larger one).

use nalgebra::{DMatrix, DVector};
use phaselab_core::adversarial::{sharpness_experiment, SharpnessMode};
use phaselab_core::ensembles::sample_ensemble;
use phaselab_core::geometry::{sample_matrix_direction, sample_vector_direction, sample_vector_member};
use phaselab_core::rng::{child_seed, stream, StreamRng};
use phaselab_core::solvers::{solve_matrix, solve_phase};
use phaselab_core::stability::{
    bound_compare, chaos_s, embed_bounds, injectivity_constant_lower, rademacher_r, small_ball_q,
    stability_constant_lower, CertificateEstimate,
};
use phaselab_core::stats::median;
use phaselab_core::{
    Complex64, FieldTag, SampleMode, Scalar, SolverConfig, VectorSetDescriptor,
};
use rand::seq::index;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, NoiseModel, SetDescriptor};
use crate::error::Result;
use crate::output::{Cell, Table};

const TRUTH_STREAM: u64 = u64::MAX - 1;
const NOISE_STREAM: u64 = u64::MAX - 2;
/// Child index separating certificate sampling from ensemble sampling.
const CERT_CHILD: u64 = 1;

/// Result table plus a JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
}

/// Validates `cfg` for `kind` and runs it.
pub fn execute(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate(kind)?;
    match cfg.ensemble.field {
        FieldTag::Real => dispatch::<f64>(kind, cfg),
        FieldTag::Complex => dispatch::<Complex64>(kind, cfg),
    }
}

fn dispatch<T: Scalar>(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome> {
    match kind {
        Kind::Recover | Kind::Sweep => recover::<T>(kind, cfg),
        Kind::Stability | Kind::Injectivity | Kind::Embed | Kind::Smallball | Kind::Chaos => {
            certificates::<T>(kind, cfg)
        }
        Kind::Adversarial => adversarial::<T>(cfg),
    }
}

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    child_seed(cfg.ensemble.seed, trial as u64)
}

fn rms(b: &[f64]) -> f64 {
    (b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt()
}

/// Applies the configured noise model in place.
pub fn add_noise(noise: &NoiseModel, b: &mut [f64], rng: &mut StreamRng) {
    match noise {
        NoiseModel::None => {}
        NoiseModel::Gaussian { level } => {
            for v in b.iter_mut() {
                *v += level * f64::standard_normal(rng);
            }
        }
        NoiseModel::Outliers { fraction, level } => {
            let scale = level * rms(b);
            let count = ((fraction * b.len() as f64).round() as usize).min(b.len());
            for k in index::sample(rng, b.len(), count) {
                b[k] += scale * f64::standard_normal(rng);
            }
        }
    }
}

/// One recovery trial, shared by `recover`, `sweep` and the verification
/// suite.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrial {
    pub trial: usize,
    pub seed: u64,
    pub m: usize,
    pub d1_error: Option<f64>,
    pub d2_error: Option<f64>,
    pub frobenius_error: Option<f64>,
    pub relative_error: f64,
    pub objective_final: f64,
    pub iterations_used: usize,
    pub restart_index: usize,
    pub converged: bool,
}

fn vector_truth<T: Scalar>(set: &VectorSetDescriptor, rng: &mut StreamRng) -> Result<DVector<T>> {
    Ok(match set {
        VectorSetDescriptor::Finite { .. } => sample_vector_member(set, rng)?,
        _ => sample_vector_direction(set, SampleMode::Member, rng)?,
    })
}

pub fn recovery_trial<T: Scalar>(cfg: &ExperimentConfig, m: usize, trial: usize) -> Result<RecoveryTrial> {
    let seed = trial_seed(cfg, trial);
    let phi = sample_ensemble::<T>(&cfg.ensemble.with_m(m).with_seed(seed))?;
    let mut truth_rng = stream(seed, TRUTH_STREAM);
    let mut noise_rng = stream(seed, NOISE_STREAM);
    let base = cfg.solver();
    let solver = SolverConfig {
        seed: child_seed(base.seed, trial as u64),
        ..base
    };
    let ell = cfg.params.ell;
    Ok(match &cfg.set {
        SetDescriptor::Vector(set) => {
            let x0: DVector<T> = vector_truth(set, &mut truth_rng)?;
            let mut b = phi.phaseless(ell, &x0)?;
            add_noise(&cfg.params.noise, &mut b, &mut noise_rng);
            let r = solve_phase(ell, &phi, &b, set, &solver)?.with_truth(&x0)?;
            let relative_error = if ell == 2 {
                r.d2_error.unwrap_or(f64::NAN) / x0.norm_squared()
            } else {
                r.d1_error.unwrap_or(f64::NAN) / x0.norm()
            };
            RecoveryTrial {
                trial,
                seed,
                m,
                d1_error: r.d1_error,
                d2_error: r.d2_error,
                frobenius_error: None,
                relative_error,
                objective_final: r.objective_final,
                iterations_used: r.iterations_used,
                restart_index: r.restart_index,
                converged: r.converged,
            }
        }
        SetDescriptor::Matrix(set) => {
            let x0: DMatrix<T> = sample_matrix_direction(set, SampleMode::Member, &mut truth_rng)?;
            let mut b = phi.rank_one(&x0)?;
            add_noise(&cfg.params.noise, &mut b, &mut noise_rng);
            let r = solve_matrix(&phi, &b, set, &solver)?.with_truth(&x0)?;
            let frob = r.frobenius_error.unwrap_or(f64::NAN);
            RecoveryTrial {
                trial,
                seed,
                m,
                d1_error: None,
                d2_error: None,
                frobenius_error: Some(frob),
                relative_error: frob / x0.norm(),
                objective_final: r.objective_final,
                iterations_used: r.iterations_used,
                restart_index: r.restart_index,
                converged: r.converged,
            }
        }
    })
}

fn mode_label(cfg: &ExperimentConfig) -> String {
    match cfg.set {
        SetDescriptor::Vector(_) => cfg.params.ell.to_string(),
        SetDescriptor::Matrix(_) => "matrix".into(),
    }
}

fn recover<T: Scalar>(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut table = Table::new(&[
        "oversample",
        "m",
        "trial",
        "seed",
        "n",
        "q",
        "ell_or_matrix",
        "d1_error",
        "d2_error",
        "frobenius_error",
        "relative_error",
        "objective_final",
        "iterations_used",
        "restart_index",
        "converged",
        "success",
    ]);
    let q = cfg.solver().q;
    let tol = cfg.params.success_tol;
    let mut points = Vec::new();
    for (factor, m) in cfg.m_values() {
        let trials = (0..cfg.trials)
            .into_par_iter()
            .map(|t| recovery_trial::<T>(cfg, m, t))
            .collect::<Result<Vec<_>>>()?;
        for r in &trials {
            table.push(vec![
                factor.into(),
                m.into(),
                r.trial.into(),
                r.seed.into(),
                cfg.ensemble.n.into(),
                q.into(),
                mode_label(cfg).into(),
                r.d1_error.into(),
                r.d2_error.into(),
                r.frobenius_error.into(),
                r.relative_error.into(),
                r.objective_final.into(),
                r.iterations_used.into(),
                r.restart_index.into(),
                r.converged.into(),
                (r.relative_error < tol).into(),
            ]);
        }
        let errors: Vec<f64> = trials.iter().map(|r| r.relative_error).collect();
        let successes = errors.iter().filter(|e| **e < tol).count();
        points.push(json!({
            "oversample": factor,
            "m": m,
            "trials": trials.len(),
            "success_rate": successes as f64 / trials.len() as f64,
            "median_relative_error": median(&errors),
        }));
    }
    let rates: Vec<f64> = points.iter().map(|p| p["success_rate"].as_f64().unwrap_or(f64::NAN)).collect();
    let summary = json!({
        "kind": kind.name(),
        "descriptor": cfg.set.label(),
        "field": cfg.ensemble.field,
        "n": cfg.ensemble.n,
        "q": q,
        "ell_or_matrix": mode_label(cfg),
        "success_tol": tol,
        "points": points,
        "success_nondecreasing": rates.windows(2).all(|w| w[1] >= w[0]),
    });
    Ok(Outcome { table, summary })
}

const CERT_HEADER: [&str; 13] = [
    "experiment",
    "descriptor",
    "oversample",
    "m",
    "trial",
    "seed",
    "q",
    "param",
    "statistic",
    "p01",
    "p50",
    "p99",
    "samples",
];

struct CertRow {
    experiment: &'static str,
    q: Option<f64>,
    param: Cell,
    cert: CertificateEstimate,
}

fn certificate_rows<T: Scalar>(kind: Kind, cfg: &ExperimentConfig, m: usize, trial: usize) -> Result<Vec<CertRow>> {
    let seed = trial_seed(cfg, trial);
    let cert_seed = child_seed(seed, CERT_CHILD);
    let p = &cfg.params;
    let spec = cfg.ensemble.with_m(m).with_seed(seed);
    let phi = || sample_ensemble::<T>(&spec);
    Ok(match (kind, &cfg.set) {
        (Kind::Stability, SetDescriptor::Vector(set)) => vec![CertRow {
            experiment: "stability_lower",
            q: Some(p.q),
            param: Cell::from(p.ell as usize),
            cert: stability_constant_lower(&phi()?, set, p.ell, p.q, p.samples, cert_seed)?,
        }],
        (Kind::Stability | Kind::Injectivity, SetDescriptor::Matrix(set)) => vec![CertRow {
            experiment: "injectivity_lower",
            q: Some(p.q),
            param: Cell::Empty,
            cert: injectivity_constant_lower(&phi()?, set, p.q, p.samples, cert_seed)?,
        }],
        (Kind::Embed, SetDescriptor::Vector(set)) => {
            let (lo, hi) = embed_bounds(&phi()?, p.p, set, set, p.samples, cert_seed)?;
            vec![
                CertRow {
                    experiment: "embed_lower",
                    q: None,
                    param: p.p.into(),
                    cert: lo,
                },
                CertRow {
                    experiment: "embed_upper",
                    q: None,
                    param: p.p.into(),
                    cert: hi,
                },
            ]
        }
        (Kind::Smallball, SetDescriptor::Matrix(set)) => vec![
            CertRow {
                experiment: "small_ball_q",
                q: None,
                param: p.xi.into(),
                cert: small_ball_q::<T>(&spec, set, p.xi, p.tail_trials, p.mc_inner.max(50), cert_seed)?,
            },
            CertRow {
                experiment: "rademacher_r",
                q: None,
                param: Cell::Empty,
                cert: rademacher_r::<T>(&spec, set, m, p.mc_outer, p.mc_inner, cert_seed)?,
            },
        ],
        (Kind::Chaos, SetDescriptor::Matrix(set)) => vec![CertRow {
            experiment: "chaos_s",
            q: None,
            param: format!("{:?}", p.variant).to_lowercase().into(),
            cert: chaos_s::<T>(&spec, set, m, p.variant, p.samples, p.mc_inner, cert_seed)?,
        }],
        _ => unreachable!("validated by ExperimentConfig::validate"),
    })
}

fn certificates<T: Scalar>(kind: Kind, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut table = Table::new(&CERT_HEADER);
    let mut points = Vec::new();
    for (factor, m) in cfg.m_values() {
        let per_trial = (0..cfg.trials)
            .into_par_iter()
            .map(|t| certificate_rows::<T>(kind, cfg, m, t))
            .collect::<Result<Vec<_>>>()?;
        let mut by_experiment: Vec<(&str, Vec<f64>)> = Vec::new();
        for (trial, rows) in per_trial.iter().enumerate() {
            for r in rows {
                table.push(vec![
                    r.experiment.into(),
                    cfg.set.label().into(),
                    factor.into(),
                    m.into(),
                    trial.into(),
                    r.cert.seed.into(),
                    r.q.into(),
                    r.param.clone(),
                    r.cert.statistic.into(),
                    r.cert.quantiles[0].into(),
                    r.cert.quantiles[1].into(),
                    r.cert.quantiles[2].into(),
                    r.cert.trials.into(),
                ]);
                match by_experiment.iter_mut().find(|(e, _)| *e == r.experiment) {
                    Some((_, v)) => v.push(r.cert.statistic),
                    None => by_experiment.push((r.experiment, vec![r.cert.statistic])),
                }
            }
        }
        let mut point = json!({ "oversample": factor, "m": m });
        for (e, v) in &by_experiment {
            point[*e] = json!({
                "median": median(v),
                "min": v.iter().copied().fold(f64::INFINITY, f64::min),
                "max": v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        if let (Kind::Chaos, SetDescriptor::Matrix(set)) = (kind, &cfg.set) {
            point["bounds"] = serde_json::to_value(bound_compare(set, m)?)?;
        }
        points.push(point);
    }
    let summary = json!({
        "kind": kind.name(),
        "descriptor": cfg.set.label(),
        "field": cfg.ensemble.field,
        "n": cfg.ensemble.n,
        "trials": cfg.trials,
        "points": points,
    });
    Ok(Outcome { table, summary })
}

fn adversarial<T: Scalar>(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mode = match cfg.set {
        SetDescriptor::Vector(_) => SharpnessMode::from_ell(cfg.params.ell)?,
        SetDescriptor::Matrix(_) => SharpnessMode::Matrix,
    };
    let q = cfg.params.q;
    let mut table = Table::new(&[
        "trial",
        "seed",
        "n",
        "m",
        "q",
        "ell_or_matrix",
        "d_error",
        "z_norm_q",
        "ratio",
        "residual",
    ]);
    let mut points = Vec::new();
    for (factor, m) in cfg.m_values() {
        let s = sharpness_experiment::<T>(&cfg.ensemble, mode, q, m, cfg.trials)?;
        for r in &s.rows {
            table.push(vec![
                r.trial.into(),
                r.seed.into(),
                r.n.into(),
                r.m.into(),
                r.q.into(),
                r.ell_or_matrix.clone().into(),
                r.d_error.into(),
                r.z_norm_q.into(),
                r.ratio.into(),
                r.residual.into(),
            ]);
        }
        for (label, v) in ["p01", "p50", "p99"].into_iter().zip(s.ratio_quantiles) {
            table.push(vec![
                label.into(),
                Cell::Empty,
                cfg.ensemble.n.into(),
                m.into(),
                q.into(),
                mode.label().into(),
                Cell::Empty,
                Cell::Empty,
                v.into(),
                Cell::Empty,
            ]);
        }
        points.push(json!({
            "oversample": factor,
            "m": m,
            "ratio_p01": s.ratio_quantiles[0],
            "ratio_p50": s.ratio_quantiles[1],
            "ratio_p99": s.ratio_quantiles[2],
            "max_residual": s.max_residual,
        }));
    }
    let summary = json!({
        "kind": "adversarial",
        "field": cfg.ensemble.field,
        "n": cfg.ensemble.n,
        "q": q,
        "ell_or_matrix": mode.label(),
        "trials": cfg.trials,
        "points": points,
    });
    Ok(Outcome { table, summary })
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outliers_touch_the_requested_fraction() {
        let clean: Vec<f64> = (1..=200).map(f64::from).collect();
        let mut b = clean.clone();
        let noise = NoiseModel::Outliers {
            fraction: 0.05,
            level: 10.0,
        };
        add_noise(&noise, &mut b, &mut stream(3, 0));
        assert_eq!(b.iter().zip(&clean).filter(|(x, y)| x != y).count(), 10);
        let mut same = clean.clone();
        add_noise(&NoiseModel::None, &mut same, &mut stream(3, 0));
        assert_eq!(same, clean);
    }
}
