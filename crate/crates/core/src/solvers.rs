//! Empirical `l_q` risk minimization
//!
//! ```text
//! minimize ||A(x) - b||_q  subject to  x in T      (phaseless, ell = 1, 2)
//! minimize ||A(X) - b||_q  subject to  X in M      (rank-one measurements)
//! ```
//!
//! by projected subgradient descent. Steps are taken along the normalized
//! subgradient with geometrically decaying length
//! `step0 * scale * decay^t`, where `scale` is the norm of the initial
//! estimate; for sharp objectives this converges linearly once the step
//! length tracks the distance to the minimizer. The best iterate over all
//! restarts is returned.
//!
//! Complex gradients use the Wirtinger convention: the real-coordinate
//! gradient is twice the derivative with respect to the conjugate variable.

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensembles::MeasurementMatrix;
use crate::field::{matrix_from_interleaved, random_vector, vector_from_interleaved};
use crate::geometry::{
    dist_d1, dist_d2, project, project_matrix, sample_matrix_direction, MatrixSetDescriptor, SampleMode,
    VectorSetDescriptor,
};
use crate::linalg::top_eigenvector;
use crate::rng::{stream, StreamRng};
use crate::stats::lq_norm;
use crate::{Error, Result, Scalar};

/// Iterations per stall-detection window.
pub const STALL_WINDOW: usize = 50;
/// Relative size of the random perturbation applied to the base
/// initialization for restarts after the first.
const RESTART_JITTER: f64 = 0.5;
/// Largest finite set the enumeration oracle accepts.
pub const ORACLE_MAX_MEMBERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Spectral,
    Random,
    /// Explicit starting point: a vector, or a row-major `n x n` matrix,
    /// interleaved `(re, im)` for complex problems.
    Provided(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub q: f64,
    pub max_iters: usize,
    /// Initial step as a fraction of the initial estimate's norm.
    pub step0: f64,
    pub step_decay: f64,
    pub restarts: usize,
    /// Relative tolerance for both convergence (`f <= tol ||b||_q`) and
    /// stall detection over a window of iterations.
    pub tol: f64,
    pub init: Init,
    /// Seeds the per-restart random streams.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            q: 2.0,
            max_iters: 3000,
            step0: 0.2,
            step_decay: 0.99,
            restarts: 5,
            tol: 1e-10,
            init: Init::Spectral,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::Config(format!("q must be finite and >= 1, got {}", self.q)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::Config("step0 must be positive".into()));
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(Error::Config("step_decay must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport<E> {
    pub estimate: E,
    /// Objective at the winning restart's starting point.
    pub objective_initial: f64,
    /// Best objective across all restarts.
    pub objective_final: f64,
    pub iterations_used: usize,
    pub restart_index: usize,
    pub converged: bool,
    /// Set when the spectral initializer saw all-zero weights.
    pub degenerate_init: bool,
    /// Best objective so far, sampled every [`STALL_WINDOW`] iterations of
    /// the winning restart (first entry is the starting value).
    pub history: Vec<f64>,
    pub d1_error: Option<f64>,
    pub d2_error: Option<f64>,
    pub frobenius_error: Option<f64>,
}

impl<T: Scalar> SolverReport<DVector<T>> {
    pub fn with_truth(mut self, x0: &DVector<T>) -> Result<Self> {
        self.d1_error = Some(dist_d1(&self.estimate, x0)?);
        self.d2_error = Some(dist_d2(&self.estimate, x0)?);
        Ok(self)
    }
}

impl<T: Scalar> SolverReport<DMatrix<T>> {
    pub fn with_truth(mut self, x0: &DMatrix<T>) -> Result<Self> {
        if x0.shape() != self.estimate.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.estimate.nrows(),
                found: x0.nrows(),
            });
        }
        self.frobenius_error = Some((&self.estimate - x0).norm());
        Ok(self)
    }
}

/// Subgradient of `||r||_q` with respect to `r`: entrywise
/// `sign(r_k) |r_k|^{q-1} ||r||_q^{1-q}`, with `sign(0) = 0` and the `0/0`
/// case set to zero.
pub fn lq_subgradient(r: &[f64], q: f64, norm: f64) -> Vec<f64> {
    if norm == 0.0 {
        return vec![0.0; r.len()];
    }
    let sign = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
    if q == 1.0 {
        r.iter().map(|&x| sign(x)).collect()
    } else if q == 2.0 {
        r.iter().map(|&x| x / norm).collect()
    } else {
        r.iter().map(|&x| sign(x) * (x.abs() / norm).powf(q - 1.0)).collect()
    }
}

fn check_b(m: usize, b: &[f64]) -> Result<()> {
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_ell(ell: u8) -> Result<()> {
    if ell == 1 || ell == 2 {
        Ok(())
    } else {
        Err(Error::Config(format!("ell must be 1 or 2, got {ell}")))
    }
}

/// `||A^ell(x) - b||_q`.
pub fn phase_objective<T: Scalar>(
    ell: u8,
    phi: &MeasurementMatrix<T>,
    b: &[f64],
    q: f64,
    x: &DVector<T>,
) -> Result<f64> {
    let a = phi.phaseless(ell, x)?;
    let r: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
    Ok(lq_norm(&r, q))
}

/// `||A(X) - b||_q` for the rank-one measurement map.
pub fn matrix_objective<T: Scalar>(phi: &MeasurementMatrix<T>, b: &[f64], q: f64, x: &DMatrix<T>) -> Result<f64> {
    let a = phi.rank_one(x)?;
    let r: Vec<f64> = a.iter().zip(b).map(|(a, b)| a - b).collect();
    Ok(lq_norm(&r, q))
}

trait Landscape {
    type Point: Clone;
    /// Objective and unit-norm descent direction (`None` when the
    /// subgradient vanishes).
    fn eval(&self, x: &Self::Point) -> Result<(f64, Option<Self::Point>)>;
    /// `P(x - eta * dir)`.
    fn step(&self, x: &Self::Point, dir: &Self::Point, eta: f64) -> Result<Self::Point>;
}

struct Run<P> {
    best: P,
    best_f: f64,
    initial_f: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn descend<L: Landscape>(land: &L, start: L::Point, cfg: &SolverConfig, scale: f64, target: f64) -> Result<Run<L::Point>> {
    let mut x = start;
    let (mut f, mut dir) = land.eval(&x)?;
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut run = Run {
        best: x.clone(),
        best_f: f,
        initial_f: f,
        iterations: 0,
        converged: f <= target,
        history: vec![f],
    };
    let mut window_ref = f;
    let mut eta = cfg.step0 * scale;
    for t in 1..=cfg.max_iters {
        if run.converged {
            break;
        }
        let Some(d) = dir.take() else { break };
        x = land.step(&x, &d, eta)?;
        (f, dir) = land.eval(&x)?;
        if !f.is_finite() {
            return Err(Error::NonFinite);
        }
        run.iterations = t;
        eta *= cfg.step_decay;
        if f < run.best_f {
            run.best_f = f;
            run.best = x.clone();
            run.converged = f <= target;
        }
        if t % STALL_WINDOW == 0 {
            run.history.push(run.best_f);
            if window_ref - run.best_f <= cfg.tol * window_ref {
                break;
            }
            window_ref = run.best_f;
        }
    }
    Ok(run)
}

fn best_of_restarts<P: Clone>(
    starts: impl Iterator<Item = Result<P>>,
    mut run_one: impl FnMut(P) -> Result<Run<P>>,
) -> Result<(usize, Run<P>)> {
    let mut winner: Option<(usize, Run<P>)> = None;
    for (r, start) in starts.enumerate() {
        let run = run_one(start?)?;
        let stop = run.converged;
        if winner.as_ref().is_none_or(|(_, w)| run.best_f < w.best_f) {
            winner = Some((r, run));
        }
        if stop {
            break;
        }
    }
    winner.ok_or(Error::Config("no restarts were run".into()))
}

struct PhaseLandscape<'a, T: Scalar> {
    ell: u8,
    q: f64,
    phi: &'a MeasurementMatrix<T>,
    b: &'a [f64],
    set: &'a VectorSetDescriptor,
    members: Vec<DVector<T>>,
}

impl<T: Scalar> Landscape for PhaseLandscape<'_, T> {
    type Point = DVector<T>;

    fn eval(&self, x: &DVector<T>) -> Result<(f64, Option<DVector<T>>)> {
        let c = self.phi.inner(x)?;
        let r: Vec<f64> = c
            .iter()
            .zip(self.b)
            .map(|(z, b)| if self.ell == 1 { z.modulus() - b } else { z.modulus_squared() - b })
            .collect();
        let f = lq_norm(&r, self.q);
        let g = lq_subgradient(&r, self.q, f);
        let coeffs = DVector::from_iterator(
            c.len(),
            c.iter().zip(&g).map(|(z, gk)| {
                if *gk == 0.0 {
                    T::zero()
                } else if self.ell == 2 {
                    z.scale(2.0 * gk)
                } else if z.modulus() == 0.0 {
                    T::zero()
                } else {
                    z.phase().scale(*gk)
                }
            }),
        );
        let dir = self.phi.combine_rows(&coeffs);
        let norm = dir.norm();
        Ok((f, (norm > 0.0 && norm.is_finite()).then(|| dir.unscale(norm))))
    }

    fn step(&self, x: &DVector<T>, dir: &DVector<T>, eta: f64) -> Result<DVector<T>> {
        let y = x - dir.scale(eta);
        if self.members.is_empty() {
            project(self.set, &y)
        } else {
            let i = crate::geometry::nearest_member(&self.members, &y)?;
            Ok(self.members[i].clone())
        }
    }
}

/// Output of [`spectral_init`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInit<T: Scalar> {
    pub vector: DVector<T>,
    /// All weights were zero; `vector` is an arbitrary unit eigenvector.
    pub degenerate: bool,
}

fn spectral_weights(ell: u8, b: &[f64]) -> Vec<f64> {
    // negative intensities can only come from noise; they carry no energy
    b.iter()
        .map(|&v| if ell == 2 { v.max(0.0) } else { v * v })
        .collect()
}

/// Top eigenvector of `(1/m) sum_k w_k phi_k phi_k^*` with `w = b` for
/// intensities and `w = b^2` for amplitudes, scaled so `||x||^2 = mean(w)`.
pub fn spectral_init<T: Scalar>(phi: &MeasurementMatrix<T>, b: &[f64], ell: u8) -> Result<SpectralInit<T>> {
    spectral_init_on(phi, b, ell, &VectorSetDescriptor::Full { n: phi.n() })
}

/// Spectral initialization adapted to the constraint set: for sparse sets
/// the eigenproblem is restricted to the `s` coordinates with the largest
/// diagonal weight.
pub fn spectral_init_on<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    b: &[f64],
    ell: u8,
    set: &VectorSetDescriptor,
) -> Result<SpectralInit<T>> {
    check_ell(ell)?;
    check_b(phi.m(), b)?;
    let w = spectral_weights(ell, b);
    let mean_w = w.iter().sum::<f64>() / w.len() as f64;
    let gram = phi.weighted_gram(&w).unscale(phi.m() as f64);
    let v = match set {
        VectorSetDescriptor::Sparse { n, s } if s < n => {
            let diag: Vec<f64> = (0..*n).map(|i| gram[(i, i)].real()).collect();
            let mut support: Vec<usize> = (0..*n).collect();
            support.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]).then(a.cmp(&b)));
            support.truncate(*s);
            let block = gram.select_rows(&support).select_columns(&support);
            let (_, u) = top_eigenvector(&block)?;
            let mut v = DVector::zeros(*n);
            for (k, &i) in support.iter().enumerate() {
                v[i] = u[k];
            }
            v
        }
        _ => top_eigenvector(&gram)?.1,
    };
    if mean_w <= 0.0 {
        return Ok(SpectralInit {
            vector: v,
            degenerate: true,
        });
    }
    Ok(SpectralInit {
        vector: v.scale(mean_w.sqrt()),
        degenerate: false,
    })
}

fn jitter<T: Scalar>(base: &DVector<T>, scale: f64, rng: &mut StreamRng) -> DVector<T> {
    let d: DVector<T> = random_vector(base.len(), rng);
    let norm = d.norm();
    base + d.scale(RESTART_JITTER * scale / norm)
}

/// Projected subgradient descent for phaseless measurements.
pub fn solve_phase<T: Scalar>(
    ell: u8,
    phi: &MeasurementMatrix<T>,
    b: &[f64],
    set: &VectorSetDescriptor,
    cfg: &SolverConfig,
) -> Result<SolverReport<DVector<T>>> {
    cfg.validate()?;
    check_ell(ell)?;
    check_b(phi.m(), b)?;
    set.validate()?;
    if set.n() != phi.n() {
        return Err(Error::DimensionMismatch {
            expected: phi.n(),
            found: set.n(),
        });
    }
    let members = set.members::<T>()?;
    let land = PhaseLandscape {
        ell,
        q: cfg.q,
        phi,
        b,
        set,
        members,
    };

    let w = spectral_weights(ell, b);
    let energy = (w.iter().sum::<f64>() / w.len() as f64).sqrt();
    let mut degenerate = false;
    let base: Option<DVector<T>> = match &cfg.init {
        Init::Spectral => {
            let s = spectral_init_on(phi, b, ell, set)?;
            degenerate = s.degenerate;
            Some(s.vector)
        }
        Init::Random => None,
        Init::Provided(data) => {
            let x = vector_from_interleaved::<T>(data)?;
            if x.len() != phi.n() {
                return Err(Error::DimensionMismatch {
                    expected: phi.n(),
                    found: x.len(),
                });
            }
            Some(x)
        }
    };
    let scale = match &base {
        Some(x) if x.norm() > 0.0 => x.norm(),
        _ if energy > 0.0 => energy,
        _ => 1.0,
    };
    let target = cfg.tol * lq_norm(b, cfg.q);

    // Finite sets: restart r starts from the member with the r-th smallest
    // objective (ties to the lower index). Normalized projected steps rarely
    // move an iterate off its starting member, so the starts decide the
    // outcome.
    let ranked: Vec<usize> = if land.members.is_empty() {
        Vec::new()
    } else {
        let mut f: Vec<(f64, usize)> = land
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| Ok((land.eval(m)?.0, i)))
            .collect::<Result<_>>()?;
        f.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        f.into_iter().map(|(_, i)| i).collect()
    };

    let starts = (0..cfg.restarts).map(|r| -> Result<DVector<T>> {
        if !ranked.is_empty() {
            return Ok(land.members[ranked[r % ranked.len()]].clone());
        }
        let mut rng = stream(cfg.seed, r as u64);
        let x = match &base {
            Some(x) if r == 0 => x.clone(),
            Some(x) => jitter(x, scale, &mut rng),
            None => {
                let d: DVector<T> = random_vector(phi.n(), &mut rng);
                d.scale(scale / d.norm())
            }
        };
        project(set, &x)
    });
    let (restart_index, run) = best_of_restarts(starts, |x0| descend(&land, x0, cfg, scale, target))?;
    Ok(SolverReport {
        estimate: run.best,
        objective_initial: run.initial_f,
        objective_final: run.best_f,
        iterations_used: run.iterations,
        restart_index,
        converged: run.converged,
        degenerate_init: degenerate,
        history: run.history,
        d1_error: None,
        d2_error: None,
        frobenius_error: None,
    })
}

/// Exact minimizer of `||A^ell(t) - b||_q` over a finite set by
/// enumeration; ties go to the lowest index.
pub fn solve_finite_oracle<T: Scalar>(
    ell: u8,
    phi: &MeasurementMatrix<T>,
    b: &[f64],
    set: &VectorSetDescriptor,
    q: f64,
) -> Result<SolverReport<DVector<T>>> {
    check_ell(ell)?;
    check_b(phi.m(), b)?;
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Config(format!("q must be finite and >= 1, got {q}")));
    }
    let VectorSetDescriptor::Finite { .. } = set else {
        return Err(Error::InvalidDescriptor("oracle requires a finite set".into()));
    };
    let members = set.members::<T>()?;
    if members.is_empty() || members.len() > ORACLE_MAX_MEMBERS {
        return Err(Error::InvalidDescriptor(format!(
            "finite set size {} outside [1, {ORACLE_MAX_MEMBERS}]",
            members.len()
        )));
    }
    let mut best = (f64::INFINITY, 0usize);
    for (i, t) in members.iter().enumerate() {
        let f = phase_objective(ell, phi, b, q, t)?;
        if f < best.0 {
            best = (f, i);
        }
    }
    Ok(SolverReport {
        estimate: members[best.1].clone(),
        objective_initial: best.0,
        objective_final: best.0,
        iterations_used: 0,
        restart_index: best.1,
        converged: true,
        degenerate_init: false,
        history: vec![best.0],
        d1_error: None,
        d2_error: None,
        frobenius_error: None,
    })
}

struct MatrixLandscape<'a, T: Scalar> {
    q: f64,
    phi: &'a MeasurementMatrix<T>,
    b: &'a [f64],
    set: &'a MatrixSetDescriptor,
}

impl<T: Scalar> Landscape for MatrixLandscape<'_, T> {
    type Point = DMatrix<T>;

    fn eval(&self, x: &DMatrix<T>) -> Result<(f64, Option<DMatrix<T>>)> {
        let a = self.phi.rank_one_unchecked(x);
        let r: Vec<f64> = a.iter().zip(self.b).map(|(a, b)| a - b).collect();
        let f = lq_norm(&r, self.q);
        let g = lq_subgradient(&r, self.q, f);
        let dir = self.phi.weighted_gram(&g);
        let norm = dir.norm();
        Ok((f, (norm > 0.0 && norm.is_finite()).then(|| dir.unscale(norm))))
    }

    fn step(&self, x: &DMatrix<T>, dir: &DMatrix<T>, eta: f64) -> Result<DMatrix<T>> {
        project_matrix(self.set, &(x - dir.scale(eta)))
    }
}

/// Spectral estimate for the matrix model: the set projection of
/// `(1/m) sum_k b_k phi_k phi_k^* - mean(b) I`, rescaled by least squares
/// against `b`. Returns `(estimate, degenerate)`.
pub fn spectral_init_matrix<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    b: &[f64],
    set: &MatrixSetDescriptor,
) -> Result<(DMatrix<T>, bool)> {
    check_b(phi.m(), b)?;
    let n = phi.n();
    let m = phi.m() as f64;
    let mean_b = b.iter().sum::<f64>() / m;
    let y = phi.weighted_gram(b).unscale(m) - DMatrix::<T>::identity(n, n).scale(mean_b);
    let x = project_matrix(set, &y)?;
    let a = phi.rank_one_unchecked(&x);
    let aa: f64 = a.iter().map(|v| v * v).sum();
    if aa == 0.0 {
        return Ok((x, true));
    }
    let c = a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>() / aa;
    Ok((project_matrix(set, &x.scale(c))?, false))
}

/// Projected subgradient descent for rank-one matrix measurements.
pub fn solve_matrix<T: Scalar>(
    phi: &MeasurementMatrix<T>,
    b: &[f64],
    set: &MatrixSetDescriptor,
    cfg: &SolverConfig,
) -> Result<SolverReport<DMatrix<T>>> {
    cfg.validate()?;
    check_b(phi.m(), b)?;
    set.validate()?;
    let n = phi.n();
    if set.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: set.n(),
        });
    }
    let land = MatrixLandscape { q: cfg.q, phi, b, set };
    let mut degenerate = false;
    let base: Option<DMatrix<T>> = match &cfg.init {
        Init::Spectral => {
            let (x, d) = spectral_init_matrix(phi, b, set)?;
            degenerate = d;
            Some(x)
        }
        Init::Random => None,
        Init::Provided(data) => {
            let x = matrix_from_interleaved::<T>(n, data)?;
            crate::linalg::check_hermitian(&x)?;
            Some(x)
        }
    };
    let energy = (b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt();
    let scale = match &base {
        Some(x) if x.norm() > 0.0 => x.norm(),
        _ if energy > 0.0 => energy,
        _ => 1.0,
    };
    let target = cfg.tol * lq_norm(b, cfg.q);
    let starts = (0..cfg.restarts).map(|r| -> Result<DMatrix<T>> {
        let mut rng = stream(cfg.seed, r as u64);
        let x = match &base {
            Some(x) if r == 0 => x.clone(),
            Some(x) => {
                let d: DMatrix<T> = sample_matrix_direction(set, SampleMode::Member, &mut rng)?;
                x + d.scale(RESTART_JITTER * scale)
            }
            None => sample_matrix_direction::<T, _>(set, SampleMode::Member, &mut rng)?.scale(scale),
        };
        project_matrix(set, &x)
    });
    let (restart_index, run) = best_of_restarts(starts, |x0| descend(&land, x0, cfg, scale, target))?;
    Ok(SolverReport {
        estimate: run.best,
        objective_initial: run.initial_f,
        objective_final: run.best_f,
        iterations_used: run.iterations,
        restart_index,
        converged: run.converged,
        degenerate_init: degenerate,
        history: run.history,
        d1_error: None,
        d2_error: None,
        frobenius_error: None,
    })
}
