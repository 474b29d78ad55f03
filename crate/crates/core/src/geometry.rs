//! Constraint sets, phase-invariant distances, projections, cone-sphere
//! samplers and closed-form measurement budgets.
//!
//! Budgets drop every unspecified absolute constant (they are reported in
//! "budget units"); callers multiply by an oversampling factor.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::{matrix_from_interleaved, random_vector, vector_from_interleaved};
use crate::linalg::{hermitian_part, trace_re, truncate_rank};
use crate::{Error, Result, Scalar};

/// Attempts before a degenerate (numerically zero) sample is an error.
pub const MAX_RESAMPLES: usize = 100;
const ZERO_NORM: f64 = 1e-12;

/// Signal constraint set `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorSetDescriptor {
    Full { n: usize },
    /// `s`-sparse vectors.
    Sparse { n: usize, s: usize },
    /// Explicit members, interleaved `(re, im)` for complex signals.
    Finite { n: usize, members: Vec<Vec<f64>> },
}

/// Matrix constraint set `M` of symmetric / Hermitian matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSetDescriptor {
    FullSymmetric { n: usize },
    LowRank { n: usize, rank: usize },
    /// Rank at most `rank` with at most `s` nonzero rows and columns.
    SparseLowRank { n: usize, rank: usize, s: usize },
    /// Explicit members, row-major and interleaved for complex matrices.
    #[serde(rename = "finite_matrix")]
    Finite { n: usize, members: Vec<Vec<f64>> },
}

impl VectorSetDescriptor {
    pub fn n(&self) -> usize {
        match self {
            Self::Full { n } | Self::Sparse { n, .. } | Self::Finite { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Full { n } if *n >= 1 => Ok(()),
            Self::Sparse { n, s } if *s >= 1 && s <= n => Ok(()),
            Self::Finite { n, members } if *n >= 1 && !members.is_empty() => Ok(()),
            other => Err(Error::InvalidDescriptor(format!("{other:?}"))),
        }
    }

    /// Finite members decoded into `T`; empty for the cone sets.
    pub fn members<T: Scalar>(&self) -> Result<Vec<DVector<T>>> {
        let Self::Finite { n, members } = self else {
            return Ok(Vec::new());
        };
        members
            .iter()
            .map(|m| {
                let v = vector_from_interleaved::<T>(m)?;
                if v.len() != *n {
                    return Err(Error::DimensionMismatch {
                        expected: *n,
                        found: v.len(),
                    });
                }
                Ok(v)
            })
            .collect()
    }

    pub fn is_cone(&self) -> bool {
        !matches!(self, Self::Finite { .. })
    }
}

impl MatrixSetDescriptor {
    pub fn n(&self) -> usize {
        match self {
            Self::FullSymmetric { n }
            | Self::LowRank { n, .. }
            | Self::SparseLowRank { n, .. }
            | Self::Finite { n, .. } => *n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::FullSymmetric { n } => *n >= 1,
            Self::LowRank { n, rank } => *rank >= 1 && rank <= n,
            Self::SparseLowRank { n, rank, s } => *rank >= 1 && rank <= n && *s >= 1 && s <= n,
            Self::Finite { n, members } => *n >= 1 && !members.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDescriptor(format!("{self:?}")))
        }
    }

    pub fn members<T: Scalar>(&self) -> Result<Vec<DMatrix<T>>> {
        let Self::Finite { n, members } = self else {
            return Ok(Vec::new());
        };
        members
            .iter()
            .map(|m| {
                let x = matrix_from_interleaved::<T>(*n, m)?;
                crate::linalg::check_hermitian(&x)?;
                Ok(x)
            })
            .collect()
    }

    /// All pairwise differences `M - M` of a finite set (including zero).
    pub fn finite_differences<T: Scalar>(&self) -> Result<Vec<DMatrix<T>>> {
        let members = self.members::<T>()?;
        let mut out = Vec::with_capacity(members.len() * members.len());
        for a in &members {
            for b in &members {
                out.push(a - b);
            }
        }
        Ok(out)
    }
}

/// `d1` with its minimizing unimodular aligner, and `d2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDistancePair<T> {
    pub d1: f64,
    pub d2: f64,
    pub aligner: T,
}

fn check_same_len<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `min_{|c|=1} ||u - c v||` and the minimizer `c = Phase(v^* u)`.
pub fn dist_d1_aligned<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<(f64, T)> {
    check_same_len(u, v)?;
    let c = v.dotc(u).phase();
    Ok(((u - v * c).norm(), c))
}

pub fn dist_d1<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<f64> {
    dist_d1_aligned(u, v).map(|(d, _)| d)
}

/// `||u u^* - v v^*||_F` in closed form. The textbook expression
/// `|u|^4 + |v|^4 - 2 |<u,v>|^2` cancels catastrophically for close pairs,
/// so it is evaluated as
/// `Re<u - v, u + v>^2 + 2 |u|^2 |w|^2` where `w` is the component of
/// `v - u` orthogonal to `u`.
pub fn dist_d2<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<f64> {
    check_same_len(u, v)?;
    let nu = u.norm_squared();
    if nu == 0.0 {
        return Ok(v.norm_squared());
    }
    let delta = v - u;
    let diff = delta.dotc(&(u + v)).real();
    let residual = &delta - u * (u.dotc(&delta).unscale(nu));
    Ok((diff * diff + 2.0 * nu * residual.norm_squared()).sqrt())
}

/// `d2` by forming `u u^* - v v^*` explicitly.
pub fn dist_d2_materialized<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<f64> {
    check_same_len(u, v)?;
    Ok((u * u.adjoint() - v * v.adjoint()).norm())
}

pub fn distances<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> Result<PhaseDistancePair<T>> {
    let (d1, aligner) = dist_d1_aligned(u, v)?;
    Ok(PhaseDistancePair {
        d1,
        d2: dist_d2(u, v)?,
        aligner,
    })
}

/// `d_ell`: `d1` for amplitudes, `d2` for intensities.
pub fn dist_ell<T: Scalar>(ell: u8, u: &DVector<T>, v: &DVector<T>) -> Result<f64> {
    match ell {
        1 => dist_d1(u, v),
        2 => dist_d2(u, v),
        _ => Err(Error::Config(format!("ell must be 1 or 2, got {ell}"))),
    }
}

/// Indices of the `k` largest scores, ties to the lower index.
fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Projection onto a vector set: identity, best `s`-term approximation, or
/// the `d1`-nearest finite member (ties to the lowest index).
pub fn project<T: Scalar>(set: &VectorSetDescriptor, x: &DVector<T>) -> Result<DVector<T>> {
    if x.len() != set.n() {
        return Err(Error::DimensionMismatch {
            expected: set.n(),
            found: x.len(),
        });
    }
    match set {
        VectorSetDescriptor::Full { .. } => Ok(x.clone()),
        VectorSetDescriptor::Sparse { s, .. } => {
            let mags: Vec<f64> = x.iter().map(|z| z.modulus()).collect();
            let mut out = DVector::zeros(x.len());
            for i in top_indices(&mags, *s) {
                out[i] = x[i];
            }
            Ok(out)
        }
        VectorSetDescriptor::Finite { .. } => {
            let members = set.members::<T>()?;
            let idx = nearest_member(&members, x)?;
            Ok(members[idx].clone())
        }
    }
}

/// Index of the `d1`-nearest member, lowest index on ties.
pub fn nearest_member<T: Scalar>(members: &[DVector<T>], x: &DVector<T>) -> Result<usize> {
    let mut best = (f64::INFINITY, 0);
    for (i, m) in members.iter().enumerate() {
        let d = dist_d1(x, m)?;
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(best.1)
}

/// Support/rank alternation rounds for the sparse low-rank projection.
pub const SPARSE_LOW_RANK_ROUNDS: usize = 3;

/// Projection onto a matrix set.
///
/// The sparse low-rank case alternates row-support selection (by row norms
/// of the current low-rank iterate) with rank truncation of the input
/// restricted to that support. It is feasible but not guaranteed to be the
/// exact metric projection.
pub fn project_matrix<T: Scalar>(set: &MatrixSetDescriptor, x: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = set.n();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.nrows(),
        });
    }
    match set {
        MatrixSetDescriptor::FullSymmetric { .. } => Ok(hermitian_part(x)),
        MatrixSetDescriptor::LowRank { rank, .. } => truncate_rank(x, *rank),
        MatrixSetDescriptor::SparseLowRank { rank, s, .. } => {
            let sym = hermitian_part(x);
            let mut low = truncate_rank(&sym, *rank)?;
            for _ in 0..SPARSE_LOW_RANK_ROUNDS {
                let norms: Vec<f64> = low.row_iter().map(|r| r.norm()).collect();
                let keep = top_indices(&norms, *s);
                let mut mask = vec![false; n];
                for &i in &keep {
                    mask[i] = true;
                }
                let restricted = DMatrix::from_fn(n, n, |i, j| {
                    if mask[i] && mask[j] {
                        sym[(i, j)]
                    } else {
                        T::zero()
                    }
                });
                low = truncate_rank(&restricted, *rank)?;
                // zero rows outside the support exactly
                for i in (0..n).filter(|&i| !mask[i]) {
                    low.row_mut(i).fill(T::zero());
                    low.column_mut(i).fill(T::zero());
                }
            }
            Ok(low)
        }
        MatrixSetDescriptor::Finite { .. } => {
            let members = set.members::<T>()?;
            let mut best = (f64::INFINITY, 0);
            for (i, m) in members.iter().enumerate() {
                let d = (x - m).norm();
                if d < best.0 {
                    best = (d, i);
                }
            }
            Ok(members[best.1].clone())
        }
    }
}

/// Unit-constant `gamma_2(cone(T) ∩ S)`: `sqrt n`, `sqrt(s log(en/s))`, or
/// `sqrt(log |T|)`.
pub fn gamma2_budget(set: &VectorSetDescriptor) -> f64 {
    match set {
        VectorSetDescriptor::Full { n } => (*n as f64).sqrt(),
        VectorSetDescriptor::Sparse { n, s } => sparse_entropy(*n, *s).sqrt(),
        VectorSetDescriptor::Finite { members, .. } => (members.len() as f64).ln().sqrt(),
    }
}

/// `s log(e n / s)`.
fn sparse_entropy(n: usize, s: usize) -> f64 {
    let (n, s) = (n as f64, s as f64);
    s * (std::f64::consts::E * n / s).ln()
}

/// Unit-constant geometric parameters of a matrix set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixBudget {
    /// `gamma_2^2` in Frobenius norm.
    pub gamma2_sq: f64,
    /// `gamma_1` in operator norm.
    pub gamma1: f64,
    /// `sup Tr(X)` over unit-Frobenius differences.
    pub trace_sup: f64,
    /// `gamma2_sq + gamma1 + trace_sup^2`.
    pub m_budget: f64,
}

pub fn matrix_budget(set: &MatrixSetDescriptor) -> MatrixBudget {
    let (gamma2_sq, gamma1, trace_sup) = match set {
        MatrixSetDescriptor::FullSymmetric { n } => {
            let n = *n as f64;
            (n * n, n * n, n.sqrt())
        }
        MatrixSetDescriptor::LowRank { n, rank } => {
            let rn = (*rank * *n) as f64;
            (rn, rn, (2.0 * *rank as f64).sqrt())
        }
        MatrixSetDescriptor::SparseLowRank { n, rank, s } => {
            let e = *rank as f64 * sparse_entropy(*n, *s);
            (e, e, (2.0 * *rank as f64).sqrt())
        }
        MatrixSetDescriptor::Finite { .. } => {
            let count = match set {
                MatrixSetDescriptor::Finite { members, .. } => members.len().max(2) as f64,
                _ => unreachable!(),
            };
            // Real decoding suffices for traces; complex members are
            // decoded with their own width.
            let diffs = set
                .finite_differences::<f64>()
                .or_else(|_| {
                    set.finite_differences::<crate::Complex64>()
                        .map(|d| d.iter().map(|x| x.map(|z| z.re)).collect())
                })
                .unwrap_or_default();
            let tr = diffs
                .iter()
                .filter(|d| d.norm() > ZERO_NORM)
                .map(|d| trace_re(d) / d.norm())
                .fold(0.0, f64::max);
            (count.ln(), count.ln(), tr)
        }
    };
    MatrixBudget {
        gamma2_sq,
        gamma1,
        trace_sup,
        m_budget: gamma2_sq + gamma1 + trace_sup * trace_sup,
    }
}

/// Whether a cone-sphere sample is a normalized member of the set or a
/// normalized difference of two independent members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Member,
    Difference,
}

fn vector_member<T: Scalar, R: Rng + ?Sized>(
    set: &VectorSetDescriptor,
    members: &[DVector<T>],
    rng: &mut R,
) -> DVector<T> {
    match set {
        VectorSetDescriptor::Full { n } => random_vector(*n, rng),
        VectorSetDescriptor::Sparse { n, s } => {
            let mut v = DVector::zeros(*n);
            for i in index::sample(rng, *n, *s) {
                v[i] = T::standard_normal(rng);
            }
            v
        }
        VectorSetDescriptor::Finite { .. } => members[rng.random_range(0..members.len())].clone(),
    }
}

/// Unit-norm element of `cone(T)` (member mode) or `cone(T - T)`
/// (difference mode).
pub fn sample_vector_direction<T: Scalar, R: Rng + ?Sized>(
    set: &VectorSetDescriptor,
    mode: SampleMode,
    rng: &mut R,
) -> Result<DVector<T>> {
    set.validate()?;
    let members = set.members::<T>()?;
    for _ in 0..MAX_RESAMPLES {
        let mut v = vector_member(set, &members, rng);
        if mode == SampleMode::Difference {
            v -= vector_member(set, &members, rng);
        }
        let norm = v.norm();
        if norm > ZERO_NORM {
            return Ok(v.unscale(norm));
        }
    }
    Err(Error::DegenerateSample(MAX_RESAMPLES))
}

/// Random element of the set (not normalized).
pub fn sample_vector_member<T: Scalar, R: Rng + ?Sized>(
    set: &VectorSetDescriptor,
    rng: &mut R,
) -> Result<DVector<T>> {
    set.validate()?;
    let members = set.members::<T>()?;
    Ok(vector_member(set, &members, rng))
}

fn low_rank_member<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    rank: usize,
    support: Option<&[usize]>,
    rng: &mut R,
) -> DMatrix<T> {
    let mut x = DMatrix::zeros(n, n);
    for _ in 0..rank {
        let w: DVector<T> = match support {
            None => random_vector(n, rng),
            Some(idx) => {
                let mut w = DVector::zeros(n);
                for &i in idx {
                    w[i] = T::standard_normal(rng);
                }
                w
            }
        };
        let lambda: f64 = f64::standard_normal(rng);
        x += (&w * w.adjoint()).scale(lambda);
    }
    x
}

fn matrix_member<T: Scalar, R: Rng + ?Sized>(
    set: &MatrixSetDescriptor,
    members: &[DMatrix<T>],
    rng: &mut R,
) -> DMatrix<T> {
    match set {
        MatrixSetDescriptor::FullSymmetric { n } => {
            let g = DMatrix::from_fn(*n, *n, |_, _| T::standard_normal(rng));
            hermitian_part(&g)
        }
        MatrixSetDescriptor::LowRank { n, rank } => low_rank_member(*n, *rank, None, rng),
        MatrixSetDescriptor::SparseLowRank { n, rank, s } => {
            let support = index::sample(rng, *n, *s).into_vec();
            low_rank_member(*n, *rank, Some(&support), rng)
        }
        MatrixSetDescriptor::Finite { .. } => members[rng.random_range(0..members.len())].clone(),
    }
}

/// Unit-Frobenius element of `cone(M)` or `cone(M - M)`.
pub fn sample_matrix_direction<T: Scalar, R: Rng + ?Sized>(
    set: &MatrixSetDescriptor,
    mode: SampleMode,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    set.validate()?;
    let members = set.members::<T>()?;
    for _ in 0..MAX_RESAMPLES {
        let mut x = matrix_member(set, &members, rng);
        if mode == SampleMode::Difference {
            x -= matrix_member(set, &members, rng);
        }
        let norm = x.norm();
        if norm > ZERO_NORM {
            return Ok(x.unscale(norm));
        }
    }
    Err(Error::DegenerateSample(MAX_RESAMPLES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use nalgebra::dvector;
    use num_complex::Complex64;

    #[test]
    fn distance_examples() {
        let e1 = dvector![1.0, 0.0];
        let e2 = dvector![0.0, 1.0];
        assert_eq!(dist_d1(&e1, &e1).unwrap(), 0.0);
        assert_eq!(dist_d1(&e1, &(-&e1)).unwrap(), 0.0);
        assert!((dist_d2(&e1, &e2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(dist_d2(&e1, &e1).unwrap(), 0.0);
        assert!(matches!(
            dist_d1(&e1, &dvector![1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let c1 = e1.map(|x| Complex64::new(x, 0.0));
        let c2 = e2.map(|x| Complex64::new(x, 0.0));
        let (d, c) = dist_d1_aligned(&c1, &c2).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn complex_d1_brute_force() {
        // Oracle: minimize over a fine grid of unimodular c.
        let mut rng = stream(5, 0);
        for _ in 0..20 {
            let u: DVector<Complex64> = random_vector(4, &mut rng);
            let v: DVector<Complex64> = random_vector(4, &mut rng);
            let grid = (0..20_000)
                .map(|k| {
                    let c = Complex64::from_polar(1.0, k as f64 * std::f64::consts::TAU / 20_000.0);
                    (&u - &v * c).norm()
                })
                .fold(f64::INFINITY, f64::min);
            let d = dist_d1(&u, &v).unwrap();
            assert!(d <= grid + 1e-12);
            assert!(grid - d < 1e-6);
            let closed = (u.norm_squared() + v.norm_squared() - 2.0 * v.dotc(&u).norm()).sqrt();
            assert!((d - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn sparse_projection_example() {
        let set = VectorSetDescriptor::Sparse { n: 4, s: 2 };
        let p = project(&set, &dvector![3.0, 1.0, -2.0, 0.0]).unwrap();
        assert_eq!(p, dvector![3.0, 0.0, -2.0, 0.0]);
        let full = VectorSetDescriptor::Full { n: 3 };
        let x = dvector![1.0, -2.0, 5.0];
        assert_eq!(project(&full, &x).unwrap(), x);
        // ties go to the lower index
        let tie = project(&VectorSetDescriptor::Sparse { n: 3, s: 1 }, &dvector![1.0, -1.0, 1.0]).unwrap();
        assert_eq!(tie, dvector![1.0, 0.0, 0.0]);
    }

    #[test]
    fn finite_projection_example() {
        let set = VectorSetDescriptor::Finite {
            n: 3,
            members: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        };
        let x = dvector![0.9, 0.1, 0.05];
        // d1 to e1 is |(-0.1, 0.1, 0.05)|, to e2 is |(0.9, -0.9, 0.05)|.
        assert_eq!(project(&set, &x).unwrap(), dvector![1.0, 0.0, 0.0]);
        let neg = dvector![-0.1, -0.9, 0.0];
        assert_eq!(project(&set, &neg).unwrap(), dvector![0.0, 1.0, 0.0]);
        let dup = VectorSetDescriptor::Finite {
            n: 1,
            members: vec![vec![1.0], vec![-1.0]],
        };
        let members = dup.members::<f64>().unwrap();
        assert_eq!(nearest_member(&members, &dvector![1.0]).unwrap(), 0);
        assert_eq!(nearest_member(&members, &dvector![-1.0]).unwrap(), 0);
    }

    #[test]
    fn low_rank_projection_examples() {
        let set = MatrixSetDescriptor::LowRank { n: 2, rank: 1 };
        let x = DMatrix::from_diagonal(&dvector![3.0, 1.0]);
        let p = project_matrix(&set, &x).unwrap();
        assert!((p - DMatrix::from_diagonal(&dvector![3.0, 0.0])).norm() < 1e-12);

        let mut rng = stream(1, 0);
        let set = MatrixSetDescriptor::LowRank { n: 6, rank: 2 };
        let y: DMatrix<Complex64> = sample_matrix_direction(&set, SampleMode::Member, &mut rng).unwrap();
        let p = project_matrix(&set, &y).unwrap();
        assert!((p - &y).norm() < 1e-10);
    }

    #[test]
    fn sparse_low_rank_fixed_point() {
        let u = dvector![2.0, 1.0, 0.0, 0.0];
        let x = &u * u.transpose();
        let set = MatrixSetDescriptor::SparseLowRank { n: 4, rank: 1, s: 2 };
        let p = project_matrix(&set, &x).unwrap();
        assert!((p - &x).norm() < 1e-10);

        // Oracle: over all 2-supports, the best rank-1 approximation of the
        // restricted matrix; x itself attains zero error on support {0,1}.
        let mut best = f64::INFINITY;
        for a in 0..4 {
            for b in a + 1..4 {
                let r = DMatrix::from_fn(4, 4, |i, j| {
                    if (i == a || i == b) && (j == a || j == b) {
                        x[(i, j)]
                    } else {
                        0.0
                    }
                });
                best = best.min((truncate_rank(&r, 1).unwrap() - &x).norm());
            }
        }
        assert!(best < 1e-12);
    }

    #[test]
    fn sparse_low_rank_output_is_feasible() {
        let mut rng = stream(2, 0);
        let set = MatrixSetDescriptor::SparseLowRank { n: 8, rank: 2, s: 3 };
        let x: DMatrix<f64> =
            sample_matrix_direction(&MatrixSetDescriptor::FullSymmetric { n: 8 }, SampleMode::Member, &mut rng)
                .unwrap();
        let p = project_matrix(&set, &x).unwrap();
        let nonzero_rows = p.row_iter().filter(|r| r.norm() > 1e-12).count();
        assert!(nonzero_rows <= 3);
        let eig = crate::linalg::eigh(&p).unwrap();
        assert!(eig.eigenvalues.iter().filter(|l| l.abs() > 1e-10).count() <= 2);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(gamma2_budget(&VectorSetDescriptor::Full { n: 64 }), 8.0);
        let g = gamma2_budget(&VectorSetDescriptor::Sparse { n: 128, s: 4 });
        assert!((g - (4.0 * (128.0 * std::f64::consts::E / 4.0).ln()).sqrt()).abs() < 1e-12);
        assert!((g - 4.226).abs() < 1e-3);
        let finite = VectorSetDescriptor::Finite {
            n: 1,
            members: (0..16).map(|i| vec![i as f64]).collect(),
        };
        assert!((gamma2_budget(&finite) - 1.665).abs() < 1e-3);

        let b = matrix_budget(&MatrixSetDescriptor::LowRank { n: 64, rank: 2 });
        assert_eq!((b.gamma2_sq, b.gamma1), (128.0, 128.0));
        assert!((b.trace_sup - 2.0).abs() < 1e-15);
        assert!((b.m_budget - 260.0).abs() < 1e-12);
        let s = matrix_budget(&MatrixSetDescriptor::SparseLowRank { n: 128, rank: 1, s: 4 });
        assert!((s.gamma2_sq - 17.86).abs() < 0.01);
    }

    #[test]
    fn budgets_are_monotone() {
        let mut last = 0.0;
        for n in 1..50 {
            let g = gamma2_budget(&VectorSetDescriptor::Full { n });
            assert!(g > last);
            last = g;
        }
        for s in 1..20 {
            let a = gamma2_budget(&VectorSetDescriptor::Sparse { n: 64, s });
            let b = gamma2_budget(&VectorSetDescriptor::Sparse { n: 64, s: s + 1 });
            let c = gamma2_budget(&VectorSetDescriptor::Sparse { n: 65, s });
            assert!(b > a && c > a);
        }
    }

    #[test]
    fn samplers_land_on_the_sphere_and_in_the_set() {
        let mut rng = stream(3, 0);
        let v: DVector<f64> =
            sample_vector_direction(&VectorSetDescriptor::Full { n: 7 }, SampleMode::Member, &mut rng).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        let sparse = VectorSetDescriptor::Sparse { n: 20, s: 3 };
        for _ in 0..20 {
            let v: DVector<Complex64> = sample_vector_direction(&sparse, SampleMode::Member, &mut rng).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!(v.iter().filter(|z| z.norm() > 0.0).count() <= 3);
        }
        let lr = MatrixSetDescriptor::LowRank { n: 6, rank: 1 };
        for _ in 0..20 {
            let x: DMatrix<f64> = sample_matrix_direction(&lr, SampleMode::Difference, &mut rng).unwrap();
            assert!((x.norm() - 1.0).abs() < 1e-12);
            assert!(crate::linalg::asymmetry(&x) < 1e-14);
            let eig = crate::linalg::eigh(&x).unwrap();
            assert!(eig.eigenvalues.iter().filter(|l| l.abs() > 1e-10).count() <= 2);
        }
        let single = VectorSetDescriptor::Finite {
            n: 2,
            members: vec![vec![1.0, 0.0]],
        };
        assert!(matches!(
            sample_vector_direction::<f64, _>(&single, SampleMode::Difference, &mut rng),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn descriptor_json() {
        let d: VectorSetDescriptor = serde_json::from_str(r#"{"kind":"sparse","n":128,"s":4}"#).unwrap();
        assert_eq!(d, VectorSetDescriptor::Sparse { n: 128, s: 4 });
        let m: MatrixSetDescriptor = serde_json::from_str(r#"{"kind":"low_rank","n":32,"rank":1}"#).unwrap();
        assert_eq!(m, MatrixSetDescriptor::LowRank { n: 32, rank: 1 });
        let f = serde_json::to_value(MatrixSetDescriptor::Finite { n: 1, members: vec![vec![1.0]] }).unwrap();
        assert_eq!(f["kind"], "finite_matrix");
        assert!(VectorSetDescriptor::Sparse { n: 3, s: 4 }.validate().is_err());
        assert!(MatrixSetDescriptor::LowRank { n: 3, rank: 0 }.validate().is_err());
    }
}
