//! Subgaussian measurement ensembles and the measurement operators built on
//! them: amplitude `|<phi_k, x>|`, intensity `|<phi_k, x>|^2`, the signed
//! rank-one map `phi_k^* X phi_k`, and the normalized lifting operator
//! `(1/m) |phi_k^* X phi_k|^p`.

use std::io::{self, Read, Write};

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::FieldTag;
use crate::linalg::check_hermitian;
use crate::rng::stream;
use crate::stats::mean_se;
use crate::{Error, Result, Scalar};

/// Reject entry laws whose fourth moment is not strictly above one; for
/// such laws (Rademacher being the canonical case) `e_1` and `e_2` are
/// indistinguishable from phaseless data.
pub const FOURTH_MOMENT_MARGIN: f64 = 1e-6;

const MAGIC: &[u8; 4] = b"PLAB";
const FORMAT_VERSION: u32 = 1;

/// Law of a single real coordinate (complex entries use two independent
/// copies scaled by `1/sqrt 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    UniformSymmetric,
    /// Finite law; centered and rescaled to unit variance on validation.
    DiscreteSymmetric { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub field: FieldTag,
    pub n: usize,
    pub m: usize,
    pub dist: Distribution,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn gaussian(field: FieldTag, n: usize, m: usize, seed: u64) -> Self {
        EnsembleSpec {
            field,
            n,
            m,
            dist: Distribution::Gaussian,
            seed,
        }
    }

    pub fn with_m(&self, m: usize) -> Self {
        EnsembleSpec { m, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        EnsembleSpec { seed, ..self.clone() }
    }

    /// Validates the spec and returns a normalized entry sampler.
    pub fn sampler(&self) -> Result<EntrySampler> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidDistribution(format!(
                "n and m must be positive (n = {}, m = {})",
                self.n, self.m
            )));
        }
        let law = match &self.dist {
            Distribution::Gaussian => EntryLaw::Gaussian,
            Distribution::UniformSymmetric => EntryLaw::Uniform,
            Distribution::DiscreteSymmetric { values, probs } => discrete_law(values, probs)?,
        };
        let sampler = EntrySampler {
            law,
            field: self.field,
        };
        let fourth = sampler.fourth_moment();
        if fourth <= 1.0 + FOURTH_MOMENT_MARGIN {
            return Err(Error::InvalidDistribution(format!(
                "entry fourth moment {fourth} must exceed 1 (Rademacher-type laws cannot separate e_1 from e_2)"
            )));
        }
        Ok(sampler)
    }
}

fn discrete_law(values: &[f64], probs: &[f64]) -> Result<EntryLaw> {
    if values.is_empty() || values.len() != probs.len() {
        return Err(Error::InvalidDistribution(
            "discrete law needs equally many values and probabilities".into(),
        ));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution("non-finite or negative entries".into()));
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("probabilities sum to zero".into()));
    }
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
    let var: f64 = values.iter().zip(&probs).map(|(v, p)| (v - mean).powi(2) * p).sum();
    if !(var > 1e-300) {
        return Err(Error::InvalidDistribution("discrete law has zero variance".into()));
    }
    let sd = var.sqrt();
    let values: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
    let check: f64 = values.iter().zip(&probs).map(|(v, p)| v * v * p).sum();
    if (check - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "variance after normalization is {check}"
        )));
    }
    let index = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    Ok(EntryLaw::Discrete {
        values,
        probs,
        index,
    })
}

#[derive(Debug, Clone)]
enum EntryLaw {
    Gaussian,
    Uniform,
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
        index: WeightedIndex<f64>,
    },
}

/// Draws mean-zero, unit-variance entries for one field.
#[derive(Debug, Clone)]
pub struct EntrySampler {
    law: EntryLaw,
    field: FieldTag,
}

impl EntrySampler {
    fn real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            EntryLaw::Gaussian => rng.sample(StandardNormal),
            EntryLaw::Uniform => 3f64.sqrt() * rng.random_range(-1.0..=1.0),
            EntryLaw::Discrete { values, index, .. } => values[rng.sample(index)],
        }
    }

    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self.field {
            FieldTag::Real => T::from_parts(self.real(rng), 0.0),
            FieldTag::Complex => {
                let re = self.real(rng) * std::f64::consts::FRAC_1_SQRT_2;
                let im = self.real(rng) * std::f64::consts::FRAC_1_SQRT_2;
                T::from_parts(re, im)
            }
        }
    }

    /// Population fourth moment `E x^4` of one real coordinate.
    pub fn real_fourth_moment(&self) -> f64 {
        match &self.law {
            EntryLaw::Gaussian => 3.0,
            EntryLaw::Uniform => 9.0 / 5.0,
            EntryLaw::Discrete { values, probs, .. } => {
                values.iter().zip(probs).map(|(v, p)| v.powi(4) * p).sum()
            }
        }
    }

    /// Population `E|phi_i|^4` in this field. For complex entries
    /// `(a + ib)/sqrt 2` it is `(E a^4 + 1) / 2`.
    pub fn fourth_moment(&self) -> f64 {
        let mu4 = self.real_fourth_moment();
        match self.field {
            FieldTag::Real => mu4,
            FieldTag::Complex => (mu4 + 1.0) / 2.0,
        }
    }
}

/// `m` measurement vectors `phi_k` in `F^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix<T: Scalar> {
    spec: Option<EnsembleSpec>,
    /// Row `k` holds `conj(phi_k)`, so `conj_rows * x` is `(<phi_k, x>)_k`.
    conj_rows: DMatrix<T>,
}

/// Draws `spec.m` i.i.d. rows. Row `k` comes from stream `k` of
/// `spec.seed`, so the result does not depend on the thread count.
pub fn sample_ensemble<T: Scalar>(spec: &EnsembleSpec) -> Result<MeasurementMatrix<T>> {
    if spec.field != T::FIELD {
        return Err(Error::FieldMismatch {
            ensemble: spec.field,
            requested: T::FIELD,
        });
    }
    let sampler = spec.sampler()?;
    let n = spec.n;
    let rows: Vec<Vec<T>> = (0..spec.m)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(spec.seed, k as u64);
            (0..n).map(|_| sampler.sample::<T, _>(&mut rng).conjugate()).collect()
        })
        .collect();
    let conj_rows = DMatrix::from_row_iterator(spec.m, n, rows.into_iter().flatten());
    Ok(MeasurementMatrix {
        spec: Some(spec.clone()),
        conj_rows,
    })
}

impl<T: Scalar> MeasurementMatrix<T> {
    /// Builds an ensemble from explicit rows `phi_k` (one per row of `rows`).
    pub fn from_rows(rows: &DMatrix<T>) -> Self {
        MeasurementMatrix {
            spec: None,
            conj_rows: rows.map(|z| z.conjugate()),
        }
    }

    pub fn spec(&self) -> Option<&EnsembleSpec> {
        self.spec.as_ref()
    }

    pub fn m(&self) -> usize {
        self.conj_rows.nrows()
    }

    pub fn n(&self) -> usize {
        self.conj_rows.ncols()
    }

    /// `phi_k`.
    pub fn row(&self, k: usize) -> DVector<T> {
        self.conj_rows.row(k).transpose().map(|z| z.conjugate())
    }

    /// Matrix whose row `k` is `conj(phi_k)`.
    pub fn conj_rows(&self) -> &DMatrix<T> {
        &self.conj_rows
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    /// `(<phi_k, x>)_k`.
    pub fn inner(&self, x: &DVector<T>) -> Result<DVector<T>> {
        self.check_dim(x.len())?;
        Ok(&self.conj_rows * x)
    }

    pub fn amplitude(&self, x: &DVector<T>) -> Result<Vec<f64>> {
        Ok(self.inner(x)?.iter().map(|z| z.modulus()).collect())
    }

    pub fn intensity(&self, x: &DVector<T>) -> Result<Vec<f64>> {
        Ok(self.inner(x)?.iter().map(|z| z.modulus_squared()).collect())
    }

    /// Amplitude (`ell = 1`) or intensity (`ell = 2`) measurements.
    pub fn phaseless(&self, ell: u8, x: &DVector<T>) -> Result<Vec<f64>> {
        match ell {
            1 => self.amplitude(x),
            2 => self.intensity(x),
            _ => Err(Error::Config(format!("ell must be 1 or 2, got {ell}"))),
        }
    }

    /// `(phi_k^* X phi_k)_k` without the Hermitian check; callers guarantee it.
    pub(crate) fn rank_one_unchecked(&self, x: &DMatrix<T>) -> Vec<f64> {
        let p = &self.conj_rows * x;
        p.row_iter()
            .zip(self.conj_rows.row_iter())
            .map(|(pr, cr)| pr.iter().zip(cr.iter()).map(|(a, c)| (*a * c.conjugate()).real()).sum())
            .collect()
    }

    /// Signed rank-one measurements `<phi_k phi_k^*, X> = phi_k^* X phi_k`.
    pub fn rank_one(&self, x: &DMatrix<T>) -> Result<Vec<f64>> {
        self.check_dim(x.nrows())?;
        check_hermitian(x)?;
        Ok(self.rank_one_unchecked(x))
    }

    /// Lifting operator `B^p(X) = (1/m) (|<phi_k phi_k^*, X>|^p)_k`.
    pub fn lifting(&self, x: &DMatrix<T>, p: f64) -> Result<Vec<f64>> {
        if !(0.5..=1.0).contains(&p) {
            return Err(Error::InvalidExponent(p));
        }
        let m = self.m() as f64;
        Ok(self.rank_one(x)?.into_iter().map(|v| v.abs().powf(p) / m).collect())
    }

    /// `sum_k w_k phi_k phi_k^*`.
    pub fn weighted_gram(&self, weights: &[f64]) -> DMatrix<T> {
        debug_assert_eq!(weights.len(), self.m());
        let mut scaled = self.conj_rows.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(weights) {
            row *= T::from_real(*w);
        }
        self.conj_rows.adjoint() * scaled
    }

    /// `sum_k c_k phi_k` for complex coefficients `c`.
    pub(crate) fn combine_rows(&self, coeffs: &DVector<T>) -> DVector<T> {
        self.conj_rows.adjoint() * coeffs
    }

    /// Writes the 32-byte header followed by `phi_k` row-major as
    /// little-endian `f64` (complex entries as `re, im`).
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = [0u8; 32];
        header[..4].copy_from_slice(MAGIC);
        header[4..8].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        let field: u32 = match T::FIELD {
            FieldTag::Real => 0,
            FieldTag::Complex => 1,
        };
        header[8..12].copy_from_slice(&field.to_le_bytes());
        header[12..20].copy_from_slice(&(self.n() as u64).to_le_bytes());
        header[20..28].copy_from_slice(&(self.m() as u64).to_le_bytes());
        w.write_all(&header)?;
        for k in 0..self.m() {
            for z in self.conj_rows.row(k).iter() {
                let (re, im) = z.conjugate().parts();
                w.write_all(&re.to_le_bytes())?;
                if T::FIELD == FieldTag::Complex {
                    w.write_all(&im.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut header = [0u8; 32];
        r.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad("unsupported version"));
        }
        let field = match u32::from_le_bytes(header[8..12].try_into().unwrap()) {
            0 => FieldTag::Real,
            1 => FieldTag::Complex,
            _ => return Err(bad("unknown field tag")),
        };
        if field != T::FIELD {
            return Err(bad("field does not match requested scalar type"));
        }
        let n = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
        let m = u64::from_le_bytes(header[20..28].try_into().unwrap()) as usize;
        let mut buf = [0u8; 8];
        let mut next = || -> io::Result<f64> {
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        let mut data = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let re = next()?;
            let im = if field == FieldTag::Complex { next()? } else { 0.0 };
            data.push(T::from_parts(re, im));
        }
        Ok(Self::from_rows(&DMatrix::from_row_slice(m, n, &data)))
    }
}

/// Empirical entry moments with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub trials: usize,
    pub mean_re: f64,
    pub mean_im: f64,
    pub mean_se: f64,
    /// `E|phi|^2`.
    pub variance: f64,
    pub variance_se: f64,
    /// `E|phi|^4`.
    pub fourth_moment: f64,
    pub fourth_moment_se: f64,
    /// `|E phi^2|`; zero in expectation for admissible complex laws.
    pub pseudo_variance: f64,
    /// `max_{q in {2,4,6,8}} (E|phi|^q)^{1/q} / sqrt q`, a moment-based
    /// stand-in for the `psi_2` norm.
    pub psi2_proxy: f64,
}

/// Samples `trials` entries of `spec`'s law and reports their moments.
pub fn estimate_moments(spec: &EnsembleSpec, trials: usize) -> Result<MomentReport> {
    if trials < 1000 {
        return Err(Error::Config(format!("need at least 1000 trials, got {trials}")));
    }
    let sampler = spec.sampler()?;
    // Dedicated stream, disjoint from the row streams of sample_ensemble.
    let mut rng = stream(spec.seed, u64::MAX);
    let draws: Vec<Complex64> = (0..trials).map(|_| sampler.sample::<Complex64, _>(&mut rng)).collect();
    let abs2: Vec<f64> = draws.iter().map(|z| z.norm_sqr()).collect();
    let abs4: Vec<f64> = abs2.iter().map(|a| a * a).collect();
    let (mean_re, se_re) = mean_se(&draws.iter().map(|z| z.re).collect::<Vec<_>>());
    let (mean_im, se_im) = mean_se(&draws.iter().map(|z| z.im).collect::<Vec<_>>());
    let (variance, variance_se) = mean_se(&abs2);
    let (fourth_moment, fourth_moment_se) = mean_se(&abs4);
    let pseudo: Complex64 = draws.iter().map(|z| z * z).sum::<Complex64>() / trials as f64;
    let psi2_proxy = [2.0f64, 4.0, 6.0, 8.0]
        .iter()
        .map(|&q| {
            let m = abs2.iter().map(|a| a.powf(q / 2.0)).sum::<f64>() / trials as f64;
            m.powf(1.0 / q) / q.sqrt()
        })
        .fold(0.0, f64::max);
    Ok(MomentReport {
        trials,
        mean_re,
        mean_im,
        mean_se: se_re.hypot(se_im),
        variance,
        variance_se,
        fourth_moment,
        fourth_moment_se,
        pseudo_variance: pseudo.norm(),
        psi2_proxy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn discrete(values: Vec<f64>, probs: Vec<f64>) -> EnsembleSpec {
        EnsembleSpec {
            field: FieldTag::Real,
            n: 4,
            m: 8,
            dist: Distribution::DiscreteSymmetric { values, probs },
            seed: 1,
        }
    }

    #[test]
    fn rademacher_is_rejected() {
        let spec = discrete(vec![-1.0, 1.0], vec![0.5, 0.5]);
        assert!(matches!(spec.sampler(), Err(Error::InvalidDistribution(_))));
        let complex = EnsembleSpec {
            field: FieldTag::Complex,
            ..spec
        };
        assert!(complex.sampler().is_err());
    }

    #[test]
    fn discrete_law_is_normalized() {
        // {-2, 0, 2} with P(0) = 1/2 has variance 2 and, once rescaled,
        // fourth moment 2.
        let spec = discrete(vec![-2.0, 0.0, 2.0], vec![1.0, 2.0, 1.0]);
        let s = spec.sampler().unwrap();
        assert!((s.real_fourth_moment() - 2.0).abs() < 1e-12);
        assert!(discrete(vec![1.0, 1.0], vec![0.5, 0.5]).sampler().is_err());
        assert!(discrete(vec![1.0], vec![0.5, 0.5]).sampler().is_err());
        assert!(discrete(vec![1.0, -1.0], vec![-0.5, 1.5]).sampler().is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_field_checked() {
        let spec = EnsembleSpec::gaussian(FieldTag::Complex, 5, 7, 42);
        let a = sample_ensemble::<Complex64>(&spec).unwrap();
        let b = sample_ensemble::<Complex64>(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.m(), a.n()), (7, 5));
        assert!(matches!(sample_ensemble::<f64>(&spec), Err(Error::FieldMismatch { .. })));
        let c = sample_ensemble::<Complex64>(&spec.with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identity_rows() {
        let phi = MeasurementMatrix::from_rows(&DMatrix::<f64>::identity(3, 3));
        assert_eq!(phi.amplitude(&dvector![1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(phi.amplitude(&DVector::zeros(3)).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            phi.amplitude(&DVector::zeros(2)),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
        let x = DMatrix::<f64>::identity(3, 3);
        assert_eq!(phi.rank_one(&x).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn operator_relations_on_random_ensemble() {
        let spec = EnsembleSpec::gaussian(FieldTag::Complex, 6, 20, 3);
        let phi = sample_ensemble::<Complex64>(&spec).unwrap();
        let mut rng = stream(9, 0);
        let x: DVector<Complex64> = crate::field::random_vector(6, &mut rng);
        let amp = phi.amplitude(&x).unwrap();
        let int = phi.intensity(&x).unwrap();
        for (a, i) in amp.iter().zip(&int) {
            assert!((a * a - i).abs() <= 1e-12 * i.max(1.0));
        }
        let rot = x.map(|z| z * Complex64::from_polar(1.0, 0.7));
        for (a, b) in phi.intensity(&rot).unwrap().iter().zip(&int) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        let scaled = phi.intensity(&(&x * Complex64::new(3.0, 0.0))).unwrap();
        for (a, b) in scaled.iter().zip(&int) {
            assert!((a - 9.0 * b).abs() <= 1e-11 * a.max(1.0));
        }
        let xx = &x * x.adjoint();
        let r1 = phi.rank_one(&xx).unwrap();
        for (a, b) in r1.iter().zip(&int) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        let neg = phi.rank_one(&(-&xx)).unwrap();
        for (a, b) in neg.iter().zip(&r1) {
            assert_eq!(*a, -*b);
        }
        let eye = phi.rank_one(&DMatrix::identity(6, 6)).unwrap();
        for (k, e) in eye.iter().enumerate() {
            assert!((e - phi.row(k).norm_squared()).abs() < 1e-12);
        }
    }

    #[test]
    fn lifting_validation() {
        let phi = MeasurementMatrix::from_rows(&DMatrix::<f64>::identity(2, 2));
        let x = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(phi.lifting(&x, 0.4), Err(Error::InvalidExponent(_))));
        assert!(matches!(phi.lifting(&x, 1.1), Err(Error::InvalidExponent(_))));
        let mut asym = x.clone();
        asym[(0, 1)] = 1.0;
        assert!(matches!(phi.lifting(&asym, 1.0), Err(Error::NotSymmetric(_))));
        assert_eq!(phi.lifting(&DMatrix::zeros(2, 2), 0.5).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn binary_round_trip_and_header() {
        let spec = EnsembleSpec::gaussian(FieldTag::Complex, 3, 4, 11);
        let phi = sample_ensemble::<Complex64>(&spec).unwrap();
        let mut bytes = Vec::new();
        phi.write_binary(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 4 * 3 * 16);
        assert_eq!(&bytes[..4], b"PLAB");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 4);
        let first_re = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        assert_eq!(first_re, phi.row(0)[0].re);
        let back = MeasurementMatrix::<Complex64>::read_binary(&bytes[..]).unwrap();
        assert_eq!(back.conj_rows(), phi.conj_rows());
        assert!(MeasurementMatrix::<f64>::read_binary(&bytes[..]).is_err());
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(MeasurementMatrix::<Complex64>::read_binary(&corrupt[..]).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = EnsembleSpec::gaussian(FieldTag::Real, 4, 8, 5);
        let v: serde_json::Value = serde_json::to_value(&spec).unwrap();
        assert_eq!(v["field"], "real");
        assert_eq!(v["dist"]["kind"], "gaussian");
        let text = r#"{"field":"complex","n":3,"m":9,"seed":1,
            "dist":{"kind":"discrete_symmetric","values":[-1,0,1],"probs":[1,1,1]}}"#;
        let parsed: EnsembleSpec = serde_json::from_str(text).unwrap();
        assert_eq!(parsed.m, 9);
        assert!(parsed.sampler().is_ok());
    }
}
