//! Real / complex scalar abstraction.
//!
//! Complex data crosses the crate boundary as interleaved `(re, im)` pairs of
//! `f64`; inner products are conjugate-linear in the first argument, so
//! `<phi, x> = phi^* x`.

use std::fmt::Debug;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldTag {
    Real,
    Complex,
}

impl FieldTag {
    /// Number of `f64` values per scalar in interleaved form.
    pub fn width(self) -> usize {
        match self {
            FieldTag::Real => 1,
            FieldTag::Complex => 2,
        }
    }
}

pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + Debug + 'static {
    const FIELD: FieldTag;

    /// Builds a scalar; the imaginary part is dropped for real scalars.
    fn from_parts(re: f64, im: f64) -> Self;

    fn parts(self) -> (f64, f64);

    /// Unit-modulus phase with `phase(0) = 1`.
    fn phase(self) -> Self {
        let m = self.modulus();
        if m == 0.0 {
            Self::one()
        } else {
            self.unscale(m)
        }
    }

    /// Standard normal in this field: `N(0,1)` for reals, real and imaginary
    /// parts `N(0, 1/2)` for complex, so that `E|z|^2 = 1` either way.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const FIELD: FieldTag = FieldTag::Real;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for Complex64 {
    const FIELD: FieldTag = FieldTag::Complex;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Decodes an interleaved slice into a vector of `T`.
pub fn vector_from_interleaved<T: Scalar>(data: &[f64]) -> Result<DVector<T>> {
    let w = T::FIELD.width();
    if data.len() % w != 0 {
        return Err(Error::DimensionMismatch {
            expected: data.len() + w - data.len() % w,
            found: data.len(),
        });
    }
    Ok(DVector::from_iterator(
        data.len() / w,
        data.chunks(w).map(|c| T::from_parts(c[0], if w == 2 { c[1] } else { 0.0 })),
    ))
}

pub fn vector_to_interleaved<T: Scalar>(v: &DVector<T>) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() * T::FIELD.width());
    for z in v.iter() {
        let (re, im) = z.parts();
        out.push(re);
        if T::FIELD == FieldTag::Complex {
            out.push(im);
        }
    }
    out
}

/// Decodes a row-major interleaved `n x n` matrix.
pub fn matrix_from_interleaved<T: Scalar>(n: usize, data: &[f64]) -> Result<DMatrix<T>> {
    let expected = n * n * T::FIELD.width();
    if data.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: data.len(),
        });
    }
    let v = vector_from_interleaved::<T>(data)?;
    Ok(DMatrix::from_row_slice(n, n, v.as_slice()))
}

pub fn matrix_to_interleaved<T: Scalar>(m: &DMatrix<T>) -> Vec<f64> {
    let row_major = DVector::from_iterator(m.len(), m.transpose().iter().copied());
    vector_to_interleaved(&row_major)
}

pub fn random_vector<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<T> {
    DVector::from_fn(n, |_, _| T::standard_normal(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_of_zero_is_one() {
        assert_eq!(0.0f64.phase(), 1.0);
        assert_eq!(Complex64::new(0.0, 0.0).phase(), Complex64::new(1.0, 0.0));
        assert_eq!((-3.0f64).phase(), -1.0);
        let p = Complex64::new(0.0, 2.0).phase();
        assert!((p - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn interleaved_round_trip() {
        let data = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let m = matrix_from_interleaved::<Complex64>(2, &data).unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(3.0, 4.0));
        assert_eq!(m[(1, 0)], Complex64::new(5.0, 6.0));
        assert_eq!(matrix_to_interleaved(&m), data.to_vec());
        assert!(vector_from_interleaved::<Complex64>(&data[..3]).is_err());
        assert!(matrix_from_interleaved::<f64>(3, &data).is_err());
    }
}
