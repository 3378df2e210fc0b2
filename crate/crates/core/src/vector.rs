//! Dense real vectors and the angle between them.

use std::f64::consts::PI;
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as the origin, where the angle (and the
/// population-loss gradient) is undefined.
pub const EPS_NORM: f64 = 1e-12;

/// A dense vector with a fixed length and finite entries.
///
/// Arithmetic between vectors of different lengths is a programming error and
/// panics; constructors validate external input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { index, value });
        }
        Ok(Self(entries))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self(vec![0.0; d])
    }

    /// Wraps entries produced by internal arithmetic. Callers that may have
    /// produced NaN/Inf should check [`RealVector::is_finite`].
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self(self.0.iter().copied().map(f).collect())
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "axpy: length mismatch");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + c * b).collect())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "distance: length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn ensure_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { expected, got: self.len() })
        }
    }

    pub fn ensure_nondegenerate(&self) -> Result<f64> {
        let norm = self.norm();
        if norm < EPS_NORM {
            Err(Error::DegenerateVector { norm })
        } else {
            Ok(norm)
        }
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

impl Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &RealVector {
    type Output = RealVector;

    fn add(self, rhs: &RealVector) -> RealVector {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &RealVector {
    type Output = RealVector;

    fn sub(self, rhs: &RealVector) -> RealVector {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&RealVector> for f64 {
    type Output = RealVector;

    fn mul(self, rhs: &RealVector) -> RealVector {
        rhs.scale(self)
    }
}

impl Neg for &RealVector {
    type Output = RealVector;

    fn neg(self) -> RealVector {
        self.scale(-1.0)
    }
}

/// Angle between `u` and `v` in `[0, π]`.
pub fn angle(u: &RealVector, v: &RealVector) -> Result<f64> {
    v.ensure_len(u.len())?;
    let nu = u.ensure_nondegenerate()?;
    let nv = v.ensure_nondegenerate()?;
    let cos = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    let theta = cos.acos();
    debug_assert!((0.0..=PI).contains(&theta));
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> RealVector {
        RealVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn angle_basic_cases() {
        assert!((angle(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!(angle(&v(&[1.0, 0.0]), &v(&[2.0, 0.0])).unwrap(), 0.0);
        assert_eq!(angle(&v(&[1.0, 0.0]), &v(&[-3.0, 0.0])).unwrap(), PI);
    }

    #[test]
    fn angle_rejects_origin() {
        let err = angle(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateVector { .. }));
        assert!(angle(&v(&[1.0, 0.0]), &v(&[1e-13, 0.0])).is_err());
    }

    #[test]
    fn angle_rejects_length_mismatch() {
        let err = angle(&v(&[1.0, 0.0]), &v(&[1.0])).unwrap_err();
        assert_eq!(err, Error::ShapeMismatch { expected: 2, got: 1 });
    }

    #[test]
    fn constructor_validates() {
        assert_eq!(RealVector::new(vec![]).unwrap_err(), Error::EmptyVector);
        assert!(matches!(
            RealVector::new(vec![1.0, f64::NAN]).unwrap_err(),
            Error::NonFiniteEntry { index: 1, .. }
        ));
        let parsed: std::result::Result<RealVector, _> = serde_json::from_str("[1.0, 2.0]");
        assert_eq!(parsed.unwrap(), v(&[1.0, 2.0]));
        let empty: std::result::Result<RealVector, _> = serde_json::from_str("[]");
        assert!(empty.is_err());
    }

    #[test]
    fn near_parallel_does_not_nan() {
        let a = v(&[1.0, 1e-9, 3.0]);
        let b = a.scale(7.0);
        let t = angle(&a, &b).unwrap();
        assert!(t.is_finite() && t >= 0.0);
    }

    fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn angle_symmetric_and_scale_invariant((a, b) in vec_strategy(), c in 0.01f64..100.0) {
            let a = v(&a);
            let b = v(&b);
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let ab = angle(&a, &b).unwrap();
            prop_assert_eq!(ab, angle(&b, &a).unwrap());
            prop_assert!((angle(&a.scale(c), &b).unwrap() - ab).abs() < 1e-7);
            prop_assert!((0.0..=PI).contains(&ab));
        }
    }
}
