use std::ops::{Deref, DerefMut};

/// Dense parameter or gradient vector in `R^p`.
///
/// Every reduction walks coordinates left to right so that results are
/// bit-reproducible across runs and platforms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelVector(Vec<f64>);

impl ModelVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(self.dim(), other.len());
        self.0.iter().zip(other).fold(0.0, |acc, (a, b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc + v * v)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist_sq(&self, other: &[f64]) -> f64 {
        debug_assert_eq!(self.dim(), other.len());
        self.0
            .iter()
            .zip(other)
            .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
    }

    pub fn dist(&self, other: &[f64]) -> f64 {
        self.dist_sq(other).sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        debug_assert_eq!(self.dim(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn add_assign(&mut self, other: &[f64]) {
        debug_assert_eq!(self.dim(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, other: &[f64]) {
        debug_assert_eq!(self.dim(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a -= b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.0 {
            *a *= factor;
        }
    }

    /// Divides every coordinate by `divisor` (kept separate from `scale` so
    /// averages are `sum / n` rather than `sum * (1 / n)`).
    pub fn div_assign(&mut self, divisor: f64) {
        for a in &mut self.0 {
            *a /= divisor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self - other` as a new vector.
    pub fn sub(&self, other: &[f64]) -> Self {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ModelVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for ModelVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for ModelVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ModelVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}
