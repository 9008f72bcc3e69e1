use serde::{Deserialize, Serialize};

use super::VectorError;

/// A fixed-dimension vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite { index });
        }
        Ok(Embedding(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, VectorError> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-length copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Embedding> {
        let norm = self.norm();
        if norm == 0.0 {
            return None;
        }
        Some(Embedding(self.0.iter().map(|v| v / norm).collect()))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = VectorError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// Cosine of the angle between `a` and `b`: `Σ aᵢbᵢ / (‖a‖·‖b‖)`.
///
/// The result is clamped to `[-1, 1]` to absorb rounding. When every
/// component of both vectors is non-negative the result lies in `[0, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, VectorError> {
    if a.dimension() != b.dimension() {
        return Err(VectorError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    let mut dot = 0.0;
    let mut norm_a = 0.0;
    let mut norm_b = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(VectorError::ZeroNormVector);
    }
    Ok(clamp_score(dot / (norm_a.sqrt() * norm_b.sqrt())))
}

/// Clamp into `[-1, 1]` and fold `-0.0` into `0.0` so that total ordering
/// treats orthogonal scores as ties.
pub(crate) fn clamp_score(score: f64) -> f64 {
    score.clamp(-1.0, 1.0) + 0.0
}
