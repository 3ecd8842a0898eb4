//! Nearest-centroid baseline: per-class mean fingerprint, cosine matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    /// One mean vector per class, indexed by label.
    pub centroids: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

/// Cosine similarity in f64; zero when either vector is zero.
pub fn cosine<T: Scalar>(a: &[T], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let x = x.f64();
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

impl CentroidModel {
    /// Fit on flattened fingerprints with labels in `[0, n_classes)`.
    pub fn fit<T: Scalar>(inputs: &[Vec<T>], labels: &[usize], n_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::validation("input and label counts differ"));
        }
        let dim = inputs
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::validation("training set is empty"))?;
        let mut sums = vec![vec![0.0f64; dim]; n_classes];
        let mut counts = vec![0usize; n_classes];
        for (x, &y) in inputs.iter().zip(labels) {
            if y >= n_classes {
                return Err(Error::validation(format!(
                    "label {y} outside [0, {n_classes})"
                )));
            }
            if x.len() != dim {
                return Err(Error::validation("inputs differ in length"));
            }
            counts[y] += 1;
            for (s, v) in sums[y].iter_mut().zip(x) {
                *s += v.f64();
            }
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(Error::validation(format!(
                "class {c} has no training samples"
            )));
        }
        for (s, &c) in sums.iter_mut().zip(&counts) {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
        let norms = sums
            .iter()
            .map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        Ok(CentroidModel {
            centroids: sums,
            norms,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.centroids.len()
    }

    /// Cosine similarity to every centroid.
    pub fn scores<T: Scalar>(&self, x: &[T]) -> Result<Vec<f64>> {
        if x.len() != self.centroids[0].len() {
            return Err(Error::validation(format!(
                "input has {} values, centroids have {}",
                x.len(),
                self.centroids[0].len()
            )));
        }
        let nx = x.iter().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt();
        Ok(self
            .centroids
            .iter()
            .zip(&self.norms)
            .map(|(c, &nc)| {
                if nx == 0.0 || nc == 0.0 {
                    0.0
                } else {
                    x.iter().zip(c).map(|(a, b)| a.f64() * b).sum::<f64>() / (nx * nc)
                }
            })
            .collect())
    }

    /// `(class, similarity)` of the best match; ties go to the lowest class.
    pub fn predict<T: Scalar>(&self, x: &[T]) -> Result<(usize, f64)> {
        let s = self.scores(x)?;
        let k = super::model::argmax(&s);
        Ok((k, s[k]))
    }
}
