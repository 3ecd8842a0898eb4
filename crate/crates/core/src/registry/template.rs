//! Enrollment templates and the decisions made against them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper clip for thresholds calibrated from enrollment spread.
pub const TAU_CLIP: (f64, f64) = (0.9, 0.999);

/// Enrolled fingerprint of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintTemplate {
    pub device_id: u16,
    /// Mean flattened EPS, scaled to unit L2 norm.
    pub centroid: Vec<f64>,
    /// Mean cosine distance of the enrollment frames to the centroid.
    pub dispersion: f64,
    /// Caller-supplied enrollment time (Unix seconds).
    pub enrolled_at: u64,
    pub n_enroll_frames: u32,
    /// Threshold calibrated from the enrollment frames:
    /// mean similarity − 3 × dispersion, clipped to [`TAU_CLIP`].
    pub calibrated_tau: f64,
}

pub(crate) fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// Cosine similarity against a unit-norm vector.
pub(crate) fn cosine_to_unit(x: &[f64], unit_c: &[f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return 0.0;
    }
    x.iter().zip(unit_c).map(|(a, b)| a * b).sum::<f64>() / n
}

impl FingerprintTemplate {
    /// Build from flattened EPS vectors of one device.
    pub fn from_eps(device_id: u16, eps: &[Vec<f64>], enrolled_at: u64) -> Result<Self> {
        let dim = eps
            .first()
            .map(|e| e.len())
            .ok_or_else(|| Error::validation("no enrollment frames"))?;
        if eps.iter().any(|e| e.len() != dim) {
            return Err(Error::validation("enrollment vectors differ in length"));
        }
        let mut mean = vec![0.0; dim];
        for e in eps {
            for (m, v) in mean.iter_mut().zip(e) {
                *m += v;
            }
        }
        let centroid =
            unit(&mean).ok_or_else(|| Error::validation("enrollment frames average to zero"))?;
        let sims: Vec<f64> = eps.iter().map(|e| cosine_to_unit(e, &centroid)).collect();
        let mean_sim = sims.iter().sum::<f64>() / sims.len() as f64;
        let dispersion = (1.0 - mean_sim).clamp(0.0, 2.0);
        let calibrated_tau = (mean_sim - 3.0 * dispersion).clamp(TAU_CLIP.0, TAU_CLIP.1);
        Ok(FingerprintTemplate {
            device_id,
            centroid,
            dispersion,
            enrolled_at,
            n_enroll_frames: eps.len() as u32,
            calibrated_tau,
        })
    }

    pub fn similarity(&self, eps: &[f64]) -> f64 {
        cosine_to_unit(eps, &self.centroid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
    Alert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthDecision {
    pub verdict: Verdict,
    pub claimed_id: u16,
    pub matched_id: Option<u16>,
    pub score: f64,
    pub threshold_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Screening {
    Legitimate,
    Rogue,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frames_have_zero_dispersion() {
        let e = vec![vec![0.1, 0.5, 0.4]; 20];
        let t = FingerprintTemplate::from_eps(3, &e, 0).unwrap();
        assert!(t.dispersion.abs() < 1e-12);
        assert!((t.centroid.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(t.calibrated_tau, TAU_CLIP.1);
        assert!((t.similarity(&e[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spread_lowers_threshold_within_clip() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let t = FingerprintTemplate::from_eps(1, &e, 0).unwrap();
        assert!(t.dispersion > 0.2 && t.dispersion <= 2.0);
        assert_eq!(t.calibrated_tau, TAU_CLIP.0);
        assert!(FingerprintTemplate::from_eps(1, &[vec![0.0, 0.0]], 0).is_err());
    }
}
