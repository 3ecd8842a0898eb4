use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::frame::IQFrame;
use crate::error::{Error, Result};

/// Propagation between a transmitter and the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    /// Per-sample SNR relative to the scaled signal; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub amplitude_scale: f64,
    pub delay_samples: usize,
    /// Carrier phase picked up along the path.
    #[serde(default)]
    pub phase_rad: f64,
    /// Optional short multipath FIR; `None` is a single path.
    #[serde(default)]
    pub multipath: Option<Vec<Complex<f64>>>,
    pub seed: u64,
}

impl ChannelProfile {
    pub fn identity() -> Self {
        ChannelProfile {
            snr_db: None,
            amplitude_scale: 1.0,
            delay_samples: 0,
            phase_rad: 0.0,
            multipath: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_scale > 0.0 && self.amplitude_scale.is_finite()) {
            return Err(Error::validation(format!(
                "amplitude scale must be positive, got {}",
                self.amplitude_scale
            )));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) || !self.phase_rad.is_finite() {
            return Err(Error::validation("channel parameters must be finite"));
        }
        if let Some(taps) = &self.multipath {
            if taps.is_empty() || taps.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
                return Err(Error::validation(
                    "multipath taps must be finite and nonempty",
                ));
            }
        }
        Ok(())
    }
}

/// Scale, rotate, optionally multipath-filter, delay (length preserved), and
/// add complex white Gaussian noise.
pub fn apply_channel(r: &IQFrame, c: &ChannelProfile) -> Result<IQFrame> {
    r.validate()?;
    c.validate()?;
    let n = r.samples.len();
    let gain = Complex::from_polar(c.amplitude_scale, c.phase_rad);
    let mut y: Vec<Complex<f64>> = if c.phase_rad == 0.0 {
        r.samples.iter().map(|s| s * c.amplitude_scale).collect()
    } else {
        r.samples.iter().map(|s| s * gain).collect()
    };
    if let Some(taps) = &c.multipath {
        let src = y.clone();
        for (i, out) in y.iter_mut().enumerate() {
            *out = taps
                .iter()
                .enumerate()
                .filter(|(k, _)| *k <= i)
                .map(|(k, t)| t * src[i - k])
                .sum();
        }
    }
    let signal_power = if n == 0 {
        0.0
    } else {
        y.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64
    };
    if c.delay_samples > 0 {
        let d = c.delay_samples.min(n);
        y.truncate(n - d);
        let mut delayed = vec![Complex::new(0.0, 0.0); d];
        delayed.extend(y);
        y = delayed;
    }
    if let Some(snr_db) = c.snr_db {
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        if sigma > 0.0 {
            let mut rng = crate::rng::rng(c.seed);
            for s in &mut y {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *s += Complex::new(sigma * re, sigma * im);
            }
        }
    }
    Ok(IQFrame {
        samples: y,
        ..r.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::dsss::{generate_dsss_baseband, random_payload, DsssConfig};

    fn frame() -> IQFrame {
        let s = generate_dsss_baseband(&random_payload(80, 4), &DsssConfig::default()).unwrap();
        crate::sim::apply_impairments(&s, &crate::sim::DeviceProfile::ideal(0).with_cfo(7000.0), 1)
            .unwrap()
    }

    #[test]
    fn identity_channel() {
        let f = frame();
        assert_eq!(apply_channel(&f, &ChannelProfile::identity()).unwrap(), f);
    }

    #[test]
    fn half_scale_halves_every_sample() {
        let f = frame();
        let c = ChannelProfile {
            amplitude_scale: 0.5,
            ..ChannelProfile::identity()
        };
        let y = apply_channel(&f, &c).unwrap();
        for (a, b) in y.samples.iter().zip(&f.samples) {
            assert_eq!(*a, b * 0.5);
        }
    }

    #[test]
    fn delay_prefixes_zeros_and_keeps_length() {
        let f = frame();
        let c = ChannelProfile {
            delay_samples: 37,
            ..ChannelProfile::identity()
        };
        let y = apply_channel(&f, &c).unwrap();
        assert_eq!(y.len(), f.len());
        assert!(y.samples[..37].iter().all(|s| s.norm() == 0.0));
        assert_eq!(y.samples[37..], f.samples[..f.len() - 37]);
    }

    #[test]
    fn empirical_snr_matches_request() {
        let f = frame();
        for seed in 0..5 {
            let c = ChannelProfile {
                snr_db: Some(20.0),
                seed,
                ..ChannelProfile::identity()
            };
            let y = apply_channel(&f, &c).unwrap();
            let noise: f64 = y
                .samples
                .iter()
                .zip(&f.samples)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / f.len() as f64;
            let snr = 10.0 * (f.mean_power() / noise).log10();
            assert!((snr - 20.0).abs() <= 0.5, "seed {seed}: {snr:.3} dB");
        }
    }

    #[test]
    fn nonpositive_scale_rejected() {
        let c = ChannelProfile {
            amplitude_scale: 0.0,
            ..ChannelProfile::identity()
        };
        assert!(apply_channel(&frame(), &c).is_err());
    }

    #[test]
    fn multipath_single_unit_tap_is_identity() {
        let f = frame();
        let c = ChannelProfile {
            multipath: Some(vec![Complex::new(1.0, 0.0)]),
            ..ChannelProfile::identity()
        };
        assert_eq!(apply_channel(&f, &c).unwrap().samples, f.samples);
    }
}
