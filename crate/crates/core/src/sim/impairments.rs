use std::f64::consts::PI;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::frame::IQFrame;
use crate::error::{Error, Result};

/// Frequency ramp applied to devices that have not finished warming up, in Hz/s.
/// Over a 1.26 ms frame this moves the CFO by about 250 Hz.
pub const WARMUP_DRIFT_HZ_PER_S: f64 = 2.0e5;

/// Transmitter hardware identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub device_id: u16,
    pub cfo_hz: f64,
    pub iq_gain_imbalance_db: f64,
    pub iq_phase_imbalance_rad: f64,
    pub dc_offset: Complex<f64>,
    pub phase_noise_std_rad: f64,
    pub stabilized: bool,
}

impl DeviceProfile {
    /// Ideal transmitter: no impairments at all.
    pub fn ideal(device_id: u16) -> Self {
        DeviceProfile {
            device_id,
            cfo_hz: 0.0,
            iq_gain_imbalance_db: 0.0,
            iq_phase_imbalance_rad: 0.0,
            dc_offset: Complex::new(0.0, 0.0),
            phase_noise_std_rad: 0.0,
            stabilized: true,
        }
    }

    pub fn with_cfo(mut self, cfo_hz: f64) -> Self {
        self.cfo_hz = cfo_hz;
        self
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let finite = self.cfo_hz.is_finite()
            && self.iq_gain_imbalance_db.is_finite()
            && self.iq_phase_imbalance_rad.is_finite()
            && self.dc_offset.re.is_finite()
            && self.dc_offset.im.is_finite()
            && self.phase_noise_std_rad.is_finite();
        if !finite {
            return Err(Error::validation(format!(
                "device {} has non-finite parameters",
                self.device_id
            )));
        }
        if self.cfo_hz.abs() >= sample_rate_hz / 4.0 {
            return Err(Error::validation(format!(
                "device {} CFO {} Hz must stay below fs/4 = {} Hz",
                self.device_id,
                self.cfo_hz,
                sample_rate_hz / 4.0
            )));
        }
        if self.phase_noise_std_rad < 0.0 {
            return Err(Error::validation("phase noise std must be nonnegative"));
        }
        Ok(())
    }

    /// Gain imbalance ε with `(1 + ε/2) / (1 - ε/2) = 10^(dB/20)`.
    pub fn gain_epsilon(&self) -> f64 {
        let g = 10f64.powf(self.iq_gain_imbalance_db / 20.0);
        2.0 * (g - 1.0) / (g + 1.0)
    }
}

/// Rotate by the CFO (plus Wiener phase noise and warm-up drift), distort the
/// I/Q rails, then add the DC offset.
pub fn apply_impairments(s: &IQFrame, d: &DeviceProfile, seed: u64) -> Result<IQFrame> {
    s.validate()?;
    d.validate(s.sample_rate_hz)?;
    let fs = s.sample_rate_hz;
    let rotate = d.cfo_hz != 0.0 || d.phase_noise_std_rad > 0.0 || !d.stabilized;
    let eps = d.gain_epsilon();
    let theta = d.iq_phase_imbalance_rad;
    let imbalance = eps != 0.0 || theta != 0.0;
    let (ct, st) = (theta.cos(), theta.sin());
    let mut rng = crate::rng::rng(seed);
    let mut pn = 0.0;
    let samples = s
        .samples
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let mut y = x;
            if rotate {
                let t = n as f64 / fs;
                let mut phase = 2.0 * PI * d.cfo_hz * t + pn;
                if !d.stabilized {
                    phase += PI * WARMUP_DRIFT_HZ_PER_S * t * t;
                }
                y = x * Complex::from_polar(1.0, phase);
                if d.phase_noise_std_rad > 0.0 {
                    let step: f64 = rng.sample(StandardNormal);
                    pn += d.phase_noise_std_rad * step;
                }
            }
            if imbalance {
                let i = (1.0 + eps / 2.0) * y.re;
                let q = (1.0 - eps / 2.0) * (y.im * ct + y.re * st);
                y = Complex::new(i, q);
            }
            y + d.dc_offset
        })
        .collect();
    Ok(IQFrame {
        samples,
        sample_rate_hz: fs,
        device_id: Some(d.device_id),
        domain: s.domain,
    })
}
