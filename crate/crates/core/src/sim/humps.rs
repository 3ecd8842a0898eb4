//! Counting envelope "humps": the |cos(2πΔf·t)| lobes that a carrier offset
//! leaves on each rail of a constant-modulus baseband.

use crate::dsp::{EnvelopeFrontEnd, RealSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumpConfig {
    /// Largest CFO the counter must resolve; the moving-average width is
    /// `1 / (8·max_cfo_hz)`, half the lobe spacing at the top of the range.
    pub max_cfo_hz: f64,
    /// A lobe must rise above this fraction of the global envelope maximum.
    pub peak_fraction: f64,
    /// Envelopes whose `(max - min) / max` falls below this are flat.
    pub min_depth: f64,
}

impl HumpConfig {
    pub fn for_max_cfo(max_cfo_hz: f64) -> Self {
        HumpConfig {
            max_cfo_hz,
            peak_fraction: 0.5,
            min_depth: 0.5,
        }
    }
}

/// Centered moving average over `w` samples, valid region only.
fn moving_average(x: &[f64], w: usize) -> Vec<f64> {
    if w <= 1 {
        return x.to_vec();
    }
    let mut out = Vec::with_capacity(x.len() + 1 - w);
    let mut acc: f64 = x[..w].iter().sum();
    out.push(acc / w as f64);
    for i in w..x.len() {
        acc += x[i] - x[i - w];
        out.push(acc / w as f64);
    }
    out
}

/// Estimated hump count; `round(2·|Δf|·T)` for a CFO-impaired
/// constant-modulus rail of duration `T`.
///
/// Interior lobes count one; a lobe cut by the frame boundary counts one half.
pub fn count_envelope_humps(
    component: &RealSequence<f64>,
    front: &EnvelopeFrontEnd<f64>,
    cfg: &HumpConfig,
) -> Result<usize> {
    if !(cfg.max_cfo_hz > 0.0) {
        return Err(Error::validation("max_cfo_hz must be positive"));
    }
    let env = front.smoothed_envelope(component)?;
    let fs = env.sample_rate_hz();
    let min_sep = (fs / (4.0 * cfg.max_cfo_hz)).max(1.0);
    let window = ((min_sep / 2.0).round() as usize).max(1);
    if env.len() < window + 2 {
        return Err(Error::validation(format!(
            "envelope of {} samples is shorter than the {window}-sample smoothing window",
            env.len()
        )));
    }
    let s = moving_average(env.samples(), window);
    let max = s.iter().copied().fold(0.0f64, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || (max - min) / max < cfg.min_depth {
        return Ok(0);
    }
    // Hysteresis segmentation: a lobe opens above `high` and closes below `low`.
    let high = cfg.peak_fraction * max;
    let low = 0.5 * high;
    let mut halves = 0usize;
    let mut start: Option<usize> = None;
    for (i, &v) in s.iter().enumerate() {
        match start {
            None if v >= high => start = Some(i),
            Some(a) if v < low => {
                halves += if a == 0 { 1 } else { 2 };
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        halves += if a == 0 { 2 } else { 1 };
    }
    Ok((halves + 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_valid_region() {
        assert_eq!(
            moving_average(&[1.0, 2.0, 3.0, 4.0], 2),
            vec![1.5, 2.5, 3.5]
        );
        assert_eq!(moving_average(&[1.0, 2.0], 1), vec![1.0, 2.0]);
    }

    use crate::sim::{
        apply_channel, apply_impairments, generate_dsss_baseband, random_payload, ChannelProfile,
        DeviceProfile, DsssConfig,
    };
    use num_complex::Complex;

    fn i_rail(device: &DeviceProfile, target_len: usize, snr_db: Option<f64>) -> RealSequence<f64> {
        let cfg = DsssConfig {
            target_len,
            ..DsssConfig::default()
        };
        let base = generate_dsss_baseband(&random_payload(120, 8), &cfg).unwrap();
        let mut f = apply_impairments(&base, device, 3).unwrap();
        if snr_db.is_some() {
            let c = ChannelProfile {
                snr_db,
                seed: 21,
                ..ChannelProfile::identity()
            };
            f = apply_channel(&f, &c).unwrap();
        }
        f.i_rail()
    }

    fn count(cfo: f64, len: usize, max_cfo: f64) -> usize {
        let front = EnvelopeFrontEnd::standard().unwrap();
        let x = i_rail(&DeviceProfile::ideal(0).with_cfo(cfo), len, None);
        count_envelope_humps(&x, &front, &HumpConfig::for_max_cfo(max_cfo)).unwrap()
    }

    #[test]
    fn ten_millisecond_frames_show_zero_one_two_four_humps() {
        let got: Vec<usize> = [0.0, 50.0, 100.0, 200.0]
            .iter()
            .map(|&f| count(f, 200_000, 400.0))
            .collect();
        for (g, want) in got.iter().zip([0usize, 1, 2, 4]) {
            assert!(g.abs_diff(want) <= 1, "{got:?}");
        }
        assert_eq!(got[0], 0);
    }

    #[test]
    fn hump_count_follows_twice_cfo_times_duration() {
        let t = crate::sim::FRAME_LEN as f64 / 20e6;
        for cfo in [2_000.0, 5_000.0, 10_000.0, 20_000.0] {
            let want = (2.0 * cfo * t).round() as usize;
            let got = count(cfo, crate::sim::FRAME_LEN, 25_000.0);
            assert!(got.abs_diff(want) <= 1, "cfo {cfo}: got {got}, want {want}");
            // Sign of the offset is invisible.
            assert_eq!(got, count(-cfo, crate::sim::FRAME_LEN, 25_000.0));
        }
        assert!(count(5_000.0, crate::sim::FRAME_LEN, 25_000.0).abs_diff(13) <= 1);
    }

    #[test]
    fn imbalance_and_dc_alone_leave_the_envelope_flat() {
        let front = EnvelopeFrontEnd::standard().unwrap();
        let cfg = HumpConfig::for_max_cfo(25_000.0);
        let imb = DeviceProfile {
            iq_gain_imbalance_db: 0.5,
            iq_phase_imbalance_rad: 0.035,
            ..DeviceProfile::ideal(0)
        };
        let dc = DeviceProfile {
            dc_offset: Complex::new(0.01, -0.005),
            ..DeviceProfile::ideal(0)
        };
        for d in [imb, dc] {
            let x = i_rail(&d, crate::sim::FRAME_LEN, None);
            assert_eq!(count_envelope_humps(&x, &front, &cfg).unwrap(), 0);
        }
    }

    #[test]
    fn moderate_noise_moves_the_count_by_at_most_one() {
        let front = EnvelopeFrontEnd::standard().unwrap();
        let cfg = HumpConfig::for_max_cfo(25_000.0);
        for cfo in [2_000.0, 5_000.0, 10_000.0] {
            let d = DeviceProfile::ideal(0).with_cfo(cfo);
            let clean =
                count_envelope_humps(&i_rail(&d, crate::sim::FRAME_LEN, None), &front, &cfg)
                    .unwrap();
            let noisy =
                count_envelope_humps(&i_rail(&d, crate::sim::FRAME_LEN, Some(15.0)), &front, &cfg)
                    .unwrap();
            assert!(clean.abs_diff(noisy) <= 1, "cfo {cfo}: {clean} vs {noisy}");
        }
    }
}
