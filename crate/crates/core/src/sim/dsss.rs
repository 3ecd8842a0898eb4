//! 1 Mb/s 802.11b-style baseband: DBPSK symbols spread by Barker-11.

use num_complex::Complex;
use rand::Rng;

use super::frame::IQFrame;
use crate::dsp::{design_fir_remez, FirDesignSpec};
use crate::error::{Error, Result};

pub const BARKER_11: [f64; 11] = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsssConfig {
    pub samples_per_chip: usize,
    pub target_len: usize,
    pub sample_rate_hz: f64,
    /// Band-limit the rectangular chips with a 31-tap equiripple lowpass.
    pub smooth_chips: bool,
}

impl Default for DsssConfig {
    fn default() -> Self {
        DsssConfig {
            samples_per_chip: 2,
            target_len: super::frame::FRAME_LEN,
            sample_rate_hz: super::frame::DEFAULT_SAMPLE_RATE_HZ,
            smooth_chips: false,
        }
    }
}

/// Pseudo-random payload; the same seed always yields the same packet.
pub fn random_payload(n_bits: usize, seed: u64) -> Vec<bool> {
    let mut rng = crate::rng::rng(seed);
    (0..n_bits).map(|_| rng.random::<bool>()).collect()
}

/// Differential BPSK: a `1` bit flips the carrier phase by π.
pub fn dbpsk_symbols(bits: &[bool]) -> Vec<f64> {
    let mut prev = 1.0;
    bits.iter()
        .map(|&b| {
            if b {
                prev = -prev;
            }
            prev
        })
        .collect()
}

/// Spread the payload and repeat it until exactly `target_len` samples.
/// Output has unit mean power.
pub fn generate_dsss_baseband(payload: &[bool], cfg: &DsssConfig) -> Result<IQFrame> {
    if payload.is_empty() {
        return Err(Error::validation("payload must contain at least one bit"));
    }
    if cfg.samples_per_chip == 0 {
        return Err(Error::validation("samples_per_chip must be positive"));
    }
    if cfg.target_len < cfg.samples_per_chip * BARKER_11.len() {
        return Err(Error::validation(format!(
            "target length {} is shorter than one spread symbol ({} samples)",
            cfg.target_len,
            cfg.samples_per_chip * BARKER_11.len()
        )));
    }
    let symbols = dbpsk_symbols(payload);
    let per_symbol = cfg.samples_per_chip * BARKER_11.len();
    let mut rail: Vec<f64> = (0..cfg.target_len)
        .map(|n| {
            let sym = symbols[(n / per_symbol) % symbols.len()];
            let chip = BARKER_11[(n % per_symbol) / cfg.samples_per_chip];
            sym * chip
        })
        .collect();
    if cfg.smooth_chips {
        let h = design_fir_remez::<f64>(&FirDesignSpec::lowpass(31, 0.2, 0.3, 10.0))?
            .with_unit_dc_gain()?;
        let d = h.group_delay_samples();
        let mut padded = vec![0.0; d];
        padded.extend_from_slice(&rail);
        padded.extend(std::iter::repeat_n(0.0, d));
        rail = h.convolve_valid(&padded)?;
        let p = rail.iter().map(|v| v * v).sum::<f64>() / rail.len() as f64;
        let g = 1.0 / p.sqrt();
        rail.iter_mut().for_each(|v| *v *= g);
    }
    IQFrame::new(
        rail.into_iter().map(|v| Complex::new(v, 0.0)).collect(),
        cfg.sample_rate_hz,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barker_autocorrelation_peak_to_sidelobe_is_eleven() {
        // Aperiodic autocorrelation by direct summation.
        let n = BARKER_11.len() as i64;
        let ac: Vec<f64> = (-(n - 1)..n)
            .map(|lag| {
                (0..n)
                    .filter_map(|i| {
                        let j = i + lag;
                        (0..n)
                            .contains(&j)
                            .then(|| BARKER_11[i as usize] * BARKER_11[j as usize])
                    })
                    .sum()
            })
            .collect();
        let peak = ac[(n - 1) as usize];
        let side = ac
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != (n - 1) as usize)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert_eq!(peak, 11.0);
        assert_eq!(side, 1.0);
    }

    #[test]
    fn all_zero_payload_is_constant_modulus() {
        let f = generate_dsss_baseband(&[false; 8], &DsssConfig::default()).unwrap();
        assert_eq!(f.len(), 25_170);
        assert!(f.samples.iter().all(|c| c.norm() == 1.0));
        assert!((f.mean_power() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn random_payload_has_unit_power_and_exact_length() {
        let bits = random_payload(100, 3);
        let f = generate_dsss_baseband(&bits, &DsssConfig::default()).unwrap();
        assert_eq!(f.len(), 25_170);
        assert!((f.mean_power() - 1.0).abs() < 1e-6);
        let smooth = DsssConfig {
            smooth_chips: true,
            ..DsssConfig::default()
        };
        let g = generate_dsss_baseband(&bits, &smooth).unwrap();
        assert_eq!(g.len(), 25_170);
        assert!((g.mean_power() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dbpsk_is_differential() {
        assert_eq!(
            dbpsk_symbols(&[false, true, true, false, true]),
            vec![1.0, -1.0, 1.0, 1.0, -1.0]
        );
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(generate_dsss_baseband(&[], &DsssConfig::default()).is_err());
        let tiny = DsssConfig {
            target_len: 10,
            ..DsssConfig::default()
        };
        assert!(generate_dsss_baseband(&[true], &tiny).is_err());
    }
}
