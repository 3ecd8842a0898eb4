use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::envelope::EnvelopeSignal;
use crate::error::{Error, Result};
use crate::Scalar;

/// Double-sided power spectrum with zero frequency at index `n_fft / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum<T> {
    bins: Vec<T>,
    resolution_hz: f64,
}

impl<T: Scalar> PowerSpectrum<T> {
    pub fn bins(&self) -> &[T] {
        &self.bins
    }

    pub fn into_bins(self) -> Vec<T> {
        self.bins
    }

    pub fn resolution_hz(&self) -> f64 {
        self.resolution_hz
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// `(k - N/2)·Δf` for each bin.
    pub fn freq_axis_hz(&self) -> Vec<f64> {
        freq_axis_hz(self.bins.len(), self.resolution_hz)
    }
}

pub fn freq_axis_hz(n_fft: usize, resolution_hz: f64) -> Vec<f64> {
    let half = (n_fft / 2) as f64;
    (0..n_fft)
        .map(|k| (k as f64 - half) * resolution_hz)
        .collect()
}

/// Symmetric Hann window of length `n`.
pub fn hann<T: Scalar>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| T::of(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

/// Mean-removed, Hann-windowed, zero-padded periodogram.
///
/// Holds the FFT plan so repeated calls at one size reuse twiddles.
#[derive(Clone)]
pub struct SpectrumEstimator<T: Scalar> {
    n_fft: usize,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for SpectrumEstimator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumEstimator")
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl<T: Scalar> SpectrumEstimator<T> {
    pub fn new(n_fft: usize) -> Result<Self> {
        if n_fft < 2 || !n_fft.is_power_of_two() {
            return Err(Error::validation(format!(
                "n_fft must be a power of two >= 2, got {n_fft}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(SpectrumEstimator { n_fft, fft })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    /// Unnormalized, center-shifted `|FFT|²` of the centered, windowed input.
    pub fn raw(&self, e: &EnvelopeSignal<T>) -> Result<Vec<T>> {
        let x = e.samples();
        if x.is_empty() {
            return Err(Error::validation(
                "cannot estimate the spectrum of an empty envelope",
            ));
        }
        if x.len() > self.n_fft {
            return Err(Error::validation(format!(
                "envelope has {} samples but n_fft is {}; decimate or trim first",
                x.len(),
                self.n_fft
            )));
        }
        let n = T::of_usize(x.len());
        let mean = x.iter().copied().sum::<T>() / n;
        let peak = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let spread = x.iter().fold(T::zero(), |m, v| m.max((*v - mean).abs()));
        if spread <= T::of(16.0) * T::epsilon() * peak {
            return Err(Error::validation(
                "envelope is constant; its centered spectrum is zero and cannot be normalized",
            ));
        }
        let w = hann::<T>(x.len());
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n_fft];
        for ((b, v), wi) in buf.iter_mut().zip(x).zip(&w) {
            b.re = (*v - mean) * *wi;
        }
        self.fft.process(&mut buf);
        let half = self.n_fft / 2;
        Ok((0..self.n_fft)
            .map(|k| buf[(k + half) % self.n_fft].norm_sqr())
            .collect())
    }

    /// Normalized double-sided spectrum; bins sum to one.
    pub fn estimate(&self, e: &EnvelopeSignal<T>) -> Result<PowerSpectrum<T>> {
        let mut bins = self.raw(e)?;
        let total: T = bins.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::validation("spectrum has no power to normalize"));
        }
        for b in &mut bins {
            *b /= total;
        }
        Ok(PowerSpectrum {
            bins,
            resolution_hz: e.sample_rate_hz() / self.n_fft as f64,
        })
    }
}

/// One-shot convenience around [`SpectrumEstimator`].
pub fn power_spectrum<T: Scalar>(e: &EnvelopeSignal<T>, n_fft: usize) -> Result<PowerSpectrum<T>> {
    SpectrumEstimator::new(n_fft)?.estimate(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn env(x: Vec<f64>, fs: f64) -> EnvelopeSignal<f64> {
        EnvelopeSignal::new(x, fs).unwrap()
    }

    #[test]
    fn constant_envelope_is_rejected() {
        assert!(power_spectrum(&env(vec![0.7; 100], 1.0), 256).is_err());
    }

    #[test]
    fn oversized_input_and_bad_sizes_rejected() {
        assert!(power_spectrum(&env(vec![1.0; 300], 1.0), 256).is_err());
        assert!(power_spectrum(&env(vec![1.0, 2.0], 1.0), 100).is_err());
    }

    #[test]
    fn on_bin_tone_splits_power_between_two_lines() {
        // 256 samples into a 256-point FFT; f1 sits on bin 16.
        let n = 256;
        let x: Vec<f64> = (0..n)
            .map(|i| 2.0 + (2.0 * PI * 16.0 * i as f64 / n as f64).cos())
            .collect();
        let s = power_spectrum(&env(x, 256.0), n).unwrap();
        let f = s.freq_axis_hz();
        let (kp, kn) = (n / 2 + 16, n / 2 - 16);
        assert_eq!(f[kp], 16.0);
        assert_eq!(f[kn], -16.0);
        // Hann spreads each line over three bins: 1/4, 1/2... of amplitude.
        let side = |k: usize| s.bins()[k - 1] + s.bins()[k] + s.bins()[k + 1];
        assert!((side(kp) - 0.5).abs() < 0.01);
        assert!((side(kn) - 0.5).abs() < 0.01);
        let top = s
            .bins()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(top == kp || top == kn);
    }

    #[test]
    fn parseval_against_time_domain_energy() {
        let x: Vec<f64> = (0..1000)
            .map(|i| 2.0 + ((i * 37 % 101) as f64).sqrt() + (i as f64 * 0.03).sin())
            .collect();
        let e = env(x.clone(), 1.0);
        let est = SpectrumEstimator::<f64>::new(4096).unwrap();
        let raw = est.raw(&e).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let w = hann::<f64>(x.len());
        let energy: f64 = x
            .iter()
            .zip(&w)
            .map(|(v, wi)| ((v - mean) * wi).powi(2))
            .sum();
        let freq_energy = raw.iter().sum::<f64>() / 4096.0;
        assert!((freq_energy - energy).abs() / energy < 1e-9);
    }

    proptest! {
        #[test]
        fn normalized_and_symmetric(xs in prop::collection::vec(0.0f64..10.0, 8..300)) {
            let spread = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-6);
            let s = power_spectrum(&env(xs, 100.0), 512).unwrap();
            let total: f64 = s.bins().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let n = s.len();
            for k in 0..n {
                let a = s.bins()[k];
                let b = s.bins()[(n - k) % n];
                prop_assert!((a - b).abs() <= 1e-9 * a.max(b).max(1e-300));
                prop_assert!(a >= 0.0);
            }
        }
    }

    #[test]
    fn circular_shift_changes_spectrum_little() {
        // Periodic envelope |cos| with 40 samples per lobe, shifted by 13 samples.
        let n = 1600;
        let make = |shift: usize| -> Vec<f64> {
            (0..n)
                .map(|i| (PI * ((i + shift) % n) as f64 / 40.0).cos().abs())
                .collect()
        };
        let a = power_spectrum(&env(make(0), 1.0), 4096).unwrap();
        let b = power_spectrum(&env(make(13), 1.0), 4096).unwrap();
        let d: f64 = a
            .bins()
            .iter()
            .zip(b.bins())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let na: f64 = a.bins().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(d / na <= 0.01, "relative L2 distance {}", d / na);
    }
}
