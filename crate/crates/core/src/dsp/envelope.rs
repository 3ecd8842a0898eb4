use num_complex::Complex;

use super::fir::FirFilter;
use super::remez::FilterKind;
use crate::error::{Error, Result};
use crate::Scalar;

/// One real rail (I or Q) of a baseband capture.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSequence<T> {
    samples: Vec<T>,
    sample_rate_hz: f64,
}

impl<T: Scalar> RealSequence<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::validation(format!("sample {i} is not finite")));
        }
        Ok(RealSequence {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Nonnegative envelope samples (may be zero-centered later by the spectrum estimator).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSignal<T> {
    samples: Vec<T>,
    sample_rate_hz: f64,
}

impl<T: Scalar> EnvelopeSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::validation(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !s.is_finite() || *s < T::zero())
        {
            return Err(Error::validation(format!(
                "envelope sample {i} is negative or not finite"
            )));
        }
        Ok(EnvelopeSignal {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn require_hilbert<T: Scalar>(x: &RealSequence<T>, h: &FirFilter<T>) -> Result<()> {
    if h.kind() != FilterKind::Hilbert {
        return Err(Error::validation("analytic signal needs a hilbert filter"));
    }
    if x.len() <= h.len() {
        return Err(Error::validation(format!(
            "input of {} samples must be longer than the {}-tap hilbert filter",
            x.len(),
            h.len()
        )));
    }
    Ok(())
}

/// `a(n) = x(n - D) + j·(h * x)(n)` over the region of full filter overlap.
/// Output length is `len(x) - 2D`.
pub fn analytic_signal<T: Scalar>(
    x: &RealSequence<T>,
    h: &FirFilter<T>,
) -> Result<Vec<Complex<T>>> {
    require_hilbert(x, h)?;
    let d = h.group_delay_samples();
    let y = h.convolve_valid(x.samples())?;
    Ok(y.into_iter()
        .zip(&x.samples()[d..])
        .map(|(im, &re)| Complex::new(re, im))
        .collect())
}

/// Modulus of the analytic signal.
pub fn envelope<T: Scalar>(x: &RealSequence<T>, h: &FirFilter<T>) -> Result<EnvelopeSignal<T>> {
    let a = analytic_signal(x, h)?;
    Ok(EnvelopeSignal {
        samples: a.into_iter().map(|c| c.norm()).collect(),
        sample_rate_hz: x.sample_rate_hz(),
    })
}

/// `decimate(envelope(x, h), factor)` without computing the discarded samples.
/// Bit-identical to the two-step composition.
pub fn decimated_envelope<T: Scalar>(
    x: &RealSequence<T>,
    h: &FirFilter<T>,
    factor: usize,
) -> Result<EnvelopeSignal<T>> {
    require_hilbert(x, h)?;
    if factor == 0 {
        return Err(Error::validation("decimation factor must be at least 1"));
    }
    let d = h.group_delay_samples();
    let full_len = x.len() - 2 * d;
    let n = full_len / factor;
    let xs = x.samples();
    let samples = (0..n)
        .map(|i| {
            let m = i * factor;
            Complex::new(xs[m + d], h.convolve_at(xs, m)).norm()
        })
        .collect();
    Ok(EnvelopeSignal {
        samples,
        sample_rate_hz: x.sample_rate_hz() / factor as f64,
    })
}

/// How [`decimate_with`] reduces each block of `factor` samples.
///
/// The envelope of a chip-rate waveform is wideband, so plain sample picking
/// folds chip and noise energy onto the beat spectrum and makes it depend on
/// the decimation phase; the block mean suppresses most of that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecimationMode {
    /// First sample of each block.
    TakeFirst,
    /// Mean of each block (boxcar anti-aliasing).
    #[default]
    BlockMean,
}

/// Decimate with the chosen block reduction; length is `floor(len / factor)`.
pub fn decimate_with<T: Scalar>(
    e: &EnvelopeSignal<T>,
    factor: usize,
    mode: DecimationMode,
) -> Result<EnvelopeSignal<T>> {
    match mode {
        DecimationMode::TakeFirst => decimate(e, factor),
        DecimationMode::BlockMean => {
            let first = decimate(e, factor)?;
            let inv = T::one() / T::of_usize(factor);
            Ok(EnvelopeSignal {
                samples: e
                    .samples
                    .chunks_exact(factor)
                    .map(|c| c.iter().copied().sum::<T>() * inv)
                    .collect(),
                sample_rate_hz: first.sample_rate_hz,
            })
        }
    }
}

/// Keep every `factor`-th sample starting at index 0; output length is
/// `floor(len / factor)`.
pub fn decimate<T: Scalar>(e: &EnvelopeSignal<T>, factor: usize) -> Result<EnvelopeSignal<T>> {
    if factor == 0 {
        return Err(Error::validation("decimation factor must be at least 1"));
    }
    if e.len() < factor {
        return Err(Error::validation(format!(
            "envelope of {} samples is shorter than the decimation factor {factor}",
            e.len()
        )));
    }
    let n = e.len() / factor;
    Ok(EnvelopeSignal {
        samples: e.samples.iter().step_by(factor).take(n).copied().collect(),
        sample_rate_hz: e.sample_rate_hz / factor as f64,
    })
}

/// Zero-phase smoothing: valid convolution with the symmetric lowpass, which
/// drops `(L-1)/2` samples at each end.
pub fn lowpass_smooth<T: Scalar>(
    e: &EnvelopeSignal<T>,
    h: &FirFilter<T>,
) -> Result<EnvelopeSignal<T>> {
    if h.kind() != FilterKind::Lowpass {
        return Err(Error::validation("smoothing needs a lowpass filter"));
    }
    let y = h.convolve_valid(e.samples())?;
    // Ringing can dip a hair below zero near sharp envelope edges.
    Ok(EnvelopeSignal {
        samples: y.into_iter().map(|v| v.max(T::zero())).collect(),
        sample_rate_hz: e.sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fir::{default_hilbert_spec, default_smoothing_spec, design_fir_remez};
    use std::f64::consts::PI;

    fn hilbert() -> FirFilter<f64> {
        design_fir_remez(&default_hilbert_spec()).unwrap()
    }

    fn smoother() -> FirFilter<f64> {
        design_fir_remez::<f64>(&default_smoothing_spec())
            .unwrap()
            .with_unit_dc_gain()
            .unwrap()
    }

    fn tone(n: usize, f: f64, amp: f64) -> RealSequence<f64> {
        RealSequence::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * f * i as f64).cos())
                .collect(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn cosine_maps_to_sine_after_delay() {
        let h = hilbert();
        let f0 = 0.125;
        let x = tone(1000, f0, 1.0);
        let a = analytic_signal(&x, &h).unwrap();
        assert_eq!(a.len(), 1000 - 100);
        for (m, c) in a.iter().enumerate() {
            let n = (m + 50) as f64;
            assert!((c.re - (2.0 * PI * f0 * n).cos()).abs() < 1e-12);
            assert!((c.im - (2.0 * PI * f0 * n).sin()).abs() <= h.ripple() * 1.01);
        }
    }

    #[test]
    fn tone_has_constant_modulus() {
        let e = envelope(&tone(2000, 0.2, 1.0), &hilbert()).unwrap();
        for v in e.samples() {
            assert!((v - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let x = RealSequence::new(vec![0.0; 300], 1.0).unwrap();
        assert!(analytic_signal(&x, &hilbert())
            .unwrap()
            .iter()
            .all(|c| c.norm() == 0.0));
    }

    #[test]
    fn am_envelope_is_tracked() {
        let h = hilbert();
        let (fc, fm) = (0.2, 0.002);
        let x: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64;
                (1.0 + 0.5 * (2.0 * PI * fm * t).cos()) * (2.0 * PI * fc * t).cos()
            })
            .collect();
        let e = envelope(&RealSequence::new(x, 1.0).unwrap(), &h).unwrap();
        for (m, v) in e.samples().iter().enumerate() {
            let t = (m + 50) as f64;
            let want = 1.0 + 0.5 * (2.0 * PI * fm * t).cos();
            assert!((v - want).abs() / want < 0.02, "m={m} got {v} want {want}");
        }
    }

    #[test]
    fn scaled_input_scales_envelope_exactly() {
        let h = hilbert();
        let x = tone(600, 0.17, 1.0);
        let y = RealSequence::new(x.samples().iter().map(|v| v * 4.0).collect(), 1.0).unwrap();
        let ex = envelope(&x, &h).unwrap();
        let ey = envelope(&y, &h).unwrap();
        for (a, b) in ex.samples().iter().zip(ey.samples()) {
            assert_eq!(a * 4.0, *b);
        }
    }

    #[test]
    fn short_input_rejected() {
        let x = RealSequence::new(vec![1.0; 101], 1.0).unwrap();
        assert!(analytic_signal(&x, &hilbert()).is_err());
        assert!(envelope(&x, &smoother().cast()).is_err());
    }

    #[test]
    fn decimate_conventions() {
        let e = EnvelopeSignal::new((0..10).map(|v| v as f64).collect(), 30.0).unwrap();
        assert_eq!(decimate(&e, 1).unwrap(), e);
        let d = decimate(&e, 3).unwrap();
        assert_eq!(d.samples(), &[0.0, 3.0, 6.0]);
        assert_eq!(d.sample_rate_hz(), 10.0);
        assert!(decimate(&e, 0).is_err());
        assert!(decimate(&e, 11).is_err());
        // 25170-sample frame: 25070 after the hilbert trim, 1671 after /15.
        let long = EnvelopeSignal::new(vec![1.0; 25_070], 20e6).unwrap();
        assert_eq!(decimate(&long, 15).unwrap().len(), 1671);
    }

    #[test]
    fn block_mean_decimation() {
        let e = EnvelopeSignal::new((0..10).map(|v| v as f64).collect(), 10.0).unwrap();
        let m = decimate_with(&e, 3, DecimationMode::BlockMean).unwrap();
        assert_eq!(m.samples(), &[1.0, 4.0, 7.0]);
        assert_eq!(m.sample_rate_hz(), 10.0 / 3.0);
        let t = decimate_with(&e, 3, DecimationMode::TakeFirst).unwrap();
        assert_eq!(t, decimate(&e, 3).unwrap());
    }

    #[test]
    fn decimated_envelope_matches_composition() {
        let h = hilbert();
        let x = RealSequence::new(
            (0..3000)
                .map(|i| ((i * 7919) % 113) as f64 / 50.0 - 1.0)
                .collect(),
            2.0,
        )
        .unwrap();
        let a = decimate(&envelope(&x, &h).unwrap(), 15).unwrap();
        let b = decimated_envelope(&x, &h, 15).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn smoothing_keeps_constants_and_passband_tones() {
        let h = smoother();
        let c = EnvelopeSignal::new(vec![2.5; 200], 1.0).unwrap();
        let y = lowpass_smooth(&c, &h).unwrap();
        assert_eq!(y.len(), 170);
        assert!(y.samples().iter().all(|v| (v - 2.5).abs() < 1e-3));

        // In-band tone at 0.1 of Nyquist: amplitude follows |H| within ripple.
        let f = 0.05;
        let gain = h.response(2.0 * f).norm();
        let x: Vec<f64> = (0..400)
            .map(|i| 3.0 + (2.0 * PI * f * i as f64).cos())
            .collect();
        let y = lowpass_smooth(&EnvelopeSignal::new(x, 1.0).unwrap(), &h).unwrap();
        let amp = y
            .samples()
            .iter()
            .fold(0.0f64, |m, v| m.max((v - 3.0).abs()));
        assert!((amp - gain).abs() < 1e-3);
        assert!((gain - 1.0).abs() <= 2.0 * h.ripple());

        // Tone past the stopband edge is attenuated by at least 40 dB.
        let f = 0.2;
        let x: Vec<f64> = (0..400)
            .map(|i| 3.0 + (2.0 * PI * f * i as f64).cos())
            .collect();
        let y = lowpass_smooth(&EnvelopeSignal::new(x, 1.0).unwrap(), &h).unwrap();
        let amp = y
            .samples()
            .iter()
            .fold(0.0f64, |m, v| m.max((v - 3.0).abs()));
        assert!(20.0 * amp.log10() <= -40.0);
    }
}
