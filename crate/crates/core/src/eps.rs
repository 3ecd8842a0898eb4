//! Envelope power spectrum fingerprints: IQ frame to a 2×n_fft tensor of
//! per-rail normalized spectra, plus similarity and export helpers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{
    default_hilbert_spec, default_smoothing_spec, freq_axis_hz, DecimationMode, EnvelopeFrontEnd,
    FirDesignSpec, RealSequence, SpectrumEstimator,
};
use crate::error::{Error, Result};
use crate::sim::{DomainLabel, IQFrame, FRAME_LEN};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsConfig {
    pub frame_len: usize,
    pub decimation: usize,
    pub decimation_mode: DecimationMode,
    pub n_fft: usize,
    pub hilbert: FirDesignSpec,
    pub smoother: FirDesignSpec,
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig {
            frame_len: FRAME_LEN,
            decimation: 15,
            decimation_mode: DecimationMode::default(),
            n_fft: 4096,
            hilbert: default_hilbert_spec(),
            smoother: default_smoothing_spec(),
        }
    }
}

/// `eps_i` and `eps_q` rows, each summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsTensor<T> {
    pub eps_i: Vec<T>,
    pub eps_q: Vec<T>,
    pub resolution_hz: f64,
    pub source_device: Option<u16>,
    pub source_domain: Option<DomainLabel>,
}

impl<T: Scalar> EpsTensor<T> {
    pub fn n_fft(&self) -> usize {
        self.eps_i.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_i.len() != self.eps_q.len() || self.eps_i.is_empty() {
            return Err(Error::validation(format!(
                "EPS rows must share a nonzero length, got {} and {}",
                self.eps_i.len(),
                self.eps_q.len()
            )));
        }
        let tol = if T::epsilon() > T::of(1e-10) {
            1e-4
        } else {
            1e-12
        };
        for (name, row) in [("eps_i", &self.eps_i), ("eps_q", &self.eps_q)] {
            if row.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(Error::validation(format!(
                    "{name} has negative or non-finite bins"
                )));
            }
            let sum: f64 = row.iter().map(|v| v.f64()).sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::validation(format!(
                    "{name} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Both rows concatenated, I first.
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(2 * self.eps_i.len());
        v.extend_from_slice(&self.eps_i);
        v.extend_from_slice(&self.eps_q);
        v
    }

    pub fn freq_axis_hz(&self) -> Vec<f64> {
        freq_axis_hz(self.n_fft(), self.resolution_hz)
    }

    /// Binary record: device id (u16), domain bytes (day, location,
    /// channel kind), then both rows as f32, all little-endian.
    pub fn write_record<W: Write>(&self, w: &mut W) -> Result<()> {
        let (id, dom) = self.labels()?;
        w.write_all(&id.to_le_bytes())?;
        w.write_all(&dom.to_bytes())?;
        for v in self.eps_i.iter().chain(&self.eps_q) {
            w.write_all(&(v.f64() as f32).to_le_bytes())?;
        }
        Ok(())
    }

    /// Tab-separated `freq_hz eps_i eps_q` columns with a header line.
    pub fn write_plot_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "freq_hz\teps_i\teps_q")?;
        for ((f, a), b) in self.freq_axis_hz().iter().zip(&self.eps_i).zip(&self.eps_q) {
            writeln!(w, "{f}\t{:e}\t{:e}", a.f64(), b.f64())?;
        }
        Ok(())
    }

    fn labels(&self) -> Result<(u16, DomainLabel)> {
        match (self.source_device, self.source_domain) {
            (Some(id), Some(d)) => Ok((id, d)),
            _ => Err(Error::validation(
                "binary EPS records need a device id and a domain label",
            )),
        }
    }

    pub fn cast<U: Scalar>(&self) -> EpsTensor<U> {
        let c = |r: &[T]| r.iter().map(|v| U::of(v.f64())).collect();
        EpsTensor {
            eps_i: c(&self.eps_i),
            eps_q: c(&self.eps_q),
            resolution_hz: self.resolution_hz,
            source_device: self.source_device,
            source_domain: self.source_domain,
        }
    }
}

/// Shared filters and FFT plan; cheap to reuse across frames and threads.
#[derive(Debug, Clone)]
pub struct EpsGenerator<T: Scalar> {
    cfg: EpsConfig,
    front: EnvelopeFrontEnd<T>,
    estimator: SpectrumEstimator<T>,
}

impl<T: Scalar> EpsGenerator<T> {
    pub fn new(cfg: EpsConfig) -> Result<Self> {
        if cfg.decimation == 0 {
            return Err(Error::validation("decimation factor must be positive"));
        }
        let front = EnvelopeFrontEnd::new(&cfg.hilbert, &cfg.smoother, cfg.decimation)?
            .with_mode(cfg.decimation_mode);
        let env_len = front.output_len(cfg.frame_len);
        if env_len == 0 {
            return Err(Error::validation(format!(
                "frame length {} leaves no envelope after filtering and decimation",
                cfg.frame_len
            )));
        }
        if env_len > cfg.n_fft {
            return Err(Error::validation(format!(
                "envelope of {env_len} samples does not fit n_fft = {}",
                cfg.n_fft
            )));
        }
        let estimator = SpectrumEstimator::new(cfg.n_fft)?;
        Ok(EpsGenerator {
            cfg,
            front,
            estimator,
        })
    }

    pub fn standard() -> Result<Self> {
        Self::new(EpsConfig::default())
    }

    pub fn config(&self) -> &EpsConfig {
        &self.cfg
    }

    pub fn front_end(&self) -> &EnvelopeFrontEnd<T> {
        &self.front
    }

    /// Spectral bin width for frames sampled at `fs`.
    pub fn resolution_hz(&self, fs: f64) -> f64 {
        fs / self.cfg.decimation as f64 / self.cfg.n_fft as f64
    }

    fn row(&self, rail: Vec<T>, fs: f64) -> Result<Vec<T>> {
        let x = RealSequence::new(rail, fs)?;
        let env = self.front.smoothed_envelope(&x)?;
        Ok(self.estimator.estimate(&env)?.into_bins())
    }

    pub fn eps_of_frame(&self, r: &IQFrame) -> Result<EpsTensor<T>> {
        r.validate()?;
        r.require_len(self.cfg.frame_len)?;
        let fs = r.sample_rate_hz;
        let eps_i = self.row(r.samples.iter().map(|c| T::of(c.re)).collect(), fs)?;
        let eps_q = self.row(r.samples.iter().map(|c| T::of(c.im)).collect(), fs)?;
        Ok(EpsTensor {
            eps_i,
            eps_q,
            resolution_hz: self.resolution_hz(fs),
            source_device: r.device_id,
            source_domain: r.domain,
        })
    }

    pub fn eps_of_frames(&self, frames: &[IQFrame]) -> Result<Vec<EpsTensor<T>>> {
        frames.par_iter().map(|f| self.eps_of_frame(f)).collect()
    }
}

/// Cosine similarity of the concatenated rows.
pub fn eps_similarity<T: Scalar>(a: &EpsTensor<T>, b: &EpsTensor<T>) -> Result<f64> {
    if a.eps_i.len() != b.eps_i.len() || a.eps_q.len() != b.eps_q.len() {
        return Err(Error::validation("EPS tensors differ in shape"));
    }
    if (a.resolution_hz - b.resolution_hz).abs() > 1e-9 * a.resolution_hz.abs() {
        return Err(Error::validation(format!(
            "EPS resolutions differ: {} vs {} Hz",
            a.resolution_hz, b.resolution_hz
        )));
    }
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a
        .eps_i
        .iter()
        .chain(&a.eps_q)
        .zip(b.eps_i.iter().chain(&b.eps_q))
    {
        let (x, y) = (x.f64(), y.f64());
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::validation(
            "cosine similarity of a zero vector is undefined",
        ));
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Frequency (Hz, signed) of the largest bin with `|f| >= min_hz`.
pub fn dominant_peak_hz<T: Scalar>(row: &[T], resolution_hz: f64, min_hz: f64) -> Option<f64> {
    freq_axis_hz(row.len(), resolution_hz)
        .into_iter()
        .zip(row)
        .filter(|(f, _)| f.abs() >= min_hz)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(f, _)| f)
}

/// Two standardized rows (I then Q) of a raw IQ window.
#[derive(Debug, Clone, PartialEq)]
pub struct IqWindow<T> {
    pub i: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Scalar> IqWindow<T> {
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(2 * self.i.len());
        v.extend_from_slice(&self.i);
        v.extend_from_slice(&self.q);
        v
    }
}

fn standardize<T: Scalar>(x: impl Iterator<Item = f64> + Clone, rail: &str) -> Result<Vec<T>> {
    let n = x.clone().count() as f64;
    let mean = x.clone().sum::<f64>() / n;
    let var = x.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::validation(format!(
            "{rail} rail is constant over the window and cannot be standardized"
        )));
    }
    let sd = var.sqrt();
    Ok(x.map(|v| T::of((v - mean) / sd)).collect())
}

/// Contiguous window of the I and Q rails, each standardized to zero mean and
/// unit variance. Constant rails are an error.
pub fn raw_iq_representation<T: Scalar>(
    r: &IQFrame,
    window_len: usize,
    offset: usize,
) -> Result<IqWindow<T>> {
    if window_len == 0 || offset + window_len > r.len() {
        return Err(Error::validation(format!(
            "window [{offset}, {}) exceeds frame of {} samples",
            offset + window_len,
            r.len()
        )));
    }
    let w = &r.samples[offset..offset + window_len];
    Ok(IqWindow {
        i: standardize(w.iter().map(|c| c.re), "I")?,
        q: standardize(w.iter().map(|c| c.im), "Q")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{
        apply_channel, apply_impairments, generate_dsss_baseband, random_payload, ChannelKind,
        ChannelProfile, DeviceProfile, DsssConfig,
    };

    fn frame(cfo: f64) -> IQFrame {
        let s = generate_dsss_baseband(&random_payload(200, 5), &DsssConfig::default()).unwrap();
        apply_impairments(&s, &DeviceProfile::ideal(1).with_cfo(cfo), 2).unwrap()
    }

    #[test]
    fn tensor_shape_and_resolution() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let e = g.eps_of_frame(&frame(7_000.0)).unwrap();
        assert_eq!((e.eps_i.len(), e.eps_q.len()), (4096, 4096));
        assert!((e.resolution_hz - 20e6 / 15.0 / 4096.0).abs() < 1e-9);
        e.validate().unwrap();
        assert_eq!(e.source_device, Some(1));
    }

    #[test]
    fn wrong_length_rejected() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let mut f = frame(7_000.0);
        f.samples.pop();
        assert!(matches!(g.eps_of_frame(&f), Err(Error::Validation(_))));
    }

    #[test]
    fn amplitude_scale_leaves_eps_unchanged() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let f = frame(9_500.0);
        let a = g.eps_of_frame(&f).unwrap();
        for alpha in [0.1, 0.35, 3.0] {
            let b = g.eps_of_frame(&f.scaled(alpha)).unwrap();
            for (x, y) in a.to_flat().iter().zip(b.to_flat()) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn dominant_peak_at_twice_cfo() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let e = g.eps_of_frame(&frame(10_000.0)).unwrap();
        let f = dominant_peak_hz(&e.eps_i, e.resolution_hz, 2.0 * e.resolution_hz).unwrap();
        assert!((f.abs() - 20_000.0).abs() <= e.resolution_hz, "peak at {f}");
        // Second harmonic of the beat shows up as a local maximum near 4Δf.
        let k0 = 2048 + (40_000.0 / e.resolution_hz).round() as usize;
        let local = (k0 - 2..=k0 + 2).map(|k| e.eps_i[k]).fold(0.0, f64::max);
        let floor = (k0 + 15..k0 + 40).map(|k| e.eps_i[k]).sum::<f64>() / 25.0;
        assert!(local > 5.0 * floor);
    }

    #[test]
    fn small_delays_barely_move_the_spectrum() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let f = frame(6_500.0);
        let a = g.eps_of_frame(&f).unwrap().to_flat();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        for d in [1usize, 37, 200] {
            let c = ChannelProfile {
                delay_samples: d,
                ..ChannelProfile::identity()
            };
            let b = g
                .eps_of_frame(&apply_channel(&f, &c).unwrap())
                .unwrap()
                .to_flat();
            let dist = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!(dist / na <= 0.01, "delay {d}: {}", dist / na);
        }
    }

    #[test]
    fn take_first_decimation_depends_on_phase() {
        let cfg = EpsConfig {
            decimation_mode: DecimationMode::TakeFirst,
            ..EpsConfig::default()
        };
        let g = EpsGenerator::<f64>::new(cfg).unwrap();
        let f = frame(20_000.0);
        let a = g.eps_of_frame(&f).unwrap().to_flat();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = |d: usize| {
            let c = ChannelProfile {
                delay_samples: d,
                ..ChannelProfile::identity()
            };
            let b = g
                .eps_of_frame(&apply_channel(&f, &c).unwrap())
                .unwrap()
                .to_flat();
            a.iter()
                .zip(&b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
                / na
        };
        // Whole decimation blocks leave it almost unchanged; a one-sample shift does not.
        assert!(dist(15) < 1e-3);
        assert!(dist(1) > 0.01);
    }

    #[test]
    fn similarity_properties() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let a = g.eps_of_frame(&frame(5_000.0)).unwrap();
        let b = g.eps_of_frame(&frame(10_000.0)).unwrap();
        assert!((eps_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(eps_similarity(&a, &b).unwrap() <= 0.8);
        let mut z = a.clone();
        z.eps_i
            .iter_mut()
            .chain(z.eps_q.iter_mut())
            .for_each(|v| *v = 0.0);
        assert!(eps_similarity(&a, &z).is_err());
    }

    #[test]
    fn f32_pipeline_tracks_f64() {
        let f = frame(12_500.0);
        let a = EpsGenerator::<f64>::standard()
            .unwrap()
            .eps_of_frame(&f)
            .unwrap();
        let b = EpsGenerator::<f32>::standard()
            .unwrap()
            .eps_of_frame(&f)
            .unwrap();
        b.validate().unwrap();
        assert!(eps_similarity(&a, &b.cast()).unwrap() > 0.9999);
    }

    #[test]
    fn record_and_plot_exports() {
        let g = EpsGenerator::<f64>::standard().unwrap();
        let mut e = g.eps_of_frame(&frame(3_500.0)).unwrap();
        let mut buf = Vec::new();
        assert!(e.write_record(&mut buf).is_err());
        e.source_domain = Some(DomainLabel::new(2, 1, ChannelKind::Wireless));
        e.write_record(&mut buf).unwrap();
        assert_eq!(buf.len(), 2 + 3 + 8192 * 4);
        assert_eq!(&buf[..5], &[1, 0, 2, 1, 1]);
        let mut txt = Vec::new();
        e.write_plot_text(&mut txt).unwrap();
        let txt = String::from_utf8(txt).unwrap();
        assert_eq!(txt.lines().count(), 4097);
        assert!(txt.lines().nth(2049).unwrap().starts_with("0\t"));
    }

    #[test]
    fn raw_iq_window_is_standardized_and_scale_free() {
        let f = frame(4_000.0);
        let a: IqWindow<f64> = raw_iq_representation(&f, 4096, 0).unwrap();
        assert_eq!(a.to_flat().len(), 8192);
        let m = a.i.iter().sum::<f64>() / 4096.0;
        let v = a.i.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4096.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        let b: IqWindow<f64> = raw_iq_representation(&f.scaled(3.0), 4096, 0).unwrap();
        for (x, y) in a.to_flat().iter().zip(b.to_flat()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(raw_iq_representation::<f64>(&f, 30_000, 0).is_err());
        let flat = IQFrame::new(vec![num_complex::Complex::new(1.0, 1.0); 5000], 20e6).unwrap();
        assert!(raw_iq_representation::<f64>(&flat, 4096, 0).is_err());
    }
}
