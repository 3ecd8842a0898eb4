use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::remez::{remez, FilterKind, FirDesignSpec};
use crate::error::{Error, Result};
use crate::Scalar;

/// A linear-phase FIR filter together with the design that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct FirFilter<T> {
    taps: Vec<T>,
    kind: FilterKind,
    group_delay_samples: usize,
    design: FirDesignSpec,
    /// Weighted ripple reported by the exchange.
    ripple: f64,
}

/// Hilbert transformer used by the envelope front end.
pub fn default_hilbert_spec() -> FirDesignSpec {
    FirDesignSpec::hilbert(101, 0.03, 0.97)
}

/// Post-decimation smoothing lowpass: pass to 0.2, stop from 0.3.
pub fn default_smoothing_spec() -> FirDesignSpec {
    FirDesignSpec::lowpass(31, 0.2, 0.3, 10.0)
}

/// Design an equiripple filter with the Remez exchange.
pub fn design_fir_remez<T: Scalar>(spec: &FirDesignSpec) -> Result<FirFilter<T>> {
    let d = remez(spec)?;
    FirFilter::from_taps(
        spec.kind,
        d.taps.iter().map(|&t| T::of(t)).collect(),
        spec.clone(),
        d.delta,
    )
}

impl<T: Scalar> FirFilter<T> {
    pub fn from_taps(
        kind: FilterKind,
        taps: Vec<T>,
        design: FirDesignSpec,
        ripple: f64,
    ) -> Result<Self> {
        let l = taps.len();
        if l == 0 || l % 2 == 0 {
            return Err(Error::validation(format!(
                "filter length must be odd, got {l}"
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::validation("filter taps must be finite"));
        }
        for k in 0..l / 2 {
            let (a, b) = (taps[k], taps[l - 1 - k]);
            let ok = match kind {
                FilterKind::Hilbert => a == -b,
                FilterKind::Lowpass => a == b,
            };
            if !ok {
                return Err(Error::validation(format!(
                    "taps {k} and {} break the {kind:?} symmetry",
                    l - 1 - k
                )));
            }
        }
        if kind == FilterKind::Hilbert && taps[l / 2] != T::zero() {
            return Err(Error::validation("hilbert center tap must be zero"));
        }
        Ok(FirFilter {
            taps,
            kind,
            group_delay_samples: (l - 1) / 2,
            design,
            ripple,
        })
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn group_delay_samples(&self) -> usize {
        self.group_delay_samples
    }

    pub fn design(&self) -> &FirDesignSpec {
        &self.design
    }

    pub fn ripple(&self) -> f64 {
        self.ripple
    }

    /// Scale taps so the response at DC is exactly one (lowpass only).
    pub fn with_unit_dc_gain(mut self) -> Result<Self> {
        if self.kind != FilterKind::Lowpass {
            return Err(Error::validation(
                "only lowpass filters have a DC gain to normalize",
            ));
        }
        let g: T = self.taps.iter().copied().sum();
        if g == T::zero() {
            return Err(Error::validation("filter has zero DC gain"));
        }
        for t in &mut self.taps {
            *t = *t / g;
        }
        // Keep exact symmetry after rounding.
        let l = self.taps.len();
        for k in 0..l / 2 {
            self.taps[l - 1 - k] = self.taps[k];
        }
        Ok(self)
    }

    /// Complex frequency response at `nyq` (fraction of Nyquist).
    pub fn response(&self, nyq: f64) -> Complex<f64> {
        let w = std::f64::consts::PI * nyq;
        self.taps
            .iter()
            .enumerate()
            .map(|(n, t)| Complex::from_polar(t.f64(), -w * n as f64))
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> FirFilter<U> {
        FirFilter {
            taps: self.taps.iter().map(|t| U::of(t.f64())).collect(),
            kind: self.kind,
            group_delay_samples: self.group_delay_samples,
            design: self.design.clone(),
            ripple: self.ripple,
        }
    }

    /// Valid-region convolution: `y[m] = Σ_k h[k]·x[m + L - 1 - k]`,
    /// `m ∈ [0, N - L]`. Zero taps are skipped.
    pub fn convolve_valid(&self, x: &[T]) -> Result<Vec<T>> {
        let l = self.taps.len();
        if x.len() < l {
            return Err(Error::validation(format!(
                "input of {} samples is shorter than the {l}-tap filter",
                x.len()
            )));
        }
        let n_out = x.len() - l + 1;
        let mut y = vec![T::zero(); n_out];
        for (k, &h) in self.taps.iter().enumerate() {
            if h == T::zero() {
                continue;
            }
            let off = l - 1 - k;
            for (yi, xi) in y.iter_mut().zip(&x[off..off + n_out]) {
                *yi += h * *xi;
            }
        }
        Ok(y)
    }

    /// One output of [`Self::convolve_valid`].
    pub(crate) fn convolve_at(&self, x: &[T], m: usize) -> T {
        let l = self.taps.len();
        let mut acc = T::zero();
        for (k, &h) in self.taps.iter().enumerate() {
            if h != T::zero() {
                acc += h * x[m + l - 1 - k];
            }
        }
        acc
    }
}

impl FirFilter<f64> {
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self)?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        let f: FirFilter<f64> = serde_json::from_str(&s)?;
        // Re-run the structural checks on whatever was on disk.
        FirFilter::from_taps(f.kind, f.taps, f.design, f.ripple)
    }
}
