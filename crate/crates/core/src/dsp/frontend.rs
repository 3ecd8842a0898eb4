use super::envelope::{
    decimate_with, decimated_envelope, envelope, lowpass_smooth, DecimationMode, EnvelopeSignal,
    RealSequence,
};
use super::fir::{default_hilbert_spec, default_smoothing_spec, design_fir_remez, FirFilter};
use super::remez::FirDesignSpec;
use crate::error::Result;
use crate::Scalar;

/// Hilbert envelope, decimation, then lowpass smoothing (in that order).
/// Decimates by block mean unless told otherwise.
#[derive(Debug, Clone)]
pub struct EnvelopeFrontEnd<T: Scalar> {
    pub hilbert: FirFilter<T>,
    pub smoother: FirFilter<T>,
    pub decimation: usize,
    pub mode: DecimationMode,
}

impl<T: Scalar> EnvelopeFrontEnd<T> {
    pub fn new(
        hilbert: &FirDesignSpec,
        smoother: &FirDesignSpec,
        decimation: usize,
    ) -> Result<Self> {
        Ok(EnvelopeFrontEnd {
            hilbert: design_fir_remez(hilbert)?,
            smoother: design_fir_remez::<f64>(smoother)?
                .with_unit_dc_gain()?
                .cast(),
            decimation,
            mode: DecimationMode::default(),
        })
    }

    pub fn with_mode(mut self, mode: DecimationMode) -> Self {
        self.mode = mode;
        self
    }

    /// 101-tap hilbert, decimate by 15, 31-tap smoother.
    pub fn standard() -> Result<Self> {
        Self::new(&default_hilbert_spec(), &default_smoothing_spec(), 15)
    }

    pub fn smoothed_envelope(&self, x: &RealSequence<T>) -> Result<EnvelopeSignal<T>> {
        let e = match self.mode {
            DecimationMode::TakeFirst => decimated_envelope(x, &self.hilbert, self.decimation)?,
            mode => decimate_with(&envelope(x, &self.hilbert)?, self.decimation, mode)?,
        };
        lowpass_smooth(&e, &self.smoother)
    }

    /// Envelope length produced for an input of `n` samples.
    pub fn output_len(&self, n: usize) -> usize {
        let trimmed = n.saturating_sub(2 * self.hilbert.group_delay_samples());
        (trimmed / self.decimation).saturating_sub(self.smoother.len() - 1)
    }
}
