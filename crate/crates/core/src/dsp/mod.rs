//! Deterministic signal-processing primitives: equiripple design, filtering,
//! analytic-signal envelopes, decimation and periodogram estimation.

pub mod envelope;
pub mod fir;
pub mod frontend;
pub mod remez;
pub mod spectrum;

pub use envelope::{
    analytic_signal, decimate, decimate_with, decimated_envelope, envelope, lowpass_smooth,
    DecimationMode, EnvelopeSignal, RealSequence,
};
pub use fir::{default_hilbert_spec, default_smoothing_spec, design_fir_remez, FirFilter};
pub use frontend::EnvelopeFrontEnd;
pub use remez::{
    amplitude_response, audit_equiripple, remez, Band, EquirippleAudit, FilterKind, FirDesignSpec,
    RemezDesign,
};
pub use spectrum::{freq_axis_hz, hann, power_spectrum, PowerSpectrum, SpectrumEstimator};
