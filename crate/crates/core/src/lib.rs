pub mod acceptance;
pub mod classifier;
pub mod dataset;
pub mod dsp;
pub mod eps;
pub mod error;
pub mod eval;
pub mod registry;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double precision front end and spectra, used for features and oracles.
pub type FrontEnd = dsp::EnvelopeFrontEnd<f64>;
pub type Spectrum = dsp::PowerSpectrum<f64>;
pub type Eps = eps::EpsGenerator<f64>;
pub type EpsTensor = eps::EpsTensor<f64>;
/// Networks train in single precision; the f64 form serves gradient checks.
pub type Cnn = classifier::Cnn<f32>;
pub type CnnF64 = classifier::Cnn<f64>;
