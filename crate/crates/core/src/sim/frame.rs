use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::RealSequence;
use crate::error::{Error, Result};

/// Samples per frame in the standard pipeline.
pub const FRAME_LEN: usize = 25_170;

/// Simulation sample rate.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 20e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Wired,
    Wireless,
}

impl ChannelKind {
    pub fn as_u8(self) -> u8 {
        match self {
            ChannelKind::Wired => 0,
            ChannelKind::Wireless => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(ChannelKind::Wired),
            1 => Some(ChannelKind::Wireless),
            _ => None,
        }
    }
}

/// Capture condition of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DomainLabel {
    pub day: u8,
    pub location: u8,
    pub channel_kind: ChannelKind,
}

impl DomainLabel {
    pub fn new(day: u8, location: u8, channel_kind: ChannelKind) -> Self {
        DomainLabel {
            day,
            location,
            channel_kind,
        }
    }

    /// `[day, location, channel_kind]` as stored on disk.
    pub fn to_bytes(&self) -> [u8; 3] {
        [self.day, self.location, self.channel_kind.as_u8()]
    }

    pub fn from_bytes(b: [u8; 3]) -> Option<Self> {
        ChannelKind::from_u8(b[2]).map(|ck| DomainLabel::new(b[0], b[1], ck))
    }

    pub fn location_name(&self) -> String {
        match self.location {
            l @ 0..=25 => ((b'A' + l) as char).to_string(),
            l => format!("{l}"),
        }
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ck = match self.channel_kind {
            ChannelKind::Wired => "wired",
            ChannelKind::Wireless => "wireless",
        };
        write!(f, "day{}-loc{}-{}", self.day, self.location_name(), ck)
    }
}

impl std::str::FromStr for DomainLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::validation(format!("malformed domain label `{s}`"));
        let mut parts = s.split('-');
        let day = parts
            .next()
            .and_then(|p| p.strip_prefix("day"))
            .and_then(|d| d.parse().ok())
            .ok_or_else(bad)?;
        let loc = parts
            .next()
            .and_then(|p| p.strip_prefix("loc"))
            .ok_or_else(bad)?;
        let location = match loc.as_bytes() {
            [c] if c.is_ascii_uppercase() => c - b'A',
            _ => loc.parse().map_err(|_| bad())?,
        };
        let channel_kind = match parts.next() {
            Some("wired") => ChannelKind::Wired,
            Some("wireless") => ChannelKind::Wireless,
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(DomainLabel::new(day, location, channel_kind))
    }
}

/// One complex baseband burst.
#[derive(Debug, Clone, PartialEq)]
pub struct IQFrame {
    pub samples: Vec<Complex<f64>>,
    pub sample_rate_hz: f64,
    pub device_id: Option<u16>,
    pub domain: Option<DomainLabel>,
}

impl IQFrame {
    pub fn new(samples: Vec<Complex<f64>>, sample_rate_hz: f64) -> Result<Self> {
        let f = IQFrame {
            samples,
            sample_rate_hz,
            device_id: None,
            domain: None,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn with_labels(mut self, device_id: Option<u16>, domain: Option<DomainLabel>) -> Self {
        self.device_id = device_id;
        self.domain = domain;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::validation(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(Error::validation(format!("IQ sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn require_len(&self, expected: usize) -> Result<()> {
        if self.samples.len() != expected {
            return Err(Error::validation(format!(
                "frame has {} samples, expected {expected}",
                self.samples.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn scaled(&self, alpha: f64) -> IQFrame {
        IQFrame {
            samples: self.samples.iter().map(|c| c * alpha).collect(),
            ..self.clone()
        }
    }

    pub fn i_rail(&self) -> RealSequence<f64> {
        RealSequence::new(
            self.samples.iter().map(|c| c.re).collect(),
            self.sample_rate_hz,
        )
        .expect("frame invariants hold")
    }

    pub fn q_rail(&self) -> RealSequence<f64> {
        RealSequence::new(
            self.samples.iter().map(|c| c.im).collect(),
            self.sample_rate_hz,
        )
        .expect("frame invariants hold")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_label_text_round_trip() {
        for d in [
            DomainLabel::new(0, 0, ChannelKind::Wireless),
            DomainLabel::new(2, 3, ChannelKind::Wired),
            DomainLabel::new(1, 40, ChannelKind::Wireless),
        ] {
            let s = d.to_string();
            assert_eq!(s.parse::<DomainLabel>().unwrap(), d, "{s}");
        }
        assert_eq!(
            DomainLabel::new(0, 2, ChannelKind::Wireless).to_string(),
            "day0-locC-wireless"
        );
        assert!("day0-locA".parse::<DomainLabel>().is_err());
    }

    #[test]
    fn non_finite_samples_rejected() {
        let r = IQFrame::new(vec![Complex::new(f64::NAN, 0.0)], 1.0);
        assert!(r.is_err());
        assert!(IQFrame::new(vec![], 0.0).is_err());
    }
}
