//! Synthetic capture campaigns: fixed locations, random placement, and
//! repeated days. A scenario is planned up front (labels, channel draws,
//! seeds) and frames are synthesized on demand so large campaigns never sit
//! in memory.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::{DatasetHeader, DatasetWriter, PayloadKind, Record};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::sim::{
    apply_channel, apply_impairments, generate_dsss_baseband, random_payload, ChannelKind,
    ChannelProfile, DeviceProfile, DomainLabel, DsssConfig, IQFrame, DEFAULT_SAMPLE_RATE_HZ,
    FRAME_LEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    FixedLocation,
    RandomLocation,
    CrossDay,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::FixedLocation,
        ScenarioKind::RandomLocation,
        ScenarioKind::CrossDay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FixedLocation => "fixed-location",
            ScenarioKind::RandomLocation => "random-location",
            ScenarioKind::CrossDay => "cross-day",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::validation(format!(
                "unknown scenario `{s}` (expected fixed-location, random-location or cross-day)"
            ))
            })
    }
}

/// Capture conditions. The receiver has a fixed noise floor, so a weaker
/// path (smaller amplitude scale) also means a lower SNR:
/// `snr = base_snr_db + 20·log10(scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub sample_rate_hz: f64,
    pub frame_len: usize,
    /// SNR at unit amplitude scale; `None` disables noise.
    pub base_snr_db: Option<f64>,
    /// Amplitude scale per fixed location (A, B, C, ...).
    pub location_scales: Vec<f64>,
    /// Scale range for random placement.
    pub random_scale: [f64; 2],
    pub max_delay_samples: usize,
    pub random_phase: bool,
    pub days: u8,
    /// Location used on every day of a cross-day campaign.
    pub day_location: u8,
    /// Per-day relative CFO wander, uniform in ±this fraction.
    pub day_cfo_jitter: f64,
    pub channel_kind: ChannelKind,
    pub payload_bits: usize,
    pub payload_seed: u64,
    pub samples_per_chip: usize,
    pub multipath: Option<Vec<num_complex::Complex<f64>>>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::FixedLocation,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            frame_len: FRAME_LEN,
            base_snr_db: Some(30.0),
            location_scales: vec![1.0, 0.6, 0.35],
            random_scale: [0.3, 1.0],
            max_delay_samples: 200,
            random_phase: true,
            days: 3,
            day_location: 0,
            day_cfo_jitter: 0.01,
            channel_kind: ChannelKind::Wireless,
            payload_bits: 200,
            payload_seed: 0x5eed,
            samples_per_chip: 2,
            multipath: None,
        }
    }
}

impl ScenarioSpec {
    pub fn of_kind(kind: ScenarioKind) -> Self {
        ScenarioSpec {
            kind,
            ..ScenarioSpec::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: ScenarioSpec = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) || self.frame_len == 0 {
            return Err(Error::validation(
                "sample rate and frame length must be positive",
            ));
        }
        if self.location_scales.is_empty()
            || self
                .location_scales
                .iter()
                .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::validation(
                "location scales must be positive and nonempty",
            ));
        }
        let [lo, hi] = self.random_scale;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::validation(format!(
                "random scale range [{lo}, {hi}] is invalid"
            )));
        }
        if self.days == 0 || self.day_location as usize >= self.location_scales.len() {
            return Err(Error::validation(
                "cross-day needs ≥ 1 day and an existing day_location",
            ));
        }
        if !(0.0..1.0).contains(&self.day_cfo_jitter) {
            return Err(Error::validation("day CFO jitter must lie in [0, 1)"));
        }
        if self.max_delay_samples >= self.frame_len {
            return Err(Error::validation(
                "maximum delay must be shorter than the frame",
            ));
        }
        if self.base_snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::validation("base SNR must be finite"));
        }
        Ok(())
    }

    /// Location index used for randomly placed captures (after the fixed ones).
    pub fn random_location_index(&self) -> u8 {
        self.location_scales.len() as u8
    }

    pub fn fixed_location_label(&self, location: u8) -> DomainLabel {
        DomainLabel::new(0, location, self.channel_kind)
    }

    /// Domain labels emitted by this scenario, in record order.
    pub fn domains(&self) -> Vec<DomainLabel> {
        match self.kind {
            ScenarioKind::FixedLocation => (0..self.location_scales.len() as u8)
                .map(|l| DomainLabel::new(0, l, self.channel_kind))
                .collect(),
            ScenarioKind::RandomLocation => vec![DomainLabel::new(
                0,
                self.random_location_index(),
                self.channel_kind,
            )],
            ScenarioKind::CrossDay => (0..self.days)
                .map(|d| DomainLabel::new(d, self.day_location, self.channel_kind))
                .collect(),
        }
    }

    fn snr_for(&self, scale: f64) -> Option<f64> {
        self.base_snr_db.map(|b| b + 20.0 * scale.log10())
    }
}

/// Everything needed to synthesize one labelled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameJob {
    pub device: DeviceProfile,
    pub domain: DomainLabel,
    pub impairment_seed: u64,
    pub channel: ChannelProfile,
}

/// Planned campaign; frames are generated lazily and deterministically.
#[derive(Debug, Clone)]
pub struct ScenarioPlan {
    pub spec: ScenarioSpec,
    pub population: Vec<DeviceProfile>,
    pub frames_per_device_per_domain: usize,
    pub seed: u64,
    pub jobs: Vec<FrameJob>,
    baseband: IQFrame,
}

const STREAM_DAY: u64 = 1;
const STREAM_FRAME: u64 = 2;

/// Plan a scenario. Records are ordered by domain, then device, then frame.
pub fn build_scenario(
    population: &[DeviceProfile],
    spec: &ScenarioSpec,
    frames_per_device_per_domain: usize,
    seed: u64,
) -> Result<ScenarioPlan> {
    spec.validate()?;
    if population.is_empty() {
        return Err(Error::validation("population is empty"));
    }
    if frames_per_device_per_domain == 0 {
        return Err(Error::validation(
            "frames per device per domain must be positive",
        ));
    }
    let mut ids: Vec<u16> = population.iter().map(|d| d.device_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation("population has duplicate device ids"));
    }
    for d in population {
        d.validate(spec.sample_rate_hz)?;
    }
    let cfg = DsssConfig {
        samples_per_chip: spec.samples_per_chip,
        target_len: spec.frame_len,
        sample_rate_hz: spec.sample_rate_hz,
        smooth_chips: false,
    };
    let baseband =
        generate_dsss_baseband(&random_payload(spec.payload_bits, spec.payload_seed), &cfg)?;

    let mut jobs =
        Vec::with_capacity(spec.domains().len() * population.len() * frames_per_device_per_domain);
    for domain in spec.domains() {
        for dev in population {
            let mut device = *dev;
            if spec.kind == ScenarioKind::CrossDay && spec.day_cfo_jitter > 0.0 {
                let mut r = rng(derive_seed(
                    seed,
                    &[STREAM_DAY, domain.day as u64, dev.device_id as u64],
                ));
                device.cfo_hz *= 1.0 + r.random_range(-spec.day_cfo_jitter..=spec.day_cfo_jitter);
            }
            for k in 0..frames_per_device_per_domain {
                let frame_seed = derive_seed(
                    seed,
                    &[
                        STREAM_FRAME,
                        u64::from_le_bytes([domain.day, domain.location, 0, 0, 0, 0, 0, 0]),
                        dev.device_id as u64,
                        k as u64,
                    ],
                );
                let mut r = rng(frame_seed);
                let scale = match spec.kind {
                    ScenarioKind::FixedLocation => spec.location_scales[domain.location as usize],
                    ScenarioKind::RandomLocation => {
                        r.random_range(spec.random_scale[0]..=spec.random_scale[1])
                    }
                    ScenarioKind::CrossDay => spec.location_scales[spec.day_location as usize],
                };
                let channel = ChannelProfile {
                    snr_db: spec.snr_for(scale),
                    amplitude_scale: scale,
                    delay_samples: r.random_range(0..=spec.max_delay_samples),
                    phase_rad: if spec.random_phase {
                        r.random_range(0.0..TAU)
                    } else {
                        0.0
                    },
                    multipath: spec.multipath.clone(),
                    seed: r.random(),
                };
                jobs.push(FrameJob {
                    device,
                    domain,
                    impairment_seed: r.random(),
                    channel,
                });
            }
        }
    }
    Ok(ScenarioPlan {
        spec: spec.clone(),
        population: population.to_vec(),
        frames_per_device_per_domain,
        seed,
        jobs,
        baseband,
    })
}

impl ScenarioPlan {
    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn frame(&self, i: usize) -> Result<IQFrame> {
        let job = self.jobs.get(i).ok_or_else(|| {
            Error::validation(format!(
                "frame {i} out of range ({} planned)",
                self.jobs.len()
            ))
        })?;
        let r = apply_impairments(&self.baseband, &job.device, job.impairment_seed)?;
        Ok(apply_channel(&r, &job.channel)?
            .with_labels(Some(job.device.device_id), Some(job.domain)))
    }

    /// Synthesize every frame and map it through `f` in parallel, keeping
    /// record order. Only the mapped values are retained.
    pub fn map_frames<X, F>(&self, f: F) -> Result<Vec<X>>
    where
        X: Send,
        F: Fn(&IQFrame) -> Result<X> + Sync,
    {
        (0..self.jobs.len())
            .into_par_iter()
            .map(|i| self.frame(i).and_then(|fr| f(&fr)))
            .collect()
    }

    /// As [`ScenarioPlan::map_frames`], over the listed record indices only.
    pub fn map_frames_at<X, F>(&self, indices: &[usize], f: F) -> Result<Vec<X>>
    where
        X: Send,
        F: Fn(&IQFrame) -> Result<X> + Sync,
    {
        indices
            .par_iter()
            .map(|&i| self.frame(i).and_then(|fr| f(&fr)))
            .collect()
    }

    /// Indices of jobs in `domain`.
    pub fn indices_in(&self, domain: DomainLabel) -> Vec<usize> {
        self.jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.domain == domain)
            .map(|(i, _)| i)
            .collect()
    }

    /// Stream every frame to an IQ dataset file.
    pub fn write_iq(&self, path: &Path) -> Result<()> {
        let header = DatasetHeader::new(
            PayloadKind::Iq,
            self.spec.sample_rate_hz,
            self.spec.frame_len,
            self.len(),
        )?;
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut w = DatasetWriter::new(file, header)?;
        const CHUNK: usize = 64;
        for start in (0..self.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(self.len());
            let recs: Vec<Record> = (start..end)
                .into_par_iter()
                .map(|i| self.frame(i).and_then(|f| Record::from_frame(&f)))
                .collect::<Result<_>>()?;
            for r in &recs {
                w.write(r)?;
            }
        }
        w.finish()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::read_dataset;
    use crate::sim::{draw_population, PopulationConfig};
    use std::collections::BTreeMap;

    fn pop(n: usize) -> Vec<DeviceProfile> {
        let cfg = PopulationConfig {
            device_count: n,
            ..PopulationConfig::default()
        };
        draw_population(&cfg, 3).unwrap()
    }

    #[test]
    fn fixed_location_label_histogram() {
        let plan = build_scenario(&pop(15), &ScenarioSpec::default(), 100, 1).unwrap();
        assert_eq!(plan.len(), 4500);
        let mut hist: BTreeMap<(u16, u8), usize> = BTreeMap::new();
        for j in &plan.jobs {
            *hist
                .entry((j.device.device_id, j.domain.location))
                .or_default() += 1;
        }
        assert_eq!(hist.len(), 45);
        assert!(hist.values().all(|&c| c == 100));
        for j in &plan.jobs {
            let want = [1.0, 0.6, 0.35][j.domain.location as usize];
            assert_eq!(j.channel.amplitude_scale, want);
            assert!(j.channel.delay_samples <= 200);
        }
    }

    #[test]
    fn random_location_scales_within_range() {
        let spec = ScenarioSpec::of_kind(ScenarioKind::RandomLocation);
        let plan = build_scenario(&pop(4), &spec, 50, 2).unwrap();
        let scales: Vec<f64> = plan
            .jobs
            .iter()
            .map(|j| j.channel.amplitude_scale)
            .collect();
        assert!(scales.iter().all(|s| (0.3..=1.0).contains(s)));
        let (lo, hi) = scales
            .iter()
            .fold((1.0f64, 0.0f64), |(a, b), s| (a.min(*s), b.max(*s)));
        assert!(lo < 0.4 && hi > 0.9, "scales span [{lo}, {hi}]");
        assert!(plan.jobs.iter().all(|j| j.domain.location == 3));
    }

    #[test]
    fn cross_day_jitters_cfo_per_day() {
        let p = pop(3);
        let spec = ScenarioSpec::of_kind(ScenarioKind::CrossDay);
        let plan = build_scenario(&p, &spec, 2, 5).unwrap();
        assert_eq!(plan.len(), 3 * 3 * 2);
        for j in &plan.jobs {
            let base = p
                .iter()
                .find(|d| d.device_id == j.device.device_id)
                .unwrap()
                .cfo_hz;
            assert!((j.device.cfo_hz / base - 1.0).abs() <= 0.01 + 1e-12);
        }
        let days: Vec<u8> = plan.jobs.iter().map(|j| j.domain.day).collect();
        assert_eq!(days.iter().copied().max(), Some(2));
    }

    #[test]
    fn unknown_scenario_name_rejected() {
        assert!("diagonal".parse::<ScenarioKind>().is_err());
        assert_eq!(
            "cross-day".parse::<ScenarioKind>().unwrap(),
            ScenarioKind::CrossDay
        );
        assert!(ScenarioSpec::from_toml("kind = \"diagonal\"").is_err());
        assert!(ScenarioSpec::from_toml("kind = \"cross-day\"\nbogus = 1").is_err());
        assert_eq!(
            ScenarioSpec::from_toml("kind = \"random-location\"")
                .unwrap()
                .kind,
            ScenarioKind::RandomLocation
        );
    }

    #[test]
    fn same_seed_gives_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ScenarioSpec {
            location_scales: vec![1.0],
            ..ScenarioSpec::default()
        };
        let paths: Vec<_> = (0..2)
            .map(|i| dir.path().join(format!("{i}.epsf")))
            .collect();
        for p in &paths {
            build_scenario(&pop(2), &spec, 2, 9)
                .unwrap()
                .write_iq(p)
                .unwrap();
        }
        assert_eq!(
            std::fs::read(&paths[0]).unwrap(),
            std::fs::read(&paths[1]).unwrap()
        );
        let (h, recs) = read_dataset(&paths[0]).unwrap();
        assert_eq!((h.record_count, recs.len()), (4, 4));
        let ids: Vec<u16> = pop(2).iter().map(|d| d.device_id).collect();
        assert!(recs.iter().all(|r| ids.contains(&r.device_id)));
    }

    #[test]
    fn frames_are_labelled_and_reproducible() {
        let plan = build_scenario(&pop(2), &ScenarioSpec::default(), 1, 4).unwrap();
        let a = plan.frame(3).unwrap();
        assert_eq!(a, plan.frame(3).unwrap());
        assert_eq!(a.device_id, Some(plan.jobs[3].device.device_id));
        assert_eq!(a.domain, Some(plan.jobs[3].domain));
        assert!(plan.frame(99).is_err());
        let powers = plan.map_frames(|f| Ok(f.mean_power())).unwrap();
        assert_eq!(powers.len(), plan.len());
    }

    #[test]
    fn empty_population_rejected() {
        assert!(build_scenario(&[], &ScenarioSpec::default(), 1, 0).is_err());
    }
}
