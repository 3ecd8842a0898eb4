//! Human-readable JSON sidecar describing how a dataset file was produced.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{DatasetHeader, PayloadKind, Record};
use super::scenario::{FrameJob, ScenarioPlan, ScenarioSpec};
use crate::eps::EpsConfig;
use crate::error::{Error, Result};
use crate::sim::DeviceProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    pub payload_kind: PayloadKind,
    pub sample_rate_hz: f64,
    pub frame_len: usize,
    pub record_count: usize,
    pub seed: Option<u64>,
    pub population: Vec<DeviceProfile>,
    pub scenario: Option<ScenarioSpec>,
    pub frames_per_device_per_domain: Option<usize>,
    /// Pipeline settings for EPS payloads.
    #[serde(default)]
    pub eps: Option<EpsConfig>,
    /// Per-record synthesis parameters, in file order.
    #[serde(default)]
    pub records: Vec<FrameJob>,
}

impl Manifest {
    pub fn for_plan(
        plan: &ScenarioPlan,
        payload_kind: PayloadKind,
        eps: Option<EpsConfig>,
    ) -> Self {
        let frame_len = match (&eps, payload_kind) {
            (Some(e), PayloadKind::Eps) => e.n_fft,
            _ => plan.spec.frame_len,
        };
        Manifest {
            format: "EPSF".into(),
            version: super::format::VERSION,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            payload_kind,
            sample_rate_hz: plan.spec.sample_rate_hz,
            frame_len,
            record_count: plan.len(),
            seed: Some(plan.seed),
            population: plan.population.clone(),
            scenario: Some(plan.spec.clone()),
            frames_per_device_per_domain: Some(plan.frames_per_device_per_domain),
            eps,
            records: plan.jobs.clone(),
        }
    }

    /// `<dataset>.json` next to the dataset file.
    pub fn sidecar_path(dataset: &Path) -> PathBuf {
        let mut s = dataset.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    pub fn save(&self, dataset: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(Self::sidecar_path(dataset), text + "\n")?;
        Ok(())
    }

    pub fn load(dataset: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(Self::sidecar_path(dataset))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Header agreement, and every record's device id listed in the population.
    pub fn check(&self, header: &DatasetHeader, records: &[Record]) -> Result<()> {
        if header.payload_kind != self.payload_kind
            || header.frame_len as usize != self.frame_len
            || header.record_count as usize != self.record_count
            || header.sample_rate_hz != self.sample_rate_hz
        {
            return Err(Error::validation(
                "manifest disagrees with the dataset header",
            ));
        }
        for (i, r) in records.iter().enumerate() {
            if !self.population.iter().any(|d| d.device_id == r.device_id) {
                return Err(Error::validation(format!(
                    "record {i} has device id {} absent from the manifest",
                    r.device_id
                )));
            }
            if let Some(job) = self.records.get(i) {
                if job.device.device_id != r.device_id || job.domain != r.domain {
                    return Err(Error::validation(format!(
                        "record {i} labels disagree with the manifest"
                    )));
                }
            }
        }
        Ok(())
    }
}
