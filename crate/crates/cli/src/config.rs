use std::path::{Path, PathBuf};

use eps_core::acceptance::AcceptanceConfig;
use eps_core::dataset::ScenarioSpec;
use eps_core::eps::EpsConfig;
use eps_core::eval::EvalConfig;
use eps_core::registry::RegistryConfig;
use eps_core::sim::PopulationConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Directory searched for `epsid.toml` and for relative `--config` paths.
pub const CONFIG_DIR_ENV: &str = "EPSID_CONFIG_DIR";
pub const DEFAULT_CONFIG_NAME: &str = "epsid.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub frames_per_device: usize,
    pub population: PopulationConfig,
    pub scenario: ScenarioSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            frames_per_device: 100,
            population: PopulationConfig::default(),
            scenario: ScenarioSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrySection {
    pub min_enroll_frames: usize,
    /// Continuous-authentication window in frames.
    pub window: usize,
    /// Fixed threshold; `None` uses each template's calibrated threshold.
    pub tau: Option<f64>,
    pub eps: EpsConfig,
}

impl Default for RegistrySection {
    fn default() -> Self {
        RegistrySection {
            min_enroll_frames: 20,
            window: 5,
            tau: None,
            eps: EpsConfig::default(),
        }
    }
}

impl RegistrySection {
    pub fn registry_config(&self) -> RegistryConfig {
        RegistryConfig {
            min_enroll_frames: self.min_enroll_frames,
            eps: self.eps.clone(),
        }
    }
}

/// Everything a run reads from its config file, after flag overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; it replaces the per-section seeds when set.
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Acceptance profile name (`full` or `quick`).
    pub profile: Option<String>,
    pub simulate: SimulateConfig,
    /// Model, fold and feature settings for `eps`, `train` and `evaluate`.
    pub eval: EvalConfig,
    pub registry: RegistrySection,
    pub accept: AcceptanceConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Resolve and read the config file, if any.
    pub fn load(explicit: Option<&Path>) -> CliResult<(Self, Option<PathBuf>)> {
        let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
        let path = match explicit {
            Some(p) if p.exists() => Some(p.to_path_buf()),
            Some(p) => match dir.as_ref().map(|d| d.join(p)).filter(|c| c.exists()) {
                Some(c) => Some(c),
                None => {
                    return Err(CliError::Config(format!(
                        "config file {} not found",
                        p.display()
                    )))
                }
            },
            None => dir
                .map(|d| d.join(DEFAULT_CONFIG_NAME))
                .filter(|c| c.exists()),
        };
        let Some(path) = path else {
            return Ok((RunConfig::default(), None));
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg =
            Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, Some(path)))
    }

    /// Apply the master seed everywhere a seed is consumed. Without one,
    /// each section keeps its own default.
    pub fn resolve_seed(&mut self, flag: Option<u64>) {
        if let Some(seed) = flag.or(self.seed) {
            self.seed = Some(seed);
            self.eval.seed = seed;
            self.accept.seed = seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_fill_defaults() {
        let c = RunConfig::parse(
            "seed = 3\n[simulate]\nframes_per_device = 7\n[simulate.scenario]\nkind = \"cross-day\"\n[eval]\nfolds = 4\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.simulate.frames_per_device, 7);
        assert_eq!(c.simulate.population.device_count, 15);
        assert_eq!(c.eval.folds, 4);
        assert_eq!(c.eval.eps.n_fft, 4096);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [
            "sed = 1",
            "[simulate]\nframes = 3",
            "[eval.train]\nlr = 0.1",
            "[registry.eps]\nnfft = 2",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn master_seed_reaches_sections() {
        let mut c = RunConfig::default();
        let defaults = (c.eval.seed, c.accept.seed);
        c.resolve_seed(None);
        assert_eq!(
            (c.seed, c.eval.seed, c.accept.seed),
            (None, defaults.0, defaults.1)
        );
        c.seed = Some(9);
        c.resolve_seed(None);
        assert_eq!((c.eval.seed, c.accept.seed), (9, 9));
        c.resolve_seed(Some(4));
        assert_eq!((c.seed, c.eval.seed, c.accept.seed), (Some(4), 4, 4));
    }
}
