use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::impairments::DeviceProfile;
use crate::error::{Error, Result};

/// Ranges for drawing a synthetic device population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub device_count: usize,
    /// Smallest CFO magnitude on the grid.
    pub cfo_min_hz: f64,
    /// Spacing of CFO magnitudes on the grid.
    pub cfo_step_hz: f64,
    /// Largest CFO magnitude allowed on the grid.
    pub cfo_max_hz: f64,
    pub iq_gain_db_max: f64,
    pub iq_phase_deg_max: f64,
    pub dc_offset_max: f64,
    pub phase_noise_std_rad: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            device_count: 15,
            cfo_min_hz: 2_000.0,
            cfo_step_hz: 1_500.0,
            cfo_max_hz: 25_000.0,
            iq_gain_db_max: 0.5,
            iq_phase_deg_max: 2.0,
            dc_offset_max: 0.01,
            phase_noise_std_rad: 1e-4,
        }
    }
}

impl PopulationConfig {
    /// CFO magnitudes available to the draw.
    pub fn cfo_grid(&self) -> Vec<f64> {
        let mut g = Vec::new();
        let mut k = 0;
        loop {
            let f = self.cfo_min_hz + k as f64 * self.cfo_step_hz;
            if f > self.cfo_max_hz + 1e-9 {
                break;
            }
            g.push(f);
            k += 1;
        }
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.device_count == 0 {
            return Err(Error::validation("population needs at least one device"));
        }
        if !(self.cfo_step_hz > 0.0 && self.cfo_min_hz >= 0.0 && self.cfo_max_hz >= self.cfo_min_hz)
        {
            return Err(Error::validation(
                "CFO grid needs step > 0 and 0 <= min <= max",
            ));
        }
        let n = self.cfo_grid().len();
        if n < self.device_count {
            return Err(Error::validation(format!(
                "CFO grid has {n} magnitudes but {} devices were requested",
                self.device_count
            )));
        }
        if self.iq_gain_db_max < 0.0
            || self.iq_phase_deg_max < 0.0
            || self.dc_offset_max < 0.0
            || self.phase_noise_std_rad < 0.0
        {
            return Err(Error::validation("impairment ranges must be nonnegative"));
        }
        Ok(())
    }
}

fn draw_device<R: Rng>(
    rng: &mut R,
    id: u16,
    cfo_mag: f64,
    cfg: &PopulationConfig,
) -> DeviceProfile {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let gain = if cfg.iq_gain_db_max > 0.0 {
        rng.random_range(-cfg.iq_gain_db_max..=cfg.iq_gain_db_max)
    } else {
        0.0
    };
    let phase_deg = if cfg.iq_phase_deg_max > 0.0 {
        rng.random_range(-cfg.iq_phase_deg_max..=cfg.iq_phase_deg_max)
    } else {
        0.0
    };
    let dc_r = cfg.dc_offset_max * rng.random::<f64>();
    let dc_a = std::f64::consts::TAU * rng.random::<f64>();
    DeviceProfile {
        device_id: id,
        cfo_hz: sign * cfo_mag,
        iq_gain_imbalance_db: gain,
        iq_phase_imbalance_rad: phase_deg.to_radians(),
        dc_offset: Complex::from_polar(dc_r, dc_a),
        phase_noise_std_rad: cfg.phase_noise_std_rad,
        stabilized: true,
    }
}

/// Devices with CFO magnitudes drawn without replacement from the grid.
///
/// The envelope is blind to the CFO sign, so distinctness is enforced on
/// magnitudes; signs are random.
pub fn draw_population(cfg: &PopulationConfig, seed: u64) -> Result<Vec<DeviceProfile>> {
    cfg.validate()?;
    let mut rng = crate::rng::rng(seed);
    let mut grid = cfg.cfo_grid();
    grid.shuffle(&mut rng);
    Ok(grid
        .into_iter()
        .take(cfg.device_count)
        .enumerate()
        .map(|(i, f)| draw_device(&mut rng, i as u16, f, cfg))
        .collect())
}

/// Unenrolled transmitters whose CFO magnitudes sit at least `gap_hz` beyond
/// the population's grid, spaced `gap_hz` apart. Ids start at `first_id`.
pub fn draw_rogues(
    cfg: &PopulationConfig,
    count: usize,
    gap_hz: f64,
    first_id: u16,
    seed: u64,
) -> Vec<DeviceProfile> {
    let mut rng = crate::rng::rng(seed);
    let top = cfg.cfo_grid().last().copied().unwrap_or(cfg.cfo_min_hz);
    (0..count)
        .map(|i| {
            let mag = top + gap_hz * (i as f64 + 1.0);
            draw_device(&mut rng, first_id + i as u16, mag, cfg)
        })
        .collect()
}
