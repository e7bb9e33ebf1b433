//! Network scenarios: the declarative description of a random mmWave
//! network, resolved into a deployment sampler and a radio model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_deployment, Deployment, DeploymentConfig};
use crate::radio::RadioModel;

/// Link length used by the figure presets. Every beamwidth shares this
/// range; transmit power is raised where a wide beam could not otherwise
/// close a link this long.
pub const PRESET_LINK_LENGTH_MAX: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerPolicy {
    /// Transmit at the configured power regardless of beamwidth.
    Fixed,
    /// Raise the transmit power (never lower it) until a boresight-aligned,
    /// unblocked link of `link_length_max` meets the decode threshold.
    #[default]
    MatchRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub arena_width: f64,
    pub arena_height: f64,
    pub link_density: f64,
    pub obstacle_density: f64,
    pub beamwidth_deg: f64,
    /// `None` means the aligned range of the configured radio.
    pub link_length_max: Option<f64>,
    pub power_policy: PowerPolicy,
    pub fixed_link_count: Option<usize>,
    pub radio: RadioModel,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            arena_width: 10.0,
            arena_height: 10.0,
            link_density: 0.25,
            obstacle_density: 0.25,
            beamwidth_deg: 360.0,
            link_length_max: None,
            power_policy: PowerPolicy::MatchRange,
            fixed_link_count: None,
            radio: RadioModel::default(),
        }
    }
}

impl Scenario {
    /// 10 x 10 m arena, 0.25 obstacles per m^2, 2.5 mW, exponent 3,
    /// 10 dB decode threshold, preset link length.
    pub fn preset(link_density: f64, beamwidth_deg: f64) -> Self {
        Self {
            link_density,
            beamwidth_deg,
            link_length_max: Some(PRESET_LINK_LENGTH_MAX),
            ..Self::default()
        }
    }

    pub fn with_obstacle_density(mut self, density: f64) -> Self {
        self.obstacle_density = density;
        self
    }

    pub fn with_fixed_links(mut self, count: usize) -> Self {
        self.fixed_link_count = Some(count);
        self
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        self.radio.channel.validate()?;
        if !(self.beamwidth_deg > 0.0 && self.beamwidth_deg <= 360.0) {
            return Err(Error::config(
                "beamwidth_deg",
                format!("must lie in (0, 360], got {}", self.beamwidth_deg),
            ));
        }
        if !self.radio.radio.tx_power_dbm.is_finite() {
            return Err(Error::config("tx_power_dbm", "must be finite"));
        }
        let beamwidth = self.beamwidth_deg.to_radians();
        let mut model = self.radio;
        crate::radio::AntennaPattern::new(beamwidth, model.sidelobe_gain)?;

        let range = self
            .link_length_max
            .unwrap_or_else(|| model.aligned_range(beamwidth));
        if self.power_policy == PowerPolicy::MatchRange {
            let needed = model.tx_power_for_range(beamwidth, range);
            // ignore rounding noise when the range is already the radio's own
            if needed > model.radio.tx_power_dbm + 1e-9 {
                model.radio.tx_power_dbm = needed;
            }
        }

        let geometry = DeploymentConfig {
            arena_width: self.arena_width,
            arena_height: self.arena_height,
            link_density: self.link_density,
            obstacle_density: self.obstacle_density,
            link_length_max: range,
            beamwidth,
            penetration_loss_db: model.channel.penetration_loss_db,
            fixed_link_count: self.fixed_link_count,
            seed: 0,
        };
        geometry.validate()?;
        Ok(ResolvedScenario { geometry, model })
    }
}

/// A scenario with every default materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub geometry: DeploymentConfig,
    pub model: RadioModel,
}

impl ResolvedScenario {
    pub fn sample(&self, seed: u64) -> Deployment {
        let cfg = DeploymentConfig {
            seed,
            ..self.geometry.clone()
        };
        sample_deployment(&cfg).expect("resolved configs are valid")
    }
}
