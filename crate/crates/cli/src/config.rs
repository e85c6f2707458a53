//! Run configuration: one JSON document drives every stage.

use std::path::{Path, PathBuf};

use aerosynth::annotate::TransferParams;
use aerosynth::recon::NoiseParams;
use aerosynth::scene::{LayoutParams, PlacementRule};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Altitudes (m above ground) accepted without `--unsafe-params`.
pub const SAFE_ALTITUDE: (f64, f64) = (25.0, 120.0);

/// The bundled 200 x 200 m demo.
pub const DEMO_CONFIG: &str = include_str!("../configs/demo.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("config does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub stages: StageToggles,
    pub scene: SceneConfig,
    pub flight: FlightConfig,
    /// `noise.seed` is ignored: the reconstruction stream derives from `seed`.
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub transfer: TransferParams,
    #[serde(default)]
    pub postprocess: PostprocessConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Stages `all` runs; a disabled stage is skipped and later stages read
/// whatever it left on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageToggles {
    pub gen_scene: bool,
    pub plan_flight: bool,
    pub render: bool,
    pub reconstruct: bool,
    pub annotate: bool,
    pub postprocess: bool,
    pub eval: bool,
}

impl Default for StageToggles {
    fn default() -> Self {
        StageToggles {
            gen_scene: true,
            plan_flight: true,
            render: true,
            reconstruct: true,
            annotate: true,
            postprocess: true,
            eval: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Terrain size in metres, anchored at the origin.
    pub extent: [f64; 2],
    pub cell_size: f64,
    pub relief_amplitude: f64,
    /// Ditches and speed bumps per kilometre.
    #[serde(default)]
    pub ditch_rate: f64,
    #[serde(default)]
    pub bump_rate: f64,
    #[serde(default)]
    pub layout: LayoutParams,
    /// Ground within this distance of a building is dirt.
    #[serde(default = "default_dirt_buffer")]
    pub dirt_buffer: f64,
    pub placement: Vec<PlacementRule>,
}

fn default_dirt_buffer() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightConfig {
    /// Metres above the highest terrain point.
    pub altitude: f64,
    pub forward_overlap: f64,
    pub side_overlap: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub hfov_deg: f64,
    #[serde(default)]
    pub wind_sigma_position: f64,
    #[serde(default)]
    pub wind_sigma_angle_deg: f64,
    /// Free-form lighting notes kept for provenance; geometry ignores them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub spacing: f64,
    pub block_edge: f64,
    pub sphere_radius: f64,
    pub fixed_count: usize,
    pub histogram_bins: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig { spacing: 0.3, block_edge: 50.0, sphere_radius: 18.0, fixed_count: 40_960, histogram_bins: 10 }
    }
}

/// With neither path set, `eval` scores the annotated cloud against the
/// labels of the surfaces its points were sampled from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub gt: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    /// Count predicted classes absent from the ground truth in the AP mean.
    pub include_prediction_only_classes: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn demo() -> Self {
        Self::from_json(DEMO_CONFIG).expect("bundled demo config parses")
    }

    /// Normalized form: every field explicit, keys in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self, unsafe_params: bool) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.scene;
        if !(s.extent[0] > 0.0 && s.extent[1] > 0.0 && s.cell_size > 0.0) {
            return bad("scene extent and cell_size must be positive".into());
        }
        if !(s.relief_amplitude >= 0.0 && s.ditch_rate >= 0.0 && s.bump_rate >= 0.0 && s.dirt_buffer >= 0.0) {
            return bad("relief, ditch/bump rates and dirt_buffer must be non-negative".into());
        }
        let l = &s.layout;
        if !(l.block_size > l.road_width && l.road_width > 0.0) {
            return bad("layout block_size must exceed a positive road_width".into());
        }
        if !(l.footprint_size[0] > 0.0 && l.footprint_size[1] >= l.footprint_size[0])
            || !(l.height_range[0] > 0.0 && l.height_range[1] >= l.height_range[0])
        {
            return bad("layout footprint_size and height_range must be positive and ordered".into());
        }
        for (i, rule) in s.placement.iter().enumerate() {
            rule.validate(i).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }

        let f = &self.flight;
        let (lo, hi) = SAFE_ALTITUDE;
        if !(f.altitude > 0.0 && f.altitude.is_finite()) {
            return bad(format!("altitude {} must be positive", f.altitude));
        }
        if !unsafe_params && !(lo..=hi).contains(&f.altitude) {
            return bad(format!("altitude {} m outside [{lo}, {hi}] (pass --unsafe-params to allow)", f.altitude));
        }
        for (name, o) in [("forward_overlap", f.forward_overlap), ("side_overlap", f.side_overlap)] {
            if !(0.0..1.0).contains(&o) {
                return bad(format!("{name} {o} must be in [0, 1)"));
            }
        }
        if f.image_width == 0 || f.image_height == 0 || !(f.hfov_deg > 0.0 && f.hfov_deg < 180.0) {
            return bad("image size must be positive and hfov_deg in (0, 180)".into());
        }
        if !(f.wind_sigma_position >= 0.0 && f.wind_sigma_angle_deg >= 0.0) {
            return bad("wind sigmas must be non-negative".into());
        }

        self.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.transfer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let p = &self.postprocess;
        if !(p.spacing > 0.0 && p.block_edge > 0.0 && p.sphere_radius > 0.0) || p.fixed_count == 0 || p.histogram_bins == 0 {
            return bad("postprocess parameters must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if self.eval.gt.is_some() != self.eval.pred.is_some() {
            return bad("eval needs both gt and pred, or neither".into());
        }
        Ok(())
    }
}
