//! Flat JSON configuration with validation and `HYPERNAV_*` environment
//! overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::advisor::{AdvisorEndpoint, PromptTemplates};
use crate::error::{Error, Result};
use crate::mapping::HeightClip;
use crate::perception::DetectorParams;
use crate::world::CameraIntrinsics;

pub const ENV_PREFIX: &str = "HYPERNAV_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Meters per map cell.
    pub resolution: f64,
    pub robot_radius: f64,
    /// Extra obstacle inflation beyond the robot radius used by the planner.
    pub inflation_margin: f64,
    pub hfov_deg: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub max_range: f64,
    pub mount_height: f64,
    pub height_clip_min: f64,
    pub height_clip_max: f64,
    pub min_visible_fraction: f64,
    pub max_det_range: f64,
    pub erosion_kernel: usize,
    pub erosion_iterations: usize,
    pub dilation_kernel: usize,
    pub dilation_iterations: usize,
    pub block_size: usize,
    pub vicinity_radius: f64,
    pub endurance_limit: usize,
    /// Distance at which a global destination counts as reached.
    pub reach_threshold: f64,
    pub success_radius: f64,
    pub max_steps: usize,
    /// Number of TurnLeft actions before the first global destination.
    pub initial_scan_turns: usize,
    pub advisor_url: Option<String>,
    /// Seconds.
    pub advisor_timeout: f64,
    pub advisor_max_retries: u32,
    pub prompt_block: String,
    pub prompt_exclusion: String,
    pub prompt_verify: String,
}

impl Default for Config {
    fn default() -> Self {
        let prompts = PromptTemplates::default();
        Self {
            resolution: 0.05,
            robot_radius: 0.18,
            inflation_margin: 0.0,
            hfov_deg: 79.0,
            image_width: 640,
            image_height: 480,
            max_range: 5.0,
            mount_height: 0.8,
            height_clip_min: 0.2,
            height_clip_max: 1.2,
            min_visible_fraction: 0.15,
            max_det_range: 4.0,
            erosion_kernel: 3,
            erosion_iterations: 1,
            dilation_kernel: 5,
            dilation_iterations: 3,
            block_size: 48,
            vicinity_radius: 1.0,
            endurance_limit: 60,
            reach_threshold: 0.5,
            success_radius: 1.0,
            max_steps: 500,
            initial_scan_turns: 12,
            advisor_url: None,
            advisor_timeout: 30.0,
            advisor_max_retries: 2,
            prompt_block: prompts.block,
            prompt_exclusion: prompts.exclusion,
            prompt_verify: prompts.verify,
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(field, format!("must be positive, got {v}")))
    }
}

fn odd_kernel(field: &'static str, k: usize) -> Result<()> {
    if k % 2 == 1 {
        Ok(())
    } else {
        Err(Error::param(field, format!("kernel size must be odd, got {k}")))
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        positive("resolution", self.resolution)?;
        positive("robot_radius", self.robot_radius)?;
        if !(self.inflation_margin >= 0.0) {
            return Err(Error::param("inflation_margin", "must be non-negative"));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(Error::param("hfov_deg", "must be in (0, 180)"));
        }
        if self.image_width == 0 {
            return Err(Error::param("image_width", "must be positive"));
        }
        if self.image_height == 0 {
            return Err(Error::param("image_height", "must be positive"));
        }
        positive("max_range", self.max_range)?;
        positive("mount_height", self.mount_height)?;
        if !(self.height_clip_min < self.height_clip_max) {
            return Err(Error::param("height_clip_min", "must be below height_clip_max"));
        }
        self.detector_params().validate()?;
        odd_kernel("erosion_kernel", self.erosion_kernel)?;
        odd_kernel("dilation_kernel", self.dilation_kernel)?;
        if self.block_size == 0 {
            return Err(Error::param("block_size", "must be positive"));
        }
        positive("vicinity_radius", self.vicinity_radius)?;
        positive("reach_threshold", self.reach_threshold)?;
        positive("success_radius", self.success_radius)?;
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be positive"));
        }
        positive("advisor_timeout", self.advisor_timeout)?;
        if let Some(url) = &self.advisor_url {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(Error::param("advisor_url", format!("expected an http(s) URL, got {url:?}")));
            }
        }
        if !self.prompt_block.contains("<GOAL>") {
            return Err(Error::param("prompt_block", "must contain <GOAL>"));
        }
        if !self.prompt_exclusion.contains("<IDS>") {
            return Err(Error::param("prompt_exclusion", "must contain <IDS>"));
        }
        if !self.prompt_verify.contains("<GOAL>") {
            return Err(Error::param("prompt_verify", "must contain <GOAL>"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    /// Read a config file (or defaults when `path` is `None`) and apply
    /// environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let base = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_json(&text)?
            }
            None => Self::default(),
        };
        base.with_overrides(std::env::vars())
    }

    /// Apply `HYPERNAV_<KEY>` overrides from `(name, value)` pairs. String
    /// keys take the raw value; other keys parse the value as JSON.
    pub fn with_overrides(&self, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        let map = value.as_object_mut().expect("config serializes to an object");
        for (name, raw) in vars {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            let Some(slot) = map.get_mut(&key) else {
                return Err(Error::Config(format!("unknown override {name}")));
            };
            let stringly = slot.is_string() || key == "advisor_url";
            *slot = if stringly {
                serde_json::Value::String(raw)
            } else {
                serde_json::from_str(&raw).map_err(|e| Error::Config(format!("bad value for {name}: {e}")))?
            };
        }
        let cfg: Config = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::from_fov(self.hfov_deg, self.image_width, self.image_height, self.max_range, self.mount_height)
            .expect("validated config yields valid intrinsics")
    }

    pub fn height_clip(&self) -> HeightClip {
        HeightClip { z_min: self.height_clip_min, z_max: self.height_clip_max }
    }

    pub fn detector_params(&self) -> DetectorParams {
        DetectorParams { min_visible_fraction: self.min_visible_fraction, max_det_range: self.max_det_range }
    }

    pub fn prompts(&self) -> PromptTemplates {
        PromptTemplates {
            block: self.prompt_block.clone(),
            exclusion: self.prompt_exclusion.clone(),
            verify: self.prompt_verify.clone(),
        }
    }

    pub fn endpoint(&self, base_url: &str) -> AdvisorEndpoint {
        AdvisorEndpoint {
            base_url: base_url.to_string(),
            timeout: self.advisor_timeout,
            max_retries: self.advisor_max_retries,
        }
    }

    /// Obstacle inflation used for planning, in cells.
    pub fn inflation_cells(&self) -> usize {
        crate::planner::inflation_radius_cells(self.robot_radius + self.inflation_margin, self.resolution)
    }
}
