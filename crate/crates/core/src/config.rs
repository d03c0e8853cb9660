//! Analysis and mapping constants.
//!
//! Defaults can be overridden by a TOML file named in `TAILORS_CONFIG`:
//!
//! ```toml
//! [features]
//! brightness_cutoff_hz = 1500.0
//! warmth_band_hz = [50.0, 700.0]
//!
//! [mapping]
//! fps = 30.0
//! smoothing_alpha = 0.2
//! hardness_thresholds = [0.3333333333333333, 0.6666666666666666]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "TAILORS_CONFIG";

/// Upper edges of the 24 critical bands (Zwicker), preceded by 0 Hz.
pub const ZWICKER_BARK_EDGES_HZ: [f64; 25] = [
    0.0, 100.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0, 1480.0, 1720.0,
    2000.0, 2320.0, 2700.0, 3150.0, 3700.0, 4400.0, 5300.0, 6400.0, 7700.0, 9500.0, 12000.0,
    15500.0,
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub window_size: usize,
    pub hop: usize,
    /// Peaks quieter than this many dB below the frame maximum are ignored.
    pub peak_floor_db: f64,
    pub max_peaks: usize,
    pub brightness_cutoff_hz: f64,
    /// Inclusive band.
    pub warmth_band_hz: [f64; 2],
    pub depth_cutoff_hz: f64,
    /// 25 increasing edges delimiting the 24 Bark bands.
    pub bark_edges_hz: Vec<f64>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window_size: 4096,
            hop: 1024,
            peak_floor_db: -60.0,
            max_peaks: 32,
            brightness_cutoff_hz: 1500.0,
            warmth_band_hz: [50.0, 700.0],
            depth_cutoff_hz: 200.0,
            bark_edges_hz: ZWICKER_BARK_EDGES_HZ.to_vec(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.hop == 0 || self.hop > self.window_size {
            return bad(format!("need 0 < hop ({}) <= window_size ({})", self.hop, self.window_size));
        }
        if !(self.peak_floor_db < 0.0) {
            return bad(format!("peak_floor_db must be negative, got {}", self.peak_floor_db));
        }
        if self.max_peaks == 0 {
            return bad("max_peaks must be positive".into());
        }
        let [lo, hi] = self.warmth_band_hz;
        if !(0.0 <= lo && lo < hi) {
            return bad(format!("warmth band [{lo}, {hi}] is empty"));
        }
        if !(self.brightness_cutoff_hz > 0.0 && self.depth_cutoff_hz > 0.0) {
            return bad("cutoff frequencies must be positive".into());
        }
        if self.bark_edges_hz.len() != 25 || self.bark_edges_hz.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("bark_edges_hz needs 25 strictly increasing values".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub fps: f64,
    /// Weight of the newest sample in the exponential smoother; 1 disables smoothing.
    pub smoothing_alpha: f64,
    /// Normalized hardness below the first value is cloud, below the second water, else ice.
    pub hardness_thresholds: [f64; 2],
    /// Hue at warmth 0.
    pub hue_cold_deg: f64,
    /// Hue at warmth 1.
    pub hue_warm_deg: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            fps: 30.0,
            smoothing_alpha: 0.2,
            hardness_thresholds: [1.0 / 3.0, 2.0 / 3.0],
            hue_cold_deg: 270.0,
            hue_warm_deg: 30.0,
        }
    }
}

/// Largest frame rate whose timestamps stay distinct at six decimals.
pub const MAX_FPS: f64 = 1000.0;

impl MappingConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.fps > 0.0 && self.fps <= MAX_FPS) {
            return bad(format!("fps must be in (0, {MAX_FPS}], got {}", self.fps));
        }
        if !(0.0..=1.0).contains(&self.smoothing_alpha) {
            return bad(format!("smoothing_alpha must be in [0, 1], got {}", self.smoothing_alpha));
        }
        let [lo, hi] = self.hardness_thresholds;
        if !(0.0 < lo && lo < hi && hi <= 1.0) {
            return bad(format!("hardness thresholds [{lo}, {hi}] must satisfy 0 < lo < hi <= 1"));
        }
        for hue in [self.hue_cold_deg, self.hue_warm_deg] {
            if !(0.0..360.0).contains(&hue) {
                return bad(format!("hue endpoint {hue} outside [0, 360)"));
            }
        }
        if !(self.hue_warm_deg < self.hue_cold_deg) {
            return bad("hue_warm_deg must be below hue_cold_deg so hue falls with warmth".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub features: FeatureConfig,
    pub mapping: MappingConfig,
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Loads the file named by `TAILORS_CONFIG`, or the defaults when unset.
    pub fn from_env() -> Result<Self, ConfigError> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) if !path.is_empty() => Self::load(PathBuf::from(path)),
            _ => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.features.validate()?;
        self.mapping.validate()
    }
}
