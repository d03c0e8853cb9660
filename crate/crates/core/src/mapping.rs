//! Normalized timbre to visual parameters.
//!
//! Vocal object: roughness scatters the sub-spheres, sharpness blends the
//! material toward metal, warmth moves the hue from violet toward orange.
//! Background: hardness picks cloud / water / ice, roughness drives the
//! surface, warmth the hue, brightness the value and depth the saturation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::MappingConfig;
use crate::features::{TimbralFrame, TimbralTimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("cannot normalize an empty series")]
    EmptySeries,
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error(transparent)]
    Config(#[from] ConfigErrorMessage),
}

/// Config validation failure carried as text so `MappingError` stays `PartialEq`.
#[derive(Debug, Error, PartialEq)]
#[error("{0}")]
pub struct ConfigErrorMessage(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocalVisualParams {
    pub dispersion: f64,
    pub metalness: f64,
    pub hue_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundKind {
    Cloud,
    Water,
    Ice,
}

impl BackgroundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackgroundKind::Cloud => "cloud",
            BackgroundKind::Water => "water",
            BackgroundKind::Ice => "ice",
        }
    }

    /// Cloud < Water < Ice.
    pub fn ordinal(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundVisualParams {
    pub kind: BackgroundKind,
    pub surface_roughness: f64,
    pub hue_deg: f64,
    pub value: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualFrame {
    pub t: f64,
    pub object: VocalVisualParams,
    pub background: BackgroundVisualParams,
}

fn unit(name: &'static str, value: f64) -> Result<f64, MappingError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MappingError::OutOfRange { name, value })
    }
}

/// `(x - min) / (max - min)`; a constant series maps to 0.5 everywhere.
pub fn min_max_normalize(series: &[f64]) -> Result<Vec<f64>, MappingError> {
    let bounds = Bounds::of(series)?;
    Ok(series.iter().map(|x| bounds.normalize(*x)).collect())
}

/// Extremes of one raw channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn of(series: &[f64]) -> Result<Self, MappingError> {
        if series.is_empty() {
            return Err(MappingError::EmptySeries);
        }
        if series.iter().any(|x| !x.is_finite()) {
            return Err(MappingError::NonFinite("series"));
        }
        let min = series.iter().copied().fold(f64::INFINITY, f64::min);
        let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { min, max })
    }

    fn merge(self, other: Self) -> Self {
        Self {
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    /// Values outside the bounds are clamped.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// Per-channel bounds, either of one track or of a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelBounds(pub [Bounds; 8]);

impl ChannelBounds {
    pub fn of_track(series: &TimbralTimeSeries) -> Result<Self, MappingError> {
        let mut out = [Bounds { min: 0.0, max: 0.0 }; 8];
        for (i, b) in out.iter_mut().enumerate() {
            *b = Bounds::of(&series.channel(i))?;
        }
        Ok(Self(out))
    }

    /// Bounds spanning every track, for corpus-wide normalization.
    pub fn of_corpus<'a>(
        tracks: impl IntoIterator<Item = &'a TimbralTimeSeries>,
    ) -> Result<Self, MappingError> {
        let mut acc: Option<ChannelBounds> = None;
        for track in tracks {
            let b = Self::of_track(track)?;
            acc = Some(match acc {
                None => b,
                Some(a) => Self(std::array::from_fn(|i| a.0[i].merge(b.0[i]))),
            });
        }
        acc.ok_or(MappingError::EmptySeries)
    }
}

/// Linear hue ramp from `hue_cold_deg` at warmth 0 to `hue_warm_deg` at 1.
pub fn hue_from_warmth(w: f64, config: &MappingConfig) -> Result<f64, MappingError> {
    let w = unit("warmth", w)?;
    Ok(config.hue_cold_deg - (config.hue_cold_deg - config.hue_warm_deg) * w)
}

pub fn map_vocal(
    roughness: f64,
    sharpness: f64,
    warmth: f64,
    config: &MappingConfig,
) -> Result<VocalVisualParams, MappingError> {
    Ok(VocalVisualParams {
        dispersion: unit("vocal roughness", roughness)?,
        metalness: unit("vocal sharpness", sharpness)?,
        hue_deg: hue_from_warmth(warmth, config)?,
    })
}

pub fn classify_hardness(hardness: f64, config: &MappingConfig) -> Result<BackgroundKind, MappingError> {
    let h = unit("hardness", hardness)?;
    let [soft, strong] = config.hardness_thresholds;
    Ok(if h < soft {
        BackgroundKind::Cloud
    } else if h < strong {
        BackgroundKind::Water
    } else {
        BackgroundKind::Ice
    })
}

pub fn map_background(
    roughness: f64,
    depth: f64,
    brightness: f64,
    hardness: f64,
    warmth: f64,
    config: &MappingConfig,
) -> Result<BackgroundVisualParams, MappingError> {
    Ok(BackgroundVisualParams {
        kind: classify_hardness(hardness, config)?,
        surface_roughness: unit("background roughness", roughness)?,
        hue_deg: hue_from_warmth(warmth, config)?,
        value: unit("brightness", brightness)?,
        saturation: unit("depth", depth)?,
    })
}

/// Maps one already-normalized frame.
pub fn map_normalized(frame: &TimbralFrame, t: f64, config: &MappingConfig) -> Result<VisualFrame, MappingError> {
    Ok(VisualFrame {
        t,
        object: map_vocal(frame.vocal_roughness, frame.vocal_sharpness, frame.vocal_warmth, config)?,
        background: map_background(
            frame.bg_roughness,
            frame.bg_depth,
            frame.bg_brightness,
            frame.bg_hardness,
            frame.bg_warmth,
            config,
        )?,
    })
}

/// `y_0 = x_0`, `y_k = alpha * x_k + (1 - alpha) * y_{k-1}`.
pub fn exponential_smooth(xs: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut prev = None;
    for &x in xs {
        let y = match prev {
            None => x,
            Some(p) => alpha * x + (1.0 - alpha) * p,
        };
        out.push(y);
        prev = Some(y);
    }
    out
}

/// Number of output frames, `floor(duration * fps)`.
pub fn output_frame_count(duration_seconds: f64, fps: f64) -> usize {
    // tolerate representation error in products that should be integral
    (duration_seconds * fps + 1e-9).floor().max(0.0) as usize
}

/// Normalizes each channel over the track, smooths, resamples at `fps` and maps.
pub fn map_track(series: &TimbralTimeSeries, config: &MappingConfig) -> Result<Vec<VisualFrame>, MappingError> {
    let bounds = ChannelBounds::of_track(series)?;
    map_track_with_bounds(series, &bounds, config)
}

/// [`map_track`] with externally supplied normalization bounds.
pub fn map_track_with_bounds(
    series: &TimbralTimeSeries,
    bounds: &ChannelBounds,
    config: &MappingConfig,
) -> Result<Vec<VisualFrame>, MappingError> {
    config
        .validate()
        .map_err(|e| ConfigErrorMessage(e.to_string()))?;
    if series.frames.is_empty() {
        return Err(MappingError::EmptySeries);
    }
    if !(series.hop_seconds > 0.0) {
        return Err(MappingError::NonFinite("hop_seconds"));
    }

    let channels: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let raw = series.channel(i);
            if raw.iter().any(|x| !x.is_finite()) {
                return Err(MappingError::NonFinite(crate::features::CHANNEL_NAMES[i]));
            }
            let normalized: Vec<f64> = raw.iter().map(|x| bounds.0[i].normalize(*x)).collect();
            Ok(exponential_smooth(&normalized, config.smoothing_alpha))
        })
        .collect::<Result<_, _>>()?;

    let last = series.frames.len() - 1;
    (0..output_frame_count(series.duration_seconds, config.fps))
        .map(|k| {
            let t = k as f64 / config.fps;
            let src = ((t / series.hop_seconds).round() as usize).min(last);
            let frame = TimbralFrame::from_channels(std::array::from_fn(|i| {
                channels[i][src].clamp(0.0, 1.0)
            }));
            map_normalized(&frame, t, config)
        })
        .collect()
}
