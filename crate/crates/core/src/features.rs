//! Per-frame timbral descriptors for the vocal and background stems.
//!
//! | stem       | descriptors                                         |
//! |------------|-----------------------------------------------------|
//! | vocal      | roughness, sharpness, warmth                        |
//! | background | roughness, depth, brightness, hardness, warmth      |
//!
//! Roughness follows the Vassilakis pairwise-partial model. Sharpness is a
//! Bark-weighted centroid of `E^0.23` specific loudness with the DIN 45692
//! high-band weighting. Brightness, warmth and depth are fixed-band energy
//! ratios. Hardness mixes attack steepness with the normalized spectral
//! centroid.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{frame_count, AudioBuffer, Spectrum, SpectrumAnalyzer, StemPair};
use crate::config::FeatureConfig;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("audio has {len} samples, shorter than one {window}-sample analysis window")]
    AudioTooShort { len: usize, window: usize },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub freq: f64,
    pub amplitude: f64,
}

/// Raw (unnormalized) descriptor values for one analysis hop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimbralFrame {
    pub vocal_roughness: f64,
    pub vocal_sharpness: f64,
    pub vocal_warmth: f64,
    pub bg_roughness: f64,
    pub bg_depth: f64,
    pub bg_brightness: f64,
    pub bg_hardness: f64,
    pub bg_warmth: f64,
}

pub const CHANNEL_NAMES: [&str; 8] = [
    "vocal_roughness",
    "vocal_sharpness",
    "vocal_warmth",
    "bg_roughness",
    "bg_depth",
    "bg_brightness",
    "bg_hardness",
    "bg_warmth",
];

impl TimbralFrame {
    /// Values in [`CHANNEL_NAMES`] order.
    pub fn channels(&self) -> [f64; 8] {
        [
            self.vocal_roughness,
            self.vocal_sharpness,
            self.vocal_warmth,
            self.bg_roughness,
            self.bg_depth,
            self.bg_brightness,
            self.bg_hardness,
            self.bg_warmth,
        ]
    }

    pub fn from_channels(c: [f64; 8]) -> Self {
        Self {
            vocal_roughness: c[0],
            vocal_sharpness: c[1],
            vocal_warmth: c[2],
            bg_roughness: c[3],
            bg_depth: c[4],
            bg_brightness: c[5],
            bg_hardness: c[6],
            bg_warmth: c[7],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimbralTimeSeries {
    pub frames: Vec<TimbralFrame>,
    /// Seconds between consecutive frame starts.
    pub hop_seconds: f64,
    /// Length of the analyzed audio.
    pub duration_seconds: f64,
}

impl TimbralTimeSeries {
    pub fn frame_time(&self, index: usize) -> f64 {
        index as f64 * self.hop_seconds
    }

    /// One channel across all frames.
    pub fn channel(&self, index: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.channels()[index]).collect()
    }
}

/// Strict local maxima of the magnitude spectrum no more than `floor_db`
/// below the frame maximum, largest first, at most `max_peaks`.
///
/// DC and Nyquist bins are never peaks.
pub fn spectral_peaks(spectrum: &Spectrum, floor_db: f64, max_peaks: usize) -> Vec<SpectralPeak> {
    let mags: Vec<f64> = spectrum.magnitudes().collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || mags.len() < 3 {
        return Vec::new();
    }
    let floor = max * 10f64.powf(floor_db / 20.0);
    let mut peaks: Vec<SpectralPeak> = (1..mags.len() - 1)
        .filter(|&k| mags[k] > mags[k - 1] && mags[k] > mags[k + 1] && mags[k] >= floor)
        .map(|k| SpectralPeak {
            freq: spectrum.bin_freq(k),
            amplitude: mags[k],
        })
        .collect();
    peaks.sort_by(|a, b| {
        b.amplitude
            .total_cmp(&a.amplitude)
            .then(a.freq.total_cmp(&b.freq))
    });
    peaks.truncate(max_peaks);
    peaks
}

/// Roughness contribution of one pair of partials.
pub fn pair_roughness(a: SpectralPeak, b: SpectralPeak) -> f64 {
    let (a_min, a_max) = if a.amplitude <= b.amplitude {
        (a.amplitude, b.amplitude)
    } else {
        (b.amplitude, a.amplitude)
    };
    if a_max <= 0.0 {
        return 0.0;
    }
    let f_min = a.freq.min(b.freq);
    let df = (a.freq - b.freq).abs();
    let s = 0.24 / (0.0207 * f_min + 18.96);
    let x = a_min * a_max;
    let y = 2.0 * a_min / (a_min + a_max);
    let z = (-3.5 * s * df).exp() - (-5.75 * s * df).exp();
    x.powf(0.1) * 0.5 * y.powf(3.11) * z
}

/// Sum of [`pair_roughness`] over all unordered peak pairs.
pub fn roughness(peaks: &[SpectralPeak]) -> f64 {
    let mut total = 0.0;
    for (i, &a) in peaks.iter().enumerate() {
        for &b in &peaks[i + 1..] {
            total += pair_roughness(a, b);
        }
    }
    total
}

/// Weighting of the specific loudness of Bark band `z` (1-based).
pub fn sharpness_weight(z: f64) -> f64 {
    if z <= 15.8 {
        1.0
    } else {
        0.15 * (0.42 * (z - 15.8)).exp() + 0.85
    }
}

/// Energy in each Bark band; bins at or above the last edge are ignored.
pub fn bark_band_energies(spectrum: &Spectrum, edges: &[f64]) -> Vec<f64> {
    let mut bands = vec![0.0; edges.len().saturating_sub(1)];
    let mut band = 0;
    for (k, p) in spectrum.power.iter().enumerate() {
        let f = spectrum.bin_freq(k);
        while band < bands.len() && f >= edges[band + 1] {
            band += 1;
        }
        if band == bands.len() {
            break;
        }
        if f >= edges[band] {
            bands[band] += p;
        }
    }
    bands
}

/// `0.11 * sum(N'(z) g(z) z) / sum(N'(z))` with `N'(z) = E_z^0.23`.
pub fn sharpness(spectrum: &Spectrum, bark_edges_hz: &[f64]) -> f64 {
    let (mut weighted, mut total) = (0.0, 0.0);
    for (i, e) in bark_band_energies(spectrum, bark_edges_hz).into_iter().enumerate() {
        let z = (i + 1) as f64;
        let loudness = e.powf(0.23);
        weighted += loudness * sharpness_weight(z) * z;
        total += loudness;
    }
    if total > 0.0 {
        0.11 * weighted / total
    } else {
        0.0
    }
}

fn band_ratio(spectrum: &Spectrum, in_band: impl Fn(f64) -> bool) -> f64 {
    let total = spectrum.total_energy();
    if total <= 0.0 {
        return 0.0;
    }
    let band: f64 = spectrum
        .power
        .iter()
        .enumerate()
        .filter(|(k, _)| in_band(spectrum.bin_freq(*k)))
        .map(|(_, p)| p)
        .sum();
    (band / total).clamp(0.0, 1.0)
}

/// Share of energy at or above `cutoff_hz`.
pub fn brightness(spectrum: &Spectrum, cutoff_hz: f64) -> f64 {
    band_ratio(spectrum, |f| f >= cutoff_hz)
}

/// Share of energy inside `[lo, hi]` Hz.
pub fn warmth(spectrum: &Spectrum, band_hz: [f64; 2]) -> f64 {
    band_ratio(spectrum, |f| f >= band_hz[0] && f <= band_hz[1])
}

/// Share of energy below `cutoff_hz`.
pub fn depth(spectrum: &Spectrum, cutoff_hz: f64) -> f64 {
    band_ratio(spectrum, |f| f < cutoff_hz)
}

/// Magnitude-weighted mean frequency; 0 for silence.
pub fn spectral_centroid(spectrum: &Spectrum) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, m) in spectrum.magnitudes().enumerate() {
        num += spectrum.bin_freq(k) * m;
        den += m;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Hardness with the attack normalized by the maximum of `frame_energies`.
pub fn hardness(frame_energies: &[f64], spectrum: &Spectrum) -> f64 {
    let reference = frame_energies.iter().copied().fold(0.0, f64::max);
    hardness_with_reference(frame_energies, reference, spectrum)
}

/// `0.5 * attack + 0.5 * centroid / nyquist`, where attack is the largest
/// rise between consecutive RMS values divided by `reference_rms`.
pub fn hardness_with_reference(energies: &[f64], reference_rms: f64, spectrum: &Spectrum) -> f64 {
    let rise = energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let attack = if reference_rms > 0.0 {
        (rise / reference_rms).min(1.0)
    } else {
        0.0
    };
    let nyquist = spectrum.nyquist();
    let centroid = if nyquist > 0.0 {
        spectral_centroid(spectrum) / nyquist
    } else {
        0.0
    };
    0.5 * attack + 0.5 * centroid
}

/// RMS of consecutive `hop`-sample blocks; the last block may be short.
pub fn block_rms(buffer: &AudioBuffer, hop: usize) -> Vec<f64> {
    buffer
        .samples
        .chunks(hop)
        .map(|b| (b.iter().map(|s| s * s).sum::<f64>() / b.len() as f64).sqrt())
        .collect()
}

/// Computes one [`TimbralFrame`] per analysis hop.
///
/// Frame `k` analyzes samples `[k * hop, k * hop + window)`. The attack part
/// of hardness looks at the block RMS envelope from one hop before the frame
/// to its end, normalized by the loudest block of the whole background stem.
pub fn extract_track_features(
    stems: &StemPair,
    config: &FeatureConfig,
) -> Result<TimbralTimeSeries, FeatureError> {
    config.validate()?;
    let (window, hop) = (config.window_size, config.hop);
    let len = stems.len();
    if len < window {
        return Err(FeatureError::AudioTooShort { len, window });
    }
    let count = frame_count(len, window, hop).expect("validated framing");
    let rate = stems.sample_rate();

    let envelope = block_rms(&stems.background, hop);
    let track_max_rms = envelope.iter().copied().fold(0.0, f64::max);

    let mut analyzer = SpectrumAnalyzer::new(window);
    let mut frames = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * hop;
        let vocal = analyzer.power_spectrum(&stems.vocal.samples[start..start + window], rate);
        let bg = analyzer.power_spectrum(&stems.background.samples[start..start + window], rate);

        let last_block = (start + window - 1) / hop;
        let local = &envelope[k.saturating_sub(1)..=last_block];

        frames.push(TimbralFrame {
            vocal_roughness: roughness(&spectral_peaks(&vocal, config.peak_floor_db, config.max_peaks)),
            vocal_sharpness: sharpness(&vocal, &config.bark_edges_hz),
            vocal_warmth: warmth(&vocal, config.warmth_band_hz),
            bg_roughness: roughness(&spectral_peaks(&bg, config.peak_floor_db, config.max_peaks)),
            bg_depth: depth(&bg, config.depth_cutoff_hz),
            bg_brightness: brightness(&bg, config.brightness_cutoff_hz),
            bg_hardness: hardness_with_reference(local, track_max_rms, &bg),
            bg_warmth: warmth(&bg, config.warmth_band_hz),
        });
    }

    Ok(TimbralTimeSeries {
        frames,
        hop_seconds: hop as f64 / f64::from(rate),
        duration_seconds: stems.vocal.duration_seconds(),
    })
}

#[derive(Serialize)]
struct DumpLine<'a> {
    t: f64,
    #[serde(flatten)]
    frame: &'a TimbralFrame,
}

/// Newline-delimited JSON, one object per hop: `t` plus the eight raw values.
pub fn write_feature_dump(series: &TimbralTimeSeries, mut sink: impl Write) -> std::io::Result<()> {
    for (k, frame) in series.frames.iter().enumerate() {
        let line = serde_json::to_string(&DumpLine {
            t: series.frame_time(k),
            frame,
        })
        .map_err(std::io::Error::other)?;
        sink.write_all(line.as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}
