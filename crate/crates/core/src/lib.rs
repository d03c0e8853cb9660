//! Stem analysis, visual mapping and frame streaming for timbre-driven
//! music visualization.
//!
//! The pipeline runs `audio` → `features` → `mapping` → `stream`; `server`
//! pushes the same frames to live renderers. Survey statistics live in the
//! `tailors-stats` crate and are re-exported as [`stats`].

pub mod audio;
pub mod cli;
pub mod config;
pub mod features;
pub mod mapping;
pub mod server;
pub mod stream;
pub mod synth;

pub use tailors_stats as stats;

pub use audio::{AudioBuffer, AudioError, Spectrum, SpectrumAnalyzer, StemPair};
pub use config::{Config, FeatureConfig, MappingConfig};
pub use features::{extract_track_features, FeatureError, TimbralFrame, TimbralTimeSeries};
pub use mapping::{map_track, BackgroundKind, MappingError, VisualFrame};
pub use stream::{emit_frames, parse_stream, StreamError, StreamHeader};
