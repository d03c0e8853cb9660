//! Command-line entry point.
//!
//! Exit codes: 0 on success, 1 on a runtime failure (one `error:` line on
//! stderr), 2 on a usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::audio::{load_stem_pair, StemPair};
use crate::config::Config;
use crate::features::{extract_track_features, write_feature_dump};
use crate::mapping::{map_track, VisualFrame};
use crate::server::StreamServer;
use crate::stream::{emit_frames, parse_stream, StreamHeader};
use crate::synth::write_stems;
use tailors_stats::{build_reports, load_survey_csv, ReportOptions, WilcoxonPairing};

#[derive(Debug, Parser)]
#[command(name = "tailors", version, about = "Timbre-driven visuals from vocal and background stems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a stem pair and write a frame file.
    Analyze {
        #[arg(long)]
        vocal: PathBuf,
        #[arg(long)]
        background: PathBuf,
        /// Output frame file (newline-delimited JSON).
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        fps: Option<f64>,
        /// Smoothing weight of the newest sample, in [0, 1].
        #[arg(long)]
        alpha: Option<f64>,
        /// Defaults to the vocal file stem.
        #[arg(long)]
        track_id: Option<String>,
    },
    /// Write the raw per-hop timbral features of a stem pair.
    Features {
        #[arg(long)]
        vocal: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Stream a frame file to WebSocket clients in real time.
    Serve {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Wait for this many clients before starting playback.
        #[arg(long, default_value_t = 0)]
        wait_for: usize,
    },
    /// Build the survey analysis tables from a response CSV.
    Stats {
        #[arg(long)]
        survey: PathBuf,
        /// Directory receiving one .json and one .txt per table family.
        #[arg(long)]
        out: PathBuf,
        /// Independent variable to leave out of the regressions (repeatable).
        #[arg(long = "drop-iv")]
        drop_iv: Vec<String>,
        #[arg(long, value_enum, default_value_t = Pairing::ParticipantMusic)]
        pairing: Pairing,
        /// Fit regressions on raw means instead of standardized values.
        #[arg(long)]
        raw: bool,
    },
    /// Generate a deterministic synthetic stem pair.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "synthetic")]
        track_id: String,
        #[arg(long, default_value_t = 30.0)]
        seconds: f64,
        #[arg(long, default_value_t = 44100)]
        sample_rate: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Pairing {
    ParticipantMusic,
    ParticipantMean,
}

type Failure = String;

fn at(path: &Path, e: impl std::fmt::Display) -> Failure {
    format!("{}: {e}", path.display())
}

/// Runs the full analysis pipeline on a loaded stem pair.
pub fn analyze_stems(
    stems: &StemPair,
    config: &Config,
    track_id: &str,
) -> Result<(StreamHeader, Vec<VisualFrame>), Failure> {
    config.validate().map_err(|e| e.to_string())?;
    let series = extract_track_features(stems, &config.features).map_err(|e| e.to_string())?;
    let frames = map_track(&series, &config.mapping).map_err(|e| e.to_string())?;
    let header = StreamHeader::new(config.mapping.fps, series.duration_seconds, track_id);
    Ok((header, frames))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| at(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| at(path, e))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analyze {
            vocal,
            background,
            out,
            fps,
            alpha,
            track_id,
        } => {
            let mut config = Config::from_env().map_err(|e| e.to_string())?;
            if let Some(fps) = fps {
                config.mapping.fps = fps;
            }
            if let Some(alpha) = alpha {
                config.mapping.smoothing_alpha = alpha;
            }
            let stems = load_stem_pair(&vocal, &background).map_err(|e| e.to_string())?;
            let track_id = track_id.unwrap_or_else(|| {
                vocal
                    .file_stem()
                    .map(|s| s.to_string_lossy().trim_end_matches(".vocal").to_string())
                    .unwrap_or_default()
            });
            let (header, frames) = analyze_stems(&stems, &config, &track_id)?;
            emit_frames(&frames, &header, create(&out)?).map_err(|e| at(&out, e))
        }
        Command::Features { vocal, background, out } => {
            let config = Config::from_env().map_err(|e| e.to_string())?;
            let stems = load_stem_pair(&vocal, &background).map_err(|e| e.to_string())?;
            let series = extract_track_features(&stems, &config.features).map_err(|e| e.to_string())?;
            let mut sink = create(&out)?;
            write_feature_dump(&series, &mut sink)
                .and_then(|_| sink.flush())
                .map_err(|e| at(&out, e))
        }
        Command::Serve {
            frames,
            port,
            host,
            wait_for,
        } => {
            let file = File::open(&frames).map_err(|e| at(&frames, e))?;
            let (header, frames_vec) = parse_stream(BufReader::new(file)).map_err(|e| at(&frames, e))?;
            let server = StreamServer::bind((host.as_str(), port), header, &frames_vec).map_err(|e| e.to_string())?;
            eprintln!("listening on ws://{}", server.local_addr());
            if wait_for > 0 {
                server.wait_for_clients(wait_for, None::<Duration>);
            }
            let report = server.play().map_err(|e| e.to_string())?;
            eprintln!("sent {} frames (peak {} clients)", report.frames_sent, report.peak_clients);
            Ok(())
        }
        Command::Stats {
            survey,
            out,
            drop_iv,
            pairing,
            raw,
        } => {
            let records = load_survey_csv(&survey).map_err(|e| at(&survey, e))?;
            let options = ReportOptions {
                standardize: !raw,
                drop_ivs: drop_iv,
                wilcoxon_pairing: match pairing {
                    Pairing::ParticipantMusic => WilcoxonPairing::ParticipantMusic,
                    Pairing::ParticipantMean => WilcoxonPairing::ParticipantMean,
                },
                ..ReportOptions::default()
            };
            let bundle = build_reports(&records, &options).map_err(|e| at(&survey, e))?;
            bundle.write_to_dir(&out).map_err(|e| at(&out, e))?;
            Ok(())
        }
        Command::Synth {
            out_dir,
            track_id,
            seconds,
            sample_rate,
            seed,
        } => {
            if !(seconds > 0.0 && seconds.is_finite()) {
                return Err(format!("--seconds must be positive, got {seconds}"));
            }
            let (v, b) = write_stems(&out_dir, &track_id, seconds, sample_rate, seed).map_err(|e| at(&out_dir, e))?;
            eprintln!("wrote {} and {}", v.display(), b.display());
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn cli_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(message) => {
            eprintln!("error: {message}");
            1
        }
    }
}
