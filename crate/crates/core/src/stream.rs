//! Newline-delimited frame files.
//!
//! Line 1 is the header object, every following line one frame:
//!
//! ```text
//! {"schema_version":1,"fps":30.0,"duration_s":12.5,"track_id":"demo"}
//! {"t":0.0,"object":{"dispersion":0.5,"metalness":0.25,"hue_deg":150.0},"background":{"kind":"water","surface_roughness":0.1,"hue_deg":210.0,"value":0.8,"saturation":0.3}}
//! ```
//!
//! Numbers are written with at most six fractional digits, so the output is
//! byte-identical for identical input. The same lines are used as message
//! payloads by the live server.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{BackgroundKind, VisualFrame};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("failed to write frame stream: {0}")]
    SinkWriteFailure(#[source] std::io::Error),
    #[error("failed to read frame stream: {0}")]
    Read(#[source] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: u32 },
    #[error("frame {index} at t={t} does not follow t={previous}")]
    OutOfOrder { index: usize, t: f64, previous: f64 },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamHeader {
    pub schema_version: u32,
    pub fps: f64,
    pub duration_s: f64,
    pub track_id: String,
}

impl StreamHeader {
    pub fn new(fps: f64, duration_s: f64, track_id: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            fps,
            duration_s,
            track_id: track_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StreamError::SchemaVersion {
                found: self.schema_version,
            });
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(StreamError::InvalidHeader(format!("fps {} must be positive", self.fps)));
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(StreamError::InvalidHeader(format!(
                "duration_s {} must be nonnegative",
                self.duration_s
            )));
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        let track = serde_json::to_string(&self.track_id).expect("strings always serialize");
        format!(
            "{{\"schema_version\":{},\"fps\":{},\"duration_s\":{},\"track_id\":{}}}",
            self.schema_version,
            format_number(self.fps),
            format_number(self.duration_s),
            track
        )
    }
}

/// Fixed six-decimal rendering with trailing zeros trimmed (one kept).
pub fn format_number(x: f64) -> String {
    let mut s = format!("{x:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.push('0');
        }
    }
    if s == "-0.0" {
        s = "0.0".to_string();
    }
    s
}

pub fn frame_to_line(frame: &VisualFrame) -> String {
    let o = &frame.object;
    let b = &frame.background;
    let mut s = String::with_capacity(192);
    let _ = write!(
        s,
        "{{\"t\":{},\"object\":{{\"dispersion\":{},\"metalness\":{},\"hue_deg\":{}}},\
         \"background\":{{\"kind\":\"{}\",\"surface_roughness\":{},\"hue_deg\":{},\"value\":{},\"saturation\":{}}}}}",
        format_number(frame.t),
        format_number(o.dispersion),
        format_number(o.metalness),
        format_number(o.hue_deg),
        b.kind.as_str(),
        format_number(b.surface_roughness),
        format_number(b.hue_deg),
        format_number(b.value),
        format_number(b.saturation),
    );
    s
}

fn check_order(frames: &[VisualFrame]) -> Result<(), StreamError> {
    for (i, w) in frames.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(StreamError::OutOfOrder {
                index: i + 1,
                t: w[1].t,
                previous: w[0].t,
            });
        }
    }
    Ok(())
}

/// Writes the header line followed by one line per frame.
pub fn emit_frames(frames: &[VisualFrame], header: &StreamHeader, mut sink: impl Write) -> Result<(), StreamError> {
    header.validate()?;
    check_order(frames)?;
    let mut write = |line: &str| -> Result<(), StreamError> {
        sink.write_all(line.as_bytes())
            .and_then(|_| sink.write_all(b"\n"))
            .map_err(StreamError::SinkWriteFailure)
    };
    write(&header.to_line())?;
    for frame in frames {
        write(&frame_to_line(frame))?;
    }
    sink.flush().map_err(StreamError::SinkWriteFailure)
}

/// Parses and validates one frame line against the frame schema.
pub fn parse_frame_line(text: &str, line: usize) -> Result<VisualFrame, StreamError> {
    let frame: VisualFrame = serde_json::from_str(text).map_err(|e| StreamError::Malformed {
        line,
        message: e.to_string(),
    })?;
    validate_frame(&frame).map_err(|message| StreamError::Malformed { line, message })?;
    Ok(frame)
}

/// Range checks for every frame field.
pub fn validate_frame(frame: &VisualFrame) -> Result<(), String> {
    let unit = |name: &str, v: f64| {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(format!("{name} = {v} outside [0, 1]"))
        }
    };
    let hue = |name: &str, v: f64| {
        if (0.0..360.0).contains(&v) {
            Ok(())
        } else {
            Err(format!("{name} = {v} outside [0, 360)"))
        }
    };
    if !(frame.t >= 0.0 && frame.t.is_finite()) {
        return Err(format!("t = {} must be a nonnegative time", frame.t));
    }
    unit("object.dispersion", frame.object.dispersion)?;
    unit("object.metalness", frame.object.metalness)?;
    hue("object.hue_deg", frame.object.hue_deg)?;
    unit("background.surface_roughness", frame.background.surface_roughness)?;
    hue("background.hue_deg", frame.background.hue_deg)?;
    unit("background.value", frame.background.value)?;
    unit("background.saturation", frame.background.saturation)?;
    // kind is checked by deserialization
    let _: BackgroundKind = frame.background.kind;
    Ok(())
}

pub fn parse_header_line(text: &str) -> Result<StreamHeader, StreamError> {
    let header: StreamHeader = serde_json::from_str(text).map_err(|e| StreamError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    header.validate()?;
    Ok(header)
}

/// Reads a frame file, validating the header, every frame and time order.
pub fn parse_stream(reader: impl BufRead) -> Result<(StreamHeader, Vec<VisualFrame>), StreamError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => parse_header_line(&line.map_err(StreamError::Read)?)?,
        None => {
            return Err(StreamError::Malformed {
                line: 1,
                message: "missing header line".into(),
            })
        }
    };
    let mut frames = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(StreamError::Read)?;
        if line.is_empty() {
            continue;
        }
        frames.push(parse_frame_line(&line, i + 1)?);
    }
    check_order(&frames)?;
    Ok((header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{BackgroundVisualParams, VocalVisualParams};

    fn frame(t: f64) -> VisualFrame {
        VisualFrame {
            t,
            object: VocalVisualParams {
                dispersion: 0.123_456_789,
                metalness: 1.0,
                hue_deg: 150.0,
            },
            background: BackgroundVisualParams {
                kind: BackgroundKind::Water,
                surface_roughness: 0.0,
                hue_deg: 270.0,
                value: 0.5,
                saturation: 1e-9,
            },
        }
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0.0");
        assert_eq!(format_number(-0.0), "0.0");
        assert_eq!(format_number(-1e-9), "0.0");
        assert_eq!(format_number(270.0), "270.0");
        assert_eq!(format_number(0.1234567), "0.123457");
        assert_eq!(format_number(1.0 / 30.0), "0.033333");
        assert_eq!(format_number(1e-6), "0.000001");
    }

    #[test]
    fn empty_stream_is_header_only() {
        let mut out = Vec::new();
        emit_frames(&[], &StreamHeader::new(30.0, 0.0, "x"), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "{\"schema_version\":1,\"fps\":30.0,\"duration_s\":0.0,\"track_id\":\"x\"}\n");
    }

    #[test]
    fn frame_line_layout() {
        let line = frame_to_line(&frame(0.5));
        assert_eq!(
            line,
            "{\"t\":0.5,\"object\":{\"dispersion\":0.123457,\"metalness\":1.0,\"hue_deg\":150.0},\
             \"background\":{\"kind\":\"water\",\"surface_roughness\":0.0,\"hue_deg\":270.0,\"value\":0.5,\"saturation\":0.0}}"
        );
        let parsed = parse_frame_line(&line, 2).unwrap();
        assert!((parsed.object.dispersion - 0.123_456_789).abs() < 1e-6);
    }

    #[test]
    fn rejects_out_of_order_frames() {
        let err = emit_frames(&[frame(0.1), frame(0.1)], &StreamHeader::new(10.0, 1.0, "x"), Vec::new()).unwrap_err();
        assert!(matches!(err, StreamError::OutOfOrder { index: 1, .. }));
    }

    #[test]
    fn sink_failure_is_reported() {
        struct Broken;
        impl Write for Broken {
            fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("disk full"))
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let err = emit_frames(&[frame(0.0)], &StreamHeader::new(10.0, 1.0, "x"), Broken).unwrap_err();
        assert!(matches!(err, StreamError::SinkWriteFailure(_)));
    }

    #[test]
    fn parse_rejects_bad_input() {
        let header = StreamHeader::new(10.0, 1.0, "x").to_line();
        let v2 = header.replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(matches!(parse_stream(v2.as_bytes()), Err(StreamError::SchemaVersion { found: 2 })));

        let bad_kind = frame_to_line(&frame(0.0)).replace("water", "lava");
        let text = format!("{header}\n{bad_kind}\n");
        assert!(matches!(parse_stream(text.as_bytes()), Err(StreamError::Malformed { line: 2, .. })));

        let out_of_range = frame_to_line(&frame(0.0)).replace("\"value\":0.5", "\"value\":1.5");
        let text = format!("{header}\n{out_of_range}\n");
        assert!(matches!(parse_stream(text.as_bytes()), Err(StreamError::Malformed { line: 2, .. })));

        assert!(parse_stream("".as_bytes()).is_err());
    }

    #[test]
    fn track_id_is_escaped() {
        let h = StreamHeader::new(30.0, 1.0, "a \"quoted\" id");
        assert_eq!(parse_header_line(&h.to_line()).unwrap(), h);
    }
}
