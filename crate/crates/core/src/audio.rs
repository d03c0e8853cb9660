//! WAV stem decoding, stem pairing, framing and windowed power spectra.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

pub const SUPPORTED_RATES: [u32; 2] = [44_100, 48_000];

const WAVE_FORMAT_PCM: u16 = 0x0001;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: cannot read file: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated WAV data: {0}")]
    TruncatedData(String),
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<AudioError>,
    },
    #[error("sample rate mismatch: vocal {vocal} Hz, background {background} Hz")]
    SampleRateMismatch { vocal: u32, background: u32 },
    #[error("window of {window} samples exceeds signal length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("invalid framing: window {window}, hop {hop} (need 0 < hop <= window)")]
    InvalidFraming { window: usize, hop: usize },
}

/// Decoded mono PCM, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate > 0);
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Vocal and background stems of one track, equal rate and length.
#[derive(Debug, Clone, PartialEq)]
pub struct StemPair {
    pub vocal: AudioBuffer,
    pub background: AudioBuffer,
}

impl StemPair {
    /// Pairs two buffers, zero-padding the shorter one at the tail.
    pub fn new(mut vocal: AudioBuffer, mut background: AudioBuffer) -> Result<Self, AudioError> {
        if vocal.sample_rate != background.sample_rate {
            return Err(AudioError::SampleRateMismatch {
                vocal: vocal.sample_rate,
                background: background.sample_rate,
            });
        }
        let len = vocal.len().max(background.len());
        vocal.samples.resize(len, 0.0);
        background.samples.resize(len, 0.0);
        Ok(Self { vocal, background })
    }

    pub fn sample_rate(&self) -> u32 {
        self.vocal.sample_rate
    }

    pub fn len(&self) -> usize {
        self.vocal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocal.is_empty()
    }
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(&bytes).map_err(|e| AudioError::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

pub fn load_stem_pair(
    vocal_path: impl AsRef<Path>,
    background_path: impl AsRef<Path>,
) -> Result<StemPair, AudioError> {
    StemPair::new(load_wav(vocal_path)?, load_wav(background_path)?)
}

/// Stem paths for `<track>.vocal.wav` / `<track>.background.wav` in `dir`.
pub fn stem_paths(dir: impl AsRef<Path>, track: &str) -> (PathBuf, PathBuf) {
    let dir = dir.as_ref();
    (
        dir.join(format!("{track}.vocal.wav")),
        dir.join(format!("{track}.background.wav")),
    )
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
    bits: u16,
    block_align: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedHeader(format!(
            "fmt chunk is {} bytes, need 16",
            body.len()
        )));
    }
    let mut tag = le_u16(body, 0);
    let channels = le_u16(body, 2);
    let sample_rate = le_u32(body, 4);
    let block_align = le_u16(body, 12);
    let bits = le_u16(body, 14);

    if tag == WAVE_FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(AudioError::MalformedHeader("short WAVE_FORMAT_EXTENSIBLE fmt chunk".into()));
        }
        // first two bytes of the SubFormat GUID carry the format tag
        tag = le_u16(body, 24);
    }
    if tag != WAVE_FORMAT_PCM {
        return Err(AudioError::UnsupportedFormat(format!(
            "format tag {tag:#06x} is not integer PCM"
        )));
    }
    if bits != 16 && bits != 24 {
        return Err(AudioError::UnsupportedFormat(format!("{bits}-bit samples")));
    }
    if channels != 1 && channels != 2 {
        return Err(AudioError::UnsupportedFormat(format!("{channels} channels")));
    }
    if !SUPPORTED_RATES.contains(&sample_rate) {
        return Err(AudioError::UnsupportedFormat(format!("{sample_rate} Hz")));
    }
    if block_align != channels * bits / 8 {
        return Err(AudioError::MalformedHeader(format!(
            "block align {block_align} inconsistent with {channels} x {bits}-bit"
        )));
    }
    Ok(Format {
        channels,
        sample_rate,
        bits,
        block_align,
    })
}

/// Decodes a RIFF/WAVE PCM byte image to mono.
///
/// Stereo is downmixed by channel mean and integers are scaled by
/// `2^(bits-1)`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedHeader("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(AudioError::MalformedHeader(format!(
            "magic {:?}, expected \"RIFF\"",
            String::from_utf8_lossy(&bytes[0..4])
        )));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("RIFF form type is not WAVE".into()));
    }

    let mut format = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                let end = body_start
                    .checked_add(size)
                    .filter(|e| *e <= bytes.len())
                    .ok_or_else(|| AudioError::MalformedHeader("fmt chunk runs past end of file".into()))?;
                format = Some(parse_fmt(&bytes[body_start..end])?);
            }
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| AudioError::MalformedHeader("data chunk before fmt chunk".into()))?;
                let available = bytes.len() - body_start;
                if size > available {
                    return Err(AudioError::TruncatedData(format!(
                        "data chunk declares {size} bytes, {available} present"
                    )));
                }
                if size % usize::from(fmt.block_align) != 0 {
                    return Err(AudioError::TruncatedData(format!(
                        "data size {size} is not a whole number of {}-byte frames",
                        fmt.block_align
                    )));
                }
                return Ok(decode_pcm(&bytes[body_start..body_start + size], fmt));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    Err(AudioError::MalformedHeader(
        if format.is_none() { "missing fmt chunk" } else { "missing data chunk" }.into(),
    ))
}

fn decode_pcm(data: &[u8], fmt: &Format) -> AudioBuffer {
    let scale = f64::from(1u32 << (fmt.bits - 1));
    let width = usize::from(fmt.bits / 8);
    let read = |b: &[u8]| -> f64 {
        match width {
            2 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            // sign-extend 24-bit via the top byte of an i32
            _ => f64::from(i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8),
        }
    };
    let channels = usize::from(fmt.channels);
    let samples = data
        .chunks_exact(usize::from(fmt.block_align))
        .map(|frame| {
            let sum: f64 = frame.chunks_exact(width).map(read).sum();
            sum / channels as f64 / scale
        })
        .collect();
    AudioBuffer::new(samples, fmt.sample_rate)
}

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1].
pub fn write_wav_pcm16(
    mut sink: impl Write,
    samples: &[f64],
    sample_rate: u32,
) -> std::io::Result<()> {
    let data_len = (samples.len() * 2) as u32;
    sink.write_all(b"RIFF")?;
    sink.write_all(&(36 + data_len).to_le_bytes())?;
    sink.write_all(b"WAVEfmt ")?;
    sink.write_all(&16u32.to_le_bytes())?;
    sink.write_all(&WAVE_FORMAT_PCM.to_le_bytes())?;
    sink.write_all(&1u16.to_le_bytes())?;
    sink.write_all(&sample_rate.to_le_bytes())?;
    sink.write_all(&(sample_rate * 2).to_le_bytes())?;
    sink.write_all(&2u16.to_le_bytes())?;
    sink.write_all(&16u16.to_le_bytes())?;
    sink.write_all(b"data")?;
    sink.write_all(&data_len.to_le_bytes())?;
    let mut data = Vec::with_capacity(samples.len() * 2);
    for s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        data.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&data)
}

/// Number of full windows: `floor((len - window) / hop) + 1`.
pub fn frame_count(len: usize, window_size: usize, hop: usize) -> Result<usize, AudioError> {
    if hop == 0 || hop > window_size {
        return Err(AudioError::InvalidFraming {
            window: window_size,
            hop,
        });
    }
    if window_size > len {
        return Err(AudioError::WindowTooLarge {
            window: window_size,
            len,
        });
    }
    Ok((len - window_size) / hop + 1)
}

/// Frame `k` covers samples `[k * hop, k * hop + window_size)`.
pub fn frame_signal(
    buffer: &AudioBuffer,
    window_size: usize,
    hop: usize,
) -> Result<Vec<&[f64]>, AudioError> {
    let count = frame_count(buffer.len(), window_size, hop)?;
    Ok((0..count)
        .map(|k| &buffer.samples[k * hop..k * hop + window_size])
        .collect())
}

/// One-sided power spectrum of a Hann-windowed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// `window_size / 2 + 1` bin powers, DC first.
    pub power: Vec<f64>,
    pub bin_hz: f64,
    pub window_size: usize,
}

impl Spectrum {
    pub fn bin_freq(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    pub fn nyquist(&self) -> f64 {
        self.bin_hz * self.window_size as f64 / 2.0
    }

    pub fn total_energy(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.power.iter().map(|p| p.sqrt())
    }
}

/// Periodic Hann window.
pub fn hann_window(size: usize) -> Vec<f64> {
    (0..size)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / size as f64).cos())
        .collect()
}

/// Reusable FFT plan and window for one window size.
pub struct SpectrumAnalyzer {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SpectrumAnalyzer {
    pub fn new(window_size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(window_size);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self {
            window: hann_window(window_size),
            fft,
            buffer: vec![Complex::default(); window_size],
            scratch,
        }
    }

    pub fn window_size(&self) -> usize {
        self.window.len()
    }

    /// Panics if `frame.len()` differs from the analyzer's window size.
    pub fn power_spectrum(&mut self, frame: &[f64], sample_rate: u32) -> Spectrum {
        let n = self.window.len();
        assert_eq!(frame.len(), n, "frame length must equal window size");
        for ((slot, x), w) in self.buffer.iter_mut().zip(frame).zip(&self.window) {
            *slot = Complex::new(x * w, 0.0);
        }
        self.fft
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        Spectrum {
            power: self.buffer[..=n / 2].iter().map(|c| c.norm_sqr()).collect(),
            bin_hz: f64::from(sample_rate) / n as f64,
            window_size: n,
        }
    }
}

/// Hann-windowed magnitude-squared spectrum of one frame.
pub fn power_spectrum(frame: &[f64], sample_rate: u32) -> Spectrum {
    SpectrumAnalyzer::new(frame.len()).power_spectrum(frame, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_header(tag: u16, channels: u16, rate: u32, bits: u16, data_len: u32) -> Vec<u8> {
        let align = channels * bits / 8;
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data_len).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&tag.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&rate.to_le_bytes());
        b.extend_from_slice(&(rate * u32::from(align)).to_le_bytes());
        b.extend_from_slice(&align.to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&data_len.to_le_bytes());
        b
    }

    #[test]
    fn decodes_min_sample_to_minus_one() {
        let mut b = wav_header(1, 1, 44_100, 16, 2);
        b.extend_from_slice(&(-32768i16).to_le_bytes());
        let buf = decode_wav(&b).unwrap();
        assert_eq!(buf.samples, vec![-1.0]);
        assert_eq!(buf.sample_rate, 44_100);
    }

    #[test]
    fn decodes_24_bit_stereo_mean() {
        let mut b = wav_header(1, 2, 48_000, 24, 6);
        // left = -2^23, right = 2^22
        b.extend_from_slice(&[0x00, 0x00, 0x80]);
        b.extend_from_slice(&[0x00, 0x00, 0x40]);
        let buf = decode_wav(&b).unwrap();
        assert_eq!(buf.samples, vec![(-1.0 + 0.5) / 2.0]);
    }

    #[test]
    fn rejects_rifx() {
        let mut b = wav_header(1, 1, 44_100, 16, 2);
        b[0..4].copy_from_slice(b"RIFX");
        b.extend_from_slice(&[0, 0]);
        assert!(matches!(decode_wav(&b), Err(AudioError::MalformedHeader(_))));
    }

    #[test]
    fn rejects_unsupported_formats() {
        for (tag, ch, rate, bits) in [(3, 1, 44_100, 32), (1, 1, 44_100, 8), (1, 3, 44_100, 16), (1, 1, 22_050, 16)] {
            let mut b = wav_header(tag, ch, rate, bits, 0);
            b.extend_from_slice(&[]);
            assert!(
                matches!(decode_wav(&b), Err(AudioError::UnsupportedFormat(_))),
                "tag {tag} ch {ch} rate {rate} bits {bits}"
            );
        }
    }

    #[test]
    fn rejects_truncated_data() {
        let mut b = wav_header(1, 1, 44_100, 16, 100);
        b.extend_from_slice(&[0; 40]);
        assert!(matches!(decode_wav(&b), Err(AudioError::TruncatedData(_))));
        let mut b = wav_header(1, 2, 44_100, 16, 6);
        b.extend_from_slice(&[0; 6]);
        assert!(matches!(decode_wav(&b), Err(AudioError::TruncatedData(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF\0\0\0\0WAVE");
        b.extend_from_slice(b"LIST");
        b.extend_from_slice(&3u32.to_le_bytes());
        b.extend_from_slice(&[1, 2, 3, 0]); // odd size plus pad byte
        let full = wav_header(1, 1, 44_100, 16, 2);
        b.extend_from_slice(&full[12..]);
        b.extend_from_slice(&16384i16.to_le_bytes());
        assert_eq!(decode_wav(&b).unwrap().samples, vec![0.5]);
    }

    #[test]
    fn pairing_pads_tail_and_checks_rate() {
        let v = AudioBuffer::new(vec![0.25; 1000], 44_100);
        let b = AudioBuffer::new(vec![0.5; 1500], 44_100);
        let pair = StemPair::new(v, b).unwrap();
        assert_eq!(pair.vocal.len(), 1500);
        assert!(pair.vocal.samples[1000..].iter().all(|s| *s == 0.0));
        assert_eq!(pair.vocal.samples[999], 0.25);

        let err = StemPair::new(AudioBuffer::new(vec![0.0], 44_100), AudioBuffer::new(vec![0.0], 48_000))
            .unwrap_err();
        assert!(matches!(err, AudioError::SampleRateMismatch { vocal: 44_100, background: 48_000 }));
    }

    #[test]
    fn frame_counts() {
        let buf = |n| AudioBuffer::new(vec![0.0; n], 44_100);
        assert_eq!(frame_signal(&buf(4096), 4096, 1024).unwrap().len(), 1);
        assert_eq!(frame_signal(&buf(8192), 4096, 1024).unwrap().len(), 5);
        assert!(matches!(
            frame_signal(&buf(100), 4096, 1024),
            Err(AudioError::WindowTooLarge { window: 4096, len: 100 })
        ));
        assert!(matches!(frame_signal(&buf(100), 10, 0), Err(AudioError::InvalidFraming { .. })));
        assert!(matches!(frame_signal(&buf(100), 10, 11), Err(AudioError::InvalidFraming { .. })));
    }

    #[test]
    fn frames_start_at_multiples_of_hop() {
        let samples: Vec<f64> = (0..10_000).map(|i| i as f64 / 10_000.0).collect();
        let buf = AudioBuffer::new(samples, 48_000);
        for (k, frame) in frame_signal(&buf, 1000, 300).unwrap().iter().enumerate() {
            assert_eq!(frame[0], buf.samples[k * 300]);
            assert_eq!(frame.len(), 1000);
        }
    }

    #[test]
    fn silent_frame_has_zero_power() {
        let s = power_spectrum(&[0.0; 4096], 44_100);
        assert_eq!(s.power.len(), 2049);
        assert!(s.power.iter().all(|p| *p == 0.0));
        assert_eq!(s.bin_hz, 44_100.0 / 4096.0);
    }
}
