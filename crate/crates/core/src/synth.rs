//! Deterministic synthetic stems for demos and end-to-end checks.
//!
//! The vocal is a harmonic voice with vibrato that moves through a short
//! melody; some notes carry a detuned partner so roughness varies. The
//! background cycles through soft pads, plucked chords and percussive noise
//! bursts so its hardness sweeps the full range.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{stem_paths, write_wav_pcm16, AudioBuffer};

const MELODY_HZ: [f64; 8] = [220.0, 246.94, 261.63, 293.66, 329.63, 293.66, 261.63, 196.0];
const NOTE_SECONDS: f64 = 0.75;
const SECTION_SECONDS: f64 = 2.5;

fn envelope(t: f64, attack: f64, release: f64, length: f64) -> f64 {
    if t < 0.0 || t > length {
        0.0
    } else if t < attack {
        t / attack
    } else if t > length - release {
        ((length - t) / release).max(0.0)
    } else {
        1.0
    }
}

pub fn vocal_stem(seconds: f64, sample_rate: u32) -> AudioBuffer {
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let mut phase = 0.0;
    let mut partner_phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let note = (t / NOTE_SECONDS) as usize;
            let local = t - note as f64 * NOTE_SECONDS;
            let f0 = MELODY_HZ[note % MELODY_HZ.len()] * (1.0 + 0.006 * (TAU * 5.5 * t).sin());
            phase = (phase + TAU * f0 / sr) % TAU;
            // every third note gets a beating partner a few Hz to tens of Hz away
            let detune = if note % 3 == 1 { 8.0 + 6.0 * (note % 4) as f64 } else { 0.0 };
            partner_phase = (partner_phase + TAU * (f0 + detune) / sr) % TAU;
            // brighter vowels on later phrase notes
            let tilt = 0.55 + 0.35 * ((note / 4) % 2) as f64;
            let mut voice = 0.0;
            let mut gain = 1.0;
            for h in 1..=12 {
                voice += gain * (h as f64 * phase).sin();
                gain *= tilt;
            }
            if detune > 0.0 {
                voice += 0.8 * partner_phase.sin();
            }
            0.1 * voice * envelope(local, 0.04, 0.08, NOTE_SECONDS)
        })
        .collect();
    AudioBuffer::new(samples, sample_rate)
}

pub fn background_stem(seconds: f64, sample_rate: u32, seed: u64) -> AudioBuffer {
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0.0; n];
    let section_len = (SECTION_SECONDS * sr) as usize;
    for (s, chunk) in samples.chunks_mut(section_len.max(1)).enumerate() {
        let t0 = s as f64 * SECTION_SECONDS;
        match s % 3 {
            0 => pad(chunk, sr, t0),
            1 => plucks(chunk, sr, &mut rng),
            _ => drums(chunk, sr, &mut rng),
        }
    }
    AudioBuffer::new(samples, sample_rate)
}

fn pad(out: &mut [f64], sr: f64, t0: f64) {
    let len = out.len() as f64 / sr;
    for (i, y) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let swell = envelope(t, len * 0.45, len * 0.45, len);
        let chord: f64 = [65.41, 98.0, 130.81, 164.81]
            .iter()
            .map(|f| (TAU * f * (t0 + t)).sin())
            .sum();
        *y = 0.12 * swell * chord;
    }
}

fn plucks(out: &mut [f64], sr: f64, rng: &mut ChaCha8Rng) {
    let step = (0.3125 * sr) as usize;
    for start in (0..out.len()).step_by(step.max(1)) {
        let f = [196.0, 261.63, 329.63, 392.0, 523.25][rng.random_range(0..5)];
        for (k, y) in out[start..].iter_mut().take(step).enumerate() {
            let t = k as f64 / sr;
            let decay = (-t * 9.0).exp() * (t * 400.0).min(1.0);
            *y += 0.25 * decay * ((TAU * f * t).sin() + 0.5 * (TAU * 2.0 * f * t).sin() + 0.25 * (TAU * 3.0 * f * t).sin());
        }
    }
}

fn drums(out: &mut [f64], sr: f64, rng: &mut ChaCha8Rng) {
    let step = (0.25 * sr) as usize;
    for (b, start) in (0..out.len()).step_by(step.max(1)).enumerate() {
        let accent = if b % 2 == 0 { 1.0 } else { 0.6 };
        let mut last = 0.0;
        for (k, y) in out[start..].iter_mut().take(step).enumerate() {
            let t = k as f64 / sr;
            let white: f64 = rng.random_range(-1.0..1.0);
            // first-difference of white noise tilts the burst towards the top octave
            let hiss = white - last;
            last = white;
            *y += 0.45 * accent * (-t * 30.0).exp() * hiss;
        }
    }
}

/// Writes `<track>.vocal.wav` and `<track>.background.wav` into `dir`.
pub fn write_stems(
    dir: impl AsRef<Path>,
    track: &str,
    seconds: f64,
    sample_rate: u32,
    seed: u64,
) -> std::io::Result<(PathBuf, PathBuf)> {
    let (vocal_path, background_path) = stem_paths(&dir, track);
    std::fs::create_dir_all(dir.as_ref())?;
    for (path, buffer) in [
        (&vocal_path, vocal_stem(seconds, sample_rate)),
        (&background_path, background_stem(seconds, sample_rate, seed)),
    ] {
        let mut sink = BufWriter::new(File::create(path)?);
        write_wav_pcm16(&mut sink, &buffer.samples, sample_rate)?;
        std::io::Write::flush(&mut sink)?;
    }
    Ok((vocal_path, background_path))
}
