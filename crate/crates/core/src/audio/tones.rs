//! Placeholder sample bank: a noise-based surf loop, nine plucked tones on a
//! pentatonic ladder, and a two-note bell for proximity hits. Output is fully
//! deterministic (seeded noise, fixed rate), so generated banks hash the same
//! everywhere.

use std::f64::consts::TAU;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bank::{resample_linear, PcmBuffer, SampleBank, SampleManifest};

pub const TONE_RATE: u32 = 48_000;
const BACKGROUND_SECONDS: f64 = 8.0;
const ZONE_SECONDS: f64 = 1.2;
const PROXI_SECONDS: f64 = 1.6;

/// Semitone offsets from A3 for the nine zone tones (major pentatonic).
const ZONE_SEMITONES: [i32; 9] = [0, 2, 4, 7, 9, 12, 14, 16, 19];

fn a3_hz(semitones: i32) -> f64 {
    220.0 * 2f64.powf(f64::from(semitones) / 12.0)
}

/// Slowly swelling low-passed noise. The swell has a whole number of periods
/// and the filter state is run once through the buffer before recording so
/// the loop point is seamless.
pub fn surf_loop() -> Vec<f32> {
    let n = (BACKGROUND_SECONDS * f64::from(TONE_RATE)) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x05EA_51DE);
    let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let alpha = 0.02;
    let mut state = 0.0;
    for x in &noise {
        state += alpha * (x - state);
    }
    (0..n)
        .map(|i| {
            state += alpha * (noise[i] - state);
            let phase = i as f64 / n as f64;
            let swell = 0.55 + 0.45 * (TAU * 2.0 * phase).sin();
            (state * swell * 2.2).clamp(-0.95, 0.95) as f32
        })
        .collect()
}

pub fn pluck(freq_hz: f64, seconds: f64) -> Vec<f32> {
    let n = (seconds * f64::from(TONE_RATE)) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(TONE_RATE);
            let attack = (t / 0.01).min(1.0);
            let env = attack * (-3.0 * t).exp();
            let tone = (TAU * freq_hz * t).sin() + 0.3 * (TAU * 2.0 * freq_hz * t).sin();
            (0.55 * env * tone) as f32
        })
        .collect()
}

pub fn bell(seconds: f64) -> Vec<f32> {
    let n = (seconds * f64::from(TONE_RATE)) as usize;
    let (f1, f2) = (a3_hz(24), a3_hz(31));
    (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(TONE_RATE);
            let env = (t / 0.005).min(1.0) * (-2.2 * t).exp();
            let s = (TAU * f1 * t).sin() + 0.6 * (TAU * f2 * t).sin() + 0.25 * (TAU * 2.76 * f1 * t).sin();
            (0.4 * env * s) as f32
        })
        .collect()
}

fn zone_tone(zone: usize) -> Vec<f32> {
    let octave = (zone / ZONE_SEMITONES.len()) as i32 * 12;
    pluck(a3_hz(ZONE_SEMITONES[zone % ZONE_SEMITONES.len()] + octave), ZONE_SECONDS)
}

/// The placeholder bank built in memory, for sessions without a manifest.
/// Grids larger than nine cells continue the ladder an octave up.
pub fn placeholder_bank(engine_rate: u32, zone_count: usize) -> SampleBank {
    let buffer = |mono: Vec<f32>| {
        let pcm = PcmBuffer::from_mono(&mono);
        PcmBuffer { frames: resample_linear(&pcm.frames, TONE_RATE, engine_rate) }
    };
    SampleBank {
        background: buffer(surf_loop()),
        zone_samples: (0..zone_count).map(|z| buffer(zone_tone(z))).collect(),
        proxi_sample: buffer(bell(PROXI_SECONDS)),
        sample_rate: engine_rate,
    }
}

fn write_wav16(path: &Path, samples: &[f32]) -> io::Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: TONE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(io::Error::other)?;
    for s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(io::Error::other)?;
    }
    w.finalize().map_err(io::Error::other)
}

/// Write the placeholder bank plus `manifest.json` into `dir`. Returns the
/// manifest path.
pub fn generate_bank(dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    write_wav16(&dir.join("background.wav"), &surf_loop())?;
    let mut zones = Vec::new();
    for i in 0..ZONE_SEMITONES.len() {
        let name = format!("zone{i}.wav");
        write_wav16(&dir.join(&name), &zone_tone(i))?;
        zones.push(PathBuf::from(name));
    }
    write_wav16(&dir.join("proxi.wav"), &bell(PROXI_SECONDS))?;
    let manifest = SampleManifest {
        background: "background.wav".into(),
        zones,
        proxi: "proxi.wav".into(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(io::Error::other)? + "\n")?;
    Ok(path)
}
