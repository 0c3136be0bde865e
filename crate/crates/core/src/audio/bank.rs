use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ENGINE_RATE: u32 = 48_000;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read sample manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed sample manifest {path}: {source}")]
    ManifestSyntax {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("sample manifest lists {found} zone samples, expected {expected} (zone {missing} is missing)")]
    MissingZone {
        found: usize,
        expected: usize,
        missing: usize,
    },
    #[error("{label} ({path}): {reason}")]
    File {
        label: String,
        path: PathBuf,
        reason: String,
    },
}

/// Stereo PCM at the engine rate, one `[left, right]` pair per frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PcmBuffer {
    pub frames: Vec<[f32; 2]>,
}

impl PcmBuffer {
    pub fn from_mono(samples: &[f32]) -> Self {
        Self { frames: samples.iter().map(|s| [*s, *s]).collect() }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBank {
    pub background: PcmBuffer,
    pub zone_samples: Vec<PcmBuffer>,
    pub proxi_sample: PcmBuffer,
    pub sample_rate: u32,
}

/// JSON sample manifest. Relative paths resolve against the manifest's own
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub background: PathBuf,
    pub zones: Vec<PathBuf>,
    pub proxi: PathBuf,
}

impl SampleManifest {
    pub fn read(path: &Path) -> Result<Self, LoadError> {
        let text = fs::read_to_string(path)
            .map_err(|source| LoadError::Manifest { path: path.to_owned(), source })?;
        serde_json::from_str(&text)
            .map_err(|source| LoadError::ManifestSyntax { path: path.to_owned(), source })
    }
}

/// Load every sample named by the manifest at `manifest_path`, converted to
/// stereo float and resampled to `engine_rate`.
pub fn load_bank(manifest_path: &Path, engine_rate: u32, zone_count: usize) -> Result<SampleBank, LoadError> {
    let manifest = SampleManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    load_bank_from(&manifest, base, engine_rate, zone_count)
}

pub fn load_bank_from(
    manifest: &SampleManifest,
    base: &Path,
    engine_rate: u32,
    zone_count: usize,
) -> Result<SampleBank, LoadError> {
    if manifest.zones.len() < zone_count {
        return Err(LoadError::MissingZone {
            found: manifest.zones.len(),
            expected: zone_count,
            missing: manifest.zones.len(),
        });
    }
    if manifest.zones.len() > zone_count {
        log::warn!(
            "sample manifest lists {} zone samples, using the first {zone_count}",
            manifest.zones.len()
        );
    }
    let load = |label: String, rel: &Path| load_wav(&label, &base.join(rel), engine_rate);
    let background = load("background".into(), &manifest.background)?;
    let zone_samples = manifest.zones[..zone_count]
        .iter()
        .enumerate()
        .map(|(i, path)| load(format!("zone {i}"), path))
        .collect::<Result<Vec<_>, _>>()?;
    let proxi_sample = load("proximity sample".into(), &manifest.proxi)?;
    Ok(SampleBank { background, zone_samples, proxi_sample, sample_rate: engine_rate })
}

/// Decode a 16- or 24-bit integer PCM WAV (mono or stereo) and resample it.
pub fn load_wav(label: &str, path: &Path, engine_rate: u32) -> Result<PcmBuffer, LoadError> {
    let fail = |reason: String| LoadError::File { label: label.to_owned(), path: path.to_owned(), reason };
    let reader = hound::WavReader::open(path).map_err(|e| fail(e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || !matches!(spec.bits_per_sample, 16 | 24) {
        return Err(fail(format!(
            "unsupported sample format {:?} {}-bit, expected 16- or 24-bit integer PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if !matches!(spec.channels, 1 | 2) {
        return Err(fail(format!("{} channels, expected mono or stereo", spec.channels)));
    }
    let scale = 1.0 / (1u32 << (spec.bits_per_sample - 1)) as f32;
    let samples = reader
        .into_samples::<i32>()
        .map(|s| s.map(|v| v as f32 * scale))
        .collect::<Result<Vec<f32>, _>>()
        .map_err(|e| fail(e.to_string()))?;
    let frames: Vec<[f32; 2]> = if spec.channels == 1 {
        samples.iter().map(|s| [*s, *s]).collect()
    } else {
        samples.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    };
    Ok(PcmBuffer { frames: resample_linear(&frames, spec.sample_rate, engine_rate) })
}

/// Output length for resampling `n` frames from `from_rate` to `to_rate`.
pub fn resampled_len(n: usize, from_rate: u32, to_rate: u32) -> usize {
    (n as f64 * f64::from(to_rate) / f64::from(from_rate)).round() as usize
}

/// Linear-interpolation resampler that keeps both endpoints: output frame `j`
/// reads the source at position `j·(n−1)/(m−1)`.
pub fn resample_linear(frames: &[[f32; 2]], from_rate: u32, to_rate: u32) -> Vec<[f32; 2]> {
    if from_rate == to_rate || frames.len() < 2 {
        return frames.to_vec();
    }
    let n = frames.len();
    let m = resampled_len(n, from_rate, to_rate).max(2);
    let step = (n - 1) as f64 / (m - 1) as f64;
    (0..m)
        .map(|j| {
            let pos = j as f64 * step;
            let i = (pos.floor() as usize).min(n - 1);
            let frac = (pos - i as f64) as f32;
            if frac == 0.0 || i + 1 >= n {
                frames[i]
            } else {
                let (a, b) = (frames[i], frames[i + 1]);
                [a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac]
            }
        })
        .collect()
}
