use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

/// Writes rendered blocks as a 32-bit float stereo WAV file and keeps a
/// SHA-256 over the interleaved little-endian samples, so runs can be compared
/// without rereading the file.
pub struct WavSink {
    writer: Option<hound::WavWriter<BufWriter<File>>>,
    hasher: Sha256,
    frames: u64,
}

impl WavSink {
    pub fn create(path: &Path, sample_rate: u32) -> io::Result<Self> {
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let writer = hound::WavWriter::create(path, spec).map_err(io::Error::other)?;
        Ok(Self { writer: Some(writer), hasher: Sha256::new(), frames: 0 })
    }

    /// A sink that only hashes.
    pub fn hash_only() -> Self {
        Self { writer: None, hasher: Sha256::new(), frames: 0 }
    }

    pub fn write_block(&mut self, block: &[[f32; 2]]) -> io::Result<()> {
        for frame in block {
            for s in frame {
                self.hasher.update(s.to_le_bytes());
            }
        }
        self.frames += block.len() as u64;
        if let Some(w) = self.writer.as_mut() {
            for frame in block {
                w.write_sample(frame[0]).map_err(io::Error::other)?;
                w.write_sample(frame[1]).map_err(io::Error::other)?;
            }
        }
        Ok(())
    }

    pub fn frames_written(&self) -> u64 {
        self.frames
    }

    /// Finalize the file header and return the PCM digest as hex.
    pub fn finish(mut self) -> io::Result<String> {
        if let Some(w) = self.writer.take() {
            w.finalize().map_err(io::Error::other)?;
        }
        Ok(hex(&self.hasher.finalize_reset()))
    }
}

/// SHA-256 of interleaved little-endian f32 samples, hex encoded.
pub fn pcm_digest(frames: &[[f32; 2]]) -> String {
    let mut h = Sha256::new();
    for f in frames {
        h.update(f[0].to_le_bytes());
        h.update(f[1].to_le_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Raw interleaved f32 little-endian stream, e.g. to pipe into a player.
pub struct RawPcmSink<W: Write> {
    out: W,
}

impl<W: Write> RawPcmSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write_block(&mut self, block: &[[f32; 2]]) -> io::Result<()> {
        for f in block {
            self.out.write_all(&f[0].to_le_bytes())?;
            self.out.write_all(&f[1].to_le_bytes())?;
        }
        self.out.flush()
    }
}
