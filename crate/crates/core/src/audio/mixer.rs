use serde::{Deserialize, Serialize};

use super::bank::{PcmBuffer, SampleBank};
use crate::events::EngineEvent;

pub const ZONE_VOICE_GAIN: f32 = 0.8;
pub const PROXI_VOICE_GAIN: f32 = 1.0;
pub const DEFAULT_BG_GAIN: f32 = 0.5;
pub const DEFAULT_BLOCK_FRAMES: usize = 256;
/// Past this many simultaneous voices a warning is logged; nothing is stolen.
pub const VOICE_WARN_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoiceSource {
    Zone(usize),
    Proximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    pub source: VoiceSource,
    pub play_head: usize,
    pub gain: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixerState {
    /// Fractional read position into the background loop.
    pub bg_phase: f64,
    pub pitch_ratio: f64,
    pub bg_gain: f32,
    pub voices: Vec<Voice>,
}

impl Default for MixerState {
    fn default() -> Self {
        Self::new(DEFAULT_BG_GAIN)
    }
}

fn voice_buffer(bank: &SampleBank, source: VoiceSource) -> &PcmBuffer {
    match source {
        VoiceSource::Zone(i) => &bank.zone_samples[i],
        VoiceSource::Proximity => &bank.proxi_sample,
    }
}

impl MixerState {
    pub fn new(bg_gain: f32) -> Self {
        Self { bg_phase: 0.0, pitch_ratio: 1.0, bg_gain, voices: Vec::new() }
    }

    pub fn apply_event(&mut self, bank: &SampleBank, event: &EngineEvent) {
        match event {
            EngineEvent::ZoneEntry { zone, .. } => {
                let index = zone.0 as usize;
                if index < bank.zone_samples.len() {
                    self.push_voice(VoiceSource::Zone(index), ZONE_VOICE_GAIN);
                } else {
                    log::warn!("no sample for zone {index}");
                }
            }
            EngineEvent::ProximityTrigger { .. } => self.push_voice(VoiceSource::Proximity, PROXI_VOICE_GAIN),
            EngineEvent::PitchUpdate { ratio, .. } => self.pitch_ratio = *ratio,
            EngineEvent::TrackBorn { .. } | EngineEvent::TrackLost { .. } => {}
        }
    }

    fn push_voice(&mut self, source: VoiceSource, gain: f32) {
        self.voices.push(Voice { source, play_head: 0, gain });
        if self.voices.len() == VOICE_WARN_THRESHOLD + 1 {
            log::warn!("{} simultaneous voices", self.voices.len());
        }
    }

    /// Render `n_frames` of stereo output.
    ///
    /// The background loop advances by `pitch_ratio` per frame with linear
    /// interpolation and wraps seamlessly. Voices play at unit rate in the
    /// order they were created and drop out when exhausted. The sum is
    /// accumulated background first, then voices, and hard-clamped to [-1, 1].
    pub fn render(&mut self, bank: &SampleBank, n_frames: usize) -> Vec<[f32; 2]> {
        let mut out = Vec::with_capacity(n_frames);
        self.render_into(bank, n_frames, &mut out);
        out
    }

    pub fn render_into(&mut self, bank: &SampleBank, n_frames: usize, out: &mut Vec<[f32; 2]>) {
        let bg = &bank.background.frames;
        let bg_len = bg.len();
        for _ in 0..n_frames {
            let mut acc = [0.0f32; 2];
            if bg_len > 0 {
                let s = background_sample(bg, self.bg_phase);
                acc = [s[0] * self.bg_gain, s[1] * self.bg_gain];
                self.bg_phase += self.pitch_ratio;
                if self.bg_phase >= bg_len as f64 {
                    self.bg_phase -= bg_len as f64;
                    // A ratio larger than the loop itself.
                    if self.bg_phase >= bg_len as f64 {
                        self.bg_phase %= bg_len as f64;
                    }
                }
            }
            for voice in &mut self.voices {
                let frames = &voice_buffer(bank, voice.source).frames;
                if let Some(s) = frames.get(voice.play_head) {
                    acc[0] += s[0] * voice.gain;
                    acc[1] += s[1] * voice.gain;
                }
                voice.play_head += 1;
            }
            self.voices.retain(|v| v.play_head < voice_buffer(bank, v.source).len());
            out.push([acc[0].clamp(-1.0, 1.0), acc[1].clamp(-1.0, 1.0)]);
        }
    }
}

fn background_sample(bg: &[[f32; 2]], phase: f64) -> [f32; 2] {
    let i = phase.floor() as usize;
    let frac = (phase - i as f64) as f32;
    let a = bg[i];
    if frac == 0.0 {
        return a;
    }
    let b = bg[(i + 1) % bg.len()];
    [a[0] + (b[0] - a[0]) * frac, a[1] + (b[1] - a[1]) * frac]
}
