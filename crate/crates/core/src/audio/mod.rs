//! Sound output: a pitch-shiftable background loop plus one-shot samples,
//! rendered to PCM, and an OSC emitter for driving an external patch instead.

pub mod bank;
pub mod mixer;
pub mod osc;
pub mod tones;
mod wav;

pub use bank::{load_bank, LoadError, PcmBuffer, SampleBank, SampleManifest};
pub use mixer::{MixerState, Voice, VoiceSource};
pub use osc::{osc_encode, OscError, OscSender};
pub use wav::{pcm_digest, RawPcmSink, WavSink};
