//! A session: one frame source driving the engine, with every output hung
//! off it as an observer.
//!
//! File outputs (event log, frame recorder, WAV) run on the engine thread.
//! With a WAV target and no live PCM stream, audio is rendered on the engine
//! thread too, paced by frame timestamps rather than the wall clock, so a
//! replay renders bit-identical PCM however fast it runs. Network outputs
//! (OSC, light datagrams) each get a worker behind a bounded queue that drops
//! its oldest entry when full, so a stalled socket can never hold up the
//! engine. The live audio thread gets every event; it drains its queue once
//! per block.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Sender, TrySendError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{ConfigError, IngestConfig, InstallationConfig};
use super::engine::{Engine, EngineError, FrameOutput};
use crate::audio::tones::placeholder_bank;
use crate::audio::{load_bank, LoadError, MixerState, OscSender, RawPcmSink, SampleBank, WavSink};
use crate::events::{EngineEvent, EventKind};
use crate::ingestion::console::{event_message, light_message};
use crate::ingestion::{ConsoleHub, ConsoleServer, IngestError, LiveSource, Recorder, ReplaySource};
use crate::lights::{Broadcaster, LightCommand, NodeLogEntry};
use crate::tracking::DetectionFrame;

/// Capacity of every inter-thread queue, in frames or messages.
pub const QUEUE_CAPACITY: usize = 256;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sample bank: {0}")]
    Samples(#[from] LoadError),
    #[error(transparent)]
    Input(#[from] IngestError),
    #[error("{what}: {source}")]
    Io {
        what: String,
        #[source]
        source: io::Error,
    },
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
}

impl SessionError {
    fn io(what: impl Into<String>, source: io::Error) -> Self {
        Self::Io { what: what.into(), source }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Samples(_) => 1,
            Self::Input(_) => 2,
            Self::Io { .. } | Self::Engine(_) => 3,
        }
    }
}

/// Per-run outputs that are not part of the installation config.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    /// Overrides `audio.render_wav`.
    pub wav: Option<PathBuf>,
    pub event_log: Option<PathBuf>,
    /// Write incoming frames to this `.sjl` file.
    pub record: Option<PathBuf>,
    pub console: Option<ConsoleHub>,
    pub stop: Arc<AtomicBool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionReport {
    pub frames: u64,
    pub events: BTreeMap<String, u64>,
    /// Light commands the engine produced.
    pub light_commands: u64,
    /// Light datagrams actually handed to the network.
    pub light_datagrams: u64,
    pub osc_datagrams: u64,
    pub pcm_frames: u64,
    pub event_log_sha256: String,
    pub wav_sha256: Option<String>,
}

impl SessionReport {
    fn empty() -> Self {
        Self {
            events: EventKind::ALL.iter().map(|k| (k.as_str().to_owned(), 0)).collect(),
            ..Self::default()
        }
    }

    pub fn event_count(&self, kind: EventKind) -> u64 {
        self.events.get(kind.as_str()).copied().unwrap_or(0)
    }
}

/// Bounded queue to a worker thread; a full queue sheds its oldest item.
struct DropOldest<T, R> {
    tx: Sender<T>,
    oldest: crossbeam_channel::Receiver<T>,
    worker: JoinHandle<R>,
    shed: u64,
}

impl<T: Send + 'static, R: Send + 'static> DropOldest<T, R> {
    fn spawn(name: &str, work: impl FnOnce(crossbeam_channel::Receiver<T>) -> R + Send + 'static) -> io::Result<Self> {
        let (tx, rx) = crossbeam_channel::bounded(QUEUE_CAPACITY);
        let oldest = rx.clone();
        let worker = std::thread::Builder::new().name(name.into()).spawn(move || work(rx))?;
        Ok(Self { tx, oldest, worker, shed: 0 })
    }

    fn push(&mut self, mut item: T) {
        loop {
            match self.tx.try_send(item) {
                Ok(()) | Err(TrySendError::Disconnected(_)) => return,
                Err(TrySendError::Full(back)) => {
                    if self.oldest.try_recv().is_ok() {
                        self.shed += 1;
                    }
                    item = back;
                }
            }
        }
    }

    /// Lossless variant for the audio queue: waits for room instead.
    fn push_blocking(&self, item: T) {
        let _ = self.tx.send(item);
    }

    fn finish(self, name: &str) -> Option<R> {
        if self.shed > 0 {
            log::warn!("{name}: {} queued items dropped", self.shed);
        }
        drop(self.tx);
        drop(self.oldest);
        self.worker.join().map_err(|_| log::error!("{name} worker panicked")).ok()
    }
}

struct OfflineAudio {
    bank: SampleBank,
    mixer: MixerState,
    wav: WavSink,
    block: Vec<[f32; 2]>,
    block_frames: usize,
    rate: u64,
    origin_ms: Option<u64>,
}

impl OfflineAudio {
    /// Render up to the audio position of `t_ms`, measured from the first frame.
    fn advance_to(&mut self, t_ms: u64) -> io::Result<()> {
        let origin = *self.origin_ms.get_or_insert(t_ms);
        let target = ((u128::from(t_ms - origin) * u128::from(self.rate)) / 1000) as u64;
        while self.wav.frames_written() < target {
            let n = (target - self.wav.frames_written()).min(self.block_frames as u64) as usize;
            self.block.clear();
            self.mixer.render_into(&self.bank, n, &mut self.block);
            self.wav.write_block(&self.block)?;
        }
        Ok(())
    }
}

struct LiveAudioResult {
    frames: u64,
    wav_sha256: Option<String>,
}

enum AudioOut {
    Off,
    Offline(Box<OfflineAudio>),
    Live(DropOldest<EngineEvent, LiveAudioResult>),
}

fn open_raw_pcm(path: &Path) -> io::Result<RawPcmSink<Box<dyn Write + Send>>> {
    let out: Box<dyn Write + Send> = if path.as_os_str() == "-" {
        Box::new(io::stdout())
    } else {
        Box::new(BufWriter::new(File::create(path)?))
    };
    Ok(RawPcmSink::new(out))
}

/// Wall-clock audio: a block every `block_frames / rate` seconds, events
/// applied at block boundaries.
fn live_audio(
    rx: crossbeam_channel::Receiver<EngineEvent>,
    bank: SampleBank,
    mut mixer: MixerState,
    mut raw: Option<RawPcmSink<Box<dyn Write + Send>>>,
    mut wav: Option<WavSink>,
    block_frames: usize,
) -> LiveAudioResult {
    let rate = f64::from(bank.sample_rate);
    let start = Instant::now();
    let mut frames = 0u64;
    let mut block = Vec::with_capacity(block_frames);
    'render: loop {
        loop {
            match rx.try_recv() {
                Ok(ev) => mixer.apply_event(&bank, &ev),
                Err(crossbeam_channel::TryRecvError::Empty) => break,
                Err(crossbeam_channel::TryRecvError::Disconnected) => break 'render,
            }
        }
        block.clear();
        mixer.render_into(&bank, block_frames, &mut block);
        if let Some(sink) = raw.as_mut() {
            if let Err(e) = sink.write_block(&block) {
                log::error!("pcm stream: {e}; stream closed");
                raw = None;
            }
        }
        if let Some(sink) = wav.as_mut() {
            if let Err(e) = sink.write_block(&block) {
                log::error!("wav output: {e}; recording stopped");
                wav = None;
            }
        }
        frames += block.len() as u64;
        let due = start + Duration::from_secs_f64(frames as f64 / rate);
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
    let wav_sha256 = wav.and_then(|w| w.finish().map_err(|e| log::error!("wav output: {e}")).ok());
    LiveAudioResult { frames, wav_sha256 }
}

struct LightStats {
    sent: u64,
    failed: u64,
}

pub struct Session {
    engine: Engine,
    report: SessionReport,
    log_hash: Sha256,
    event_log: Option<Recorder>,
    recorder: Option<Recorder>,
    audio: AudioOut,
    osc: Option<DropOldest<EngineEvent, u64>>,
    lights: Option<DropOldest<Vec<LightCommand>, LightStats>>,
    console: Option<ConsoleHub>,
}

impl Session {
    pub fn start(cfg: &InstallationConfig, opts: &SessionOptions) -> Result<Self, SessionError> {
        cfg.validate()?;
        let zone_count = cfg.zone_grid().zone_count();
        let a = &cfg.audio;
        let wav_path = opts.wav.as_ref().or(a.render_wav.as_ref());

        let audio = if wav_path.is_none() && a.raw_pcm_out.is_none() {
            AudioOut::Off
        } else {
            let bank = match &a.manifest_path {
                Some(path) => load_bank(path, a.engine_rate, zone_count)?,
                None => placeholder_bank(a.engine_rate, zone_count),
            };
            let wav = wav_path
                .map(|p| WavSink::create(p, a.engine_rate).map_err(|e| SessionError::io(p.display().to_string(), e)))
                .transpose()?;
            let mixer = MixerState::new(a.bg_gain);
            match &a.raw_pcm_out {
                None => AudioOut::Offline(Box::new(OfflineAudio {
                    bank,
                    mixer,
                    wav: wav.expect("wav path checked above"),
                    block: Vec::with_capacity(a.block_frames),
                    block_frames: a.block_frames,
                    rate: u64::from(a.engine_rate),
                    origin_ms: None,
                })),
                Some(path) => {
                    let raw = open_raw_pcm(path).map_err(|e| SessionError::io(path.display().to_string(), e))?;
                    let block_frames = a.block_frames;
                    let queue = DropOldest::spawn("audio", move |rx| {
                        live_audio(rx, bank, mixer, Some(raw), wav, block_frames)
                    })
                    .map_err(|e| SessionError::io("audio thread", e))?;
                    AudioOut::Live(queue)
                }
            }
        };

        let osc = match &a.osc_target {
            Some(target) => {
                let sender = OscSender::connect(target).map_err(|e| SessionError::io(format!("osc target {target}"), io::Error::other(e)))?;
                let queue = DropOldest::spawn("osc", move |rx| {
                    let mut sent = 0;
                    for ev in rx {
                        match sender.send(&ev) {
                            Ok(true) => sent += 1,
                            Ok(false) => {}
                            Err(e) => log::warn!("osc: {e}"),
                        }
                    }
                    sent
                })
                .map_err(|e| SessionError::io("osc thread", e))?;
                Some(queue)
            }
            None => None,
        };

        let lights = if cfg.lights.enabled {
            let endpoint = cfg.lights.endpoint();
            let mut broadcaster =
                Broadcaster::udp(endpoint).map_err(|e| SessionError::io(format!("light socket for {endpoint}"), e))?;
            let queue = DropOldest::spawn("lights", move |rx: crossbeam_channel::Receiver<Vec<LightCommand>>| {
                let mut stats = LightStats { sent: 0, failed: 0 };
                for batch in rx {
                    let report = broadcaster.broadcast(&batch);
                    for e in &report.errors {
                        log::warn!("lights: {e}");
                    }
                    stats.sent += report.sent;
                    stats.failed += report.failed;
                }
                stats
            })
            .map_err(|e| SessionError::io("lights thread", e))?;
            Some(queue)
        } else {
            None
        };

        let create = |path: &PathBuf| Recorder::create(path).map_err(|e| SessionError::io(path.display().to_string(), e));
        Ok(Self {
            engine: Engine::new(cfg),
            report: SessionReport::empty(),
            log_hash: Sha256::new(),
            event_log: opts.event_log.as_ref().map(create).transpose()?,
            recorder: opts.record.as_ref().map(create).transpose()?,
            audio,
            osc,
            lights,
            console: opts.console.clone(),
        })
    }

    pub fn feed(&mut self, frame: &DetectionFrame) -> Result<FrameOutput, SessionError> {
        if let Some(rec) = self.recorder.as_mut() {
            if let Err(e) = rec.write_frame(frame) {
                log::error!("recorder: {e}; recording stopped");
                self.recorder = None;
            }
        }
        let out = self.engine.process(frame)?;
        self.report.frames += 1;

        if let AudioOut::Offline(audio) = &mut self.audio {
            if let Err(e) = audio.advance_to(frame.t_ms) {
                log::error!("wav output: {e}; audio stopped");
                self.audio = AudioOut::Off;
            }
        }
        for ev in &out.events {
            let line = ev.to_json_line();
            self.log_hash.update(line.as_bytes());
            self.log_hash.update(b"\n");
            *self.report.events.entry(ev.kind().as_str().to_owned()).or_default() += 1;
            if let Some(log) = self.event_log.as_mut() {
                if let Err(e) = log.write_line(&line) {
                    log::error!("event log: {e}; logging stopped");
                    self.event_log = None;
                }
            }
            match &mut self.audio {
                AudioOut::Off => {}
                AudioOut::Offline(audio) => audio.mixer.apply_event(&audio.bank, ev),
                AudioOut::Live(queue) => queue.push_blocking(ev.clone()),
            }
            if let Some(osc) = self.osc.as_mut() {
                if !matches!(ev, EngineEvent::TrackBorn { .. } | EngineEvent::TrackLost { .. }) {
                    osc.push(ev.clone());
                }
            }
            if let Some(hub) = &self.console {
                hub.publish(event_message(ev));
            }
        }

        self.report.light_commands += out.lights.len() as u64;
        if let Some(hub) = &self.console {
            for cmd in &out.lights {
                hub.publish(light_message(&NodeLogEntry {
                    t_ms: frame.t_ms,
                    sphere_id: cmd.sphere_id,
                    r: cmd.r,
                    g: cmd.g,
                    b: cmd.b,
                    effect: cmd.effect,
                    param: cmd.param,
                    seq: cmd.seq,
                }));
            }
        }
        if let Some(lights) = self.lights.as_mut() {
            if !out.lights.is_empty() {
                lights.push(out.lights.clone());
            }
        }
        Ok(out)
    }

    pub fn finish(mut self) -> Result<SessionReport, SessionError> {
        if let Some(rec) = self.recorder.take() {
            rec.finish().map_err(|e| SessionError::io("recorder", e))?;
        }
        if let Some(log) = self.event_log.take() {
            log.finish().map_err(|e| SessionError::io("event log", e))?;
        }
        match std::mem::replace(&mut self.audio, AudioOut::Off) {
            AudioOut::Off => {}
            AudioOut::Offline(audio) => {
                self.report.pcm_frames = audio.wav.frames_written();
                self.report.wav_sha256 = Some(audio.wav.finish().map_err(|e| SessionError::io("wav output", e))?);
            }
            AudioOut::Live(queue) => {
                if let Some(result) = queue.finish("audio") {
                    self.report.pcm_frames = result.frames;
                    self.report.wav_sha256 = result.wav_sha256;
                }
            }
        }
        if let Some(osc) = self.osc.take() {
            self.report.osc_datagrams = osc.finish("osc").unwrap_or(0);
        }
        if let Some(lights) = self.lights.take() {
            if let Some(stats) = lights.finish("lights") {
                if stats.failed > 0 {
                    log::warn!("lights: {} datagrams failed", stats.failed);
                }
                self.report.light_datagrams = stats.sent;
            }
        }
        self.report.event_log_sha256 = hex(&self.log_hash.finalize_reset());
        Ok(self.report)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run a session over any frame sequence. Sinks are flushed even when the
/// source fails; the source error is returned after that.
pub fn run_frames<I>(cfg: &InstallationConfig, opts: &SessionOptions, frames: I) -> Result<SessionReport, SessionError>
where
    I: IntoIterator<Item = Result<DetectionFrame, IngestError>>,
{
    let mut session = Session::start(cfg, opts)?;
    let mut failure = None;
    for frame in frames {
        if opts.stop.load(Ordering::Relaxed) {
            break;
        }
        match frame {
            Ok(frame) => {
                if let Err(e) = session.feed(&frame) {
                    failure = Some(e);
                    break;
                }
            }
            Err(e) => {
                failure = Some(e.into());
                break;
            }
        }
    }
    let report = session.finish()?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Frames from a background source until it hangs up or `stop` is raised.
pub fn channel_frames(rx: Receiver<DetectionFrame>, stop: Arc<AtomicBool>) -> impl Iterator<Item = Result<DetectionFrame, IngestError>> {
    std::iter::from_fn(move || loop {
        if stop.load(Ordering::Relaxed) {
            return None;
        }
        match rx.recv_timeout(Duration::from_millis(100)) {
            Ok(frame) => return Some(Ok(frame)),
            Err(RecvTimeoutError::Timeout) => continue,
            Err(RecvTimeoutError::Disconnected) => return None,
        }
    })
}

/// Run the source named by `cfg.ingest` to completion (or until `stop`).
pub fn run_session(cfg: &InstallationConfig, opts: &SessionOptions) -> Result<SessionReport, SessionError> {
    cfg.validate()?;
    let stop = Arc::clone(&opts.stop);
    let mut opts = opts.clone();
    let mut workers = Vec::new();
    let (tx, rx) = mpsc::sync_channel(QUEUE_CAPACITY);
    let console_driven = matches!(cfg.ingest, IngestConfig::Ui);
    let mut tx = Some(tx);

    if cfg.console.enabled || console_driven {
        let endpoint = cfg.console.endpoint();
        let server = ConsoleServer::bind(endpoint).map_err(|e| SessionError::io(format!("console socket {endpoint}"), e))?;
        log::info!("console listening on ws://{}", server.local_addr().unwrap_or(endpoint));
        opts.console = Some(server.hub());
        let frames = if console_driven { tx.take() } else { None };
        let handle = server.spawn(frames, Arc::clone(&stop)).map_err(|e| SessionError::io("console thread", e))?;
        workers.push(handle);
    }

    let result = match &cfg.ingest {
        IngestConfig::Replay { path, speed } => {
            drop(tx);
            let source = ReplaySource::open(path, *speed)?;
            run_frames(cfg, &opts, source)
        }
        IngestConfig::Live { bind, port } => {
            let addr = (*bind, *port).into();
            let source = LiveSource::bind(addr, false).map_err(|e| SessionError::io(format!("detector socket {addr}"), e))?;
            log::info!("detector socket listening on {}", source.local_addr().unwrap_or(addr));
            let handle = source
                .spawn(tx.take().expect("sender unused"), Arc::clone(&stop))
                .map_err(|e| SessionError::io("detector thread", e))?;
            workers.push(handle);
            run_frames(cfg, &opts, channel_frames(rx, Arc::clone(&stop)))
        }
        IngestConfig::Ui => run_frames(cfg, &opts, channel_frames(rx, Arc::clone(&stop))),
    };

    stop.store(true, Ordering::Relaxed);
    for w in workers {
        let _ = w.join();
    }
    result
}
