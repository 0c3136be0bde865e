//! Live detector socket: newline-delimited JSON frames over TCP.
//!
//! One client is served at a time. Malformed lines and frames whose `t_ms`
//! does not advance are logged and skipped; a flaky detector should not take
//! the installation down.

use std::io::{self, BufRead, BufReader};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::SyncSender;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use super::wire::parse_detection_line;
use crate::tracking::DetectionFrame;

pub const DEFAULT_DETECTOR_PORT: u16 = 47800;

/// Stateful gate applying the live-stream acceptance rules.
#[derive(Debug, Default)]
pub struct LineGate {
    previous_ms: Option<u64>,
    line_no: usize,
    pub skipped: u64,
}

impl LineGate {
    pub fn accept(&mut self, text: &str) -> Option<DetectionFrame> {
        self.line_no += 1;
        if text.trim().is_empty() {
            return None;
        }
        let frame = match parse_detection_line(text, self.line_no) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("detector: {e}");
                self.skipped += 1;
                return None;
            }
        };
        if let Some(prev) = self.previous_ms {
            if frame.t_ms <= prev {
                log::warn!("detector: line {}: t_ms {} does not follow {prev}, dropped", self.line_no, frame.t_ms);
                self.skipped += 1;
                return None;
            }
        }
        self.previous_ms = Some(frame.t_ms);
        Some(frame)
    }
}

pub struct LiveSource {
    listener: TcpListener,
    once: bool,
}

impl LiveSource {
    /// Bind the detector port. With `once`, the source ends when its first
    /// client disconnects.
    pub fn bind(addr: SocketAddr, once: bool) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self { listener, once })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Feed frames into `tx` from a background thread. The sender is dropped
    /// (ending the stream) when `stop` is raised, the receiver hangs up, or,
    /// in `once` mode, the first client leaves.
    pub fn spawn(self, tx: SyncSender<DetectionFrame>, stop: Arc<AtomicBool>) -> io::Result<JoinHandle<()>> {
        std::thread::Builder::new().name("detector-socket".into()).spawn(move || {
            // t_ms must keep increasing across reconnects too.
            let mut gate = LineGate::default();
            while !stop.load(Ordering::Relaxed) {
                match self.listener.accept() {
                    Ok((stream, peer)) => {
                        log::info!("detector connected from {peer}");
                        let keep_going = serve_client(stream, &tx, &stop, &mut gate);
                        log::info!("detector {peer} disconnected");
                        if self.once || !keep_going {
                            break;
                        }
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(20));
                    }
                    Err(e) => {
                        log::error!("detector socket: {e}");
                        break;
                    }
                }
            }
        })
    }
}

// Returns false when the engine side has gone away.
fn serve_client(stream: TcpStream, tx: &SyncSender<DetectionFrame>, stop: &AtomicBool, gate: &mut LineGate) -> bool {
    if stream.set_nonblocking(false).is_err() || stream.set_read_timeout(Some(Duration::from_millis(100))).is_err() {
        return true;
    }
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    loop {
        if stop.load(Ordering::Relaxed) {
            return true;
        }
        match reader.read_line(&mut line) {
            Ok(0) => {
                // EOF; a partial last line without newline still counts.
                if !line.is_empty() {
                    if let Some(frame) = gate.accept(&line) {
                        if tx.send(frame).is_err() {
                            return false;
                        }
                    }
                }
                return true;
            }
            Ok(_) => {
                if line.ends_with('\n') {
                    if let Some(frame) = gate.accept(&line) {
                        // Blocks when the engine queue is full: back-pressure.
                        if tx.send(frame).is_err() {
                            return false;
                        }
                    }
                    line.clear();
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                log::warn!("detector read: {e}");
                return true;
            }
        }
    }
}
