//! WebSocket endpoint for the browser operator console.
//!
//! Every message is a JSON envelope `{"kind": ..., "data": ...}` wrapping one
//! of the canonical line formats:
//!
//! * `frame`: console to engine, a detection wire frame;
//! * `event`: engine to console, an event log line;
//! * `light`: engine to console, a light state `{t_ms, sphere_id, r, g, b, effect, param, seq}`.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tungstenite::{Message, WebSocket};

use super::live::LineGate;
use super::wire::frame_to_line;
use crate::events::EngineEvent;
use crate::lights::NodeLogEntry;
use crate::tracking::DetectionFrame;

pub const DEFAULT_CONSOLE_PORT: u16 = 47802;
const CLIENT_QUEUE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub kind: String,
    pub data: Value,
}

pub fn event_message(event: &EngineEvent) -> String {
    envelope("event", &event.to_json_line())
}

pub fn light_message(light: &NodeLogEntry) -> String {
    envelope("light", &serde_json::to_string(light).expect("lights serialize"))
}

pub fn frame_message(frame: &DetectionFrame) -> String {
    envelope("frame", &frame_to_line(frame))
}

// Splices the payload in verbatim so its key order matches the log formats.
fn envelope(kind: &str, data: &str) -> String {
    format!(r#"{{"kind":"{kind}","data":{data}}}"#)
}

/// Fan-out to all connected console clients. Slow clients lose messages
/// rather than stall the engine.
#[derive(Debug, Clone, Default)]
pub struct ConsoleHub {
    clients: Arc<Mutex<Vec<SyncSender<String>>>>,
}

impl ConsoleHub {
    pub fn publish(&self, message: String) {
        let mut clients = self.clients.lock().expect("console hub poisoned");
        clients.retain(|tx| match tx.try_send(message.clone()) {
            Ok(()) | Err(TrySendError::Full(_)) => true,
            Err(TrySendError::Disconnected(_)) => false,
        });
    }

    pub fn client_count(&self) -> usize {
        self.clients.lock().expect("console hub poisoned").len()
    }

    fn register(&self) -> Receiver<String> {
        let (tx, rx) = mpsc::sync_channel(CLIENT_QUEUE);
        self.clients.lock().expect("console hub poisoned").push(tx);
        rx
    }
}

pub struct ConsoleServer {
    listener: TcpListener,
    hub: ConsoleHub,
}

impl ConsoleServer {
    pub fn bind(addr: SocketAddr) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(Self { listener, hub: ConsoleHub::default() })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn hub(&self) -> ConsoleHub {
        self.hub.clone()
    }

    /// Accept clients until `stop`. Frames from clients go to `frames` when
    /// given (console-driven sessions) and are ignored otherwise.
    pub fn spawn(self, frames: Option<SyncSender<DetectionFrame>>, stop: Arc<AtomicBool>) -> io::Result<JoinHandle<()>> {
        std::thread::Builder::new().name("console-accept".into()).spawn(move || {
            let gate = Arc::new(Mutex::new(LineGate::default()));
            let mut workers = Vec::new();
            while !stop.load(Ordering::Relaxed) {
                match self.listener.accept() {
                    Ok((stream, peer)) => {
                        log::info!("console connected from {peer}");
                        let outbound = self.hub.register();
                        let frames = frames.clone();
                        let stop = Arc::clone(&stop);
                        let gate = Arc::clone(&gate);
                        let spawned = std::thread::Builder::new()
                            .name(format!("console-{peer}"))
                            .spawn(move || serve_client(stream, outbound, frames, &stop, &gate));
                        match spawned {
                            Ok(h) => workers.push(h),
                            Err(e) => log::error!("console worker: {e}"),
                        }
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(20));
                    }
                    Err(e) => {
                        log::error!("console socket: {e}");
                        break;
                    }
                }
            }
            for w in workers {
                let _ = w.join();
            }
        })
    }
}

fn serve_client(
    stream: TcpStream,
    outbound: Receiver<String>,
    frames: Option<SyncSender<DetectionFrame>>,
    stop: &AtomicBool,
    gate: &Mutex<LineGate>,
) {
    if stream.set_nonblocking(false).is_err() {
        return;
    }
    let mut ws: WebSocket<TcpStream> = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("console handshake: {e}");
            return;
        }
    };
    if ws.get_mut().set_read_timeout(Some(Duration::from_millis(5))).is_err() {
        return;
    }
    while !stop.load(Ordering::Relaxed) {
        match ws.read() {
            Ok(Message::Text(text)) => handle_inbound(text.as_str(), frames.as_ref(), gate),
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                log::info!("console client gone: {e}");
                break;
            }
        }
        let mut sent = false;
        while let Ok(message) = outbound.try_recv() {
            if ws.write(Message::text(message)).is_err() {
                return;
            }
            sent = true;
        }
        if sent && ws.flush().is_err() {
            return;
        }
    }
    let _ = ws.close(None);
}

fn handle_inbound(text: &str, frames: Option<&SyncSender<DetectionFrame>>, gate: &Mutex<LineGate>) {
    let envelope: Envelope = match serde_json::from_str(text) {
        Ok(e) => e,
        Err(e) => {
            log::warn!("console: bad message: {e}");
            return;
        }
    };
    if envelope.kind != "frame" {
        log::debug!("console: ignoring `{}` message", envelope.kind);
        return;
    }
    let Some(tx) = frames else {
        log::debug!("console: frames ignored, session is not console-driven");
        return;
    };
    let line = envelope.data.to_string();
    let frame = gate.lock().expect("console gate poisoned").accept(&line);
    if let Some(frame) = frame {
        let _ = tx.send(frame);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ZoneIndex;

    #[test]
    fn envelopes() {
        let ev = EngineEvent::ZoneEntry { t_ms: 3, track_id: 1, zone: ZoneIndex(4) };
        assert_eq!(
            event_message(&ev),
            r#"{"kind":"event","data":{"type":"zone_entry","t_ms":3,"track_id":1,"zone":4}}"#
        );
        let frame = DetectionFrame { t_ms: 9, detections: vec![] };
        assert_eq!(frame_message(&frame), r#"{"kind":"frame","data":{"t_ms":9,"detections":[]}}"#);
    }

    #[test]
    fn round_trip_over_websocket() {
        let server = ConsoleServer::bind("127.0.0.1:0".parse().unwrap()).unwrap();
        let addr = server.local_addr().unwrap();
        let hub = server.hub();
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = mpsc::sync_channel(16);
        let handle = server.spawn(Some(tx), Arc::clone(&stop)).unwrap();

        let (mut client, _) = tungstenite::connect(format!("ws://{addr}")).unwrap();
        client.send(Message::text(frame_message(&DetectionFrame { t_ms: 1, detections: vec![] }))).unwrap();
        let frame = rx.recv_timeout(Duration::from_secs(5)).unwrap();
        assert_eq!(frame.t_ms, 1);

        while hub.client_count() == 0 {
            std::thread::sleep(Duration::from_millis(5));
        }
        hub.publish(event_message(&EngineEvent::TrackBorn { t_ms: 1, track_id: 0 }));
        let reply = client.read().unwrap();
        let env: Envelope = serde_json::from_str(reply.to_text().unwrap()).unwrap();
        assert_eq!(env.kind, "event");
        assert_eq!(env.data["type"], "track_born");

        stop.store(true, Ordering::Relaxed);
        drop(client);
        handle.join().unwrap();
    }
}
