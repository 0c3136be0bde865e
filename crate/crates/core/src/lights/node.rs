//! Software stand-ins for the light boards inside the spheres.
//!
//! A node only listens to frames carrying its own sphere id. Sequence numbers
//! are checked against a window: a frame whose seq is at most 31 steps behind
//! the last accepted one (duplicates included) is stale and dropped; anything
//! else counts as newer, which covers wraparound and a restarted sender.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::frame::{decode_light_frame, Effect, LightCommand};

pub const SEQ_WINDOW: u16 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLogEntry {
    pub t_ms: u64,
    pub sphere_id: u8,
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub effect: Effect,
    pub param: u8,
    pub seq: u16,
}

impl NodeLogEntry {
    pub fn command(&self) -> LightCommand {
        LightCommand {
            sphere_id: self.sphere_id,
            r: self.r,
            g: self.g,
            b: self.b,
            effect: self.effect,
            param: self.param,
            seq: self.seq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    OtherSphere,
    Invalid,
    Stale,
}

/// Whether `seq` should replace `last` under the window rule.
pub fn seq_is_newer(last: u16, seq: u16) -> bool {
    last.wrapping_sub(seq) >= SEQ_WINDOW
}

#[derive(Debug, Clone)]
pub struct SimNode {
    pub sphere_id: u8,
    pub current: Option<LightCommand>,
    pub log: Vec<NodeLogEntry>,
    pub dropped: u64,
}

impl SimNode {
    pub fn new(sphere_id: u8) -> Self {
        Self { sphere_id, current: None, log: Vec::new(), dropped: 0 }
    }

    pub fn receive(&mut self, datagram: &[u8], t_ms: u64) -> Verdict {
        let cmd = match decode_light_frame(datagram) {
            Ok(cmd) => cmd,
            Err(e) => {
                log::debug!("node {}: dropping frame: {e}", self.sphere_id);
                self.dropped += 1;
                return Verdict::Invalid;
            }
        };
        if cmd.sphere_id != self.sphere_id {
            return Verdict::OtherSphere;
        }
        if let Some(current) = self.current {
            if !seq_is_newer(current.seq, cmd.seq) {
                self.dropped += 1;
                return Verdict::Stale;
            }
        }
        self.current = Some(cmd);
        self.log.push(NodeLogEntry {
            t_ms,
            sphere_id: cmd.sphere_id,
            r: cmd.r,
            g: cmd.g,
            b: cmd.b,
            effect: cmd.effect,
            param: cmd.param,
            seq: cmd.seq,
        });
        Verdict::Accepted
    }
}

/// A set of simulated nodes sharing one UDP socket, each with its own state.
pub struct NodeBank {
    nodes: Arc<Mutex<Vec<SimNode>>>,
    stop: Arc<AtomicBool>,
    local_addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl NodeBank {
    /// Listen on `addr` with one node per sphere id. `on_accept` sees every
    /// accepted log entry as it happens.
    pub fn spawn(
        addr: SocketAddr,
        sphere_ids: impl IntoIterator<Item = u8>,
        on_accept: impl Fn(&NodeLogEntry) + Send + 'static,
    ) -> io::Result<Self> {
        let socket = UdpSocket::bind(addr)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let local_addr = socket.local_addr()?;
        let nodes = Arc::new(Mutex::new(sphere_ids.into_iter().map(SimNode::new).collect::<Vec<_>>()));
        let stop = Arc::new(AtomicBool::new(false));
        let worker = {
            let nodes = Arc::clone(&nodes);
            let stop = Arc::clone(&stop);
            std::thread::Builder::new().name("light-nodes".into()).spawn(move || {
                let start = Instant::now();
                let mut buf = [0u8; 64];
                while !stop.load(Ordering::Relaxed) {
                    let n = match socket.recv_from(&mut buf) {
                        Ok((n, _)) => n,
                        Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                        Err(e) => {
                            log::error!("light nodes: {e}");
                            break;
                        }
                    };
                    let t_ms = start.elapsed().as_millis() as u64;
                    let mut nodes = nodes.lock().expect("node state poisoned");
                    for node in nodes.iter_mut() {
                        if node.receive(&buf[..n], t_ms) == Verdict::Accepted {
                            on_accept(node.log.last().expect("just logged"));
                        }
                    }
                }
            })?
        };
        Ok(Self { nodes, stop, local_addr, worker: Some(worker) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn snapshot(&self) -> Vec<SimNode> {
        self.nodes.lock().expect("node state poisoned").clone()
    }

    pub fn stop(mut self) -> Vec<SimNode> {
        self.shutdown();
        self.snapshot()
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for NodeBank {
    fn drop(&mut self) {
        self.shutdown();
    }
}
