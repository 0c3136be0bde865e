use std::collections::BTreeMap;
use std::io;
use std::net::{SocketAddr, UdpSocket};

use serde::Serialize;

use super::frame::{encode_light_frame, LightCommand};

pub const DEFAULT_LIGHT_PORT: u16 = 47801;

/// Anything that can push a datagram out. Lets tests stand in a dead link.
pub trait DatagramTransport {
    fn send_datagram(&self, bytes: &[u8], to: SocketAddr) -> io::Result<usize>;
}

impl DatagramTransport for UdpSocket {
    fn send_datagram(&self, bytes: &[u8], to: SocketAddr) -> io::Result<usize> {
        self.send_to(bytes, to)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SendReport {
    pub sent: u64,
    pub failed: u64,
    pub errors: Vec<String>,
}

impl SendReport {
    pub fn merge(&mut self, other: SendReport) {
        self.sent += other.sent;
        self.failed += other.failed;
        self.errors.extend(other.errors);
    }
}

/// Fire-and-forget light sender. Every send stamps the command with the next
/// sequence number for its sphere.
pub struct Broadcaster<T = UdpSocket> {
    transport: T,
    endpoint: SocketAddr,
    seqs: BTreeMap<u8, u16>,
}

impl Broadcaster<UdpSocket> {
    /// Non-blocking UDP socket with broadcast enabled; a full send buffer
    /// shows up as a failed datagram, never as a stall.
    pub fn udp(endpoint: SocketAddr) -> io::Result<Self> {
        let bind: SocketAddr = if endpoint.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("literal");
        let socket = UdpSocket::bind(bind)?;
        socket.set_broadcast(true)?;
        socket.set_nonblocking(true)?;
        Ok(Self::with_transport(socket, endpoint))
    }
}

impl<T: DatagramTransport> Broadcaster<T> {
    pub fn with_transport(transport: T, endpoint: SocketAddr) -> Self {
        Self { transport, endpoint, seqs: BTreeMap::new() }
    }

    pub fn next_seq(&self, sphere_id: u8) -> u16 {
        self.seqs.get(&sphere_id).copied().unwrap_or(0)
    }

    pub fn broadcast(&mut self, commands: &[LightCommand]) -> SendReport {
        let mut report = SendReport::default();
        for cmd in commands {
            let seq = self.seqs.entry(cmd.sphere_id).or_insert(0);
            let stamped = LightCommand { seq: *seq, ..*cmd };
            *seq = seq.wrapping_add(1);
            match self.transport.send_datagram(&encode_light_frame(&stamped), self.endpoint) {
                Ok(_) => report.sent += 1,
                Err(e) => {
                    report.failed += 1;
                    report.errors.push(format!("sphere {}: {e}", cmd.sphere_id));
                }
            }
        }
        report
    }
}
