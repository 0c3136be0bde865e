//! OSC 1.0 messages for driving an external patch.
//!
//! | event              | address             | arguments |
//! |--------------------|---------------------|-----------|
//! | zone entry         | `/cloudgrid/zone`   | `i` zone  |
//! | proximity trigger  | `/orbproxi/trigger` | none      |
//! | pitch update       | `/pitch/ratio`      | `f` ratio |

use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};

use thiserror::Error;

use crate::events::{EngineEvent, EventKind};

pub const ADDR_ZONE: &str = "/cloudgrid/zone";
pub const ADDR_PROXI: &str = "/orbproxi/trigger";
pub const ADDR_PITCH: &str = "/pitch/ratio";

#[derive(Debug, Error)]
pub enum OscError {
    #[error("{} events have no OSC form", .0.as_str())]
    NotEncodable(EventKind),
    #[error("cannot resolve OSC target {0}")]
    Resolve(String),
    #[error("OSC socket: {0}")]
    Io(#[from] std::io::Error),
}

fn push_padded_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(s.as_bytes());
    // At least one NUL, then pad to a multiple of four.
    let pad = 4 - s.len() % 4;
    buf.extend(std::iter::repeat_n(0u8, pad));
}

pub fn osc_encode(event: &EngineEvent) -> Result<Vec<u8>, OscError> {
    let mut buf = Vec::with_capacity(24);
    match event {
        EngineEvent::ZoneEntry { zone, .. } => {
            push_padded_str(&mut buf, ADDR_ZONE);
            push_padded_str(&mut buf, ",i");
            buf.extend_from_slice(&(zone.0 as i32).to_be_bytes());
        }
        EngineEvent::ProximityTrigger { .. } => {
            push_padded_str(&mut buf, ADDR_PROXI);
            push_padded_str(&mut buf, ",");
        }
        EngineEvent::PitchUpdate { ratio, .. } => {
            push_padded_str(&mut buf, ADDR_PITCH);
            push_padded_str(&mut buf, ",f");
            buf.extend_from_slice(&(*ratio as f32).to_be_bytes());
        }
        other => return Err(OscError::NotEncodable(other.kind())),
    }
    Ok(buf)
}

/// Fire-and-forget UDP sender for encoded events.
#[derive(Debug)]
pub struct OscSender {
    socket: UdpSocket,
    target: SocketAddr,
}

impl OscSender {
    pub fn connect(target: &str) -> Result<Self, OscError> {
        let target = target
            .to_socket_addrs()
            .map_err(|_| OscError::Resolve(target.to_owned()))?
            .next()
            .ok_or_else(|| OscError::Resolve(target.to_owned()))?;
        let bind: SocketAddr = if target.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("literal");
        let socket = UdpSocket::bind(bind)?;
        socket.set_nonblocking(true)?;
        Ok(Self { socket, target })
    }

    /// Send the event if it has an OSC form. Returns whether a datagram went out.
    pub fn send(&self, event: &EngineEvent) -> Result<bool, OscError> {
        match osc_encode(event) {
            Ok(bytes) => {
                self.socket.send_to(&bytes, self.target)?;
                Ok(true)
            }
            Err(OscError::NotEncodable(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}
