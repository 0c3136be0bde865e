//! Light control for the boards inside the spheres: an 11-byte datagram
//! protocol sent fire-and-forget over UDP broadcast, the zone-to-colour
//! mapping, and simulated boards for closed-loop testing.

pub mod broadcast;
pub mod color;
pub mod frame;
pub mod node;

pub use broadcast::{Broadcaster, DatagramTransport, SendReport, DEFAULT_LIGHT_PORT};
pub use color::{color_for, sphere_id_for, LightPayload, PULSE_PARAM, PULSE_WINDOW_MS};
pub use frame::{crc8, decode_light_frame, encode_light_frame, Effect, FrameError, LightCommand, FRAME_LEN};
pub use node::{NodeBank, NodeLogEntry, SimNode, Verdict};
