//! 11-byte light frame.
//!
//! ```text
//! 0      1        2          3 4 5    6       7      8..9        10
//! magic  version  sphere_id  r g b    effect  param  seq (BE)    crc8
//! 0xA1   0x01
//! ```
//!
//! The CRC is CRC-8 with polynomial 0x07, initial value 0, no reflection and
//! no final xor, computed over bytes 0..10.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FRAME_LEN: usize = 11;
pub const MAGIC: u8 = 0xA1;
pub const VERSION: u8 = 0x01;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    #[error("light frame is {0} bytes, expected 11")]
    Length(usize),
    #[error("bad magic byte {0:#04x}")]
    Magic(u8),
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("checksum mismatch: frame says {stored:#04x}, computed {computed:#04x}")]
    Checksum { stored: u8, computed: u8 },
    #[error("unknown effect code {0}")]
    Effect(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Effect {
    Steady = 0,
    Pulse = 1,
    Fade = 2,
}

impl TryFrom<u8> for Effect {
    type Error = FrameError;

    fn try_from(v: u8) -> Result<Self, FrameError> {
        match v {
            0 => Ok(Effect::Steady),
            1 => Ok(Effect::Pulse),
            2 => Ok(Effect::Fade),
            other => Err(FrameError::Effect(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LightCommand {
    pub sphere_id: u8,
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub effect: Effect,
    /// Effect speed.
    pub param: u8,
    pub seq: u16,
}

const CRC8_TABLE: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
};

pub fn crc8(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |crc, b| CRC8_TABLE[(crc ^ b) as usize])
}

pub fn encode_light_frame(cmd: &LightCommand) -> [u8; FRAME_LEN] {
    let seq = cmd.seq.to_be_bytes();
    let mut out = [
        MAGIC,
        VERSION,
        cmd.sphere_id,
        cmd.r,
        cmd.g,
        cmd.b,
        cmd.effect as u8,
        cmd.param,
        seq[0],
        seq[1],
        0,
    ];
    out[10] = crc8(&out[..10]);
    out
}

/// Validates length, magic, version and checksum, in that order.
pub fn decode_light_frame(bytes: &[u8]) -> Result<LightCommand, FrameError> {
    if bytes.len() != FRAME_LEN {
        return Err(FrameError::Length(bytes.len()));
    }
    if bytes[0] != MAGIC {
        return Err(FrameError::Magic(bytes[0]));
    }
    if bytes[1] != VERSION {
        return Err(FrameError::Version(bytes[1]));
    }
    let computed = crc8(&bytes[..10]);
    if computed != bytes[10] {
        return Err(FrameError::Checksum { stored: bytes[10], computed });
    }
    Ok(LightCommand {
        sphere_id: bytes[2],
        r: bytes[3],
        g: bytes[4],
        b: bytes[5],
        effect: Effect::try_from(bytes[6])?,
        param: bytes[7],
        seq: u16::from_be_bytes([bytes[8], bytes[9]]),
    })
}
