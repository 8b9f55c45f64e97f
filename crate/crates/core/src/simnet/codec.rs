//! Bit-exact framing of codeword indices.
//!
//! Frame layout: sensor id (2 bytes, big-endian), time step (4 bytes,
//! big-endian), payload width `B` (1 byte), then the index packed MSB-first
//! into `ceil(B / 8)` bytes with zero padding in the low bits of the last byte.

use crate::codebook::MAX_BITS;
use crate::error::{Error, Result};

pub const HEADER_LEN: usize = 7;

fn payload_len(bits: u32) -> usize {
    bits.div_ceil(8) as usize
}

fn check_width(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::invalid_argument(format!(
            "payload width {bits} outside 1..={MAX_BITS}"
        )));
    }
    Ok(())
}

/// Packs `index` into `bits` bits, most significant bit first.
pub fn encode_index(index: u32, bits: u32) -> Result<Vec<u8>> {
    check_width(bits)?;
    if u64::from(index) >= 1u64 << bits {
        return Err(Error::invalid_argument(format!(
            "index {index} does not fit in {bits} bits"
        )));
    }
    let len = payload_len(bits);
    let pad = len as u32 * 8 - bits;
    let packed = u64::from(index) << pad;
    Ok(packed.to_be_bytes()[8 - len..].to_vec())
}

/// Inverse of [`encode_index`]. Padding bits must be zero.
pub fn decode_index(payload: &[u8], bits: u32) -> Result<u32> {
    check_width(bits)?;
    let len = payload_len(bits);
    if payload.len() != len {
        return Err(Error::MalformedFrame(format!(
            "{}-bit payload must be {len} bytes, got {}",
            bits,
            payload.len()
        )));
    }
    let packed = payload.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b));
    let pad = len as u32 * 8 - bits;
    if packed & ((1u64 << pad) - 1) != 0 {
        return Err(Error::MalformedFrame("non-zero padding bits".into()));
    }
    Ok((packed >> pad) as u32)
}

/// One sensor-to-fusion-center message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageFrame {
    pub sensor_id: u16,
    pub time_step: u32,
    pub bits: u8,
    pub index: u32,
}

impl MessageFrame {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4);
        out.extend_from_slice(&self.sensor_id.to_be_bytes());
        out.extend_from_slice(&self.time_step.to_be_bytes());
        out.push(self.bits);
        out.extend(encode_index(self.index, u32::from(self.bits))?);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedFrame(format!(
                "frame of {} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        let sensor_id = u16::from_be_bytes([bytes[0], bytes[1]]);
        let time_step = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]);
        let bits = bytes[6];
        if bits == 0 || u32::from(bits) > MAX_BITS {
            return Err(Error::MalformedFrame(format!("invalid payload width {bits}")));
        }
        let index = decode_index(&bytes[HEADER_LEN..], u32::from(bits))?;
        Ok(MessageFrame {
            sensor_id,
            time_step,
            bits,
            index,
        })
    }
}
