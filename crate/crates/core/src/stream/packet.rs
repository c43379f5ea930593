//! Bit-exact packet codec.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "QEC1"
//!      4     2  version (1)
//!      6     2  hdr_bytes (32)
//!      8     8  cfg_id
//!     16     4  round_t
//!     20     4  seq
//!     24     4  flags
//!     28     4  payload_bytes
//!     32     P  payload, check c at byte c/8 bit c%8
//!   32+P     4  crc32 over bytes 4..32+P
//! ```
//! All integers are little-endian.

use crate::error::{invalid, Error, Result};
use crate::flags::Flags;
use crate::gf2::BitVec;
use crate::noise::DetectionFrame;

pub const MAGIC: [u8; 4] = *b"QEC1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const CRC_LEN: usize = 4;

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn payload_len(checks: usize) -> usize {
    checks.div_ceil(8)
}

pub fn packet_len(checks: usize) -> usize {
    HEADER_LEN + payload_len(checks) + CRC_LEN
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketHeader {
    pub version: u16,
    pub hdr_bytes: u16,
    pub cfg_id: u64,
    pub round_t: u32,
    pub seq: u32,
    pub flags: u32,
    pub payload_bytes: u32,
}

impl PacketHeader {
    /// Reads the fields after the magic. `bytes` must hold a full header.
    pub fn parse(bytes: &[u8]) -> PacketHeader {
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        PacketHeader {
            version: u16_at(4),
            hdr_bytes: u16_at(6),
            cfg_id: u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")),
            round_t: u32_at(16),
            seq: u32_at(20),
            flags: u32_at(24),
            payload_bytes: u32_at(28),
        }
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.hdr_bytes.to_le_bytes());
        out.extend_from_slice(&self.cfg_id.to_le_bytes());
        out.extend_from_slice(&self.round_t.to_le_bytes());
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        out.extend_from_slice(&self.payload_bytes.to_le_bytes());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyndromePacket {
    pub header: PacketHeader,
    pub payload: Vec<u8>,
    pub crc: u32,
}

impl SyndromePacket {
    pub fn frame(&self, checks: usize) -> Result<DetectionFrame> {
        if self.payload.len() != payload_len(checks) {
            return Err(invalid(format!(
                "payload has {} bytes, expected {}",
                self.payload.len(),
                payload_len(checks)
            )));
        }
        let flags = Flags::from_bits_truncate(self.header.flags);
        Ok(DetectionFrame {
            round_t: self.header.round_t,
            bits: BitVec::from_bytes_lsb(checks, &self.payload),
            valid: !flags.contains(Flags::ERASURE),
            flags,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() + CRC_LEN);
        self.header.write(&mut out);
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.crc.to_le_bytes());
        out
    }
}

/// Encodes one frame. The ERASURE bit is set whenever `frame.valid` is false.
pub fn encode_packet(
    frame: &DetectionFrame,
    cfg_id: u64,
    seq: u32,
    checks: usize,
) -> Result<Vec<u8>> {
    if frame.bits.len() != checks {
        return Err(invalid(format!(
            "frame has {} bits, config expects {checks}",
            frame.bits.len()
        )));
    }
    let mut flags = frame.flags;
    if !frame.valid {
        flags |= Flags::ERASURE;
    }
    let payload = frame.bits.to_bytes_lsb();
    let header = PacketHeader {
        version: VERSION,
        hdr_bytes: HEADER_LEN as u16,
        cfg_id,
        round_t: frame.round_t,
        seq,
        flags: flags.bits(),
        payload_bytes: payload.len() as u32,
    };
    let mut out = Vec::with_capacity(packet_len(checks));
    header.write(&mut out);
    out.extend_from_slice(&payload);
    let crc = crc32(&out[4..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Parses and verifies one complete packet.
pub fn decode_packet(bytes: &[u8], checks: usize) -> Result<SyndromePacket> {
    let expect = packet_len(checks);
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "packet is {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let header = PacketHeader::parse(bytes);
    if header.version != VERSION {
        return Err(Error::Format(format!(
            "unsupported version {}",
            header.version
        )));
    }
    if header.hdr_bytes as usize != HEADER_LEN
        || header.payload_bytes as usize != payload_len(checks)
    {
        return Err(Error::Format(
            "length fields do not match the config".into(),
        ));
    }
    let body = expect - CRC_LEN;
    let crc = u32::from_le_bytes(bytes[body..].try_into().expect("4 bytes"));
    if crc32(&bytes[4..body]) != crc {
        return Err(Error::Format("crc mismatch".into()));
    }
    Ok(SyndromePacket {
        header,
        payload: bytes[HEADER_LEN..body].to_vec(),
        crc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_value() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn layout_is_fixed() {
        let frame = DetectionFrame::new(7, BitVec::from_indices(6, &[0, 5]).unwrap());
        let bytes = encode_packet(&frame, 0x0102_0304_0506_0708, 9, 6).unwrap();
        assert_eq!(bytes.len(), 37);
        assert_eq!(&bytes[..4], b"QEC1");
        assert_eq!(&bytes[4..8], &[1, 0, 32, 0]);
        assert_eq!(&bytes[8..16], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(&bytes[16..20], &[7, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &[9, 0, 0, 0]);
        assert_eq!(&bytes[24..32], &[0, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(bytes[32], 0b10_0001);
        let back = decode_packet(&bytes, 6).unwrap();
        assert_eq!(back.frame(6).unwrap(), frame);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn erased_frames_carry_the_flag() {
        let mut frame = DetectionFrame::new(1, BitVec::zeros(12));
        frame.valid = false;
        let bytes = encode_packet(&frame, 1, 1, 12).unwrap();
        let back = decode_packet(&bytes, 12).unwrap().frame(12).unwrap();
        assert!(!back.valid);
        assert_eq!(back.flags, Flags::ERASURE);
    }

    #[test]
    fn width_mismatch_rejected() {
        let frame = DetectionFrame::new(0, BitVec::zeros(5));
        assert!(encode_packet(&frame, 0, 0, 6).is_err());
    }

    #[test]
    fn every_single_bit_flip_is_detected() {
        let frame = DetectionFrame::new(3, BitVec::from_indices(20, &[1, 2, 19]).unwrap());
        let bytes = encode_packet(&frame, 42, 3, 20).unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut bad = bytes.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            assert!(decode_packet(&bad, 20).is_err(), "bit {bit}");
        }
    }
}
