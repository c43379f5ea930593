//! Byte-at-a-time framing with resynchronization.
//!
//! The framer is either synced (it expects a packet to start at the next
//! byte) or hunting (it scans for the magic). Errors are classified as:
//!
//! * a byte that breaks the magic at an expected packet start, an unknown
//!   version, or length fields that disagree with the config: `DESYNC`,
//!   plus `FATAL` when `payload_bytes` exceeds the configured maximum;
//! * a CRC failure with the next magic exactly one packet length later:
//!   `CORRUPT`, and the packet is skipped;
//! * a CRC failure without that alignment: `DESYNC`.
//!
//! After a `DESYNC` the framer replays from one byte past the failed start.
//! A desync episode reports once and ends at the next packet that passes
//! its CRC.

use std::collections::VecDeque;

use crate::flags::Flags;

use super::packet::{crc32, PacketHeader, SyndromePacket, CRC_LEN, HEADER_LEN, MAGIC, VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FramerConfig {
    pub payload_bytes: usize,
    pub max_payload: usize,
}

impl FramerConfig {
    pub fn packet_len(&self) -> usize {
        HEADER_LEN + self.payload_bytes + CRC_LEN
    }
}

/// Checks the header fields after the magic against the config.
pub fn header_fault(hdr: &PacketHeader, cfg: &FramerConfig) -> Option<(Flags, &'static str)> {
    if hdr.version != VERSION {
        Some((Flags::DESYNC, "unsupported version"))
    } else if hdr.hdr_bytes as usize != HEADER_LEN {
        Some((Flags::DESYNC, "bad header length"))
    } else if hdr.payload_bytes as usize > cfg.max_payload {
        Some((Flags::DESYNC | Flags::FATAL, "payload length above maximum"))
    } else if hdr.payload_bytes as usize != cfg.payload_bytes {
        Some((Flags::DESYNC, "payload length mismatch"))
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameEvent {
    /// A CRC-validated packet occupying stream bytes `start..end`.
    Packet {
        start: u64,
        end: u64,
        packet: SyndromePacket,
    },
    /// A framing error. `start` is where the failed packet began and
    /// `detected_at` is the offset of the byte that settled the decision.
    Error {
        start: u64,
        detected_at: u64,
        flags: Flags,
        reason: &'static str,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FramerStats {
    pub bytes_in: u64,
    pub packets: u64,
    pub corrupt: u64,
    pub desync: u64,
    pub fatal: u64,
    pub bytes_discarded: u64,
}

#[derive(Clone, Debug)]
pub struct Framer {
    cfg: FramerConfig,
    buf: Vec<u8>,
    /// Stream offset of `buf[0]`.
    base: u64,
    hunting: bool,
    in_episode: bool,
    finished: bool,
    events: VecDeque<FrameEvent>,
    stats: FramerStats,
}

impl Framer {
    pub fn new(cfg: FramerConfig) -> Self {
        Self {
            cfg,
            buf: Vec::new(),
            base: 0,
            hunting: false,
            in_episode: false,
            finished: false,
            events: VecDeque::new(),
            stats: FramerStats::default(),
        }
    }

    pub fn stats(&self) -> FramerStats {
        self.stats
    }

    pub fn is_hunting(&self) -> bool {
        self.hunting
    }

    /// Feeds one byte and returns the next pending event, if any.
    pub fn step(&mut self, byte: u8) -> Option<FrameEvent> {
        self.buf.push(byte);
        self.stats.bytes_in += 1;
        self.process();
        self.events.pop_front()
    }

    /// Takes an event that is still queued.
    pub fn next_event(&mut self) -> Option<FrameEvent> {
        self.events.pop_front()
    }

    /// Feeds a slice and drains every event it produced.
    pub fn feed(&mut self, bytes: &[u8]) -> Vec<FrameEvent> {
        self.buf.extend_from_slice(bytes);
        self.stats.bytes_in += bytes.len() as u64;
        self.process();
        self.events.drain(..).collect()
    }

    /// Signals end of stream, resolving any partial packet.
    pub fn finish(&mut self) -> Vec<FrameEvent> {
        self.finished = true;
        self.process();
        self.events.drain(..).collect()
    }

    fn report(&mut self, start: u64, detected_at: u64, flags: Flags, reason: &'static str) {
        if self.in_episode {
            return;
        }
        if flags.contains(Flags::DESYNC) {
            self.in_episode = true;
            self.stats.desync += 1;
        }
        if flags.contains(Flags::CORRUPT) {
            self.stats.corrupt += 1;
        }
        if flags.contains(Flags::FATAL) {
            self.stats.fatal += 1;
        }
        self.events.push_back(FrameEvent::Error {
            start,
            detected_at,
            flags,
            reason,
        });
    }

    fn process(&mut self) {
        let mut pos = 0usize;
        let len = self.cfg.packet_len();
        loop {
            let avail = &self.buf[pos..];
            let here = self.base + pos as u64;
            if self.hunting {
                match avail.windows(4).position(|w| w == MAGIC) {
                    Some(i) => {
                        pos += i;
                        self.stats.bytes_discarded += i as u64;
                        self.hunting = false;
                    }
                    None => {
                        // Keep a tail that might begin a magic split across feeds.
                        let keep = if self.finished { 0 } else { avail.len().min(3) };
                        let drop = avail.len() - keep;
                        pos += drop;
                        self.stats.bytes_discarded += drop as u64;
                        break;
                    }
                }
                continue;
            }

            let n = avail.len();
            let k = n.min(4);
            if avail[..k] != MAGIC[..k] {
                let at = here + (0..k).find(|&i| avail[i] != MAGIC[i]).unwrap_or(0) as u64;
                self.report(here, at, Flags::DESYNC, "bad magic");
                pos += 1;
                self.hunting = true;
                continue;
            }
            if n < HEADER_LEN {
                if self.finished && n > 0 {
                    self.report(here, here + n as u64, Flags::DESYNC, "truncated header");
                    pos += 1;
                    self.hunting = true;
                    continue;
                }
                break;
            }
            let hdr = PacketHeader::parse(avail);
            let header_fault = header_fault(&hdr, &self.cfg);
            if let Some((flags, reason)) = header_fault {
                self.report(here, here + HEADER_LEN as u64 - 1, flags, reason);
                pos += 1;
                self.hunting = true;
                continue;
            }
            if n < len {
                if self.finished {
                    self.report(here, here + n as u64, Flags::DESYNC, "truncated packet");
                    pos += 1;
                    self.hunting = true;
                    continue;
                }
                break;
            }
            let body = len - CRC_LEN;
            let crc = u32::from_le_bytes(avail[body..len].try_into().expect("4 bytes"));
            if crc32(&avail[4..body]) == crc {
                let packet = SyndromePacket {
                    header: hdr,
                    payload: avail[HEADER_LEN..body].to_vec(),
                    crc,
                };
                self.events.push_back(FrameEvent::Packet {
                    start: here,
                    end: here + len as u64,
                    packet,
                });
                self.stats.packets += 1;
                self.in_episode = false;
                pos += len;
                continue;
            }
            // CRC failed: is the next packet where it should be?
            let next = &avail[len..];
            let k = next.len().min(4);
            let aligned = next[..k] == MAGIC[..k];
            if aligned && (k == 4 || self.finished) {
                self.report(here, here + len as u64 - 1, Flags::CORRUPT, "crc mismatch");
                pos += len;
            } else if !aligned {
                let at =
                    here + len as u64 + (0..k).find(|&i| next[i] != MAGIC[i]).unwrap_or(0) as u64;
                self.report(here, at, Flags::DESYNC, "crc mismatch, lost alignment");
                pos += 1;
                self.hunting = true;
            } else {
                break;
            }
        }
        self.buf.drain(..pos);
        self.base += pos as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::BitVec;
    use crate::noise::DetectionFrame;
    use crate::stream::packet::encode_packet;

    const CHECKS: usize = 6;

    fn cfg() -> FramerConfig {
        FramerConfig {
            payload_bytes: 1,
            max_payload: 4096,
        }
    }

    fn stream(count: u32) -> Vec<Vec<u8>> {
        (0..count)
            .map(|t| {
                let f = DetectionFrame::new(
                    t,
                    BitVec::from_indices(CHECKS, &[t as usize % CHECKS]).unwrap(),
                );
                encode_packet(&f, 77, t, CHECKS).unwrap()
            })
            .collect()
    }

    fn run(bytes: &[u8]) -> Vec<FrameEvent> {
        let mut f = Framer::new(cfg());
        let mut out: Vec<FrameEvent> = Vec::new();
        for &b in bytes {
            out.extend(f.step(b));
            while let Some(e) = f.next_event() {
                out.push(e);
            }
        }
        out.extend(f.finish());
        out
    }

    fn seqs(events: &[FrameEvent]) -> Vec<u32> {
        events
            .iter()
            .filter_map(|e| match e {
                FrameEvent::Packet { packet, .. } => Some(packet.header.seq),
                _ => None,
            })
            .collect()
    }

    fn errors(events: &[FrameEvent]) -> Vec<Flags> {
        events
            .iter()
            .filter_map(|e| match e {
                FrameEvent::Error { flags, .. } => Some(*flags),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn clean_stream() {
        let bytes: Vec<u8> = stream(3).concat();
        let ev = run(&bytes);
        assert_eq!(seqs(&ev), vec![0, 1, 2]);
        assert!(errors(&ev).is_empty());
    }

    #[test]
    fn payload_flip_is_corrupt() {
        let mut p = stream(3);
        p[1][32] ^= 0x04;
        let ev = run(&p.concat());
        assert_eq!(seqs(&ev), vec![0, 2]);
        assert_eq!(errors(&ev), vec![Flags::CORRUPT]);
    }

    #[test]
    fn deleted_header_byte_is_one_desync() {
        let mut p = stream(4);
        p[1].remove(5);
        let ev = run(&p.concat());
        assert_eq!(seqs(&ev), vec![0, 2, 3]);
        assert_eq!(errors(&ev), vec![Flags::DESYNC]);
    }

    #[test]
    fn inserted_byte_is_one_desync() {
        let mut p = stream(4);
        p[2].insert(20, 0xAB);
        let ev = run(&p.concat());
        assert_eq!(seqs(&ev), vec![0, 1, 3]);
        assert_eq!(errors(&ev), vec![Flags::DESYNC]);
    }

    #[test]
    fn oversized_length_is_fatal() {
        let mut p = stream(3);
        p[1][31] ^= 0x80;
        let ev = run(&p.concat());
        assert_eq!(seqs(&ev), vec![0, 2]);
        assert_eq!(errors(&ev), vec![Flags::DESYNC | Flags::FATAL]);
    }

    #[test]
    fn unknown_version_rejected() {
        let mut p = stream(3);
        p[1][4] = 2;
        let ev = run(&p.concat());
        assert_eq!(seqs(&ev), vec![0, 2]);
        assert_eq!(errors(&ev), vec![Flags::DESYNC]);
    }

    #[test]
    fn garbage_prefix_is_skipped() {
        let mut bytes = vec![0x00, 0x51, 0x45, 0x43, 0x00];
        bytes.extend(stream(2).concat());
        let ev = run(&bytes);
        assert_eq!(seqs(&ev), vec![0, 1]);
        assert_eq!(errors(&ev), vec![Flags::DESYNC]);
    }

    #[test]
    fn truncated_tail_reports_once() {
        let mut bytes = stream(2).concat();
        bytes.truncate(bytes.len() - 5);
        let ev = run(&bytes);
        assert_eq!(seqs(&ev), vec![0]);
        assert_eq!(errors(&ev), vec![Flags::DESYNC]);
    }

    #[test]
    fn bulk_feed_matches_bytewise() {
        let mut p = stream(6);
        p[2][33] ^= 1;
        p[4].remove(3);
        let bytes = p.concat();
        let mut f = Framer::new(cfg());
        let mut bulk = Vec::new();
        for chunk in bytes.chunks(7) {
            bulk.extend(f.feed(chunk));
        }
        bulk.extend(f.finish());
        assert_eq!(bulk, run(&bytes));
    }
}
