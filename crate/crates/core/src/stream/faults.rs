//! Deterministic fault injection on a packet stream.
//!
//! Faults act on whole packets of a fixed length `L`. At most one fault hits
//! a packet, the packet after any fault is left clean, and the last packet is
//! never touched, so every fault is followed by a clean resync point.
//!
//! The log has one line per event, `offset kind param`, where `offset` is
//! the byte offset in the original stream:
//!
//! | kind     | param                         |
//! |----------|-------------------------------|
//! | `flip`   | bit index within the byte     |
//! | `drop`   | 1                             |
//! | `burst`  | packets overwritten           |
//! | `insert` | value of the inserted byte    |
//! | `delete` | 1                             |

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

use crate::flags::Flags;

use super::framing::{header_fault, FramerConfig};
use super::packet::{PacketHeader, HEADER_LEN, MAGIC};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaultPlan {
    pub flip_rate: f64,
    pub drop_rate: f64,
    pub burst_rate: f64,
    pub burst_min: usize,
    pub burst_max: usize,
    pub desync_rate: f64,
    pub seed: u64,
}

impl Default for FaultPlan {
    fn default() -> Self {
        Self {
            flip_rate: 0.0,
            drop_rate: 0.0,
            burst_rate: 0.0,
            burst_min: 1,
            burst_max: 1,
            desync_rate: 0.0,
            seed: 1,
        }
    }
}

impl FaultPlan {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.flip_rate,
            self.drop_rate,
            self.burst_rate,
            self.desync_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("fault rates must lie in [0,1]"));
        }
        if rates.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(invalid("fault rates must sum to at most 1"));
        }
        if self.burst_min == 0 || self.burst_max < self.burst_min {
            return Err(invalid("need 1 <= burst_min <= burst_max"));
        }
        Ok(())
    }

    /// Reads `key = value` lines; absent keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut plan = Self::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("plan line `{line}`: expected `key = value`"))
            })?;
            let v = v.trim();
            let bad = || Error::Config(format!("plan key `{}`: cannot parse `{v}`", k.trim()));
            match k.trim() {
                "flip_rate" => plan.flip_rate = v.parse().map_err(|_| bad())?,
                "drop_rate" => plan.drop_rate = v.parse().map_err(|_| bad())?,
                "burst_rate" => plan.burst_rate = v.parse().map_err(|_| bad())?,
                "burst_min" => plan.burst_min = v.parse().map_err(|_| bad())?,
                "burst_max" => plan.burst_max = v.parse().map_err(|_| bad())?,
                "desync_rate" => plan.desync_rate = v.parse().map_err(|_| bad())?,
                "seed" => plan.seed = v.parse().map_err(|_| bad())?,
                other => return Err(Error::Config(format!("unknown plan key `{other}`"))),
            }
        }
        plan.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(plan)
    }

    pub fn to_text(&self) -> String {
        format!(
            "burst_max = {}\nburst_min = {}\nburst_rate = {}\ndesync_rate = {}\ndrop_rate = {}\nflip_rate = {}\nseed = {}\n",
            self.burst_max,
            self.burst_min,
            self.burst_rate,
            self.desync_rate,
            self.drop_rate,
            self.flip_rate,
            self.seed
        )
    }

    pub fn is_identity(&self) -> bool {
        self.flip_rate == 0.0
            && self.drop_rate == 0.0
            && self.burst_rate == 0.0
            && self.desync_rate == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    Flip,
    Drop,
    Burst,
    Insert,
    Delete,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultKind::Flip => "flip",
            FaultKind::Drop => "drop",
            FaultKind::Burst => "burst",
            FaultKind::Insert => "insert",
            FaultKind::Delete => "delete",
        })
    }
}

impl FromStr for FaultKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "flip" => FaultKind::Flip,
            "drop" => FaultKind::Drop,
            "burst" => FaultKind::Burst,
            "insert" => FaultKind::Insert,
            "delete" => FaultKind::Delete,
            other => return Err(Error::Format(format!("unknown fault kind {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Injection {
    pub offset: u64,
    pub kind: FaultKind,
    pub param: u64,
}

impl fmt::Display for Injection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.offset, self.kind, self.param)
    }
}

impl FromStr for Injection {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [offset, kind, param] = parts[..] else {
            return Err(Error::Format(format!("bad injection line {line:?}")));
        };
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Format(format!("bad number {s:?}")))
        };
        Ok(Injection {
            offset: num(offset)?,
            kind: kind.parse()?,
            param: num(param)?,
        })
    }
}

pub fn parse_log(text: &str) -> Result<Vec<Injection>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn format_log(log: &[Injection]) -> String {
    log.iter().map(|i| format!("{i}\n")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Injected {
    pub bytes: Vec<u8>,
    pub log: Vec<Injection>,
}

struct Draws(ChaCha8Rng);

impl Draws {
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn below(&mut self, n: u64) -> u64 {
        self.0.next_u64() % n
    }
}

/// Applies `plan` to a stream of `packet_len`-byte packets.
pub fn inject_faults(bytes: &[u8], packet_len: usize, plan: &FaultPlan) -> Result<Injected> {
    plan.validate()?;
    if packet_len < 2 || !bytes.len().is_multiple_of(packet_len) {
        return Err(invalid("stream is not a whole number of packets"));
    }
    let count = bytes.len() / packet_len;
    let mut rng = Draws(ChaCha8Rng::seed_from_u64(plan.seed));
    let mut out = Vec::with_capacity(bytes.len() + count);
    let mut log = Vec::new();
    let mut guard = false;
    let mut i = 0;
    while i < count {
        let start = i * packet_len;
        let packet = &bytes[start..start + packet_len];
        if guard || i + 1 == count || plan.is_identity() {
            out.extend_from_slice(packet);
            guard = false;
            i += 1;
            continue;
        }
        let u = rng.uniform();
        let mut edge = plan.flip_rate;
        if u < edge {
            let bit = rng.below(packet_len as u64 * 8);
            let mut p = packet.to_vec();
            p[(bit / 8) as usize] ^= 1 << (bit % 8);
            out.extend_from_slice(&p);
            log.push(Injection {
                offset: (start as u64) + bit / 8,
                kind: FaultKind::Flip,
                param: bit % 8,
            });
            guard = true;
            i += 1;
            continue;
        }
        edge += plan.drop_rate;
        if u < edge {
            log.push(Injection {
                offset: start as u64,
                kind: FaultKind::Drop,
                param: 1,
            });
            guard = true;
            i += 1;
            continue;
        }
        edge += plan.burst_rate;
        if u < edge {
            let span = (plan.burst_max - plan.burst_min + 1) as u64;
            let b = (plan.burst_min + rng.below(span) as usize).min(count - 1 - i);
            for _ in 0..b * packet_len {
                // Garbage never contains the first magic byte, so it cannot
                // fake a packet start.
                let mut g = rng.below(255) as u8;
                if g >= MAGIC[0] {
                    g += 1;
                }
                out.push(g);
            }
            log.push(Injection {
                offset: start as u64,
                kind: FaultKind::Burst,
                param: b as u64,
            });
            guard = true;
            i += b;
            continue;
        }
        edge += plan.desync_rate;
        if u < edge {
            let mut p = packet.to_vec();
            if rng.below(2) == 0 {
                let pos = 1 + rng.below(packet_len as u64 - 1);
                let value = rng.below(256) as u8;
                p.insert(pos as usize, value);
                log.push(Injection {
                    offset: start as u64 + pos,
                    kind: FaultKind::Insert,
                    param: u64::from(value),
                });
            } else {
                let pos = rng.below(packet_len as u64);
                p.remove(pos as usize);
                log.push(Injection {
                    offset: start as u64 + pos,
                    kind: FaultKind::Delete,
                    param: 1,
                });
            }
            out.extend_from_slice(&p);
            guard = true;
            i += 1;
            continue;
        }
        out.extend_from_slice(packet);
        i += 1;
    }
    Ok(Injected { bytes: out, log })
}

/// Framing outcomes implied by an injection log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExpectedCounts {
    pub corrupt: u64,
    pub desync: u64,
    pub fatal: u64,
    /// Packets that never reach the decoder, each seen as an erased round.
    pub lost: u64,
}

/// Computes what the framer must report for `log` applied to `original`.
/// Header checks are replayed on the faulted bytes, since a shifted or
/// flipped header can read as an oversized (fatal) length.
pub fn expected_counts(log: &[Injection], original: &[u8], cfg: &FramerConfig) -> ExpectedCounts {
    let len = cfg.packet_len();
    let mut c = ExpectedCounts::default();
    for inj in log {
        let start = (inj.offset as usize / len) * len;
        let within = inj.offset as usize - start;
        // First header's worth of faulted bytes at the packet start.
        let mut head: Vec<u8> =
            original[start..(start + len + HEADER_LEN).min(original.len())].to_vec();
        let header_only = match inj.kind {
            FaultKind::Drop => {
                c.lost += 1;
                continue;
            }
            FaultKind::Burst => {
                c.desync += 1;
                c.lost += inj.param;
                continue;
            }
            FaultKind::Flip => {
                head[within] ^= 1 << inj.param;
                false
            }
            FaultKind::Insert => {
                head.insert(within, inj.param as u8);
                true
            }
            FaultKind::Delete => {
                head.remove(within);
                true
            }
        };
        c.lost += 1;
        let flags = if head[..4] != MAGIC {
            Flags::DESYNC
        } else if let Some((f, _)) = header_fault(&PacketHeader::parse(&head), cfg) {
            f
        } else if header_only {
            // Length changes break the alignment to the next magic.
            Flags::DESYNC
        } else {
            Flags::CORRUPT
        };
        if flags.contains(Flags::DESYNC) {
            c.desync += 1;
        }
        if flags.contains(Flags::CORRUPT) {
            c.corrupt += 1;
        }
        if flags.contains(Flags::FATAL) {
            c.fatal += 1;
        }
    }
    c
}

/// Maps an original-stream offset to the corrupted stream, given the log.
pub fn output_offset(log: &[Injection], packet_len: usize, offset: u64) -> u64 {
    let mut shift: i64 = 0;
    for inj in log.iter().filter(|i| i.offset < offset) {
        match inj.kind {
            FaultKind::Drop => shift -= packet_len as i64,
            FaultKind::Insert => shift += 1,
            FaultKind::Delete => shift -= 1,
            FaultKind::Flip | FaultKind::Burst => {}
        }
    }
    (offset as i64 + shift) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: FramerConfig = FramerConfig {
        payload_bytes: 1,
        max_payload: 4096,
    };

    fn real_packets(count: u32) -> Vec<u8> {
        use crate::gf2::BitVec;
        use crate::noise::DetectionFrame;
        (0..count)
            .flat_map(|t| {
                let f = DetectionFrame::new(t, BitVec::from_indices(6, &[1]).unwrap());
                crate::stream::packet::encode_packet(&f, 9, t, 6).unwrap()
            })
            .collect()
    }

    fn packets(count: usize, len: usize) -> Vec<u8> {
        (0..count * len).map(|i| (i % 251) as u8 + 1).collect()
    }

    #[test]
    fn empty_plan_is_identity() {
        let bytes = packets(20, 37);
        let r = inject_faults(&bytes, 37, &FaultPlan::default()).unwrap();
        assert_eq!(r.bytes, bytes);
        assert!(r.log.is_empty());
    }

    #[test]
    fn deterministic_under_seed() {
        let bytes = packets(200, 37);
        let plan = FaultPlan {
            flip_rate: 0.1,
            drop_rate: 0.1,
            burst_rate: 0.05,
            burst_min: 2,
            burst_max: 4,
            desync_rate: 0.1,
            seed: 5,
        };
        let a = inject_faults(&bytes, 37, &plan).unwrap();
        let b = inject_faults(&bytes, 37, &plan).unwrap();
        assert_eq!(a, b);
        assert!(!a.log.is_empty());
        let c = inject_faults(&bytes, 37, &FaultPlan { seed: 6, ..plan }).unwrap();
        assert_ne!(a.log, c.log);
    }

    #[test]
    fn faults_are_separated_and_spare_the_last_packet() {
        let bytes = packets(300, 37);
        let plan = FaultPlan {
            flip_rate: 0.3,
            drop_rate: 0.3,
            desync_rate: 0.3,
            ..FaultPlan::default()
        };
        let r = inject_faults(&bytes, 37, &plan).unwrap();
        let idx: Vec<u64> = r.log.iter().map(|i| i.offset / 37).collect();
        assert!(idx.windows(2).all(|w| w[1] >= w[0] + 2));
        assert!(idx.iter().all(|&i| i < 299));
    }

    #[test]
    fn drop_removes_one_packet() {
        let bytes = packets(10, 37);
        let plan = FaultPlan {
            drop_rate: 1.0,
            ..FaultPlan::default()
        };
        let r = inject_faults(&bytes, 37, &plan).unwrap();
        let drops = r.log.len();
        assert_eq!(r.bytes.len(), bytes.len() - drops * 37);
        assert_eq!(expected_counts(&r.log, &bytes, &CFG).lost, drops as u64);
    }

    #[test]
    fn log_lines_round_trip() {
        let line = "1234 flip 7";
        let inj: Injection = line.parse().unwrap();
        assert_eq!(inj.to_string(), line);
        assert!("12 warp 1".parse::<Injection>().is_err());
        let log = vec![
            inj,
            Injection {
                offset: 40,
                kind: FaultKind::Burst,
                param: 3,
            },
        ];
        assert_eq!(parse_log(&format_log(&log)).unwrap(), log);
    }

    #[test]
    fn flip_classification() {
        let bytes = real_packets(5);
        let flip = |offset, param| Injection {
            offset,
            kind: FaultKind::Flip,
            param,
        };
        let log = [
            flip(2, 0),
            flip(37 + 10, 3),
            flip(74 + 31, 7),
            flip(111 + 28, 1),
        ];
        let e = expected_counts(&log, &bytes, &CFG);
        assert_eq!(
            e,
            ExpectedCounts {
                corrupt: 1,
                desync: 3,
                fatal: 1,
                lost: 4
            }
        );
    }

    #[test]
    fn shifted_header_can_be_fatal() {
        let bytes = real_packets(3);
        let del = |offset| Injection {
            offset,
            kind: FaultKind::Delete,
            param: 1,
        };
        // Removing a cfg_id byte pulls the payload byte into the length's top byte.
        let e = expected_counts(&[del(37 + 12)], &bytes, &CFG);
        assert_eq!((e.desync, e.fatal, e.lost), (1, 1, 1));
        let e = expected_counts(&[del(37 + 5)], &bytes, &CFG);
        assert_eq!((e.desync, e.fatal, e.lost), (1, 0, 1));
    }

    #[test]
    fn offsets_shift_with_length_changes() {
        let log = vec![
            Injection {
                offset: 10,
                kind: FaultKind::Insert,
                param: 0,
            },
            Injection {
                offset: 80,
                kind: FaultKind::Drop,
                param: 1,
            },
        ];
        assert_eq!(output_offset(&log, 37, 5), 5);
        assert_eq!(output_offset(&log, 37, 50), 51);
        assert_eq!(output_offset(&log, 37, 150), 114);
    }

    #[test]
    fn plan_text_round_trip() {
        let plan = FaultPlan {
            flip_rate: 0.01,
            burst_rate: 0.002,
            burst_min: 64,
            burst_max: 64,
            seed: 5,
            ..FaultPlan::default()
        };
        assert_eq!(FaultPlan::parse(&plan.to_text()).unwrap(), plan);
        assert!(FaultPlan::parse("flip_rate = 2\n").is_err());
        assert!(FaultPlan::parse("nonsense = 1\n").is_err());
    }
}
