//! Record-stream comparison against a reference, first-failure dumps, and
//! logical-failure accounting against ground truth.

use std::fmt::Write as _;

use crate::config::cfg_id_of;
use crate::error::Result;
use crate::geometry::{Chain1, CodeSpec};
use crate::record::{CorrectionRecord, Source};
use crate::stream::packet::{PacketHeader, HEADER_LEN, MAGIC};

/// What two record streams must agree on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contract {
    pub version: u32,
    /// Latency stamps and pass counts are excluded unless set.
    pub compare_timing: bool,
    pub tie_break: &'static str,
}

impl Default for Contract {
    fn default() -> Self {
        Self {
            version: 1,
            compare_timing: false,
            tie_break: "uf-halfedge-minroot-v1",
        }
    }
}

/// Event → flag → action, as enforced by the pipeline.
pub const FAULT_POLICY: [(&str, &str, &str); 7] = [
    ("crc failure, aligned", "CORRUPT", "marker; round erased"),
    (
        "bad magic/version/length",
        "DESYNC",
        "marker; hunt for magic; rounds erased",
    ),
    (
        "length above maximum",
        "DESYNC|FATAL",
        "marker; hunt for magic; rounds erased",
    ),
    ("seq gap", "ERASURE", "one gap record per missing round"),
    ("fifo full", "OVERFLOW", "gap record for the dropped round"),
    (
        "decode budget or invariant",
        "FATAL",
        "record without correction",
    ),
    (
        "late beyond staleness",
        "STALE",
        "record without correction",
    ),
];

impl Contract {
    pub fn canonical_text(&self) -> String {
        let mut out = format!(
            "contract = {}\nfields = cfg,t,src,flags,delta,corr{}\ntie_break = {}\n",
            self.version,
            if self.compare_timing {
                ",a,f,passes"
            } else {
                ""
            },
            self.tie_break
        );
        for (ev, flag, action) in FAULT_POLICY {
            let _ = writeln!(out, "policy = {ev} -> {flag} -> {action}");
        }
        out
    }

    pub fn id(&self) -> u64 {
        cfg_id_of(&self.canonical_text())
    }

    fn differing_field(&self, a: &CorrectionRecord, b: &CorrectionRecord) -> Option<&'static str> {
        let checks: [(&'static str, bool); 9] = [
            ("cfg", a.cfg_id == b.cfg_id),
            ("t", a.round_t == b.round_t),
            ("src", a.source == b.source),
            ("flags", a.flags == b.flags),
            ("delta", a.logical_delta == b.logical_delta),
            ("corr", a.correction == b.correction),
            ("a", !self.compare_timing || a.arrival == b.arrival),
            ("f", !self.compare_timing || a.finish == b.finish),
            (
                "passes",
                !self.compare_timing || a.pass_counter == b.pass_counter,
            ),
        ];
        checks.iter().find(|(_, ok)| !ok).map(|(f, _)| *f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub round_t: Option<u32>,
    pub field: &'static str,
    pub primary: Option<CorrectionRecord>,
    pub golden: Option<CorrectionRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comparison {
    pub contract_id: u64,
    pub compared: usize,
    pub divergence: Option<Divergence>,
    pub note: Option<String>,
}

impl Comparison {
    pub fn pass(&self) -> bool {
        self.divergence.is_none()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "contract: {:016x}\ncompared: {}\nresult: {}\n",
            self.contract_id,
            self.compared,
            if self.pass() { "PASS" } else { "FAIL" }
        );
        if let Some(d) = &self.divergence {
            let show = |r: &Option<CorrectionRecord>| {
                r.as_ref().map_or("<none>".into(), |r| r.to_string())
            };
            let _ = writeln!(out, "first_divergence.index: {}", d.index);
            if let Some(t) = d.round_t {
                let _ = writeln!(out, "first_divergence.round: {t}");
            }
            let _ = writeln!(out, "first_divergence.field: {}", d.field);
            let _ = writeln!(out, "primary: {}", show(&d.primary));
            let _ = writeln!(out, "golden: {}", show(&d.golden));
        }
        if let Some(n) = &self.note {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

/// Compares record by record and reports the first divergence.
pub fn compare(
    primary: &[CorrectionRecord],
    golden: &[CorrectionRecord],
    contract: &Contract,
) -> Comparison {
    let mut cmp = Comparison {
        contract_id: contract.id(),
        compared: 0,
        divergence: None,
        note: None,
    };
    for (i, (a, b)) in primary.iter().zip(golden).enumerate() {
        cmp.compared += 1;
        if let Some(field) = contract.differing_field(a, b) {
            cmp.divergence = Some(Divergence {
                index: i,
                round_t: Some(a.round_t.min(b.round_t)),
                field,
                primary: Some(a.clone()),
                golden: Some(b.clone()),
            });
            return cmp;
        }
    }
    if primary.len() != golden.len() {
        let i = cmp.compared;
        let (p, g) = (primary.get(i).cloned(), golden.get(i).cloned());
        let markers =
            |rs: &[CorrectionRecord]| rs.iter().filter(|r| r.source == Source::Marker).count();
        cmp.note = Some(format!(
            "length mismatch: primary {} vs golden {} records ({} vs {} markers); \
             a differing marker count points at a framing or desync disagreement",
            primary.len(),
            golden.len(),
            markers(primary),
            markers(golden)
        ));
        cmp.divergence = Some(Divergence {
            index: i,
            round_t: p.as_ref().or(g.as_ref()).map(|r| r.round_t),
            field: "length",
            primary: p,
            golden: g,
        });
    }
    cmp
}

/// Context captured at the first failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureDump {
    pub seed: u64,
    pub cfg_id: u64,
    pub first_round: u32,
    /// Up to `DUMP_PACKETS` packets ending at the failing round.
    pub packets: Vec<Vec<u8>>,
}

pub const DUMP_PACKETS: usize = 32;

impl FailureDump {
    /// Collects the last packets at or before `round` from a packet stream.
    pub fn capture(seed: u64, cfg_id: u64, round: u32, stream: &[u8], packet_len: usize) -> Self {
        let mut packets: Vec<Vec<u8>> = Vec::new();
        let mut i = 0;
        while i + packet_len <= stream.len() {
            let p = &stream[i..i + packet_len];
            if p[..4] == MAGIC && p.len() >= HEADER_LEN {
                if PacketHeader::parse(p).round_t > round {
                    break;
                }
                packets.push(p.to_vec());
                i += packet_len;
            } else {
                i += 1;
            }
        }
        let skip = packets.len().saturating_sub(DUMP_PACKETS);
        Self {
            seed,
            cfg_id,
            first_round: round,
            packets: packets.split_off(skip),
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "seed: {}\ncfg_id: {:016x}\nfirst_failing_round: {}\npackets: {}\n",
            self.seed,
            self.cfg_id,
            self.first_round,
            self.packets.len()
        );
        for p in &self.packets {
            for b in p {
                let _ = write!(out, "{b:02x}");
            }
            out.push('\n');
        }
        out
    }
}

/// Counts logical failures of a record stream against per-round truth.
///
/// Corrections and errors accumulate round by round. At each OK record
/// whose accumulated residual is a cycle, its homology label is taken; a
/// failure is counted each time that label changes.
pub fn logical_failures(
    code: &CodeSpec,
    records: &[CorrectionRecord],
    truth: &[Chain1],
) -> Result<u64> {
    let mut residual = Chain1::zeros(code.n());
    let mut label = code.logical_label(&residual);
    let mut failures = 0;
    for r in records.iter().filter(|r| r.is_round()) {
        if let Some(e) = truth.get(r.round_t as usize) {
            residual = residual.xor(e);
        }
        residual = residual.xor(&Chain1::from_edges(code.n(), &r.correction)?);
        if r.is_ok() && code.boundary(&residual)?.0.is_zero() {
            let now = code.logical_label(&residual);
            if now != label {
                failures += 1;
                label = now;
            }
        }
    }
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flags::Flags;
    use crate::gf2::BitVec;

    fn rec(t: u32, corr: Vec<usize>) -> CorrectionRecord {
        CorrectionRecord {
            cfg_id: 7,
            round_t: t,
            source: Source::Decoded,
            flags: Flags::OK,
            logical_delta: BitVec::zeros(1),
            arrival: u64::from(t) * 10,
            finish: u64::from(t) * 10 + 3,
            pass_counter: 1,
            correction: corr,
        }
    }

    #[test]
    fn identical_streams_pass() {
        let a: Vec<_> = (0..10).map(|t| rec(t, vec![1])).collect();
        assert!(compare(&a, &a.clone(), &Contract::default()).pass());
    }

    #[test]
    fn flipped_bit_reports_round() {
        let a: Vec<_> = (0..10).map(|t| rec(t, vec![1])).collect();
        let mut b = a.clone();
        b[6].correction = vec![1, 2];
        let c = compare(&a, &b, &Contract::default());
        let d = c.divergence.unwrap();
        assert_eq!((d.index, d.round_t, d.field), (6, Some(6), "corr"));
    }

    #[test]
    fn timing_excluded_by_default() {
        let a: Vec<_> = (0..4).map(|t| rec(t, vec![])).collect();
        let mut b = a.clone();
        b[2].finish += 100;
        assert!(compare(&a, &b, &Contract::default()).pass());
        let strict = Contract {
            compare_timing: true,
            ..Contract::default()
        };
        assert_eq!(compare(&a, &b, &strict).divergence.unwrap().field, "f");
        assert_ne!(strict.id(), Contract::default().id());
    }

    #[test]
    fn length_mismatch_fails_with_note() {
        let a: Vec<_> = (0..4).map(|t| rec(t, vec![])).collect();
        let c = compare(&a, &a[..3], &Contract::default());
        assert!(!c.pass());
        assert_eq!(c.divergence.as_ref().unwrap().index, 3);
        assert!(c.render().contains("length mismatch"));
    }

    #[test]
    fn dump_keeps_last_packets_up_to_round() {
        use crate::config::DecoderConfig;
        let (trace, _) = crate::trace::generate(&DecoderConfig::planar(3), 50).unwrap();
        let d = FailureDump::capture(1, 2, 40, &trace.packets, 37);
        assert_eq!(d.packets.len(), 32);
        assert_eq!(PacketHeader::parse(&d.packets[31]).round_t, 40);
        assert_eq!(PacketHeader::parse(&d.packets[0]).round_t, 9);
        assert!(d
            .render()
            .starts_with("seed: 1\ncfg_id: 0000000000000002\nfirst_failing_round: 40\n"));
    }

    #[test]
    fn logical_failure_counting() {
        let code = CodeSpec::build_planar(3).unwrap();
        let logical = code.logical_z()[0].ones();
        let truth = vec![Chain1::from_edges(13, &logical[..1]).unwrap()];
        // Completing the logical string with the rest of it is a failure.
        let bad = rec(0, logical[1..].to_vec());
        assert_eq!(logical_failures(&code, &[bad], &truth).unwrap(), 1);
        let good = rec(0, logical[..1].to_vec());
        assert_eq!(logical_failures(&code, &[good], &truth).unwrap(), 0);
    }
}
