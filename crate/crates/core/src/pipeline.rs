//! The streaming pipeline: framer, ingress FIFO, windowed UF decode, records.
//!
//! Timing is a discrete-event model on a simulated cycle clock. The packet
//! with sequence number `s` arrives at the end of its arrival group,
//! `A = (⌊s/K⌋·K + K − 1)·T_cycle` with `K = arrival_burst`. One decoder
//! serves the FIFO in order. Serving a packet costs `⌈len/8⌉` cycles of
//! ingest, and closing a window adds `pass_counter·⌈N/lanes⌉·c_upd` for the
//! grow and merge passes, the peeled edge count, and one cycle of commit.
//!
//! Every round the source emitted yields exactly one round record: decoded,
//! or a gap record flagged ERASURE (lost in transit) or OVERFLOW (dropped at
//! the FIFO). Framing errors yield marker records, ordered behind the
//! packets accepted before them.

use std::collections::{BTreeSet, VecDeque};
use std::sync::mpsc::sync_channel;

use crate::config::DecoderConfig;
use crate::error::Result;
use crate::flags::Flags;
use crate::gf2::BitVec;
use crate::metrics::{LatencySample, RunMetrics};
use crate::noise::DetectionFrame;
use crate::record::{CorrectionRecord, Source};
use crate::stream::{
    Fifo, FifoStats, FrameEvent, Framer, FramerConfig, FramerStats, PushStatus, SyndromePacket,
};
use crate::uf::{DecodeOutcome, UfDecoder};

/// Flags that withhold a correction.
pub const SUPPRESSING: Flags = Flags::CORRUPT
    .union(Flags::DESYNC)
    .union(Flags::STALE)
    .union(Flags::FATAL);

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    SingleThread,
    /// Framing and decoding on two threads joined by a bounded channel.
    Threaded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramingError {
    pub start: u64,
    pub detected_at: u64,
    pub flags: Flags,
    pub reason: &'static str,
}

/// Per served packet, the cycles spent in each stage.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StageCosts {
    pub io: Vec<u64>,
    pub core: Vec<u64>,
    pub peel: Vec<u64>,
    pub commit: Vec<u64>,
}

struct Pending {
    packet: SyndromePacket,
    arrival: u64,
}

struct Slot {
    frame: DetectionFrame,
    arrival: u64,
    source: Source,
}

/// The decode side of the pipeline, driven by framer events.
pub struct DecodeStage {
    cfg_id: u64,
    window: usize,
    checks: usize,
    logicals: usize,
    io_cost: u64,
    pass_cost: u64,
    t_cycle: u64,
    burst: u64,
    staleness: u64,
    decoder: UfDecoder,
    fifo: Fifo<Pending>,
    free_at: u64,
    /// Markers keyed by the number of packets accepted before them.
    markers: VecDeque<(u64, Flags)>,
    accepted: u64,
    served: u64,
    overflowed: BTreeSet<u64>,
    next_seq: u64,
    last_round: Option<u32>,
    open: Vec<Slot>,
    poisoned: Flags,
    records: Vec<CorrectionRecord>,
    metrics: RunMetrics,
    costs: StageCosts,
    framing: Vec<FramingError>,
}

impl DecodeStage {
    pub fn new(cfg: &DecoderConfig) -> Result<Self> {
        cfg.validate()?;
        let code = cfg.build_code()?;
        let checks = code.m_x();
        let logicals = code.logical_count();
        let decoder = UfDecoder::new(code, cfg.window, cfg.limits())?;
        let nodes = decoder.graph().node_count() as u64;
        let packet_len = FramerConfig {
            payload_bytes: cfg.payload_bytes(),
            max_payload: cfg.max_payload,
        }
        .packet_len() as u64;
        Ok(Self {
            cfg_id: cfg.cfg_id(),
            window: cfg.window,
            checks,
            logicals,
            io_cost: packet_len.div_ceil(8),
            pass_cost: nodes.div_ceil(cfg.lanes) * cfg.c_upd,
            t_cycle: cfg.t_cycle,
            burst: cfg.arrival_burst,
            staleness: cfg.staleness,
            decoder,
            fifo: Fifo::new(cfg.fifo_depth),
            free_at: 0,
            markers: VecDeque::new(),
            accepted: 0,
            served: 0,
            overflowed: BTreeSet::new(),
            next_seq: 0,
            last_round: None,
            open: Vec::new(),
            poisoned: Flags::OK,
            records: Vec::new(),
            metrics: RunMetrics::new(cfg.t_cycle, cfg.deadline),
            costs: StageCosts::default(),
            framing: Vec::new(),
        })
    }

    pub fn arrival_of(&self, seq: u64) -> u64 {
        (seq / self.burst * self.burst + self.burst - 1) * self.t_cycle
    }

    /// Feeds one framer event. Returns whether a packet hit a full FIFO.
    pub fn handle(&mut self, ev: FrameEvent) -> PushStatus {
        match ev {
            FrameEvent::Packet { packet, .. } => {
                let seq = u64::from(packet.header.seq);
                let arrival = self.arrival_of(seq);
                self.advance(arrival);
                let status = self.fifo.push(Pending { packet, arrival });
                match status {
                    PushStatus::Accepted => self.accepted += 1,
                    PushStatus::Overflow => {
                        self.overflowed.insert(seq);
                    }
                }
                self.advance(arrival);
                status
            }
            FrameEvent::Error {
                start,
                detected_at,
                flags,
                reason,
            } => {
                self.framing.push(FramingError {
                    start,
                    detected_at,
                    flags,
                    reason,
                });
                self.markers.push_back((self.accepted, flags));
                PushStatus::Accepted
            }
        }
    }

    /// Drains the FIFO and accounts for rounds that never arrived.
    pub fn finish(&mut self, declared_rounds: Option<u64>) {
        self.advance(u64::MAX);
        let now = self.free_at;
        self.emit_markers(u64::MAX, now);
        let mut closed = Vec::new();
        if let Some(n) = declared_rounds {
            while self.next_seq < n {
                let seq = self.next_seq;
                self.push_gap(seq, &mut closed);
            }
        }
        if !self.open.is_empty() {
            let slots = std::mem::take(&mut self.open);
            closed.push(self.decode(slots));
        }
        let extra = if closed.is_empty() {
            0
        } else {
            self.charge(&closed, 0)
        };
        self.free_at = now + extra;
        self.commit(closed, self.free_at);
        self.metrics.rounds_in = declared_rounds.unwrap_or(self.next_seq);
        let fifo = self.fifo.stats();
        self.metrics.fifo_high_water = fifo.high_water as u64;
        self.metrics.fifo_dropped = fifo.dropped;
    }

    /// Removes and returns the records produced so far.
    pub fn take_records(&mut self) -> Vec<CorrectionRecord> {
        std::mem::take(&mut self.records)
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn fifo_stats(&self) -> FifoStats {
        self.fifo.stats()
    }

    pub fn last_round(&self) -> Option<u32> {
        self.last_round
    }

    pub fn framing_errors(&self) -> &[FramingError] {
        &self.framing
    }

    fn advance(&mut self, now: u64) {
        while self.free_at <= now {
            let Some(p) = self.fifo.pop() else { break };
            self.serve(p);
        }
    }

    fn marker_round(&self) -> u32 {
        match (self.open.first(), self.last_round) {
            (Some(s), _) => s.frame.round_t,
            (None, Some(r)) => r.saturating_add(1),
            (None, None) => 0,
        }
    }

    fn emit_markers(&mut self, served: u64, at: u64) {
        while self.markers.front().is_some_and(|&(k, _)| k <= served) {
            let (_, flags) = self.markers.pop_front().expect("front checked");
            self.marker(flags, at);
        }
    }

    fn marker(&mut self, flags: Flags, at: u64) {
        // The open window straddles the break, so none of it is trusted.
        if !self.open.is_empty() {
            self.poisoned |= flags & (Flags::DESYNC | Flags::CORRUPT | Flags::FATAL);
        }
        let rec = CorrectionRecord {
            cfg_id: self.cfg_id,
            round_t: self.marker_round(),
            source: Source::Marker,
            flags,
            logical_delta: BitVec::zeros(self.logicals),
            arrival: at,
            finish: at,
            pass_counter: 0,
            correction: Vec::new(),
        };
        self.metrics.count_flags(flags);
        self.records.push(rec);
    }

    fn serve(&mut self, p: Pending) {
        let start = self.free_at.max(p.arrival);
        self.emit_markers(self.served, start);
        self.served += 1;
        let h = p.packet.header;
        let seq = u64::from(h.seq);
        let base = self.last_round.map_or(0, |r| u64::from(r) + 1);
        let consistent = h.cfg_id == self.cfg_id
            && seq >= self.next_seq
            && u64::from(h.round_t) >= base + (seq - self.next_seq);
        let frame = p.packet.frame(self.checks);
        let (true, Ok(frame)) = (consistent, frame) else {
            self.free_at = start + self.io_cost;
            self.costs.io.push(self.io_cost);
            self.costs.core.push(0);
            self.costs.peel.push(0);
            self.costs.commit.push(0);
            self.marker(Flags::DESYNC, start);
            return;
        };
        let mut closed = Vec::new();
        while self.next_seq < seq {
            let g = self.next_seq;
            self.push_gap(g, &mut closed);
        }
        self.push_slot(
            Slot {
                frame,
                arrival: p.arrival,
                source: Source::Decoded,
            },
            &mut closed,
        );
        self.next_seq = seq + 1;
        let finish = start + self.charge(&closed, self.io_cost);
        self.free_at = finish;
        self.commit(closed, finish);
    }

    fn push_gap(&mut self, seq: u64, closed: &mut Vec<(Vec<Slot>, DecodeOutcome)>) {
        let round = self.last_round.map_or(0, |r| r + 1);
        let flags = if self.overflowed.remove(&seq) {
            Flags::OVERFLOW
        } else {
            Flags::ERASURE
        };
        let slot = Slot {
            frame: DetectionFrame {
                round_t: round,
                bits: BitVec::zeros(self.checks),
                valid: false,
                flags,
            },
            arrival: self.arrival_of(seq),
            source: Source::Gap,
        };
        self.push_slot(slot, closed);
        self.next_seq = seq + 1;
    }

    fn push_slot(&mut self, slot: Slot, closed: &mut Vec<(Vec<Slot>, DecodeOutcome)>) {
        self.last_round = Some(slot.frame.round_t);
        self.open.push(slot);
        if self.open.len() == self.window {
            let slots = std::mem::take(&mut self.open);
            closed.push(self.decode(slots));
        }
    }

    fn decode(&mut self, slots: Vec<Slot>) -> (Vec<Slot>, DecodeOutcome) {
        let frames: Vec<DetectionFrame> = slots.iter().map(|s| s.frame.clone()).collect();
        let out = self.decoder.decode_window(&frames);
        (slots, out)
    }

    /// Service cycles for `io` ingest plus the windows closed by it.
    fn charge(&mut self, closed: &[(Vec<Slot>, DecodeOutcome)], io: u64) -> u64 {
        let core: u64 = closed
            .iter()
            .map(|(_, o)| u64::from(o.pass_counter) * self.pass_cost)
            .sum();
        let peel: u64 = closed.iter().map(|(_, o)| o.peel_edges as u64).sum();
        let commit = closed.len() as u64;
        self.costs.io.push(io);
        self.costs.core.push(core);
        self.costs.peel.push(peel);
        self.costs.commit.push(commit);
        io + core + peel + commit
    }

    fn commit(&mut self, closed: Vec<(Vec<Slot>, DecodeOutcome)>, finish: u64) {
        for (slots, out) in closed {
            let poison = std::mem::replace(&mut self.poisoned, Flags::OK);
            let window_flags = out.flags.difference(Flags::ERASURE) | poison;
            let last = slots.len() - 1;
            for (i, slot) in slots.into_iter().enumerate() {
                let mut flags = slot.frame.flags | window_flags;
                if self.staleness > 0 && finish - slot.arrival > self.staleness {
                    flags |= Flags::STALE;
                }
                let correction = if i == last && !flags.intersects(SUPPRESSING) {
                    out.correction.0.ones()
                } else {
                    Vec::new()
                };
                let logical_delta = if correction.is_empty() {
                    BitVec::zeros(self.logicals)
                } else {
                    self.decoder.code().logical_label(&out.correction)
                };
                let rec = CorrectionRecord {
                    cfg_id: self.cfg_id,
                    round_t: slot.frame.round_t,
                    source: slot.source,
                    flags,
                    logical_delta,
                    arrival: slot.arrival,
                    finish,
                    pass_counter: if i == last { out.pass_counter } else { 0 },
                    correction,
                };
                if rec.source == Source::Decoded {
                    self.metrics.push_sample(LatencySample {
                        round_t: rec.round_t,
                        arrival: rec.arrival,
                        finish: rec.finish,
                    });
                }
                self.metrics.count_flags(flags);
                if flags.is_ok() {
                    self.metrics.records_out += 1;
                } else {
                    self.metrics.records_suppressed += 1;
                }
                self.records.push(rec);
            }
        }
    }
}

/// Rebuilds run metrics from a record stream alone.
pub fn metrics_from_records(
    cfg: &DecoderConfig,
    records: &[CorrectionRecord],
    declared_rounds: Option<u64>,
) -> Result<RunMetrics> {
    let mut m = RunMetrics::new(cfg.t_cycle, cfg.deadline);
    let mut rounds = 0;
    for r in records {
        if r.source == Source::Decoded {
            m.push_sample(LatencySample::new(r.round_t, r.arrival, r.finish)?);
        }
        m.count_flags(r.flags);
        if r.is_round() {
            rounds += 1;
            if r.is_ok() {
                m.records_out += 1;
            } else {
                m.records_suppressed += 1;
            }
        }
    }
    m.rounds_in = declared_rounds.unwrap_or(rounds);
    m.fifo_dropped = m.flag_count(Flags::OVERFLOW);
    Ok(m)
}

/// Everything a pipeline run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<CorrectionRecord>,
    pub metrics: RunMetrics,
    pub framer: FramerStats,
    pub fifo: FifoStats,
    pub framing_errors: Vec<FramingError>,
    pub costs: StageCosts,
}

pub fn framer_config(cfg: &DecoderConfig) -> FramerConfig {
    FramerConfig {
        payload_bytes: cfg.payload_bytes(),
        max_payload: cfg.max_payload,
    }
}

/// Streams raw packet bytes through the whole pipeline.
pub fn run(
    cfg: &DecoderConfig,
    packets: &[u8],
    declared_rounds: Option<u64>,
    mode: Mode,
) -> Result<RunOutput> {
    let mut stage = DecodeStage::new(cfg)?;
    let fc = framer_config(cfg);
    let framer = match mode {
        Mode::SingleThread => {
            let mut framer = Framer::new(fc);
            for chunk in packets.chunks(CHUNK) {
                for ev in framer.feed(chunk) {
                    stage.handle(ev);
                }
            }
            for ev in framer.finish() {
                stage.handle(ev);
            }
            framer.stats()
        }
        Mode::Threaded => std::thread::scope(|s| {
            let (tx, rx) = sync_channel::<Vec<FrameEvent>>(64);
            let producer = s.spawn(move || {
                let mut framer = Framer::new(fc);
                for chunk in packets.chunks(CHUNK) {
                    let evs = framer.feed(chunk);
                    if !evs.is_empty() && tx.send(evs).is_err() {
                        return framer.stats();
                    }
                }
                let _ = tx.send(framer.finish());
                framer.stats()
            });
            for batch in rx {
                for ev in batch {
                    stage.handle(ev);
                }
            }
            producer.join().expect("framer thread panicked")
        }),
    };
    stage.finish(declared_rounds);
    Ok(RunOutput {
        records: stage.take_records(),
        fifo: stage.fifo_stats(),
        framing_errors: stage.framing.clone(),
        costs: std::mem::take(&mut stage.costs),
        metrics: stage.metrics,
        framer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::generate;

    fn cfg3() -> DecoderConfig {
        DecoderConfig::planar(3)
    }

    #[test]
    fn silent_trace_gives_ok_empty_records() {
        let mut cfg = cfg3();
        cfg.p_data = 0.0;
        let (trace, _) = generate(&cfg, 20).unwrap();
        let out = run(&cfg, &trace.packets, Some(20), Mode::SingleThread).unwrap();
        assert_eq!(out.records.len(), 20);
        for (t, r) in out.records.iter().enumerate() {
            assert_eq!(r.round_t, t as u32);
            assert!(r.is_ok() && r.correction.is_empty());
            assert_eq!(r.finish - r.arrival, 6);
        }
        assert!(out.metrics.conserved());
    }

    #[test]
    fn records_reproduce_online_metrics() {
        let mut cfg = cfg3();
        cfg.p_data = 0.05;
        cfg.arrival_burst = 16;
        cfg.fifo_depth = 12;
        let (trace, _) = generate(&cfg, 400).unwrap();
        let out = run(&cfg, &trace.packets, Some(400), Mode::SingleThread).unwrap();
        let m = metrics_from_records(&cfg, &out.records, Some(400)).unwrap();
        assert_eq!(m.samples, out.metrics.samples);
        assert_eq!(m.backlog, out.metrics.backlog);
        assert_eq!(m.flag_counts, out.metrics.flag_counts);
        assert_eq!(m.fifo_dropped, out.metrics.fifo_dropped);
        assert!(m.fifo_dropped > 0);
    }

    #[test]
    fn threaded_matches_single() {
        let mut cfg = cfg3();
        cfg.p_data = 0.05;
        let (trace, _) = generate(&cfg, 500).unwrap();
        let a = run(&cfg, &trace.packets, Some(500), Mode::SingleThread).unwrap();
        let b = run(&cfg, &trace.packets, Some(500), Mode::Threaded).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn missing_packet_becomes_one_erasure() {
        let cfg = cfg3();
        let (trace, _) = generate(&cfg, 10).unwrap();
        let mut bytes = trace.packets.clone();
        bytes.drain(4 * 37..5 * 37);
        let out = run(&cfg, &bytes, Some(10), Mode::SingleThread).unwrap();
        assert_eq!(out.records.len(), 10);
        let r4 = &out.records[4];
        assert_eq!(
            (r4.round_t, r4.source, r4.flags),
            (4, Source::Gap, Flags::ERASURE)
        );
        assert_eq!(out.metrics.flag_count(Flags::ERASURE), 1);
    }

    #[test]
    fn trailing_loss_is_accounted() {
        let cfg = cfg3();
        let (trace, _) = generate(&cfg, 6).unwrap();
        let out = run(&cfg, &trace.packets[..4 * 37], Some(6), Mode::SingleThread).unwrap();
        let flags: Vec<Flags> = out.records.iter().map(|r| r.flags).collect();
        assert_eq!(flags[4..], [Flags::ERASURE, Flags::ERASURE]);
        assert!(out.metrics.conserved());
    }

    #[test]
    fn arrival_bursts_overflow_a_small_fifo() {
        let mut cfg = cfg3();
        cfg.p_data = 0.0;
        cfg.arrival_burst = 8;
        cfg.fifo_depth = 4;
        let (trace, _) = generate(&cfg, 32).unwrap();
        let out = run(&cfg, &trace.packets, Some(32), Mode::SingleThread).unwrap();
        // Per burst: one served at once, four queued, three dropped.
        assert_eq!(out.fifo.dropped, 12);
        assert_eq!(out.metrics.flag_count(Flags::OVERFLOW), 12);
        assert_eq!(out.records.len(), 32);
        assert!(out.fifo.conserved());
        let rounds: Vec<u32> = out.records.iter().map(|r| r.round_t).collect();
        assert_eq!(rounds, (0..32).collect::<Vec<_>>());
    }

    #[test]
    fn corrupt_packet_marks_then_erases() {
        let cfg = cfg3();
        let (trace, _) = generate(&cfg, 5).unwrap();
        let mut bytes = trace.packets.clone();
        bytes[2 * 37 + 32] ^= 0x10;
        let out = run(&cfg, &bytes, Some(5), Mode::SingleThread).unwrap();
        let kinds: Vec<(u32, Source, Flags)> = out
            .records
            .iter()
            .map(|r| (r.round_t, r.source, r.flags))
            .collect();
        assert_eq!(kinds[2], (2, Source::Marker, Flags::CORRUPT));
        assert_eq!(kinds[3], (2, Source::Gap, Flags::ERASURE));
        assert_eq!(out.records.len(), 6);
    }

    #[test]
    fn staleness_withholds_corrections() {
        let mut cfg = cfg3();
        cfg.staleness = 3;
        cfg.p_data = 0.2;
        let (trace, _) = generate(&cfg, 30).unwrap();
        let out = run(&cfg, &trace.packets, Some(30), Mode::SingleThread).unwrap();
        assert!(out.records.iter().all(|r| r.flags.contains(Flags::STALE)));
        assert!(out.records.iter().all(|r| r.correction.is_empty()));
    }

    #[test]
    fn windows_commit_on_their_last_round() {
        let mut cfg = cfg3();
        cfg.window = 3;
        cfg.q_meas = 0.02;
        cfg.p_data = 0.02;
        let (trace, _) = generate(&cfg, 9).unwrap();
        let out = run(&cfg, &trace.packets, Some(9), Mode::SingleThread).unwrap();
        assert_eq!(out.records.len(), 9);
        for (i, r) in out.records.iter().enumerate() {
            if i % 3 != 2 {
                assert!(r.correction.is_empty());
                assert_eq!(r.pass_counter, 0);
            }
        }
    }
}
