//! Command-plane API over one pipeline instance.
//!
//! `set_cfg` loads a config while stopped. `start` builds the pipeline,
//! `push` feeds raw packet bytes, and `pull` drains correction records.
//! `stop` flushes the framer and FIFO. `reset` discards all run state but
//! keeps the loaded config.

use std::collections::VecDeque;

use crate::config::DecoderConfig;
use crate::error::{Error, Result};
use crate::flags::Flags;
use crate::metrics::RunMetrics;
use crate::pipeline::{framer_config, DecodeStage};
use crate::record::CorrectionRecord;
use crate::stream::{FifoStats, Framer, PushStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum State {
    Unconfigured,
    Stopped,
    Running,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Status {
    pub state: State,
    pub cfg_id: Option<u64>,
    /// Union of every flag raised since `start`.
    pub health: Flags,
    pub fifo: Option<FifoStats>,
    pub egress: usize,
    pub last_round: Option<u32>,
}

struct Run {
    framer: Framer,
    stage: DecodeStage,
}

#[derive(Default)]
pub struct Service {
    cfg: Option<DecoderConfig>,
    run: Option<Run>,
    running: bool,
    egress: VecDeque<CorrectionRecord>,
    health: Flags,
}

fn rejected(msg: &str) -> Error {
    Error::CommandRejected(msg.into())
}

impl Service {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a config blob and returns its `cfg_id`.
    pub fn set_cfg(&mut self, blob: &str) -> Result<u64> {
        if self.running {
            return Err(rejected("set_cfg while running"));
        }
        let cfg = DecoderConfig::parse(blob)?;
        let id = cfg.cfg_id();
        self.cfg = Some(cfg);
        self.run = None;
        Ok(id)
    }

    pub fn start(&mut self) -> Result<()> {
        let cfg = self
            .cfg
            .as_ref()
            .ok_or_else(|| rejected("start before set_cfg"))?;
        if self.running {
            return Err(rejected("already running"));
        }
        if self.run.is_none() {
            self.run = Some(Run {
                framer: Framer::new(framer_config(cfg)),
                stage: DecodeStage::new(cfg)?,
            });
        }
        self.running = true;
        Ok(())
    }

    /// Feeds bytes; reports `Overflow` if any packet hit a full FIFO.
    pub fn push(&mut self, bytes: &[u8]) -> Result<PushStatus> {
        if !self.running {
            return Err(rejected("push while stopped"));
        }
        let run = self.run.as_mut().expect("running implies a run");
        let mut status = PushStatus::Accepted;
        for ev in run.framer.feed(bytes) {
            if run.stage.handle(ev) == PushStatus::Overflow {
                status = PushStatus::Overflow;
            }
        }
        self.collect();
        Ok(status)
    }

    /// Next record, or `None` when egress is empty.
    pub fn pull(&mut self) -> Option<CorrectionRecord> {
        self.egress.pop_front()
    }

    /// Flushes the framer and FIFO; `declared_rounds` accounts for trailing loss.
    pub fn stop(&mut self, declared_rounds: Option<u64>) -> Result<()> {
        if !self.running {
            return Err(rejected("stop while stopped"));
        }
        let run = self.run.as_mut().expect("running implies a run");
        for ev in run.framer.finish() {
            run.stage.handle(ev);
        }
        run.stage.finish(declared_rounds);
        self.running = false;
        self.collect();
        Ok(())
    }

    pub fn get_status(&self) -> Status {
        Status {
            state: match (&self.cfg, self.running) {
                (None, _) => State::Unconfigured,
                (Some(_), false) => State::Stopped,
                (Some(_), true) => State::Running,
            },
            cfg_id: self.cfg.as_ref().map(DecoderConfig::cfg_id),
            health: self.health,
            fifo: self.run.as_ref().map(|r| r.stage.fifo_stats()),
            egress: self.egress.len(),
            last_round: self.run.as_ref().and_then(|r| r.stage.last_round()),
        }
    }

    pub fn get_counters(&self) -> Option<RunMetrics> {
        self.run.as_ref().map(|r| r.stage.metrics().clone())
    }

    /// Returns to the configured, stopped state.
    pub fn reset(&mut self) {
        self.run = None;
        self.running = false;
        self.egress.clear();
        self.health = Flags::OK;
    }

    fn collect(&mut self) {
        if let Some(run) = self.run.as_mut() {
            for r in run.stage.take_records() {
                self.health |= r.flags;
                self.egress.push_back(r);
            }
        }
    }
}
