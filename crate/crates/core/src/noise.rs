//! Phenomenological noise: i.i.d. Z errors on data edges and i.i.d.
//! measurement flips on X-checks, sampled round by round.
//!
//! Randomness comes from ChaCha8 keyed by the 64-bit seed, with one stream
//! per edge (`stream = e`) and per check (`stream = 2^32 + c`). Draw `t` of a
//! stream is the `t`-th 64-bit word of that stream, so a trace does not depend
//! on the order in which edges are visited.
//!
//! A data error drawn in round `t` is present when round `t` is measured.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::flags::Flags;
use crate::geometry::{Chain1, CodeSpec};
use crate::gf2::BitVec;

const CHECK_STREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub p_data: f64,
    pub q_meas: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(p_data: f64, q_meas: f64, seed: u64) -> Result<Self> {
        for (name, p) in [("p_data", p_data), ("q_meas", q_meas)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} must lie in [0,1], got {p}")));
            }
        }
        Ok(Self {
            p_data,
            q_meas,
            seed,
        })
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Random access to draw `index` of a stream.
pub fn draw(seed: u64, stream: u64, index: u64) -> u64 {
    let mut rng = stream_rng(seed, stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

/// Bernoulli trial on a raw draw: the top 53 bits as a uniform in [0,1).
#[inline]
pub fn bernoulli(word: u64, p: f64) -> bool {
    ((word >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
}

/// Sequential sampler holding one generator per stream.
pub struct Sampler {
    model: NoiseModel,
    data: Vec<ChaCha8Rng>,
    meas: Vec<ChaCha8Rng>,
    round: u64,
}

impl Sampler {
    pub fn new(model: NoiseModel, n_edges: usize, n_checks: usize) -> Self {
        let data = (0..n_edges as u64)
            .map(|e| stream_rng(model.seed, e))
            .collect();
        let meas = (0..n_checks as u64)
            .map(|c| stream_rng(model.seed, CHECK_STREAM_BASE + c))
            .collect();
        Self {
            model,
            data,
            meas,
            round: 0,
        }
    }

    pub fn for_code(model: NoiseModel, code: &CodeSpec) -> Self {
        Self::new(model, code.n(), code.m_x())
    }

    /// Rounds sampled so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// Draws this round's new data errors and measurement flips.
    pub fn sample_round(&mut self) -> (BitVec, BitVec) {
        let errors = sample_bits(&mut self.data, self.model.p_data);
        let flips = sample_bits(&mut self.meas, self.model.q_meas);
        self.round += 1;
        (errors, flips)
    }
}

fn sample_bits(streams: &mut [ChaCha8Rng], p: f64) -> BitVec {
    let mut out = BitVec::zeros(streams.len());
    if p <= 0.0 {
        // Streams are positional, so skipping draws at p = 0 changes nothing.
        return out;
    }
    for (i, rng) in streams.iter_mut().enumerate() {
        if bernoulli(rng.next_u64(), p) {
            out.set(i, true);
        }
    }
    out
}

/// One round's detection events as carried on the wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionFrame {
    pub round_t: u32,
    pub bits: BitVec,
    pub valid: bool,
    pub flags: Flags,
}

impl DetectionFrame {
    pub fn new(round_t: u32, bits: BitVec) -> Self {
        Self {
            round_t,
            bits,
            valid: true,
            flags: Flags::OK,
        }
    }
}

/// Ground truth for a generated trace.
#[derive(Clone, Debug, Default)]
pub struct ErrorHistory {
    pub new_errors: Vec<Chain1>,
    pub cumulative: Vec<Chain1>,
    /// Syndrome of the cumulative error, before measurement flips.
    pub syndromes: Vec<BitVec>,
    pub meas_flips: Vec<BitVec>,
}

impl ErrorHistory {
    pub fn rounds(&self) -> usize {
        self.new_errors.len()
    }
}

/// `Δs_t = s_t ⊕ s_{t-1}`.
pub fn detection_events(s_t: &BitVec, s_prev: &BitVec) -> Result<BitVec> {
    if s_t.len() != s_prev.len() {
        return Err(invalid(format!(
            "syndrome lengths differ: {} vs {}",
            s_t.len(),
            s_prev.len()
        )));
    }
    Ok(s_t.xor(s_prev))
}

/// Generates `rounds` detection frames and the error history behind them.
pub fn gen_trace(
    code: &CodeSpec,
    model: NoiseModel,
    rounds: usize,
) -> Result<(Vec<DetectionFrame>, ErrorHistory)> {
    if rounds == 0 || rounds > u32::MAX as usize {
        return Err(invalid(format!(
            "rounds must lie in [1, 2^32), got {rounds}"
        )));
    }
    let mut sampler = Sampler::for_code(model, code);
    let mut frames = Vec::with_capacity(rounds);
    let mut history = ErrorHistory::default();
    let mut cumulative = Chain1::zeros(code.n());
    let mut prev_measured = BitVec::zeros(code.m_x());
    for t in 0..rounds {
        let (errors, flips) = sampler.sample_round();
        let fresh = Chain1(errors);
        cumulative = cumulative.xor(&fresh);
        let s = code.boundary(&cumulative)?.0;
        let measured = s.xor(&flips);
        let delta = detection_events(&measured, &prev_measured)?;
        frames.push(DetectionFrame::new(t as u32, delta));
        history.new_errors.push(fresh);
        history.cumulative.push(cumulative.clone());
        history.syndromes.push(s);
        history.meas_flips.push(flips);
        prev_measured = measured;
    }
    Ok((frames, history))
}
