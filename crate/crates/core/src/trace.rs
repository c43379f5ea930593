//! Trace files and ground-truth sidecars.
//!
//! A trace is a text header followed by raw concatenated packets:
//!
//! ```text
//! QECTRACE v1
//! <canonical config, one `key = value` per line>
//! rounds <N>
//! END
//! <packet bytes>
//! ```
//!
//! The sidecar has one line per round listing that round's new error edges
//! in ascending decimal, separated by single spaces.

use crate::config::DecoderConfig;
use crate::error::{Error, Result};
use crate::geometry::Chain1;
use crate::noise::{gen_trace, ErrorHistory, NoiseModel};
use crate::stream::packet::encode_packet;

pub const TRACE_MAGIC: &str = "QECTRACE v1\n";
const END: &str = "END\n";

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub config: DecoderConfig,
    /// Rounds the source emitted, including any later lost in transit.
    pub rounds: u64,
    pub packets: Vec<u8>,
}

impl Trace {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.packets.len() + 512);
        out.extend_from_slice(TRACE_MAGIC.as_bytes());
        out.extend_from_slice(self.config.canonical_text().as_bytes());
        out.extend_from_slice(format!("rounds {}\n", self.rounds).as_bytes());
        out.extend_from_slice(END.as_bytes());
        out.extend_from_slice(&self.packets);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(TRACE_MAGIC.as_bytes())
            .ok_or_else(|| Error::Format("missing trace magic".into()))?;
        let mut pos = 0;
        let mut config_text = String::new();
        let mut rounds = None;
        loop {
            let nl = rest[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Format("unterminated trace header".into()))?;
            let line = std::str::from_utf8(&rest[pos..pos + nl])
                .map_err(|_| Error::Format("trace header is not UTF-8".into()))?;
            pos += nl + 1;
            if line == "END" {
                break;
            }
            if let Some(n) = line.strip_prefix("rounds ") {
                rounds = Some(
                    n.parse()
                        .map_err(|_| Error::Format(format!("bad rounds line `{line}`")))?,
                );
            } else {
                config_text.push_str(line);
                config_text.push('\n');
            }
        }
        let config = DecoderConfig::parse(&config_text)?;
        if config.canonical_text() != config_text {
            return Err(Error::Format("trace header config is not canonical".into()));
        }
        Ok(Self {
            config,
            rounds: rounds.ok_or_else(|| Error::Format("missing rounds line".into()))?,
            packets: rest[pos..].to_vec(),
        })
    }
}

/// Generates a trace and its truth from the config's noise and seed.
pub fn generate(config: &DecoderConfig, rounds: usize) -> Result<(Trace, ErrorHistory)> {
    let code = config.build_code()?;
    let model = NoiseModel::new(config.p_data, config.q_meas, config.seed)?;
    let (frames, history) = gen_trace(&code, model, rounds)?;
    let cfg_id = config.cfg_id();
    let mut packets = Vec::with_capacity(rounds * crate::stream::packet::packet_len(code.m_x()));
    for f in &frames {
        packets.extend(encode_packet(f, cfg_id, f.round_t, code.m_x())?);
    }
    Ok((
        Trace {
            config: config.clone(),
            rounds: rounds as u64,
            packets,
        },
        history,
    ))
}

pub fn format_truth(history: &ErrorHistory) -> String {
    let mut out = String::new();
    for e in &history.new_errors {
        let edges: Vec<String> = e.edges().iter().map(usize::to_string).collect();
        out.push_str(&edges.join(" "));
        out.push('\n');
    }
    out
}

/// Reads a sidecar back into per-round chains over `n` edges.
pub fn parse_truth(text: &str, n: usize) -> Result<Vec<Chain1>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let edges = line
                .split_ascii_whitespace()
                .map(|e| {
                    e.parse::<usize>()
                        .map_err(|_| Error::Format(format!("truth line {}: bad edge `{e}`", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            Chain1::from_edges(n, &edges)
                .map_err(|e| Error::Format(format!("truth line {}: {e}", i + 1)))
        })
        .collect()
}
