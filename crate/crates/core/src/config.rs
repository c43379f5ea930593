//! Flat `key = value` decoder configuration.
//!
//! The canonical form lists every key in sorted order as `key = value\n`,
//! with integers in plain decimal and probabilities in shortest round-trip
//! decimal. `cfg_id` is the first 8 bytes (little-endian) of SHA-256 over it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{CodeKind, CodeSpec};
use crate::stream::packet::payload_len;
use crate::uf::{default_p_max, Limits};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    pub schema_version: u32,
    pub code: CodeKind,
    /// Distance for planar codes, side `L` for toric codes.
    pub d: usize,
    pub window: usize,
    pub p_data: f64,
    pub q_meas: f64,
    pub r_max: u32,
    pub p_max: u32,
    pub fifo_depth: usize,
    /// Deadline `D` in cycles.
    pub deadline: u64,
    pub t_cycle: u64,
    /// Staleness window `S` in cycles; 0 disables the check.
    pub staleness: u64,
    pub seed: u64,
    /// Node updates per cycle in the cost model.
    pub lanes: u64,
    /// Cycles per node update in the cost model.
    pub c_upd: u64,
    /// Rounds delivered together by the ingress link.
    pub arrival_burst: u64,
    pub max_payload: usize,
}

const KEYS: [&str; 17] = [
    "arrival_burst",
    "c_upd",
    "code",
    "d",
    "deadline",
    "fifo_depth",
    "lanes",
    "max_payload",
    "p_data",
    "p_max",
    "q_meas",
    "r_max",
    "schema_version",
    "seed",
    "staleness",
    "t_cycle",
    "window",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl DecoderConfig {
    /// Defaults for a planar code of distance `d`.
    pub fn planar(d: usize) -> Self {
        let limits = Limits::for_distance(d);
        Self {
            schema_version: SCHEMA_VERSION,
            code: CodeKind::Planar,
            d,
            window: 1,
            p_data: 0.01,
            q_meas: 0.0,
            r_max: limits.r_max,
            p_max: limits.p_max,
            fifo_depth: 128,
            deadline: 1000,
            t_cycle: 1000,
            staleness: 0,
            seed: 1,
            lanes: 32,
            c_upd: 2,
            arrival_burst: 1,
            max_payload: 4096,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(cfg_err(format!("line {}: unknown key `{k}`", lineno + 1)));
            }
            if kv.insert(k.to_string(), v.to_string()).is_some() {
                return Err(cfg_err(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
        }
        let version: u32 = match kv.get("schema_version") {
            Some(v) => num(v, "schema_version")?,
            None => return Err(cfg_err("missing schema_version")),
        };
        if version != SCHEMA_VERSION {
            return Err(Error::CommandRejected(format!(
                "unsupported schema_version {version}"
            )));
        }
        let code = kv
            .get("code")
            .ok_or_else(|| cfg_err("missing code"))?
            .parse::<CodeKind>()
            .map_err(|e| cfg_err(e.to_string()))?;
        let d = num(kv.get("d").ok_or_else(|| cfg_err("missing d"))?, "d")?;
        let mut cfg = Self {
            code,
            ..Self::planar(d)
        };
        let r_max_given = kv.contains_key("r_max");
        for (k, v) in &kv {
            match k.as_str() {
                "window" => cfg.window = num(v, k)?,
                "p_data" => cfg.p_data = num(v, k)?,
                "q_meas" => cfg.q_meas = num(v, k)?,
                "r_max" => cfg.r_max = num(v, k)?,
                "p_max" => cfg.p_max = num(v, k)?,
                "fifo_depth" => cfg.fifo_depth = num(v, k)?,
                "deadline" => cfg.deadline = num(v, k)?,
                "t_cycle" => cfg.t_cycle = num(v, k)?,
                "staleness" => cfg.staleness = num(v, k)?,
                "seed" => cfg.seed = num(v, k)?,
                "lanes" => cfg.lanes = num(v, k)?,
                "c_upd" => cfg.c_upd = num(v, k)?,
                "arrival_burst" => cfg.arrival_burst = num(v, k)?,
                "max_payload" => cfg.max_payload = num(v, k)?,
                _ => {}
            }
        }
        if r_max_given && !kv.contains_key("p_max") {
            cfg.p_max = default_p_max(cfg.r_max);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(cfg_err(m));
        if self.code == CodeKind::CssGeneric {
            return bad("css-generic codes cannot be streamed".into());
        }
        if !(2..=63).contains(&self.d) {
            return bad(format!("d must lie in [2, 63], got {}", self.d));
        }
        if !(1..=64).contains(&self.window) {
            return bad(format!("window must lie in [1, 64], got {}", self.window));
        }
        for (name, p) in [("p_data", self.p_data), ("q_meas", self.q_meas)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.window == 1 && self.q_meas > 0.0 {
            return bad("q_meas > 0 needs window >= 2".into());
        }
        Limits::new(self.r_max, self.p_max).map_err(|e| cfg_err(e.to_string()))?;
        for (name, v) in [
            ("fifo_depth", self.fifo_depth as u64),
            ("t_cycle", self.t_cycle),
            ("deadline", self.deadline),
            ("lanes", self.lanes),
            ("c_upd", self.c_upd),
            ("arrival_burst", self.arrival_burst),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        let need = payload_len(self.checks());
        if self.max_payload < need {
            return bad(format!(
                "max_payload {} is below the payload size {need}",
                self.max_payload
            ));
        }
        Ok(())
    }

    /// X-check count of the configured lattice.
    pub fn checks(&self) -> usize {
        match self.code {
            CodeKind::Toric => self.d * self.d,
            _ => self.d * (self.d - 1),
        }
    }

    pub fn build_code(&self) -> Result<CodeSpec> {
        match self.code {
            CodeKind::Planar => CodeSpec::build_planar(self.d),
            CodeKind::Toric => CodeSpec::build_toric(self.d),
            CodeKind::CssGeneric => Err(cfg_err("css-generic codes cannot be streamed")),
        }
    }

    pub fn limits(&self) -> Limits {
        Limits {
            r_max: self.r_max,
            p_max: self.p_max,
        }
    }

    pub fn payload_bytes(&self) -> usize {
        payload_len(self.checks())
    }

    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let v = match k {
                "arrival_burst" => self.arrival_burst.to_string(),
                "c_upd" => self.c_upd.to_string(),
                "code" => self.code.as_str().to_string(),
                "d" => self.d.to_string(),
                "deadline" => self.deadline.to_string(),
                "fifo_depth" => self.fifo_depth.to_string(),
                "lanes" => self.lanes.to_string(),
                "max_payload" => self.max_payload.to_string(),
                "p_data" => self.p_data.to_string(),
                "p_max" => self.p_max.to_string(),
                "q_meas" => self.q_meas.to_string(),
                "r_max" => self.r_max.to_string(),
                "schema_version" => self.schema_version.to_string(),
                "seed" => self.seed.to_string(),
                "staleness" => self.staleness.to_string(),
                "t_cycle" => self.t_cycle.to_string(),
                "window" => self.window.to_string(),
                _ => unreachable!("key table covers every field"),
            };
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn cfg_id(&self) -> u64 {
        cfg_id_of(&self.canonical_text())
    }
}

impl fmt::Display for DecoderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_text())
    }
}

pub fn cfg_id_of(canonical: &str) -> u64 {
    let digest = Sha256::digest(canonical.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn num<T: FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| cfg_err(format!("`{key}`: cannot parse `{v}`")))
}
