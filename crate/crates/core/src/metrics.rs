//! Latency, jitter, backlog and budget arithmetic.
//!
//! All timing is in simulated cycles so that every statistic is reproducible.
//! Percentiles use nearest rank: the value at 1-based index `⌈q·N⌉` of the
//! sorted samples.

use std::fmt::Write as _;

use serde_json::{Map, Value};

use crate::error::{invalid, Result};
use crate::flags::Flags;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatencySample {
    pub round_t: u32,
    /// Arrival stamp `A_t`.
    pub arrival: u64,
    /// Finish stamp `F_t`.
    pub finish: u64,
}

impl LatencySample {
    pub fn new(round_t: u32, arrival: u64, finish: u64) -> Result<Self> {
        if finish < arrival {
            return Err(invalid(format!(
                "round {round_t}: finish {finish} precedes arrival {arrival}"
            )));
        }
        Ok(Self {
            round_t,
            arrival,
            finish,
        })
    }

    pub fn latency(&self) -> u64 {
        self.finish - self.arrival
    }
}

/// A quantile as the exact fraction `num/den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quantile {
    pub num: u64,
    pub den: u64,
}

pub const P50: Quantile = Quantile { num: 1, den: 2 };
pub const P99: Quantile = Quantile { num: 99, den: 100 };
pub const P999: Quantile = Quantile {
    num: 999,
    den: 1000,
};

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank(sorted: &[u64], q: Quantile) -> Result<u64> {
    if sorted.is_empty() {
        return Err(invalid("percentile of an empty sample"));
    }
    if q.den == 0 || q.num > q.den {
        return Err(invalid(format!(
            "quantile {}/{} out of range",
            q.num, q.den
        )));
    }
    let n = sorted.len() as u128;
    let rank = (u128::from(q.num) * n).div_ceil(u128::from(q.den)).max(1);
    Ok(sorted[rank as usize - 1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Percentiles {
    pub p50: u64,
    pub p99: u64,
    pub p999: u64,
    pub max: u64,
}

pub fn percentiles(samples: &[u64]) -> Result<Percentiles> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    Ok(Percentiles {
        p50: nearest_rank(&sorted, P50)?,
        p99: nearest_rank(&sorted, P99)?,
        p999: nearest_rank(&sorted, P999)?,
        max: *sorted.last().expect("nonempty after nearest_rank"),
    })
}

pub fn mean(samples: &[u64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("mean of an empty sample"));
    }
    let sum: u128 = samples.iter().map(|&x| u128::from(x)).sum();
    Ok(sum as f64 / samples.len() as f64)
}

fn std_dev(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mu = xs.clone().sum::<f64>() / n as f64;
    (xs.map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64).sqrt()
}

/// `(J_abs, J_diff)`: population std of `L` and of `L_{t+1} − L_t`.
pub fn jitter(samples: &[u64]) -> (f64, f64) {
    let abs = std_dev(samples.iter().map(|&x| x as f64));
    let diff = std_dev(samples.windows(2).map(|w| w[1] as f64 - w[0] as f64));
    (abs, diff)
}

/// `B_{t+1} = max{0, B_t + L_t − T_cycle}` in cycles.
pub fn backlog_step(b: u64, l: u64, t_cycle: u64) -> u64 {
    (b + l).saturating_sub(t_cycle)
}

/// The same recurrence on normalized time.
pub fn backlog_step_f64(b: f64, l: f64, t_cycle: f64) -> f64 {
    (b + l - t_cycle).max(0.0)
}

/// Backlog after each round, starting from `B_0 = 0`.
pub fn backlog_trace(latencies: &[u64], t_cycle: u64) -> Vec<u64> {
    latencies
        .iter()
        .scan(0u64, |b, &l| {
            *b = backlog_step(*b, l, t_cycle);
            Some(*b)
        })
        .collect()
}

/// `P·⌈N/r⌉·c_upd`.
pub fn worst_case_cycles(p: u64, n: u64, r: u64, c_upd: u64) -> Result<u64> {
    if p == 0 || n == 0 || r == 0 || c_upd == 0 {
        return Err(invalid("worst_case_cycles needs positive arguments"));
    }
    p.checked_mul(n.div_ceil(r))
        .and_then(|x| x.checked_mul(c_upd))
        .ok_or_else(|| invalid("worst_case_cycles overflows u64"))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bandwidth {
    pub bytes_per_update: f64,
    pub bytes_per_decode: f64,
    /// Bytes per second.
    pub required: f64,
}

/// Memory traffic for `P` passes over `N` nodes, each reading `R` and writing
/// `W_r` words of `Bbits` bits, within a deadline given in nanoseconds.
pub fn bandwidth_budget(
    bbits: u64,
    reads: u64,
    writes: u64,
    passes: u64,
    nodes: u64,
    deadline_ns: u64,
) -> Result<Bandwidth> {
    if deadline_ns == 0 {
        return Err(invalid("deadline must be positive"));
    }
    // Keep everything in integer bits until the last division.
    let bits_update = u128::from(bbits) * u128::from(reads + writes);
    let bits_decode = bits_update * u128::from(passes) * u128::from(nodes);
    Ok(Bandwidth {
        bytes_per_update: bits_update as f64 / 8.0,
        bytes_per_decode: bits_decode as f64 / 8.0,
        required: (bits_decode * 1_000_000_000) as f64 / (8 * u128::from(deadline_ns)) as f64,
    })
}

/// Everything measured over one pipeline run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub t_cycle: u64,
    pub deadline: u64,
    pub samples: Vec<LatencySample>,
    /// Online backlog, one entry per sample.
    pub backlog: Vec<u64>,
    /// Records carrying each flag bit, indexed by bit position.
    pub flag_counts: [u64; 6],
    pub ok_records: u64,
    pub rounds_in: u64,
    pub records_out: u64,
    pub records_suppressed: u64,
    pub fifo_high_water: u64,
    pub fifo_dropped: u64,
    pub logical_failures: Option<u64>,
}

impl RunMetrics {
    pub fn new(t_cycle: u64, deadline: u64) -> Self {
        Self {
            t_cycle,
            deadline,
            ..Self::default()
        }
    }

    /// Appends a sample and advances the online backlog.
    pub fn push_sample(&mut self, s: LatencySample) {
        let prev = self.backlog.last().copied().unwrap_or(0);
        self.backlog
            .push(backlog_step(prev, s.latency(), self.t_cycle));
        self.samples.push(s);
    }

    pub fn count_flags(&mut self, flags: Flags) {
        if flags.is_ok() {
            self.ok_records += 1;
        }
        for (i, c) in self.flag_counts.iter_mut().enumerate() {
            if flags.bits() & (1 << i) != 0 {
                *c += 1;
            }
        }
    }

    pub fn flag_count(&self, flag: Flags) -> u64 {
        self.flag_counts[flag.bits().trailing_zeros() as usize]
    }

    pub fn latencies(&self) -> Vec<u64> {
        self.samples.iter().map(LatencySample::latency).collect()
    }

    pub fn deadline_misses(&self) -> u64 {
        self.samples
            .iter()
            .filter(|s| s.latency() > self.deadline)
            .count() as u64
    }

    pub fn backlog_max(&self) -> u64 {
        self.backlog.iter().copied().max().unwrap_or(0)
    }

    /// `rounds_in = records_out + records_suppressed`.
    pub fn conserved(&self) -> bool {
        self.rounds_in == self.records_out + self.records_suppressed
    }

    pub fn summary(&self) -> Result<LatencySummary> {
        let l = self.latencies();
        let pct = percentiles(&l)?;
        let (j_abs, j_diff) = jitter(&l);
        Ok(LatencySummary {
            mean: mean(&l)?,
            pct,
            j_abs,
            j_diff,
        })
    }

    pub fn sla(&self, backlog_bound: Option<u64>) -> Result<Sla> {
        let s = self.summary()?;
        let overflows = self.flag_count(Flags::OVERFLOW) + self.fifo_dropped;
        Ok(Sla {
            p999_ok: s.pct.p999 <= self.deadline,
            backlog_ok: backlog_bound.is_none_or(|b| self.backlog_max() <= b),
            overflow_ok: overflows == 0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatencySummary {
    pub mean: f64,
    pub pct: Percentiles,
    pub j_abs: f64,
    pub j_diff: f64,
}

/// The three pass/fail rules: `p999 ≤ D`, bounded backlog, no overflow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sla {
    pub p999_ok: bool,
    pub backlog_ok: bool,
    pub overflow_ok: bool,
}

impl Sla {
    pub fn pass(&self) -> bool {
        self.p999_ok && self.backlog_ok && self.overflow_ok
    }
}

/// Ordered `key: value` report with a JSON mirror.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        let map: Map<String, Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        serde_json::to_string_pretty(&Value::Object(map)).expect("string map serializes")
    }
}

/// Run context that the metrics alone do not know.
#[derive(Clone, Debug, Default)]
pub struct ReportContext {
    pub code: String,
    pub distance: usize,
    pub window: usize,
    pub noise: String,
    pub seed: u64,
    pub cfg_id: u64,
    pub burst_profile: String,
    pub backlog_bound: Option<u64>,
    pub trace_path: String,
    pub records_path: String,
    pub command_line: String,
    pub notes: String,
}

/// Renders the benchmark report. An empty run is refused.
pub fn report(m: &RunMetrics, ctx: &ReportContext) -> Result<Report> {
    if m.samples.is_empty() {
        return Err(invalid(
            "no latency samples: refusing to report an empty run",
        ));
    }
    let s = m.summary()?;
    let sla = m.sla(ctx.backlog_bound)?;
    let mut r = Report::default();
    r.push("build.version", env!("CARGO_PKG_VERSION"));
    r.push(
        "build.profile",
        if cfg!(debug_assertions) {
            "debug"
        } else {
            "release"
        },
    );
    r.push(
        "build.platform",
        format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
    );
    r.push("config.code", &ctx.code);
    r.push("config.d", ctx.distance);
    r.push("config.W", ctx.window);
    r.push("config.noise", &ctx.noise);
    r.push("config.seed", ctx.seed);
    r.push("config.cfg_id", format!("{:016x}", ctx.cfg_id));
    r.push("cadence.T_cycle", m.t_cycle);
    r.push("cadence.deadline", m.deadline);
    r.push("cadence.rounds", m.rounds_in);
    r.push("latency.mean", format!("{:.3}", s.mean));
    r.push("latency.p50", s.pct.p50);
    r.push("latency.p99", s.pct.p99);
    r.push("latency.p999", s.pct.p999);
    r.push("latency.max", s.pct.max);
    r.push("latency.jitter_abs", format!("{:.3}", s.j_abs));
    r.push("latency.jitter_diff", format!("{:.3}", s.j_diff));
    let span = m
        .samples
        .last()
        .map(|l| l.finish)
        .unwrap_or(0)
        .saturating_sub(m.samples[0].arrival)
        .max(1);
    r.push(
        "throughput.rounds_per_kcycle",
        format!("{:.3}", m.records_out as f64 * 1000.0 / span as f64),
    );
    r.push("throughput.burst_profile", &ctx.burst_profile);
    r.push("buffer.max_occupancy", m.fifo_high_water);
    r.push("buffer.overflows", m.flag_count(Flags::OVERFLOW));
    r.push("buffer.dropped", m.fifo_dropped);
    r.push("backlog.max", m.backlog_max());
    r.push(
        "correctness.logical_failures",
        m.logical_failures
            .map_or_else(|| "unknown".to_string(), |f| f.to_string()),
    );
    r.push(
        "correctness.logical_failure_rate",
        m.logical_failures.map_or_else(
            || "unknown".to_string(),
            |f| format!("{:.6}", f as f64 / m.records_out.max(1) as f64),
        ),
    );
    r.push("correctness.deadline_misses", m.deadline_misses());
    r.push("correctness.ok_records", m.ok_records);
    for (i, name) in ["erasure", "corrupt", "desync", "stale", "overflow", "fatal"]
        .iter()
        .enumerate()
    {
        r.push(&format!("flags.{name}"), m.flag_counts[i]);
    }
    r.push("records.out", m.records_out);
    r.push("records.suppressed", m.records_suppressed);
    r.push("correctness.notes", &ctx.notes);
    r.push("artifacts.trace", &ctx.trace_path);
    r.push("artifacts.records", &ctx.records_path);
    r.push("repro.command", &ctx.command_line);
    r.push("sla.p999_le_deadline", sla.p999_ok);
    r.push("sla.backlog_bounded", sla.backlog_ok);
    r.push("sla.no_overflow", sla.overflow_ok);
    r.push("sla.pass", sla.pass());
    Ok(r)
}

/// One stage row of the latency-budget worksheet.
#[derive(Clone, Debug, PartialEq)]
pub struct StageBudget {
    pub name: String,
    pub mean: f64,
    pub p999: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Worksheet {
    pub t_cycle: u64,
    pub deadline: u64,
    pub stages: Vec<StageBudget>,
}

impl Worksheet {
    /// Builds rows from per-round stage costs.
    pub fn from_stages(t_cycle: u64, deadline: u64, stages: &[(&str, &[u64])]) -> Result<Self> {
        let stages = stages
            .iter()
            .map(|(name, xs)| {
                Ok(StageBudget {
                    name: name.to_string(),
                    mean: mean(xs)?,
                    p999: percentiles(xs)?.p999,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            t_cycle,
            deadline,
            stages,
        })
    }

    pub fn total_mean(&self) -> f64 {
        self.stages.iter().map(|s| s.mean).sum()
    }

    /// Sum of stage p999s, an upper bound on the end-to-end p999 service time.
    pub fn total_p999(&self) -> u64 {
        self.stages.iter().map(|s| s.p999).sum()
    }

    /// The stage with the largest p999.
    pub fn dominant(&self) -> Option<&StageBudget> {
        self.stages.iter().max_by_key(|s| s.p999)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16}{:>14}{:>14}", "item", "mean", "p999");
        let _ = writeln!(out, "{:<16}{:>14}{:>14}", "T_cycle", self.t_cycle, "-");
        let _ = writeln!(out, "{:<16}{:>14}{:>14}", "deadline", self.deadline, "-");
        for s in &self.stages {
            let _ = writeln!(out, "{:<16}{:>14.3}{:>14}", s.name, s.mean, s.p999);
        }
        let slack_mean = self.deadline as f64 - self.total_mean();
        let slack_p999 = self.deadline as i128 - self.total_p999() as i128;
        let _ = writeln!(out, "{:<16}{:>14.3}{:>14}", "slack", slack_mean, slack_p999);
        let _ = writeln!(
            out,
            "{:<16}{:>14.3}{:>14}",
            "total",
            self.total_mean(),
            self.total_p999()
        );
        if let Some(d) = self.dominant() {
            let _ = writeln!(out, "dominant: {}", d.name);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_on_one_to_thousand() {
        let xs: Vec<u64> = (1..=1000).rev().collect();
        let p = percentiles(&xs).unwrap();
        assert_eq!((p.p50, p.p99, p.p999, p.max), (500, 990, 999, 1000));
    }

    #[test]
    fn constant_samples() {
        let p = percentiles(&[7; 13]).unwrap();
        assert_eq!((p.p50, p.p99, p.p999, p.max), (7, 7, 7, 7));
        assert!(percentiles(&[]).is_err());
    }

    #[test]
    fn mean_hides_the_tail() {
        let mut xs = vec![50u64; 990];
        xs.extend([500; 10]);
        assert!((mean(&xs).unwrap() - 54.5).abs() < 1e-12);
        assert_eq!(percentiles(&xs).unwrap().p999, 500);
    }

    #[test]
    fn backlog_examples() {
        assert_eq!(backlog_trace(&[10; 5], 10), vec![0; 5]);
        assert_eq!(backlog_trace(&[12; 4], 10), vec![2, 4, 6, 8]);
        // Normalized to T_cycle = 100 cycles.
        assert_eq!(backlog_step(0, 95, 100), 0);
        assert_eq!(backlog_step(0, 110, 100), 10);
        assert_eq!(backlog_step_f64(0.0, 0.95, 1.0), 0.0);
        assert!((backlog_step_f64(0.0, 1.10, 1.0) - 0.10).abs() < 1e-12);
    }

    #[test]
    fn cycle_bound() {
        assert_eq!(worst_case_cycles(6, 12288, 32, 2).unwrap(), 4608);
        assert_eq!(worst_case_cycles(3, 10, 64, 2).unwrap(), 6);
        assert_eq!(worst_case_cycles(1, 1, 1, 1).unwrap(), 1);
        assert!(worst_case_cycles(0, 1, 1, 1).is_err());
    }

    #[test]
    fn bandwidth_example() {
        let b = bandwidth_budget(64, 3, 1, 4, 100_000, 100_000).unwrap();
        assert_eq!(b.bytes_per_update, 32.0);
        assert_eq!(b.bytes_per_decode, 12_800_000.0);
        assert_eq!(b.required, 128e9);
        let z = bandwidth_budget(64, 0, 0, 4, 10, 1).unwrap();
        assert_eq!((z.bytes_per_update, z.required), (0.0, 0.0));
    }

    #[test]
    fn jitter_of_alternating_series() {
        let (a, d) = jitter(&[1, 3, 1, 3]);
        assert!((a - 1.0).abs() < 1e-12);
        // Differences 2, -2, 2: mean 2/3.
        let mu = 2.0 / 3.0;
        let want = ((2.0f64 - mu).powi(2) * 2.0 + (-2.0f64 - mu).powi(2)) / 3.0;
        assert!((d - want.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sla_rules() {
        let mut m = RunMetrics::new(10, 20);
        for t in 0..1000 {
            let l = if t == 500 { 25 } else { 5 };
            m.push_sample(LatencySample::new(t, 10 * u64::from(t), 10 * u64::from(t) + l).unwrap());
        }
        assert_eq!(m.deadline_misses(), 1);
        // One spike in 1000 sits exactly at rank 1000, above p999.
        assert!(m.sla(None).unwrap().pass());
        m.count_flags(Flags::OVERFLOW);
        assert!(!m.sla(None).unwrap().overflow_ok);
    }

    #[test]
    fn empty_report_refused() {
        assert!(report(&RunMetrics::new(1, 1), &ReportContext::default()).is_err());
    }

    #[test]
    fn report_text_and_json_share_keys() {
        let mut m = RunMetrics::new(10, 20);
        m.push_sample(LatencySample::new(0, 0, 4).unwrap());
        m.rounds_in = 1;
        m.records_out = 1;
        let r = report(&m, &ReportContext::default()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for (k, v) in r.entries() {
            assert_eq!(json[k], Value::String(v.clone()));
            assert!(r.to_text().contains(&format!("{k}: {v}\n")));
        }
        assert_eq!(r.get("sla.pass"), Some("true"));
    }

    #[test]
    fn worksheet_totals() {
        let io = [2u64, 2, 2];
        let core = [10u64, 30, 20];
        let w = Worksheet::from_stages(100, 80, &[("io", &io), ("core", &core)]).unwrap();
        assert_eq!(w.total_p999(), 32);
        assert_eq!(w.dominant().unwrap().name, "core");
        assert!(w.to_text().contains("slack"));
    }
}
