//! Benchmark tiers.
//!
//! Tier 0 is a smoke run on small planar codes. Tier 1 covers the regression
//! configs and checks determinism across runs and threading modes. Tier 2
//! stresses a larger code under bursty arrivals. Tier 3 injects faults and
//! checks the flag counts against the injection log.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::anyhow;
use sha2::{Digest, Sha256};

use ufpipe::config::DecoderConfig;
use ufpipe::conformance::logical_failures;
use ufpipe::flags::Flags;
use ufpipe::geometry::CodeKind;
use ufpipe::pipeline::{framer_config, run, Mode, RunOutput};
use ufpipe::record::format_records;
use ufpipe::stream::faults::expected_counts;
use ufpipe::stream::{inject_faults, FaultPlan};
use ufpipe::trace::generate;

use crate::{exit, out_dir, write, CmdResult, Common};

struct Case {
    name: &'static str,
    cfg: DecoderConfig,
    rounds: usize,
    faults: Option<FaultPlan>,
}

fn planar(d: usize, p: f64) -> DecoderConfig {
    DecoderConfig {
        p_data: p,
        ..DecoderConfig::planar(d)
    }
}

fn cases(tier: u8, seed: u64) -> Vec<Case> {
    let with_seed = |mut cfg: DecoderConfig| {
        cfg.seed = seed;
        cfg
    };
    let case = |name, cfg, rounds| Case {
        name,
        cfg: with_seed(cfg),
        rounds,
        faults: None,
    };
    match tier {
        0 => vec![
            case("planar-d2", planar(2, 0.01), 1000),
            case("planar-d3", planar(3, 0.01), 1000),
        ],
        1 => vec![
            case("planar-d3", planar(3, 0.01), 10_000),
            case("planar-d5", planar(5, 0.01), 10_000),
            case(
                "toric-L4",
                DecoderConfig {
                    code: CodeKind::Toric,
                    d: 4,
                    p_data: 0.005,
                    ..DecoderConfig::planar(4)
                },
                10_000,
            ),
            case(
                "planar-d3-w3",
                DecoderConfig {
                    window: 3,
                    q_meas: 0.01,
                    // Each round waits up to W-1 cycles for its window to close.
                    deadline: 3000,
                    ..planar(3, 0.01)
                },
                9_999,
            ),
        ],
        2 => vec![case(
            "planar-d7-bursty",
            DecoderConfig {
                arrival_burst: 64,
                fifo_depth: 128,
                // A 64-packet burst at d=7 drains in roughly 1300 cycles.
                deadline: 2000,
                ..planar(7, 0.02)
            },
            20_000,
        )],
        _ => vec![Case {
            name: "planar-d3-faults",
            cfg: with_seed(planar(3, 0.01)),
            rounds: 10_000,
            faults: Some(FaultPlan {
                flip_rate: 0.002,
                drop_rate: 0.002,
                burst_rate: 0.0005,
                burst_min: 64,
                burst_max: 64,
                desync_rate: 0.002,
                seed,
            }),
        }],
    }
}

fn digest(out: &RunOutput) -> String {
    Sha256::digest(format_records(&out.records).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub(crate) fn run_tier(common: &Common, tier: u8) -> CmdResult {
    let seed = common.seed.unwrap_or(1);
    let mut text = String::new();
    let mut invariants_ok = true;
    let mut sla_ok = true;
    let began = Instant::now();
    for case in cases(tier, seed) {
        let started = Instant::now();
        let (trace, history) = generate(&case.cfg, case.rounds)?;
        let fc = framer_config(&case.cfg);
        let (bytes, expected) = match &case.faults {
            Some(plan) => {
                let inj = inject_faults(&trace.packets, fc.packet_len(), plan)?;
                let exp = expected_counts(&inj.log, &trace.packets, &fc);
                (inj.bytes, Some(exp))
            }
            None => (trace.packets.clone(), None),
        };
        let rounds = Some(case.rounds as u64);
        let single = run(&case.cfg, &bytes, rounds, Mode::SingleThread)?;
        let code = case.cfg.build_code()?;
        let failures = logical_failures(&code, &single.records, &history.new_errors)?;
        let mut checks: Vec<(&str, bool)> = vec![
            ("records_conserved", single.metrics.conserved()),
            ("fifo_conserved", single.fifo.conserved()),
            (
                "monotone_rounds",
                single
                    .records
                    .windows(2)
                    .all(|w| w[0].round_t <= w[1].round_t),
            ),
        ];
        if tier == 1 {
            let again = run(&case.cfg, &bytes, rounds, Mode::SingleThread)?;
            let threaded = run(&case.cfg, &bytes, rounds, Mode::Threaded)?;
            checks.push(("deterministic", digest(&single) == digest(&again)));
            checks.push(("threaded_identical", digest(&single) == digest(&threaded)));
        }
        if case.cfg.code == CodeKind::Planar && case.faults.is_none() {
            checks.push(("no_fatal", single.metrics.flag_count(Flags::FATAL) == 0));
        }
        if let Some(exp) = expected {
            let f = single.framer;
            checks.push(("corrupt_expected", f.corrupt == exp.corrupt));
            checks.push(("desync_expected", f.desync == exp.desync));
            checks.push((
                "erasure_expected",
                single.metrics.flag_count(Flags::ERASURE) == exp.lost,
            ));
        }
        let sla = single.metrics.sla(None)?;
        let summary = single.metrics.summary()?;
        let _ = writeln!(text, "case: {}", case.name);
        let _ = writeln!(text, "  cfg_id: {:016x}", case.cfg.cfg_id());
        let _ = writeln!(text, "  rounds: {}", case.rounds);
        let _ = writeln!(text, "  records: {}", single.records.len());
        let _ = writeln!(text, "  logical_failures: {failures}");
        let _ = writeln!(
            text,
            "  latency: mean={:.2} p99={} p999={} max={}",
            summary.mean, summary.pct.p99, summary.pct.p999, summary.pct.max
        );
        let _ = writeln!(text, "  fifo_high_water: {}", single.fifo.high_water);
        let _ = writeln!(text, "  records_sha256: {}", digest(&single));
        for (name, ok) in &checks {
            let _ = writeln!(
                text,
                "  check.{name}: {}",
                if *ok { "ok" } else { "FAILED" }
            );
        }
        let _ = writeln!(text, "  sla: {}", if sla.pass() { "pass" } else { "fail" });
        let _ = writeln!(text, "  wall_ms: {}", started.elapsed().as_millis());
        invariants_ok &= checks.iter().all(|(_, ok)| *ok);
        sla_ok &= sla.pass();
    }
    let verdict = if invariants_ok && sla_ok {
        "PASS"
    } else {
        "FAIL"
    };
    let _ = writeln!(
        text,
        "tier {tier}: {verdict} ({} ms)",
        began.elapsed().as_millis()
    );
    print!("{text}");
    if common.out.is_some() {
        let dir = out_dir(common)?;
        write(&dir.join(format!("bench_tier{tier}.txt")), &text)?;
    }
    if !invariants_ok {
        return Err(exit(3, anyhow!("tier {tier} invariant check failed")));
    }
    if !sla_ok {
        return Err(exit(4, anyhow!("tier {tier} SLA failed")));
    }
    Ok(())
}
