//! `ufpipe`: generate traces, decode them through the streaming pipeline,
//! inject faults, run benchmark tiers, compare against reference records and
//! render reports.
//!
//! Exit codes: 0 ok, 1 other failure, 2 config error, 3 conformance or
//! invariant failure, 4 SLA failure.

mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use ufpipe::config::DecoderConfig;
use ufpipe::conformance::{compare, logical_failures, Contract, FailureDump};
use ufpipe::metrics::{report, ReportContext, Worksheet};
use ufpipe::pipeline::{metrics_from_records, run, Mode, RunOutput};
use ufpipe::record::{format_records, parse_records};
use ufpipe::stream::faults::{expected_counts, format_log};
use ufpipe::stream::{inject_faults, FaultPlan};
use ufpipe::trace::{format_truth, generate, parse_truth, Trace};
use ufpipe::Error;

#[derive(Parser)]
#[command(name = "ufpipe", version, about = "Surface-code decoding appliance")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run framing and decoding on one thread.
    #[arg(long)]
    single_thread: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a trace and its ground-truth sidecar.
    GenTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        rounds: usize,
    },
    /// Stream a trace through the pipeline; write records and metrics.
    Decode {
        #[command(flatten)]
        common: Common,
        /// Ground-truth sidecar for logical-failure counting.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Apply a fault plan to a trace.
    Inject {
        #[command(flatten)]
        common: Common,
        /// Fault plan of `key = value` lines.
        #[arg(long)]
        plan: PathBuf,
    },
    /// Run a benchmark tier (0 smoke, 1 regression, 2 stress, 3 fault).
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=3))]
        tier: u8,
    },
    /// Compare the pipeline's records for a trace against reference records.
    Conformance {
        #[command(flatten)]
        common: Common,
        /// Reference record file.
        #[arg(long)]
        golden: PathBuf,
        /// Primary record file; decoded from the trace when absent.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Render the benchmark report for a record file.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
    },
}

/// A failure carrying its exit code.
struct Exit {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        let err = e.into();
        let code = match err.downcast_ref::<Error>() {
            Some(Error::Config(_) | Error::CommandRejected(_)) => 2,
            _ => 1,
        };
        Exit { code, err }
    }
}

fn exit(code: u8, err: anyhow::Error) -> Exit {
    Exit { code, err }
}

type CmdResult = std::result::Result<(), Exit>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::GenTrace { common, rounds } => gen_trace(&common, rounds),
        Command::Decode { common, truth } => decode(&common, truth.as_deref()),
        Command::Inject { common, plan } => inject(&common, &plan),
        Command::Bench { common, tier } => bench::run_tier(&common, tier),
        Command::Conformance {
            common,
            golden,
            records,
        } => conformance(&common, &golden, records.as_deref()),
        Command::Report { common, records } => report_cmd(&common, &records),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit { code, err }) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn load_config(common: &Common) -> Result<DecoderConfig, Exit> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| exit(2, anyhow!("--config is required")))?;
    let text = fs::read_to_string(path)
        .map_err(|e| exit(2, anyhow!("reading {}: {e}", path.display())))?;
    let mut cfg = DecoderConfig::parse(&text).map_err(|e| exit(2, e.into()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_trace(common: &Common) -> Result<Trace, Exit> {
    let path = common
        .trace
        .as_ref()
        .ok_or_else(|| exit(2, anyhow!("--trace is required")))?;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = Trace::parse(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    if common.config.is_some() {
        let cfg = load_config(common)?;
        if cfg.cfg_id() != trace.config.cfg_id() {
            return Err(exit(
                2,
                anyhow!(
                    "config {:016x} does not match trace config {:016x}",
                    cfg.cfg_id(),
                    trace.config.cfg_id()
                ),
            ));
        }
    }
    Ok(trace)
}

fn out_dir(common: &Common) -> Result<PathBuf, Exit> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn mode(common: &Common) -> Mode {
    if common.single_thread {
        Mode::SingleThread
    } else {
        Mode::Threaded
    }
}

fn gen_trace(common: &Common, rounds: usize) -> CmdResult {
    let cfg = load_config(common)?;
    let dir = out_dir(common)?;
    let (trace, history) = generate(&cfg, rounds)?;
    write(&dir.join("trace.qec"), trace.to_bytes())?;
    write(&dir.join("truth.txt"), format_truth(&history))?;
    println!("cfg_id: {:016x}", cfg.cfg_id());
    println!("rounds: {rounds}");
    println!("trace: {}", dir.join("trace.qec").display());
    Ok(())
}

fn report_context(cfg: &DecoderConfig, trace: &str, records: &str, notes: String) -> ReportContext {
    ReportContext {
        code: cfg.code.as_str().to_string(),
        distance: cfg.d,
        window: cfg.window,
        noise: format!("p_data={} q_meas={}", cfg.p_data, cfg.q_meas),
        seed: cfg.seed,
        cfg_id: cfg.cfg_id(),
        burst_profile: format!(
            "arrival_burst={} fifo_depth={}",
            cfg.arrival_burst, cfg.fifo_depth
        ),
        backlog_bound: None,
        trace_path: trace.to_string(),
        records_path: records.to_string(),
        command_line: std::env::args().collect::<Vec<_>>().join(" "),
        notes,
    }
}

fn decode(common: &Common, truth: Option<&Path>) -> CmdResult {
    let trace = load_trace(common)?;
    let cfg = &trace.config;
    let dir = out_dir(common)?;
    let mut out: RunOutput = run(cfg, &trace.packets, Some(trace.rounds), mode(common))?;
    if let Some(path) = truth {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let code = cfg.build_code()?;
        let truth = parse_truth(&text, code.n())?;
        out.metrics.logical_failures = Some(logical_failures(&code, &out.records, &truth)?);
    }
    let records_path = dir.join("records.txt");
    write(&records_path, format_records(&out.records))?;
    let trace_name = common
        .trace
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default();
    let notes = format!(
        "framer packets={} corrupt={} desync={} fatal={}",
        out.framer.packets, out.framer.corrupt, out.framer.desync, out.framer.fatal
    );
    let ctx = report_context(cfg, &trace_name, &records_path.display().to_string(), notes);
    match report(&out.metrics, &ctx) {
        Ok(r) => {
            write(&dir.join("metrics.txt"), r.to_text())?;
            write(&dir.join("metrics.json"), r.to_json())?;
            print!("{}", r.to_text());
        }
        Err(e) => println!("report: {e}"),
    }
    if !out.costs.io.is_empty() {
        let w = Worksheet::from_stages(
            cfg.t_cycle,
            cfg.deadline,
            &[
                ("io", &out.costs.io),
                ("core", &out.costs.core),
                ("peel", &out.costs.peel),
                ("commit", &out.costs.commit),
            ],
        )?;
        write(&dir.join("worksheet.txt"), w.to_text())?;
    }
    if !out.metrics.conserved() || !out.fifo.conserved() {
        return Err(exit(3, anyhow!("record or FIFO conservation violated")));
    }
    Ok(())
}

fn inject(common: &Common, plan_path: &Path) -> CmdResult {
    let trace = load_trace(common)?;
    let text = fs::read_to_string(plan_path)
        .map_err(|e| exit(2, anyhow!("reading {}: {e}", plan_path.display())))?;
    let mut plan = FaultPlan::parse(&text).map_err(|e| exit(2, e.into()))?;
    if let Some(seed) = common.seed {
        plan.seed = seed;
    }
    let fc = ufpipe::pipeline::framer_config(&trace.config);
    let injected = inject_faults(&trace.packets, fc.packet_len(), &plan)?;
    let expected = expected_counts(&injected.log, &trace.packets, &fc);
    let dir = out_dir(common)?;
    let faulted = Trace {
        packets: injected.bytes,
        ..trace
    };
    write(&dir.join("trace.qec"), faulted.to_bytes())?;
    write(&dir.join("injections.log"), format_log(&injected.log))?;
    let summary = format!(
        "events: {}\nexpected.corrupt: {}\nexpected.desync: {}\nexpected.fatal: {}\nexpected.erasure: {}\n",
        injected.log.len(),
        expected.corrupt,
        expected.desync,
        expected.fatal,
        expected.lost
    );
    write(&dir.join("expected.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn conformance(common: &Common, golden: &Path, records: Option<&Path>) -> CmdResult {
    let trace = load_trace(common)?;
    let read_records = |p: &Path| -> Result<_, Exit> {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        Ok(parse_records(&text).with_context(|| format!("parsing {}", p.display()))?)
    };
    let reference = read_records(golden)?;
    let primary = match records {
        Some(p) => read_records(p)?,
        None => {
            run(
                &trace.config,
                &trace.packets,
                Some(trace.rounds),
                mode(common),
            )?
            .records
        }
    };
    let cmp = compare(&primary, &reference, &Contract::default());
    print!("{}", cmp.render());
    if let Some(d) = &cmp.divergence {
        let round = d.round_t.unwrap_or(0);
        let packet_len = ufpipe::pipeline::framer_config(&trace.config).packet_len();
        let dump = FailureDump::capture(
            trace.config.seed,
            trace.config.cfg_id(),
            round,
            &trace.packets,
            packet_len,
        );
        let dir = out_dir(common)?;
        write(&dir.join("first_failure.txt"), dump.render())?;
        return Err(exit(
            3,
            anyhow!("conformance failed at record {} (round {round})", d.index),
        ));
    }
    Ok(())
}

fn report_cmd(common: &Common, records_path: &Path) -> CmdResult {
    let trace = load_trace(common)?;
    let text = fs::read_to_string(records_path)
        .with_context(|| format!("reading {}", records_path.display()))?;
    let records = parse_records(&text)?;
    let m = metrics_from_records(&trace.config, &records, Some(trace.rounds))?;
    let trace_name = common
        .trace
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default();
    let ctx = report_context(
        &trace.config,
        &trace_name,
        &records_path.display().to_string(),
        String::new(),
    );
    let r = report(&m, &ctx)?;
    print!("{}", r.to_text());
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
        write(&dir.join("report.txt"), r.to_text())?;
        write(&dir.join("report.json"), r.to_json())?;
    }
    if r.get("sla.pass") != Some("true") {
        return Err(exit(4, anyhow!("SLA failed")));
    }
    Ok(())
}
