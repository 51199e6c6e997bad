//! Command-line driver: run one benchmark or sweep the whole suite.
//!
//! Exit codes: `0` success, `1` runtime failure (I/O, oracle mismatch),
//! `2` bad flags or an unknown benchmark name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{bench_registry, benchmarks, find_bench, verify_case, BenchCase, BenchData, BenchSpec};
use crate::error::{Error, Result};
use crate::exec::kernel::{compile, CompiledPlan};
use crate::exec::Registry;
use crate::io::{append_report_csv, expect_keyed, expect_unkeyed, read_events, write_report_dat, ReportRow, REPORT_HEADER};
use crate::ir::sexpr::print_query;
use crate::ir::Query;
use crate::passes::{fuse, plan};
use crate::runtime::{default_threads, execute_keyed, execute_parallel, measure, DEFAULT_INTERVAL};

#[derive(Parser)]
#[command(name = "tilt", version, about = "Time-centric streaming query engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one benchmark and report its throughput.
    Run(RunArgs),
    /// Run every registered benchmark across a thread sweep.
    BenchSuite(SuiteArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark name (see `bench-suite` for the full set).
    bench: String,

    /// Worker threads (defaults to the machine's core count).
    #[arg(long, env = "TILT_THREADS")]
    threads: Option<usize>,

    /// Partition width in ticks for parallel execution.
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    interval_size: i64,

    /// Repeat the timed run and report the mean.
    #[arg(long, default_value_t = 1)]
    repeat: usize,

    /// Disable operator fusion.
    #[arg(long)]
    no_fuse: bool,

    /// Cross-check kernel output against the dense-evaluation oracle.
    #[arg(long)]
    oracle: bool,

    /// Print the query IR after the named stage, then run as usual.
    #[arg(long, value_enum, value_name = "STAGE")]
    dump_ir: Option<Stage>,

    /// Append the report row to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Read events from a file (CSV or JSONL) instead of generating them.
    #[arg(long, conflicts_with_all = ["events", "seed"])]
    input: Option<PathBuf>,

    /// Number of synthetic events to generate.
    #[arg(long, default_value_t = 100_000)]
    events: u64,

    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SuiteArgs {
    /// Largest worker count in the sweep (1,2,4,8 capped here).
    #[arg(long, env = "TILT_THREADS", default_value_t = 8)]
    threads: usize,

    /// Partition width in ticks for parallel execution.
    #[arg(long, default_value_t = DEFAULT_INTERVAL)]
    interval_size: i64,

    /// Repeat each timed run and report the mean.
    #[arg(long, default_value_t = 1)]
    repeat: usize,

    /// Disable operator fusion.
    #[arg(long)]
    no_fuse: bool,

    /// Cross-check every benchmark against the dense-evaluation oracle.
    #[arg(long)]
    oracle: bool,

    /// Write the report to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Number of synthetic events per benchmark.
    #[arg(long, default_value_t = 100_000)]
    events: u64,

    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Pipeline stage whose IR `--dump-ir` prints.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    /// As lowered from the dataflow graph, before any pass.
    Lowered,
    /// After cross-definition fusion.
    Fused,
    /// After boundary resolution (what the kernels execute).
    Resolved,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Dat,
}

/// Entry point for the `tilt` binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            // Help/version go to stdout, diagnostics to stderr.
            let _ = e.print();
            return code;
        }
    };
    let run = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::BenchSuite(args) => cmd_suite(args),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let spec = match find_bench(&args.bench) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(2);
        }
    };
    let threads = match resolve_threads(args.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return Ok(2);
        }
    };

    let reg = bench_registry();
    let query = spec.query(&reg)?;
    let fuse_enabled = !args.no_fuse;
    let (planned, _) = plan(&query, &reg, fuse_enabled)?;
    if let Some(stage) = args.dump_ir {
        dump_ir(&query, &planned, &reg, fuse_enabled, stage)?;
    }
    let plan = compile(&planned, &reg)?;

    let case = match &args.input {
        Some(path) => {
            if spec.file_input.is_none() {
                eprintln!(
                    "error: benchmark `{}` takes more than one input stream \
                     and cannot be fed from --input",
                    spec.name
                );
                return Ok(2);
            }
            load_case(spec, path)?
        }
        None => spec.generate(args.events, args.seed),
    };

    if args.oracle {
        verify_case(&plan, &reg, &case)?;
        eprintln!("oracle: kernel output matches dense evaluation");
    }

    let row = run_case(&plan, &case, spec.name, threads, args.interval_size, args.repeat)?;
    eprintln!(
        "{}: {} events in {:.3}s at {} threads -> {:.0} events/s",
        row.bench, row.events, row.seconds, row.threads, row.throughput
    );
    emit(&[row], args.out.as_deref(), args.format)?;
    Ok(0)
}

fn cmd_suite(args: SuiteArgs) -> Result<i32> {
    if args.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return Ok(2);
    }
    let sweep = thread_sweep(args.threads);
    let reg = bench_registry();
    let fuse_enabled = !args.no_fuse;
    let mut rows = Vec::new();
    for spec in benchmarks() {
        let query = spec.query(&reg)?;
        let (planned, _) = plan(&query, &reg, fuse_enabled)?;
        let plan = compile(&planned, &reg)?;
        let case = spec.generate(args.events, args.seed);
        if args.oracle {
            verify_case(&plan, &reg, &case).map_err(|e| match e {
                Error::InvalidQuery(msg) => {
                    Error::InvalidQuery(format!("benchmark `{}`: {msg}", spec.name))
                }
                other => other,
            })?;
            eprintln!("{}: oracle ok", spec.name);
        }
        for &threads in &sweep {
            let row =
                run_case(&plan, &case, spec.name, threads, args.interval_size, args.repeat)?;
            eprintln!(
                "{}: {} events in {:.3}s at {} threads -> {:.0} events/s",
                row.bench, row.events, row.seconds, row.threads, row.throughput
            );
            rows.push(row);
        }
    }
    emit(&rows, args.out.as_deref(), args.format)?;
    Ok(0)
}

/// Worker counts to sweep: powers of two up to `cap`, plus `cap` itself.
fn thread_sweep(cap: usize) -> Vec<usize> {
    let mut sweep: Vec<usize> = [1, 2, 4, 8].into_iter().filter(|&t| t <= cap).collect();
    if !sweep.contains(&cap) {
        sweep.push(cap);
    }
    sweep
}

fn resolve_threads(requested: Option<usize>) -> std::result::Result<usize, String> {
    match requested {
        Some(0) => Err("--threads must be at least 1".into()),
        Some(t) => Ok(t),
        None => Ok(default_threads()),
    }
}

fn dump_ir(
    lowered: &Query,
    resolved: &Query,
    reg: &Registry,
    fuse_enabled: bool,
    stage: Stage,
) -> Result<()> {
    let text = match stage {
        Stage::Lowered => print_query(lowered),
        Stage::Fused => {
            if fuse_enabled {
                print_query(&fuse(lowered, reg)?)
            } else {
                print_query(lowered)
            }
        }
        Stage::Resolved => print_query(resolved),
    };
    println!("{text}");
    Ok(())
}

/// Read a benchmark's input stream from a file and wrap it as a runnable case.
fn load_case(spec: &BenchSpec, path: &Path) -> Result<BenchCase> {
    let Some(input) = spec.file_input else {
        return Err(Error::InvalidArg(format!(
            "benchmark `{}` takes more than one input stream and cannot be fed from --input",
            spec.name
        )));
    };
    let rows = read_events(path)?;
    if rows.is_empty() {
        return Err(Error::InvalidArg(format!("{}: no events", path.display())));
    }
    if spec.keyed {
        let keyed = expect_keyed(rows)?;
        let ts = keyed.iter().map(|(_, e)| e.start.0).min().unwrap();
        let te = keyed.iter().map(|(_, e)| e.end.0).max().unwrap();
        Ok(BenchCase::keyed(keyed, ts, te))
    } else {
        let events = expect_unkeyed(rows)?;
        let ts = events.iter().map(|e| e.start.0).min().unwrap();
        let te = events.iter().map(|e| e.end.0).max().unwrap();
        Ok(BenchCase::streams(BTreeMap::from([(input.to_string(), events)]), ts, te))
    }
}

/// Execute one case and time it, producing a report row.
fn run_case(
    plan: &CompiledPlan,
    case: &BenchCase,
    bench: &str,
    threads: usize,
    interval: i64,
    repeat: usize,
) -> Result<ReportRow> {
    let repeat = repeat.max(1);
    let timing = match &case.data {
        BenchData::Streams(streams) => {
            let (_, timing) = measure(repeat, || {
                execute_parallel(plan, streams, case.ts, case.te, threads, interval)
            })?;
            timing
        }
        BenchData::Keyed(keyed) => {
            let (_, timing) = measure(repeat, || {
                execute_keyed(plan, keyed, case.ts, case.te, threads, interval)
            })?;
            timing
        }
    };
    let seconds = timing.mean_seconds();
    Ok(ReportRow {
        bench: bench.to_string(),
        threads,
        interval,
        events: case.events,
        seconds,
        throughput: case.events as f64 / seconds,
    })
}

/// Write rows to `--out` in the chosen format, or print them to stdout.
fn emit(rows: &[ReportRow], out: Option<&Path>, format: Format) -> Result<()> {
    match (out, format) {
        (Some(path), Format::Csv) => append_report_csv(path, rows),
        (Some(path), Format::Dat) => write_report_dat(path, rows),
        (None, _) => {
            let sep = if format == Format::Csv { "," } else { " " };
            println!("{}", REPORT_HEADER.join(sep));
            for r in rows {
                println!(
                    "{}{sep}{}{sep}{}{sep}{}{sep}{:.6}{sep}{:.1}",
                    r.bench, r.threads, r.interval, r.events, r.seconds, r.throughput
                );
            }
            Ok(())
        }
    }
}
