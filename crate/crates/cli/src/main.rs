//! Command-line driver for the measure → estimate → compile → check loop.

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use rosptp::checker::validate_ladder;
use rosptp::pipeline::{compile_pipeline_with, CompileOptions};
use rosptp::stats::{read_stats, write_stats};
use rosptp::trace::read_trace;
use rosptp::{
    bind_statistics, build_histogram, export_prism, granularity_ladder, load_graph, pair_events,
    parse_prism, parse_query, simulate, summarize_samples, write_trace, CheckOptions, PipelineSpec, Ptp,
    ScenarioConfig,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rosptp", version, about = "Timing estimation and timeliness checking for robot software")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a graph under a scenario and write a JSONL trace.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario horizon, in seconds.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Pair trace entries and build one histogram per channel and duration kind.
    Estimate {
        #[arg(long)]
        traces: PathBuf,
        /// Seconds per model time unit.
        #[arg(long)]
        unit: f64,
        #[arg(long, default_value_t = 0.05)]
        min_bin_prob: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile a pipeline into a model, binding `ref` durations from a stats file.
    Compile {
        #[arg(long)]
        pipeline: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Let branch locations idle instead of forcing an immediate choice.
        #[arg(long)]
        no_branch_invariant: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a Pmax/Pmin reachability query at one or more granularities.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        granularity: Vec<u32>,
        #[arg(long, default_value_t = 1e-10)]
        epsilon: f64,
        #[arg(long, default_value_t = 5_000_000)]
        state_cap: usize,
        /// Use value iteration even when the exact pass applies.
        #[arg(long)]
        value_iteration: bool,
    },
    /// Write a model as a PRISM pta program.
    ExportPrism {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a PRISM pta program into a model file.
    ParsePrism {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Writes through a temporary file in the target directory so a failed run
/// never leaves partial output behind.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.flush())
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load_model(path: &Path) -> Result<Ptp> {
    Ptp::from_json(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn usage_error(message: String) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, message).exit()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { graph, scenario, out, seed, horizon } => {
            let g = load_graph(&read(&graph)?).with_context(|| format!("{}", graph.display()))?;
            let mut cfg =
                ScenarioConfig::from_json(&read(&scenario)?).with_context(|| format!("{}", scenario.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            let events = simulate(&g, &cfg).with_context(|| format!("{}", scenario.display()))?;
            let mut buf = Vec::new();
            let n = write_trace(&events, &mut buf)?;
            write_atomic(&out, std::str::from_utf8(&buf)?)?;
            println!("wrote {n} events to {}", out.display());
        }
        Command::Estimate { traces, unit, min_bin_prob, out } => {
            let file = std::fs::File::open(&traces).with_context(|| format!("cannot read {}", traces.display()))?;
            let log = read_trace(std::io::BufReader::new(file)).with_context(|| format!("{}", traces.display()))?;
            let pairing = pair_events(&log.corrected_events()).with_context(|| format!("{}", traces.display()))?;
            let negative: Vec<String> = pairing
                .negative_samples()
                .map(|s| format!("{} corr {} = {}", s.key(), s.corr_id, s.value))
                .collect();
            if !negative.is_empty() {
                bail!(
                    "{}: {} negative durations (clock offsets?): {}",
                    traces.display(),
                    negative.len(),
                    negative.join(", ")
                );
            }
            if !pairing.unpaired.is_empty() {
                eprintln!("warning: {} unpaired trace entries ignored", pairing.unpaired.len());
            }
            let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for s in &pairing.samples {
                groups.entry(s.key()).or_default().push(s.value);
            }
            let mut hists = BTreeMap::new();
            for (key, values) in &groups {
                let h = build_histogram(values, unit, min_bin_prob).with_context(|| key.clone())?;
                let s = summarize_samples(values).with_context(|| key.clone())?;
                let bins: Vec<String> = h.bins.iter().map(|b| format!("({},{})", b.lo, b.hi)).collect();
                println!(
                    "{key}: n={} mean={:.6} p50={:.6} p99={:.6} bins={}",
                    s.count,
                    s.mean,
                    s.p50,
                    s.p99,
                    bins.join(" ")
                );
                hists.insert(key.clone(), h);
            }
            write_atomic(&out, &(write_stats(&hists) + "\n"))?;
        }
        Command::Compile { pipeline, stats, no_branch_invariant, out } => {
            let spec =
                PipelineSpec::from_json(&read(&pipeline)?).with_context(|| format!("{}", pipeline.display()))?;
            let bound = match stats {
                Some(path) => {
                    let s = read_stats(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                    bind_statistics(&spec, &s).with_context(|| format!("{}", pipeline.display()))?
                }
                None => spec,
            };
            let m = compile_pipeline_with(&bound, CompileOptions { branch_invariant: !no_branch_invariant })
                .with_context(|| format!("{}", pipeline.display()))?;
            write_atomic(&out, &(m.to_json() + "\n"))?;
            println!("compiled {} locations to {}", m.locations.len(), out.display());
        }
        Command::Check { model, query, granularity, epsilon, state_cap, value_iteration } => {
            if let Err(e) = validate_ladder(&granularity) {
                usage_error(format!("--granularity: {e}"));
            }
            if !(epsilon > 0.0) {
                usage_error("--epsilon must be positive".into());
            }
            let q = match parse_query(&query) {
                Ok(q) => q,
                Err(e) => usage_error(format!("--query: {e}")),
            };
            let m = load_model(&model)?;
            let opts = CheckOptions { epsilon, state_cap, force_value_iteration: value_iteration, ..Default::default() };
            let ladder = granularity_ladder(&m, &q, &granularity, &opts).with_context(|| format!("{}", model.display()))?;
            for r in &ladder.results {
                let exact = r.exact_text().map(|e| format!(" exact={e}")).unwrap_or_default();
                println!(
                    "g={} value={:.6}{exact} method={} states={} iterations={} time={:.3}s",
                    r.granularity,
                    r.value,
                    r.method,
                    r.states,
                    r.iterations,
                    r.wall_time.as_secs_f64()
                );
            }
            for (a, b) in &ladder.violations {
                eprintln!("warning: value is not monotone from g={a} to g={b}");
            }
        }
        Command::ExportPrism { model, out } => {
            let m = load_model(&model)?;
            let text = export_prism(&m).with_context(|| format!("{}", model.display()))?;
            write_atomic(&out, &text)?;
        }
        Command::ParsePrism { input, out } => {
            let m = parse_prism(&read(&input)?).with_context(|| format!("{}", input.display()))?;
            write_atomic(&out, &(m.to_json() + "\n"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
