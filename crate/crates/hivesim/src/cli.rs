//! Command line: `hivesim run | bench | replay`.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hive_core::localization::SlotTiming;
use serde_json::Value;

use crate::bench::{
    angle_bench, bandwidth_bench, distance_bench, latency_bench, refresh_table, seed_average, write_bandwidth,
    write_latency, write_refresh, write_samples, SweepResult,
};
use crate::channel::NoiseModel;
use crate::control::{parse_request, Request};
use crate::metrics::{MetricsFormat, MetricsWriter};
use crate::scenario::{load_scenario_file, Scenario, ScenarioError};
use crate::server::{serve, ServeOptions};
use crate::world::{World, WorldOptions, SCRIPT};

#[derive(Debug, Parser)]
#[command(
    name = "hivesim",
    version,
    about = "Multi-agent swarm simulator with a live control service"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run a scenario headless, or serve it live with --serve.
    Run(RunArgs),
    /// Run one of the measurement benches and emit its CSV.
    Bench(BenchArgs),
    /// Re-run a scenario and compare against a recorded metrics file.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop after this many ticks instead of the scenario duration.
    #[arg(long)]
    pub ticks: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Metrics output; `.jsonl` selects JSON lines, anything else CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Serve the WebSocket control protocol on this address.
    #[arg(long, value_name = "ADDR")]
    pub serve: Option<String>,
    /// Initial snapshot rate in serve mode.
    #[arg(long, default_value_t = 10.0)]
    pub snapshot_hz: f64,
    /// Simulated seconds per wall second in serve mode; 0 runs unpaced.
    #[arg(long, default_value_t = 1.0)]
    pub realtime: f64,
    /// Read line-delimited commands from stdin (headless only). A line may
    /// carry `"at_s"` to schedule it; replies go to stdout.
    #[arg(long)]
    pub stdin: bool,
    /// Print the world event log (sync, calls, collisions) to stderr.
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// The recorded metrics file to compare against.
    #[arg(long)]
    pub metrics: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Distance,
    Angle,
    Refresh,
    Bandwidth,
    Latency,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub kind: BenchKind,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Sweeps: number of seeds averaged, starting at 1.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Sweeps: run this single seed instead.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweeps: disable every noise source.
    #[arg(long)]
    pub noiseless: bool,
    /// Refresh: largest slot count in the table.
    #[arg(long, default_value_t = 32)]
    pub max_slots: usize,
    /// Bandwidth: number of agents.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Bandwidth: encoded frame size in bytes.
    #[arg(long, default_value_t = 100)]
    pub size: usize,
    /// Bandwidth: updates per second per agent.
    #[arg(long, default_value_t = 10.0)]
    pub hz: f64,
    /// Latency: offered rate in Hz; repeatable. Defaults to 50, 100, 150, 200.
    #[arg(long)]
    pub rate: Vec<f64>,
    /// Bandwidth and latency: simulated duration.
    #[arg(long, default_value_t = 10.0)]
    pub duration_s: f64,
}

/// Errors that map to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum Invalid {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("stdin line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("{0}")]
    Flag(String),
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Cmd::Run(args) => run(args).map(|()| ExitCode::SUCCESS),
        Cmd::Bench(args) => bench(args).map(|()| ExitCode::SUCCESS),
        Cmd::Replay(args) => replay(args),
    }
}

fn load(sim: &SimArgs) -> Result<(Scenario, u64), Invalid> {
    let mut s = load_scenario_file(&sim.scenario)?;
    if let Some(seed) = sim.seed {
        s.seed = seed;
    }
    let end = sim.ticks.unwrap_or_else(|| s.total_ticks());
    Ok((s, end))
}

/// A command scheduled by a stdin line.
#[derive(Debug, Clone, PartialEq)]
pub struct Scripted {
    pub tick: u64,
    pub request: Request,
}

/// Parses line-delimited commands. Lines without `at_s` apply at tick 0;
/// blank lines are skipped. The result is stable-sorted by tick.
pub fn parse_script(lines: impl BufRead, tick_s: f64) -> Result<Vec<Scripted>, Invalid> {
    let mut out = Vec::new();
    for (i, line) in lines.lines().enumerate() {
        let line_no = i + 1;
        let fail = |message: String| Invalid::Script { line: line_no, message };
        let line = line.map_err(|e| fail(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut v: Value = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        let at_s = match v.as_object_mut().and_then(|o| o.remove("at_s")) {
            None => 0.0,
            Some(at) => at
                .as_f64()
                .filter(|t| t.is_finite() && *t >= 0.0)
                .ok_or_else(|| fail("at_s must be a non-negative number".into()))?,
        };
        let request = parse_request(&v.to_string()).map_err(|f| fail(f.message))?;
        out.push(Scripted {
            tick: (at_s / tick_s).round() as u64,
            request,
        });
    }
    out.sort_by_key(|s| s.tick);
    Ok(out)
}

fn open_metrics(path: &Path) -> anyhow::Result<MetricsWriter<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(MetricsWriter::new(BufWriter::new(file), MetricsFormat::from_path(path)))
}

/// Runs a world to `end`, feeding scripted commands at their ticks and
/// writing every closed window to `metrics` and every reply to `replies`.
pub fn run_headless<M: Write>(
    world: &mut World,
    end: u64,
    script: Vec<Scripted>,
    metrics: &mut MetricsWriter<M>,
    replies: &mut impl Write,
) -> anyhow::Result<()> {
    let mut script = script.into_iter().peekable();
    while world.tick() < end {
        while let Some(s) = script.next_if(|s| s.tick <= world.tick()) {
            world.submit(SCRIPT, s.request);
        }
        for o in world.step() {
            writeln!(replies, "{}", o.reply.to_json())?;
        }
        if world.at_window_boundary() {
            metrics.write_row(&world.take_metrics_row())?;
        }
    }
    metrics.flush()?;
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let (scenario, end) = load(&args.sim)?;
    if !(args.snapshot_hz.is_finite() && args.snapshot_hz > 0.0) {
        return Err(Invalid::Flag("--snapshot-hz must be positive".into()).into());
    }
    if !(args.realtime.is_finite() && args.realtime >= 0.0) {
        return Err(Invalid::Flag("--realtime must be non-negative".into()).into());
    }
    if args.stdin && args.serve.is_some() {
        return Err(Invalid::Flag("--stdin is only available headless".into()).into());
    }
    let interactive = args.serve.is_some();
    let mut world = World::new(&scenario, WorldOptions { interactive }).map_err(Invalid::from)?;
    world.set_snapshot_hz(args.snapshot_hz);
    let mut metrics = args.metrics.as_deref().map(open_metrics).transpose()?;

    if let Some(addr) = &args.serve {
        let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        println!("listening on ws://{local}");
        io::stdout().flush()?;
        let opts = ServeOptions {
            realtime: args.realtime,
            end_tick: end,
        };
        let world = serve(listener, world, opts, |row| {
            if let Some(m) = metrics.as_mut() {
                m.write_row(row)?;
            }
            Ok(())
        })?;
        if let Some(m) = metrics.as_mut() {
            m.flush()?;
        }
        eprintln!(
            "finished at t = {:.3} s, {} collisions",
            world.sim_time_s(),
            world.collision_count()
        );
        return Ok(());
    }

    let script = if args.stdin {
        parse_script(io::stdin().lock(), scenario.tick_s)?
    } else {
        Vec::new()
    };
    let stdout = io::stdout();
    let mut replies = BufWriter::new(stdout.lock());
    match metrics.as_mut() {
        Some(m) => run_headless(&mut world, end, script, m, &mut replies)?,
        None => run_headless(
            &mut world,
            end,
            script,
            &mut MetricsWriter::new(io::sink(), MetricsFormat::Csv),
            &mut replies,
        )?,
    }
    replies.flush()?;
    if args.log {
        for e in world.log() {
            eprintln!("[{:.3}] {}", e.tick as f64 * world.tick_s(), e.text);
        }
    }
    eprintln!(
        "finished at t = {:.3} s, {} collisions",
        world.sim_time_s(),
        world.collision_count()
    );
    Ok(())
}

fn replay(args: ReplayArgs) -> anyhow::Result<ExitCode> {
    let (scenario, end) = load(&args.sim)?;
    let recorded = std::fs::read(&args.metrics).with_context(|| format!("reading {}", args.metrics.display()))?;
    let mut world = World::new(&scenario, WorldOptions { interactive: false }).map_err(Invalid::from)?;
    let mut fresh = MetricsWriter::new(Vec::new(), MetricsFormat::from_path(&args.metrics));
    run_headless(&mut world, end, Vec::new(), &mut fresh, &mut io::sink())?;
    let fresh = fresh.into_inner();
    if fresh == recorded {
        println!("identical: {} bytes", fresh.len());
        return Ok(ExitCode::SUCCESS);
    }
    let line = fresh
        .split(|&b| b == b'\n')
        .zip(recorded.split(|&b| b == b'\n'))
        .position(|(a, b)| a != b)
        .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
    println!("differs at {line}");
    Ok(ExitCode::FAILURE)
}

fn sweep(args: &BenchArgs, run: fn(u64, &NoiseModel) -> SweepResult) -> anyhow::Result<SweepResult> {
    let noise = if args.noiseless {
        NoiseModel::noiseless()
    } else {
        NoiseModel::default()
    };
    if args.seed.is_none() && args.seeds == 0 {
        bail!(Invalid::Flag("--seeds must be at least 1".into()));
    }
    Ok(match args.seed {
        Some(seed) => run(seed, &noise),
        None => seed_average(1..=args.seeds, |s| run(s, &noise)),
    })
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match args.kind {
        BenchKind::Distance => {
            let r = sweep(&args, distance_bench)?;
            write_samples(&mut out, &r.samples)?;
            eprintln!(
                "mean |error| {:.2} cm, pooled sigma {:.2} cm",
                r.mean_abs_error * 100.0,
                r.pooled_sigma * 100.0
            );
        }
        BenchKind::Angle => {
            let r = sweep(&args, angle_bench)?;
            write_samples(&mut out, &r.samples)?;
            eprintln!(
                "mean |error| {:.2} deg, pooled sigma {:.2} deg, worst step sigma {:.2} deg",
                r.mean_abs_error, r.pooled_sigma, r.max_step_sigma
            );
        }
        BenchKind::Refresh => {
            if args.max_slots < 2 {
                bail!(Invalid::Flag("--max-slots must be at least 2".into()));
            }
            let rows = refresh_table(args.max_slots, &SlotTiming::default());
            write_refresh(&mut out, &rows)?;
        }
        BenchKind::Bandwidth => {
            let r = bandwidth_bench(args.n, args.size, args.hz, args.duration_s).map_err(Invalid::Flag)?;
            write_bandwidth(&mut out, &r)?;
            if let Some(w) = r.windows.last() {
                eprintln!(
                    "measured {:.1} B/s, predicted {:.1} B/s",
                    w.measured_bps, w.predicted_bps
                );
            }
        }
        BenchKind::Latency => {
            let rates = if args.rate.is_empty() {
                vec![50.0, 100.0, 150.0, 200.0]
            } else {
                args.rate.clone()
            };
            let rows = rates
                .iter()
                .map(|&r| latency_bench(r, args.duration_s).map_err(Invalid::Flag))
                .collect::<Result<Vec<_>, _>>()?;
            write_latency(&mut out, &rows)?;
            for r in &rows {
                eprintln!(
                    "{:.0} Hz: loss {:.3}, mean latency {:.2} ms",
                    r.rate_hz, r.loss_fraction, r.mean_latency_ms
                );
            }
        }
    }
    out.flush()?;
    Ok(())
}
