use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use stockshare::io::{self as sio, ConfigError, HeatmapChannel, ScenarioConfig};
use stockshare::metrics::{ScenarioSummary, SummaryOptions};
use stockshare::model;
use stockshare::sweep::{self, SweepAxis, SweepResult};

/// Two-community epidemic and PPE stock-sharing simulator.
#[derive(Parser)]
#[command(name = "stockshare", version, about)]
struct Cli {
    /// Increase log detail (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario configuration file (defaults apply when omitted).
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable, later values win.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write timeseries.csv, summary.json and config.ini.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
    /// Run a two-parameter grid and write phase.csv.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
        /// Horizontal axis as parameter:min:max:steps.
        #[arg(long, value_name = "SPEC")]
        axis_x: String,
        /// Vertical axis as parameter:min:max:steps.
        #[arg(long, value_name = "SPEC")]
        axis_y: String,
        /// Worker threads (defaults to the available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write one SVG heatmap per channel.
        #[arg(long)]
        svg: bool,
    },
    /// Render SVG heatmaps from an existing phase.csv.
    Render {
        #[arg(short, long, value_name = "FILE")]
        input: PathBuf,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
        /// infected_ratio_mean, outcome or unserved_mean (default: all).
        #[arg(long)]
        channel: Option<String>,
    },
    /// Resolve a configuration and print it without running anything.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

enum Failure {
    Config(anyhow::Error),
    Integration(anyhow::Error),
    Output(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Output(_) => 1,
            Failure::Config(_) => 2,
            Failure::Integration(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Integration(e) | Failure::Output(e) => e,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Output(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Output(e)
    }
}

fn config_failure(e: ConfigError) -> Failure {
    Failure::Config(anyhow::anyhow!(e))
}

fn load(args: &ConfigArgs) -> Result<ScenarioConfig, Failure> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(Failure::Config)?,
        None => String::new(),
    };
    sio::load_config_with_overrides(&text, &args.set).map_err(config_failure)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_echo(dir: &Path, cfg: &ScenarioConfig) -> Result<(), Failure> {
    let mut w = create(dir, "config.ini")?;
    w.write_all(sio::echo_config(cfg).as_bytes())?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationReport {
    #[serde(flatten)]
    summary: ScenarioSummary,
    samples: usize,
    failure: Option<String>,
}

fn simulate(cfg: &ConfigArgs, output: &Path) -> Result<(), Failure> {
    let config = load(cfg)?;
    let settings = config.integrator_settings();
    log::info!("integrating t = {} .. {}", settings.t_start, settings.t_end);
    let run = model::simulate(&config.scenario, &settings).map_err(|e| Failure::Config(e.into()))?;
    let traj = &run.trajectory;
    log::info!(
        "{} accepted / {} rejected steps, {} samples",
        traj.stats.accepted,
        traj.stats.rejected,
        traj.len()
    );

    write_echo(output, &config)?;
    let mut w = create(output, "timeseries.csv")?;
    sio::write_timeseries_csv(traj, &mut w)?;
    w.flush()?;

    let report = SimulationReport {
        summary: ScenarioSummary::from_trajectory(traj, &SummaryOptions::default()),
        samples: traj.len(),
        failure: run.failure.as_ref().map(|e| e.to_string()),
    };
    let mut w = create(output, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &report).context("cannot serialize summary")?;
    writeln!(w)?;
    w.flush()?;

    if !report.summary.complete && run.failure.is_none() {
        log::warn!("an epidemic is still active at the end of the horizon");
    }
    println!("outcome: {}", report.summary.outcome);
    match run.failure {
        Some(e) => Err(Failure::Integration(e.into())),
        None => Ok(()),
    }
}

fn write_heatmaps(res: &SweepResult, output: &Path, channels: &[HeatmapChannel]) -> Result<(), Failure> {
    for &ch in channels {
        let mut w = create(output, &format!("heatmap_{}.svg", ch.as_str()))?;
        sio::render_heatmap_svg(res, ch, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn run_sweep(cfg: &ConfigArgs, output: &Path, axis_x: &str, axis_y: &str, workers: Option<usize>, svg: bool) -> Result<(), Failure> {
    let config = load(cfg)?;
    let ax: SweepAxis = axis_x.parse().map_err(|e: sweep::SweepError| Failure::Config(anyhow::anyhow!(e)))?;
    let ay: SweepAxis = axis_y.parse().map_err(|e: sweep::SweepError| Failure::Config(anyhow::anyhow!(e)))?;
    let workers = workers
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1);
    log::info!("sweeping {ax} x {ay} on {workers} workers");
    let res = sweep::run_sweep(&config, &ax, &ay, workers).map_err(|e| Failure::Config(e.into()))?;

    write_echo(output, &config)?;
    let mut w = create(output, "phase.csv")?;
    sio::write_phase_csv(&res, &mut w)?;
    w.flush()?;
    if svg {
        write_heatmaps(&res, output, &HeatmapChannel::ALL)?;
    }

    let failed = res.failures();
    println!(
        "RED {}  WHITE_A {}  WHITE_B {}  BLUE {}",
        res.count(stockshare::metrics::OutcomeClass::Red),
        res.count(stockshare::metrics::OutcomeClass::WhiteA),
        res.count(stockshare::metrics::OutcomeClass::WhiteB),
        res.count(stockshare::metrics::OutcomeClass::Blue)
    );
    if failed > 0 {
        return Err(Failure::Integration(anyhow::anyhow!("{failed} cell(s) failed to integrate")));
    }
    Ok(())
}

fn render(input: &Path, output: &Path, channel: Option<&str>) -> Result<(), Failure> {
    let channels = match channel {
        Some(c) => vec![c.parse::<HeatmapChannel>().map_err(|e| Failure::Config(anyhow::anyhow!(e)))?],
        None => HeatmapChannel::ALL.to_vec(),
    };
    let f = File::open(input)
        .with_context(|| format!("cannot read {}", input.display()))
        .map_err(Failure::Config)?;
    let res = sio::read_phase_csv(BufReader::new(f))
        .with_context(|| format!("cannot parse {}", input.display()))
        .map_err(Failure::Config)?;
    write_heatmaps(&res, output, &channels)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Simulate { cfg, output } => simulate(cfg, output),
        Command::Sweep {
            cfg,
            output,
            axis_x,
            axis_y,
            workers,
            svg,
        } => run_sweep(cfg, output, axis_x, axis_y, *workers, *svg),
        Command::Render { input, output, channel } => render(input, output, channel.as_deref()),
        Command::Validate { cfg } => load(cfg).map(|c| print!("{}", sio::echo_config(&c))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
