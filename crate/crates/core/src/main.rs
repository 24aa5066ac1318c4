use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commons_mrac::output::{read_trajectory, write_regime_map, write_trajectory};
use commons_mrac::plot::{regime_map_svg, trajectory_svg};
use commons_mrac::report::{roa_report, summarize};
use commons_mrac::scenario::{Preset, ScenarioConfig};
use commons_mrac::sim::{integrate, linspace, sweep_phase_plane};
use commons_mrac::Error;

#[derive(Parser)]
#[command(
    name = "commons-mrac",
    version,
    about = "Adaptive inspection control of a common-pool resource game"
)]
struct Cli {
    /// Accepted for compatibility; every run is deterministic.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Classify terminal regimes over an (r, p_hat*beta) grid.
    Sweep(SweepArgs),
    /// Print the Lyapunov gains and the region-of-attraction estimate.
    Roa(RoaArgs),
    /// Render a trajectory CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Source {
    /// Built-in scenario: example1, example2 or example3.
    #[arg(long, conflicts_with = "config", value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self, required: bool) -> Result<Option<ScenarioConfig>, Failure> {
        match (&self.preset, &self.config) {
            (Some(p), _) => Ok(Some(p.config())),
            (None, Some(path)) => Ok(Some(ScenarioConfig::load(path)?)),
            (None, None) if required => Err(Failure::Usage(
                "one of --preset or --config is required".into(),
            )),
            (None, None) => Ok(None),
        }
    }
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::from_name(s)
        .ok_or_else(|| format!("unknown preset {s:?} (expected example1, example2 or example3)"))
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Project p_hat onto [0, 1] during adaptation.
    #[arg(long)]
    clamp_p: bool,
    /// Write every n-th integration step.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base parameters (defaults to example1).
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "regime_map.csv")]
    out: PathBuf,
    /// Also write a heat map.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    r_max: f64,
    #[arg(long, default_value_t = 36)]
    r_points: usize,
    #[arg(long, default_value_t = 0.0)]
    pbeta_min: f64,
    #[arg(long, default_value_t = 0.15)]
    pbeta_max: f64,
    #[arg(long, default_value_t = 31)]
    pbeta_points: usize,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 5000.0)]
    horizon: f64,
}

#[derive(Args)]
struct RoaArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory CSV written by `simulate`.
    input: PathBuf,
    /// SVG path (defaults to the input with an .svg extension).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut cfg = args.source.load(true)?.expect("required");
    if let Some(step) = args.step {
        cfg.integrator.step = step;
    }
    if let Some(h) = args.horizon {
        cfg.integrator.horizon = h;
    }
    if args.clamp_p {
        cfg.controller.clamp_p = true;
    }
    if let Some(s) = args.stride {
        cfg.output.sample_stride = s;
    }
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.trajectory.clone())
        .unwrap_or_else(|| {
            PathBuf::from(format!(
                "{}.csv",
                if cfg.name.is_empty() {
                    "trajectory"
                } else {
                    &cfg.name
                }
            ))
        });
    let mut writer = create(&out)?;
    let traj = integrate(
        &cfg.params,
        &cfg.effective_schedule()?,
        &cfg.initial,
        &cfg.controller.spec(),
        &cfg.settings(),
    )?;
    write_trajectory(&mut writer, &traj.samples)?;
    writer.flush().map_err(Error::from)?;
    print!("{}", summarize(&cfg, &traj)?);
    println!("trajectory written to {}", out.display());
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let base = args
        .source
        .load(false)?
        .unwrap_or_else(|| Preset::Example1.config());
    if args.r_points == 0 || args.pbeta_points == 0 {
        return Err(Failure::Usage("grid sizes must be at least 1".into()));
    }
    let r_grid = linspace(args.r_min, args.r_max, args.r_points);
    let pb_grid = linspace(args.pbeta_min, args.pbeta_max, args.pbeta_points);
    let mut writer = create(&args.out)?;
    let mut svg_writer = args.svg.as_deref().map(create).transpose()?;
    let map = sweep_phase_plane(&base.params, &r_grid, &pb_grid, args.horizon, args.step)?;
    write_regime_map(&mut writer, &map)?;
    writer.flush().map_err(Error::from)?;
    if let Some(w) = svg_writer.as_mut() {
        w.write_all(regime_map_svg(&map).as_bytes())
            .map_err(Error::from)?;
        w.flush().map_err(Error::from)?;
    }
    let mut counts = std::collections::BTreeMap::new();
    for (_, _, label) in map.cells() {
        *counts.entry(label.as_str()).or_insert(0usize) += 1;
    }
    println!(
        "{} cells written to {}",
        r_grid.len() * pb_grid.len(),
        args.out.display()
    );
    for (label, n) in counts {
        println!("  {label}: {n}");
    }
    Ok(())
}

fn roa(args: &RoaArgs) -> Result<(), Failure> {
    let mut cfg = args.source.load(true)?.expect("required");
    if let Some(eps) = args.epsilon {
        cfg.controller.epsilon = eps;
    }
    if let Some(b) = args.b {
        cfg.controller.b = b;
    }
    cfg.validate()?;
    let gains = cfg.controller.spec().resolve_gains(&cfg.params)?;
    print!("{}", roa_report(&cfg, gains)?);
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<(), Failure> {
    let input = File::open(&args.input)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.input.display())))?;
    let samples = read_trajectory(BufReader::new(input))?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.input.with_extension("svg"));
    let mut w = create(&out)?;
    w.write_all(trajectory_svg(&samples).as_bytes())
        .map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    println!("plot written to {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Roa(a) => roa(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
