use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polydepth::commands;
use polydepth::config::{RunConfig, Settings};
use polydepth::Error;

/// Exit status for invalid flags, config files or input paths.
const EXIT_CONFIG: u8 = 2;
/// Exit status for unreadable or invalid data.
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "polydepth", version, about = "Structured-polygon monocular 3D box recovery on KITTI-layout data")]
struct Cli {
    /// TOML file with defaults for any flag (same names, kebab-case).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write structured polygons per frame plus overlay data.
    Project(Settings),
    /// Recover coarse (and refined) boxes in KITTI result format.
    Recover(Settings),
    /// AP_BEV / AP_3D report against the dataset labels.
    Eval(Settings),
    /// Noise sweep with deviation histograms.
    Benchmark(Settings),
    /// Generate a synthetic KITTI-layout dataset.
    Synth(Settings),
    /// Export BEV grids (and 3D-ROIs of predictions).
    Bev(Settings),
}

fn run(cli: Cli) -> Result<(), Error> {
    let file = cli.config.as_deref().map(Settings::from_file).transpose()?;
    let (settings, command) = match cli.command {
        Command::Project(s) => (s, "project"),
        Command::Recover(s) => (s, "recover"),
        Command::Eval(s) => (s, "eval"),
        Command::Benchmark(s) => (s, "benchmark"),
        Command::Synth(s) => (s, "synth"),
        Command::Bev(s) => (s, "bev"),
    };
    let cfg = RunConfig::resolve(settings, file)?;
    match command {
        "project" => {
            let s = commands::project::run(&cfg)?;
            println!("{} polygons from {} frames ({} failed)", s.objects, s.frames, s.frames_failed);
        }
        "recover" => {
            let s = commands::recover::run(&cfg)?;
            println!(
                "{} boxes from {} frames ({} failed, {} objects skipped)",
                s.objects, s.frames, s.frames_failed, s.skipped_objects
            );
        }
        "eval" => print!("{}", commands::eval::run(&cfg)?.1),
        "benchmark" => print!("{}", commands::benchmark::run(&cfg)?.sweep_csv),
        "synth" => {
            commands::synth::run(&cfg)?;
            println!("wrote {} frames to {}", cfg.frames, cfg.out.display());
        }
        _ => {
            let s = commands::bev::run(&cfg)?;
            println!("{} grids ({} failed), {} ROIs", s.frames - s.frames_failed, s.frames_failed, s.objects);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_DATA })
        }
    }
}
