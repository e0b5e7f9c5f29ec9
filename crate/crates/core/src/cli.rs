//! The `cbb` command line.
//!
//! Settings come from flags, then `CBB_SEED` for the seed, then an optional
//! TOML file given with `--config`, then built-in defaults. Every command
//! writes the settings it actually used to `resolved_config.toml` in its
//! output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{atomic_write, create_dir};
use crate::metrics::{
    default_tau_grid, dynamics, evaluate, fit_tau, parse_tau_grid, sort_epoch_dirs, DynamicsTable,
    EvalReport, HumanData,
};
use crate::observers::{external_mask_name, observe_battery, ObserverSpec};
use crate::report::write_report;
use crate::trials::{
    build_battery, build_training_set, Battery, BatteryConfig, DatasetConfig, GenRanges, Which,
    DEFAULT_REL_AREA, DEFAULT_RESOLUTION,
};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Debug, Parser)]
#[command(name = "cbb", version, about = "Polygon change-detection harness for coarse-body observers")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a training set of polygon images and masks.
    GenTrain(GenTrainArgs),
    /// Generate an evaluation battery of before/after trial pairs.
    GenTrials(GenTrialsArgs),
    /// Run an observer over a battery and write its masks.
    Observe(ObserveArgs),
    /// Score observer masks against a battery.
    Eval(EvalArgs),
    /// Fit the detection threshold to human accuracies.
    FitTau(FitTauArgs),
    /// Mean RAC per condition across epoch mask directories.
    Dynamics(DynamicsArgs),
    /// Render plots and a markdown summary from an evaluation.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, env = "CBB_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resolution: Option<u32>,
    /// Vertex count range, e.g. `5..12` or `8`.
    #[arg(long)]
    pub vertices: Option<String>,
    /// Concavity count range, e.g. `0..3`.
    #[arg(long)]
    pub concavities: Option<String>,
    /// Irregularity range, e.g. `0..0.6`.
    #[arg(long)]
    pub irregularity: Option<String>,
    /// Spikiness range, e.g. `0..0.5`.
    #[arg(long)]
    pub spikiness: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenTrainArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Number of images.
    #[arg(long)]
    pub n: Option<u32>,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Args)]
pub struct GenTrialsArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Trials per condition.
    #[arg(long)]
    pub n: Option<u32>,
    /// Edit area as a fraction of the object area.
    #[arg(long)]
    pub rel_area: Option<f64>,
    /// Leave out no-change trials.
    #[arg(long)]
    pub no_nochange: bool,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Args)]
pub struct ObserveArgs {
    #[arg(long)]
    pub battery: PathBuf,
    /// exact | hull | closing:<r> | external:<dir>
    #[arg(long)]
    pub observer: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub battery: PathBuf,
    /// Mask directory to score; same as `--observer external:<dir>`.
    #[arg(long, conflicts_with = "observer")]
    pub masks: Option<PathBuf>,
    #[arg(long)]
    pub observer: Option<String>,
    /// Comma-separated percentages, or `default`.
    #[arg(long)]
    pub tau_grid: Option<String>,
    #[arg(long)]
    pub human_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitTauArgs {
    /// Evaluation report file or directory.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub human_csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub battery: PathBuf,
    /// Epoch mask directories, in any order.
    #[arg(long, num_args = 1.., conflicts_with = "epochs_root")]
    pub epochs: Vec<PathBuf>,
    /// Directory whose numbered subdirectories are the epochs.
    #[arg(long)]
    pub epochs_root: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation report file or directory.
    #[arg(long)]
    pub report: PathBuf,
    /// Dynamics table file or directory.
    #[arg(long)]
    pub dynamics: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub resolution: Option<u32>,
    pub n: Option<u32>,
    pub rel_area: Option<f64>,
    pub include_nochange: Option<bool>,
    pub observer: Option<String>,
    pub tau_grid: Option<String>,
    pub human_csv: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub vertices: Option<String>,
    pub concavities: Option<String>,
    pub irregularity: Option<String>,
    pub spikiness: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Serialize)]
struct Resolved<'a, T: Serialize> {
    command: &'a str,
    jobs: usize,
    #[serde(flatten)]
    settings: T,
}

fn write_resolved<T: Serialize>(dir: &Path, command: &str, jobs: usize, settings: T) -> Result<()> {
    let text = toml::to_string(&Resolved {
        command,
        jobs,
        settings,
    })
    .map_err(|e| Error::Invalid(format!("serializing resolved config: {e}")))?;
    atomic_write(&dir.join(RESOLVED_CONFIG_FILE), text.as_bytes())
}

fn parse_range<T>(name: &str, s: &str) -> Result<(T, T)>
where
    T: std::str::FromStr + Copy,
{
    let bad = || Error::Invalid(format!("--{name}: expected `lo..hi` or a single value, got {s:?}"));
    let one = |t: &str| t.trim().parse::<T>().map_err(|_| bad());
    match s.split_once("..") {
        Some((lo, hi)) => Ok((one(lo)?, one(hi.trim_start_matches('='))?)),
        None => {
            let v = one(s)?;
            Ok((v, v))
        }
    }
}

fn gen_ranges(args: &GenArgs, file: &FileConfig) -> Result<GenRanges> {
    let mut r = GenRanges::default();
    if let Some(s) = args.vertices.as_ref().or(file.vertices.as_ref()) {
        r.n_vertices = parse_range("vertices", s)?;
    }
    if let Some(s) = args.concavities.as_ref().or(file.concavities.as_ref()) {
        r.n_concavities = parse_range("concavities", s)?;
    }
    if let Some(s) = args.irregularity.as_ref().or(file.irregularity.as_ref()) {
        r.irregularity = parse_range("irregularity", s)?;
    }
    if let Some(s) = args.spikiness.as_ref().or(file.spikiness.as_ref()) {
        r.spikiness = parse_range("spikiness", s)?;
    }
    r.validate()?;
    Ok(r)
}

fn observer_spec(flag: Option<&String>, file: &FileConfig) -> Result<ObserverSpec> {
    let s = flag
        .or(file.observer.as_ref())
        .ok_or_else(|| Error::Invalid("an observer is required (--observer)".into()))?;
    let spec: ObserverSpec = s.parse()?;
    spec.validate()?;
    Ok(spec)
}

fn load_battery(path: &Path) -> Result<Battery> {
    Battery::load(path)
}

/// Every external mask the battery needs, reported together.
fn check_external_masks(battery: &Battery, spec: &ObserverSpec) -> Result<()> {
    let ObserverSpec::External { mask_dir } = spec else {
        return Ok(());
    };
    let missing: Vec<PathBuf> = battery
        .trials
        .iter()
        .flat_map(|t| Which::BOTH.map(|w| mask_dir.join(external_mask_name(&t.id, w))))
        .filter(|p| !p.is_file())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingFiles(missing))
    }
}

fn epoch_dirs(args: &DynamicsArgs) -> Result<Vec<PathBuf>> {
    let dirs = match &args.epochs_root {
        Some(root) => {
            let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
            let mut dirs = Vec::new();
            for entry in entries {
                let path = entry.map_err(|e| Error::io(root, e))?.path();
                if path.is_dir() {
                    dirs.push(path);
                }
            }
            if dirs.is_empty() {
                return Err(Error::Invalid(format!("{} has no epoch directories", root.display())));
            }
            dirs
        }
        None => args.epochs.clone(),
    };
    if dirs.is_empty() {
        return Err(Error::Invalid("give --epochs or --epochs-root".into()));
    }
    for d in &dirs {
        if !d.is_dir() {
            return Err(Error::io(
                d,
                std::io::Error::new(std::io::ErrorKind::NotFound, "epoch directory not found"),
            ));
        }
    }
    sort_epoch_dirs(dirs)
}

fn run_command(cmd: &Command, file: &FileConfig, jobs: usize) -> Result<()> {
    match cmd {
        Command::GenTrain(a) => {
            let config = DatasetConfig {
                n_images: a.n.or(file.n).unwrap_or(1000),
                resolution: a.gen.resolution.or(file.resolution).unwrap_or(DEFAULT_RESOLUTION),
                seed: a.gen.seed.or(file.seed).unwrap_or(0),
                gen_ranges: gen_ranges(&a.gen, file)?,
            };
            config.validate()?;
            create_dir(&a.out)?;
            write_resolved(&a.out, "gen-train", jobs, config)?;
            let set = build_training_set(&config, &a.out)?;
            println!("wrote {} training images to {}", set.rows.len(), a.out.display());
        }
        Command::GenTrials(a) => {
            let config = BatteryConfig {
                n_per_condition: a.n.or(file.n).unwrap_or(10),
                rel_area: a.rel_area.or(file.rel_area).unwrap_or(DEFAULT_REL_AREA),
                resolution: a.gen.resolution.or(file.resolution).unwrap_or(DEFAULT_RESOLUTION),
                include_nochange: !a.no_nochange && file.include_nochange.unwrap_or(true),
                seed: a.gen.seed.or(file.seed).unwrap_or(0),
                gen_ranges: gen_ranges(&a.gen, file)?,
            };
            config.validate()?;
            create_dir(&a.out)?;
            write_resolved(&a.out, "gen-trials", jobs, config)?;
            let b = build_battery(&config, &a.out)?;
            println!("wrote {} trials ({}) to {}", b.trials.len(), b.header.battery_id, a.out.display());
        }
        Command::Observe(a) => {
            let spec = observer_spec(a.observer.as_ref(), file)?;
            let battery = load_battery(&a.battery)?;
            check_external_masks(&battery, &spec)?;
            observe_battery(&spec, &battery, &a.out)?;
            #[derive(Serialize)]
            struct S<'a> {
                battery: &'a Path,
                observer: String,
            }
            write_resolved(
                &a.out,
                "observe",
                jobs,
                S {
                    battery: &a.battery,
                    observer: spec.to_string(),
                },
            )?;
            println!("wrote {} masks to {}", 2 * battery.trials.len(), a.out.display());
        }
        Command::Eval(a) => {
            let spec = match &a.masks {
                Some(dir) => {
                    let spec = ObserverSpec::External { mask_dir: dir.clone() };
                    spec.validate()?;
                    spec
                }
                None => observer_spec(a.observer.as_ref(), file)?,
            };
            let grid = match a.tau_grid.as_ref().or(file.tau_grid.as_ref()) {
                Some(s) => parse_tau_grid(s)?,
                None => default_tau_grid(),
            };
            let human_path = a.human_csv.as_ref().or(file.human_csv.as_ref());
            let human = human_path.map(|p| HumanData::read_csv(p)).transpose()?;
            let battery = load_battery(&a.battery)?;
            check_external_masks(&battery, &spec)?;
            let report = evaluate(&battery, &spec, &grid, human.as_ref())?;
            report.write(&a.out)?;
            #[derive(Serialize)]
            struct S<'a> {
                battery: &'a Path,
                observer: String,
                tau_grid: &'a [f64],
                human_csv: Option<&'a PathBuf>,
            }
            write_resolved(
                &a.out,
                "eval",
                jobs,
                S {
                    battery: &a.battery,
                    observer: spec.to_string(),
                    tau_grid: &grid,
                    human_csv: human_path,
                },
            )?;
            for (c, s) in &report.stats {
                println!("{c}: n={} mean RAC {:.4} median {:.4}", s.n, s.mean_rac, s.median_rac);
            }
            if let Some(fit) = report.fit {
                println!("tau* = {}% (rmse {:.6})", fit.tau_star, fit.rmse);
            }
        }
        Command::FitTau(a) => {
            let report = EvalReport::load(&a.report)?;
            let human_path = a
                .human_csv
                .as_ref()
                .or(file.human_csv.as_ref())
                .ok_or_else(|| Error::Invalid("--human-csv is required".into()))?;
            let human = HumanData::read_csv(human_path)?;
            let fit = fit_tau(&report.curve, &human)?;
            let mut json = serde_json::to_vec_pretty(&fit)
                .map_err(|e| Error::Invalid(format!("serializing fit: {e}")))?;
            json.push(b'\n');
            if let Some(out) = &a.out {
                create_dir(out)?;
                atomic_write(&out.join("tau_fit.json"), &json)?;
                #[derive(Serialize)]
                struct S<'a> {
                    report: &'a Path,
                    human_csv: &'a Path,
                }
                write_resolved(
                    out,
                    "fit-tau",
                    jobs,
                    S {
                        report: &a.report,
                        human_csv: human_path,
                    },
                )?;
            }
            println!("tau* = {}% (rmse {:.6})", fit.tau_star, fit.rmse);
        }
        Command::Dynamics(a) => {
            let dirs = epoch_dirs(a)?;
            let battery = load_battery(&a.battery)?;
            let table = dynamics(&dirs, &battery)?;
            table.write(&a.out)?;
            #[derive(Serialize)]
            struct S<'a> {
                battery: &'a Path,
                epochs: &'a [PathBuf],
            }
            write_resolved(
                &a.out,
                "dynamics",
                jobs,
                S {
                    battery: &a.battery,
                    epochs: &dirs,
                },
            )?;
            print!(
                "{}",
                String::from_utf8(table.to_csv()?).expect("CSV output is UTF-8")
            );
        }
        Command::Report(a) => {
            let report = EvalReport::load(&a.report)?;
            let table = a.dynamics.as_deref().map(DynamicsTable::load).transpose()?;
            write_report(&report, table.as_ref(), &a.out)?;
            #[derive(Serialize)]
            struct S<'a> {
                report: &'a Path,
                dynamics: Option<&'a PathBuf>,
            }
            write_resolved(
                &a.out,
                "report",
                jobs,
                S {
                    report: &a.report,
                    dynamics: a.dynamics.as_ref(),
                },
            )?;
            println!("wrote report to {}", a.out.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = cli
        .jobs
        .or(file.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Error::Invalid("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| run_command(&cli.command, &file, jobs))
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cbb: error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}
