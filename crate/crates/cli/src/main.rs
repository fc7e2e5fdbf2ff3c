//! `drivestyle`: batch command-line frontend.
//!
//! Exit codes: 0 ok, 1 usage, 2 numeric failure, 3 validation or input
//! failure. Failures print `{"category": ..., "message": ...}` on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use drivestyle_analysis::mdsi::{refined_factor_scores, ItemResponses, LoadingConfig, DEFAULT_RIDGE};
use drivestyle_analysis::request::{self, Analysis, AnalysisSpec};
use drivestyle_analysis::study::{self, StudyInputs};
use drivestyle_core::metrics::{estimate_ccg, gg_percentiles, CcgEstimate, DEFAULT_K_MIN};
use drivestyle_core::pathfollow::SimConfig;
use drivestyle_core::quantile::Level;
use drivestyle_core::road::{generate_track, TrackModel, TrackSpec, DEFAULT_LANE_WIDTH};
use drivestyle_core::scenario::{self, study_script, Driver, SimLog, TrafficScript, Weather};
use drivestyle_core::styles::{builtin_style, ReplayTrace, StyleParams};

struct Failure {
    category: &'static str,
    message: String,
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self.category {
            "usage" => 1,
            "numeric" => 2,
            _ => 3,
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Failure {
            category: "usage",
            message: message.into(),
        }
    }
}

impl From<drivestyle_core::Error> for Failure {
    fn from(e: drivestyle_core::Error) -> Self {
        Failure {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

impl From<drivestyle_analysis::Error> for Failure {
    fn from(e: drivestyle_analysis::Error) -> Self {
        Failure {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            category: "io",
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "drivestyle", version, about = "Reactive driving-style simulation and study analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random rural road.
    GenTrack(GenTrackArgs),
    /// Place the four-truck oncoming traffic layout on a track.
    GenScenario(GenScenarioArgs),
    /// Drive a track with a style or a recorded trace.
    Simulate(SimulateArgs),
    /// Recover curve cutting and GG indicators from a log.
    Estimate(EstimateArgs),
    /// MDSI questionnaire scoring.
    Mdsi {
        #[command(subcommand)]
        command: MdsiCommand,
    },
    /// Run one statistical analysis on the study tables.
    Analyze(AnalyzeArgs),
    /// Reproduce the study's dataset figures.
    Study {
        #[command(subcommand)]
        command: StudyCommand,
    },
}

#[derive(Args)]
struct GenTrackArgs {
    #[arg(long, default_value_t = 5000.0)]
    length: f64,
    #[arg(long, default_value_t = 30)]
    curves: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 80.0)]
    radius_min: f64,
    #[arg(long, default_value_t = 400.0)]
    radius_max: f64,
    #[arg(long, default_value_t = DEFAULT_LANE_WIDTH)]
    lane_width: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenScenarioArgs {
    #[arg(long)]
    track: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LANE_WIDTH)]
    lane_width: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, required_unless_present = "batch")]
    track: Option<PathBuf>,
    /// Builtin style name or a style TOML file.
    #[arg(long, conflicts_with_all = ["replay", "batch"])]
    style: Option<String>,
    /// Replay trace CSV, or a log whose targets are replayed.
    #[arg(long, conflicts_with = "batch")]
    replay: Option<PathBuf>,
    /// Acceleration envelope for replay runs.
    #[arg(long, default_value = "sportive")]
    limits: String,
    #[arg(long)]
    traffic: Option<PathBuf>,
    #[arg(long, default_value = "dry")]
    weather: String,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 22.2)]
    vtarget: f64,
    #[arg(long, default_value_t = DEFAULT_LANE_WIDTH)]
    lane_width: f64,
    #[arg(long, required_unless_present = "batch")]
    out: Option<PathBuf>,
    /// TOML file listing independent runs, executed in parallel.
    #[arg(long)]
    batch: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K_MIN)]
    kmin: f64,
    /// `15`, `mean` or `85` (any percentile in 0..=100).
    #[arg(long, default_value = "mean")]
    percentile: String,
    /// Keep samples taken while oncoming traffic is in preview.
    #[arg(long)]
    include_traffic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MdsiCommand {
    /// Regression-method factor scores and style classes.
    Score {
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        loadings: PathBuf,
        /// Headerless item correlation matrix used instead of the sample's.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RIDGE)]
        ridge: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    /// wilcoxon, mann-whitney, friedman, conover, paired-t, welch-t, yuen,
    /// partial-pearson, hierarchical, descriptives or confusion.
    test: String,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum StudyCommand {
    Reproduce {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(Failure::usage(e.to_string().trim_end())),
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    let line = serde_json::json!({ "category": f.category, "message": f.message });
    eprintln!("{line}");
    ExitCode::from(f.exit_code())
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::GenTrack(a) => gen_track(a),
        Command::GenScenario(a) => {
            let track = TrackModel::load(&a.track, a.lane_width)?;
            study_script(&track)?.save(&a.out)?;
            Ok(())
        }
        Command::Simulate(a) => match &a.batch {
            Some(batch) => simulate_batch(batch),
            None => simulate_one(&a),
        },
        Command::Estimate(a) => estimate(a),
        Command::Mdsi {
            command:
                MdsiCommand::Score {
                    items,
                    loadings,
                    reference,
                    ridge,
                    out,
                },
        } => {
            let mut cfg = LoadingConfig::load(&loadings)?;
            if let Some(r) = reference {
                cfg = cfg.with_reference_correlation(fs::File::open(r)?)?;
            }
            let resp = ItemResponses::load(&items)?.with_reverse_coded(cfg.reverse_coded.clone())?;
            refined_factor_scores(&resp, &cfg, ridge)?.save(&out)?;
            Ok(())
        }
        Command::Analyze(a) => analyze(a),
        Command::Study {
            command: StudyCommand::Reproduce { data, out },
        } => {
            let inputs = StudyInputs::load(&data)?;
            let report = study::reproduce(&inputs);
            fs::create_dir_all(&out)?;
            write_json(&out.join("study_report.json"), &report)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure {
        category: "format",
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn gen_track(a: GenTrackArgs) -> CliResult {
    let track = generate_track(&TrackSpec {
        length_m: a.length,
        n_curves: a.curves,
        radius_range: (a.radius_min, a.radius_max),
        seed: a.seed,
        lane_width: a.lane_width,
    })?;
    track.save(&a.out)?;
    Ok(())
}

fn load_style(name: &str) -> CliResult<StyleParams> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "toml") {
        Ok(StyleParams::load(path)?)
    } else {
        Ok(builtin_style(name)?)
    }
}

/// A replay source: a trace file, or a log whose targets become the trace.
fn load_trace(path: &Path) -> CliResult<ReplayTrace> {
    match ReplayTrace::load(path) {
        Ok(t) => Ok(t),
        Err(trace_err) => match SimLog::load(path) {
            Ok(log) => Ok(log.to_replay_trace()?),
            Err(_) => Err(trace_err.into()),
        },
    }
}

struct RunSpec<'a> {
    track: &'a Path,
    lane_width: f64,
    style: Option<&'a str>,
    replay: Option<&'a Path>,
    limits: &'a str,
    traffic: Option<&'a Path>,
    weather: &'a str,
    dt: f64,
    vtarget: f64,
    out: &'a Path,
}

fn execute(r: &RunSpec) -> CliResult {
    let track = TrackModel::load(r.track, r.lane_width)?;
    let script = match r.traffic {
        Some(p) => TrafficScript::load(p)?,
        None => TrafficScript::empty(),
    };
    let weather: Weather = r.weather.parse()?;
    let cfg = SimConfig {
        dt: r.dt,
        v_target: r.vtarget,
        ..SimConfig::default()
    };
    let log = match (r.style, r.replay) {
        (Some(name), None) => {
            let style = load_style(name)?;
            scenario::run(&track, Driver::Style(&style), &script, &cfg, weather)?
        }
        (None, Some(path)) => {
            let trace = load_trace(path)?;
            let limits = load_style(r.limits)?;
            scenario::run(
                &track,
                Driver::Replay {
                    trace: &trace,
                    limits: &limits,
                },
                &script,
                &cfg,
                weather,
            )?
        }
        _ => return Err(Failure::usage("give exactly one of --style or --replay")),
    };
    log.save(r.out)?;
    Ok(())
}

fn simulate_one(a: &SimulateArgs) -> CliResult {
    execute(&RunSpec {
        track: a.track.as_deref().expect("required by clap"),
        lane_width: a.lane_width,
        style: a.style.as_deref(),
        replay: a.replay.as_deref(),
        limits: &a.limits,
        traffic: a.traffic.as_deref(),
        weather: &a.weather,
        dt: a.dt,
        vtarget: a.vtarget,
        out: a.out.as_deref().expect("required by clap"),
    })
}

/// Batch file: shared defaults plus one `[[run]]` table per output.
/// Relative paths resolve against the batch file's directory.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchFile {
    track: PathBuf,
    traffic: Option<PathBuf>,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_vtarget")]
    vtarget: f64,
    #[serde(default = "default_lane_width")]
    lane_width: f64,
    run: Vec<BatchRun>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchRun {
    style: Option<String>,
    replay: Option<PathBuf>,
    #[serde(default = "default_limits")]
    limits: String,
    #[serde(default = "default_weather")]
    weather: String,
    traffic: Option<PathBuf>,
    out: PathBuf,
}

fn default_dt() -> f64 {
    0.01
}
fn default_vtarget() -> f64 {
    22.2
}
fn default_lane_width() -> f64 {
    DEFAULT_LANE_WIDTH
}
fn default_limits() -> String {
    "sportive".into()
}
fn default_weather() -> String {
    "dry".into()
}

fn simulate_batch(path: &Path) -> CliResult {
    let text = fs::read_to_string(path)?;
    let batch: BatchFile = toml::from_str(&text).map_err(|e| Failure {
        category: "format",
        message: format!("{}: {e}", path.display()),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| base.join(p);
    let outs: Vec<PathBuf> = batch.run.iter().map(|r| resolve(&r.out)).collect();
    let mut unique = outs.clone();
    unique.sort();
    unique.dedup();
    if unique.len() != outs.len() {
        return Err(Failure {
            category: "validation",
            message: "batch runs must write distinct output files".into(),
        });
    }
    // runs execute concurrently, so none may read another's output
    for r in &batch.run {
        let inputs = [r.replay.as_ref(), r.traffic.as_ref().or(batch.traffic.as_ref()), Some(&batch.track)];
        if let Some(p) = inputs.into_iter().flatten().map(|p| resolve(p)).find(|p| outs.contains(p)) {
            return Err(Failure {
                category: "validation",
                message: format!("batch run reads {}, which another run writes", p.display()),
            });
        }
    }
    let track = resolve(&batch.track);
    let results: Vec<CliResult> = batch
        .run
        .par_iter()
        .zip(&outs)
        .map(|(r, out)| {
            let traffic = r.traffic.as_ref().or(batch.traffic.as_ref()).map(|p| resolve(p));
            let replay = r.replay.as_ref().map(|p| resolve(p));
            execute(&RunSpec {
                track: &track,
                lane_width: batch.lane_width,
                style: r.style.as_deref(),
                replay: replay.as_deref(),
                limits: &r.limits,
                traffic: traffic.as_deref(),
                weather: &r.weather,
                dt: batch.dt,
                vtarget: batch.vtarget,
                out,
            })
            .map_err(|f| Failure {
                message: format!("{}: {}", out.display(), f.message),
                ..f
            })
        })
        .collect();
    // report the first failure in file order
    results.into_iter().collect()
}

#[derive(Serialize)]
struct GgReport {
    level: String,
    ax_max: f64,
    ax_min: f64,
    ay_max: f64,
}

#[derive(Serialize)]
struct EstimateReport {
    style: String,
    rows: usize,
    k_min: f64,
    curve_cutting: CcgEstimate,
    /// Absent when the log never accelerates or never brakes.
    gg: Option<GgReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gg_skipped: Option<String>,
}

fn estimate(a: EstimateArgs) -> CliResult {
    let log = SimLog::load(&a.log)?;
    let level: Level = a.percentile.parse()?;
    let ccg = estimate_ccg(&log, a.kmin, !a.include_traffic)?;
    let (gg, gg_skipped) = match gg_percentiles(&log, level) {
        Ok(gg) => (
            Some(GgReport {
                level: level.to_string(),
                ax_max: gg.ax_max,
                ax_min: gg.ax_min,
                ay_max: gg.ay_max,
            }),
            None,
        ),
        Err(e @ drivestyle_core::Error::InsufficientData { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let report = EstimateReport {
        style: log.rows.first().map(|r| r.style.clone()).unwrap_or_default(),
        rows: log.len(),
        k_min: a.kmin,
        curve_cutting: ccg,
        gg,
        gg_skipped,
    };
    match a.out {
        Some(p) => write_json(&p, &report),
        None => {
            use std::io::Write;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            match writeln!(std::io::stdout(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let analysis: Analysis = a.test.parse()?;
    let spec = AnalysisSpec::from_toml(&fs::read_to_string(&a.spec)?)?;
    let inputs = StudyInputs::load(&a.data)?;
    let scores = match &inputs.loadings {
        Some(_) => Some(inputs.mdsi_scores()?),
        None => None,
    };
    let report = request::run(analysis, &spec, &inputs.tables, scores.as_ref())?;
    write_json(&a.out, &report)
}
