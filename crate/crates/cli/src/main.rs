// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: simulate, extract, train, match, evaluate, stream.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use trajlink::config::Config;
use trajlink::embedding::{load_model, save_model};
use trajlink::geometry::Frame;
use trajlink::harness::{
    apply_samples, base_bundle, emit_plots, evaluate_report, high_confidence, label_subtrajectories, match_batch,
    renumber, run_experiment, train_appearance, Appearance, ExperimentOutput, Extractor, GroundTruth, StreamLearner,
    TruthRecord, EXPERIMENTS,
};
use trajlink::io::{load_json, load_jsonl, save_json, save_jsonl, write_jsonl, JsonlReader};
use trajlink::matcher::{MatchResult, ModelBundle, OnlineMatcher, P1Mode};
use trajlink::simulator::{
    calibration_frames, corridor_map, corridor_traffic, scenario_1a, square_loop_map, MapSpec, ScenarioSpec,
    Simulation, TruthSample,
};
use trajlink::spatiotemporal::SpatiotemporalState;
use trajlink::tracker::SubTrajectory;

#[derive(Debug, Parser)]
#[command(name = "trajlink", version, about = "Link pedestrian tracks across non-overlapping LiDAR sensors")]
struct Cli {
    /// Random seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Appearance similarity.
    #[arg(long, global = true, value_enum)]
    p1: Option<P1Arg>,
    /// Learn spatial and temporal distributions from high-confidence transitions.
    #[arg(long, global = true, value_enum)]
    update: Option<Switch>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum P1Arg {
    Fv,
    Height,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write frames and ground truth.
    Simulate {
        /// `square`, `corridor` or a map JSON file.
        #[arg(long, default_value = "square")]
        map: String,
        /// Scenario JSON file; replaces the generated scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Walkers on the square loop (2, 4, 8, 16 or 32).
        #[arg(long, default_value_t = 4)]
        subjects: usize,
        /// Seconds between successive walkers on the square loop.
        #[arg(long, default_value_t = 10.0)]
        interval: f64,
        /// Corridor day.
        #[arg(long, default_value_t = 1)]
        day: u32,
        /// Corridor duration in seconds.
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
        /// Corridor arrivals per second.
        #[arg(long, default_value_t = 0.08)]
        rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn simulated frames into sub-trajectories.
    Extract {
        /// Directory written by `simulate`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write `{person_id, sub_trajectory_id}` records here.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Train the appearance embedding on simulated enrollment walks.
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Batch or windowed matching of a sub-trajectory file.
    Match {
        #[arg(long)]
        subs: PathBuf,
        /// `square`, `corridor` or a map JSON file.
        #[arg(long, default_value = "square")]
        map: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Use sliding windows instead of one global solve.
        #[arg(long)]
        online: bool,
        /// Learned spatial and temporal state to start from.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Write the spatial and temporal state after matching.
        #[arg(long)]
        save_state: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair-level precision, recall and F-measure.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        subs: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run a named experiment, or `all`.
    Experiment {
        name: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Write TSV plot data here.
        #[arg(long)]
        plots: Option<PathBuf>,
        /// Write the reports as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match sub-trajectory records read line by line; results go to stdout.
    Stream {
        /// JSONL input; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// `square`, `corridor` or a map JSON file.
        #[arg(long, default_value = "square")]
        map: String,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Stream seconds between distribution updates.
        #[arg(long, default_value_t = 60.0)]
        update_every: f64,
        /// Learned spatial and temporal state to start from.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Write the spatial and temporal state when the stream ends.
        #[arg(long)]
        save_state: Option<PathBuf>,
    },
}

/// Exit status 1 for usage problems, 2 for bad or missing data.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.p1 {
        cfg.matcher.p1 = match p {
            P1Arg::Fv => P1Mode::Fv,
            P1Arg::Height => P1Mode::Height,
        };
    }
    if let Some(u) = cli.update {
        cfg.update = Some(matches!(u, Switch::On));
    }
    Ok(cfg)
}

fn resolve_map(name: &str) -> CliResult<MapSpec> {
    match name {
        "square" => Ok(square_loop_map()),
        "corridor" => Ok(corridor_map()),
        path if Path::new(path).is_file() => {
            Ok(load_json(Path::new(path)).with_context(|| format!("reading map {path}"))?)
        }
        other => usage(format!("unknown map '{other}': use square, corridor or a map JSON file")),
    }
}

/// Stored model, freshly trained model, or none when similarity is by height.
fn resolve_appearance(cfg: &Config, model: Option<&Path>) -> CliResult<Option<Appearance>> {
    if let Some(p) = model {
        let (grid, net) = load_model(p).with_context(|| format!("reading model {}", p.display()))?;
        return Ok(Some(Appearance::from_model(grid, net)));
    }
    if cfg.matcher.p1 == P1Mode::Height {
        return Ok(None);
    }
    if !cfg.experiment.train_if_missing {
        return Err(anyhow::anyhow!("fv similarity needs --model or experiment.train_if_missing = true").into());
    }
    eprintln!("training appearance embedding");
    Ok(Some(train_appearance(cfg)?))
}

fn create_writer(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate { map, scenario, subjects, interval, day, duration, rate, out } => {
            let map_name = map;
            let map = resolve_map(&map_name)?;
            let scenario: ScenarioSpec = match scenario {
                Some(p) => load_json(&p).with_context(|| format!("reading scenario {}", p.display()))?,
                None if map_name == "corridor" => corridor_traffic(day, duration, rate, cfg.seed),
                None if map_name == "square" => match scenario_1a(subjects, interval, cfg.seed) {
                    Ok(s) => s,
                    Err(e) => return usage(e.to_string()),
                },
                None => return usage("a custom map needs --scenario"),
            };
            simulate(&map, &scenario, &cfg, &out)
        }
        Command::Extract { input, out, truth_out } => extract(&cfg, &input, &out, truth_out.as_deref()),
        Command::Train { out } => {
            let a = train_appearance(&cfg)?;
            save_model(&out, &a.grid, &a.net).with_context(|| format!("writing {}", out.display()))?;
            let summary = serde_json::json!({
                "training_samples": a.training_samples,
                "final_loss": a.report.final_loss,
                "held_out_auc": a.held_out_auc,
            });
            println!("{summary}");
            Ok(())
        }
        Command::Match { subs, map, model, online, state, save_state, out } => {
            let map = resolve_map(&map)?;
            let subs: Vec<SubTrajectory<f64>> =
                load_jsonl(&subs).with_context(|| format!("reading {}", subs.display()))?;
            let appearance = resolve_appearance(&cfg, model.as_deref())?;
            let mut bundle = base_bundle(&cfg, &map, appearance.as_ref(), cfg.matcher.p1)?;
            warm_start(&mut bundle, state.as_deref(), map.gate_count())?;
            if cfg.update == Some(true) {
                bundle = apply_samples(&bundle, &high_confidence(&subs, cfg.spatiotemporal.confidence_window));
            }
            if let Some(p) = save_state {
                save_state_file(&bundle, &p)?;
            }
            let results = if online {
                let mut ordered = subs;
                ordered.sort_by(|a, b| a.t_end.total_cmp(&b.t_end).then(a.id.cmp(&b.id)));
                trajlink::matcher::match_online(ordered, bundle, cfg.matcher.tau, cfg.matcher.window)?
            } else {
                match_batch(&subs, &bundle, cfg.matcher.tau)?
            };
            save_jsonl(&out, &results)?;
            Ok(())
        }
        Command::Eval { pred, subs, truth } => {
            let pred: Vec<MatchResult<f64>> =
                load_jsonl(&pred).with_context(|| format!("reading {}", pred.display()))?;
            let subs: Vec<SubTrajectory<f64>> =
                load_jsonl(&subs).with_context(|| format!("reading {}", subs.display()))?;
            let records: Vec<TruthRecord> =
                load_jsonl(&truth).with_context(|| format!("reading {}", truth.display()))?;
            let gt = GroundTruth::from_records(&subs, &records);
            let report = evaluate_report("eval", &pred, &gt, cfg.experiment.histogram_bins)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::Experiment { name, model, plots, out } => {
            let names: Vec<&str> = match name.as_str() {
                "all" => EXPERIMENTS.to_vec(),
                n if EXPERIMENTS.contains(&n) => vec![n],
                other => {
                    return usage(format!(
                        "unknown experiment '{other}': expected one of {} or all",
                        EXPERIMENTS.join(", ")
                    ))
                }
            };
            let needs_fv = cfg.matcher.p1 == P1Mode::Fv && names.iter().any(|n| *n != "corridor");
            let appearance = if needs_fv { resolve_appearance(&cfg, model.as_deref())? } else { None };
            let mut outputs: Vec<ExperimentOutput> = Vec::new();
            for n in names {
                let o = run_experiment(n, &cfg, appearance.as_ref())?;
                for r in &o.reports {
                    let auc = r.auc.map(|a| format!(" auc={a:.3}")).unwrap_or_default();
                    println!(
                        "{n}\t{}\tP={:.3} R={:.3} F={:.3}{auc}",
                        r.tag, r.scores.precision, r.scores.recall, r.scores.f_measure
                    );
                }
                outputs.push(o);
            }
            if let Some(dir) = plots {
                for p in emit_plots(&dir, &outputs)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            if let Some(p) = out {
                save_json(&p, &outputs)?;
            }
            Ok(())
        }
        Command::Stream { input, map, model, update_every, state, save_state } => {
            let map = resolve_map(&map)?;
            let reader: Box<dyn BufRead> = match input {
                Some(p) => {
                    Box::new(BufReader::new(File::open(&p).with_context(|| format!("opening {}", p.display()))?))
                }
                None => Box::new(BufReader::new(io::stdin())),
            };
            let appearance = resolve_appearance(&cfg, model.as_deref())?;
            let mut bundle = base_bundle(&cfg, &map, appearance.as_ref(), cfg.matcher.p1)?;
            warm_start(&mut bundle, state.as_deref(), map.gate_count())?;
            let learned = stream(&cfg, bundle, reader, update_every)?;
            if let Some(p) = save_state {
                save_state_file(&learned, &p)?;
            }
            Ok(())
        }
    }
}

fn simulate(map: &MapSpec, scenario: &ScenarioSpec, cfg: &Config, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_json(&out.join("map.json"), map)?;
    save_json(&out.join("scenario.json"), scenario)?;
    let calib: Vec<Frame<f64>> =
        calibration_frames(map, cfg.segmentation.calibration_frames).into_iter().flatten().collect();
    save_jsonl(&out.join("calibration.jsonl"), &calib)?;
    let mut frames = create_writer(&out.join("frames.jsonl"))?;
    let mut truth = create_writer(&out.join("truth.jsonl"))?;
    let mut n_frames = 0usize;
    for step in Simulation::new(map, scenario)? {
        write_jsonl(&mut frames, &step.frames)?;
        write_jsonl(&mut truth, &step.truth)?;
        n_frames += step.frames.len();
    }
    frames.flush()?;
    truth.flush()?;
    eprintln!("{n_frames} frames written to {}", out.display());
    Ok(())
}

fn extract(cfg: &Config, input: &Path, out: &Path, truth_out: Option<&Path>) -> CliResult<()> {
    let map: MapSpec = load_json(&input.join("map.json")).context("reading map.json")?;
    let calib: Vec<Frame<f64>> = load_jsonl(&input.join("calibration.jsonl")).context("reading calibration.jsonl")?;
    let mut per_sensor: BTreeMap<u32, Vec<Frame<f64>>> = BTreeMap::new();
    for f in calib {
        per_sensor.entry(f.sensor_id).or_default().push(f);
    }
    let calib: Vec<Vec<Frame<f64>>> = per_sensor.into_values().collect();
    let mut ex = Extractor::new(&map, &calib, cfg, cfg.tracker)?;
    let file = File::open(input.join("frames.jsonl")).context("opening frames.jsonl")?;
    let mut subs = Vec::new();
    for frame in JsonlReader::<_, Frame<f64>>::new(BufReader::new(file)) {
        let frame = frame.context("frames.jsonl")?;
        subs.extend(ex.process(&frame)?);
    }
    subs.extend(ex.finish());
    let subs = renumber(subs);
    save_jsonl(out, &subs)?;
    if let Some(path) = truth_out {
        let samples: Vec<TruthSample> = load_jsonl(&input.join("truth.jsonl")).context("reading truth.jsonl")?;
        let labels = label_subtrajectories(&subs, &samples, cfg.experiment.label_radius);
        let records: Vec<TruthRecord> = labels
            .into_iter()
            .filter_map(|(id, p)| p.map(|person_id| TruthRecord { person_id, sub_trajectory_id: id }))
            .collect();
        save_jsonl(path, &records)?;
    }
    eprintln!("{} sub-trajectories", subs.len());
    Ok(())
}

fn warm_start(bundle: &mut ModelBundle<f64>, state: Option<&Path>, gates: usize) -> CliResult<()> {
    if let Some(p) = state {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let (q, travel) = SpatiotemporalState::from_json(&text)?.restore(gates)?;
        bundle.transitions = q;
        bundle.travel = travel;
    }
    Ok(())
}

fn save_state_file(bundle: &ModelBundle<f64>, path: &Path) -> CliResult<()> {
    let state = SpatiotemporalState::capture(&bundle.transitions, &bundle.travel);
    fs::write(path, state.to_json()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Returns the model as last updated.
fn stream(
    cfg: &Config,
    bundle: ModelBundle<f64>,
    reader: Box<dyn BufRead>,
    update_every: f64,
) -> CliResult<ModelBundle<f64>> {
    let updates = cfg.update == Some(true);
    let mut model = bundle.clone();
    let mut matcher = OnlineMatcher::new(bundle, cfg.matcher.tau, cfg.matcher.window);
    let mut learner = StreamLearner::new(cfg.spatiotemporal.confidence_window, cfg.matcher.window.settle);
    let mut next_update: Option<f64> = None;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for rec in JsonlReader::<_, SubTrajectory<f64>>::new(reader) {
        let tr = rec?;
        let now = tr.t_end;
        if updates {
            learner.push(tr.clone());
        }
        let results = matcher.push(tr)?;
        write_jsonl(&mut w, &results)?;
        let due = *next_update.get_or_insert(now + update_every);
        if updates && now >= due {
            next_update = Some(now + update_every);
            let hc = learner.harvest(now, false);
            if !hc.is_empty() {
                model = apply_samples(&model, &hc);
                matcher.set_model(model.clone())?;
            }
        }
        w.flush()?;
    }
    write_jsonl(&mut w, &matcher.flush()?)?;
    w.flush()?;
    if updates {
        model = apply_samples(&model, &learner.harvest(f64::INFINITY, true));
    }
    Ok(model)
}
