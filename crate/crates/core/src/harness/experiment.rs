// SPDX-License-Identifier: Apache-2.0

//! End-to-end experiments on the simulated testbeds.

use serde::{Deserialize, Serialize};

use super::eval::{auc, evaluate_report, EvalReport, GroundTruth};
use super::pipeline::{label_subtrajectories, run_scene, Extractor, Scene, TruthIndex};
use crate::config::Config;
use crate::embedding::{train, EmbeddingNet, TrainReport, TrainingSet};
use crate::error::{Error, Result};
use crate::features::{fisher_vector, FeatureMatrix, GmmGrid};
use crate::matcher::{build_graph, solve_matching, Factors, MatchResult, ModelBundle, OnlineMatcher, P1Mode};
use crate::simulator::{
    corridor_map, corridor_traffic, enrollment_scenario, loop_scenario, population, square_loop_map, BodyModel,
    MapSpec, Simulation, DEFAULT_WALK_TIME,
};
use crate::spatiotemporal::{
    detect_high_confidence, detect_transitions, gate_events, GateId, HighConfidence, TransitionMatrix, TravelDensity,
    TravelTimeModel,
};
use crate::tracker::{SubTrajectory, TrackerParams};

pub const EXPERIMENTS: [&str; 5] = ["exp1a", "exp1b", "exp1c", "pre_post", "corridor"];

/// Person ids of the training population start here, clear of any test subject.
pub const TRAINING_ID_BASE: u32 = 1000;
/// People enrolled for the held-out appearance check.
pub const HELD_OUT_SUBJECTS: usize = 32;

/// Trained appearance model and its held-out quality.
#[derive(Clone, Debug)]
pub struct Appearance {
    pub grid: GmmGrid<f64>,
    pub net: EmbeddingNet<f64>,
    pub report: TrainReport,
    pub training_samples: usize,
    /// ROC AUC of segment-pair similarity on people never seen in training.
    pub held_out_auc: Option<f64>,
    /// High-confidence transitions seen while enrolling; site history for updates.
    pub site_transitions: Option<Vec<HighConfidence<f64>>>,
}

impl Appearance {
    /// Wraps a stored model; held-out quality and site history are unknown.
    pub fn from_model(grid: GmmGrid<f64>, net: EmbeddingNet<f64>) -> Self {
        Self {
            grid,
            net,
            report: TrainReport::default(),
            training_samples: 0,
            held_out_auc: None,
            site_transitions: None,
        }
    }
}

/// Travel-time density of one gate pair before and after learning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TravelCurve {
    pub tag: String,
    pub pair: (GateId, GateId),
    pub dt: Vec<f64>,
    pub prior: Vec<f64>,
    pub likelihood: Vec<f64>,
    pub posterior: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub name: String,
    pub reports: Vec<EvalReport>,
    #[serde(default)]
    pub travel_curves: Vec<TravelCurve>,
}

fn tracker_with_stride(cfg: &Config, stride: usize) -> TrackerParams<f64> {
    TrackerParams { segment_stride: stride.max(1), ..cfg.tracker }
}

/// Labelled segments of a scene, keyed by the nearest walking person.
pub fn labelled_features(scene: &Scene, grid: &GmmGrid<f64>, radius: f64) -> Result<Vec<(u64, FeatureMatrix<f64>)>> {
    let index = TruthIndex::new(&scene.truth, radius);
    let mut out = Vec::new();
    for s in &scene.subs {
        for seg in &s.segments {
            if let Some(p) = index.label_segment(seg) {
                out.push((p as u64, fisher_vector(seg, grid)?));
            }
        }
    }
    Ok(out)
}

fn enrollment_scene(bodies: &[BodyModel], cfg: &Config) -> Result<Scene> {
    let map = square_loop_map();
    let scenario = enrollment_scenario(bodies, cfg.experiment.enrollment_laps, cfg.seed);
    run_scene(&map, &scenario, cfg, tracker_with_stride(cfg, cfg.experiment.training_stride))
}

/// Unlabelled solo walks of the test population around the loop, reduced to
/// their high-confidence transitions.
pub fn site_history(cfg: &Config) -> Result<Vec<HighConfidence<f64>>> {
    let scene = enrollment_scene(&population(cfg.seed, HELD_OUT_SUBJECTS), cfg)?;
    Ok(high_confidence(&scene.subs, cfg.spatiotemporal.confidence_window))
}

/// Similarity AUC over every segment pair; same person counts as positive.
pub fn similarity_auc(net: &EmbeddingNet<f64>, samples: &[(u64, FeatureMatrix<f64>)]) -> Result<Option<f64>> {
    let emb = samples.iter().map(|(_, x)| net.embed(x)).collect::<Result<Vec<_>>>()?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let s = crate::embedding::similarity_from_cosine(emb[i].dot(&emb[j]));
            if samples[i].0 == samples[j].0 {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
    }
    Ok(auc(&pos, &neg))
}

/// Trains the embedding on a dedicated population and scores it on the test population.
pub fn train_appearance(cfg: &Config) -> Result<Appearance> {
    let grid = cfg.features.grid();
    let ex = &cfg.experiment;
    let trainees: Vec<BodyModel> =
        (0..ex.training_subjects as u32).map(|i| BodyModel::sample(cfg.seed, TRAINING_ID_BASE + i)).collect();
    let samples = labelled_features(&enrollment_scene(&trainees, cfg)?, &grid, ex.label_radius)?;
    let data = TrainingSet::from_features(&samples)?;
    let mut tc = cfg.train.clone();
    tc.seed = tc.seed.wrapping_add(cfg.seed);
    let (net, report) = train(&data, &tc)?;

    let held_out_scene = enrollment_scene(&population(cfg.seed, HELD_OUT_SUBJECTS), cfg)?;
    let site_transitions = high_confidence(&held_out_scene.subs, cfg.spatiotemporal.confidence_window);
    let held_out = labelled_features(&held_out_scene, &grid, ex.label_radius)?;
    // Every few segments is plenty for a stable estimate.
    let step = (held_out.len() / 800).max(1);
    let probe: Vec<_> = held_out.into_iter().step_by(step).collect();
    let held_out_auc = similarity_auc(&net, &probe)?;
    Ok(Appearance {
        grid,
        net,
        report,
        training_samples: samples.len(),
        held_out_auc,
        site_transitions: Some(site_transitions),
    })
}

/// Bundle with uniform spatial and temporal distributions.
pub fn base_bundle(
    cfg: &Config,
    map: &MapSpec,
    appearance: Option<&Appearance>,
    p1_mode: P1Mode,
) -> Result<ModelBundle<f64>> {
    let net = match (p1_mode, appearance) {
        (P1Mode::Fv, None) => return Err(Error::MissingModel("fv similarity needs a trained embedding".into())),
        (_, a) => a.map(|a| a.net.clone()),
    };
    Ok(ModelBundle {
        grid: appearance.map_or_else(|| cfg.features.grid(), |a| a.grid.clone()),
        net,
        transitions: TransitionMatrix::uniform(map.gate_count(), cfg.spatiotemporal.pseudo_count),
        travel: TravelTimeModel::uniform(cfg.spatiotemporal.travel),
        p1_mode,
        sigma_h: cfg.matcher.sigma_h,
        factors: Factors::ALL,
    })
}

/// High-confidence transitions of a finished set of sub-trajectories.
pub fn high_confidence(subs: &[SubTrajectory<f64>], window: f64) -> Vec<HighConfidence<f64>> {
    detect_high_confidence(&gate_events(subs), window)
}

/// Folds transition samples into both distributions.
pub fn apply_samples(bundle: &ModelBundle<f64>, samples: &[HighConfidence<f64>]) -> ModelBundle<f64> {
    let pairs: Vec<(GateId, GateId)> = samples.iter().map(|s| (s.0, s.1)).collect();
    ModelBundle {
        transitions: bundle.transitions.update_spatial(&pairs),
        travel: bundle.travel.update_all(samples),
        ..bundle.clone()
    }
}

pub fn match_batch(subs: &[SubTrajectory<f64>], bundle: &ModelBundle<f64>, tau: f64) -> Result<Vec<MatchResult<f64>>> {
    Ok(vec![solve_matching(&build_graph(subs, bundle, tau)?)])
}

struct LoopRun {
    scene: Scene,
    truth: GroundTruth,
}

fn loop_run(cfg: &Config, n: usize, interval: f64) -> Result<LoopRun> {
    let map = square_loop_map();
    let scenario = loop_scenario(&population(cfg.seed, n), interval, DEFAULT_WALK_TIME, cfg.seed);
    let scene = run_scene(&map, &scenario, cfg, cfg.tracker)?;
    let labels = label_subtrajectories(&scene.subs, &scene.truth, cfg.experiment.label_radius);
    let truth = GroundTruth::from_labels(&scene.subs, &labels);
    Ok(LoopRun { scene, truth })
}

/// Runs independent scenarios on scoped threads, keeping input order.
fn parallel<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> Result<R> + Sync) -> Result<Vec<R>> {
    std::thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = items.into_iter().map(|it| s.spawn(move || f(it))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    })
}

fn travel_curve(
    tag: &str,
    before: &TravelTimeModel<f64>,
    after: &TravelTimeModel<f64>,
    samples: &[HighConfidence<f64>],
) -> Option<TravelCurve> {
    let mut counts: std::collections::BTreeMap<(GateId, GateId), Vec<f64>> = Default::default();
    for &(a, b, dt) in samples {
        counts.entry((a, b)).or_default().push(dt);
    }
    let (pair, dts) = counts.into_iter().max_by(|x, y| x.1.len().cmp(&y.1.len()).then(y.0.cmp(&x.0)))?;
    let n = dts.len() as f64;
    let mean = dts.iter().sum::<f64>() / n;
    let var = dts.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n.max(2.0);
    let sd = var.sqrt().max(0.05);
    let hi = (mean + 8.0 * sd).max(5.0);
    let dt: Vec<f64> = (1..=200).map(|i| hi * i as f64 / 200.0).collect();
    let pdf = |d: TravelDensity<f64>| dt.iter().map(|&x| d.pdf(x)).collect::<Vec<_>>();
    let normal = |x: f64| (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    Some(TravelCurve {
        tag: tag.to_string(),
        pair,
        prior: pdf(before.density(Some(pair))),
        likelihood: dt.iter().map(|&x| normal(x)).collect(),
        posterior: pdf(after.density(Some(pair))),
        dt,
    })
}

fn score(
    tag: &str,
    subs: &[SubTrajectory<f64>],
    truth: &GroundTruth,
    bundle: &ModelBundle<f64>,
    cfg: &Config,
) -> Result<EvalReport> {
    let pred = match_batch(subs, bundle, cfg.matcher.tau)?;
    evaluate_report(tag, &pred, truth, cfg.experiment.histogram_bins)
}

/// Site history plus the run's own high-confidence transitions.
fn learned(
    bundle: &ModelBundle<f64>,
    history: &[HighConfidence<f64>],
    run: &LoopRun,
    cfg: &Config,
) -> (ModelBundle<f64>, Vec<HighConfidence<f64>>) {
    let mut hc = history.to_vec();
    hc.extend(high_confidence(&run.scene.subs, cfg.spatiotemporal.confidence_window));
    (apply_samples(bundle, &hc), hc)
}

fn history_of(cfg: &Config, appearance: Option<&Appearance>) -> Result<Vec<HighConfidence<f64>>> {
    match appearance.and_then(|a| a.site_transitions.clone()) {
        Some(h) => Ok(h),
        None => site_history(cfg),
    }
}

fn loop_modes(cfg: &Config, default_pre: bool, default_post: bool) -> (bool, bool) {
    match cfg.update {
        Some(true) => (false, true),
        Some(false) => (true, false),
        None => (default_pre, default_post),
    }
}

fn exp_loop_sweep(
    name: &str,
    cfg: &Config,
    appearance: Option<&Appearance>,
    settings: Vec<(usize, f64)>,
    label: impl Fn(usize, f64) -> String,
    modes: (bool, bool),
) -> Result<ExperimentOutput> {
    let map = square_loop_map();
    let base = base_bundle(cfg, &map, appearance, cfg.matcher.p1)?;
    let runs = parallel(settings.clone(), |(n, iv)| loop_run(cfg, n, iv))?;
    let history = if modes.1 { history_of(cfg, appearance)? } else { Vec::new() };
    let mut reports = Vec::new();
    for ((n, iv), run) in settings.into_iter().zip(&runs) {
        let tag = label(n, iv);
        if modes.0 {
            let t = if modes.1 { format!("{tag} pre") } else { tag.clone() };
            reports.push(score(&t, &run.scene.subs, &run.truth, &base, cfg)?);
        }
        if modes.1 {
            let (post, _) = learned(&base, &history, run, cfg);
            let t = if modes.0 { format!("{tag} post") } else { tag.clone() };
            reports.push(score(&t, &run.scene.subs, &run.truth, &post, cfg)?);
        }
    }
    Ok(ExperimentOutput { name: name.into(), reports, travel_curves: vec![] })
}

/// Runs one named experiment. Loop experiments need `appearance` unless P1 is height.
pub fn run_experiment(name: &str, cfg: &Config, appearance: Option<&Appearance>) -> Result<ExperimentOutput> {
    let ex = &cfg.experiment;
    match name {
        "exp1a" => {
            let settings = ex.exp1a_subjects.iter().map(|&n| (n, ex.interval)).collect();
            exp_loop_sweep(name, cfg, appearance, settings, |n, _| format!("subjects={n}"), loop_modes(cfg, true, true))
        }
        "exp1b" => {
            let settings = ex.exp1b_intervals.iter().map(|&iv| (ex.exp1b_subjects, iv)).collect();
            exp_loop_sweep(
                name,
                cfg,
                appearance,
                settings,
                |_, iv| format!("interval={iv}"),
                loop_modes(cfg, false, true),
            )
        }
        "exp1c" => {
            let map = square_loop_map();
            let base = base_bundle(cfg, &map, appearance, cfg.matcher.p1)?;
            let run = loop_run(cfg, ex.exp1c_subjects, ex.interval)?;
            let bundle = if cfg.update == Some(false) {
                base
            } else {
                learned(&base, &history_of(cfg, appearance)?, &run, cfg).0
            };
            let mut reports = Vec::new();
            for (tag, f) in [("P1", Factors::P1), ("P2", Factors::P2), ("P3", Factors::P3), ("product", Factors::ALL)] {
                reports.push(score(tag, &run.scene.subs, &run.truth, &bundle.with_factors(f), cfg)?);
            }
            Ok(ExperimentOutput { name: name.into(), reports, travel_curves: vec![] })
        }
        "pre_post" => {
            let map = square_loop_map();
            let base = base_bundle(cfg, &map, appearance, cfg.matcher.p1)?;
            let run = loop_run(cfg, ex.pre_post_subjects, ex.interval)?;
            let (post, hc) = learned(&base, &history_of(cfg, appearance)?, &run, cfg);
            let mut pre_report = score("pre", &run.scene.subs, &run.truth, &base, cfg)?;
            pre_report.auc = appearance.and_then(|a| a.held_out_auc);
            let post_report = score("post", &run.scene.subs, &run.truth, &post, cfg)?;
            let travel_curves = travel_curve("pre_post", &base.travel, &post.travel, &hc).into_iter().collect();
            Ok(ExperimentOutput { name: name.into(), reports: vec![pre_report, post_report], travel_curves })
        }
        "corridor" => corridor(cfg),
        other => Err(Error::UnknownExperiment(other.to_string())),
    }
}

/// Collects high-confidence transitions from a live stream in time slices.
pub struct StreamLearner {
    finished: Vec<SubTrajectory<f64>>,
    cut: f64,
    window: f64,
    lag: f64,
}

impl StreamLearner {
    pub fn new(window: f64, lag: f64) -> Self {
        Self { finished: Vec::new(), cut: f64::NEG_INFINITY, window, lag }
    }

    pub fn push(&mut self, tr: SubTrajectory<f64>) {
        self.finished.push(tr);
    }

    /// New transitions whose entry lies in `(previous cut, now - lag]`.
    /// The lag leaves time for every sub-trajectory overlapping the slice to finish.
    pub fn harvest(&mut self, now: f64, final_slice: bool) -> Vec<HighConfidence<f64>> {
        let cut = if final_slice { f64::INFINITY } else { now - self.lag };
        if cut <= self.cut {
            return Vec::new();
        }
        let lo = std::mem::replace(&mut self.cut, cut);
        let events: Vec<_> = gate_events(&self.finished).into_iter().filter(|e| e.t <= cut).collect();
        detect_transitions(&events, self.window)
            .into_iter()
            .filter(|&(_, entry)| entry > lo && entry <= cut)
            .map(|(hc, _)| hc)
            .collect()
    }
}

/// Sparse corridor over several days with scheduled distribution updates.
fn corridor(cfg: &Config) -> Result<ExperimentOutput> {
    let ex = &cfg.experiment;
    let map = corridor_map();
    let updates = cfg.update != Some(false);
    let mut bundle = base_bundle(cfg, &map, None, P1Mode::Height)?;
    let initial = bundle.travel.clone();
    let mut all_hc = Vec::new();
    let mut reports = Vec::new();
    for day in 1..=ex.corridor_days {
        let scenario = corridor_traffic(day, ex.corridor_day_seconds, ex.corridor_rate, cfg.seed);
        let mut extractor = Extractor::for_map(&map, cfg, cfg.tracker)?;
        let mut matcher = OnlineMatcher::new(bundle.clone(), cfg.matcher.tau, cfg.matcher.window);
        let mut learner = StreamLearner::new(cfg.spatiotemporal.confidence_window, cfg.matcher.window.settle);
        let mut results = Vec::new();
        let mut subs = Vec::new();
        let mut truth = Vec::new();
        let mut next_update = ex.update_every;
        for step in Simulation::new(&map, &scenario)? {
            for f in &step.frames {
                for s in extractor.process(f)? {
                    subs.push(s.clone());
                    learner.push(s.clone());
                    results.extend(matcher.push(s)?);
                }
            }
            truth.extend(step.truth);
            if step.t >= next_update {
                next_update += ex.update_every;
                results.extend(matcher.advance_to(step.t)?);
                if updates {
                    let hc = learner.harvest(step.t, false);
                    if !hc.is_empty() {
                        bundle = apply_samples(&bundle, &hc);
                        matcher.set_model(bundle.clone())?;
                        all_hc.extend(hc);
                    }
                }
            }
        }
        for s in extractor.finish() {
            subs.push(s.clone());
            learner.push(s.clone());
            results.extend(matcher.push(s)?);
        }
        results.extend(matcher.flush()?);
        if updates {
            let hc = learner.harvest(f64::INFINITY, true);
            bundle = apply_samples(&bundle, &hc);
            all_hc.extend(hc);
        }
        let labels = label_subtrajectories(&subs, &truth, ex.label_radius);
        let gt = GroundTruth::from_labels(&subs, &labels);
        reports.push(evaluate_report(&format!("day{day}"), &results, &gt, ex.histogram_bins)?);
    }
    let travel_curves = travel_curve("corridor", &initial, &bundle.travel, &all_hc).into_iter().collect();
    Ok(ExperimentOutput { name: "corridor".into(), reports, travel_curves })
}
