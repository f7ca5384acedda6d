//! The closed navigation loop over a scenario, its JSONL run log, and the
//! post-hoc tools built on that log.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::{self, fuse, max_cost, max_cost_in, target_cost_with, CostMap, SegmentationBackend};
use crate::exec::Exec;
use crate::gateway::{build_request, BackendEndpoint, Fixture, GatewayClient, Provider, RemoteLanguageModel, SchemaId};
use crate::geometry::{Point2, Pose2D};
use crate::instruction::{
    decompose, gait_caution_flag, normalize_text, pair_rules, score_desirability, BehaviorRule, InstructionBundle,
    PromptSet,
};
use crate::landmark::{
    self, evaluate_detections, pixel_goal_to_odom, update_goal_lock, DatasetRecord, DetectionReport, GoalLock,
    LandmarkBackend, OracleLandmarks, PixelGoal, RemoteLandmarkDetector,
};
use crate::metrics::{summarize, RunLog, RunSummary, Thresholds, TickRecord};
use crate::planner::{apply_velocity_cap, plan_step, PlanError, PlanInputs, TrajectoryParams};
use crate::scenario::{BackendMode, Scenario};
use crate::simulator::{
    label_matches, lidar_scan, step, GroundLut, OracleSegmenter, RobotState, Scene, SensorFrame, LIDAR_BEAMS,
    LIDAR_MAX_RANGE,
};

pub const LOG_FILE: &str = "run.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("backend failure: {0}")]
    BackendFailure(String),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error("io: {0}")]
    Io(String),
}

impl RunError {
    /// Process exit code: 2 for bad input, 3 for backend failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::BackendFailure(_) => 3,
            _ => 2,
        }
    }
}

impl From<crate::scenario::ScenarioError> for RunError {
    fn from(e: crate::scenario::ScenarioError) -> Self {
        RunError::InvalidScenario(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageSource {
    /// Offline decomposer and desirability table.
    Fallback,
    /// A language backend (live or replayed).
    Model,
}

/// The instruction-level outcome used for the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguagePlan {
    pub bundle: InstructionBundle,
    pub rules: Vec<BehaviorRule>,
    pub gait_caution: bool,
    pub unclassified: Vec<String>,
    pub source: LanguageSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub scenario: String,
    pub config_digest: String,
    pub instruction: String,
    pub language: LanguagePlan,
    pub landmarks: Vec<String>,
    pub d_th: f64,
    pub timeout: f64,
    pub dt: f64,
    pub reference_path: Option<Vec<Point2>>,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Reached,
    Timeout,
    Collision,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogFooter {
    pub reason: EndReason,
    pub ticks: usize,
    pub final_pose: Pose2D,
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogLine {
    Header(LogHeader),
    Tick(TickRecord),
    End(LogFooter),
}

/// Wall-clock timing, kept out of the run log so logs stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub tick_wall_s: Vec<f64>,
    pub mean_tick_wall_s: Option<f64>,
}

impl Timing {
    fn new(tick_wall_s: Vec<f64>) -> Self {
        let mean = (!tick_wall_s.is_empty()).then(|| tick_wall_s.iter().sum::<f64>() / tick_wall_s.len() as f64);
        Self {
            tick_wall_s,
            mean_tick_wall_s: mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
    pub footer: LogFooter,
    pub summary: RunSummary,
    pub timing: Timing,
}

impl RunOutput {
    pub fn run_log(&self) -> RunLog {
        RunLog {
            n_landmarks: self.header.landmarks.len(),
            ticks: self.ticks.clone(),
            final_pose: Some(self.footer.final_pose),
        }
    }

    /// The log as JSONL text.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        let mut push = |l: &LogLine| {
            out.push_str(&serde_json::to_string(l).expect("log line serializes"));
            out.push('\n');
        };
        push(&LogLine::Header(self.header.clone()));
        for t in &self.ticks {
            push(&LogLine::Tick(t.clone()));
        }
        push(&LogLine::End(self.footer.clone()));
        out
    }

    /// Writes `run.jsonl`, `summary.json` and `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| io_err(&p, e))
        };
        write(LOG_FILE, self.log_text())?;
        write(SUMMARY_FILE, pretty(&self.summary))?;
        write(TIMING_FILE, pretty(&self.timing))
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes") + "\n"
}

fn prompts_for(sc: &Scenario) -> Result<PromptSet, RunError> {
    let p = &sc.config.prompts;
    let resolve = |o: &Option<PathBuf>| o.as_ref().map(|p| sc.resolve(p));
    let (d, a, f) = (resolve(&p.decompose), resolve(&p.action), resolve(&p.frontier));
    PromptSet::with_instruction(sc.config.instruction.clone())
        .load_overrides(d.as_deref(), a.as_deref(), f.as_deref())
        .map_err(|e| RunError::InvalidScenario(e.to_string()))
}

fn fallback_language(sc: &Scenario) -> Result<LanguagePlan, RunError> {
    let lexicon = sc.config.lexicon.clone().unwrap_or_default();
    let table = sc.config.desirability.clone().unwrap_or_default();
    let fb = lexicon.decompose(&sc.config.instruction);
    for c in &fb.unclassified {
        log::warn!("{c}");
    }
    let scores = table.score(&fb.bundle.behav_actions);
    let rules = pair_rules(&fb.bundle, &scores).map_err(|e| RunError::InvalidScenario(e.to_string()))?;
    Ok(LanguagePlan {
        gait_caution: gait_caution_flag(&fb.bundle.behav_actions),
        bundle: fb.bundle,
        rules,
        unclassified: fb.unclassified.into_iter().map(|c| c.0).collect(),
        source: LanguageSource::Fallback,
    })
}

fn model_language(
    instr: &str,
    prompts: &PromptSet,
    model: &RemoteLanguageModel,
) -> Result<LanguagePlan, crate::instruction::InstructionError> {
    let bundle = decompose(instr, prompts, model)?;
    let scores = score_desirability(&bundle.behav_actions, prompts, model)?;
    let rules = pair_rules(&bundle, &scores)?;
    Ok(LanguagePlan {
        gait_caution: gait_caution_flag(&bundle.behav_actions),
        bundle,
        rules,
        unclassified: Vec::new(),
        source: LanguageSource::Model,
    })
}

fn language_endpoint(sc: &Scenario) -> Option<BackendEndpoint> {
    let b = &sc.config.backends;
    let resolve_fixture = |mut ep: BackendEndpoint| {
        ep.fixture = ep.fixture.map(|p| sc.resolve(&p));
        ep
    };
    match b.mode {
        BackendMode::Oracle => None,
        BackendMode::Replay => b
            .language_fixture
            .as_ref()
            .map(|p| BackendEndpoint::replay(sc.resolve(p)))
            .or_else(|| b.language.clone().map(resolve_fixture)),
        BackendMode::Live => b.language.clone().map(resolve_fixture),
    }
}

/// Decomposes the instruction and scores its actions with the configured
/// language source.
pub fn plan_language(sc: &Scenario, prompts: &PromptSet) -> Result<LanguagePlan, RunError> {
    let Some(ep) = language_endpoint(sc) else {
        return fallback_language(sc);
    };
    let result = GatewayClient::new(ep)
        .map_err(|e| e.to_string())
        .and_then(|c| model_language(&sc.config.instruction, prompts, &RemoteLanguageModel::new(c)).map_err(|e| e.to_string()));
    match result {
        Ok(plan) => Ok(plan),
        Err(e) if sc.config.backends.allow_fallback => {
            log::warn!("language backend failed ({e}); using the offline decomposer");
            fallback_language(sc)
        }
        Err(e) => Err(RunError::BackendFailure(e)),
    }
}

fn remote_client(sc: &Scenario, ep: &BackendEndpoint) -> Result<GatewayClient, RunError> {
    let mut ep = ep.clone();
    ep.fixture = ep.fixture.map(|p| sc.resolve(&p));
    GatewayClient::new(ep).map_err(|e| RunError::InvalidScenario(e.to_string()))
}

fn segmenter_for(sc: &Scenario, exec: Exec) -> Result<Box<dyn SegmentationBackend>, RunError> {
    let b = &sc.config.backends;
    let oracle = OracleSegmenter {
        blur_sigma: sc.config.perception.blur_sigma,
        noise_amp: sc.config.perception.noise_amp,
        seed: sc.config.seeds.noise,
        exec,
    };
    match (&b.mode, &b.segmentation) {
        (BackendMode::Oracle, _) | (_, None) => Ok(Box::new(oracle)),
        (_, Some(ep)) => Ok(Box::new(costmap::RemoteSegmenter::new(remote_client(sc, ep)?))),
    }
}

fn oracle_landmarks(sc: &Scenario) -> OracleLandmarks {
    OracleLandmarks {
        landmarks: sc.config.world.landmarks.clone(),
        camera: sc.config.camera,
        noise_px: sc.config.perception.landmark_noise_px,
        seed: sc.config.seeds.sim,
        latency_s: sc.config.perception.landmark_latency_s,
    }
}

fn landmarks_for(sc: &Scenario) -> Result<Box<dyn LandmarkBackend>, RunError> {
    let b = &sc.config.backends;
    let ep = match b.mode {
        BackendMode::Oracle => None,
        BackendMode::Replay => b
            .landmark_fixture
            .as_ref()
            .map(|p| BackendEndpoint::replay(sc.resolve(p)))
            .or_else(|| b.landmark.clone()),
        BackendMode::Live => b.landmark.clone(),
    };
    match ep {
        None => Ok(Box::new(oracle_landmarks(sc))),
        Some(ep) => Ok(Box::new(RemoteLandmarkDetector::new(remote_client(sc, &ep)?))),
    }
}

struct PendingDetection {
    deliver_at: f64,
    index: usize,
    pixel: Option<PixelGoal>,
    pose: Pose2D,
}

/// Builds the fused behavioral cost map for a frame.
pub fn behavior_cost_map(
    frame: &SensorFrame,
    rules: &[BehaviorRule],
    backend: &dyn SegmentationBackend,
    mult: costmap::CostMultiplier,
) -> Result<CostMap, costmap::CostMapError> {
    if rules.is_empty() {
        return Ok(CostMap::zeros(frame.width, frame.height));
    }
    let targets: Vec<String> = rules.iter().map(|r| r.target.clone()).collect();
    let maps = costmap::segment(frame, &targets, backend)?;
    let costs: Vec<CostMap> = maps.iter().zip(rules).map(|(m, r)| target_cost_with(m, r, mult)).collect();
    fuse(&costs)
}

/// Label ids of actors governed by a rule at or above the stop threshold.
fn stop_label_ids(scene: &Scene, rules: &[BehaviorRule], c_th: f64) -> Vec<u16> {
    let mut ids: Vec<u16> = scene
        .world
        .actors
        .iter()
        .filter(|a| rules.iter().any(|r| r.undesirability >= c_th && label_matches(&a.label, &r.target)))
        .filter_map(|a| scene.labels.iter().position(|l| *l == normalize_text(&a.label)))
        .map(|i| i as u16)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Executes the scenario to completion.
pub fn run(sc: &Scenario, exec: Exec) -> Result<RunOutput, RunError> {
    let cfg = &sc.config;
    let pc = &cfg.planner;
    let scene = Scene::new(cfg.world.clone()).map_err(|e| RunError::InvalidScenario(e.to_string()))?;
    let prompts = prompts_for(sc)?;
    let language = plan_language(sc, &prompts)?;
    let landmarks = language.bundle.nav_landmarks.clone();
    if landmarks.is_empty() {
        return Err(RunError::InvalidScenario("the instruction names no landmark".into()));
    }
    let segmenter = segmenter_for(sc, exec)?;
    let detector = landmarks_for(sc)?;
    let allow_fallback = cfg.backends.allow_fallback;
    let oracle_seg = OracleSegmenter {
        blur_sigma: cfg.perception.blur_sigma,
        noise_amp: cfg.perception.noise_amp,
        seed: cfg.seeds.noise,
        exec,
    };

    let header = LogHeader {
        scenario: cfg.name.clone(),
        config_digest: sc.digest.clone(),
        instruction: cfg.instruction.clone(),
        language: language.clone(),
        landmarks: landmarks.clone(),
        d_th: pc.d_th,
        timeout: cfg.timeout,
        dt: pc.dt,
        reference_path: cfg.reference_path.clone(),
        thresholds: cfg.thresholds,
    };
    let rules = &language.rules;
    let stop_ids = stop_label_ids(&scene, rules, pc.c_th);
    let lut = GroundLut::new(&cfg.camera);
    let mut state = RobotState::at(cfg.start);
    let mut lock = GoalLock::new(landmarks.len(), pc.d_th);
    let mut pending: Option<PendingDetection> = None;
    let mut next_query = 0.0;
    let mut warm: Option<TrajectoryParams> = None;
    let mut ticks = Vec::new();
    let mut wall = Vec::new();
    let max_ticks = (cfg.timeout / pc.dt + 1e-9).floor() as usize + 1;

    let mut reason = EndReason::Timeout;
    for k in 0..max_ticks {
        let started = Instant::now();
        let t = k as f64 * pc.dt;
        let pose = state.pose;
        let actors = scene.actors_update(t);
        let label_image = lut.render(&scene, &pose, &actors, exec);
        let frame = SensorFrame {
            t,
            pose,
            width: cfg.camera.width,
            height: cfg.camera.height,
            label_image,
            labels: scene.labels.clone(),
            lidar_points: lidar_scan(&scene, &pose, &actors, LIDAR_BEAMS, LIDAR_MAX_RANGE),
        };

        // landmark query, delivered after its latency in sim time
        if pending.is_none() && !lock.is_complete() && t + 1e-9 >= next_query {
            match landmark::detect(&frame, &landmarks[lock.landmark_index], &prompts, detector.as_ref()) {
                Ok(d) => {
                    pending = Some(PendingDetection {
                        deliver_at: t + d.latency_s.max(0.0),
                        index: lock.landmark_index,
                        pixel: d.pixel,
                        pose,
                    })
                }
                Err(e) if allow_fallback => log::warn!("landmark query failed at t={t}: {e}"),
                Err(e) => return Err(RunError::BackendFailure(e.to_string())),
            }
            next_query = t + cfg.perception.query_period_s;
        }
        let mut detection = None;
        if pending.as_ref().is_some_and(|p| p.deliver_at <= t + 1e-9) {
            let p = pending.take().expect("checked");
            if p.index == lock.landmark_index {
                detection = p
                    .pixel
                    .map(|px| pixel_goal_to_odom(&px, &cfg.camera, &p.pose, cfg.perception.default_range));
            }
        }
        let goal = detection.or(lock.current);
        let before = lock.landmark_index;
        lock = update_goal_lock(&lock, detection, &pose);
        if lock.landmark_index != before {
            next_query = t;
            warm = None;
        }

        let collision = scene.collides(pose.position(), &actors);
        let stop_active = !stop_ids.is_empty() && frame.label_image.iter().any(|id| stop_ids.binary_search(id).is_ok());
        let terrain = scene.label_name(scene.terrain_at(pose.position())).to_string();
        let mut rec = TickRecord {
            t,
            pose,
            v: 0.0,
            omega: 0.0,
            cost: None,
            z: None,
            max_c: 0.0,
            capped_v_max: cfg.bounds.upper.v_max,
            gait_caution: language.gait_caution,
            collision,
            stop_active,
            terrain,
            goal: goal.map(|g| g.position),
            landmark_index: lock.landmark_index,
        };
        if lock.is_complete() || collision {
            reason = if collision { EndReason::Collision } else { EndReason::Reached };
            ticks.push(rec);
            wall.push(started.elapsed().as_secs_f64());
            break;
        }

        let cost_map = match behavior_cost_map(&frame, rules, segmenter.as_ref(), cfg.perception.cost_multiplier) {
            Ok(c) => c,
            Err(e) if allow_fallback => {
                log::warn!("segmentation failed at t={t}: {e}; using the oracle");
                behavior_cost_map(&frame, rules, &oracle_seg, cfg.perception.cost_multiplier)
                    .map_err(|e| RunError::BackendFailure(e.to_string()))?
            }
            Err(e) => return Err(RunError::BackendFailure(e.to_string())),
        };
        let obstacles: Vec<Point2> = frame.lidar_points.iter().map(|p| pose.to_world(*p)).collect();
        let plan_goal = lock.current;
        let inputs = PlanInputs {
            robot: &pose,
            goal: plan_goal.as_ref(),
            cost_map: &cost_map,
            obstacles: &obstacles,
            bundle: &language.bundle,
            camera: &cfg.camera,
            warm_start: warm,
        };
        let seed = cfg.seeds.optimizer.wrapping_mul(1_000_003).wrapping_add(k as u64);
        match plan_step(&inputs, pc, &cfg.bounds, seed, exec) {
            Ok(r) => {
                rec.v = r.command.v;
                rec.omega = r.command.omega;
                rec.cost = Some(r.cost_breakdown);
                rec.z = Some(r.best_params);
                rec.max_c = r.max_c;
                rec.capped_v_max = r.capped_v_max;
                warm = Some(r.best_params);
            }
            Err(PlanError::NoGoal | PlanError::ZeroBaseline) => {
                rec.max_c = match &pc.cap_roi {
                    Some(roi) => max_cost_in(&cost_map, roi),
                    None => max_cost(&cost_map),
                };
                rec.capped_v_max =
                    apply_velocity_cap(&cfg.bounds, rec.max_c, pc.c_th, cfg.bounds.upper.v_max).upper.v_max;
            }
            Err(e) => return Err(RunError::InvalidScenario(e.to_string())),
        }
        state = step(&state, (rec.v, rec.omega), pc.dt);
        ticks.push(rec);
        wall.push(started.elapsed().as_secs_f64());
        if !scene.world.bounds.contains(state.pose.position()) {
            reason = EndReason::OutOfBounds;
            break;
        }
    }

    let footer = LogFooter {
        reason,
        ticks: ticks.len(),
        final_pose: state.pose,
    };
    let timing = Timing::new(wall);
    let log = RunLog {
        n_landmarks: landmarks.len(),
        ticks,
        final_pose: Some(state.pose),
    };
    let mut summary = summary_for(&header, &log, None);
    summary.mean_tick_wall_s = timing.mean_tick_wall_s;
    Ok(RunOutput {
        header,
        ticks: log.ticks,
        footer,
        summary,
        timing,
    })
}

fn summary_for(header: &LogHeader, log: &RunLog, u_threshold: Option<f64>) -> RunSummary {
    let mut th = header.thresholds;
    if let Some(u) = u_threshold {
        th.u_compliant = u;
    }
    summarize(
        log,
        &header.language.rules,
        header.reference_path.as_deref(),
        header.d_th,
        header.timeout,
        header.dt,
        &th,
    )
}

/// A parsed run log.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub header: LogHeader,
    pub ticks: Vec<TickRecord>,
    pub footer: LogFooter,
}

impl ParsedLog {
    pub fn run_log(&self) -> RunLog {
        RunLog {
            n_landmarks: self.header.landmarks.len(),
            ticks: self.ticks.clone(),
            final_pose: Some(self.footer.final_pose),
        }
    }
}

/// Reads a run log, requiring a header first and a matching footer last.
pub fn read_log(path: &Path) -> Result<ParsedLog, RunError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let corrupt = |line: usize, why: String| RunError::CorruptLog(format!("{} line {line}: {why}", path.display()));
    let mut header = None;
    let mut ticks = Vec::new();
    let mut footer = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(corrupt(i + 1, "content after the end record".into()));
        }
        let parsed: LogLine = serde_json::from_str(&line).map_err(|e| corrupt(i + 1, e.to_string()))?;
        match (parsed, header.is_some()) {
            (LogLine::Header(h), false) => header = Some(h),
            (LogLine::Header(_), true) => return Err(corrupt(i + 1, "second header".into())),
            (_, false) => return Err(corrupt(i + 1, "missing header".into())),
            (LogLine::Tick(t), true) => ticks.push(t),
            (LogLine::End(e), true) => footer = Some(e),
        }
    }
    let header = header.ok_or_else(|| RunError::CorruptLog(format!("{}: empty log", path.display())))?;
    let footer = footer.ok_or_else(|| RunError::CorruptLog(format!("{}: missing end record", path.display())))?;
    if footer.ticks != ticks.len() {
        return Err(RunError::CorruptLog(format!(
            "{}: end record counts {} ticks, found {}",
            path.display(),
            footer.ticks,
            ticks.len()
        )));
    }
    Ok(ParsedLog { header, ticks, footer })
}

/// Recomputes the summary of a logged run. Tick wall time comes from the
/// `timing.json` next to the log, when present.
pub fn replay(log_path: &Path, u_threshold: Option<f64>) -> Result<RunSummary, RunError> {
    let parsed = read_log(log_path)?;
    let mut summary = summary_for(&parsed.header, &parsed.run_log(), u_threshold);
    let timing_path = log_path.with_file_name(TIMING_FILE);
    if timing_path.exists() {
        let text = std::fs::read_to_string(&timing_path).map_err(|e| io_err(&timing_path, e))?;
        let timing: Timing =
            serde_json::from_str(&text).map_err(|e| RunError::CorruptLog(format!("{}: {e}", timing_path.display())))?;
        summary.mean_tick_wall_s = timing.mean_tick_wall_s;
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct CsvRow {
    t: f64,
    x: f64,
    y: f64,
    heading: f64,
    v: f64,
    omega: f64,
    max_c: f64,
    gait_caution: bool,
}

pub const CSV_COLUMNS: [&str; 8] = ["t", "x", "y", "heading", "v", "omega", "max_c", "gait_caution"];

/// Writes one CSV row per tick, with a header row even for empty logs.
pub fn export_csv<W: Write>(ticks: &[TickRecord], out: W) -> Result<(), RunError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let fail = |e: csv::Error| RunError::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(fail)?;
    for r in ticks {
        w.serialize(CsvRow {
            t: r.t,
            x: r.pose.x,
            y: r.pose.y,
            heading: r.pose.heading,
            v: r.v,
            omega: r.omega,
            max_c: r.max_c,
            gait_caution: r.gait_caution,
        })
        .map_err(fail)?;
    }
    w.flush().map_err(|e| RunError::Io(e.to_string()))
}

/// Exports a logged run to CSV at `out`.
pub fn export_traj(log_path: &Path, out: &Path) -> Result<(), RunError> {
    let parsed = read_log(log_path)?;
    let f = File::create(out).map_err(|e| io_err(out, e))?;
    export_csv(&parsed.ticks, BufWriter::new(f))
}

/// Writes a language fixture holding the offline decomposer's answers for
/// the scenario, keyed by the requests a plain-provider backend would send.
pub fn record_language_fixture(sc: &Scenario, out: &Path) -> Result<usize, RunError> {
    let prompts = prompts_for(sc)?;
    let plan = fallback_language(sc)?;
    let mut fx = Fixture::default();
    let provider = Provider::Plain;
    fx.insert(
        build_request(&provider, SchemaId::Decompose, &prompts.render_decompose(), None),
        serde_json::to_value(&plan.bundle).expect("bundle serializes"),
        0.0,
    );
    if !plan.bundle.behav_actions.is_empty() {
        let values: Vec<f64> = plan.rules.iter().map(|r| r.desirability).collect();
        fx.insert(
            build_request(&provider, SchemaId::Desirability, &prompts.render_action(&plan.bundle.behav_actions), None),
            serde_json::json!({ "values": values }),
            0.0,
        );
    }
    fx.save(out).map_err(|e| io_err(out, e))?;
    Ok(fx.records.len())
}

/// Scores a detector on a JSONL dataset of `{image, landmark, rect}`
/// records. Image paths resolve against the dataset's directory.
pub fn eval_landmarks(
    dataset: &Path,
    endpoint: BackendEndpoint,
    prompts: &PromptSet,
) -> Result<DetectionReport, RunError> {
    let text = std::fs::read_to_string(dataset).map_err(|e| io_err(dataset, e))?;
    let base = dataset.parent().unwrap_or(Path::new("."));
    let records: Vec<DatasetRecord> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RunError::InvalidScenario(format!("dataset line {}: {e}", i + 1)))
        })
        .collect::<Result<_, _>>()?;
    let client = GatewayClient::new(endpoint).map_err(|e| RunError::InvalidScenario(e.to_string()))?;
    let detector = RemoteLandmarkDetector::new(client);
    let mut predictions = Vec::with_capacity(records.len());
    for r in &records {
        let path = base.join(&r.image);
        let png = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        let d = detector
            .detect_png(&png, &r.landmark, prompts, 0.0)
            .map_err(|e| RunError::BackendFailure(e.to_string()))?;
        predictions.push(d.pixel);
    }
    evaluate_detections(&records, &predictions).map_err(|e| RunError::InvalidScenario(e.to_string()))
}

/// Default fixture path for a scenario's language answers.
pub fn language_fixture_path(sc: &Scenario) -> Option<PathBuf> {
    sc.config.backends.language_fixture.as_ref().map(|p| sc.resolve(p))
}
