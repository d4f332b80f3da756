//! Batch commands over a directory of scenes.
//!
//! Input layout:
//!
//! ```text
//! <input>/label_map.json              optional, shared by all scenes
//! <input>/<scene>/scene.json
//! <input>/<scene>/label_map.json      optional, overrides the shared one
//! <input>/<scene>/views/<view>.json   camera poses; "mask" is relative to the scene dir
//! ```
//!
//! Every command writes into `<output>` and records per-item failures in
//! `<output>/<command>_errors.log`. Scenes are processed on a worker pool but
//! results are written in sorted order, so the output tree does not depend on
//! the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Thresholds, Tolerances};
use crate::doors::{derive_seed, door_closed_ratio, sample_polygon_uniform, DoorStateReport};
use crate::error::{Error, Result};
use crate::geometry::{residual_summary, ResidualSummary};
use crate::ingest::{filter_scene, load_label_map, load_mask, load_scene, load_view, CameraView, LabelMap, SemanticMask};
use crate::metrics::{evaluate, EvalOptions, EvalReport};
use crate::scene::{line_label_for, JunctionLabel, LineLabel, PlaneLabel, SceneGraph};
use crate::visibility::{visible_segments, AnnotatedView};
use crate::wireframe::PredictionFile;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub thresholds: Thresholds,
    pub tolerances: Tolerances,
    pub nms: bool,
    pub allow_missing: bool,
    pub nonsemantic: bool,
    /// Ground-truth root for `eval`; defaults to `<input>/gt`.
    pub gt: Option<PathBuf>,
    /// Prediction root for `eval`; defaults to `<input>/pred`.
    pub pred: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            seed: 0,
            workers: 1,
            thresholds: Thresholds::default(),
            tolerances: Tolerances::default(),
            nms: false,
            allow_missing: false,
            nonsemantic: false,
            gt: None,
            pred: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        let fail = |m: String| Err(Error::Config(m));
        if self.workers == 0 {
            return fail("worker count must be at least 1".into());
        }
        if !self.input.is_dir() {
            return fail(format!("input directory {} does not exist", self.input.display()));
        }
        if t.betas.is_empty() || t.betas.iter().any(|b| b.is_nan() || *b <= 0.0) {
            return fail(format!("beta thresholds must be positive, got {:?}", t.betas));
        }
        if t.thetas.is_empty() || t.thetas.iter().any(|b| b.is_nan() || *b <= 0.0) {
            return fail(format!("theta thresholds must be positive, got {:?}", t.thetas));
        }
        if t.tau.is_nan() || t.tau <= 0.0 || t.gamma.is_nan() || t.gamma <= 0.0 {
            return fail(format!("tau and gamma must be positive, got {} and {}", t.tau, t.gamma));
        }
        if !(0.0..=1.0).contains(&t.door_closed_ratio) {
            return fail(format!("door ratio must be in [0, 1], got {}", t.door_closed_ratio));
        }
        if t.door_samples == 0 {
            return fail("door sample count must be at least 1".into());
        }
        if t.max_plane_residual_mm.is_nan() || t.max_plane_residual_mm < 0.0 {
            return fail(format!("residual threshold must be non-negative, got {}", t.max_plane_residual_mm));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub items: usize,
    pub errors: usize,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.errors == 0
    }
}

/// One scene directory of the input tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneDir {
    pub name: String,
    pub dir: PathBuf,
}

impl SceneDir {
    pub fn scene_path(&self) -> PathBuf {
        self.dir.join("scene.json")
    }

    /// Pose files under `views/`, sorted by file name.
    pub fn view_paths(&self) -> Result<Vec<PathBuf>> {
        let dir = self.dir.join("views");
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        json_files(&dir)
    }
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    Ok(out)
}

/// Scene directories (those containing `scene.json`), sorted by name.
pub fn discover_scenes(input: &Path) -> Result<Vec<SceneDir>> {
    let mut out: Vec<SceneDir> = fs::read_dir(input)
        .map_err(|e| Error::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("scene.json").is_file())
        .map(|dir| SceneDir { name: dir.file_name().unwrap_or_default().to_string_lossy().into_owned(), dir })
        .collect();
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Files and log lines produced for one scene, written by the caller.
#[derive(Debug, Default)]
struct SceneOutput {
    files: Vec<(PathBuf, String)>,
    errors: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_errors(cfg: &RunConfig, command: &str, errors: &[String]) -> Result<()> {
    for e in errors {
        log::error!("{e}");
    }
    let mut text = String::new();
    for e in errors {
        text.push_str(e);
        text.push('\n');
    }
    write_file(&cfg.output.join(format!("{command}_errors.log")), &text)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output serializes");
    s.push('\n');
    s
}

/// Runs `job` on every scene with the configured worker count and returns
/// the results in scene order.
fn run_scenes<T: Send>(cfg: &RunConfig, job: impl Fn(&SceneDir) -> T + Sync) -> Result<Vec<(SceneDir, T)>> {
    let scenes = discover_scenes(&cfg.input)?;
    info!("{} scenes under {}", scenes.len(), cfg.input.display());
    let pool = cfg.pool()?;
    let results: Vec<T> = pool.install(|| scenes.par_iter().map(&job).collect());
    Ok(scenes.into_iter().zip(results).collect())
}

// ---------------------------------------------------------------------------
// filter

pub const HISTOGRAM_BINS: usize = 50;
pub const HISTOGRAM_RANGE: (f64, f64) = (-8.0, 2.0);

/// Bin of `log10(value)` over [`HISTOGRAM_RANGE`]; values outside the range
/// (including zero) land in the first or last bin.
pub fn histogram_bin(value_mm: f64) -> usize {
    let (lo, hi) = HISTOGRAM_RANGE;
    let x = value_mm.log10();
    if x.is_nan() || x < lo {
        return 0;
    }
    let k = ((x - lo) / (hi - lo) * HISTOGRAM_BINS as f64).floor();
    (k as usize).min(HISTOGRAM_BINS - 1)
}

/// Histogram CSV of per-plane max, median and min residuals.
pub fn residual_histogram_csv(summaries: &[ResidualSummary]) -> String {
    let mut counts = vec![[0usize; 3]; HISTOGRAM_BINS];
    for s in summaries {
        counts[histogram_bin(s.max)][0] += 1;
        counts[histogram_bin(s.median)][1] += 1;
        counts[histogram_bin(s.min)][2] += 1;
    }
    let (lo, hi) = HISTOGRAM_RANGE;
    let width = (hi - lo) / HISTOGRAM_BINS as f64;
    let mut out = String::from("log10_mm_lo,log10_mm_hi,max,median,min\n");
    for (k, c) in counts.iter().enumerate() {
        let a = lo + width * k as f64;
        let _ = writeln!(out, "{:.1},{:.1},{},{},{}", a, a + width, c[0], c[1], c[2]);
    }
    out
}

struct FilterResult {
    report: crate::ingest::SceneFilterReport,
    supplied: Vec<ResidualSummary>,
    refit: Vec<ResidualSummary>,
}

fn filter_one(cfg: &RunConfig, sd: &SceneDir) -> Result<FilterResult> {
    let scene = load_scene(sd.scene_path())?;
    let supplied = plane_residuals(&scene);
    let outcome = filter_scene(scene, cfg.thresholds.max_plane_residual_mm);
    let refit = if outcome.report.accepted { plane_residuals(&outcome.scene) } else { Vec::new() };
    Ok(FilterResult { report: outcome.report, supplied, refit })
}

fn plane_residuals(scene: &SceneGraph) -> Vec<ResidualSummary> {
    scene
        .planes()
        .iter()
        .filter_map(|p| residual_summary(&p.params, &scene.positions(&p.junction_ids(scene))).ok())
        .collect()
}

/// Checks every scene, writing `filter/<scene>.json`, `filter_summary.csv`
/// and residual histograms for the supplied and the refit plane parameters.
pub fn cmd_filter(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let results = run_scenes(cfg, |sd| filter_one(cfg, sd))?;
    let mut errors = Vec::new();
    let mut summary = String::from("scene_id,accepted,reason,max_residual_mm,plane_id\n");
    let (mut supplied, mut refit) = (Vec::new(), Vec::new());
    let mut accepted = 0;
    for (sd, r) in &results {
        match r {
            Ok(r) => {
                let rep = &r.report;
                accepted += rep.accepted as usize;
                let reason = serde_json::to_value(rep.reason).expect("reason serializes");
                let _ = writeln!(
                    summary,
                    "{},{},{},{},{}",
                    rep.scene_id,
                    rep.accepted,
                    reason.as_str().unwrap_or_default(),
                    rep.max_residual_mm,
                    rep.plane_id.map(|p| p.to_string()).unwrap_or_default()
                );
                write_file(&cfg.output.join("filter").join(format!("{}.json", sd.name)), &to_json(rep))?;
                supplied.extend_from_slice(&r.supplied);
                refit.extend_from_slice(&r.refit);
            }
            Err(e) => errors.push(format!("{}: {e}", sd.name)),
        }
    }
    write_file(&cfg.output.join("filter_summary.csv"), &summary)?;
    write_file(&cfg.output.join("residuals_supplied.csv"), &residual_histogram_csv(&supplied))?;
    write_file(&cfg.output.join("residuals_refit.csv"), &residual_histogram_csv(&refit))?;
    write_errors(cfg, "filter", &errors)?;
    info!("filter: {accepted} of {} scenes accepted", results.len());
    Ok(RunSummary { items: results.len(), errors: errors.len() })
}

// ---------------------------------------------------------------------------
// doors

fn scene_label_map(cfg: &RunConfig, sd: &SceneDir) -> Result<Option<LabelMap>> {
    for p in [sd.dir.join("label_map.json"), cfg.input.join("label_map.json")] {
        if p.is_file() {
            return load_label_map(&p).map(Some);
        }
    }
    Ok(None)
}

/// Views of a scene and the masks of those that reference one. Views that
/// fail to load are reported as `(view file stem, error)`.
#[allow(clippy::type_complexity)]
fn load_views(
    cfg: &RunConfig,
    sd: &SceneDir,
) -> Result<(Vec<CameraView>, Vec<(usize, SemanticMask)>, Vec<(String, Error)>)> {
    let label_map = scene_label_map(cfg, sd)?;
    let mut views = Vec::new();
    let mut masks = Vec::new();
    let mut failures = Vec::new();
    for path in sd.view_paths()? {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let view = match load_view(&path) {
            Ok(v) => v,
            Err(e) => {
                failures.push((stem, e));
                continue;
            }
        };
        if let Some(rel) = &view.mask_path {
            let mask = match &label_map {
                Some(map) => load_mask(sd.dir.join(rel), map).and_then(|m| m.check_matches(&view).map(|_| m)),
                None => Err(Error::Config(format!("mask {rel} given but no label_map.json found"))),
            };
            match mask {
                Ok(m) => masks.push((views.len(), m)),
                Err(e) => failures.push((format!("{stem} (mask)"), e)),
            }
        }
        views.push(view);
    }
    Ok((views, masks, failures))
}

/// Door states of one scene. Doors whose polygon cannot be sampled are
/// reported as errors and left out, which makes them closed downstream.
fn door_states(
    cfg: &RunConfig,
    scene: &SceneGraph,
    views: &[CameraView],
    masks: &[(usize, SemanticMask)],
    errors: &mut Vec<String>,
) -> Vec<DoorStateReport> {
    let pairs: Vec<(&CameraView, &SemanticMask)> = masks.iter().map(|(i, m)| (&views[*i], m)).collect();
    let mut doors: Vec<_> = scene
        .planes()
        .iter()
        .filter(|p| p.label == PlaneLabel::Door && p.parent_wall.is_some())
        .collect();
    doors.sort_by_key(|p| p.plane_id);
    let mut out = Vec::new();
    for door in doors {
        let seed = derive_seed(cfg.seed, &scene.scene_id, door.plane_id);
        let result = sample_polygon_uniform(&scene.positions(&door.outer_boundary), cfg.thresholds.door_samples, seed)
            .and_then(|s| door_closed_ratio(door.plane_id, &s, &pairs, cfg.thresholds.door_closed_ratio));
        match result {
            Ok(r) => out.push(r),
            Err(e) => errors.push(format!("{}: door {}: {e}", scene.scene_id, door.plane_id)),
        }
    }
    out
}

#[derive(Serialize)]
struct DoorFile<'a> {
    scene_id: &'a str,
    doors: &'a [DoorStateReport],
}

fn doors_one(cfg: &RunConfig, sd: &SceneDir) -> SceneOutput {
    let mut out = SceneOutput::default();
    let scene = match load_scene(sd.scene_path()) {
        Ok(s) => s,
        Err(e) => {
            out.errors.push(format!("{}: {e}", sd.name));
            return out;
        }
    };
    let (views, masks) = match load_views(cfg, sd) {
        Ok((v, m, failures)) => {
            out.errors.extend(failures.into_iter().map(|(id, e)| format!("{}/{id}: {e}", sd.name)));
            (v, m)
        }
        Err(e) => {
            out.errors.push(format!("{}: {e}", sd.name));
            (Vec::new(), Vec::new())
        }
    };
    let states = door_states(cfg, &scene, &views, &masks, &mut out.errors);
    out.files.push((
        PathBuf::from("doors").join(format!("{}.json", sd.name)),
        to_json(&DoorFile { scene_id: &scene.scene_id, doors: &states }),
    ));
    out
}

fn finish(cfg: &RunConfig, command: &str, results: Vec<(SceneDir, SceneOutput)>) -> Result<RunSummary> {
    let mut errors = Vec::new();
    let mut items = 0;
    for (_, out) in results {
        for (rel, text) in &out.files {
            write_file(&cfg.output.join(rel), text)?;
        }
        items += out.files.len();
        errors.extend(out.errors);
    }
    write_errors(cfg, command, &errors)?;
    Ok(RunSummary { items, errors: errors.len() })
}

/// Classifies every door of every scene, writing `doors/<scene>.json`.
pub fn cmd_doors(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let results = run_scenes(cfg, |sd| doors_one(cfg, sd))?;
    finish(cfg, "doors", results)
}

// ---------------------------------------------------------------------------
// generate

/// Occurrence counts of line and junction labels over annotated views.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelStats {
    pub lines: [usize; 6],
    pub junctions: [usize; 3],
}

impl LabelStats {
    pub fn add(&mut self, view: &AnnotatedView) {
        for s in &view.segments {
            self.lines[s.label.index()] += 1;
        }
        for j in &view.junctions {
            self.junctions[j.label.index()] += 1;
        }
    }

    pub fn merge(&mut self, other: &LabelStats) {
        for (a, b) in self.lines.iter_mut().zip(other.lines) {
            *a += b;
        }
        for (a, b) in self.junctions.iter_mut().zip(other.junctions) {
            *a += b;
        }
    }

    /// CSV with counts and percentages per label.
    pub fn to_csv(&self) -> String {
        let pct = |n: usize, total: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        let line_total: usize = self.lines.iter().sum();
        let junction_total: usize = self.junctions.iter().sum();
        let mut out = String::from("kind,label,count,percent\n");
        for l in LineLabel::SEMANTIC {
            let n = self.lines[l.index()];
            let _ = writeln!(out, "line,{l},{n},{:.4}", pct(n, line_total));
        }
        for l in JunctionLabel::SEMANTIC {
            let n = self.junctions[l.index()];
            let _ = writeln!(out, "junction,{l},{n},{:.4}", pct(n, junction_total));
        }
        out
    }
}

fn generate_one(cfg: &RunConfig, sd: &SceneDir) -> (SceneOutput, LabelStats) {
    let mut out = SceneOutput::default();
    let mut stats = LabelStats::default();
    let view_paths = sd.view_paths().unwrap_or_default();
    let fail_all = |out: &mut SceneOutput, msg: String| {
        if view_paths.is_empty() {
            out.errors.push(format!("{}: {msg}", sd.name));
        }
        for p in &view_paths {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy();
            out.errors.push(format!("{}/{stem}: {msg}", sd.name));
        }
    };

    let scene = match load_scene(sd.scene_path()) {
        Ok(s) => s,
        Err(e) => {
            fail_all(&mut out, e.to_string());
            return (out, stats);
        }
    };
    let filtered = filter_scene(scene, cfg.thresholds.max_plane_residual_mm);
    if !filtered.report.accepted {
        let reason = serde_json::to_value(filtered.report.reason).expect("reason serializes");
        fail_all(&mut out, format!("scene rejected by filter ({})", reason.as_str().unwrap_or_default()));
        return (out, stats);
    }
    let scene = filtered.scene;

    let (views, masks) = match load_views(cfg, sd) {
        Ok((v, m, failures)) => {
            out.errors.extend(failures.into_iter().map(|(id, e)| format!("{}/{id}: {e}", sd.name)));
            (v, m)
        }
        Err(e) => {
            fail_all(&mut out, e.to_string());
            return (out, stats);
        }
    };
    let states = door_states(cfg, &scene, &views, &masks, &mut out.errors);

    for view in &views {
        match visible_segments(&scene, view, &states, &cfg.tolerances) {
            Ok(annotation) => {
                stats.add(&annotation);
                out.files.push((
                    PathBuf::from("annotations").join(&sd.name).join(format!("{}.json", view.view_id)),
                    to_json(&annotation),
                ));
            }
            Err(e) => out.errors.push(format!("{}/{}: {e}", sd.name, view.view_id)),
        }
    }
    (out, stats)
}

/// Annotates every view of every accepted scene, writing
/// `annotations/<scene>/<view>.json` and `generate_stats.csv`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let results = run_scenes(cfg, |sd| generate_one(cfg, sd))?;
    let mut stats = LabelStats::default();
    let mut outputs = Vec::with_capacity(results.len());
    for (sd, (out, s)) in results {
        stats.merge(&s);
        outputs.push((sd, out));
    }
    write_file(&cfg.output.join("generate_stats.csv"), &stats.to_csv())?;
    let summary = finish(cfg, "generate", outputs)?;
    info!("generate: {} annotations, {} errors", summary.items, summary.errors);
    Ok(summary)
}

// ---------------------------------------------------------------------------
// eval

/// JSON files under `root`, as sorted paths relative to it.
fn relative_json_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|x| x == "json") {
                out.push(path.strip_prefix(root).expect("walk stays under root").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn load_annotation(path: &Path) -> Result<AnnotatedView> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

fn write_report(cfg: &RunConfig, name: &str, report: &EvalReport) -> Result<()> {
    write_file(&cfg.output.join(format!("{name}.json")), &to_json(report))?;
    for (stem, csv) in report.pr_curves() {
        write_file(&cfg.output.join("pr").join(format!("{stem}.csv")), &csv)?;
    }
    Ok(())
}

/// Scores predictions against ground truth, pairing files by relative path.
/// Writes `eval_report.json`, optionally `eval_nonsemantic.json`, and PR
/// curves under `pr/`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let gt_root = cfg.gt.clone().unwrap_or_else(|| cfg.input.join("gt"));
    let pred_root = cfg.pred.clone().unwrap_or_else(|| cfg.input.join("pred"));
    for root in [&gt_root, &pred_root] {
        if !root.is_dir() {
            return Err(Error::Config(format!("directory {} does not exist", root.display())));
        }
    }
    let gt_files = relative_json_files(&gt_root)?;
    let pred_files = relative_json_files(&pred_root)?;

    let missing: Vec<&PathBuf> = gt_files.iter().filter(|p| !pred_root.join(p).is_file()).collect();
    let extra: Vec<&PathBuf> = pred_files.iter().filter(|p| !gt_root.join(p).is_file()).collect();
    let mut notes = Vec::new();
    if !missing.is_empty() {
        let list = missing.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
        if !cfg.allow_missing {
            return Err(Error::MissingViews(format!("no prediction for {list}")));
        }
        warn!("skipping {} views without predictions", missing.len());
        notes.push(format!("views without predictions were excluded: {list}"));
    }
    for p in &extra {
        notes.push(format!("prediction without ground truth ignored: {}", p.display()));
    }

    let pool = cfg.pool()?;
    let pairs: Vec<Result<(AnnotatedView, PredictionFile)>> = pool.install(|| {
        gt_files
            .par_iter()
            .filter(|p| pred_root.join(p).is_file())
            .map(|p| Ok((load_annotation(&gt_root.join(p))?, PredictionFile::load(pred_root.join(p))?)))
            .collect()
    });
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut opts = EvalOptions {
        betas: cfg.thresholds.betas.clone(),
        thetas: cfg.thresholds.thetas.clone(),
        tau: cfg.thresholds.tau,
        nms_gamma: cfg.nms.then_some(cfg.thresholds.gamma),
        semantic: true,
    };
    let mut report = evaluate(&pairs, &opts)?;
    report.warnings.extend(notes.iter().cloned());
    write_report(cfg, "eval_report", &report)?;
    if cfg.nonsemantic {
        opts.semantic = false;
        let mut plain = evaluate(&pairs, &opts)?;
        plain.warnings.extend(notes.iter().cloned());
        write_report(cfg, "eval_nonsemantic", &plain)?;
    }
    write_errors(cfg, "eval", &[])?;
    info!("eval: {} views, msAP {:.1}, mjAP {:.1}", pairs.len(), report.lines.mean, report.junctions.mean);
    Ok(RunSummary { items: pairs.len(), errors: 0 })
}

// ---------------------------------------------------------------------------
// stats

/// Per-scene counts of junctions, lines by label, planes by label and views.
pub fn cmd_stats(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let results = run_scenes(cfg, |sd| -> Result<String> {
        let scene = load_scene(sd.scene_path())?;
        let mut lines = [0usize; 6];
        for l in scene.lines() {
            lines[line_label_for(l, &scene)?.index()] += 1;
        }
        let planes: Vec<usize> = PlaneLabel::ALL
            .iter()
            .map(|l| scene.planes().iter().filter(|p| p.label == *l).count())
            .collect();
        let mut row = format!("{},{},{}", sd.name, sd.view_paths()?.len(), scene.junctions().len());
        for l in LineLabel::SEMANTIC {
            let _ = write!(row, ",{}", lines[l.index()]);
        }
        for n in planes {
            let _ = write!(row, ",{n}");
        }
        Ok(row)
    })?;
    let mut csv = String::from("scene_id,views,junctions");
    for l in LineLabel::SEMANTIC {
        let _ = write!(csv, ",lines_{l}");
    }
    for l in PlaneLabel::ALL {
        let _ = write!(csv, ",planes_{l}");
    }
    csv.push('\n');
    let mut errors = Vec::new();
    for (sd, r) in &results {
        match r {
            Ok(row) => {
                csv.push_str(row);
                csv.push('\n');
            }
            Err(e) => errors.push(format!("{}: {e}", sd.name)),
        }
    }
    write_file(&cfg.output.join("scene_stats.csv"), &csv)?;
    write_errors(cfg, "stats", &errors)?;
    Ok(RunSummary { items: results.len(), errors: errors.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        assert_eq!(histogram_bin(0.0), 0);
        assert_eq!(histogram_bin(1e-9), 0);
        assert_eq!(histogram_bin(1e-8), 0);
        assert_eq!(histogram_bin(1.0), 40);
        assert_eq!(histogram_bin(99.0), 49);
        assert_eq!(histogram_bin(1e5), 49);
    }

    #[test]
    fn stats_percentages() {
        let s = LabelStats { lines: [0, 3, 1, 0, 0, 0], junctions: [0, 1, 3] };
        let csv = s.to_csv();
        assert!(csv.contains("line,wall,3,75.0000"));
        assert!(csv.contains("junction,proper,3,75.0000"));
    }

    #[test]
    fn config_validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(dir.path(), dir.path().join("out"));
        cfg.validate().unwrap();
        cfg.workers = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = RunConfig::new(dir.path().join("missing"), dir.path());
        assert!(cfg.validate().is_err());
        cfg.input = dir.path().to_path_buf();
        cfg.thresholds.betas = vec![];
        assert!(cfg.validate().is_err());
    }
}
