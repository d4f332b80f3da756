//! Structural and junction average precision, line NMS and the aggregate
//! tables built from them. All geometry here is in the 128x128 evaluation
//! frame.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::EVAL_FRAME;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scene::{JunctionLabel, LineLabel};
use crate::visibility::AnnotatedView;
use crate::wireframe::{match_to_junctions, to_nonsemantic, PredictionFile, Wireframe2D};

/// Sum of squared endpoint distances, minimised over the two ways of
/// pairing the endpoints.
pub fn segment_delta(a: &[Vec2; 2], b: &[Vec2; 2]) -> f64 {
    let direct = (a[0] - b[0]).norm_squared() + (a[1] - b[1]).norm_squared();
    let swapped = (a[0] - b[1]).norm_squared() + (a[1] - b[0]).norm_squared();
    direct.min(swapped)
}

/// A scored segment in one view. `label` is `None` in label-free evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDetection {
    pub endpoints: [Vec2; 2],
    pub label: Option<LineLabel>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionDetection {
    pub position: Vec2,
    pub label: Option<JunctionLabel>,
    pub score: f64,
}

/// `true` when detection `j` outranks `i`: higher score, or the same score
/// and earlier in the input.
fn outranks(sj: f64, j: usize, si: f64, i: usize) -> bool {
    sj > si || (sj == si && j < i)
}

/// Keep-mask of single-pass line NMS. Segment `i` is removed when some other
/// segment with the same label outranks it and lies within `gamma^2` of it.
pub fn nms_mask(segments: &[SegmentDetection], gamma: f64) -> Vec<bool> {
    let radius = gamma * gamma;
    (0..segments.len())
        .map(|i| {
            let si = &segments[i];
            !segments.iter().enumerate().any(|(j, sj)| {
                j != i
                    && sj.label == si.label
                    && outranks(sj.score, j, si.score, i)
                    && segment_delta(&sj.endpoints, &si.endpoints) < radius
            })
        })
        .collect()
}

pub fn line_nms(segments: &[SegmentDetection], gamma: f64) -> Vec<SegmentDetection> {
    segments
        .iter()
        .zip(nms_mask(segments, gamma))
        .filter(|(_, keep)| *keep)
        .map(|(s, _)| s.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    /// Area under the interpolated precision-recall curve, in percent.
    pub ap: f64,
    pub gt: usize,
    pub predictions: usize,
    pub tp: usize,
    pub fp: usize,
    /// Set when there was no ground truth; `ap` is then 0.
    pub zero_gt: bool,
    pub pr_points: Vec<PrPoint>,
}

/// AP of a ranked list of `(score, is_true_positive)` hits against `n_gt`
/// ground-truth items. Precision is interpolated with its monotone envelope
/// (the best precision at any equal or higher recall).
pub fn average_precision(ranked: &[(f64, bool)], n_gt: usize) -> ApResult {
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(ranked.len());
    for (i, &(score, hit)) in ranked.iter().enumerate() {
        tp += hit as usize;
        let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
        points.push(PrPoint { score, recall, precision: tp as f64 / (i + 1) as f64 });
    }
    let fp = ranked.len() - tp;
    if n_gt == 0 {
        return ApResult { ap: 0.0, gt: 0, predictions: ranked.len(), tp, fp, zero_gt: true, pr_points: points };
    }

    let mut envelope = vec![0.0; points.len()];
    let mut best = 0.0f64;
    for i in (0..points.len()).rev() {
        best = best.max(points[i].precision);
        envelope[i] = best;
    }
    let precision_sum = ranked
        .iter()
        .zip(&envelope)
        .filter(|((_, hit), _)| *hit)
        .fold(0.0, |acc, (_, p)| acc + p);
    ApResult { ap: 100.0 * precision_sum / n_gt as f64, gt: n_gt, predictions: ranked.len(), tp, fp, zero_gt: false, pr_points: points }
}

/// Greedy matching in global score order. Each prediction `(view, item,
/// score)` takes the nearest still-unmatched ground truth of its view and is
/// a true positive when that distance is within `threshold`.
pub fn greedy_sweep<T>(
    predictions: &[(usize, T, f64)],
    ground_truth: &[(usize, T)],
    distance: impl Fn(&T, &T) -> f64,
    threshold: f64,
) -> ApResult {
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[b].2.total_cmp(&predictions[a].2).then(a.cmp(&b)));

    let mut pools: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, (view, _)) in ground_truth.iter().enumerate() {
        pools.entry(*view).or_default().push(i);
    }
    let mut matched = vec![false; ground_truth.len()];
    let mut ranked = Vec::with_capacity(predictions.len());
    for i in order {
        let (view, item, score) = &predictions[i];
        let mut best: Option<(usize, f64)> = None;
        for &g in pools.get(view).map(Vec::as_slice).unwrap_or_default() {
            if matched[g] {
                continue;
            }
            let d = distance(item, &ground_truth[g].1);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((g, d));
            }
        }
        let hit = match best {
            Some((g, d)) if d <= threshold => {
                matched[g] = true;
                true
            }
            _ => false,
        };
        ranked.push((*score, hit));
    }
    average_precision(&ranked, ground_truth.len())
}

/// Ground truth and detections of one view, already in the evaluation frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalView {
    pub view_id: String,
    pub gt_segments: Vec<SegmentDetection>,
    pub gt_junctions: Vec<JunctionDetection>,
    pub segments: Vec<SegmentDetection>,
    pub junctions: Vec<JunctionDetection>,
}

/// Structural AP for one label (or all segments when `label` is `None`).
pub fn sap(views: &[EvalView], beta: f64, label: Option<LineLabel>) -> ApResult {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for (v, view) in views.iter().enumerate() {
        preds.extend(view.segments.iter().filter(|s| s.label == label).map(|s| (v, s.endpoints, s.score)));
        gts.extend(view.gt_segments.iter().filter(|s| s.label == label).map(|s| (v, s.endpoints)));
    }
    greedy_sweep(&preds, &gts, segment_delta, beta)
}

/// Junction AP for one label (or all junctions when `label` is `None`).
pub fn jap(views: &[EvalView], theta: f64, label: Option<JunctionLabel>) -> ApResult {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for (v, view) in views.iter().enumerate() {
        preds.extend(view.junctions.iter().filter(|j| j.label == label).map(|j| (v, j.position, j.score)));
        gts.extend(view.gt_junctions.iter().filter(|j| j.label == label).map(|j| (v, j.position)));
    }
    greedy_sweep(&preds, &gts, |a: &Vec2, b: &Vec2| (a - b).norm(), theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    #[serde(flatten)]
    pub result: ApResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: String,
    pub thresholds: Vec<ThresholdResult>,
    /// Mean AP over thresholds.
    pub ap_mean: f64,
}

/// One AP table: per-label AP at each threshold plus its means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApTable {
    pub thresholds: Vec<f64>,
    pub per_label: Vec<LabelReport>,
    /// Mean over labels at each threshold.
    pub mean_per_threshold: Vec<f64>,
    /// Mean over labels of the per-label threshold means.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_per_threshold: Vec<f64>,
    pub per_label_mean: Vec<f64>,
    pub mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Aggregates a `labels x thresholds` grid of AP values.
pub fn msap(grid: &[Vec<f64>]) -> Aggregate {
    let n_thresholds = grid.first().map_or(0, Vec::len);
    let per_label_mean: Vec<f64> = grid.iter().map(|row| mean(row)).collect();
    let mean_per_threshold = (0..n_thresholds)
        .map(|k| mean(&grid.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect();
    Aggregate { mean: mean(&per_label_mean), per_label_mean, mean_per_threshold }
}

/// Labels without ground truth keep their per-label entry but are left out
/// of the means.
fn build_table(labels: Vec<(String, Vec<ThresholdResult>)>, thresholds: &[f64]) -> ApTable {
    let has_gt = |r: &[ThresholdResult]| r.iter().any(|t| !t.result.zero_gt);
    let grid: Vec<Vec<f64>> = labels
        .iter()
        .filter(|(_, r)| has_gt(r))
        .map(|(_, r)| r.iter().map(|t| t.result.ap).collect())
        .collect();
    let agg = msap(&grid);
    let mut means = agg.per_label_mean.iter();
    ApTable {
        thresholds: thresholds.to_vec(),
        per_label: labels
            .into_iter()
            .map(|(label, thresholds)| {
                let ap_mean = if has_gt(&thresholds) { *means.next().expect("one mean per scored label") } else { 0.0 };
                LabelReport { label, thresholds, ap_mean }
            })
            .collect(),
        mean_per_threshold: if grid.is_empty() { vec![0.0; thresholds.len()] } else { agg.mean_per_threshold },
        mean: agg.mean,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub betas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub tau: f64,
    /// NMS radius, or `None` to skip NMS.
    pub nms_gamma: Option<f64>,
    pub semantic: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        let t = crate::config::Thresholds::default();
        Self { betas: t.betas, thetas: t.thetas, tau: t.tau, nms_gamma: None, semantic: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub views: usize,
    pub gt_segments: usize,
    pub gt_junctions: usize,
    pub proposals: usize,
    pub unmatched_proposals: usize,
    pub merged_proposals: usize,
    pub nms_removed: usize,
    pub predictions: usize,
    pub predicted_junctions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub lines: ApTable,
    pub junctions: ApTable,
    pub counts: EvalCounts,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// PR curves as `(file stem, csv text)`, one per label and threshold.
    pub fn pr_curves(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (kind, table) in [("sap", &self.lines), ("jap", &self.junctions)] {
            for lr in &table.per_label {
                for t in &lr.thresholds {
                    out.push((format!("{}_{}_{}_{}", self.mode, kind, lr.label, t.threshold), pr_csv(&t.result.pr_points)));
                }
            }
        }
        out
    }
}

pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut s = String::from("score,recall,precision\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.score, p.recall, p.precision));
    }
    s
}

/// Highest-scoring label among `labels`, first in order on ties.
fn argmax<L: Copy>(labels: &[L], score: impl Fn(L) -> f64) -> (L, f64) {
    let mut best = (labels[0], score(labels[0]));
    for &l in &labels[1..] {
        let s = score(l);
        if s > best.1 {
            best = (l, s);
        }
    }
    best
}

/// Rescales a ground-truth view and a prediction into the evaluation frame,
/// matches proposals to junctions and assigns labels and scores.
pub fn prepare_view(gt: &AnnotatedView, pred: &PredictionFile, opts: &EvalOptions, counts: &mut EvalCounts) -> Result<EvalView> {
    if gt.view_id != pred.view_id {
        return Err(Error::MissingViews(format!(
            "prediction for {:?} paired with ground truth {:?}",
            pred.view_id, gt.view_id
        )));
    }
    let truth = Wireframe2D::from_annotation(gt).scaled(EVAL_FRAME / gt.width as f64, EVAL_FRAME / gt.height as f64);
    let (junctions, proposals) = pred.in_eval_frame();
    let matched = match_to_junctions(&proposals, &junctions, opts.tau);
    counts.views += 1;
    counts.gt_segments += gt.segments.len();
    counts.gt_junctions += gt.junctions.len();
    counts.proposals += proposals.len();
    counts.unmatched_proposals += matched.dropped;
    counts.merged_proposals += matched.merged;
    let wf = matched.wireframe;

    let mut view = EvalView { view_id: gt.view_id.clone(), ..Default::default() };
    if opts.semantic {
        for s in &truth.segments {
            let (label, _) = argmax(&LineLabel::SEMANTIC, |l| s.score(l));
            view.gt_segments.push(SegmentDetection { endpoints: truth.endpoints(s), label: Some(label), score: 1.0 });
        }
        for j in &truth.junctions {
            let (label, _) = argmax(&JunctionLabel::SEMANTIC, |l| j.score(l));
            view.gt_junctions.push(JunctionDetection { position: j.position, label: Some(label), score: 1.0 });
        }
        for s in &wf.segments {
            let (label, score) = argmax(&LineLabel::SEMANTIC, |l| s.score(l));
            view.segments.push(SegmentDetection { endpoints: wf.endpoints(s), label: Some(label), score });
        }
        for j in &wf.junctions {
            let (label, score) = argmax(&JunctionLabel::SEMANTIC, |l| j.score(l));
            view.junctions.push(JunctionDetection { position: j.position, label: Some(label), score });
        }
    } else {
        for s in &truth.segments {
            view.gt_segments.push(SegmentDetection { endpoints: truth.endpoints(s), label: None, score: 1.0 });
        }
        for j in &truth.junctions {
            view.gt_junctions.push(JunctionDetection { position: j.position, label: None, score: 1.0 });
        }
        let plain = to_nonsemantic(&wf);
        for s in &plain.segments {
            let endpoints = [plain.junctions[s.junctions[0]].position, plain.junctions[s.junctions[1]].position];
            view.segments.push(SegmentDetection { endpoints, label: None, score: s.score });
        }
        for j in &plain.junctions {
            view.junctions.push(JunctionDetection { position: j.position, label: None, score: j.score });
        }
    }

    if let Some(gamma) = opts.nms_gamma {
        let before = view.segments.len();
        view.segments = line_nms(&view.segments, gamma);
        counts.nms_removed += before - view.segments.len();
    }
    counts.predictions += view.segments.len();
    counts.predicted_junctions += view.junctions.len();
    Ok(view)
}

/// Computes sAP and jAP tables over already prepared views.
pub fn evaluate_views(views: &[EvalView], opts: &EvalOptions, counts: EvalCounts) -> EvalReport {
    let line_labels: Vec<Option<LineLabel>> =
        if opts.semantic { LineLabel::SEMANTIC.iter().map(|l| Some(*l)).collect() } else { vec![None] };
    let junction_labels: Vec<Option<JunctionLabel>> =
        if opts.semantic { JunctionLabel::SEMANTIC.iter().map(|l| Some(*l)).collect() } else { vec![None] };
    let name = |l: Option<&str>| l.unwrap_or("all").to_string();

    let mut warnings = Vec::new();
    let mut note_zero_gt = |kind: &str, label: &str, r: &ApResult| {
        if r.zero_gt {
            let w = format!("no ground truth for {kind} label {label}; AP reported as 0 and excluded from the means");
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    };

    let mut lines = Vec::new();
    for l in &line_labels {
        let label = name(l.map(|l| l.as_str()));
        let results: Vec<ThresholdResult> = opts
            .betas
            .iter()
            .map(|&b| ThresholdResult { threshold: b, result: sap(views, b, *l) })
            .collect();
        results.iter().for_each(|r| note_zero_gt("line", &label, &r.result));
        lines.push((label, results));
    }
    let mut junctions = Vec::new();
    for l in &junction_labels {
        let label = name(l.map(|l| l.as_str()));
        let results: Vec<ThresholdResult> = opts
            .thetas
            .iter()
            .map(|&t| ThresholdResult { threshold: t, result: jap(views, t, *l) })
            .collect();
        results.iter().for_each(|r| note_zero_gt("junction", &label, &r.result));
        junctions.push((label, results));
    }

    EvalReport {
        mode: if opts.semantic { "semantic" } else { "nonsemantic" }.to_string(),
        lines: build_table(lines, &opts.betas),
        junctions: build_table(junctions, &opts.thetas),
        counts,
        warnings,
    }
}

/// Full evaluation of paired ground-truth and prediction views.
pub fn evaluate(pairs: &[(AnnotatedView, PredictionFile)], opts: &EvalOptions) -> Result<EvalReport> {
    let mut counts = EvalCounts::default();
    let views = pairs
        .iter()
        .map(|(gt, pred)| prepare_view(gt, pred, opts, &mut counts))
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate_views(&views, opts, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(a: (f64, f64), b: (f64, f64), label: Option<LineLabel>, score: f64) -> SegmentDetection {
        SegmentDetection { endpoints: [Vec2::new(a.0, a.1), Vec2::new(b.0, b.1)], label, score }
    }

    #[test]
    fn delta_examples() {
        let a = [Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)];
        assert_eq!(segment_delta(&a, &a), 0.0);
        let b = [Vec2::new(1.0, 0.0), Vec2::new(10.0, 2.0)];
        assert_eq!(segment_delta(&a, &b), 5.0);
        assert_eq!(segment_delta(&a, &[a[1], a[0]]), 0.0);
    }

    #[test]
    fn nms_examples() {
        let wall = Some(LineLabel::Wall);
        let s = vec![seg((0.0, 0.0), (10.0, 0.0), wall, 0.8), seg((0.0, 0.0), (10.0, 0.0), wall, 0.9)];
        assert_eq!(nms_mask(&s, 3.0), vec![false, true]);

        let s = vec![
            seg((0.0, 0.0), (10.0, 0.0), wall, 0.8),
            seg((0.0, 0.0), (10.0, 0.0), Some(LineLabel::Door), 0.9),
        ];
        assert_eq!(nms_mask(&s, 3.0), vec![true, true]);

        // delta exactly 9
        let s = vec![seg((0.0, 0.0), (10.0, 0.0), wall, 0.9), seg((3.0, 0.0), (10.0, 0.0), wall, 0.8)];
        assert_eq!(nms_mask(&s, 3.0), vec![true, true]);

        // equal scores: the earlier one survives
        let s = vec![seg((0.0, 0.0), (10.0, 0.0), wall, 0.5), seg((0.0, 1.0), (10.0, 0.0), wall, 0.5)];
        assert_eq!(nms_mask(&s, 3.0), vec![true, false]);
    }

    #[test]
    fn ap_hand_cases() {
        assert_eq!(average_precision(&[(1.0, true), (1.0, true)], 2).ap, 100.0);
        assert_eq!(average_precision(&[(0.9, true)], 2).ap, 50.0);
        let r = average_precision(&[], 3);
        assert_eq!(r.ap, 0.0);
        let r = average_precision(&[(0.5, false)], 0);
        assert!(r.zero_gt);
        assert_eq!(r.ap, 0.0);
        // FP first then TP: precision 1/2 at recall 1
        assert_eq!(average_precision(&[(0.9, false), (0.8, true)], 1).ap, 50.0);
        // envelope lifts an early dip: F T T with 2 GT -> precisions 0, .5, .667
        let r = average_precision(&[(0.9, false), (0.8, true), (0.7, true)], 2);
        assert!((r.ap - 100.0 * (0.5 * 2.0 / 3.0 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn sweep_takes_each_gt_once() {
        let gts = vec![(0, 0.0)];
        let preds = vec![(0, 0.0, 0.9), (0, 0.1, 0.8)];
        let r = greedy_sweep(&preds, &gts, |a: &f64, b: &f64| (a - b).abs(), 1.0);
        assert_eq!((r.tp, r.fp), (1, 1));
        // other views never match
        let preds = vec![(1, 0.0, 0.9)];
        let r = greedy_sweep(&preds, &gts, |a: &f64, b: &f64| (a - b).abs(), 1.0);
        assert_eq!(r.tp, 0);
    }

    #[test]
    fn aggregation() {
        let agg = msap(&[vec![35.5, 42.4, 46.5]]);
        assert_eq!((agg.per_label_mean[0] * 10.0).round() / 10.0, 41.5);
        let agg = msap(&[vec![30.0, 40.0, 50.0], vec![50.0, 50.0, 50.0]]);
        assert_eq!(agg.per_label_mean, vec![40.0, 50.0]);
        assert_eq!(agg.mean_per_threshold, vec![40.0, 45.0, 50.0]);
        assert_eq!(agg.mean, 45.0);
    }

    #[test]
    fn labels_without_ground_truth_leave_the_means() {
        let row = |ap: f64, n_gt: usize| {
            let mut result = average_precision(&[], n_gt);
            result.ap = ap;
            vec![ThresholdResult { threshold: 5.0, result }]
        };
        let t = build_table(vec![("wall".into(), row(80.0, 3)), ("door".into(), row(0.0, 0))], &[5.0]);
        assert_eq!(t.mean, 80.0);
        assert_eq!(t.mean_per_threshold, vec![80.0]);
        assert_eq!(t.per_label[1].ap_mean, 0.0);
        let t = build_table(vec![("door".into(), row(0.0, 0))], &[5.0]);
        assert_eq!((t.mean, t.mean_per_threshold), (0.0, vec![0.0]));
    }

    #[test]
    fn argmax_ignores_invalid_and_breaks_ties_by_order() {
        let scores = [0.9, 0.3, 0.3, 0.1, 0.0, 0.0];
        let (l, s) = argmax(&LineLabel::SEMANTIC, |l| scores[l.index()]);
        assert_eq!((l, s), (LineLabel::Wall, 0.3));
    }
}
