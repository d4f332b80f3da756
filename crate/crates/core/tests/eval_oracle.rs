use std::fs;
use std::path::PathBuf;
use std::process::Command;

use srw_core::cli::{histogram_bin, residual_histogram_csv, HISTOGRAM_BINS};
use srw_core::geometry::{ResidualSummary, Vec2};
use srw_core::metrics::{prepare_view, EvalCounts, EvalOptions, EvalReport, EvalView};
use srw_core::scene::{JunctionLabel, LineLabel};
use srw_core::visibility::AnnotatedView;
use srw_core::wireframe::PredictionFile;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_pairs() -> Vec<(AnnotatedView, PredictionFile)> {
    let gt_dir = fixtures().join("eval/gt/box_room");
    let mut names: Vec<_> = fs::read_dir(&gt_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    names
        .iter()
        .map(|n| {
            let gt = serde_json::from_str(&fs::read_to_string(gt_dir.join(n)).unwrap()).unwrap();
            let pred = PredictionFile::load(fixtures().join("eval/pred/box_room").join(n)).unwrap();
            (gt, pred)
        })
        .collect()
}

/// AP recomputed from scratch on every score prefix: each prefix is matched
/// greedily in score order against the per-view ground truth, and precision
/// at each recall gain is the best precision of any longer prefix.
fn prefix_oracle<T: Copy>(preds: &[(usize, T, f64)], gts: &[(usize, T)], dist: impl Fn(T, T) -> f64, thr: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].2.total_cmp(&preds[a].2).then(a.cmp(&b)));
    let tp_at = |k: usize| {
        let mut used = vec![false; gts.len()];
        let mut tp = 0usize;
        for &i in &order[..k] {
            let (view, item, _) = preds[i];
            let best = (0..gts.len())
                .filter(|&g| !used[g] && gts[g].0 == view)
                .map(|g| (g, dist(item, gts[g].1)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((g, d)) = best {
                if d <= thr {
                    used[g] = true;
                    tp += 1;
                }
            }
        }
        tp
    };
    let tps: Vec<usize> = (0..=order.len()).map(tp_at).collect();
    let mut sum = 0.0;
    for k in 1..tps.len() {
        if tps[k] > tps[k - 1] {
            sum += (k..tps.len()).map(|j| tps[j] as f64 / j as f64).fold(0.0, f64::max);
        }
    }
    100.0 * sum / gts.len() as f64
}

fn delta(a: [Vec2; 2], b: [Vec2; 2]) -> f64 {
    let d2 = |p: Vec2, q: Vec2| (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
    (d2(a[0], b[0]) + d2(a[1], b[1])).min(d2(a[0], b[1]) + d2(a[1], b[0]))
}

fn line_oracle(views: &[EvalView], label: Option<LineLabel>, beta: f64) -> f64 {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for (v, view) in views.iter().enumerate() {
        preds.extend(view.segments.iter().filter(|s| s.label == label).map(|s| (v, s.endpoints, s.score)));
        gts.extend(view.gt_segments.iter().filter(|s| s.label == label).map(|s| (v, s.endpoints)));
    }
    prefix_oracle(&preds, &gts, delta, beta)
}

fn junction_oracle(views: &[EvalView], label: Option<JunctionLabel>, theta: f64) -> f64 {
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for (v, view) in views.iter().enumerate() {
        preds.extend(view.junctions.iter().filter(|j| j.label == label).map(|j| (v, j.position, j.score)));
        gts.extend(view.gt_junctions.iter().filter(|j| j.label == label).map(|j| (v, j.position)));
    }
    prefix_oracle(&preds, &gts, |a: Vec2, b: Vec2| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt(), theta)
}

fn run_eval(extra: &[&str]) -> (tempfile::TempDir, EvalReport) {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_srw"))
        .arg("eval")
        .args(extra)
        .arg("--input")
        .arg(fixtures().join("eval"))
        .arg("--output")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = serde_json::from_str(&fs::read_to_string(tmp.path().join("eval_report.json")).unwrap()).unwrap();
    (tmp, report)
}

fn check_against_oracle(report: &EvalReport, views: &[EvalView]) {
    let mut checked = 0;
    for lr in &report.lines.per_label {
        let label = LineLabel::SEMANTIC.iter().copied().find(|l| l.as_str() == lr.label);
        assert!(label.is_some(), "{}", lr.label);
        for t in &lr.thresholds {
            let want = line_oracle(views, label, t.threshold);
            assert!((t.result.ap - want).abs() < 1e-9, "sAP {} @ {}: {} vs {want}", lr.label, t.threshold, t.result.ap);
            checked += 1;
        }
    }
    for lr in &report.junctions.per_label {
        let label = JunctionLabel::SEMANTIC.iter().copied().find(|l| l.as_str() == lr.label);
        for t in &lr.thresholds {
            let want = junction_oracle(views, label, t.threshold);
            assert!((t.result.ap - want).abs() < 1e-9, "jAP {} @ {}: {} vs {want}", lr.label, t.threshold, t.result.ap);
            checked += 1;
        }
    }
    assert_eq!(checked, 5 * 3 + 2 * 3);
}

#[test]
fn eval_report_matches_prefix_oracle() {
    let pairs = fixture_pairs();
    for nms in [false, true] {
        let opts = EvalOptions { nms_gamma: nms.then_some(3.0), ..EvalOptions::default() };
        let mut counts = EvalCounts::default();
        let views: Vec<EvalView> = pairs.iter().map(|(g, p)| prepare_view(g, p, &opts, &mut counts).unwrap()).collect();
        let (_tmp, report) = run_eval(if nms { &["--nms"] } else { &[] });
        check_against_oracle(&report, &views);
        let wall = report.lines.per_label.iter().find(|l| l.label == "wall").unwrap();
        assert!(wall.ap_mean > 0.0);
    }
}

#[test]
fn pr_curve_files_cover_every_label_and_threshold() {
    let (tmp, _) = run_eval(&["--nonsemantic"]);
    let count = fs::read_dir(tmp.path().join("pr")).unwrap().count();
    assert_eq!(count, (5 * 3 + 2 * 3) + (3 + 3));
}

#[test]
fn residual_histogram_matches_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let summaries: Vec<ResidualSummary> = (0..500)
        .map(|_| {
            let mut v = [0.0f64; 3];
            for x in v.iter_mut() {
                *x = if rng.random_bool(0.05) { 0.0 } else { 10f64.powf(rng.random_range(-10.0..4.0)) };
            }
            v.sort_by(f64::total_cmp);
            ResidualSummary { min: v[0], median: v[1], max: v[2] }
        })
        .collect();
    let csv = residual_histogram_csv(&summaries);
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert_eq!(rows.len(), HISTOGRAM_BINS);

    // recount with edges computed independently: bin k covers [-8 + 0.2k, -8 + 0.2(k+1))
    let recount = |v: f64| -> usize {
        if v <= 0.0 {
            return 0;
        }
        let mut k = 0;
        while k + 1 < HISTOGRAM_BINS && v.log10() >= -8.0 + 0.2 * (k + 1) as f64 - 1e-12 {
            k += 1;
        }
        k
    };
    for (col, pick) in [(2usize, 0usize), (3, 1), (4, 2)] {
        let mut expected = vec![0usize; HISTOGRAM_BINS];
        for s in &summaries {
            expected[recount([s.max, s.median, s.min][pick])] += 1;
        }
        let got: Vec<usize> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
        assert_eq!(got, expected, "column {col}");
    }
    for (k, r) in rows.iter().enumerate() {
        let lo: f64 = r[0].parse().unwrap();
        assert!((lo - (-8.0 + 0.2 * k as f64)).abs() < 1e-9);
    }
    assert_eq!(histogram_bin(1e-3), 25);
}

#[test]
fn exact_corpus_has_no_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_srw"))
        .arg("filter")
        .arg("--input")
        .arg(fixtures().join("corpus"))
        .arg("--output")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(tmp.path().join("filter_summary.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.contains(",true,ok,")), "{csv}");
}
