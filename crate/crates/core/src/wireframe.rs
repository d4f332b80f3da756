//! Scored 2D wireframes: prediction files, endpoint-to-junction matching,
//! junction and line graphs, and the label-free view used for comparisons
//! with non-semantic detectors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EVAL_FRAME;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scene::{JunctionLabel, LineLabel};
use crate::visibility::AnnotatedView;

/// Junction scores indexed by [`JunctionLabel::index`].
pub type JunctionScores = [f64; 3];
/// Line scores indexed by [`LineLabel::index`].
pub type LineScores = [f64; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredJunction {
    pub position: Vec2,
    pub scores: JunctionScores,
}

impl ScoredJunction {
    pub fn score(&self, label: JunctionLabel) -> f64 {
        self.scores[label.index()]
    }
}

/// A segment proposal given by its endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSegment {
    pub endpoints: [Vec2; 2],
    pub scores: LineScores,
}

/// A segment attached to two junctions of its wireframe.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSegment {
    pub junctions: [usize; 2],
    pub scores: LineScores,
}

impl MatchedSegment {
    pub fn score(&self, label: LineLabel) -> f64 {
        self.scores[label.index()]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Wireframe2D {
    pub junctions: Vec<ScoredJunction>,
    pub segments: Vec<MatchedSegment>,
}

impl Wireframe2D {
    pub fn endpoints(&self, seg: &MatchedSegment) -> [Vec2; 2] {
        [self.junctions[seg.junctions[0]].position, self.junctions[seg.junctions[1]].position]
    }

    /// Segments re-expressed by their junction positions.
    pub fn to_endpoint_form(&self) -> Vec<ScoredSegment> {
        self.segments
            .iter()
            .map(|s| ScoredSegment { endpoints: self.endpoints(s), scores: s.scores })
            .collect()
    }

    /// Checks index validity, distinct endpoints and the absence of
    /// duplicate junction pairs.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.segments.iter().enumerate() {
            let [a, b] = s.junctions;
            if a >= self.junctions.len() || b >= self.junctions.len() {
                return Err(Error::parse("wireframe", format!("segment {i} references a missing junction")));
            }
            if a == b {
                return Err(Error::parse("wireframe", format!("segment {i} is a self-loop")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::parse("wireframe", format!("segment {i} duplicates junction pair ({a}, {b})")));
            }
        }
        Ok(())
    }

    /// Ground truth as a wireframe with one-hot scores.
    pub fn from_annotation(view: &AnnotatedView) -> Self {
        let junctions = view
            .junctions
            .iter()
            .map(|j| {
                let mut scores = [0.0; 3];
                scores[j.label.index()] = 1.0;
                ScoredJunction { position: Vec2::new(j.xy[0], j.xy[1]), scores }
            })
            .collect();
        let segments = view
            .segments
            .iter()
            .map(|s| {
                let mut scores = [0.0; 6];
                scores[s.label.index()] = 1.0;
                MatchedSegment { junctions: s.junctions, scores }
            })
            .collect();
        Self { junctions, segments }
    }

    /// Rescales all positions by `(sx, sy)`.
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        let mut out = self.clone();
        for j in out.junctions.iter_mut() {
            j.position = Vec2::new(j.position.x * sx, j.position.y * sy);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub wireframe: Wireframe2D,
    /// Proposals dropped because an endpoint had no junction within range or
    /// both endpoints snapped to the same junction.
    pub dropped: usize,
    /// Proposals merged into an earlier one with the same junction pair.
    pub merged: usize,
}

/// Index of the nearest junction (lowest index on ties) and its distance.
fn nearest(p: &Vec2, junctions: &[ScoredJunction]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, j) in junctions.iter().enumerate() {
        let d = (j.position - p).norm();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

/// Snaps each proposal's endpoints to the nearest junction. A proposal is
/// kept when both endpoints are strictly closer than `tau` to their junction
/// and the two junctions differ. Proposals landing on the same junction pair
/// are collapsed into the first, keeping the per-label maximum score.
pub fn match_to_junctions(raw: &[ScoredSegment], junctions: &[ScoredJunction], tau: f64) -> MatchOutcome {
    let mut segments: Vec<MatchedSegment> = Vec::new();
    let mut by_pair: HashMap<(usize, usize), usize> = HashMap::new();
    let (mut dropped, mut merged) = (0, 0);
    for s in raw {
        let a = nearest(&s.endpoints[0], junctions).filter(|(_, d)| *d < tau);
        let b = nearest(&s.endpoints[1], junctions).filter(|(_, d)| *d < tau);
        let (Some((a, _)), Some((b, _))) = (a, b) else {
            dropped += 1;
            continue;
        };
        if a == b {
            dropped += 1;
            continue;
        }
        match by_pair.get(&(a.min(b), a.max(b))) {
            Some(&k) => {
                let kept = &mut segments[k];
                for (x, y) in kept.scores.iter_mut().zip(s.scores) {
                    *x = x.max(y);
                }
                merged += 1;
            }
            None => {
                by_pair.insert((a.min(b), a.max(b)), segments.len());
                segments.push(MatchedSegment { junctions: [a, b], scores: s.scores });
            }
        }
    }
    MatchOutcome {
        wireframe: Wireframe2D { junctions: junctions.to_vec(), segments },
        dropped,
        merged,
    }
}

/// Undirected simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub node_count: usize,
    /// Sorted pairs `(a, b)` with `a < b`.
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }
}

pub fn junction_graph(w: &Wireframe2D) -> Graph {
    let mut edges: Vec<(usize, usize)> = w
        .segments
        .iter()
        .map(|s| {
            let [a, b] = s.junctions;
            (a.min(b), a.max(b))
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Graph { node_count: w.junctions.len(), edges }
}

/// Graph on the segments of `w`; two segments are adjacent when they share
/// a junction.
pub fn line_graph(w: &Wireframe2D) -> Graph {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); w.junctions.len()];
    for (i, s) in w.segments.iter().enumerate() {
        for j in s.junctions {
            incident[j].push(i);
        }
    }
    let mut edges = Vec::new();
    for segs in &incident {
        for (k, &a) in segs.iter().enumerate() {
            for &b in &segs[k + 1..] {
                edges.push((a.min(b), a.max(b)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Graph { node_count: w.segments.len(), edges }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainJunction {
    pub position: Vec2,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainSegment {
    pub junctions: [usize; 2],
    pub score: f64,
}

/// A wireframe with a single confidence per item and no labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlainWireframe {
    pub junctions: Vec<PlainJunction>,
    pub segments: Vec<PlainSegment>,
}

/// Collapses every score vector to `1 - invalid`.
pub fn to_nonsemantic(w: &Wireframe2D) -> PlainWireframe {
    PlainWireframe {
        junctions: w
            .junctions
            .iter()
            .map(|j| PlainJunction { position: j.position, score: 1.0 - j.score(JunctionLabel::Invalid) })
            .collect(),
        segments: w
            .segments
            .iter()
            .map(|s| PlainSegment { junctions: s.junctions, score: 1.0 - s.score(LineLabel::Invalid) })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Prediction files

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionScoreMap {
    pub invalid: f64,
    #[serde(rename = "false")]
    pub false_: f64,
    pub proper: f64,
}

impl JunctionScoreMap {
    pub fn to_array(self) -> JunctionScores {
        [self.invalid, self.false_, self.proper]
    }

    pub fn from_array(a: JunctionScores) -> Self {
        Self { invalid: a[0], false_: a[1], proper: a[2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineScoreMap {
    pub invalid: f64,
    pub wall: f64,
    pub floor: f64,
    pub ceiling: f64,
    pub door: f64,
    pub window: f64,
}

impl LineScoreMap {
    pub fn to_array(self) -> LineScores {
        [self.invalid, self.wall, self.floor, self.ceiling, self.door, self.window]
    }

    pub fn from_array(a: LineScores) -> Self {
        Self { invalid: a[0], wall: a[1], floor: a[2], ceiling: a[3], door: a[4], window: a[5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictedJunction {
    pub xy: [f64; 2],
    pub scores: JunctionScoreMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictedSegment {
    pub xy: [f64; 4],
    pub scores: LineScoreMap,
}

/// Network output for one image, in full-resolution pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    pub junctions: Vec<PredictedJunction>,
    pub segments: Vec<PredictedSegment>,
}

fn check_scores(context: &str, scores: &[f64]) -> Result<()> {
    match scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        Some(s) => Err(Error::parse(context, format!("score {s} outside [0, 1]"))),
        None => Ok(()),
    }
}

impl PredictionFile {
    pub fn parse(json: &str) -> Result<Self> {
        let f: PredictionFile = serde_json::from_str(json).map_err(|e| Error::parse("prediction", e))?;
        if f.width == 0 || f.height == 0 {
            return Err(Error::parse("prediction", "image size must be non-zero"));
        }
        for j in &f.junctions {
            check_scores("prediction junction", &j.scores.to_array())?;
        }
        for s in &f.segments {
            check_scores("prediction segment", &s.scores.to_array())?;
        }
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prediction serializes")
    }

    /// Junctions and raw proposals rescaled to the evaluation frame.
    pub fn in_eval_frame(&self) -> (Vec<ScoredJunction>, Vec<ScoredSegment>) {
        let sx = EVAL_FRAME / self.width as f64;
        let sy = EVAL_FRAME / self.height as f64;
        let junctions = self
            .junctions
            .iter()
            .map(|j| ScoredJunction { position: Vec2::new(j.xy[0] * sx, j.xy[1] * sy), scores: j.scores.to_array() })
            .collect();
        let segments = self
            .segments
            .iter()
            .map(|s| ScoredSegment {
                endpoints: [Vec2::new(s.xy[0] * sx, s.xy[1] * sy), Vec2::new(s.xy[2] * sx, s.xy[3] * sy)],
                scores: s.scores.to_array(),
            })
            .collect();
        (junctions, segments)
    }

    /// A perfect prediction: the ground truth with one-hot scores.
    pub fn from_annotation(view: &AnnotatedView) -> Self {
        let w = Wireframe2D::from_annotation(view);
        PredictionFile {
            view_id: view.view_id.clone(),
            width: view.width,
            height: view.height,
            junctions: w
                .junctions
                .iter()
                .map(|j| PredictedJunction { xy: [j.position.x, j.position.y], scores: JunctionScoreMap::from_array(j.scores) })
                .collect(),
            segments: w
                .segments
                .iter()
                .map(|s| {
                    let [a, b] = w.endpoints(s);
                    PredictedSegment { xy: [a.x, a.y, b.x, b.y], scores: LineScoreMap::from_array(s.scores) }
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn junction(x: f64, y: f64) -> ScoredJunction {
        ScoredJunction { position: Vec2::new(x, y), scores: [0.0, 0.0, 1.0] }
    }

    fn raw(a: (f64, f64), b: (f64, f64), scores: LineScores) -> ScoredSegment {
        ScoredSegment { endpoints: [Vec2::new(a.0, a.1), Vec2::new(b.0, b.1)], scores }
    }

    fn triangle() -> Wireframe2D {
        let js = vec![junction(0.0, 0.0), junction(50.0, 0.0), junction(0.0, 50.0)];
        let s = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let proposals = vec![
            raw((0.0, 0.0), (50.0, 0.0), s),
            raw((50.0, 0.0), (0.0, 50.0), s),
            raw((0.0, 50.0), (0.0, 0.0), s),
        ];
        match_to_junctions(&proposals, &js, 10.0).wireframe
    }

    #[test]
    fn exact_endpoints_are_kept() {
        let w = triangle();
        assert_eq!(w.segments.len(), 3);
        assert_eq!(w.segments[0].junctions, [0, 1]);
        w.validate().unwrap();
    }

    #[test]
    fn tau_boundary_is_strict() {
        let js = vec![junction(0.0, 0.0), junction(50.0, 0.0)];
        let s = [0.0; 6];
        let out = match_to_junctions(&[raw((0.0, 10.0), (50.0, 0.0), s)], &js, 10.0);
        assert_eq!(out.wireframe.segments.len(), 0);
        assert_eq!(out.dropped, 1);
        let out = match_to_junctions(&[raw((0.0, 9.999), (50.0, 0.0), s)], &js, 10.0);
        assert_eq!(out.wireframe.segments.len(), 1);
    }

    #[test]
    fn duplicates_keep_per_label_max() {
        let js = vec![junction(0.0, 0.0), junction(50.0, 0.0)];
        let out = match_to_junctions(
            &[
                raw((0.0, 0.0), (50.0, 0.0), [0.5, 0.1, 0.2, 0.0, 0.0, 0.0]),
                raw((50.0, 1.0), (1.0, 0.0), [0.2, 0.6, 0.1, 0.0, 0.0, 0.3]),
            ],
            &js,
            10.0,
        );
        assert_eq!(out.merged, 1);
        assert_eq!(out.wireframe.segments.len(), 1);
        assert_eq!(out.wireframe.segments[0].scores, [0.5, 0.6, 0.2, 0.0, 0.0, 0.3]);
    }

    #[test]
    fn same_junction_twice_is_dropped() {
        let js = vec![junction(0.0, 0.0), junction(50.0, 0.0)];
        let out = match_to_junctions(&[raw((0.0, 0.0), (2.0, 0.0), [0.0; 6])], &js, 10.0);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn graphs_of_small_wireframes() {
        let w = triangle();
        let jg = junction_graph(&w);
        assert_eq!((jg.node_count, jg.edges.len()), (3, 3));
        let lg = line_graph(&w);
        assert_eq!((lg.node_count, lg.edges.len()), (3, 3));

        let mut path = w.clone();
        path.segments.truncate(2);
        let lg = line_graph(&path);
        assert_eq!((lg.node_count, lg.edges.clone()), (2, vec![(0, 1)]));
        let jg = junction_graph(&Wireframe2D { segments: path.segments[..1].to_vec(), ..path });
        assert_eq!((jg.node_count, jg.edges.len()), (3, 1));
    }

    #[test]
    fn nonsemantic_scores() {
        let js = vec![ScoredJunction { position: Vec2::zeros(), scores: [1.0, 0.0, 0.0] }, junction(5.0, 0.0)];
        let w = Wireframe2D {
            junctions: js,
            segments: vec![MatchedSegment { junctions: [0, 1], scores: [0.2, 0.5, 0.1, 0.1, 0.05, 0.05] }],
        };
        let p = to_nonsemantic(&w);
        assert_eq!(p.junctions[0].score, 0.0);
        assert_eq!(p.junctions[1].score, 1.0);
        assert_eq!(p.segments[0].score, 0.8);
    }

    #[test]
    fn prediction_file_roundtrip_and_validation() {
        let f = PredictionFile {
            view_id: "v".into(),
            width: 256,
            height: 512,
            junctions: vec![PredictedJunction { xy: [10.0, 20.0], scores: JunctionScoreMap::from_array([0.1, 0.2, 0.7]) }],
            segments: vec![PredictedSegment {
                xy: [0.0, 0.0, 256.0, 512.0],
                scores: LineScoreMap::from_array([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            }],
        };
        let json = f.to_json();
        assert!(json.contains("\"false\""));
        assert_eq!(PredictionFile::parse(&json).unwrap(), f);
        let (js, ss) = f.in_eval_frame();
        assert_eq!(js[0].position, Vec2::new(5.0, 5.0));
        assert_eq!(ss[0].endpoints[1], Vec2::new(128.0, 128.0));

        let bad = json.replace("0.7", "1.7");
        assert!(PredictionFile::parse(&bad).is_err());
    }
}
