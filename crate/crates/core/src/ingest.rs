//! Reading scenes, camera poses and semantic masks, assembling plane
//! polygons from line topology, and the scene quality filter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{check_rotation, fit_plane_dlt, point_plane_distance, Intrinsics, RigidTransform};
use crate::polygon::{locate_point, newell_normal, Containment, PlaneFrame};
use crate::scene::{
    Junction3D, Line3D, Opening, OpeningKind, PlaneLabel, PlaneParams, PlanePolygon, SceneGraph, Vec3,
};

// ---------------------------------------------------------------------------
// Scene files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionRecord {
    pub id: i64,
    pub xyz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub id: i64,
    pub junctions: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneRecord {
    pub id: i64,
    pub lines: Vec<i64>,
    pub normal: [f64; 3],
    pub offset: f64,
    pub label: PlaneLabel,
    #[serde(default)]
    pub semantic: String,
    #[serde(default)]
    pub parent_wall: Option<i64>,
}

/// On-disk scene description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub scene_id: String,
    pub junctions: Vec<JunctionRecord>,
    pub lines: Vec<LineRecord>,
    pub planes: Vec<PlaneRecord>,
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

pub fn parse_scene(json: &str) -> Result<SceneGraph> {
    let file: SceneFile = serde_json::from_str(json).map_err(|e| Error::parse("scene", e))?;
    build_scene(&file)
}

/// Serializes a scene back into its file form.
pub fn scene_to_file(scene: &SceneGraph) -> SceneFile {
    SceneFile {
        scene_id: scene.scene_id.clone(),
        junctions: scene
            .junctions()
            .iter()
            .map(|j| JunctionRecord {
                id: j.id,
                xyz: [j.position.x, j.position.y, j.position.z],
            })
            .collect(),
        lines: scene
            .lines()
            .iter()
            .map(|l| LineRecord { id: l.id, junctions: l.endpoints })
            .collect(),
        planes: scene
            .planes()
            .iter()
            .map(|p| PlaneRecord {
                id: p.plane_id,
                lines: p.line_ids.clone(),
                normal: [p.params.normal.x, p.params.normal.y, p.params.normal.z],
                offset: p.params.offset,
                label: p.label,
                semantic: p.semantic.clone(),
                parent_wall: p.parent_wall,
            })
            .collect(),
    }
}

pub fn scene_to_json(scene: &SceneGraph) -> String {
    serde_json::to_string_pretty(&scene_to_file(scene)).expect("scene serializes")
}

/// Merges junctions closer than the merge tolerance, keeping the first.
fn merge_junctions(records: &[JunctionRecord], eps: f64) -> (Vec<Junction3D>, HashMap<i64, i64>) {
    let mut kept: Vec<Junction3D> = Vec::with_capacity(records.len());
    let mut remap = HashMap::with_capacity(records.len());
    for r in records {
        let p = Vec3::new(r.xyz[0], r.xyz[1], r.xyz[2]);
        match kept.iter().find(|k| (k.position - p).norm() <= eps) {
            Some(k) => {
                remap.insert(r.id, k.id);
            }
            None => {
                remap.insert(r.id, r.id);
                kept.push(Junction3D { id: r.id, position: p });
            }
        }
    }
    (kept, remap)
}

/// Chains a plane's lines into closed junction loops. Each junction must
/// have exactly two incident lines.
fn chain_loops(plane_id: i64, lines: &[(i64, [i64; 2])]) -> Result<Vec<Vec<i64>>> {
    let mut incident: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
    for &(lid, [a, b]) in lines {
        incident.entry(a).or_default().push((lid, b));
        incident.entry(b).or_default().push((lid, a));
    }
    for (j, inc) in &incident {
        match inc.len() {
            2 => {}
            1 => return Err(Error::topology(plane_id, format!("open chain at junction {j}"))),
            n => return Err(Error::topology(plane_id, format!("junction {j} branches into {n} lines"))),
        }
    }
    let mut used_lines: BTreeSet<i64> = BTreeSet::new();
    let mut visited: BTreeSet<i64> = BTreeSet::new();
    let mut loops = Vec::new();
    for &start in incident.keys() {
        if visited.contains(&start) {
            continue;
        }
        let mut lp = vec![start];
        visited.insert(start);
        let mut current = start;
        loop {
            let next = incident[&current]
                .iter()
                .find(|(lid, _)| !used_lines.contains(lid))
                .copied();
            let Some((lid, other)) = next else { break };
            used_lines.insert(lid);
            if other == start {
                break;
            }
            if !visited.insert(other) {
                return Err(Error::topology(plane_id, format!("loop revisits junction {other}")));
            }
            lp.push(other);
            current = other;
        }
        if lp.len() < 3 {
            return Err(Error::topology(plane_id, "loop with fewer than three junctions"));
        }
        loops.push(lp);
    }
    Ok(loops)
}

/// Reverses `lp` (keeping its first vertex) if it winds clockwise about `normal`.
fn orient_ccw(lp: &mut [i64], positions: &HashMap<i64, Vec3>, normal: &Vec3) {
    let pts: Vec<Vec3> = lp.iter().map(|j| positions[j]).collect();
    if newell_normal(&pts).dot(normal) < 0.0 {
        lp[1..].reverse();
    }
}

fn loop_area(lp: &[i64], positions: &HashMap<i64, Vec3>) -> f64 {
    let pts: Vec<Vec3> = lp.iter().map(|j| positions[j]).collect();
    newell_normal(&pts).norm() * 0.5
}

pub fn build_scene(file: &SceneFile) -> Result<SceneGraph> {
    build_scene_with(file, &Tolerances::default())
}

pub fn build_scene_with(file: &SceneFile, tol: &Tolerances) -> Result<SceneGraph> {
    let (junctions, remap) = merge_junctions(&file.junctions, tol.junction_merge_eps);
    let positions: HashMap<i64, Vec3> = junctions.iter().map(|j| (j.id, j.position)).collect();

    let mut line_ends: HashMap<i64, [i64; 2]> = HashMap::new();
    for l in &file.lines {
        let map = |j: i64| {
            remap
                .get(&j)
                .copied()
                .ok_or_else(|| Error::parse("scene", format!("line {} references missing junction {j}", l.id)))
        };
        let ends = [map(l.junctions[0])?, map(l.junctions[1])?];
        if ends[0] == ends[1] {
            return Err(Error::parse("scene", format!("line {} collapses to a point", l.id)));
        }
        if line_ends.insert(l.id, ends).is_some() {
            return Err(Error::parse("scene", format!("duplicate line id {}", l.id)));
        }
    }

    let mut adjacency: HashMap<i64, BTreeSet<i64>> = HashMap::new();
    let mut planes: Vec<PlanePolygon> = Vec::with_capacity(file.planes.len());
    let mut inner_loops: HashMap<i64, Vec<Vec<i64>>> = HashMap::new();

    for rec in &file.planes {
        let params = PlaneParams::new(Vec3::from(rec.normal), rec.offset)
            .map_err(|e| Error::parse("scene", format!("plane {}: {e}", rec.id)))?;
        let mut plane_lines = Vec::with_capacity(rec.lines.len());
        for lid in &rec.lines {
            let ends = line_ends
                .get(lid)
                .ok_or_else(|| Error::parse("scene", format!("plane {} references missing line {lid}", rec.id)))?;
            adjacency.entry(*lid).or_default().insert(rec.id);
            plane_lines.push((*lid, *ends));
        }
        let distinct: BTreeSet<i64> = plane_lines.iter().flat_map(|(_, e)| *e).collect();

        let outer_boundary = if distinct.len() < 3 {
            distinct.into_iter().collect()
        } else {
            let mut loops = chain_loops(rec.id, &plane_lines)?;
            for lp in loops.iter_mut() {
                orient_ccw(lp, &positions, &params.normal);
            }
            let outer_idx = loops
                .iter()
                .enumerate()
                .max_by(|a, b| loop_area(a.1, &positions).total_cmp(&loop_area(b.1, &positions)))
                .map(|(i, _)| i)
                .expect("at least one loop");
            let outer = loops.swap_remove(outer_idx);
            if !loops.is_empty() {
                inner_loops.insert(rec.id, loops);
            }
            outer
        };

        if rec.parent_wall.is_some() && rec.label.is_structural() {
            return Err(Error::topology(rec.id, "structural plane cannot have a parent wall"));
        }

        planes.push(PlanePolygon {
            plane_id: rec.id,
            params,
            label: rec.label,
            semantic: rec.semantic.clone(),
            line_ids: rec.lines.clone(),
            outer_boundary,
            openings: Vec::new(),
            parent_wall: rec.parent_wall,
        });
    }

    attach_openings(&mut planes, &positions, &inner_loops, tol)?;

    let lines = file
        .lines
        .iter()
        .map(|l| Line3D {
            id: l.id,
            endpoints: line_ends[&l.id],
            adjacent_planes: adjacency
                .get(&l.id)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default(),
        })
        .collect();

    SceneGraph::new(file.scene_id.clone(), junctions, lines, planes)
}

fn attach_openings(
    planes: &mut [PlanePolygon],
    positions: &HashMap<i64, Vec3>,
    inner_loops: &HashMap<i64, Vec<Vec<i64>>>,
    tol: &Tolerances,
) -> Result<()> {
    let index: HashMap<i64, usize> = planes.iter().enumerate().map(|(i, p)| (p.plane_id, i)).collect();
    let mut openings: BTreeMap<i64, Vec<Opening>> = BTreeMap::new();
    for child in planes.iter() {
        let Some(parent_id) = child.parent_wall else { continue };
        let parent = index
            .get(&parent_id)
            .map(|&i| &planes[i])
            .ok_or_else(|| Error::topology(child.plane_id, format!("missing parent plane {parent_id}")))?;
        if !parent.label.is_structural() {
            return Err(Error::topology(child.plane_id, "parent of an opening must be structural"));
        }
        let kind = match child.label {
            PlaneLabel::Door => OpeningKind::Door,
            PlaneLabel::Window => OpeningKind::Window,
            _ => return Err(Error::topology(child.plane_id, "only doors and windows can have a parent wall")),
        };
        if child.outer_boundary.len() < 3 || parent.outer_boundary.len() < 3 {
            continue;
        }

        let frame = PlaneFrame::new(&parent.params);
        let outer: Vec<_> = parent.outer_boundary.iter().map(|j| frame.to_2d(&positions[j])).collect();
        for j in &child.outer_boundary {
            let q = frame.to_2d(&positions[j]);
            if locate_point(&q, &outer, tol.plane_eps) == Containment::Outside {
                return Err(Error::topology(
                    child.plane_id,
                    format!("opening vertex {j} lies outside parent plane {parent_id}"),
                ));
            }
        }
        let mut polygon = child.outer_boundary.clone();
        orient_ccw(&mut polygon, positions, &parent.params.normal);
        openings.entry(parent_id).or_default().push(Opening {
            polygon,
            kind,
            door_id: child.plane_id,
        });
    }

    for (plane_id, loops) in inner_loops {
        let known = openings.get(plane_id).map(Vec::as_slice).unwrap_or(&[]);
        for lp in loops {
            let set: BTreeSet<i64> = lp.iter().copied().collect();
            let matched = known
                .iter()
                .any(|o| o.polygon.iter().copied().collect::<BTreeSet<_>>() == set);
            if !matched {
                return Err(Error::topology(*plane_id, "inner loop without a door or window plane"));
            }
        }
    }

    for (parent_id, mut list) in openings {
        list.sort_by_key(|o| o.door_id);
        planes[index[&parent_id]].openings = list;
    }
    Ok(())
}

/// Re-orients every loop to wind counter-clockwise about its plane normal.
pub(crate) fn normalize_orientation(scene: &mut SceneGraph) {
    let positions: HashMap<i64, Vec3> = scene.junctions().iter().map(|j| (j.id, j.position)).collect();
    for plane in scene.planes_mut() {
        if plane.outer_boundary.len() >= 3 {
            orient_ccw(&mut plane.outer_boundary, &positions, &plane.params.normal);
        }
        let n = plane.params.normal;
        for o in plane.openings.iter_mut() {
            orient_ccw(&mut o.polygon, &positions, &n);
        }
    }
}

// ---------------------------------------------------------------------------
// Camera views

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub view_id: String,
    pub intrinsics: Intrinsics,
    /// World to camera: `q_cam = R q_world + t`.
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub width: u32,
    pub height: u32,
    pub mask_path: Option<String>,
}

impl CameraView {
    pub fn new(
        view_id: impl Into<String>,
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vec3,
        width: u32,
        height: u32,
        mask_path: Option<String>,
    ) -> Result<Self> {
        check_rotation(&rotation, 1e-6)?;
        let Intrinsics { fx, fy, cx, cy } = intrinsics;
        if width == 0 || height == 0 {
            return Err(Error::InvalidIntrinsics("image must be non-empty".into()));
        }
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidIntrinsics(format!("focal lengths must be positive ({fx}, {fy})")));
        }
        if !(0.0..=width as f64).contains(&cx) || !(0.0..=height as f64).contains(&cy) {
            return Err(Error::InvalidIntrinsics(format!("principal point ({cx}, {cy}) outside image")));
        }
        if !translation.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidIntrinsics("translation must be finite".into()));
        }
        Ok(Self {
            view_id: view_id.into(),
            intrinsics,
            rotation,
            translation,
            width,
            height,
            mask_path,
        })
    }

    pub fn transform(&self) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation,
            translation: self.translation,
        }
    }
}

/// On-disk camera pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFile {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    #[serde(default)]
    pub mask: Option<String>,
}

pub fn parse_view(json: &str) -> Result<CameraView> {
    let f: PoseFile = serde_json::from_str(json).map_err(|e| Error::parse("pose", e))?;
    view_from_pose(&f)
}

pub fn view_from_pose(f: &PoseFile) -> Result<CameraView> {
    CameraView::new(
        f.view_id.clone(),
        Intrinsics { fx: f.fx, fy: f.fy, cx: f.cx, cy: f.cy },
        Matrix3::from_row_slice(&f.r),
        Vec3::from(f.t),
        f.width,
        f.height,
        f.mask.clone(),
    )
}

pub fn load_view(path: impl AsRef<Path>) -> Result<CameraView> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_view(&text)
}

pub fn view_to_pose(v: &CameraView) -> PoseFile {
    let r = &v.rotation;
    PoseFile {
        view_id: v.view_id.clone(),
        width: v.width,
        height: v.height,
        fx: v.intrinsics.fx,
        fy: v.intrinsics.fy,
        cx: v.intrinsics.cx,
        cy: v.intrinsics.cy,
        r: [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
        ],
        t: [v.translation.x, v.translation.y, v.translation.z],
        mask: v.mask_path.clone(),
    }
}

pub fn view_to_json(v: &CameraView) -> String {
    serde_json::to_string_pretty(&view_to_pose(v)).expect("pose serializes")
}

// ---------------------------------------------------------------------------
// Semantic masks

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskClass {
    Door,
    Window,
    Wall,
    Floor,
    Ceiling,
    Other,
}

pub type LabelMap = BTreeMap<u8, MaskClass>;

pub fn parse_label_map(json: &str) -> Result<LabelMap> {
    let raw: BTreeMap<String, MaskClass> = serde_json::from_str(json).map_err(|e| Error::parse("label map", e))?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<u8>()
                .map(|id| (id, v))
                .map_err(|_| Error::parse("label map", format!("class id {k:?} is not an 8-bit integer")))
        })
        .collect()
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_map(&text)
}

pub fn label_map_to_json(map: &LabelMap) -> String {
    let raw: BTreeMap<String, MaskClass> = map.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    serde_json::to_string_pretty(&raw).expect("label map serializes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMask {
    pub width: u32,
    pub height: u32,
    /// Row-major class ids.
    pub pixels: Vec<u8>,
    pub label_map: LabelMap,
}

impl SemanticMask {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, label_map: LabelMap) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::parse(
                "mask",
                format!("{} pixels for a {width}x{height} image", pixels.len()),
            ));
        }
        Ok(Self { width, height, pixels, label_map })
    }

    /// Class of pixel `(x, y)`; ids missing from the label map are `Other`.
    pub fn class_at(&self, x: u32, y: u32) -> MaskClass {
        let id = self.pixels[y as usize * self.width as usize + x as usize];
        self.label_map.get(&id).copied().unwrap_or(MaskClass::Other)
    }

    pub fn check_matches(&self, view: &CameraView) -> Result<()> {
        if self.width != view.width || self.height != view.height {
            return Err(Error::DimensionMismatch {
                expected_w: view.width,
                expected_h: view.height,
                got_w: self.width,
                got_h: self.height,
            });
        }
        Ok(())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img = image::GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("pixel count checked at construction");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image { path: path.to_path_buf(), message: e.to_string() })
    }
}

pub fn load_mask(path: impl AsRef<Path>, label_map: &LabelMap) -> Result<SemanticMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| Error::parse(path.display().to_string(), e))?;
    let image::DynamicImage::ImageLuma8(gray) = img else {
        return Err(Error::parse(
            path.display().to_string(),
            format!("expected single-channel 8-bit PNG, got {:?}", img.color()),
        ));
    };
    let (w, h) = gray.dimensions();
    SemanticMask::new(w, h, gray.into_raw(), label_map.clone())
}

// ---------------------------------------------------------------------------
// Scene filter

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    Ok,
    PlaneWithTwoJunctions,
    /// Three or more junctions, all collinear.
    DegeneratePlane,
    #[serde(rename = "residual_exceeds_1mm")]
    ResidualExceeds1mm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFilterReport {
    pub scene_id: String,
    pub accepted: bool,
    pub reason: FilterReason,
    pub max_residual_mm: f64,
    /// Offending plane, when rejected.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plane_id: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub report: SceneFilterReport,
    /// The input scene, with refit plane parameters when accepted.
    pub scene: SceneGraph,
}

/// Rejects scenes with under-determined planes or planes whose junctions lie
/// farther than `max_residual_mm` from a DLT refit; accepted scenes carry the
/// refit parameters.
pub fn filter_scene(scene: SceneGraph, max_residual_mm: f64) -> FilterOutcome {
    let reject = |scene: SceneGraph, reason, max_residual_mm, plane_id| FilterOutcome {
        report: SceneFilterReport {
            scene_id: scene.scene_id.clone(),
            accepted: false,
            reason,
            max_residual_mm,
            plane_id: Some(plane_id),
        },
        scene,
    };

    for plane in scene.planes() {
        if plane.junction_ids(&scene).len() < 3 {
            let id = plane.plane_id;
            return reject(scene, FilterReason::PlaneWithTwoJunctions, 0.0, id);
        }
    }

    let mut refit = HashMap::new();
    let mut worst = 0.0f64;
    let mut worst_plane = None;
    for plane in scene.planes() {
        let pts = scene.positions(&plane.junction_ids(&scene));
        let params = match fit_plane_dlt(&pts) {
            Ok(p) => p,
            Err(_) => {
                let id = plane.plane_id;
                return reject(scene, FilterReason::DegeneratePlane, worst, id);
            }
        };
        let max = pts.iter().map(|p| point_plane_distance(p, &params)).fold(0.0, f64::max);
        if max > worst {
            worst = max;
            worst_plane = Some(plane.plane_id);
        }
        refit.insert(plane.plane_id, params);
    }

    if worst > max_residual_mm {
        let id = worst_plane.expect("worst plane recorded");
        return reject(scene, FilterReason::ResidualExceeds1mm, worst, id);
    }

    let mut scene = scene.with_plane_params(&refit);
    normalize_orientation(&mut scene);
    FilterOutcome {
        report: SceneFilterReport {
            scene_id: scene.scene_id.clone(),
            accepted: true,
            reason: FilterReason::Ok,
            max_residual_mm: worst,
            plane_id: None,
        },
        scene,
    }
}
