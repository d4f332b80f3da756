//! Scene domain model: junctions, lines, labelled plane polygons, and the
//! plane-pair to line-label mapping.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneLabel {
    Wall,
    Floor,
    Ceiling,
    Door,
    Window,
}

impl PlaneLabel {
    pub const ALL: [PlaneLabel; 5] = [
        PlaneLabel::Wall,
        PlaneLabel::Floor,
        PlaneLabel::Ceiling,
        PlaneLabel::Door,
        PlaneLabel::Window,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlaneLabel::Wall => "wall",
            PlaneLabel::Floor => "floor",
            PlaneLabel::Ceiling => "ceiling",
            PlaneLabel::Door => "door",
            PlaneLabel::Window => "window",
        }
    }

    /// Walls, floors and ceilings bound rooms; doors and windows are openings.
    pub fn is_structural(self) -> bool {
        matches!(self, PlaneLabel::Wall | PlaneLabel::Floor | PlaneLabel::Ceiling)
    }
}

impl fmt::Display for PlaneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlaneLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlaneLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::parse("plane label", format!("unknown label {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineLabel {
    Invalid,
    Wall,
    Floor,
    Ceiling,
    Door,
    Window,
}

impl LineLabel {
    /// All labels in score-vector order.
    pub const ALL: [LineLabel; 6] = [
        LineLabel::Invalid,
        LineLabel::Wall,
        LineLabel::Floor,
        LineLabel::Ceiling,
        LineLabel::Door,
        LineLabel::Window,
    ];

    /// Labels that ground truth can carry.
    pub const SEMANTIC: [LineLabel; 5] = [
        LineLabel::Wall,
        LineLabel::Floor,
        LineLabel::Ceiling,
        LineLabel::Door,
        LineLabel::Window,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LineLabel::Invalid => "invalid",
            LineLabel::Wall => "wall",
            LineLabel::Floor => "floor",
            LineLabel::Ceiling => "ceiling",
            LineLabel::Door => "door",
            LineLabel::Window => "window",
        }
    }
}

impl fmt::Display for LineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<PlaneLabel> for LineLabel {
    fn from(l: PlaneLabel) -> Self {
        match l {
            PlaneLabel::Wall => LineLabel::Wall,
            PlaneLabel::Floor => LineLabel::Floor,
            PlaneLabel::Ceiling => LineLabel::Ceiling,
            PlaneLabel::Door => LineLabel::Door,
            PlaneLabel::Window => LineLabel::Window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JunctionLabel {
    Invalid,
    False,
    Proper,
}

impl JunctionLabel {
    pub const ALL: [JunctionLabel; 3] = [
        JunctionLabel::Invalid,
        JunctionLabel::False,
        JunctionLabel::Proper,
    ];
    pub const SEMANTIC: [JunctionLabel; 2] = [JunctionLabel::False, JunctionLabel::Proper];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JunctionLabel::Invalid => "invalid",
            JunctionLabel::False => "false",
            JunctionLabel::Proper => "proper",
        }
    }
}

impl fmt::Display for JunctionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Maps the labels of the two planes meeting at a line to the line's label.
///
/// Door-door and window-window edges are folded into door and window.
/// Any other pairing indicates a malformed scene.
pub fn line_label_from_planes(a: PlaneLabel, b: PlaneLabel) -> Result<LineLabel> {
    use PlaneLabel::*;
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    match (lo, hi) {
        (Wall, Wall) => Ok(LineLabel::Wall),
        (Wall, Floor) => Ok(LineLabel::Floor),
        (Wall, Ceiling) => Ok(LineLabel::Ceiling),
        (Wall, Door) | (Door, Door) => Ok(LineLabel::Door),
        (Wall, Window) | (Window, Window) => Ok(LineLabel::Window),
        _ => Err(Error::UnmappedPair(a, b)),
    }
}

/// Label of a scene line from its adjacent planes. A line bordering a single
/// plane is labelled as if its other side were a wall.
pub fn line_label_for(line: &Line3D, scene: &SceneGraph) -> Result<LineLabel> {
    let label_of = |id: i64| -> Result<PlaneLabel> {
        scene
            .plane(id)
            .map(|p| p.label)
            .ok_or_else(|| Error::topology(id, format!("line {} references missing plane", line.id)))
    };
    match line.adjacent_planes.as_slice() {
        [only] => line_label_from_planes(label_of(*only)?, PlaneLabel::Wall),
        [a, b] => line_label_from_planes(label_of(*a)?, label_of(*b)?),
        other => Err(Error::topology(
            other.first().copied().unwrap_or(-1),
            format!("line {} has {} adjacent planes", line.id, other.len()),
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction3D {
    pub id: i64,
    /// World position in millimetres.
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line3D {
    pub id: i64,
    pub endpoints: [i64; 2],
    /// Sorted ids of the planes whose line lists contain this line.
    pub adjacent_planes: Vec<i64>,
}

/// Plane `n . x + d = 0` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneParams {
    pub normal: Vec3,
    pub offset: f64,
}

impl PlaneParams {
    /// Builds a plane from a normal and offset, rescaling so the normal has
    /// unit length. Inputs already within 1e-12 of unit length are kept bit-for-bit.
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !norm.is_finite() || norm < 1e-12 || !offset.is_finite() {
            return Err(Error::Degenerate(format!(
                "plane normal {normal:?} cannot be normalized"
            )));
        }
        if (norm - 1.0).abs() <= 1e-12 {
            return Ok(Self { normal, offset });
        }
        Ok(Self {
            normal: normal / norm,
            offset: offset / norm,
        })
    }

    pub fn from_vector(pi: &Vector4<f64>) -> Result<Self> {
        Self::new(Vector3::new(pi.x, pi.y, pi.z), pi.w)
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.normal.x, self.normal.y, self.normal.z, self.offset)
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) + self.offset
    }

    pub fn flipped(&self) -> Self {
        Self {
            normal: -self.normal,
            offset: -self.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpeningKind {
    Door,
    Window,
}

/// A door or window hole in a structural plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Opening {
    /// Closed junction loop, counter-clockwise about the parent normal.
    pub polygon: Vec<i64>,
    pub kind: OpeningKind,
    /// Id of the door or window plane that fills this hole.
    pub door_id: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanePolygon {
    pub plane_id: i64,
    pub params: PlaneParams,
    pub label: PlaneLabel,
    pub semantic: String,
    /// Line ids as listed in the scene file.
    pub line_ids: Vec<i64>,
    /// Closed junction loop, counter-clockwise seen from the normal side.
    /// Shorter than three only for degenerate planes that the filter rejects.
    pub outer_boundary: Vec<i64>,
    pub openings: Vec<Opening>,
    /// Set on door and window planes that sit in a wall.
    pub parent_wall: Option<i64>,
}

impl PlanePolygon {
    /// All distinct junction ids referenced by the plane's lines.
    pub fn junction_ids(&self, scene: &SceneGraph) -> Vec<i64> {
        let mut ids: Vec<i64> = self
            .line_ids
            .iter()
            .filter_map(|l| scene.line(*l))
            .flat_map(|l| l.endpoints)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Cross-referenced scene. Construct through [`SceneGraph::new`], which checks
/// that every reference resolves.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub scene_id: String,
    junctions: Vec<Junction3D>,
    lines: Vec<Line3D>,
    planes: Vec<PlanePolygon>,
    junction_index: HashMap<i64, usize>,
    line_index: HashMap<i64, usize>,
    plane_index: HashMap<i64, usize>,
}

fn index_of<T>(items: &[T], id: impl Fn(&T) -> i64, what: &str) -> Result<HashMap<i64, usize>> {
    let mut map = HashMap::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        if map.insert(id(item), i).is_some() {
            return Err(Error::parse("scene", format!("duplicate {what} id {}", id(item))));
        }
    }
    Ok(map)
}

impl SceneGraph {
    pub fn new(
        scene_id: impl Into<String>,
        junctions: Vec<Junction3D>,
        lines: Vec<Line3D>,
        planes: Vec<PlanePolygon>,
    ) -> Result<Self> {
        let junction_index = index_of(&junctions, |j| j.id, "junction")?;
        let line_index = index_of(&lines, |l| l.id, "line")?;
        let plane_index = index_of(&planes, |p| p.plane_id, "plane")?;

        for j in &junctions {
            if !j.position.iter().all(|c| c.is_finite()) {
                return Err(Error::parse("scene", format!("junction {} is not finite", j.id)));
            }
        }
        for l in &lines {
            for e in l.endpoints {
                if !junction_index.contains_key(&e) {
                    return Err(Error::parse(
                        "scene",
                        format!("line {} references missing junction {e}", l.id),
                    ));
                }
            }
            if l.endpoints[0] == l.endpoints[1] {
                return Err(Error::parse("scene", format!("line {} is a loop", l.id)));
            }
            for p in &l.adjacent_planes {
                if !plane_index.contains_key(p) {
                    return Err(Error::topology(*p, format!("line {} references missing plane", l.id)));
                }
            }
        }
        for p in &planes {
            let loops = std::iter::once(&p.outer_boundary).chain(p.openings.iter().map(|o| &o.polygon));
            for j in loops.flatten() {
                if !junction_index.contains_key(j) {
                    return Err(Error::topology(p.plane_id, format!("missing junction {j}")));
                }
            }
            if let Some(parent) = p.parent_wall {
                if !plane_index.contains_key(&parent) {
                    return Err(Error::topology(p.plane_id, format!("missing parent plane {parent}")));
                }
            }
        }

        Ok(Self {
            scene_id: scene_id.into(),
            junctions,
            lines,
            planes,
            junction_index,
            line_index,
            plane_index,
        })
    }

    pub fn junctions(&self) -> &[Junction3D] {
        &self.junctions
    }

    pub fn lines(&self) -> &[Line3D] {
        &self.lines
    }

    pub fn planes(&self) -> &[PlanePolygon] {
        &self.planes
    }

    pub fn junction(&self, id: i64) -> Option<&Junction3D> {
        self.junction_index.get(&id).map(|&i| &self.junctions[i])
    }

    pub fn line(&self, id: i64) -> Option<&Line3D> {
        self.line_index.get(&id).map(|&i| &self.lines[i])
    }

    pub fn plane(&self, id: i64) -> Option<&PlanePolygon> {
        self.plane_index.get(&id).map(|&i| &self.planes[i])
    }

    /// Position of a junction known to exist.
    ///
    /// # Panics
    /// If `id` is not a junction of this scene.
    pub fn position(&self, id: i64) -> Vec3 {
        self.junction(id)
            .unwrap_or_else(|| panic!("junction {id} not in scene {}", self.scene_id))
            .position
    }

    pub fn positions(&self, ids: &[i64]) -> Vec<Vec3> {
        ids.iter().map(|&id| self.position(id)).collect()
    }

    /// Replaces plane parameters, e.g. after refitting. Ids must match one-to-one.
    pub(crate) fn with_plane_params(mut self, params: &HashMap<i64, PlaneParams>) -> Self {
        for plane in &mut self.planes {
            if let Some(p) = params.get(&plane.plane_id) {
                plane.params = *p;
            }
        }
        self
    }

    pub(crate) fn planes_mut(&mut self) -> &mut [PlanePolygon] {
        &mut self.planes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        use PlaneLabel::*;
        assert_eq!(line_label_from_planes(Door, Wall).unwrap(), LineLabel::Door);
        assert_eq!(line_label_from_planes(Wall, Wall).unwrap(), LineLabel::Wall);
        assert_eq!(line_label_from_planes(Ceiling, Wall).unwrap(), LineLabel::Ceiling);
        assert_eq!(line_label_from_planes(Floor, Wall).unwrap(), LineLabel::Floor);
        assert_eq!(line_label_from_planes(Door, Door).unwrap(), LineLabel::Door);
        assert_eq!(line_label_from_planes(Window, Wall).unwrap(), LineLabel::Window);
        assert_eq!(line_label_from_planes(Window, Window).unwrap(), LineLabel::Window);
    }

    #[test]
    fn mapping_is_symmetric_and_never_invalid() {
        for a in PlaneLabel::ALL {
            for b in PlaneLabel::ALL {
                let ab = line_label_from_planes(a, b);
                let ba = line_label_from_planes(b, a);
                match (ab, ba) {
                    (Ok(x), Ok(y)) => {
                        assert_eq!(x, y);
                        assert_ne!(x, LineLabel::Invalid);
                    }
                    (Err(_), Err(_)) => {}
                    _ => panic!("asymmetric result for {a}/{b}"),
                }
            }
        }
    }

    #[test]
    fn pairs_outside_table_are_errors() {
        use PlaneLabel::*;
        for (a, b) in [(Floor, Ceiling), (Floor, Floor), (Door, Window), (Ceiling, Door)] {
            assert!(matches!(line_label_from_planes(a, b), Err(Error::UnmappedPair(..))));
        }
    }

    fn tiny_scene(labels: &[PlaneLabel], adjacent: Vec<i64>) -> (SceneGraph, Line3D) {
        let junctions = vec![
            Junction3D { id: 0, position: Vec3::zeros() },
            Junction3D { id: 1, position: Vec3::x() },
        ];
        let line = Line3D { id: 0, endpoints: [0, 1], adjacent_planes: adjacent };
        let planes = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| PlanePolygon {
                plane_id: i as i64,
                params: PlaneParams::new(Vec3::z(), 0.0).unwrap(),
                label,
                semantic: String::new(),
                line_ids: vec![0],
                outer_boundary: vec![0, 1],
                openings: vec![],
                parent_wall: None,
            })
            .collect();
        let scene = SceneGraph::new("t", junctions, vec![line.clone()], planes).unwrap();
        (scene, line)
    }

    #[test]
    fn label_for_line_uses_adjacent_planes() {
        let (s, l) = tiny_scene(&[PlaneLabel::Door, PlaneLabel::Wall], vec![0, 1]);
        assert_eq!(line_label_for(&l, &s).unwrap(), LineLabel::Door);
        let (s, l) = tiny_scene(&[PlaneLabel::Wall, PlaneLabel::Wall], vec![0, 1]);
        assert_eq!(line_label_for(&l, &s).unwrap(), LineLabel::Wall);
        let (s, l) = tiny_scene(&[PlaneLabel::Ceiling], vec![0]);
        assert_eq!(line_label_for(&l, &s).unwrap(), LineLabel::Ceiling);
        let (s, l) = tiny_scene(&[PlaneLabel::Floor, PlaneLabel::Ceiling], vec![0, 1]);
        assert!(line_label_for(&l, &s).is_err());
    }

    #[test]
    fn plane_params_normalize() {
        let p = PlaneParams::new(Vec3::new(0.0, 0.0, 2.0), -4.0).unwrap();
        assert_eq!(p.normal, Vec3::z());
        assert_eq!(p.offset, -2.0);
        assert!(PlaneParams::new(Vec3::zeros(), 1.0).is_err());
    }
}
