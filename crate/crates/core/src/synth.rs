//! Synthetic scenes, cameras and semantic masks for fixtures, benchmarks and
//! tests.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Vec2};
use crate::ingest::{
    build_scene, label_map_to_json, view_to_pose, CameraView, JunctionRecord, LabelMap, LineRecord, MaskClass, PlaneRecord,
    SceneFile, SemanticMask,
};
use crate::polygon::{locate_point, newell_normal, Containment, PlaneFrame};
use crate::scene::{OpeningKind, PlaneLabel, PlaneParams, SceneGraph, Vec3};

/// Incrementally assembles a scene file, sharing junctions and lines between
/// planes that touch.
#[derive(Debug, Clone)]
pub struct SceneBuilder {
    scene_id: String,
    junctions: Vec<Vec3>,
    lines: Vec<[usize; 2]>,
    line_index: HashMap<(usize, usize), usize>,
    planes: Vec<PlaneRecord>,
}

impl SceneBuilder {
    pub fn new(scene_id: impl Into<String>) -> Self {
        Self {
            scene_id: scene_id.into(),
            junctions: Vec::new(),
            lines: Vec::new(),
            line_index: HashMap::new(),
            planes: Vec::new(),
        }
    }

    pub fn junction(&mut self, p: Vec3) -> usize {
        if let Some(i) = self.junctions.iter().position(|q| (q - p).norm() <= 1e-9) {
            return i;
        }
        self.junctions.push(p);
        self.junctions.len() - 1
    }

    pub fn line(&mut self, a: Vec3, b: Vec3) -> usize {
        let (ja, jb) = (self.junction(a), self.junction(b));
        let key = (ja.min(jb), ja.max(jb));
        if let Some(&i) = self.line_index.get(&key) {
            return i;
        }
        self.lines.push([ja, jb]);
        self.line_index.insert(key, self.lines.len() - 1);
        self.lines.len() - 1
    }

    /// Adds a plane bounded by `loops` (outer first). Its parameters are
    /// taken from the outer loop's Newell normal.
    pub fn plane(&mut self, label: PlaneLabel, loops: &[Vec<Vec3>], parent_wall: Option<i64>) -> i64 {
        let mut line_ids = Vec::new();
        for lp in loops {
            for i in 0..lp.len() {
                line_ids.push(self.line(lp[i], lp[(i + 1) % lp.len()]) as i64);
            }
        }
        let n = newell_normal(&loops[0]).normalize();
        let id = self.planes.len() as i64;
        self.planes.push(PlaneRecord {
            id,
            lines: line_ids,
            normal: [n.x, n.y, n.z],
            offset: -n.dot(&loops[0][0]),
            label,
            semantic: label.as_str().to_string(),
            parent_wall,
        });
        id
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn build(self) -> SceneFile {
        SceneFile {
            scene_id: self.scene_id,
            junctions: self
                .junctions
                .iter()
                .enumerate()
                .map(|(i, p)| JunctionRecord { id: i as i64, xyz: [p.x, p.y, p.z] })
                .collect(),
            lines: self
                .lines
                .iter()
                .enumerate()
                .map(|(i, l)| LineRecord { id: i as i64, junctions: [l[0] as i64, l[1] as i64] })
                .collect(),
            planes: self.planes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WallSide {
    XMin,
    XMax,
    YMin,
    YMax,
}

impl WallSide {
    pub const ALL: [WallSide; 4] = [WallSide::XMin, WallSide::XMax, WallSide::YMin, WallSide::YMax];
}

/// A rectangular door or window cut into one wall of a box room. `u` runs
/// along the wall (world y for x-walls, world x for y-walls).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpeningSpec {
    pub side: WallSide,
    pub kind: OpeningKind,
    pub u: (f64, f64),
    pub z: (f64, f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoomIds {
    pub walls: Vec<i64>,
    pub floor: i64,
    pub ceiling: i64,
    pub doors: Vec<i64>,
    pub windows: Vec<i64>,
}

fn rect_on_wall(side: WallSide, min: &Vec3, max: &Vec3, u: (f64, f64), z: (f64, f64)) -> Vec<Vec3> {
    let at = |u: f64, z: f64| match side {
        WallSide::XMin => Vec3::new(min.x, u, z),
        WallSide::XMax => Vec3::new(max.x, u, z),
        WallSide::YMin => Vec3::new(u, min.y, z),
        WallSide::YMax => Vec3::new(u, max.y, z),
    };
    vec![at(u.0, z.0), at(u.1, z.0), at(u.1, z.1), at(u.0, z.1)]
}

/// Adds an axis-aligned room: four walls, a floor, a ceiling and the given
/// openings.
pub fn add_box_room(b: &mut SceneBuilder, min: Vec3, max: Vec3, openings: &[OpeningSpec]) -> RoomIds {
    let mut ids = RoomIds::default();
    for side in WallSide::ALL {
        let span = match side {
            WallSide::XMin | WallSide::XMax => (min.y, max.y),
            WallSide::YMin | WallSide::YMax => (min.x, max.x),
        };
        let mine: Vec<&OpeningSpec> = openings.iter().filter(|o| o.side == side).collect();
        let mut loops = vec![rect_on_wall(side, &min, &max, span, (min.z, max.z))];
        for o in &mine {
            loops.push(rect_on_wall(side, &min, &max, o.u, o.z));
        }
        let wall = b.plane(PlaneLabel::Wall, &loops, None);
        ids.walls.push(wall);
        for o in mine {
            let rect = rect_on_wall(side, &min, &max, o.u, o.z);
            match o.kind {
                OpeningKind::Door => ids.doors.push(b.plane(PlaneLabel::Door, &[rect], Some(wall))),
                OpeningKind::Window => ids.windows.push(b.plane(PlaneLabel::Window, &[rect], Some(wall))),
            }
        }
    }
    let floor = vec![
        Vec3::new(min.x, min.y, min.z),
        Vec3::new(max.x, min.y, min.z),
        Vec3::new(max.x, max.y, min.z),
        Vec3::new(min.x, max.y, min.z),
    ];
    let ceiling: Vec<Vec3> = floor.iter().map(|p| Vec3::new(p.x, p.y, max.z)).collect();
    ids.floor = b.plane(PlaneLabel::Floor, &[floor], None);
    ids.ceiling = b.plane(PlaneLabel::Ceiling, &[ceiling], None);
    ids
}

/// An empty 1 m cube: 8 junctions, 12 lines, 6 planes.
pub fn unit_cube() -> SceneFile {
    let mut b = SceneBuilder::new("unit_cube");
    add_box_room(&mut b, Vec3::zeros(), Vec3::new(1000.0, 1000.0, 1000.0), &[]);
    b.build()
}

/// An empty room of the given size in millimetres.
pub fn box_room(scene_id: &str, size: Vec3) -> SceneFile {
    let mut b = SceneBuilder::new(scene_id);
    add_box_room(&mut b, Vec3::zeros(), size, &[]);
    b.build()
}

/// Two 4 x 3 m rooms separated by a 100 mm wall with a door through it,
/// and a window in the first room.
pub fn two_rooms(scene_id: &str) -> SceneFile {
    let mut b = SceneBuilder::new(scene_id);
    let door = |side| OpeningSpec { side, kind: OpeningKind::Door, u: (1000.0, 1900.0), z: (10.0, 2100.0) };
    let window = OpeningSpec { side: WallSide::YMin, kind: OpeningKind::Window, u: (1000.0, 2500.0), z: (900.0, 1900.0) };
    add_box_room(&mut b, Vec3::zeros(), Vec3::new(4000.0, 3000.0, 2800.0), &[door(WallSide::XMax), window]);
    add_box_room(&mut b, Vec3::new(4100.0, 0.0, 0.0), Vec3::new(8100.0, 3000.0, 2800.0), &[door(WallSide::XMin)]);
    b.build()
}

/// A `cols x rows` grid of rooms with doors between horizontal neighbours and
/// a window in every room.
pub fn room_grid(scene_id: &str, cols: usize, rows: usize) -> SceneFile {
    let mut b = SceneBuilder::new(scene_id);
    let (w, d, h, gap) = (4000.0, 3500.0, 2700.0, 100.0);
    for r in 0..rows {
        for c in 0..cols {
            let min = Vec3::new(c as f64 * (w + gap), r as f64 * (d + gap), 0.0);
            let max = min + Vec3::new(w, d, h);
            let door = |side| OpeningSpec { side, kind: OpeningKind::Door, u: (min.y + 1200.0, min.y + 2100.0), z: (10.0, 2100.0) };
            let mut openings = vec![OpeningSpec {
                side: if r == 0 { WallSide::YMin } else { WallSide::YMax },
                kind: OpeningKind::Window,
                u: (min.x + 1000.0, min.x + 2800.0),
                z: (900.0, 2000.0),
            }];
            if c > 0 {
                openings.push(door(WallSide::XMin));
            }
            if c + 1 < cols {
                openings.push(door(WallSide::XMax));
            }
            add_box_room(&mut b, min, max, &openings);
        }
    }
    b.build()
}

/// A large room with free-standing wall panels at random positions and
/// orientations. Some panels carry a window or a door opening. Returns the
/// scene and the ids of its door planes.
pub fn random_occluder_scene<R: Rng>(scene_id: &str, rng: &mut R) -> (SceneFile, Vec<i64>) {
    let size = Vec3::new(10_000.0, 8_000.0, 3_000.0);
    let mut b = SceneBuilder::new(scene_id);
    add_box_room(&mut b, Vec3::zeros(), size, &[]);
    let mut doors = Vec::new();
    let panels = rng.random_range(2..=6);
    for _ in 0..panels {
        let centre = Vec2::new(rng.random_range(1500.0..8500.0), rng.random_range(1500.0..6500.0));
        let yaw: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let dir = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        let half = rng.random_range(300.0..1800.0);
        let z0 = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..800.0) };
        let z1 = rng.random_range(1500.0..2900.0);
        let base = Vec3::new(centre.x, centre.y, 0.0);
        let at = |u: f64, z: f64| base + dir * u + Vec3::new(0.0, 0.0, z);
        let outer = vec![at(-half, z0), at(half, z0), at(half, z1), at(-half, z1)];
        let hole = rng.random_bool(0.4).then(|| {
            let (u0, u1) = (-half * rng.random_range(0.2..0.7), half * rng.random_range(0.2..0.7));
            let (h0, h1) = (z0 + (z1 - z0) * rng.random_range(0.1..0.4), z0 + (z1 - z0) * rng.random_range(0.6..0.9));
            (vec![at(u0, h0), at(u1, h0), at(u1, h1), at(u0, h1)], rng.random_bool(0.5))
        });
        match hole {
            None => {
                b.plane(PlaneLabel::Wall, &[outer], None);
            }
            Some((rect, is_door)) => {
                let wall = b.plane(PlaneLabel::Wall, &[outer, rect.clone()], None);
                let label = if is_door { PlaneLabel::Door } else { PlaneLabel::Window };
                let id = b.plane(label, &[rect], Some(wall));
                if is_door {
                    doors.push(id);
                }
            }
        }
    }
    (b.build(), doors)
}

/// World-to-camera rotation and translation for a camera at `eye` looking
/// at `target` with world z up. Camera axes: x right, y down, z forward.
pub fn look_at(eye: Vec3, target: Vec3) -> (Matrix3<f64>, Vec3) {
    let forward = (target - eye).normalize();
    let right = forward.cross(&Vec3::z()).normalize();
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let t = -(r * eye);
    (r, t)
}

/// A pinhole view with the principal point at the image centre and the given
/// horizontal field of view.
pub fn camera_view(view_id: &str, eye: Vec3, target: Vec3, width: u32, height: u32, hfov_deg: f64) -> CameraView {
    let f = width as f64 / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
    let k = Intrinsics { fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0 };
    let (r, t) = look_at(eye, target);
    CameraView::new(view_id, k, r, t, width, height, None).expect("look_at yields a valid pose")
}

/// A camera at a random position inside the box `[lo, hi]`, looking in a
/// random horizontal direction with a modest pitch.
pub fn random_camera<R: Rng>(view_id: &str, lo: Vec3, hi: Vec3, rng: &mut R) -> CameraView {
    let eye = Vec3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
    let yaw: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let pitch: f64 = rng.random_range(-0.35..0.35);
    let dir = Vec3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), pitch.sin());
    camera_view(view_id, eye, eye + dir * 1000.0, 640, 480, rng.random_range(60.0..100.0))
}

pub const MASK_OTHER: u8 = 0;
pub const MASK_DOOR: u8 = 1;
pub const MASK_WALL: u8 = 2;
pub const MASK_FLOOR: u8 = 3;
pub const MASK_CEILING: u8 = 4;

pub fn default_label_map() -> LabelMap {
    [
        (MASK_OTHER, MaskClass::Other),
        (MASK_DOOR, MaskClass::Door),
        (MASK_WALL, MaskClass::Wall),
        (MASK_FLOOR, MaskClass::Floor),
        (MASK_CEILING, MaskClass::Ceiling),
    ]
    .into_iter()
    .collect()
}

struct Surface {
    plane: PlaneParams,
    frame: PlaneFrame,
    outer: Vec<Vec2>,
    holes: Vec<Vec<Vec2>>,
    class: u8,
}

/// Renders a semantic mask by casting one ray per pixel through the pixel
/// coordinate itself. Openings are see-through; door planes listed in
/// `closed_doors` are drawn as doors, the rest are left open. Windows are
/// transparent.
pub fn render_mask(scene: &SceneGraph, view: &CameraView, closed_doors: &[i64]) -> SemanticMask {
    let mut surfaces = Vec::new();
    for p in scene.planes() {
        if p.outer_boundary.len() < 3 {
            continue;
        }
        let class = match p.label {
            PlaneLabel::Wall => MASK_WALL,
            PlaneLabel::Floor => MASK_FLOOR,
            PlaneLabel::Ceiling => MASK_CEILING,
            PlaneLabel::Door if closed_doors.contains(&p.plane_id) => MASK_DOOR,
            _ => continue,
        };
        let frame = PlaneFrame::new(&p.params);
        let flat = |ids: &[i64]| -> Vec<Vec2> { scene.positions(ids).iter().map(|q| frame.to_2d(q)).collect() };
        surfaces.push(Surface {
            plane: p.params,
            frame,
            outer: flat(&p.outer_boundary),
            holes: p.openings.iter().map(|o| flat(&o.polygon)).collect(),
            class,
        });
    }

    let rt = view.rotation.transpose();
    let origin = -(rt * view.translation);
    let k = &view.intrinsics;
    let mut pixels = vec![MASK_OTHER; (view.width * view.height) as usize];
    for y in 0..view.height {
        for x in 0..view.width {
            let d_cam = Vec3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
            let dir = rt * d_cam;
            let mut best = (f64::INFINITY, MASK_OTHER);
            for s in &surfaces {
                let denom = s.plane.normal.dot(&dir);
                if denom.abs() < 1e-12 {
                    continue;
                }
                let depth = -s.plane.signed_distance(&origin) / denom;
                if depth <= 1e-9 || depth >= best.0 {
                    continue;
                }
                let q = s.frame.to_2d(&(origin + dir * depth));
                let inside = locate_point(&q, &s.outer, 1e-9) != Containment::Outside
                    && s.holes.iter().all(|h| locate_point(&q, h, 1e-9) == Containment::Outside);
                if inside {
                    best = (depth, s.class);
                }
            }
            pixels[(y * view.width + x) as usize] = best.1;
        }
    }
    SemanticMask::new(view.width, view.height, pixels, default_label_map()).expect("pixel buffer matches size")
}

/// A scene with its cameras and the doors drawn closed in its masks.
#[derive(Debug, Clone)]
pub struct CorpusScene {
    pub name: String,
    pub file: SceneFile,
    pub views: Vec<CameraView>,
    pub closed_doors: Vec<i64>,
}

/// Writes a scene directory in the command-line input layout:
/// `scene.json`, `label_map.json`, `views/<view>.json` and, when
/// `with_masks` is set, `masks/<view>.png`.
pub fn write_scene_dir(root: &Path, scene: &CorpusScene, with_masks: bool) -> Result<PathBuf> {
    let dir = root.join(&scene.name);
    let graph = build_scene(&scene.file)?;
    for sub in ["views", "masks"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let write = |path: PathBuf, text: String| fs::write(&path, text + "\n").map_err(|e| Error::io(path, e));
    write(dir.join("scene.json"), serde_json::to_string_pretty(&scene.file).expect("scene serializes"))?;
    write(dir.join("label_map.json"), label_map_to_json(&default_label_map()))?;
    for v in &scene.views {
        let mut pose = view_to_pose(v);
        if with_masks {
            let rel = format!("masks/{}.png", v.view_id);
            render_mask(&graph, v, &scene.closed_doors).save_png(dir.join(&rel))?;
            pose.mask = Some(rel);
        }
        write(dir.join("views").join(format!("{}.json", v.view_id)), serde_json::to_string_pretty(&pose).expect("pose serializes"))?;
    }
    Ok(dir)
}

/// Cameras at standing height in the middle of a room, looking towards each
/// wall and two corners.
pub fn room_cameras(prefix: &str, min: Vec3, max: Vec3, count: usize, width: u32, height: u32) -> Vec<CameraView> {
    let c = (min + max) / 2.0;
    let eye = Vec3::new(c.x - (max.x - min.x) * 0.15, c.y - (max.y - min.y) * 0.1, 1400.0);
    let targets = [
        Vec3::new(max.x, c.y, 1300.0),
        Vec3::new(c.x, max.y, 1100.0),
        Vec3::new(min.x, c.y, 1500.0),
        Vec3::new(c.x, min.y, 1200.0),
        Vec3::new(max.x, max.y, 900.0),
        Vec3::new(min.x, min.y, 1800.0),
    ];
    (0..count)
        .map(|i| camera_view(&format!("{prefix}{i:02}"), eye, targets[i % targets.len()], width, height, 90.0 + 5.0 * (i % 4) as f64))
        .collect()
}

/// The ten-scene corpus used by the determinism check: empty rooms, two-room
/// scenes with open and closed doors, and small room grids.
pub fn demo_corpus() -> Vec<CorpusScene> {
    let (w, h) = (320, 240);
    let mut out = Vec::new();
    for (i, size) in [(4000.0, 3000.0, 2800.0), (5200.0, 3600.0, 2600.0), (3000.0, 3000.0, 3000.0), (6000.0, 2500.0, 2700.0)]
        .into_iter()
        .enumerate()
    {
        let size = Vec3::new(size.0, size.1, size.2);
        out.push(CorpusScene {
            name: format!("scene_{i:02}"),
            file: box_room(&format!("scene_{i:02}"), size),
            views: room_cameras("view_", Vec3::zeros(), size, 3 + i % 2, w, h),
            closed_doors: Vec::new(),
        });
    }
    for i in 4..8 {
        let name = format!("scene_{i:02}");
        let file = two_rooms(&name);
        let doors: Vec<i64> = file.planes.iter().filter(|p| p.label == PlaneLabel::Door).map(|p| p.id).collect();
        let closed = if i % 2 == 0 { doors } else { Vec::new() };
        let mut views = room_cameras("a_", Vec3::zeros(), Vec3::new(4000.0, 3000.0, 2800.0), 3, w, h);
        views.extend(room_cameras("b_", Vec3::new(4100.0, 0.0, 0.0), Vec3::new(8100.0, 3000.0, 2800.0), 2, w, h));
        out.push(CorpusScene { name, file, views, closed_doors: closed });
    }
    for i in 8..10 {
        let name = format!("scene_{i:02}");
        let file = room_grid(&name, 3, 1);
        let doors: Vec<i64> = file.planes.iter().filter(|p| p.label == PlaneLabel::Door).map(|p| p.id).collect();
        let closed = doors.into_iter().skip(i - 8).step_by(2).collect();
        let views = (0..3)
            .flat_map(|c| {
                let min = Vec3::new(c as f64 * 4100.0, 0.0, 0.0);
                room_cameras(&format!("r{c}_"), min, min + Vec3::new(4000.0, 3500.0, 2700.0), 2, w, h)
            })
            .collect();
        out.push(CorpusScene { name, file, views, closed_doors: closed });
    }
    out
}

/// Builds a scene file into a graph; panics on malformed synthetic input.
pub fn build(file: &SceneFile) -> SceneGraph {
    build_scene(file).expect("synthetic scene is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::LineLabel;

    #[test]
    fn unit_cube_counts() {
        let s = build(&unit_cube());
        assert_eq!((s.junctions().len(), s.lines().len(), s.planes().len()), (8, 12, 6));
    }

    #[test]
    fn two_room_topology() {
        let s = build(&two_rooms("tr"));
        let doors: Vec<_> = s.planes().iter().filter(|p| p.label == PlaneLabel::Door).collect();
        assert_eq!(doors.len(), 2);
        assert!(doors.iter().all(|d| d.parent_wall.is_some()));
        for l in s.lines() {
            crate::scene::line_label_for(l, &s).unwrap();
        }
        let door_lines = s
            .lines()
            .iter()
            .filter(|l| crate::scene::line_label_for(l, &s).unwrap() == LineLabel::Door)
            .count();
        assert_eq!(door_lines, 8);
    }

    #[test]
    fn look_at_is_a_rotation() {
        let (r, t) = look_at(Vec3::new(1.0, 2.0, 3.0), Vec3::new(5.0, 2.0, 3.0));
        crate::geometry::check_rotation(&r, 1e-12).unwrap();
        let p = r * Vec3::new(5.0, 2.0, 3.0) + t;
        assert!((p - Vec3::new(0.0, 0.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn mask_sees_closed_door() {
        let s = build(&two_rooms("tr"));
        let v = camera_view("v", Vec3::new(1500.0, 1450.0, 1200.0), Vec3::new(4000.0, 1450.0, 1200.0), 64, 48, 60.0);
        let door = s.planes().iter().find(|p| p.label == PlaneLabel::Door).unwrap().plane_id;
        let closed = render_mask(&s, &v, &[door]);
        assert_eq!(closed.class_at(32, 24), MaskClass::Door);
        let open = render_mask(&s, &v, &[]);
        assert_eq!(open.class_at(32, 24), MaskClass::Wall);
    }
}
