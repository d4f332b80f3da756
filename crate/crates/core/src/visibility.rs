//! Per-view visible portions of scene lines.
//!
//! Each 3D line is represented by parameter intervals along it (0 at its
//! first junction, 1 at its second). An interval is clipped to the view
//! frustum and then folded over every occluding plane region: the part on
//! the far side of the plane is projected onto it along the viewing rays,
//! whatever the region covers there is removed, and the rest is kept.
//! Surviving intervals are projected to pixels and their endpoints labelled
//! `proper` when they are scene junctions and `false` otherwise.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::doors::{DoorState, DoorStateReport};
use crate::error::Result;
use crate::geometry::{Intrinsics, RigidTransform, Vec2};
use crate::ingest::CameraView;
use crate::polygon::{PlaneFrame, Region2D};
use crate::scene::{line_label_for, JunctionLabel, LineLabel, OpeningKind, PlaneParams, SceneGraph, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamInterval {
    pub line_id: i64,
    pub lo: f64,
    pub hi: f64,
}

impl ParamInterval {
    pub fn new(line_id: i64, lo: f64, hi: f64) -> Self {
        Self { line_id, lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Sorts intervals and joins those separated by less than `eps`.
pub fn merge_intervals(mut ivs: Vec<ParamInterval>, eps: f64) -> Vec<ParamInterval> {
    ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<ParamInterval> = Vec::with_capacity(ivs.len());
    for iv in ivs {
        match out.last_mut() {
            Some(last) if iv.lo - last.hi < eps => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// A structural plane polygon minus the openings that let light through.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderRegion {
    pub plane_id: i64,
    pub params: PlaneParams,
    pub outer: Vec<Vec3>,
    pub openings: Vec<Vec<Vec3>>,
}

/// Builds the occluding region of every wall, floor and ceiling.
///
/// Windows are always cut out. Doors are cut out only when reported open;
/// doors missing from `door_states` count as closed. Door and window planes
/// themselves never occlude. Output is sorted by plane id.
pub fn occluder_regions(scene: &SceneGraph, door_states: &[DoorStateReport]) -> Vec<OccluderRegion> {
    let open: HashSet<i64> = door_states
        .iter()
        .filter(|d| d.state == DoorState::Open)
        .map(|d| d.door_id)
        .collect();
    let mut out: Vec<OccluderRegion> = scene
        .planes()
        .iter()
        .filter(|p| p.label.is_structural() && p.outer_boundary.len() >= 3)
        .map(|p| OccluderRegion {
            plane_id: p.plane_id,
            params: p.params,
            outer: scene.positions(&p.outer_boundary),
            openings: p
                .openings
                .iter()
                .filter(|o| o.kind == OpeningKind::Window || open.contains(&o.door_id))
                .map(|o| scene.positions(&o.polygon))
                .collect(),
        })
        .collect();
    out.sort_by_key(|r| r.plane_id);
    out
}

/// An occluder expressed in one camera's frame, with its 2D region cached.
#[derive(Debug, Clone)]
pub struct CameraOccluder {
    pub plane_id: i64,
    pub plane: PlaneParams,
    pub frame: PlaneFrame,
    pub region: Region2D,
    bounds: (Vec2, Vec2),
}

impl OccluderRegion {
    pub fn in_camera(&self, tf: &RigidTransform) -> CameraOccluder {
        let plane = tf.transform_plane(&self.params);
        let frame = PlaneFrame::new(&plane);
        let flatten = |loop_: &Vec<Vec3>| -> Vec<Vec2> {
            loop_.iter().map(|p| frame.to_2d(&tf.transform_point(p))).collect()
        };
        let region = Region2D {
            outer: flatten(&self.outer),
            holes: self.openings.iter().map(flatten).collect(),
        };
        let bounds = region.bounds();
        CameraOccluder {
            plane_id: self.plane_id,
            plane,
            frame,
            region,
            bounds,
        }
    }
}

/// Clips the camera-frame segment `p1 -> p2` to the part that is in front of
/// the near plane and projects inside the image.
pub fn clip_to_frustum(
    line_id: i64,
    p1: &Vec3,
    p2: &Vec3,
    k: &Intrinsics,
    width: u32,
    height: u32,
    tol: &Tolerances,
) -> Option<ParamInterval> {
    let (w, h) = (width as f64, height as f64);
    // each half-space is `f(p) >= 0` with `f` affine in p
    let half_spaces: [&dyn Fn(&Vec3) -> f64; 5] = [
        &|p| p.z - tol.z_min,
        &|p| k.fx * p.x + k.cx * p.z,
        &|p| -(k.fx * p.x + (k.cx - w) * p.z),
        &|p| k.fy * p.y + k.cy * p.z,
        &|p| -(k.fy * p.y + (k.cy - h) * p.z),
    ];
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for f in half_spaces {
        let (f0, f1) = (f(p1), f(p2));
        if f0 < 0.0 && f1 < 0.0 {
            return None;
        }
        if f0 >= 0.0 && f1 >= 0.0 {
            continue;
        }
        let t = f0 / (f0 - f1);
        if f0 < 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
    }
    (hi - lo > tol.param_eps).then(|| ParamInterval::new(line_id, lo, hi))
}

/// Where the viewing ray of `p` meets `plane`, as a multiple of `p`.
/// Values in `(0, 1)` mean the plane lies between the camera and the point.
pub fn occlusion_parameter(p: &Vec3, plane: &PlaneParams) -> Option<f64> {
    let denom = p.dot(&plane.normal);
    (denom.abs() > f64::EPSILON * p.norm()).then(|| -plane.offset / denom)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlaneSplit {
    pub front: Vec<ParamInterval>,
    pub behind: Vec<ParamInterval>,
}

/// Splits an interval of the camera-frame segment `p1 -> p2` into the part
/// on the camera's side of `plane` and the part behind it.
///
/// Classification uses signed distances: a point is behind when it and the
/// camera centre lie strictly on opposite sides, which is exactly when its
/// occlusion parameter is in `(0, 1)`. Segments lying in the plane, and any
/// segment when the camera itself is on the plane, are entirely in front.
pub fn split_by_plane(iv: &ParamInterval, p1: &Vec3, p2: &Vec3, plane: &PlaneParams, tol: &Tolerances) -> PlaneSplit {
    let all_front = PlaneSplit { front: vec![*iv], behind: vec![] };
    let eps = tol.plane_eps;
    if plane.offset.abs() <= eps {
        return all_front;
    }
    let s0 = plane.signed_distance(p1);
    let s1 = plane.signed_distance(p2);
    if s0.abs() <= eps && s1.abs() <= eps {
        return all_front;
    }
    let side = plane.offset.signum();
    let at = |t: f64| side * (s0 + t * (s1 - s0));
    let (a, b) = (at(iv.lo), at(iv.hi));
    if a >= -eps && b >= -eps {
        return all_front;
    }
    if a <= eps && b <= eps {
        return PlaneSplit { front: vec![], behind: vec![*iv] };
    }
    let t_star = (s0 / (s0 - s1)).clamp(iv.lo, iv.hi);
    let first = ParamInterval::new(iv.line_id, iv.lo, t_star);
    let second = ParamInterval::new(iv.line_id, t_star, iv.hi);
    let (front, behind) = if a < 0.0 { (second, first) } else { (first, second) };
    if front.len() < tol.param_eps {
        return PlaneSplit { front: vec![], behind: vec![*iv] };
    }
    if behind.len() < tol.param_eps {
        return all_front;
    }
    PlaneSplit { front: vec![front], behind: vec![behind] }
}

/// Removes from a behind-the-plane interval whatever the occluder hides and
/// returns the visible remainder.
pub fn occlude_by_region(
    behind: &ParamInterval,
    p1: &Vec3,
    p2: &Vec3,
    occ: &CameraOccluder,
    tol: &Tolerances,
) -> Vec<ParamInterval> {
    let dir = p2 - p1;
    let on_plane = |t: f64| -> Option<Vec3> {
        let p = p1 + dir * t;
        occlusion_parameter(&p, &occ.plane).map(|a| p * a)
    };
    let (Some(qa), Some(qb)) = (on_plane(behind.lo), on_plane(behind.hi)) else {
        return vec![*behind];
    };
    let (a2, b2) = (occ.frame.to_2d(&qa), occ.frame.to_2d(&qb));

    let (lo, hi) = occ.bounds;
    let seg_lo = a2.inf(&b2);
    let seg_hi = a2.sup(&b2);
    let eps = tol.plane_eps;
    if seg_hi.x < lo.x - eps || seg_hi.y < lo.y - eps || seg_lo.x > hi.x + eps || seg_lo.y > hi.y + eps {
        return vec![*behind];
    }

    if (b2 - a2).norm() <= eps {
        let mid = (a2 + b2) * 0.5;
        return if occ.region.covers(&mid, eps) { vec![] } else { vec![*behind] };
    }

    // covered pieces along the projected segment, mapped back onto the line
    let to_param = |u: f64| -> f64 {
        if u <= 0.0 {
            return behind.lo;
        }
        if u >= 1.0 {
            return behind.hi;
        }
        let q = qa + (qb - qa) * u;
        let c1 = p1.cross(&q);
        let c2 = dir.cross(&q);
        (-(c1.dot(&c2)) / c2.norm_squared()).clamp(behind.lo, behind.hi)
    };
    let covered = occ.region.covered_intervals(&a2, &b2, eps);

    let mut visible = Vec::new();
    let mut cursor = behind.lo;
    for (u0, u1) in covered {
        let (t0, t1) = (to_param(u0), to_param(u1));
        let (t0, t1) = (t0.min(t1), t0.max(t1));
        if t0 - cursor >= tol.param_eps {
            visible.push(ParamInterval::new(behind.line_id, cursor, t0));
        }
        cursor = cursor.max(t1);
    }
    if behind.hi - cursor >= tol.param_eps {
        visible.push(ParamInterval::new(behind.line_id, cursor, behind.hi));
    }
    visible
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineVisibility {
    pub line_id: i64,
    pub intervals: Vec<ParamInterval>,
}

/// Visible intervals of every scene line in one view, given explicit
/// occluders. Lines with nothing visible are omitted; output is sorted by
/// line id.
pub fn visible_intervals_with(
    scene: &SceneGraph,
    view: &CameraView,
    occluders: &[OccluderRegion],
    tol: &Tolerances,
) -> Vec<LineVisibility> {
    let tf = view.transform();
    let mut regions: Vec<CameraOccluder> = occluders.iter().map(|o| o.in_camera(&tf)).collect();
    regions.sort_by_key(|r| r.plane_id);

    let mut lines: Vec<_> = scene.lines().iter().collect();
    lines.sort_by_key(|l| l.id);

    let mut out = Vec::new();
    for line in lines {
        let p1 = tf.transform_point(&scene.position(line.endpoints[0]));
        let p2 = tf.transform_point(&scene.position(line.endpoints[1]));
        let Some(clipped) = clip_to_frustum(line.id, &p1, &p2, &view.intrinsics, view.width, view.height, tol) else {
            continue;
        };
        let mut visible = vec![clipped];
        for occ in &regions {
            if line.adjacent_planes.contains(&occ.plane_id) {
                continue;
            }
            let mut next = Vec::with_capacity(visible.len());
            for iv in &visible {
                let split = split_by_plane(iv, &p1, &p2, &occ.plane, tol);
                next.extend(split.front);
                for b in &split.behind {
                    next.extend(occlude_by_region(b, &p1, &p2, occ, tol));
                }
            }
            visible = merge_intervals(next, tol.param_eps);
            if visible.is_empty() {
                break;
            }
        }
        if !visible.is_empty() {
            out.push(LineVisibility { line_id: line.id, intervals: visible });
        }
    }
    out
}

pub fn visible_intervals(
    scene: &SceneGraph,
    view: &CameraView,
    door_states: &[DoorStateReport],
    tol: &Tolerances,
) -> Vec<LineVisibility> {
    visible_intervals_with(scene, view, &occluder_regions(scene, door_states), tol)
}

/// One visible piece of a scene line in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment2D {
    pub endpoints: [Vec2; 2],
    pub label: LineLabel,
    pub endpoint_labels: [JunctionLabel; 2],
    pub source_line: i64,
}

/// Projects visible intervals to labelled pixel segments. Segments shorter
/// than the pixel tolerance are dropped.
pub fn segments_from_intervals(
    scene: &SceneGraph,
    view: &CameraView,
    visibility: &[LineVisibility],
    tol: &Tolerances,
) -> Result<Vec<Segment2D>> {
    let tf = view.transform();
    let (w, h) = (view.width as f64, view.height as f64);
    let mut out = Vec::new();
    for lv in visibility {
        let line = scene.line(lv.line_id).expect("visibility refers to scene lines");
        let label = line_label_for(line, scene)?;
        let p1 = tf.transform_point(&scene.position(line.endpoints[0]));
        let p2 = tf.transform_point(&scene.position(line.endpoints[1]));
        let pixel = |t: f64| -> Vec2 {
            let p = p1 + (p2 - p1) * t;
            let k = &view.intrinsics;
            // clipping guarantees z >= z_min
            let z = p.z.max(tol.z_min);
            Vec2::new((k.fx * p.x / z + k.cx).clamp(0.0, w), (k.fy * p.y / z + k.cy).clamp(0.0, h))
        };
        let kind = |t: f64| {
            if t <= tol.param_eps || t >= 1.0 - tol.param_eps {
                JunctionLabel::Proper
            } else {
                JunctionLabel::False
            }
        };
        for iv in &lv.intervals {
            let a = pixel(iv.lo);
            let b = pixel(iv.hi);
            if (b - a).norm() < tol.pixel_eps {
                continue;
            }
            out.push(Segment2D {
                endpoints: [a, b],
                label,
                endpoint_labels: [kind(iv.lo), kind(iv.hi)],
                source_line: line.id,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedJunction {
    pub xy: [f64; 2],
    pub label: JunctionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedSegment {
    pub junctions: [usize; 2],
    pub label: LineLabel,
}

/// Ground-truth wireframe of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedView {
    pub view_id: String,
    pub width: u32,
    pub height: u32,
    pub junctions: Vec<AnnotatedJunction>,
    pub segments: Vec<AnnotatedSegment>,
}

impl AnnotatedView {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation serializes")
    }
}

/// Joins segment endpoints into junctions. Endpoints within the pixel
/// tolerance of an existing junction reuse it; a junction is `proper` if
/// any endpoint merged into it is.
pub fn assemble_view(view: &CameraView, segments: &[Segment2D], tol: &Tolerances) -> AnnotatedView {
    let mut junctions: Vec<AnnotatedJunction> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut out_segments = Vec::new();

    let mut find_or_add = |p: Vec2, label: JunctionLabel| -> usize {
        if let Some(i) = junctions
            .iter()
            .position(|j| (Vec2::new(j.xy[0], j.xy[1]) - p).norm() < tol.pixel_eps)
        {
            if label == JunctionLabel::Proper {
                junctions[i].label = JunctionLabel::Proper;
            }
            return i;
        }
        junctions.push(AnnotatedJunction { xy: [p.x, p.y], label });
        junctions.len() - 1
    };

    for s in segments {
        let a = find_or_add(s.endpoints[0], s.endpoint_labels[0]);
        let b = find_or_add(s.endpoints[1], s.endpoint_labels[1]);
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        out_segments.push(AnnotatedSegment { junctions: [a, b], label: s.label });
    }

    AnnotatedView {
        view_id: view.view_id.clone(),
        width: view.width,
        height: view.height,
        junctions,
        segments: out_segments,
    }
}

/// Ground-truth wireframe of `scene` seen from `view`.
pub fn visible_segments(
    scene: &SceneGraph,
    view: &CameraView,
    door_states: &[DoorStateReport],
    tol: &Tolerances,
) -> Result<AnnotatedView> {
    let vis = visible_intervals(scene, view, door_states, tol);
    let segs = segments_from_intervals(scene, view, &vis, tol)?;
    Ok(assemble_view(view, &segs, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn z_plane(z: f64) -> PlaneParams {
        PlaneParams::new(Vec3::z(), -z).unwrap()
    }

    #[test]
    fn occlusion_parameter_example() {
        assert_eq!(occlusion_parameter(&Vec3::new(0.0, 0.0, 10.0), &z_plane(5.0)), Some(0.5));
        let a = occlusion_parameter(&Vec3::new(0.0, 0.0, 2.0), &z_plane(5.0)).unwrap();
        let b = occlusion_parameter(&Vec3::new(0.0, 0.0, 3.0), &z_plane(5.0)).unwrap();
        assert_eq!(a, 2.5);
        assert_relative_eq!(b, 5.0 / 3.0);
    }

    #[test]
    fn split_cases() {
        let iv = ParamInterval::new(0, 0.0, 1.0);
        let near = (Vec3::new(0.0, 0.0, 2.0), Vec3::new(1.0, 0.0, 3.0));
        let s = split_by_plane(&iv, &near.0, &near.1, &z_plane(5.0), &tol());
        assert_eq!(s.front, vec![iv]);
        assert!(s.behind.is_empty());

        let far = (Vec3::new(0.0, 0.0, 6.0), Vec3::new(1.0, 0.0, 9.0));
        let s = split_by_plane(&iv, &far.0, &far.1, &z_plane(5.0), &tol());
        assert_eq!(s.behind, vec![iv]);

        let crossing = (Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 1.0, 10.0));
        let s = split_by_plane(&iv, &crossing.0, &crossing.1, &z_plane(5.0), &tol());
        assert_eq!(s.front.len(), 1);
        assert_eq!(s.behind.len(), 1);
        assert_relative_eq!(s.front[0].hi, 3.0 / 8.0, epsilon = 1e-15);
        assert_relative_eq!(s.behind[0].lo, 3.0 / 8.0, epsilon = 1e-15);

        // plane behind the camera
        let s = split_by_plane(&iv, &crossing.0, &crossing.1, &z_plane(-5.0), &tol());
        assert_eq!(s.front, vec![iv]);

        // segment lying in the plane
        let inside = (Vec3::new(0.0, 0.0, 5.0), Vec3::new(3.0, 1.0, 5.0));
        let s = split_by_plane(&iv, &inside.0, &inside.1, &z_plane(5.0), &tol());
        assert_eq!(s.front, vec![iv]);
    }

    #[test]
    fn frustum_clipping() {
        let k = Intrinsics { fx: 100.0, fy: 100.0, cx: 100.0, cy: 100.0 };
        let inside = clip_to_frustum(0, &Vec3::new(-0.1, 0.0, 1.0), &Vec3::new(0.1, 0.2, 2.0), &k, 200, 200, &tol());
        assert_eq!(inside, Some(ParamInterval::new(0, 0.0, 1.0)));
        let behind = clip_to_frustum(0, &Vec3::new(0.0, 0.0, -1.0), &Vec3::new(0.1, 0.2, -2.0), &k, 200, 200, &tol());
        assert!(behind.is_none());
    }

    #[test]
    fn merge_joins_touching() {
        let m = merge_intervals(
            vec![
                ParamInterval::new(0, 0.5, 0.7),
                ParamInterval::new(0, 0.0, 0.2),
                ParamInterval::new(0, 0.2 + 1e-9, 0.4),
            ],
            1e-6,
        );
        assert_eq!(m, vec![ParamInterval::new(0, 0.0, 0.4), ParamInterval::new(0, 0.5, 0.7)]);
    }

    fn square_occluder(z: f64, half: f64, hole: Option<f64>) -> CameraOccluder {
        let corners = |h: f64| {
            vec![
                Vec3::new(-h, -h, z),
                Vec3::new(h, -h, z),
                Vec3::new(h, h, z),
                Vec3::new(-h, h, z),
            ]
        };
        OccluderRegion {
            plane_id: 0,
            params: z_plane(z),
            outer: corners(half),
            openings: hole.map(corners).into_iter().collect(),
        }
        .in_camera(&RigidTransform::identity())
    }

    #[test]
    fn full_and_no_coverage() {
        let iv = ParamInterval::new(0, 0.0, 1.0);
        let (p1, p2) = (Vec3::new(-1.0, 0.0, 10.0), Vec3::new(1.0, 0.0, 10.0));
        assert!(occlude_by_region(&iv, &p1, &p2, &square_occluder(5.0, 100.0, None), &tol()).is_empty());
        let (q1, q2) = (Vec3::new(50.0, 50.0, 10.0), Vec3::new(60.0, 50.0, 10.0));
        assert_eq!(occlude_by_region(&iv, &q1, &q2, &square_occluder(5.0, 1.0, None), &tol()), vec![iv]);
    }

    #[test]
    fn middle_coverage_maps_back_through_rays() {
        // segment from x=-4 to x=4 at z=10 (oblique in depth), square of half-width 1 at z=5
        let iv = ParamInterval::new(0, 0.0, 1.0);
        let (p1, p2) = (Vec3::new(-4.0, 0.0, 10.0), Vec3::new(4.0, 0.0, 10.0));
        let vis = occlude_by_region(&iv, &p1, &p2, &square_occluder(5.0, 1.0, None), &tol());
        assert_eq!(vis.len(), 2);
        // x/z = 1/5 at the square's edge -> x = 2 at depth 10 -> t = 0.25 and 0.75
        assert_relative_eq!(vis[0].hi, 0.25, epsilon = 1e-12);
        assert_relative_eq!(vis[1].lo, 0.75, epsilon = 1e-12);

        let vis = occlude_by_region(&iv, &p1, &p2, &square_occluder(5.0, 3.0, Some(1.0)), &tol());
        assert_eq!(vis.len(), 1);
        assert_relative_eq!(vis[0].lo, 0.25, epsilon = 1e-12);
        assert_relative_eq!(vis[0].hi, 0.75, epsilon = 1e-12);
    }
}
