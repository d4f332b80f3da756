//! Open/closed door classification from semantic masks.
//!
//! Each door polygon is sampled uniformly, the samples are projected into
//! every view of the scene, and the fraction landing on `door` pixels is the
//! closed ratio. Doors above the ratio threshold, or never seen, are closed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{CameraView, MaskClass, SemanticMask};
use crate::polygon::{locate_point, newell_normal, signed_area, Containment, PlaneFrame};
use crate::scene::{PlaneLabel, PlaneParams, SceneGraph, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoorState {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorStateReport {
    pub door_id: i64,
    /// `None` when no sample was visible in any view.
    #[serde(with = "ratio_repr")]
    pub closed_ratio: Option<f64>,
    pub visible_samples: usize,
    pub state: DoorState,
}

mod ratio_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(c) => Repr::Value(*c),
            None => Repr::Text("undetermined".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(c) => Ok(Some(c)),
            Repr::Text(t) if t == "undetermined" => Ok(None),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("unexpected closed ratio {t:?}"))),
        }
    }
}

/// Seed for one door, stable across platforms and runs.
pub fn derive_seed(seed: u64, scene_id: &str, door_id: i64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((scene_id.len() as u64).to_le_bytes());
    h.update(scene_id.as_bytes());
    h.update(door_id.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Draws `n` points uniformly from a planar polygon by rejection sampling
/// over its bounding box in the polygon's own 2D frame.
pub fn sample_polygon_uniform(vertices: &[Vec3], n: usize, seed: u64) -> Result<Vec<Vec3>> {
    let newell = newell_normal(vertices);
    let area = 0.5 * newell.norm();
    if vertices.len() < 3 || area.is_nan() || area < 1e-6 {
        return Err(Error::DegeneratePolygon(area));
    }
    let centroid = vertices.iter().fold(Vec3::zeros(), |a, p| a + p) / vertices.len() as f64;
    let normal = newell / newell.norm();
    let plane = PlaneParams { normal, offset: -normal.dot(&centroid) };
    let frame = PlaneFrame::new(&plane);
    let poly: Vec<_> = vertices.iter().map(|p| frame.to_2d(p)).collect();
    debug_assert!(signed_area(&poly) > 0.0);

    let (mut lo, mut hi) = (poly[0], poly[0]);
    for q in &poly {
        lo = lo.inf(q);
        hi = hi.sup(q);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let q = crate::geometry::Vec2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        if locate_point(&q, &poly, 0.0) == Containment::Inside {
            out.push(frame.to_3d(&q));
        }
    }
    Ok(out)
}

/// Computes the closed ratio of one door from its world-space samples.
///
/// A sample counts for a view when it lies in front of the camera and its
/// rounded pixel is inside the image; it votes closed when that pixel is a
/// door pixel. Views are reduced in `view_id` order.
pub fn door_closed_ratio(
    door_id: i64,
    samples: &[Vec3],
    views: &[(&CameraView, &SemanticMask)],
    closed_threshold: f64,
) -> Result<DoorStateReport> {
    let mut ordered: Vec<_> = views.to_vec();
    ordered.sort_by(|a, b| a.0.view_id.cmp(&b.0.view_id));

    let mut counted = 0usize;
    let mut on_door = 0usize;
    for (view, mask) in ordered {
        mask.check_matches(view)?;
        let tf = view.transform();
        for s in samples {
            let p = tf.transform_point(s);
            let Ok(px) = view.intrinsics.project(&p) else { continue };
            let (x, y) = (px.x.floor(), px.y.floor());
            if !(x >= 0.0 && y >= 0.0 && x < view.width as f64 && y < view.height as f64) {
                continue;
            }
            counted += 1;
            if mask.class_at(x as u32, y as u32) == MaskClass::Door {
                on_door += 1;
            }
        }
    }

    let closed_ratio = (counted > 0).then(|| on_door as f64 / counted as f64);
    let state = match closed_ratio {
        Some(c) if c <= closed_threshold => DoorState::Open,
        _ => DoorState::Closed,
    };
    Ok(DoorStateReport {
        door_id,
        closed_ratio,
        visible_samples: counted,
        state,
    })
}

/// Classifies every door opening of a scene. Reports are sorted by door id.
pub fn scene_door_states(
    scene: &SceneGraph,
    views: &[(&CameraView, &SemanticMask)],
    samples_per_door: usize,
    closed_threshold: f64,
    seed: u64,
) -> Result<Vec<DoorStateReport>> {
    let mut doors: Vec<_> = scene
        .planes()
        .iter()
        .filter(|p| p.label == PlaneLabel::Door && p.parent_wall.is_some())
        .collect();
    doors.sort_by_key(|p| p.plane_id);
    doors
        .into_iter()
        .map(|door| {
            let verts = scene.positions(&door.outer_boundary);
            let samples = sample_polygon_uniform(&verts, samples_per_door, derive_seed(seed, &scene.scene_id, door.plane_id))?;
            door_closed_ratio(door.plane_id, &samples, views, closed_threshold)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Intrinsics;
    use crate::ingest::LabelMap;
    use nalgebra::Matrix3;

    fn unit_square() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn sampling_is_deterministic_and_contained() {
        let a = sample_polygon_uniform(&unit_square(), 100, 42).unwrap();
        let b = sample_polygon_uniform(&unit_square(), 100, 42).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        for p in &a {
            assert!(p.x > -1e-12 && p.x < 1.0 + 1e-12 && p.y > -1e-12 && p.y < 1.0 + 1e-12);
            assert!(p.z.abs() < 1e-12);
        }
        assert_ne!(a, sample_polygon_uniform(&unit_square(), 100, 43).unwrap());
    }

    #[test]
    fn triangle_sample_centroid() {
        let tri = [Vec3::new(0.0, 0.0, 5.0), Vec3::new(3.0, 0.0, 5.0), Vec3::new(0.0, 3.0, 5.0)];
        let pts = sample_polygon_uniform(&tri, 100_000, 7).unwrap();
        let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / pts.len() as f64;
        let truth = Vec3::new(1.0, 1.0, 5.0);
        assert!((mean.x - truth.x).abs() < 0.01 * truth.x);
        assert!((mean.y - truth.y).abs() < 0.01 * truth.y);
    }

    #[test]
    fn zero_area_polygon() {
        let line = [Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0];
        assert!(matches!(sample_polygon_uniform(&line, 10, 0), Err(Error::DegeneratePolygon(_))));
    }

    fn view(w: u32, h: u32) -> CameraView {
        let k = Intrinsics { fx: 10.0, fy: 10.0, cx: w as f64 / 2.0, cy: h as f64 / 2.0 };
        CameraView::new("v", k, Matrix3::identity(), Vec3::zeros(), w, h, None).unwrap()
    }

    /// Samples at z = 10 that land on pixels `(10 + i, 5)`.
    fn samples_on_row(n: usize) -> Vec<Vec3> {
        (0..n).map(|i| Vec3::new(i as f64, 0.0, 10.0)).collect()
    }

    fn mask_with_door_cols(w: u32, h: u32, door_cols: &[u32]) -> SemanticMask {
        let map: LabelMap = [(1u8, MaskClass::Door), (2u8, MaskClass::Wall)].into_iter().collect();
        let mut px = vec![2u8; (w * h) as usize];
        for y in 0..h {
            for &x in door_cols {
                px[(y * w + x) as usize] = 1;
            }
        }
        SemanticMask::new(w, h, px, map).unwrap()
    }

    #[test]
    fn ratio_cases() {
        let v = view(20, 10);
        let all = mask_with_door_cols(20, 10, &(0..20).collect::<Vec<_>>());
        let r = door_closed_ratio(1, &samples_on_row(10), &[(&v, &all)], 0.3).unwrap();
        assert_eq!(r.closed_ratio, Some(1.0));
        assert_eq!(r.state, DoorState::Closed);

        let three = mask_with_door_cols(20, 10, &[10, 11, 12]);
        let r = door_closed_ratio(1, &samples_on_row(10), &[(&v, &three)], 0.3).unwrap();
        assert_eq!(r.closed_ratio, Some(0.3));
        assert_eq!(r.visible_samples, 10);
        assert_eq!(r.state, DoorState::Open);

        let behind: Vec<Vec3> = samples_on_row(10).iter().map(|p| Vec3::new(p.x, p.y, -p.z)).collect();
        let r = door_closed_ratio(1, &behind, &[(&v, &three)], 0.3).unwrap();
        assert_eq!(r.closed_ratio, None);
        assert_eq!(r.state, DoorState::Closed);
    }

    #[test]
    fn mismatched_mask_is_rejected() {
        let v = view(20, 10);
        let m = mask_with_door_cols(10, 10, &[]);
        assert!(matches!(
            door_closed_ratio(1, &samples_on_row(3), &[(&v, &m)], 0.3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn report_json_shape() {
        let r = DoorStateReport { door_id: 3, closed_ratio: None, visible_samples: 0, state: DoorState::Closed };
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"closed_ratio\":\"undetermined\""));
        let back: DoorStateReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
