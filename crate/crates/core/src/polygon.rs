//! Planar polygon helpers: 2D frames on a plane, signed area, point
//! containment and segment/region overlap.

use crate::geometry::Vec2;
use crate::scene::{PlaneParams, Vec3};

/// Orthonormal 2D coordinate system on a plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub normal: Vec3,
}

impl PlaneFrame {
    /// Frame with origin at the foot of the perpendicular from the coordinate
    /// origin and `u x v = normal`.
    pub fn new(plane: &PlaneParams) -> Self {
        let n = plane.normal;
        let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let u = n.cross(&helper).normalize();
        let v = n.cross(&u);
        Self {
            origin: -n * plane.offset,
            u,
            v,
            normal: n,
        }
    }

    pub fn axes(&self) -> (Vec3, Vec3) {
        (self.u, self.v)
    }

    pub fn to_2d(&self, p: &Vec3) -> Vec2 {
        let d = p - self.origin;
        Vec2::new(d.dot(&self.u), d.dot(&self.v))
    }

    pub fn to_3d(&self, q: &Vec2) -> Vec3 {
        self.origin + self.u * q.x + self.v * q.y
    }
}

/// Shoelace area; positive for counter-clockwise loops.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        * 0.5
}

/// Newell vector of a 3D loop: normal direction times twice the area.
pub fn newell_normal(poly: &[Vec3]) -> Vec3 {
    let n = poly.len();
    let mut acc = Vec3::zeros();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        acc.x += (a.y - b.y) * (a.z + b.z);
        acc.y += (a.z - b.z) * (a.x + b.x);
        acc.z += (a.x - b.x) * (a.y + b.y);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

fn distance_to_edge(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Even-odd containment; points within `eps` of an edge report `Boundary`.
pub fn locate_point(p: &Vec2, poly: &[Vec2], eps: f64) -> Containment {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        if distance_to_edge(p, a, b) <= eps {
            return Containment::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

/// Parameters along `a -> b` where it meets the edges of `poly`, including the
/// ends of collinear overlaps.
fn edge_crossings(a: &Vec2, b: &Vec2, poly: &[Vec2], out: &mut Vec<f64>) {
    let d = b - a;
    let n = poly.len();
    for i in 0..n {
        let c = poly[i];
        let e = poly[(i + 1) % n] - c;
        let denom = d.perp(&e);
        let ac = c - a;
        let scale = d.norm() * e.norm();
        if denom.abs() > 1e-12 * scale {
            let t = ac.perp(&e) / denom;
            let s = ac.perp(&d) / denom;
            if (-1e-12..=1.0 + 1e-12).contains(&s) {
                out.push(t);
            }
        } else if d.norm_squared() > 0.0 {
            // parallel: record where the edge's endpoints sit along the segment
            let len2 = d.norm_squared();
            out.push(ac.dot(&d) / len2);
            out.push((ac + e).dot(&d) / len2);
        }
    }
}

/// A polygon with holes. The outer boundary is part of the region; hole
/// boundaries are not.
#[derive(Debug, Clone, PartialEq)]
pub struct Region2D {
    pub outer: Vec<Vec2>,
    pub holes: Vec<Vec<Vec2>>,
}

impl Region2D {
    pub fn covers(&self, p: &Vec2, eps: f64) -> bool {
        if locate_point(p, &self.outer, eps) == Containment::Outside {
            return false;
        }
        self.holes
            .iter()
            .all(|h| locate_point(p, h, eps) == Containment::Outside)
    }

    /// Sub-intervals of `[0, 1]` along `a -> b` that the region covers, merged
    /// and sorted.
    pub fn covered_intervals(&self, a: &Vec2, b: &Vec2, eps: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![0.0, 1.0];
        edge_crossings(a, b, &self.outer, &mut cuts);
        for h in &self.holes {
            edge_crossings(a, b, h, &mut cuts);
        }
        cuts.retain(|t| t.is_finite());
        for t in cuts.iter_mut() {
            *t = t.clamp(0.0, 1.0);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut covered: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if t1 <= t0 {
                continue;
            }
            let mid = a + (b - a) * (0.5 * (t0 + t1));
            if self.covers(&mid, eps) {
                match covered.last_mut() {
                    Some(last) if last.1 == t0 => last.1 = t1,
                    _ => covered.push((t0, t1)),
                }
            }
        }
        covered
    }

    /// Bounding box `(min, max)` of the outer boundary.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.outer {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(lo: f64, hi: f64) -> Vec<Vec2> {
        vec![Vec2::new(lo, lo), Vec2::new(hi, lo), Vec2::new(hi, hi), Vec2::new(lo, hi)]
    }

    #[test]
    fn area_sign_follows_orientation() {
        let sq = square(0.0, 2.0);
        assert_eq!(signed_area(&sq), 4.0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(signed_area(&rev), -4.0);
    }

    #[test]
    fn containment() {
        let sq = square(0.0, 1.0);
        assert_eq!(locate_point(&Vec2::new(0.5, 0.5), &sq, 1e-9), Containment::Inside);
        assert_eq!(locate_point(&Vec2::new(1.0, 0.5), &sq, 1e-9), Containment::Boundary);
        assert_eq!(locate_point(&Vec2::new(1.5, 0.5), &sq, 1e-9), Containment::Outside);
    }

    #[test]
    fn hole_boundary_is_not_covered() {
        let r = Region2D { outer: square(0.0, 4.0), holes: vec![square(1.0, 2.0)] };
        assert!(r.covers(&Vec2::new(0.0, 0.5), 1e-9));
        assert!(!r.covers(&Vec2::new(1.5, 1.5), 1e-9));
        assert!(!r.covers(&Vec2::new(1.0, 1.5), 1e-9));
        assert!(r.covers(&Vec2::new(3.0, 3.0), 1e-9));
    }

    #[test]
    fn covered_intervals_through_hole() {
        let r = Region2D { outer: square(0.0, 4.0), holes: vec![square(1.0, 2.0)] };
        let iv = r.covered_intervals(&Vec2::new(-1.0, 1.5), &Vec2::new(5.0, 1.5), 1e-9);
        assert_eq!(iv.len(), 2);
        let t = |x: f64| (x + 1.0) / 6.0;
        assert!((iv[0].0 - t(0.0)).abs() < 1e-12 && (iv[0].1 - t(1.0)).abs() < 1e-12);
        assert!((iv[1].0 - t(2.0)).abs() < 1e-12 && (iv[1].1 - t(4.0)).abs() < 1e-12);
    }

    #[test]
    fn frame_roundtrip() {
        let plane = PlaneParams::new(Vec3::new(1.0, 2.0, -0.5), 7.0).unwrap();
        let f = PlaneFrame::new(&plane);
        assert!((f.u.cross(&f.v) - plane.normal).norm() < 1e-12);
        let q = Vec2::new(3.0, -4.0);
        let p = f.to_3d(&q);
        assert!(plane.signed_distance(&p).abs() < 1e-12);
        assert!((f.to_2d(&p) - q).norm() < 1e-12);
    }
}
