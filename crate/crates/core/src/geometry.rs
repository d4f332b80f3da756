//! Projective primitives: homogeneous mapping, DLT plane fitting, rigid
//! transforms of points and planes, and pinhole projection.

use nalgebra::{Matrix3, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{PlaneParams, Vec3};

pub type Vec2 = Vector2<f64>;

/// Maps a homogeneous 4-vector to its Euclidean point.
pub fn from_homogeneous(p: &Vector4<f64>) -> Result<Vec3> {
    if p.w.abs() <= 1e-12 {
        return Err(Error::PointAtInfinity(p.w));
    }
    Ok(Vec3::new(p.x / p.w, p.y / p.w, p.z / p.w))
}

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors
/// as columns (`vectors[row][col]`).
pub(crate) fn symmetric_eigen<const N: usize>(mut a: [[f64; N]; N]) -> ([f64; N], [[f64; N]; N]) {
    let mut v = [[0.0; N]; N];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..N).map(|i| a[i][i] * a[i][i]).sum::<f64>() + off;
        if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (rp, rq) = (a[p], a[q]);
                for k in 0..N {
                    a[p][k] = c * rp[k] - s * rq[k];
                    a[q][k] = s * rp[k] + c * rq[k];
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = std::array::from_fn(|k| a[order[k]][order[k]]);
    let vectors = std::array::from_fn(|r| std::array::from_fn(|k| v[r][order[k]]));
    (values, vectors)
}

/// Largest singular value of the point cloud after removing its principal
/// direction. Zero for collinear points.
fn second_spread(points: &[Vec3]) -> (f64, f64) {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = [[0.0; 3]; 3];
    for p in points {
        let c = p - centroid;
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    let (values, vectors) = symmetric_eigen(cov);
    let principal = Vec3::new(vectors[0][2], vectors[1][2], vectors[2][2]);
    let spread = values[2].max(0.0).sqrt();

    let mut rest = [[0.0; 3]; 3];
    for p in points {
        let c = p - centroid;
        let r = c - principal * principal.dot(&c);
        for i in 0..3 {
            for j in 0..3 {
                rest[i][j] += r[i] * r[j];
            }
        }
    }
    let (rest_values, _) = symmetric_eigen(rest);
    (spread, rest_values[2].max(0.0).sqrt())
}

/// Fits plane parameters to points by minimizing `|M pi|^2` subject to
/// `|pi| = 1`, where the rows of `M` are `(x, y, z, 1)`.
///
/// The minimizer is the eigenvector of `M^T M` with the smallest eigenvalue.
/// It is then rescaled to a unit normal with `d <= 0`; when `d == 0` the first
/// nonzero normal component is made positive.
pub fn fit_plane_dlt(points: &[Vec3]) -> Result<PlaneParams> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("{} points cannot define a plane", points.len())));
    }
    let (spread, second) = second_spread(points);
    if spread.is_nan() || spread <= 0.0 || second <= 1e-9 * spread {
        return Err(Error::Degenerate("points are collinear".into()));
    }

    let mut normal = [[0.0; 4]; 4];
    for p in points {
        let row = [p.x, p.y, p.z, 1.0];
        for i in 0..4 {
            for j in 0..4 {
                normal[i][j] += row[i] * row[j];
            }
        }
    }
    let (_, vectors) = symmetric_eigen(normal);
    let pi = Vector4::new(vectors[0][0], vectors[1][0], vectors[2][0], vectors[3][0]);
    let plane = PlaneParams::from_vector(&pi)?;
    Ok(canonical_sign(plane))
}

fn canonical_sign(plane: PlaneParams) -> PlaneParams {
    if plane.offset > 0.0 {
        return plane.flipped();
    }
    if plane.offset == 0.0 {
        if let Some(c) = plane.normal.iter().find(|c| **c != 0.0) {
            if *c < 0.0 {
                return plane.flipped();
            }
        }
    }
    plane
}

/// `|M pi|` with `pi` rescaled to unit length: the quantity the DLT fit minimizes.
pub fn algebraic_residual(points: &[Vec3], pi: &Vector4<f64>) -> f64 {
    let unit = pi / pi.norm();
    points
        .iter()
        .map(|p| {
            let r = unit.x * p.x + unit.y * p.y + unit.z * p.z + unit.w;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

pub fn point_plane_distance(p: &Vec3, plane: &PlaneParams) -> f64 {
    plane.signed_distance(p).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub max: f64,
    pub median: f64,
    pub min: f64,
}

pub fn residual_summary(plane: &PlaneParams, junctions: &[Vec3]) -> Result<ResidualSummary> {
    if junctions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut d: Vec<f64> = junctions.iter().map(|p| point_plane_distance(p, plane)).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let median = if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    };
    Ok(ResidualSummary {
        max: d[n - 1],
        median,
        min: d[0],
    })
}

/// `q' = R q + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

/// Checks `R^T R = I` and `det R = 1` within `tol`.
pub fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    let ortho_err = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !ortho_err.is_finite() || ortho_err > tol || (det - 1.0).abs() > tol {
        return Err(Error::InvalidRotation { ortho_err, det });
    }
    Ok(())
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        check_rotation(&rotation, 1e-6)?;
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Maps a plane so that incidence is preserved: a point `q` on `plane`
    /// maps to `T q` on the result. This is `T^{-T} pi`.
    pub fn transform_plane(&self, plane: &PlaneParams) -> PlaneParams {
        let normal = self.rotation * plane.normal;
        let offset = plane.offset - normal.dot(&self.translation);
        // R preserves length, so only rounding separates |n| from 1.
        PlaneParams::new(normal, offset).unwrap_or(PlaneParams { normal, offset })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn project(&self, p_cam: &Vec3) -> Result<Vec2> {
        project_to_pixels(self, p_cam)
    }
}

/// Pinhole projection of a camera-frame point to pixel coordinates.
pub fn project_to_pixels(k: &Intrinsics, p_cam: &Vec3) -> Result<Vec2> {
    if p_cam.z <= 0.0 {
        return Err(Error::BehindCamera(p_cam.z));
    }
    Ok(Vec2::new(
        k.fx * p_cam.x / p_cam.z + k.cx,
        k.fy * p_cam.y / p_cam.z + k.cy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn homogeneous_mapping() {
        assert_eq!(from_homogeneous(&Vector4::new(2.0, 4.0, 6.0, 2.0)).unwrap(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(from_homogeneous(&Vector4::new(7.0, -1.0, 0.5, 1.0)).unwrap(), Vec3::new(7.0, -1.0, 0.5));
        assert!(matches!(
            from_homogeneous(&Vector4::new(1.0, 1.0, 1.0, 0.0)),
            Err(Error::PointAtInfinity(_))
        ));
    }

    #[test]
    fn fit_square_in_xy_plane() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        let p = fit_plane_dlt(&pts).unwrap();
        assert_relative_eq!(p.normal, Vec3::z(), epsilon = 1e-12);
        assert!(p.offset.abs() < 1e-12);
    }

    #[test]
    fn fit_simplex_plane() {
        let pts = [Vec3::x(), Vec3::y(), Vec3::z()];
        let p = fit_plane_dlt(&pts).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_relative_eq!(p.normal, Vec3::new(s, s, s), epsilon = 1e-12);
        assert_relative_eq!(p.offset, -s, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_plane_dlt(&[Vec3::x(), Vec3::y()]).is_err());
        let collinear: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert!(matches!(fit_plane_dlt(&collinear), Err(Error::Degenerate(_))));
    }

    #[test]
    fn distances() {
        let z0 = PlaneParams::new(Vec3::z(), 0.0).unwrap();
        assert_eq!(point_plane_distance(&Vec3::new(0.0, 0.0, 5.0), &z0), 5.0);
        assert_eq!(point_plane_distance(&Vec3::new(3.0, -2.0, 0.0), &z0), 0.0);
    }

    #[test]
    fn distance_matches_projected_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let plane = PlaneParams::new(n, rng.random_range(-500.0..500.0)).unwrap();
            let p = Vec3::new(rng.random_range(-900.0..900.0), rng.random_range(-900.0..900.0), rng.random_range(-900.0..900.0));
            // foot of the perpendicular, found by line search along the normal
            let on_plane = Vec3::new(0.0, 0.0, 0.0) - plane.normal * plane.offset;
            let foot = p - plane.normal * (p - on_plane).dot(&plane.normal);
            assert!((point_plane_distance(&p, &plane) - (p - foot).norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn summaries() {
        let z0 = PlaneParams::new(Vec3::z(), 0.0).unwrap();
        let exact = [Vec3::x(), Vec3::y(), Vec3::zeros()];
        let s = residual_summary(&z0, &exact).unwrap();
        assert_eq!((s.max, s.median, s.min), (0.0, 0.0, 0.0));
        let pts = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -2.0), Vec3::new(0.0, 0.0, 3.0)];
        let s = residual_summary(&z0, &pts).unwrap();
        assert_eq!((s.max, s.median, s.min), (3.0, 2.0, 1.0));
        let pts = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 4.0)];
        assert_eq!(residual_summary(&z0, &pts).unwrap().median, 2.5);
        assert!(matches!(residual_summary(&z0, &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn transforms() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(RigidTransform::identity().transform_point(&p), p);
        let shift = RigidTransform::new(Matrix3::identity(), Vec3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!(shift.transform_point(&p), Vec3::new(1.0, 2.0, 8.0));

        let z0 = PlaneParams::new(Vec3::z(), 0.0).unwrap();
        assert_eq!(RigidTransform::identity().transform_plane(&z0), z0);
        let moved = shift.transform_plane(&z0);
        assert_relative_eq!(moved.normal, Vec3::z());
        assert_relative_eq!(moved.offset, -5.0);

        let bad = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(RigidTransform::new(bad, Vec3::zeros()), Err(Error::InvalidRotation { .. })));
    }

    #[test]
    fn transform_roundtrip_and_incidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let rot = Rotation3::new(axis * rng.random_range(0.1..3.0)).into_inner();
            let t = Vec3::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
            let tf = RigidTransform::new(rot, t).unwrap();
            let p = Vec3::new(rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
            assert!((tf.inverse().transform_point(&tf.transform_point(&p)) - p).norm() < 1e-9);

            let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let plane = PlaneParams::new(n, rng.random_range(-1e3..1e3)).unwrap();
            let moved = tf.transform_plane(&plane);
            let (u, v) = crate::polygon::PlaneFrame::new(&plane).axes();
            let origin = -plane.normal * plane.offset;
            for _ in 0..100 {
                let q = origin + u * rng.random_range(-1.0..1.0) + v * rng.random_range(-1.0..1.0);
                assert!(moved.signed_distance(&tf.transform_point(&q)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection() {
        let k = Intrinsics { fx: 256.0, fy: 256.0, cx: 256.0, cy: 256.0 };
        assert_eq!(project_to_pixels(&k, &Vec3::new(0.0, 0.0, 1.0)).unwrap(), Vec2::new(256.0, 256.0));
        assert_eq!(project_to_pixels(&k, &Vec3::new(1.0, 0.0, 1.0)).unwrap(), Vec2::new(512.0, 256.0));
        assert!(matches!(project_to_pixels(&k, &Vec3::new(0.0, 0.0, -1.0)), Err(Error::BehindCamera(_))));
    }

    #[test]
    fn projection_preserves_collinearity() {
        let k = Intrinsics { fx: 300.0, fy: 310.0, cx: 250.0, cy: 240.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..5.0));
            let b = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..5.0));
            let m = a + (b - a) * rng.random_range(0.0..1.0);
            let (pa, pb, pm) = (k.project(&a).unwrap(), k.project(&b).unwrap(), k.project(&m).unwrap());
            let scale = (pb - pa).norm().max(1.0);
            let cross = (pb - pa).perp(&(pm - pa)) / (scale * scale);
            assert!(cross.abs() < 1e-6);
        }
    }

    #[test]
    fn jacobi_matches_diagonal() {
        let (vals, vecs) = symmetric_eigen([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!(vals, [1.0, 2.0, 3.0]);
        assert_eq!(vecs[1][0].abs(), 1.0);
    }
}
