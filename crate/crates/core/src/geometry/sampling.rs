use super::{SplitMix64, TriMesh};
use crate::{Error, Result, Vec3};

/// Points sampled on an object surface together with their face normals.
///
/// Fields anchored to the same point set can be compared entry by entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectPointSet {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub seed: u64,
}

impl ObjectPointSet {
    /// True when both sets have the same length and every point and normal
    /// agrees within `tol` per component. Sets read back from a field file are
    /// rounded to f32, so exact comparison is too strict there.
    pub fn matches(&self, other: &ObjectPointSet, tol: f64) -> bool {
        let close = |a: &[Vec3], b: &[Vec3]| {
            a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).amax() <= tol)
        };
        close(&self.points, &other.points) && close(&self.normals, &other.normals)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Apply a rigid motion to points and normals.
    pub fn transformed(&self, rotation: &nalgebra::Rotation3<f64>, translation: &Vec3) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| rotation * p + translation)
                .collect(),
            normals: self.normals.iter().map(|n| rotation * n).collect(),
            seed: self.seed,
        }
    }
}

/// Area-weighted uniform sampling by cumulative-area inversion.
///
/// Each sample draws three uniforms from [`SplitMix64`] in order: face
/// selection, then the two barycentric variates (square-root warp).
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<ObjectPointSet> {
    if mesh.face_count() == 0 {
        return Err(Error::InvalidMesh("cannot sample an empty mesh".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample count must be at least 1".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }

    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.next_f64() * total;
        let face = cumulative
            .partition_point(|&c| c <= target)
            .min(mesh.face_count() - 1);
        let r1 = rng.next_f64().sqrt();
        let r2 = rng.next_f64();
        let [a, b, c] = mesh.triangle(face);
        points.push(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
        normals.push(mesh.face_normals()[face]);
    }
    Ok(ObjectPointSet {
        points,
        normals,
        seed,
    })
}
