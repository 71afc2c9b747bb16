use nalgebra::{Matrix3, Rotation3};

use crate::{Error, Result, Vec3};

/// Rigid motion `x ↦ R·x + t` (scale is fixed to one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self {
            rotation: r,
            translation: -(r * self.translation),
        }
    }
}

/// Least-squares rigid alignment of `source` onto `target` (Kabsch).
///
/// Minimizes `Σ ‖R·sᵢ + t − tᵢ‖²` over rotations (reflections excluded).
pub fn procrustes_align(source: &[Vec3], target: &[Vec3]) -> Result<RigidTransform> {
    if source.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} source points vs {} target points",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 point pairs, got {}",
            source.len()
        )));
    }
    let n = source.len() as f64;
    let cs = source.iter().sum::<Vec3>() / n;
    let ct = target.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        cov += (t - ct) * (s - cs).transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    // nalgebra does not sort singular values.
    let largest = sv.max();
    let smallest = sv.imin();
    let middle = sv.sum() - largest - sv[smallest];
    // Planar sets (one vanishing singular value) still determine the rotation.
    if !(largest > 0.0) || middle <= 1e-12 * largest {
        return Err(Error::DegenerateConfiguration(
            "cross-covariance has rank below 2 (coincident or collinear points)".into(),
        ));
    }
    let mut flip = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        flip[(smallest, smallest)] = -1.0;
    }
    let r = u * flip * v_t;
    let rotation = Rotation3::from_matrix_unchecked(r);
    Ok(RigidTransform {
        rotation,
        translation: ct - rotation * cs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> Vec<Vec3> {
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.2, 0.0),
            Vec3::new(0.3, 1.1, 0.1),
            Vec3::new(0.2, 0.4, 0.9),
            Vec3::new(-0.5, 0.3, 0.2),
        ]
    }

    #[test]
    fn recovers_known_motion() {
        let r = Rotation3::from_scaled_axis(Vec3::new(0.3, -1.2, 0.7));
        let t = Vec3::new(0.5, -2.0, 1.25);
        let src = cloud();
        let dst: Vec<Vec3> = src.iter().map(|p| r * p + t).collect();
        let fit = procrustes_align(&src, &dst).unwrap();
        assert!((fit.rotation.matrix() - r.matrix()).abs().max() < 1e-9);
        assert!((fit.translation - t).norm() < 1e-9);
    }

    #[test]
    fn identity_on_equal_sets() {
        let src = cloud();
        let fit = procrustes_align(&src, &src).unwrap();
        assert!((fit.rotation.matrix() - Matrix3::identity()).abs().max() < 1e-12);
        assert!(fit.translation.norm() < 1e-12);
    }

    #[test]
    fn planar_sets_are_fine_but_collinear_are_not() {
        let planar: Vec<Vec3> = (0..5)
            .map(|i| Vec3::new((i as f64).cos(), (i as f64).sin(), 0.0))
            .collect();
        let r = Rotation3::from_scaled_axis(Vec3::new(0.0, 0.4, 0.0));
        let moved: Vec<Vec3> = planar.iter().map(|p| r * p).collect();
        let fit = procrustes_align(&planar, &moved).unwrap();
        assert!((fit.rotation.matrix() - r.matrix()).abs().max() < 1e-9);

        let line: Vec<Vec3> = (0..5).map(|i| Vec3::x() * i as f64).collect();
        assert!(matches!(
            procrustes_align(&line, &line),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn rejects_mismatched_counts() {
        assert!(procrustes_align(&cloud(), &cloud()[..4]).is_err());
    }
}
