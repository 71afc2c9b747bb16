//! Axis-angle helpers.

use nalgebra::{Matrix3, Rotation3};

use crate::Vec3;

pub fn rodrigues(v: &Vec3) -> Matrix3<f64> {
    *Rotation3::new(*v).matrix()
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Left Jacobian of the exponential map: `∂R/∂v_k · Rᵀ = [J_l(v)·e_k]×`.
pub fn left_jacobian(v: &Vec3) -> Matrix3<f64> {
    let phi2 = v.norm_squared();
    let k = skew(v);
    let k2 = k * k;
    if phi2 < 1e-10 {
        return Matrix3::identity() + k * 0.5 + k2 * (1.0 / 6.0);
    }
    let phi = phi2.sqrt();
    Matrix3::identity() + k * ((1.0 - phi.cos()) / phi2) + k2 * ((phi - phi.sin()) / (phi2 * phi))
}

/// Axis-angle vector with the same rotation and norm at most π.
pub fn canonicalize(v: &Vec3) -> Vec3 {
    let phi = v.norm();
    if phi <= std::f64::consts::PI {
        return *v;
    }
    let two_pi = std::f64::consts::TAU;
    let mut wrapped = phi % two_pi;
    if wrapped > std::f64::consts::PI {
        wrapped -= two_pi;
    }
    v * (wrapped / phi)
}

pub fn from_matrix(m: &Matrix3<f64>) -> Vec3 {
    Rotation3::from_matrix(m).scaled_axis()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_jacobian_matches_finite_differences() {
        for v in [
            Vec3::new(0.3, -0.2, 0.9),
            Vec3::new(1e-7, 2e-7, -1e-7),
            Vec3::new(2.5, 0.1, -0.4),
        ] {
            let r = rodrigues(&v);
            let jl = left_jacobian(&v);
            for k in 0..3 {
                let h = 1e-6;
                let mut vp = v;
                vp[k] += h;
                let mut vm = v;
                vm[k] -= h;
                let dr = (rodrigues(&vp) - rodrigues(&vm)) / (2.0 * h);
                let expected = skew(&(jl.column(k).into_owned())) * r;
                assert!((dr - expected).abs().max() < 1e-8, "{v:?} {k}");
            }
        }
    }

    #[test]
    fn canonicalize_keeps_rotation() {
        let v = Vec3::new(3.0, 2.0, -1.5);
        let c = canonicalize(&v);
        assert!(c.norm() <= std::f64::consts::PI);
        assert!((rodrigues(&v) - rodrigues(&c)).abs().max() < 1e-12);
    }
}
