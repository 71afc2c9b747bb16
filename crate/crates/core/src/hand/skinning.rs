use nalgebra::Matrix3;

use super::rotation::{left_jacobian, rodrigues};
use super::{HandFrame, HandModel};
use crate::geometry::SurfacePoint;
use crate::Vec3;

/// Forward kinematics of one frame, cached for repeated point evaluation and
/// gradient back-propagation.
#[derive(Debug, Clone)]
pub struct PosedHand<'a> {
    model: &'a HandModel,
    shape: Vec<f64>,
    trans: Vec3,
    /// Rest-relative joint transform `x ↦ rot·x + offset`.
    rot: Vec<Matrix3<f64>>,
    offset: Vec<Vec3>,
    /// Posed joint pivot (without the global translation).
    pivot: Vec<Vec3>,
    /// Columns are the world-space rotation axes generated by each pose component.
    axes: Vec<Matrix3<f64>>,
}

/// Gradient of a scalar w.r.t. one frame's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGradient {
    pub pose: Vec<Vec3>,
    pub trans: Vec3,
    pub shape: Vec<f64>,
}

impl FrameGradient {
    pub fn zeros(joints: usize, shapes: usize) -> Self {
        Self {
            pose: vec![Vec3::zeros(); joints],
            trans: Vec3::zeros(),
            shape: vec![0.0; shapes],
        }
    }

    pub fn add_scaled(&mut self, other: &FrameGradient, s: f64) {
        for (a, b) in self.pose.iter_mut().zip(&other.pose) {
            *a += b * s;
        }
        self.trans += other.trans * s;
        for (a, b) in self.shape.iter_mut().zip(&other.shape) {
            *a += b * s;
        }
    }
}

/// `∂p/∂θ_j` per joint (3×3, column k for component k), `∂p/∂β_b` per shape
/// coefficient; `∂p/∂t` is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointJacobian {
    pub position: Vec3,
    pub pose: Vec<Matrix3<f64>>,
    pub shape: Vec<Vec3>,
}

impl<'a> PosedHand<'a> {
    pub(super) fn new(model: &'a HandModel, frame: &HandFrame) -> Self {
        let j = model.joint_count();
        let rest = &model.parts.joint_rest_positions;
        let mut rot = vec![Matrix3::identity(); j];
        let mut offset = vec![Vec3::zeros(); j];
        let mut pivot = vec![Vec3::zeros(); j];
        let mut axes = vec![Matrix3::identity(); j];
        for &ji in &model.topo_order {
            let (parent_rot, parent_off) = match model.parts.parents[ji] {
                Some(p) => (rot[p], offset[p]),
                None => (Matrix3::identity(), Vec3::zeros()),
            };
            let local = rodrigues(&frame.pose[ji]);
            let p = rest[ji];
            rot[ji] = parent_rot * local;
            offset[ji] = parent_rot * (p - local * p) + parent_off;
            pivot[ji] = parent_rot * p + parent_off;
            axes[ji] = parent_rot * left_jacobian(&frame.pose[ji]);
        }
        Self {
            model,
            shape: frame.shape.clone(),
            trans: frame.trans,
            rot,
            offset,
            pivot,
            axes,
        }
    }

    pub fn model(&self) -> &HandModel {
        self.model
    }

    fn shaped(&self, v: usize) -> Vec3 {
        let mut x = self.model.parts.template_vertices[v];
        for (b, s) in self.model.parts.shape_basis[v].iter().zip(&self.shape) {
            x += b * *s;
        }
        x
    }

    pub fn vertex(&self, v: usize) -> Vec3 {
        // Displacement form: a zero pose contributes exactly nothing.
        let x = self.shaped(v);
        let mut disp = Vec3::zeros();
        for &(j, w) in &self.model.sparse_weights[v] {
            disp += (self.rot[j] * x - x + self.offset[j]) * w;
        }
        x + disp + self.trans
    }

    pub fn vertices(&self) -> Vec<Vec3> {
        (0..self.model.vertex_count())
            .map(|v| self.vertex(v))
            .collect()
    }

    /// Barycentric combination of the three skinned vertices of the face.
    pub fn point(&self, sp: &SurfacePoint) -> Vec3 {
        let f = self.model.template_mesh().faces()[sp.face];
        (0..3)
            .map(|i| self.vertex(f[i] as usize) * sp.barycentric[i])
            .sum()
    }

    /// Regressed joint positions of the posed mesh.
    pub fn joints(&self) -> Vec<Vec3> {
        self.model
            .sparse_regressor
            .iter()
            .map(|row| row.iter().map(|&(v, w)| self.vertex(v) * w).sum())
            .collect()
    }

    /// Accumulate `weight · (∂vertex_v/∂params)ᵀ · g` into `grad`.
    pub fn backprop_vertex(&self, v: usize, weight: f64, g: &Vec3, grad: &mut FrameGradient) {
        if weight == 0.0 {
            return;
        }
        let x = self.shaped(v);
        let basis = &self.model.parts.shape_basis[v];
        for &(j, w) in &self.model.sparse_weights[v] {
            let s = weight * w;
            let y = self.rot[j] * x + self.offset[j];
            for &m in &self.model.chains[j] {
                let torque = (y - self.pivot[m]).cross(g);
                grad.pose[m] += self.axes[m].tr_mul(&torque) * s;
            }
            if !basis.is_empty() {
                let pulled = self.rot[j].tr_mul(g);
                for (gb, sb) in grad.shape.iter_mut().zip(basis) {
                    *gb += s * sb.dot(&pulled);
                }
            }
        }
        grad.trans += g * weight;
    }

    pub fn backprop_point(&self, sp: &SurfacePoint, g: &Vec3, grad: &mut FrameGradient) {
        let f = self.model.template_mesh().faces()[sp.face];
        for i in 0..3 {
            self.backprop_vertex(f[i] as usize, sp.barycentric[i], g, grad);
        }
    }

    /// Back-propagate gradients on the regressed joints.
    pub fn backprop_joints(&self, joint_grads: &[Vec3], grad: &mut FrameGradient) {
        for (row, g) in self.model.sparse_regressor.iter().zip(joint_grads) {
            for &(v, w) in row {
                self.backprop_vertex(v, w, g, grad);
            }
        }
    }

    pub fn point_jacobian(&self, sp: &SurfacePoint) -> PointJacobian {
        let j = self.model.joint_count();
        let b = self.model.shape_count();
        let mut pose = vec![Matrix3::zeros(); j];
        let mut shape = vec![Vec3::zeros(); b];
        for r in 0..3 {
            let mut grad = FrameGradient::zeros(j, b);
            let mut e = Vec3::zeros();
            e[r] = 1.0;
            self.backprop_point(sp, &e, &mut grad);
            for (m, gp) in grad.pose.iter().enumerate() {
                pose[m].set_row(r, &gp.transpose());
            }
            for (bi, gs) in grad.shape.iter().enumerate() {
                shape[bi][r] = *gs;
            }
        }
        PointJacobian {
            position: self.point(sp),
            pose,
            shape,
        }
    }
}
