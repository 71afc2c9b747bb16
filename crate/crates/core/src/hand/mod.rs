//! Linear-blend-skinned parametric hand.
//!
//! Posed vertices are
//! `v'_k = Σ_j w_kj · G_j(θ) · (v_k + Σ_b β_b S_kb) + t`, where the joint
//! transforms are rest-pose-relative: `G_j = world_j(θ) · world_j(0)⁻¹`, so a
//! zero pose reproduces the template exactly. Each joint rotates about its
//! rest position by the Rodrigues rotation of its axis-angle vector, composed
//! down the kinematic tree.

mod io;
pub mod rotation;
mod skinning;
mod synthetic;

use crate::geometry::{Bvh, SurfacePoint, TriMesh};
use crate::{Error, Result, Vec3};

pub use io::{read_model, write_model, HandModelFile};
pub use skinning::{FrameGradient, PointJacobian, PosedHand};
pub use synthetic::{make_synthetic_hand, SyntheticHandConfig};

const WEIGHT_TOLERANCE: f64 = 1e-6;

/// Raw model arrays, validated by [`HandModel::new`].
#[derive(Debug, Clone)]
pub struct HandModelParts {
    pub template_vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// K × J, rows convex.
    pub skinning_weights: Vec<Vec<f64>>,
    /// Kinematic parent per joint; exactly one `None`.
    pub parents: Vec<Option<usize>>,
    pub joint_rest_positions: Vec<Vec3>,
    /// K × B displacement blendshapes.
    pub shape_basis: Vec<Vec<Vec3>>,
    /// J_out × K, rows convex.
    pub joint_regressor: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct HandModel {
    parts: HandModelParts,
    template: Bvh,
    sparse_weights: Vec<Vec<(usize, f64)>>,
    sparse_regressor: Vec<Vec<(usize, f64)>>,
    /// Joints ordered so parents precede children.
    topo_order: Vec<usize>,
    /// For each joint, itself and all its ancestors.
    chains: Vec<Vec<usize>>,
}

impl HandModel {
    pub fn new(parts: HandModelParts) -> Result<Self> {
        let k = parts.template_vertices.len();
        let j = parts.parents.len();
        let mismatch = |msg: String| Err(Error::ModelMismatch(msg));
        if j == 0 {
            return mismatch("model has no joints".into());
        }
        if parts.joint_rest_positions.len() != j {
            return mismatch(format!(
                "{} rest positions for {j} joints",
                parts.joint_rest_positions.len()
            ));
        }
        if parts.skinning_weights.len() != k || parts.shape_basis.len() != k {
            return mismatch(format!(
                "{k} vertices but {} weight rows and {} shape rows",
                parts.skinning_weights.len(),
                parts.shape_basis.len()
            ));
        }
        let b = parts.shape_basis.first().map_or(0, Vec::len);
        if parts.shape_basis.iter().any(|row| row.len() != b) {
            return mismatch("ragged shape basis".into());
        }
        check_convex_rows(&parts.skinning_weights, j, "skinning weight")?;
        check_convex_rows(&parts.joint_regressor, k, "joint regressor")?;
        let topo_order = topological_order(&parts.parents)?;
        let chains = (0..j)
            .map(|mut cur| {
                let mut chain = vec![cur];
                while let Some(p) = parts.parents[cur] {
                    chain.push(p);
                    cur = p;
                }
                chain
            })
            .collect();
        let template = Bvh::new(
            TriMesh::new(parts.template_vertices.clone(), parts.faces.clone())
                .map_err(|e| Error::ModelMismatch(format!("template mesh: {e}")))?,
        );
        let sparse = |rows: &[Vec<f64>]| -> Vec<Vec<(usize, f64)>> {
            rows.iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &w)| w != 0.0)
                        .map(|(i, &w)| (i, w))
                        .collect()
                })
                .collect()
        };
        Ok(Self {
            sparse_weights: sparse(&parts.skinning_weights),
            sparse_regressor: sparse(&parts.joint_regressor),
            parts,
            template,
            topo_order,
            chains,
        })
    }

    pub fn parts(&self) -> &HandModelParts {
        &self.parts
    }

    pub fn vertex_count(&self) -> usize {
        self.parts.template_vertices.len()
    }

    pub fn joint_count(&self) -> usize {
        self.parts.parents.len()
    }

    pub fn shape_count(&self) -> usize {
        self.parts.shape_basis.first().map_or(0, Vec::len)
    }

    pub fn regressed_joint_count(&self) -> usize {
        self.parts.joint_regressor.len()
    }

    pub fn template_mesh(&self) -> &TriMesh {
        self.template.mesh()
    }

    /// BVH over the canonical template, used to project canonical coordinates.
    pub fn template_bvh(&self) -> &Bvh {
        &self.template
    }

    pub fn template_vertices(&self) -> &[Vec3] {
        &self.parts.template_vertices
    }

    /// Nearest point on the canonical template surface.
    pub fn project_to_template(&self, y: &Vec3) -> SurfacePoint {
        self.template.closest_point(y)
    }

    pub fn zero_frame(&self) -> HandFrame {
        HandFrame {
            pose: vec![Vec3::zeros(); self.joint_count()],
            trans: Vec3::zeros(),
            shape: vec![0.0; self.shape_count()],
        }
    }

    pub(crate) fn check_frame(&self, frame: &HandFrame) -> Result<()> {
        if frame.pose.len() != self.joint_count() || frame.shape.len() != self.shape_count() {
            return Err(Error::ModelMismatch(format!(
                "frame has {} joints / {} shape coefficients, model expects {} / {}",
                frame.pose.len(),
                frame.shape.len(),
                self.joint_count(),
                self.shape_count()
            )));
        }
        Ok(())
    }

    pub fn pose(&self, frame: &HandFrame) -> Result<PosedHand<'_>> {
        self.check_frame(frame)?;
        Ok(PosedHand::new(self, frame))
    }

    /// Posed mesh for one frame.
    pub fn skin(&self, frame: &HandFrame) -> Result<TriMesh> {
        let posed = self.pose(frame)?;
        self.template_mesh().with_vertices(posed.vertices())
    }

    /// Posed position of a point given on the template surface.
    pub fn skin_point(&self, frame: &HandFrame, sp: &SurfacePoint) -> Result<Vec3> {
        self.check_surface_point(sp)?;
        Ok(self.pose(frame)?.point(sp))
    }

    /// Analytic Jacobian of [`HandModel::skin_point`] w.r.t. pose, shape and translation.
    pub fn skin_point_jacobian(
        &self,
        frame: &HandFrame,
        sp: &SurfacePoint,
    ) -> Result<PointJacobian> {
        self.check_surface_point(sp)?;
        Ok(self.pose(frame)?.point_jacobian(sp))
    }

    pub(crate) fn check_surface_point(&self, sp: &SurfacePoint) -> Result<()> {
        if sp.face >= self.template_mesh().face_count() {
            return Err(Error::InvalidSurfacePoint(format!(
                "face {} out of range ({} faces)",
                sp.face,
                self.template_mesh().face_count()
            )));
        }
        Ok(())
    }

    /// `joint_regressor · vertices`.
    pub fn regress_joints(&self, posed_vertices: &[Vec3]) -> Result<Vec<Vec3>> {
        if posed_vertices.len() != self.vertex_count() {
            return Err(Error::ModelMismatch(format!(
                "{} vertices given, model has {}",
                posed_vertices.len(),
                self.vertex_count()
            )));
        }
        Ok(self
            .sparse_regressor
            .iter()
            .map(|row| row.iter().map(|&(v, w)| posed_vertices[v] * w).sum())
            .collect())
    }

    /// Model reflected across x = 0: a left hand from a right hand and vice versa.
    pub fn mirrored(&self) -> HandModel {
        let flip = |v: &Vec3| Vec3::new(-v.x, v.y, v.z);
        let p = &self.parts;
        HandModel::new(HandModelParts {
            template_vertices: p.template_vertices.iter().map(flip).collect(),
            faces: p.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
            skinning_weights: p.skinning_weights.clone(),
            parents: p.parents.clone(),
            joint_rest_positions: p.joint_rest_positions.iter().map(flip).collect(),
            shape_basis: p
                .shape_basis
                .iter()
                .map(|row| row.iter().map(flip).collect())
                .collect(),
            joint_regressor: p.joint_regressor.clone(),
        })
        .expect("mirroring preserves validity")
    }
}

fn check_convex_rows(rows: &[Vec<f64>], width: usize, what: &str) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::ModelMismatch(format!(
                "{what} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::ModelMismatch(format!(
                "{what} row {i} has a negative entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::ModelMismatch(format!(
                "{what} row {i} sums to {sum}"
            )));
        }
    }
    Ok(())
}

fn topological_order(parents: &[Option<usize>]) -> Result<Vec<usize>> {
    let j = parents.len();
    let roots: Vec<usize> = (0..j).filter(|&i| parents[i].is_none()).collect();
    if roots.len() != 1 {
        return Err(Error::ModelMismatch(format!(
            "kinematic tree needs exactly one root, found {}",
            roots.len()
        )));
    }
    if let Some(bad) = parents.iter().flatten().find(|&&p| p >= j) {
        return Err(Error::ModelMismatch(format!(
            "parent index {bad} out of range"
        )));
    }
    let mut children = vec![Vec::new(); j];
    for (c, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(c);
        }
    }
    let mut order = Vec::with_capacity(j);
    let mut queue = std::collections::VecDeque::from(roots);
    while let Some(n) = queue.pop_front() {
        order.push(n);
        queue.extend(children[n].iter().copied());
    }
    if order.len() != j {
        return Err(Error::ModelMismatch("kinematic tree has a cycle".into()));
    }
    Ok(order)
}

/// Pose, translation and shape for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HandFrame {
    /// Axis-angle per joint (radians); joint 0 is the global orientation.
    pub pose: Vec<Vec3>,
    pub trans: Vec3,
    pub shape: Vec<f64>,
}

impl HandFrame {
    /// Reflection across x = 0, matching [`HandModel::mirrored`].
    pub fn mirrored(&self) -> HandFrame {
        HandFrame {
            pose: self
                .pose
                .iter()
                .map(|v| Vec3::new(v.x, -v.y, -v.z))
                .collect(),
            trans: Vec3::new(-self.trans.x, self.trans.y, self.trans.z),
            shape: self.shape.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.trans.iter().all(|x| x.is_finite())
            && self.shape.iter().all(|x| x.is_finite())
    }

    /// Wrap every joint rotation to norm at most π.
    pub fn canonicalize(&mut self) {
        for v in &mut self.pose {
            *v = rotation::canonicalize(v);
        }
    }
}

/// Frames of one interaction sharing a single shape vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSequence {
    frames: Vec<HandFrame>,
    pub fps: f64,
}

impl HandSequence {
    pub fn new(frames: Vec<HandFrame>, fps: f64) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::InvalidArgument(
                "a hand sequence needs at least one frame".into(),
            ));
        };
        if frames.iter().any(|f| f.shape != first.shape) {
            return Err(Error::InvalidArgument(
                "all frames of a sequence must share one shape vector".into(),
            ));
        }
        if frames.iter().any(|f| f.pose.len() != first.pose.len()) {
            return Err(Error::InvalidArgument(
                "frames differ in joint count".into(),
            ));
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[HandFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> &[f64] {
        &self.frames[0].shape
    }

    /// New sequence with each frame replaced by `f(index, frame)`.
    pub fn map_frames(&self, mut f: impl FnMut(usize, &HandFrame) -> HandFrame) -> Result<Self> {
        Self::new(
            self.frames
                .iter()
                .enumerate()
                .map(|(i, fr)| f(i, fr))
                .collect(),
            self.fps,
        )
    }

    pub fn with_shape(&self, shape: &[f64]) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|f| HandFrame {
                shape: shape.to_vec(),
                ..f.clone()
            })
            .collect();
        Self {
            frames,
            fps: self.fps,
        }
    }

    pub fn mirrored(&self) -> Self {
        Self {
            frames: self.frames.iter().map(HandFrame::mirrored).collect(),
            fps: self.fps,
        }
    }

    pub fn skin_all(&self, model: &HandModel) -> Result<Vec<TriMesh>> {
        use rayon::prelude::*;
        self.frames.par_iter().map(|f| model.skin(f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_validation() {
        assert!(topological_order(&[None, Some(0), Some(1)]).is_ok());
        assert!(topological_order(&[None, None]).is_err());
        assert!(topological_order(&[Some(1), Some(0)]).is_err());
        assert!(topological_order(&[None, Some(2), Some(1)]).is_err());
        assert!(topological_order(&[None, Some(5)]).is_err());
    }

    #[test]
    fn convex_rows() {
        assert!(check_convex_rows(&[vec![0.5, 0.5]], 2, "w").is_ok());
        assert!(check_convex_rows(&[vec![0.6, 0.5]], 2, "w").is_err());
        assert!(check_convex_rows(&[vec![1.5, -0.5]], 2, "w").is_err());
        assert!(check_convex_rows(&[vec![1.0]], 2, "w").is_err());
    }

    #[test]
    fn sequence_requires_shared_shape() {
        let a = HandFrame {
            pose: vec![Vec3::zeros()],
            trans: Vec3::zeros(),
            shape: vec![0.0],
        };
        let mut b = a.clone();
        b.shape[0] = 0.1;
        assert!(HandSequence::new(vec![a.clone(), b], 30.0).is_err());
        assert!(HandSequence::new(vec![], 30.0).is_err());
        assert!(HandSequence::new(vec![a.clone(), a], 30.0).is_ok());
    }

    #[test]
    fn frame_mirror_is_involution() {
        let f = HandFrame {
            pose: vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.4, 0.5, 0.0)],
            trans: Vec3::new(0.01, 0.02, 0.03),
            shape: vec![0.2, -0.1],
        };
        assert_eq!(f.mirrored().mirrored(), f);
    }
}
