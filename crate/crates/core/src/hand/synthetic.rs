//! Procedural capsule hand standing in for a scanned hand asset.
//!
//! Canonical pose: wrist at the origin, fingers along +y, palm facing −z.
//! The palm and every finger are separate closed tubes, so the whole surface
//! is closed (overlapping components only raise the winding number inside).

use std::f64::consts::TAU;

use super::{HandModel, HandModelParts};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticHandConfig {
    pub fingers: usize,
    pub segments_per_finger: usize,
    /// Length of one finger segment for the longest finger (m).
    pub segment_length: f64,
    pub base_radius: f64,
    pub tip_radius: f64,
    /// Vertices per tube cross-section.
    pub ring_resolution: usize,
}

impl Default for SyntheticHandConfig {
    fn default() -> Self {
        Self {
            fingers: 5,
            segments_per_finger: 3,
            segment_length: 0.024,
            base_radius: 0.0085,
            tip_radius: 0.0065,
            ring_resolution: 12,
        }
    }
}

const PALM_HALF_WIDTH: f64 = 0.042;
const PALM_HALF_THICKNESS: f64 = 0.014;
const PALM_TOP: f64 = 0.09;
const FINGER_BASE_Y: f64 = 0.085;
const BLEND_HALF_WIDTH: f64 = 0.005;

/// One cross-section of a tube: `center + cos φ · u + sin φ · v`.
struct Ring {
    center: Vec3,
    u: Vec3,
    v: Vec3,
    /// Signed distance along the tube axis from the first pivot.
    axial: f64,
}

struct Tube {
    rings: Vec<Ring>,
    start_apex: (Vec3, f64),
    end_apex: (Vec3, f64),
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    /// Axial coordinate per vertex, used for weights and the length blendshape.
    axial: Vec<f64>,
}

impl Builder {
    /// Append a closed tube; returns the index of its first ring vertex.
    fn add_tube(&mut self, tube: &Tube, m: usize) -> usize {
        let base = self.vertices.len();
        for ring in &tube.rings {
            for k in 0..m {
                let phi = TAU * k as f64 / m as f64;
                self.vertices
                    .push(ring.center + ring.u * phi.cos() + ring.v * phi.sin());
                self.axial.push(ring.axial);
            }
        }
        let start = self.vertices.len();
        self.vertices.push(tube.start_apex.0);
        self.axial.push(tube.start_apex.1);
        let end = self.vertices.len();
        self.vertices.push(tube.end_apex.0);
        self.axial.push(tube.end_apex.1);

        let idx = |r: usize, k: usize| (base + r * m + k % m) as u32;
        for r in 0..tube.rings.len() - 1 {
            for k in 0..m {
                let (a, b, c, d) = (idx(r, k), idx(r, k + 1), idx(r + 1, k + 1), idx(r + 1, k));
                self.faces.push([a, b, c]);
                self.faces.push([a, c, d]);
            }
        }
        let last = tube.rings.len() - 1;
        for k in 0..m {
            self.faces.push([start as u32, idx(0, k + 1), idx(0, k)]);
            self.faces
                .push([end as u32, idx(last, k), idx(last, k + 1)]);
        }
        base
    }
}

struct FingerSpec {
    pivot: Vec3,
    dir: Vec3,
    scale: f64,
}

fn finger_layout(n: usize) -> Vec<FingerSpec> {
    let mut out = Vec::new();
    let mut remaining = n;
    if n >= 5 {
        out.push(FingerSpec {
            pivot: Vec3::new(0.040, 0.025, -0.004),
            dir: Vec3::new(0.7, 0.7, -0.15).normalize(),
            scale: 0.9,
        });
        remaining -= 1;
    }
    for i in 0..remaining {
        let x = if remaining == 1 {
            0.0
        } else {
            0.03 - 0.06 * i as f64 / (remaining - 1) as f64
        };
        // Longest in the middle, shorter at the sides.
        let scale = 1.0 - 0.5 * (x / 0.03).powi(2) * 0.35 - if x < 0.0 { 0.05 } else { 0.0 };
        out.push(FingerSpec {
            pivot: Vec3::new(x, FINGER_BASE_Y, 0.0),
            dir: Vec3::new(0.25 * x, 1.0, 0.0).normalize(),
            scale,
        });
    }
    out
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Build the synthetic hand. Joint 0 is the wrist/root; finger `f`, segment
/// `s` is joint `1 + f·segments + s`, pivoting at the start of its segment.
/// Shape coefficient 0 scales about the wrist; coefficient 1 lengthens fingers.
pub fn make_synthetic_hand(config: &SyntheticHandConfig) -> HandModel {
    let m = config.ring_resolution.max(3);
    let segments = if config.fingers == 0 {
        0
    } else {
        config.segments_per_finger.max(1)
    };
    let mut b = Builder::default();

    // Palm tube along +y with an elliptical section; the ring at y = 0 carries the wrist joint.
    let palm_stations = [
        (-0.011, 0.55),
        (-0.006, 0.85),
        (0.0, 1.0),
        (0.02, 1.0),
        (0.04, 1.0),
        (0.06, 1.0),
        (0.08, 1.0),
        (0.086, 0.85),
        (0.09, 0.55),
    ];
    let palm = Tube {
        rings: palm_stations
            .iter()
            .map(|&(y, s)| Ring {
                center: Vec3::new(0.0, y, 0.0),
                u: Vec3::x() * (PALM_HALF_WIDTH * s),
                v: -Vec3::z() * (PALM_HALF_THICKNESS * s),
                axial: f64::NEG_INFINITY,
            })
            .collect(),
        start_apex: (Vec3::new(0.0, -0.013, 0.0), f64::NEG_INFINITY),
        end_apex: (Vec3::new(0.0, PALM_TOP + 0.002, 0.0), f64::NEG_INFINITY),
    };
    let palm_base = b.add_tube(&palm, m);
    let palm_count = b.vertices.len();
    let wrist_ring: Vec<usize> = (0..m).map(|k| palm_base + 2 * m + k).collect();

    let j = 1 + config.fingers * segments;
    let mut parents = vec![None; j];
    let mut rest = vec![Vec3::zeros(); j];
    let mut regressor_rings: Vec<Vec<usize>> = vec![wrist_ring];
    // Per finger: vertex range, spec, segment length.
    let mut finger_ranges = Vec::new();

    for (f, spec) in finger_layout(config.fingers).iter().enumerate() {
        let seg_len = config.segment_length * spec.scale;
        let total = seg_len * segments as f64;
        let r_base = config.base_radius
            * if f == 0 && config.fingers >= 5 {
                1.1
            } else {
                1.0
            };
        let r_tip = config.tip_radius.min(r_base);
        let cap_start = total - r_tip;
        let radius_at = |a: f64| {
            let t = (a / cap_start).clamp(0.0, 1.0);
            r_base + (r_tip - r_base) * t
        };
        let u_dir = (Vec3::x() - spec.dir * spec.dir.x).normalize();
        let v_dir = spec.dir.cross(&u_dir);
        let ring_at = |a: f64, r: f64| Ring {
            center: spec.pivot + spec.dir * a,
            u: u_dir * r,
            v: v_dir * r,
            axial: a,
        };
        let mut rings = vec![ring_at(-0.012, r_base)];
        for s in 0..segments {
            for k in 0..3 {
                let a = seg_len * (s as f64 + k as f64 / 3.0);
                if a < cap_start - 1e-4 {
                    rings.push(ring_at(a, radius_at(a)));
                }
            }
        }
        for alpha in [0.0_f64, 30.0, 60.0] {
            let t = alpha.to_radians();
            rings.push(ring_at(cap_start + r_tip * t.sin(), r_tip * t.cos()));
        }
        let tube = Tube {
            rings,
            start_apex: (spec.pivot - spec.dir * 0.015, -0.015),
            end_apex: (spec.pivot + spec.dir * total, total),
        };
        let start = b.vertices.len();
        let base = b.add_tube(&tube, m);
        let end = b.vertices.len();
        for s in 0..segments {
            let ji = 1 + f * segments + s;
            parents[ji] = Some(if s == 0 { 0 } else { ji - 1 });
            rest[ji] = spec.pivot + spec.dir * (seg_len * s as f64);
            // Ring 0 is the buried base ring; pivot rings follow every third ring.
            let ring = 1 + 3 * s;
            regressor_rings.push((0..m).map(|k| base + ring * m + k).collect());
        }
        finger_ranges.push((start, end, spec.dir, seg_len, f));
    }

    let k = b.vertices.len();
    let mut weights = vec![vec![0.0; j]; k];
    let mut shape_basis = vec![vec![Vec3::zeros(); 2]; k];
    for v in 0..palm_count {
        weights[v][0] = 1.0;
    }
    for &(start, end, dir, seg_len, f) in &finger_ranges {
        let h = BLEND_HALF_WIDTH.min(seg_len / 4.0);
        let joint = |s: usize| 1 + f * segments + s;
        for v in start..end {
            let a = b.axial[v];
            // Last pivot fully passed determines the owning joint.
            let passed = (0..segments)
                .filter(|&s| a >= seg_len * s as f64 + h)
                .count();
            let owner = if passed == 0 { 0 } else { joint(passed - 1) };
            if passed < segments && a > seg_len * passed as f64 - h {
                let alpha = smoothstep((a - (seg_len * passed as f64 - h)) / (2.0 * h));
                weights[v][owner] += 1.0 - alpha;
                weights[v][joint(passed)] += alpha;
            } else {
                weights[v][owner] = 1.0;
            }
            shape_basis[v][1] = dir * a.max(0.0);
        }
    }
    for (v, row) in shape_basis.iter_mut().enumerate() {
        row[0] = b.vertices[v];
    }
    let joint_regressor = regressor_rings
        .iter()
        .map(|ring| {
            let mut row = vec![0.0; k];
            for &v in ring {
                row[v] = 1.0 / ring.len() as f64;
            }
            row
        })
        .collect();

    HandModel::new(HandModelParts {
        template_vertices: b.vertices,
        faces: b.faces,
        skinning_weights: weights,
        parents,
        joint_rest_positions: rest,
        shape_basis,
        joint_regressor,
    })
    .expect("synthetic hand is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::HandFrame;

    #[test]
    fn default_hand_invariants() {
        let hand = make_synthetic_hand(&SyntheticHandConfig::default());
        assert_eq!(hand.joint_count(), 16);
        assert_eq!(hand.shape_count(), 2);
        let mesh = hand.template_mesh();
        assert!(mesh.is_closed());
        assert!(mesh.signed_volume() > 0.0);
        // Every tube is individually outward-oriented.
        assert!(hand.template_bvh().contains(&Vec3::new(0.0, 0.04, 0.0)));
        // Regressed rest joints coincide with the pivots.
        let joints = hand.regress_joints(hand.template_vertices()).unwrap();
        for (j, r) in joints.iter().zip(&hand.parts().joint_rest_positions) {
            assert!((j - r).norm() < 1e-6);
        }
    }

    #[test]
    fn no_fingers_is_a_rigid_blob() {
        let hand = make_synthetic_hand(&SyntheticHandConfig {
            fingers: 0,
            ..Default::default()
        });
        assert_eq!(hand.joint_count(), 1);
        assert!(hand.template_mesh().is_closed());
    }

    #[test]
    fn scale_blendshape_scales_about_wrist() {
        let hand = make_synthetic_hand(&SyntheticHandConfig::default());
        let mut frame = hand.zero_frame();
        frame.shape = vec![0.1, 0.0];
        let posed = hand.skin(&frame).unwrap();
        for (p, v) in posed.vertices().iter().zip(hand.template_vertices()) {
            assert!((p - v * 1.1).norm() < 1e-12);
        }
    }

    #[test]
    fn bent_fingers_stay_attached() {
        let hand = make_synthetic_hand(&SyntheticHandConfig::default());
        let mut frame: HandFrame = hand.zero_frame();
        for p in frame.pose.iter_mut().skip(1) {
            *p = Vec3::new(-0.6, 0.0, 0.0);
        }
        let posed = hand.skin(&frame).unwrap();
        let rest = hand.template_vertices();
        for f in posed.faces() {
            for e in 0..3 {
                let (i, k) = (f[e] as usize, f[(e + 1) % 3] as usize);
                let before = (rest[i] - rest[k]).norm();
                let after = (posed.vertices()[i] - posed.vertices()[k]).norm();
                assert!(
                    after < 1.5 * before + 1e-3,
                    "edge {i}-{k}: {before} -> {after}"
                );
            }
        }
    }
}
