//! Synthetic grasp scene: the procedural hand settles onto the top of a box
//! and curls its fingers over the front edge.

use crate::geometry::TriMesh;
use crate::hand::{make_synthetic_hand, HandFrame, HandModel, HandSequence, SyntheticHandConfig};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub frames: usize,
    pub fps: f64,
    /// Shared shape coefficients (scale, finger length).
    pub shape: [f64; 2],
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            frames: 30,
            fps: 30.0,
            shape: [0.02, 0.05],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoScene {
    pub model: HandModel,
    pub object: TriMesh,
    pub sequence: HandSequence,
}

/// Top face of the box is `z = 0`, its front face `y = BOX_FRONT`.
const BOX_FRONT: f64 = 0.092;
const CONTACT_GAP: f64 = 0.001;

fn smooth(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

pub fn demo_object() -> TriMesh {
    TriMesh::subdivided_cuboid(
        Vec3::new(-0.08, -0.04, -0.09),
        Vec3::new(0.12, BOX_FRONT, 0.0),
        4,
    )
    .expect("valid box")
}

pub fn make_demo(config: &DemoConfig) -> DemoScene {
    let hand_config = SyntheticHandConfig::default();
    let model = make_synthetic_hand(&hand_config);
    let segments = hand_config.segments_per_finger;
    let frames_n = config.frames.max(1);
    let last = (frames_n.max(2) - 1) as f64;
    // Palm underside sits CONTACT_GAP above the table once settled.
    let rest_height = 0.014 * (1.0 + config.shape[0]) + CONTACT_GAP;
    // Lift the thumb off the table about a horizontal axis across its direction.
    let thumb_lift = Vec3::new(-1.0, 1.0, 0.0).normalize() * -0.3;
    let flexion = [-0.5, -0.7, -0.45];

    let frames = (0..frames_n)
        .map(|i| {
            let s = i as f64 / last;
            let approach = smooth(s * 3.0);
            let curl = smooth((s - 0.25) / 0.7);
            let mut pose = vec![Vec3::zeros(); model.joint_count()];
            pose[0] = Vec3::new(0.0, 0.0, 0.08 * (std::f64::consts::PI * s).sin());
            for f in 0..hand_config.fingers {
                for seg in 0..segments {
                    let j = 1 + f * segments + seg;
                    pose[j] = if f == 0 && hand_config.fingers >= 5 {
                        if seg == 0 {
                            thumb_lift
                        } else {
                            Vec3::new(0.0, 0.0, 0.15 * curl)
                        }
                    } else {
                        Vec3::new(flexion[seg.min(2)] * curl, 0.0, 0.0)
                    };
                }
            }
            HandFrame {
                pose,
                trans: Vec3::new(
                    0.004 * s,
                    -0.04 * (1.0 - approach),
                    rest_height + 0.025 * (1.0 - approach),
                ),
                shape: config.shape.to_vec(),
            }
        })
        .collect();
    DemoScene {
        model,
        object: demo_object(),
        sequence: HandSequence::new(frames, config.fps).expect("consistent frames"),
    }
}
