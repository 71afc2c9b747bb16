#![allow(dead_code)]

use toch::fitter::{corr_loss, reg_loss, Correspondence, FitConfig};
use toch::geometry::SurfacePoint;
use toch::hand::{make_synthetic_hand, HandFrame, HandModel, HandSequence, SyntheticHandConfig};
use toch::Vec3;

pub fn hand() -> HandModel {
    make_synthetic_hand(&SyntheticHandConfig::default())
}

/// Deterministic uniform values in [-1, 1), independent of the crate's RNGs.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03)
    }

    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    pub fn vec3(&mut self) -> Vec3 {
        Vec3::new(self.next(), self.next(), self.next())
    }

    pub fn index(&mut self, n: usize) -> usize {
        (((self.next() + 1.0) * 0.5 * n as f64) as usize).min(n - 1)
    }
}

pub fn random_frame(model: &HandModel, rng: &mut Lcg, pose_scale: f64, shape: &[f64]) -> HandFrame {
    let mut f = model.zero_frame();
    for p in &mut f.pose {
        *p = rng.vec3() * pose_scale;
    }
    f.trans = rng.vec3() * 0.05;
    f.shape = shape.to_vec();
    f
}

pub fn random_sequence(
    model: &HandModel,
    rng: &mut Lcg,
    t: usize,
    pose_scale: f64,
) -> HandSequence {
    let shape: Vec<f64> = (0..model.shape_count()).map(|_| rng.next() * 0.5).collect();
    let frames = (0..t)
        .map(|_| random_frame(model, rng, pose_scale, &shape))
        .collect();
    HandSequence::new(frames, 30.0).unwrap()
}

pub fn random_correspondences(model: &HandModel, rng: &mut Lcg, n: usize) -> Vec<Correspondence> {
    let mesh = model.template_mesh();
    (0..n)
        .map(|_| {
            let a = (rng.next() + 1.0) * 0.5;
            let b = (rng.next() + 1.0) * 0.5 * (1.0 - a);
            let surface =
                SurfacePoint::on_face(mesh, rng.index(mesh.face_count()), [a, b, 1.0 - a - b])
                    .unwrap();
            Correspondence {
                surface,
                target: rng.vec3() * 0.1,
            }
        })
        .collect()
}

/// ‖a − b‖ / max(‖b‖, 1e-8) over whole vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

fn frame_params(f: &HandFrame) -> Vec<f64> {
    let mut x: Vec<f64> = f.pose.iter().flat_map(|v| v.iter().copied()).collect();
    x.extend(f.trans.iter());
    x.extend(&f.shape);
    x
}

fn frame_from(model: &HandModel, x: &[f64]) -> HandFrame {
    let j = model.joint_count();
    let mut f = model.zero_frame();
    for (m, p) in f.pose.iter_mut().enumerate() {
        *p = Vec3::new(x[3 * m], x[3 * m + 1], x[3 * m + 2]);
    }
    f.trans = Vec3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2]);
    f.shape = x[3 * j + 3..].to_vec();
    f
}

fn central_difference(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            p[i] += h;
            let mut m = x.to_vec();
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Relative error of the corr-loss gradient against central differences.
pub fn corr_gradient_error(model: &HandModel, frame: &HandFrame, corr: &[Correspondence]) -> f64 {
    let (_, g) = corr_loss(model, frame, corr).unwrap();
    let mut analytic: Vec<f64> = g.pose.iter().flat_map(|v| v.iter().copied()).collect();
    analytic.extend(g.trans.iter());
    analytic.extend(&g.shape);
    let numeric = central_difference(&frame_params(frame), 1e-6, |x| {
        corr_loss(model, &frame_from(model, x), corr).unwrap().0
    });
    relative_error(&analytic, &numeric)
}

/// Relative error of the regularizer gradient (all frames and the shared
/// shape) against central differences.
pub fn reg_gradient_error(model: &HandModel, seq: &HandSequence, cfg: &FitConfig) -> f64 {
    let (_, g) = reg_loss(model, seq, cfg).unwrap();
    let mut analytic = Vec::new();
    let mut x = Vec::new();
    for (f, gf) in seq.frames().iter().zip(&g.frames) {
        analytic.extend(gf.pose.iter().flat_map(|v| v.iter().copied()));
        analytic.extend(gf.trans.iter());
        x.extend(f.pose.iter().flat_map(|v| v.iter().copied()));
        x.extend(f.trans.iter());
    }
    analytic.extend(&g.shape);
    x.extend(seq.shape());
    let j = model.joint_count();
    let per = 3 * j + 3;
    let t = seq.len();
    let rebuild = |x: &[f64]| {
        let shape = x[t * per..].to_vec();
        let frames = (0..t)
            .map(|i| {
                let mut v = x[i * per..(i + 1) * per].to_vec();
                v.extend(&shape);
                frame_from(model, &v)
            })
            .collect();
        HandSequence::new(frames, seq.fps).unwrap()
    };
    let numeric = central_difference(&x, 1e-6, |x| {
        reg_loss(model, &rebuild(x), cfg).unwrap().0.total()
    });
    relative_error(&analytic, &numeric)
}
