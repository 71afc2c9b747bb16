//! Temporal denoising auto-encoder inference and a training-free smoother.
//!
//! Encoder: each point's `(c, d, y, o, n)` passes through point blocks
//! (`h = relu(W·x + b)`, then `[h, max over points of h]`), a global per-point
//! layer and a max-pool, giving one feature per frame; a bidirectional GRU over
//! frames produces the latent `z_i = [h_fwd, h_bwd]`. Decoder: every point maps
//! `[z_i, o, n]` through a ReLU stack to `(logit c, d, y)`; `c = logit ≥ 0`.
//! All inference runs in f32.

mod network;
mod smooth;
mod weights;

use std::sync::Arc;

use crate::field::{FieldEntry, TochSequence};
use crate::geometry::ObjectPointSet;
use crate::{Error, Result, Vec3};

use network::Network;
pub use smooth::baseline_smooth;
pub use weights::{Hyperparameters, Tensor, WeightContainer, HEAD_OUTPUTS, WEIGHTS_FORMAT_VERSION};

/// Per-frame latent codes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    pub latents: Vec<Vec<f32>>,
}

impl LatentSequence {
    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Denoiser {
    net: Network,
}

fn point_features(points: &ObjectPointSet, i: usize) -> [f32; 6] {
    let (o, n) = (points.points[i], points.normals[i]);
    [o.x, o.y, o.z, n.x, n.y, n.z].map(|v| v as f32)
}

impl Denoiser {
    pub fn new(weights: &WeightContainer) -> Result<Self> {
        Ok(Self {
            net: Network::new(weights)?,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.net.hyper
    }

    pub fn encode(&self, seq: &TochSequence) -> Result<LatentSequence> {
        let points = seq.points();
        if points.is_empty() {
            return Err(Error::ShapeMismatch(
                "cannot encode an empty point set".into(),
            ));
        }
        let features: Vec<Vec<f32>> = seq
            .frames()
            .iter()
            .map(|frame| {
                let inputs: Vec<Vec<f32>> = frame
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        let mut x = vec![
                            if e.c { 1.0 } else { 0.0 },
                            e.d as f32,
                            e.y.x as f32,
                            e.y.y as f32,
                            e.y.z as f32,
                        ];
                        x.extend(point_features(points, i));
                        x
                    })
                    .collect();
                self.net.frame_feature(&inputs)
            })
            .collect();
        Ok(LatentSequence {
            latents: self.net.temporal(&features),
        })
    }

    /// Raw head outputs `(logit, d, y)` per frame and point.
    pub fn decode_raw(
        &self,
        latents: &LatentSequence,
        points: &ObjectPointSet,
    ) -> Result<Vec<Vec<[f32; HEAD_OUTPUTS]>>> {
        use rayon::prelude::*;
        latents
            .latents
            .iter()
            .map(|z| {
                if z.len() != self.net.hyper.latent {
                    return Err(Error::WeightMismatch(format!(
                        "latent has {} entries, network expects {}",
                        z.len(),
                        self.net.hyper.latent
                    )));
                }
                Ok((0..points.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut x = z.clone();
                        x.extend(point_features(points, i));
                        self.net.decode_point(&x)
                    })
                    .collect())
            })
            .collect()
    }

    pub fn decode(
        &self,
        latents: &LatentSequence,
        points: Arc<ObjectPointSet>,
    ) -> Result<TochSequence> {
        let raw = self.decode_raw(latents, &points)?;
        let entries = raw
            .into_iter()
            .map(|frame| {
                frame
                    .into_iter()
                    .map(|o| FieldEntry {
                        c: o[0] >= 0.0,
                        d: o[1] as f64,
                        y: Vec3::new(o[2] as f64, o[3] as f64, o[4] as f64),
                    })
                    .collect()
            })
            .collect();
        TochSequence::from_entries(entries, points)
    }

    /// Encode and decode on the same point set.
    pub fn denoise(&self, seq: &TochSequence) -> Result<TochSequence> {
        self.decode(&self.encode(seq)?, seq.points().clone())
    }

    /// Encode the source fields and decode them on another object's points.
    pub fn transfer(
        &self,
        source: &TochSequence,
        target: Arc<ObjectPointSet>,
    ) -> Result<TochSequence> {
        self.decode(&self.encode(source)?, target)
    }
}
