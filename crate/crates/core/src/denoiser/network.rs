use rayon::prelude::*;

use super::weights::{Hyperparameters, WeightContainer, HEAD_OUTPUTS};
use crate::Result;

/// Dot product with a fixed summation order (eight interleaved partial sums),
/// so a point's result never depends on where it sits in a batch.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    for (k, (x, y)) in ra.iter().zip(rb).enumerate() {
        acc[k] += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[derive(Debug, Clone)]
pub(super) struct Linear {
    rows: usize,
    cols: usize,
    weight: Vec<f32>,
    bias: Vec<f32>,
}

impl Linear {
    fn load(w: &WeightContainer, weight: &str, bias: &str) -> Result<Self> {
        let wt = w.tensor(weight)?;
        Ok(Self {
            rows: wt.shape[0],
            cols: wt.shape[1],
            weight: wt.data.clone(),
            bias: w.tensor(bias)?.data.clone(),
        })
    }

    fn from_prefix(w: &WeightContainer, prefix: &str) -> Result<Self> {
        Self::load(w, &format!("{prefix}.weight"), &format!("{prefix}.bias"))
    }

    pub(super) fn apply(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(&self.weight[r * self.cols..(r + 1) * self.cols], x) + self.bias[r])
            .collect()
    }

    fn apply_relu(&self, x: &[f32]) -> Vec<f32> {
        let mut y = self.apply(x);
        y.iter_mut().for_each(|v| *v = v.max(0.0));
        y
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU direction with gate order (reset, update, new).
#[derive(Debug, Clone)]
struct GruCell {
    input: Linear,
    hidden: Linear,
}

impl GruCell {
    fn load(w: &WeightContainer, suffix: &str) -> Result<Self> {
        Ok(Self {
            input: Linear::load(
                w,
                &format!("gru.weight_ih_l0{suffix}"),
                &format!("gru.bias_ih_l0{suffix}"),
            )?,
            hidden: Linear::load(
                w,
                &format!("gru.weight_hh_l0{suffix}"),
                &format!("gru.bias_hh_l0{suffix}"),
            )?,
        })
    }

    fn step(&self, x: &[f32], h: &[f32]) -> Vec<f32> {
        let n = h.len();
        let gi = self.input.apply(x);
        let gh = self.hidden.apply(h);
        (0..n)
            .map(|k| {
                let r = sigmoid(gi[k] + gh[k]);
                let z = sigmoid(gi[n + k] + gh[n + k]);
                let c = (gi[2 * n + k] + r * gh[2 * n + k]).tanh();
                (1.0 - z) * c + z * h[k]
            })
            .collect()
    }
}

/// Inference graph built from a validated weight container.
#[derive(Debug, Clone)]
pub(super) struct Network {
    pub(super) hyper: Hyperparameters,
    blocks: Vec<Linear>,
    global: Linear,
    forward: GruCell,
    backward: GruCell,
    decoder: Vec<Linear>,
    head: Linear,
}

impl Network {
    pub(super) fn new(w: &WeightContainer) -> Result<Self> {
        w.validate()?;
        let hyper = w.hyperparameters.clone();
        Ok(Self {
            blocks: (0..hyper.point_widths.len())
                .map(|i| Linear::from_prefix(w, &format!("enc.block{i}")))
                .collect::<Result<_>>()?,
            global: Linear::from_prefix(w, "enc.global")?,
            forward: GruCell::load(w, "")?,
            backward: GruCell::load(w, "_reverse")?,
            decoder: (0..hyper.decoder_widths.len())
                .map(|i| Linear::from_prefix(w, &format!("dec.layer{i}")))
                .collect::<Result<_>>()?,
            head: Linear::from_prefix(w, "dec.head")?,
            hyper,
        })
    }

    /// Per-point features → blocks of `[relu(Wx+b), max-pool]` → global layer → max-pool.
    pub(super) fn frame_feature(&self, inputs: &[Vec<f32>]) -> Vec<f32> {
        let mut feats: Vec<Vec<f32>> = inputs.to_vec();
        for block in &self.blocks {
            let h: Vec<Vec<f32>> = feats.par_iter().map(|x| block.apply_relu(x)).collect();
            let g = max_pool(&h);
            feats = h
                .into_iter()
                .map(|mut v| {
                    v.extend_from_slice(&g);
                    v
                })
                .collect();
        }
        let h: Vec<Vec<f32>> = feats
            .par_iter()
            .map(|x| self.global.apply_relu(x))
            .collect();
        max_pool(&h)
    }

    /// Bidirectional GRU over frame features from a zero state.
    pub(super) fn temporal(&self, features: &[Vec<f32>]) -> Vec<Vec<f32>> {
        let h = self.hyper.gru_hidden;
        let t = features.len();
        let mut fwd = Vec::with_capacity(t);
        let mut state = vec![0f32; h];
        for f in features {
            state = self.forward.step(f, &state);
            fwd.push(state.clone());
        }
        let mut bwd = vec![Vec::new(); t];
        let mut state = vec![0f32; h];
        for i in (0..t).rev() {
            state = self.backward.step(&features[i], &state);
            bwd[i] = state.clone();
        }
        fwd.into_iter()
            .zip(bwd)
            .map(|(mut a, b)| {
                a.extend(b);
                a
            })
            .collect()
    }

    /// Head outputs `(logit, d, y)` for one point given `[z, o, n]`.
    pub(super) fn decode_point(&self, input: &[f32]) -> [f32; HEAD_OUTPUTS] {
        let mut x = input.to_vec();
        for layer in &self.decoder {
            x = layer.apply_relu(&x);
        }
        let y = self.head.apply(&x);
        let mut out = [0f32; HEAD_OUTPUTS];
        out.copy_from_slice(&y);
        out
    }
}

fn max_pool(rows: &[Vec<f32>]) -> Vec<f32> {
    let mut g = rows[0].clone();
    for r in &rows[1..] {
        for (a, b) in g.iter_mut().zip(r) {
            *a = a.max(*b);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum_closely() {
        let a: Vec<f32> = (0..37).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..37).map(|i| (i as f32 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
        assert!((dot(&a, &b) as f64 - naive).abs() < 1e-5);
    }
}
