//! Named-tensor weight container: a JSON manifest next to a raw
//! little-endian f32 blob.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

/// Network widths. These fully determine the tensor set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Per-point input width: c, d, y, o, n.
    pub input_features: usize,
    /// Output width of each point block; each block feeds `[h, max h]` on.
    pub point_widths: Vec<usize>,
    /// Width of the last per-point layer, max-pooled into the frame feature.
    pub global_feature: usize,
    /// Hidden size per GRU direction.
    pub gru_hidden: usize,
    pub decoder_widths: Vec<usize>,
    /// Latent width; equals twice the GRU hidden size.
    pub latent: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            input_features: 11,
            point_widths: vec![64, 128],
            global_feature: 256,
            gru_hidden: 128,
            decoder_widths: vec![256, 128, 64],
            latent: 256,
        }
    }
}

/// Per-point decoder head: logit of c, d, y.
pub const HEAD_OUTPUTS: usize = 5;

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::WeightMismatch(m.to_string()));
        if self.input_features != 11 {
            return bad("input_features must be 11 (c, d, y, o, n)");
        }
        if self.point_widths.is_empty() || self.point_widths.contains(&0) {
            return bad("point_widths must be non-empty and positive");
        }
        if self.global_feature == 0 || self.gru_hidden == 0 || self.decoder_widths.contains(&0) {
            return bad("layer widths must be positive");
        }
        if self.latent != 2 * self.gru_hidden {
            return bad("latent must equal 2 * gru_hidden");
        }
        Ok(())
    }

    /// Every tensor the architecture needs, as `(name, shape)` in a fixed order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut linear = |name: String, rows: usize, cols: usize| {
            out.push((format!("{name}.weight"), vec![rows, cols]));
            out.push((format!("{name}.bias"), vec![rows]));
        };
        let mut width = self.input_features;
        for (i, &w) in self.point_widths.iter().enumerate() {
            linear(format!("enc.block{i}"), w, width);
            width = 2 * w;
        }
        linear("enc.global".into(), self.global_feature, width);
        let mut width = self.latent + 6;
        for (i, &w) in self.decoder_widths.iter().enumerate() {
            linear(format!("dec.layer{i}"), w, width);
            width = w;
        }
        linear("dec.head".into(), HEAD_OUTPUTS, width);
        let h = self.gru_hidden;
        for suffix in ["", "_reverse"] {
            out.push((
                format!("gru.weight_ih_l0{suffix}"),
                vec![3 * h, self.global_feature],
            ));
            out.push((format!("gru.weight_hh_l0{suffix}"), vec![3 * h, h]));
            out.push((format!("gru.bias_ih_l0{suffix}"), vec![3 * h]));
            out.push((format!("gru.bias_hh_l0{suffix}"), vec![3 * h]));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    hyperparameters: Hyperparameters,
    tensors: Vec<TensorEntry>,
    /// Blob file name, relative to the manifest.
    blob: String,
}

/// Trained (or random) auto-encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightContainer {
    pub hyperparameters: Hyperparameters,
    pub tensors: BTreeMap<String, Tensor>,
}

impl WeightContainer {
    /// Uniform `±1/√fan_in` initialization, deterministic in `seed`.
    pub fn random(hyperparameters: Hyperparameters, seed: u64) -> Result<Self> {
        hyperparameters.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        // Biases follow their weight in `tensor_specs` order and share its bound.
        let mut fan_in = 1;
        for (name, shape) in hyperparameters.tensor_specs() {
            if name.starts_with("gru.") {
                fan_in = hyperparameters.gru_hidden;
            } else if shape.len() == 2 {
                fan_in = shape[1];
            }
            let bound = 1.0 / (fan_in as f32).sqrt();
            let len = shape.iter().product();
            let data = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
            tensors.insert(name, Tensor { shape, data });
        }
        Ok(Self {
            hyperparameters,
            tensors,
        })
    }

    /// Check that exactly the architecture's tensors are present with the right shapes.
    pub fn validate(&self) -> Result<()> {
        self.hyperparameters.validate()?;
        let specs = self.hyperparameters.tensor_specs();
        for (name, shape) in &specs {
            let t = self
                .tensors
                .get(name)
                .ok_or_else(|| Error::WeightMismatch(format!("missing tensor {name}")))?;
            if &t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::WeightMismatch(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
        }
        if let Some(extra) = self
            .tensors
            .keys()
            .find(|k| !specs.iter().any(|(n, _)| n == *k))
        {
            return Err(Error::WeightMismatch(format!("unexpected tensor {extra}")));
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::WeightMismatch(format!("missing tensor {name}")))
    }

    /// Write `manifest` and a blob named after it with extension `.bin`.
    pub fn write(&self, manifest: &Path) -> Result<()> {
        let blob_path = manifest.with_extension("bin");
        let blob_name = blob_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("bad manifest path {}", manifest.display()))
            })?;
        let mut blob = Vec::new();
        let mut entries = Vec::new();
        for (name, t) in &self.tensors {
            entries.push(TensorEntry {
                name: name.clone(),
                shape: t.shape.clone(),
                offset: blob.len(),
            });
            let start = blob.len();
            blob.resize(start + 4 * t.data.len(), 0);
            LittleEndian::write_f32_into(&t.data, &mut blob[start..]);
        }
        let m = Manifest {
            format_version: WEIGHTS_FORMAT_VERSION,
            hyperparameters: self.hyperparameters.clone(),
            tensors: entries,
            blob: blob_name,
        };
        let text =
            serde_json::to_string_pretty(&m).map_err(|e| Error::parse(manifest, e.to_string()))?;
        std::fs::write(manifest, text).map_err(|e| Error::io(manifest, e))?;
        std::fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))
    }

    pub fn read(manifest: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::parse(manifest, e.to_string()))?;
        if m.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(Error::WeightMismatch(format!(
                "unsupported weight format version {}",
                m.format_version
            )));
        }
        let blob_path: PathBuf = manifest
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&m.blob);
        let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        let mut tensors = BTreeMap::new();
        for e in m.tensors {
            let len: usize = e.shape.iter().product();
            let end = e.offset + 4 * len;
            if e.offset % 4 != 0 || end > blob.len() {
                return Err(Error::WeightMismatch(format!(
                    "tensor {} [{}..{}) outside a {}-byte blob",
                    e.name,
                    e.offset,
                    end,
                    blob.len()
                )));
            }
            let mut data = vec![0f32; len];
            LittleEndian::read_f32_into(&blob[e.offset..end], &mut data);
            if tensors
                .insert(
                    e.name.clone(),
                    Tensor {
                        shape: e.shape,
                        data,
                    },
                )
                .is_some()
            {
                return Err(Error::WeightMismatch(format!(
                    "duplicate tensor {}",
                    e.name
                )));
            }
        }
        let out = Self {
            hyperparameters: m.hyperparameters,
            tensors,
        };
        out.validate()?;
        Ok(out)
    }
}
