//! Sequence files and the end-to-end commands behind the CLI.
//!
//! A sequence file is JSON:
//! `{"hand_model", "object_mesh", "fps", "shape", "coordinate_frame", "frames": [{"pose", "trans"}]}`
//! with poses flattened to `3·J` numbers and file references resolved
//! relative to the sequence file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::denoiser::{baseline_smooth, Denoiser};
use crate::field::{extract_sequence_on, ExtractConfig, TochSequence};
use crate::fitter::{fit_sequence, FitConfig, FitReport};
use crate::geometry::{obj, sample_surface, Bvh, TriMesh};
use crate::hand::{read_model, HandFrame, HandModel, HandSequence};
use crate::metrics::{evaluate, MetricOptions, MetricReport};
use crate::{Error, Result, Vec3};

pub const OBJECT_LOCAL: &str = "object-local";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub pose: Vec<f64>,
    pub trans: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub hand_model: String,
    pub object_mesh: String,
    pub fps: f64,
    pub shape: Vec<f64>,
    #[serde(default = "object_local")]
    pub coordinate_frame: String,
    pub frames: Vec<FrameRecord>,
}

fn object_local() -> String {
    OBJECT_LOCAL.to_string()
}

impl SequenceFile {
    pub fn from_sequence(hand_model: &str, object_mesh: &str, seq: &HandSequence) -> Self {
        Self {
            hand_model: hand_model.to_string(),
            object_mesh: object_mesh.to_string(),
            fps: seq.fps,
            shape: seq.shape().to_vec(),
            coordinate_frame: object_local(),
            frames: seq
                .frames()
                .iter()
                .map(|f| FrameRecord {
                    pose: f.pose.iter().flat_map(|v| [v.x, v.y, v.z]).collect(),
                    trans: [f.trans.x, f.trans.y, f.trans.z],
                })
                .collect(),
        }
    }

    pub fn to_sequence(&self) -> Result<HandSequence> {
        if self.frames.is_empty() {
            return Err(Error::InvalidArgument("sequence has no frames".into()));
        }
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                if f.pose.len() % 3 != 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "frame {i}: pose has {} numbers, not a multiple of 3",
                        f.pose.len()
                    )));
                }
                Ok(HandFrame {
                    pose: f
                        .pose
                        .chunks(3)
                        .map(|c| Vec3::new(c[0], c[1], c[2]))
                        .collect(),
                    trans: Vec3::from(f.trans),
                    shape: self.shape.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        HandSequence::new(frames, self.fps)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| Error::parse(path, e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// A loaded sequence file with its hand model and object mesh.
#[derive(Debug, Clone)]
pub struct SequenceBundle {
    pub hand_model_path: PathBuf,
    pub object_mesh_path: PathBuf,
    pub model: Arc<HandModel>,
    pub object: Arc<TriMesh>,
    pub sequence: HandSequence,
}

fn resolve(base: &Path, reference: &str) -> PathBuf {
    let p = Path::new(reference);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// `target` expressed relative to `dir` when it lives inside it, else absolute.
fn reference_from(dir: &Path, target: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (dir, target) = (abs(dir), abs(target));
    match target.strip_prefix(&dir) {
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => target.to_string_lossy().into_owned(),
    }
}

impl SequenceBundle {
    pub fn load(path: &Path) -> Result<Self> {
        let file = SequenceFile::read(path)?;
        if file.coordinate_frame != OBJECT_LOCAL {
            return Err(Error::parse(
                path,
                format!(
                    "coordinate_frame must be \"{OBJECT_LOCAL}\", got \"{}\"",
                    file.coordinate_frame
                ),
            ));
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let hand_model_path = resolve(base, &file.hand_model);
        let object_mesh_path = resolve(base, &file.object_mesh);
        let model = read_model(&hand_model_path)?;
        let object = obj::read_obj(&object_mesh_path)?;
        let sequence = file.to_sequence().map_err(|e| match e {
            Error::Io { .. } | Error::Parse { .. } => e,
            other => Error::parse(path, other.to_string()),
        })?;
        for f in sequence.frames() {
            model
                .check_frame(f)
                .map_err(|e| Error::parse(path, e.to_string()))?;
        }
        Ok(Self {
            hand_model_path,
            object_mesh_path,
            model: Arc::new(model),
            object: Arc::new(object),
            sequence,
        })
    }

    /// Same model and object, different motion.
    pub fn with_sequence(&self, sequence: HandSequence) -> Self {
        Self {
            sequence,
            ..self.clone()
        }
    }

    /// Write the sequence file; model and object references are re-expressed
    /// relative to the new file's directory.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        SequenceFile::from_sequence(
            &reference_from(dir, &self.hand_model_path),
            &reference_from(dir, &self.object_mesh_path),
            &self.sequence,
        )
        .write(path)
    }
}

/// Skin every frame and extract fields against the bundle's object.
pub fn cmd_extract(bundle: &SequenceBundle, config: &ExtractConfig) -> Result<TochSequence> {
    let hands = bundle.sequence.skin_all(&bundle.model)?;
    let points = Arc::new(sample_surface(
        &bundle.object,
        config.n_points,
        config.seed,
    )?);
    extract_sequence_on(
        &hands,
        bundle.model.template_vertices(),
        &Bvh::new((*bundle.object).clone()),
        points,
        config.eps,
    )
}

/// How noisy fields are turned into the fields the fitter targets.
#[derive(Debug, Clone)]
pub enum DenoiseMode {
    Model(Denoiser),
    Baseline {
        window: usize,
    },
    /// Replace the input fields with precomputed ones (e.g. clean fields in experiments).
    Oracle(TochSequence),
}

impl DenoiseMode {
    pub fn apply(&self, fields: &TochSequence) -> Result<TochSequence> {
        match self {
            DenoiseMode::Model(d) => d.denoise(fields),
            DenoiseMode::Baseline { window } => baseline_smooth(fields, *window),
            DenoiseMode::Oracle(clean) => {
                if clean.len() != fields.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "oracle field has {} frames, sequence has {}",
                        clean.len(),
                        fields.len()
                    )));
                }
                if !clean.points().matches(fields.points(), 1e-6) {
                    return Err(Error::PointSetMismatch);
                }
                Ok(clean.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutput {
    pub sequence: HandSequence,
    pub input_fields: TochSequence,
    pub target_fields: TochSequence,
    pub fit: FitReport,
    /// Refined motion measured against the input motion.
    pub change: MetricReport,
}

/// Extract → denoise → fit, starting the fit at the input motion.
pub fn cmd_refine(
    bundle: &SequenceBundle,
    mode: &DenoiseMode,
    extract: &ExtractConfig,
    fit: &FitConfig,
    metrics: &MetricOptions,
) -> Result<RefineOutput> {
    let input_fields = cmd_extract(bundle, extract).map_err(|e| e.in_stage("extract"))?;
    let target_fields = mode
        .apply(&input_fields)
        .map_err(|e| e.in_stage("denoise"))?;
    let (sequence, report) = fit_sequence(&bundle.model, &target_fields, &bundle.sequence, fit)
        .map_err(|e| e.in_stage("fit"))?;
    let change = evaluate(
        &bundle.model,
        &bundle.object,
        &sequence,
        &bundle.sequence,
        metrics,
    )
    .map_err(|e| e.in_stage("metrics"))?;
    Ok(RefineOutput {
        sequence,
        input_fields,
        target_fields,
        fit: report,
        change,
    })
}

#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub sequence: HandSequence,
    pub fields: TochSequence,
    pub fit: FitReport,
}

/// Encode the source interaction, decode it on the target object and fit,
/// starting from the source motion.
pub fn cmd_transfer(
    source: &SequenceBundle,
    target_object: &TriMesh,
    denoiser: &Denoiser,
    extract: &ExtractConfig,
    fit: &FitConfig,
) -> Result<TransferOutput> {
    let source_fields = cmd_extract(source, extract).map_err(|e| e.in_stage("extract"))?;
    let target_points = Arc::new(
        sample_surface(target_object, extract.n_points, extract.seed)
            .map_err(|e| e.in_stage("sample"))?,
    );
    let fields = denoiser
        .transfer(&source_fields, target_points)
        .map_err(|e| e.in_stage("transfer"))?;
    let (sequence, report) = fit_sequence(&source.model, &fields, &source.sequence, fit)
        .map_err(|e| e.in_stage("fit"))?;
    Ok(TransferOutput {
        sequence,
        fields,
        fit: report,
    })
}

/// Compare two sequences over the same model and object.
pub fn cmd_metrics(
    pred: &SequenceBundle,
    gt: &SequenceBundle,
    options: &MetricOptions,
) -> Result<MetricReport> {
    if pred.model.joint_count() != gt.model.joint_count()
        || pred.model.vertex_count() != gt.model.vertex_count()
    {
        return Err(Error::ModelMismatch(
            "prediction and groundtruth use different hand models".into(),
        ));
    }
    evaluate(&gt.model, &gt.object, &pred.sequence, &gt.sequence, options)
}

/// Paths written by [`write_demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct DemoFiles {
    pub hand_model: PathBuf,
    pub object_mesh: PathBuf,
    pub groundtruth: PathBuf,
    pub noisy: PathBuf,
}

/// Write the synthetic grasp scene: hand model, object mesh, the clean
/// sequence and a perturbed copy.
pub fn write_demo(
    dir: &Path,
    config: &crate::demo::DemoConfig,
    noise: &crate::perturb::NoiseSpec,
) -> Result<DemoFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scene = crate::demo::make_demo(config);
    let files = DemoFiles {
        hand_model: dir.join("hand.json"),
        object_mesh: dir.join("object.obj"),
        groundtruth: dir.join("groundtruth.json"),
        noisy: dir.join("noisy.json"),
    };
    crate::hand::write_model(&scene.model, &files.hand_model)?;
    obj::write_obj(&files.object_mesh, &scene.object)?;
    SequenceFile::from_sequence("hand.json", "object.obj", &scene.sequence)
        .write(&files.groundtruth)?;
    let noisy = crate::perturb::perturb_sequence(&scene.sequence, noise)?;
    SequenceFile::from_sequence("hand.json", "object.obj", &noisy).write(&files.noisy)?;
    Ok(files)
}
