use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use toch::demo::DemoConfig;
use toch::denoiser::{baseline_smooth, Denoiser, Hyperparameters, WeightContainer};
use toch::field::{read_toch, write_toch, ExtractConfig};
use toch::fitter::{fit_sequence, FitConfig};
use toch::geometry::{obj, sample_surface};
use toch::hand::read_model;
use toch::metrics::MetricOptions;
use toch::perturb::{perturb_sequence, NoiseKind, NoiseSpec};
use toch::pipeline::{
    cmd_extract, cmd_metrics, cmd_refine, cmd_transfer, write_demo, DenoiseMode, SequenceBundle,
};
use toch::{Error, Result};

/// Refine hand-object interaction sequences through object-anchored
/// correspondence fields.
#[derive(Parser, Debug)]
#[command(name = "toch", version, about)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample points and normals on a mesh surface and write them as JSON.
    SamplePoints {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract correspondence fields of a sequence into a binary field file.
    Extract {
        #[arg(long)]
        sequence: PathBuf,
        #[command(flatten)]
        extract: ExtractArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add synthetic tracking noise to a sequence.
    Perturb {
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Translation noise standard deviation (m).
        #[arg(long, default_value_t = 0.0)]
        sigma_trans: f64,
        /// Axis-angle noise standard deviation per component (rad).
        #[arg(long, default_value_t = 0.0)]
        sigma_pose: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Denoise a field file with trained weights or the temporal smoother.
    Denoise {
        #[arg(long)]
        field: PathBuf,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the hand model to a field file.
    Fit {
        /// Hand model JSON.
        #[arg(long)]
        model: PathBuf,
        /// Sequence file used as the starting point.
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
        /// Optional JSON fit report.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract, denoise and fit in one go.
    Refine {
        #[arg(long)]
        sequence: PathBuf,
        #[command(flatten)]
        denoiser: DenoiserArgs,
        /// Use this field file in place of the denoised fields (experiments).
        #[arg(long, conflicts_with_all = ["weights", "baseline"])]
        oracle_field: Option<PathBuf>,
        #[command(flatten)]
        extract: ExtractArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Optional JSON report: fit losses and refined-vs-input metrics.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a predicted sequence against groundtruth.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Rigidly align each predicted frame to groundtruth before measuring errors.
        #[arg(long)]
        procrustes: bool,
        /// Voxel edge for intersection volume (m).
        #[arg(long, default_value_t = 0.005)]
        voxel_edge: f64,
        /// Contact threshold on |d| (m).
        #[arg(long, default_value_t = 0.002)]
        tau: f64,
        #[command(flatten)]
        extract: ExtractArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Move a grasp onto another object through the latent codes.
    Transfer {
        #[arg(long)]
        sequence: PathBuf,
        /// Target object mesh (OBJ).
        #[arg(long)]
        target_object: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        extract: ExtractArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic demo: hand model, box object, clean and noisy sequences,
    /// and an untrained weight container.
    MakeDemo {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma_trans: f64,
        #[arg(long, default_value_t = 0.3)]
        sigma_pose: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Translation,
    Pose,
    Balanced,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Object points sampled per sequence.
    #[arg(long, default_value_t = 2000)]
    n_points: usize,
    /// Seed of the object point sampler.
    #[arg(long, default_value_t = 0)]
    point_seed: u64,
    /// Offset of the occlusion ray origin (m).
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
}

impl ExtractArgs {
    fn config(&self) -> ExtractConfig {
        ExtractConfig {
            n_points: self.n_points,
            seed: self.point_seed,
            eps: self.eps,
        }
    }
}

#[derive(Args, Debug)]
struct DenoiserArgs {
    /// Weight container manifest (JSON).
    #[arg(long, conflicts_with = "baseline")]
    weights: Option<PathBuf>,
    /// Use the training-free temporal smoother instead of a network.
    #[arg(long)]
    baseline: bool,
    /// Smoother window in frames (odd).
    #[arg(long, default_value_t = 5)]
    window: usize,
}

impl DenoiserArgs {
    fn mode(&self) -> Result<DenoiseMode> {
        match (&self.weights, self.baseline) {
            (Some(w), _) => Ok(DenoiseMode::Model(Denoiser::new(&WeightContainer::read(
                w,
            )?)?)),
            (None, true) => Ok(DenoiseMode::Baseline {
                window: self.window,
            }),
            (None, false) => Err(Error::InvalidArgument(
                "no denoiser given: pass --weights <manifest> or --baseline".into(),
            )),
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Shape prior weight.
    #[arg(long)]
    w1: Option<f64>,
    /// Pose prior weight.
    #[arg(long)]
    w2: Option<f64>,
    /// Pose velocity weight.
    #[arg(long)]
    w3: Option<f64>,
    /// Joint acceleration weight.
    #[arg(long)]
    w4: Option<f64>,
    #[arg(long)]
    stage1_iters: Option<usize>,
    #[arg(long)]
    stage2_iters: Option<usize>,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        let d = FitConfig::default();
        FitConfig {
            w1: self.w1.unwrap_or(d.w1),
            w2: self.w2.unwrap_or(d.w2),
            w3: self.w3.unwrap_or(d.w3),
            w4: self.w4.unwrap_or(d.w4),
            stage1_iters: self.stage1_iters.unwrap_or(d.stage1_iters),
            stage2_iters: self.stage2_iters.unwrap_or(d.stage2_iters),
            ..d
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: serde::Serialize>(value: T) -> serde_json::Value {
    serde_json::to_value(value).expect("report types serialize")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SamplePoints { mesh, n, seed, out } => {
            let mesh = obj::read_obj(&mesh)?;
            let set = sample_surface(&mesh, n, seed)?;
            let rows = |v: &[toch::Vec3]| v.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>();
            write_json(
                &out,
                &serde_json::json!({
                    "sampler": toch::geometry::SplitMix64::NAME,
                    "seed": seed,
                    "points": rows(&set.points),
                    "normals": rows(&set.normals),
                }),
            )
        }
        Command::Extract {
            sequence,
            extract,
            out,
        } => {
            let bundle = SequenceBundle::load(&sequence)?;
            let fields = cmd_extract(&bundle, &extract.config())?;
            log::info!(
                "extracted {} frames, {} active correspondences",
                fields.len(),
                fields
                    .frames()
                    .iter()
                    .map(|f| f.active_count())
                    .sum::<usize>()
            );
            write_toch(&fields, &out)
        }
        Command::Perturb {
            sequence,
            kind,
            sigma_trans,
            sigma_pose,
            seed,
            out,
        } => {
            let kind = match kind {
                KindArg::Translation => NoiseKind::TranslationDominant,
                KindArg::Pose => NoiseKind::PoseDominant,
                KindArg::Balanced => NoiseKind::Balanced,
            };
            let spec = NoiseSpec {
                kind,
                sigma_trans,
                sigma_pose,
                seed,
            };
            let bundle = SequenceBundle::load(&sequence)?;
            let noisy = perturb_sequence(&bundle.sequence, &spec)?;
            bundle.with_sequence(noisy).save(&out)
        }
        Command::Denoise {
            field,
            denoiser,
            out,
        } => {
            let fields = read_toch(&field)?;
            let result = match denoiser.mode()? {
                DenoiseMode::Model(d) => d.denoise(&fields)?,
                DenoiseMode::Baseline { window } => baseline_smooth(&fields, window)?,
                DenoiseMode::Oracle(_) => unreachable!("not constructed from flags"),
            };
            write_toch(&result, &out)
        }
        Command::Fit {
            model,
            init,
            field,
            fit,
            report,
            out,
        } => {
            let bundle = SequenceBundle::load(&init)?;
            let model_path = model;
            let model = read_model(&model_path)?;
            let fields = read_toch(&field)?;
            let (seq, rep) = fit_sequence(&model, &fields, &bundle.sequence, &fit.config())?;
            log::info!(
                "fit loss {:.6e} -> {:.6e}",
                rep.initial_loss(),
                rep.final_loss()
            );
            if let Some(path) = report {
                write_json(&path, &to_json(&rep))?;
            }
            let mut fitted = bundle.with_sequence(seq);
            fitted.model = Arc::new(model);
            fitted.hand_model_path = model_path;
            fitted.save(&out)
        }
        Command::Refine {
            sequence,
            denoiser,
            oracle_field,
            extract,
            fit,
            report,
            out,
        } => {
            let bundle = SequenceBundle::load(&sequence)?;
            let mode = match oracle_field {
                Some(path) => DenoiseMode::Oracle(read_toch(&path)?),
                None => denoiser.mode()?,
            };
            let metrics = MetricOptions {
                n_points: extract.n_points,
                seed: extract.point_seed,
                eps: extract.eps,
                ..MetricOptions::default()
            };
            let result = cmd_refine(&bundle, &mode, &extract.config(), &fit.config(), &metrics)?;
            log::info!(
                "refined: mean vertex change {:.3} mm, fit loss {:.6e} -> {:.6e}",
                result.change.mpvpe,
                result.fit.initial_loss(),
                result.fit.final_loss()
            );
            if let Some(path) = report {
                write_json(
                    &path,
                    &serde_json::json!({ "fit": to_json(&result.fit), "change": to_json(&result.change) }),
                )?;
            }
            bundle.with_sequence(result.sequence).save(&out)
        }
        Command::Metrics {
            pred,
            gt,
            procrustes,
            voxel_edge,
            tau,
            extract,
            out,
        } => {
            let options = MetricOptions {
                procrustes,
                voxel_edge,
                tau,
                n_points: extract.n_points,
                seed: extract.point_seed,
                eps: extract.eps,
            };
            let report = cmd_metrics(
                &SequenceBundle::load(&pred)?,
                &SequenceBundle::load(&gt)?,
                &options,
            )?;
            write_json(&out, &to_json(&report))
        }
        Command::Transfer {
            sequence,
            target_object,
            weights,
            extract,
            fit,
            out,
        } => {
            let bundle = SequenceBundle::load(&sequence)?;
            let target = obj::read_obj(&target_object)?;
            let denoiser = Denoiser::new(&WeightContainer::read(&weights)?)?;
            let result = cmd_transfer(
                &bundle,
                &target,
                &denoiser,
                &extract.config(),
                &fit.config(),
            )?;
            let mut moved = bundle.with_sequence(result.sequence);
            moved.object = Arc::new(target);
            moved.object_mesh_path = target_object;
            moved.save(&out)
        }
        Command::MakeDemo {
            out_dir,
            frames,
            sigma_trans,
            sigma_pose,
            seed,
        } => {
            let files = write_demo(
                &out_dir,
                &DemoConfig {
                    frames,
                    ..DemoConfig::default()
                },
                &NoiseSpec::balanced(sigma_trans, sigma_pose, seed),
            )?;
            WeightContainer::random(Hyperparameters::default(), seed)?
                .write(&out_dir.join("untrained_weights.json"))?;
            log::info!("demo written to {}", out_dir.display());
            for p in [
                files.hand_model,
                files.object_mesh,
                files.groundtruth,
                files.noisy,
            ] {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: invalid-argument: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
