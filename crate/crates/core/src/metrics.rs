//! Evaluation metrics: joint and vertex position errors, solid intersection
//! volume and contact IoU.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::field::{contact_map, extract_sequence_on, TochFrame, DEFAULT_CONTACT_THRESHOLD};
use crate::geometry::voxel::cover_dims;
use crate::geometry::{procrustes_align, voxelize_region, Bvh, ObjectPointSet, TriMesh};
use crate::hand::{HandModel, HandSequence};
use crate::{Error, Result, Vec3};

pub const DEFAULT_VOXEL_EDGE: f64 = 0.005;

/// Running mean; exact when every sample is identical.
#[derive(Debug, Default, Clone, Copy)]
struct RunningMean {
    mean: f64,
    count: usize,
}

impl RunningMean {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.mean += (x - self.mean) / self.count as f64;
    }
}

fn check_counts(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted frames vs {} groundtruth frames",
            pred.len(),
            gt.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.len() != g.len() {
            return Err(Error::ShapeMismatch(format!(
                "frame {i}: {} predicted points vs {} groundtruth points",
                p.len(),
                g.len()
            )));
        }
    }
    Ok(())
}

/// Mean Euclidean error of one frame, in millimetres.
pub fn frame_error_mm(pred: &[Vec3], gt: &[Vec3], procrustes: bool) -> Result<f64> {
    let mut m = RunningMean::default();
    if procrustes {
        let align = procrustes_align(pred, gt)?;
        for (p, g) in pred.iter().zip(gt) {
            m.push((align.apply(p) - g).norm());
        }
    } else {
        for (p, g) in pred.iter().zip(gt) {
            m.push((p - g).norm());
        }
    }
    Ok(m.mean * 1000.0)
}

/// Per-frame and overall mean position errors (mm).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionError {
    pub mean_mm: f64,
    pub per_frame_mm: Vec<f64>,
}

fn position_error(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], procrustes: bool) -> Result<PositionError> {
    check_counts(pred, gt)?;
    let per_frame_mm = pred
        .par_iter()
        .zip(gt)
        .map(|(p, g)| frame_error_mm(p, g, procrustes))
        .collect::<Result<Vec<_>>>()?;
    let mut m = RunningMean::default();
    per_frame_mm.iter().for_each(|&e| m.push(e));
    Ok(PositionError {
        mean_mm: m.mean,
        per_frame_mm,
    })
}

/// Mean per-joint position error over frames of joint sets.
pub fn mpjpe(pred: &[Vec<Vec3>], gt: &[Vec<Vec3>], procrustes: bool) -> Result<PositionError> {
    position_error(pred, gt, procrustes)
}

/// Mean per-vertex position error over frames of meshes.
pub fn mpvpe(pred: &[TriMesh], gt: &[TriMesh], procrustes: bool) -> Result<PositionError> {
    let v = |m: &[TriMesh]| m.iter().map(|x| x.vertices().to_vec()).collect::<Vec<_>>();
    position_error(&v(pred), &v(gt), procrustes)
}

/// Joint and vertex errors of two hand sequences under one model.
///
/// Without alignment, each error is evaluated as
/// `(local_pred − local_gt) + (t_pred − t_gt)` with posing done at zero
/// translation, so that sequences differing only in translation give exactly
/// equal joint and vertex errors.
pub fn sequence_errors(
    model: &HandModel,
    pred: &HandSequence,
    gt: &HandSequence,
    procrustes: bool,
) -> Result<(PositionError, PositionError)> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted frames vs {} groundtruth frames",
            pred.len(),
            gt.len()
        )));
    }
    let per_frame = pred
        .frames()
        .par_iter()
        .zip(gt.frames())
        .map(|(p, g)| -> Result<(f64, f64)> {
            let local = |f: &crate::hand::HandFrame| -> Result<(Vec<Vec3>, Vec<Vec3>)> {
                let mut f = f.clone();
                f.trans = Vec3::zeros();
                let posed = model.pose(&f)?;
                let v = posed.vertices();
                let j = model.regress_joints(&v)?;
                Ok((v, j))
            };
            let (pv, pj) = local(p)?;
            let (gv, gj) = local(g)?;
            let dt = p.trans - g.trans;
            if procrustes {
                let shift =
                    |xs: Vec<Vec3>, t: &Vec3| xs.into_iter().map(|x| x + t).collect::<Vec<_>>();
                let (pv, pj) = (shift(pv, &p.trans), shift(pj, &p.trans));
                let (gv, gj) = (shift(gv, &g.trans), shift(gj, &g.trans));
                return Ok((
                    frame_error_mm(&pj, &gj, true)?,
                    frame_error_mm(&pv, &gv, true)?,
                ));
            }
            let err = |a: &[Vec3], b: &[Vec3]| {
                let mut m = RunningMean::default();
                for (x, y) in a.iter().zip(b) {
                    m.push(((x - y) + dt).norm());
                }
                m.mean * 1000.0
            };
            Ok((err(&pj, &gj), err(&pv, &gv)))
        })
        .collect::<Result<Vec<_>>>()?;
    let summarize = |vals: Vec<f64>| {
        let mut m = RunningMean::default();
        vals.iter().for_each(|&e| m.push(e));
        PositionError {
            mean_mm: m.mean,
            per_frame_mm: vals,
        }
    };
    let (j, v): (Vec<f64>, Vec<f64>) = per_frame.into_iter().unzip();
    Ok((summarize(j), summarize(v)))
}

/// Volume (cm³) of voxels whose centers lie inside both meshes, on a grid of
/// edge `voxel_edge` anchored at the minimum corner of the bounding-box
/// intersection.
pub fn intersection_volume(hand: &Bvh, object: &Bvh, voxel_edge: f64) -> Result<f64> {
    if !(voxel_edge > 0.0) || !voxel_edge.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "voxel edge must be positive, got {voxel_edge}"
        )));
    }
    for (what, b) in [("hand", hand), ("object", object)] {
        if !b.is_closed() {
            log::warn!("{what} mesh is not closed; intersection volume may be unreliable");
        }
    }
    let Some(region) = hand.bounds().intersection(&object.bounds()) else {
        return Ok(0.0);
    };
    let dims = cover_dims(&region.extent(), voxel_edge);
    if dims.contains(&0) {
        return Ok(0.0);
    }
    let a = voxelize_region(hand, voxel_edge, region.min, dims)?;
    let b = voxelize_region(object, voxel_edge, region.min, dims)?;
    let both = a.overlap_count(&b)?;
    Ok(both as f64 * voxel_edge.powi(3) * 1e6)
}

/// Intersection and union sizes of two contact maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ContactOverlap {
    pub intersection: usize,
    pub union: usize,
}

impl ContactOverlap {
    /// IoU in percent; two empty maps agree perfectly (100).
    pub fn iou_percent(&self) -> f64 {
        if self.union == 0 {
            100.0
        } else {
            100.0 * self.intersection as f64 / self.union as f64
        }
    }
}

fn same_points(a: &Arc<ObjectPointSet>, b: &Arc<ObjectPointSet>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub fn contact_overlap(pred: &TochFrame, gt: &TochFrame, tau: f64) -> Result<ContactOverlap> {
    if !same_points(pred.points(), gt.points()) {
        return Err(Error::PointSetMismatch);
    }
    let (a, b) = (contact_map(pred, tau), contact_map(gt, tau));
    let mut out = ContactOverlap::default();
    for (x, y) in a.iter().zip(&b) {
        out.intersection += (*x && *y) as usize;
        out.union += (*x || *y) as usize;
    }
    Ok(out)
}

/// Contact IoU of one frame in percent.
pub fn contact_iou(pred: &TochFrame, gt: &TochFrame, tau: f64) -> Result<f64> {
    Ok(contact_overlap(pred, gt, tau)?.iou_percent())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub procrustes: bool,
    pub voxel_edge: f64,
    pub tau: f64,
    /// Object points used for the contact maps.
    pub n_points: usize,
    pub seed: u64,
    pub eps: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            procrustes: false,
            voxel_edge: DEFAULT_VOXEL_EDGE,
            tau: DEFAULT_CONTACT_THRESHOLD,
            n_points: crate::field::DEFAULT_POINT_COUNT,
            seed: 0,
            eps: crate::field::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMetrics {
    pub mpjpe: f64,
    pub mpvpe: f64,
    pub iv: f64,
    pub ciou: f64,
}

/// Summary of a prediction against groundtruth. Errors in mm, volume in cm³,
/// contact IoU in percent. The sequence C-IoU pools intersections and unions
/// over all frames; per-frame values are reported separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub mpjpe: f64,
    pub mpvpe: f64,
    /// Mean over frames of the predicted hand's intersection volume with the object.
    pub iv: f64,
    pub ciou: f64,
    pub procrustes: bool,
    pub voxel_edge: f64,
    pub tau: f64,
    pub frames: Vec<FrameMetrics>,
}

/// Full report of `pred` against `gt`, both expressed in object coordinates.
pub fn evaluate(
    model: &HandModel,
    object: &TriMesh,
    pred: &HandSequence,
    gt: &HandSequence,
    options: &MetricOptions,
) -> Result<MetricReport> {
    let (ej, ev) = sequence_errors(model, pred, gt, options.procrustes)?;
    let object_bvh = Bvh::new(object.clone());
    let pred_meshes = pred.skin_all(model)?;
    let gt_meshes = gt.skin_all(model)?;
    let iv = pred_meshes
        .iter()
        .map(|m| intersection_volume(&Bvh::new(m.clone()), &object_bvh, options.voxel_edge))
        .collect::<Result<Vec<_>>>()?;
    let points = Arc::new(crate::geometry::sample_surface(
        object,
        options.n_points,
        options.seed,
    )?);
    let canonical = model.template_vertices();
    let pf = extract_sequence_on(
        &pred_meshes,
        canonical,
        &object_bvh,
        points.clone(),
        options.eps,
    )?;
    let gf = extract_sequence_on(&gt_meshes, canonical, &object_bvh, points, options.eps)?;
    let overlaps = pf
        .frames()
        .iter()
        .zip(gf.frames())
        .map(|(p, g)| contact_overlap(p, g, options.tau))
        .collect::<Result<Vec<_>>>()?;
    let pooled = overlaps
        .iter()
        .fold(ContactOverlap::default(), |acc, o| ContactOverlap {
            intersection: acc.intersection + o.intersection,
            union: acc.union + o.union,
        });
    let mut iv_mean = RunningMean::default();
    iv.iter().for_each(|&x| iv_mean.push(x));
    let frames = (0..pred.len())
        .map(|i| FrameMetrics {
            mpjpe: ej.per_frame_mm[i],
            mpvpe: ev.per_frame_mm[i],
            iv: iv[i],
            ciou: overlaps[i].iou_percent(),
        })
        .collect();
    Ok(MetricReport {
        mpjpe: ej.mean_mm,
        mpvpe: ev.mean_mm,
        iv: iv_mean.mean,
        ciou: pooled.iou_percent(),
        procrustes: options.procrustes,
        voxel_edge: options.voxel_edge,
        tau: options.tau,
        frames,
    })
}
