//! Two-stage fitting of the hand model to decoded correspondence fields.
//!
//! Every active field entry yields a target point `o + d·n` and a template
//! surface point (the projection of its canonical coordinate). The objective
//! sums squared distances between targets and skinned template points, plus
//! shape/pose priors, pose velocity and a smoothed joint acceleration
//! penalty. Stage one moves only root orientation and translation; stage two
//! moves everything. Both stages run preconditioned L-BFGS with Armijo
//! backtracking, so accepted steps never increase the loss.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::field::{decode_field, TochFrame, TochSequence};
use crate::geometry::SurfacePoint;
use crate::hand::{FrameGradient, HandFrame, HandModel, HandSequence};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Shape prior weight.
    pub w1: f64,
    /// Pose prior weight.
    pub w2: f64,
    /// Pose velocity weight.
    pub w3: f64,
    /// Joint acceleration weight.
    pub w4: f64,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// Smoothing of the acceleration norm, `√(‖a‖² + ε²)`.
    pub smooth_eps: f64,
    /// Stop once an accepted step lowers the loss by less than this fraction.
    pub tolerance: f64,
    /// L-BFGS memory.
    pub history: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            w1: 1e-5,
            w2: 1e-6,
            w3: 1e-4,
            w4: 1e-4,
            stage1_iters: 200,
            stage2_iters: 2000,
            smooth_eps: 1e-6,
            tolerance: 1e-12,
            history: 20,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w1, self.w2, self.w3, self.w4];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "fit weights must be non-negative, got {ws:?}"
            )));
        }
        if !(self.smooth_eps > 0.0) || !(self.tolerance >= 0.0) || self.history == 0 {
            return Err(Error::InvalidArgument(
                "smooth_eps must be positive, tolerance non-negative, history at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A template surface point and where it should land.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub surface: SurfacePoint,
    pub target: Vec3,
}

/// Decode a field and project each canonical coordinate onto the template.
pub fn correspondences(model: &HandModel, frame: &TochFrame) -> Vec<Correspondence> {
    decode_field(frame)
        .into_iter()
        .map(|p| Correspondence {
            surface: model.project_to_template(&p.canonical),
            target: p.position,
        })
        .collect()
}

/// `Σ ‖target − skin(surface)‖²` for one frame and its gradient.
pub fn corr_loss(
    model: &HandModel,
    frame: &HandFrame,
    corr: &[Correspondence],
) -> Result<(f64, FrameGradient)> {
    let posed = model.pose(frame)?;
    let mut grad = FrameGradient::zeros(model.joint_count(), model.shape_count());
    let mut loss = 0.0;
    for c in corr {
        model.check_surface_point(&c.surface)?;
        let r = posed.point(&c.surface) - c.target;
        loss += r.norm_squared();
        posed.backprop_point(&c.surface, &(r * 2.0), &mut grad);
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RegTerms {
    pub shape: f64,
    pub pose: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl RegTerms {
    pub fn total(&self) -> f64 {
        self.shape + self.pose + self.velocity + self.acceleration
    }
}

/// Gradient over a whole sequence; per-frame `shape` fields stay zero and the
/// shared shape gradient lives in `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceGradient {
    pub frames: Vec<FrameGradient>,
    pub shape: Vec<f64>,
}

impl SequenceGradient {
    fn zeros(t: usize, j: usize, b: usize) -> Self {
        Self {
            frames: vec![FrameGradient::zeros(j, b); t],
            shape: vec![0.0; b],
        }
    }

    /// Move per-frame shape contributions into the shared entry.
    fn fold_shape(&mut self) {
        for f in &mut self.frames {
            for (s, g) in self.shape.iter_mut().zip(f.shape.iter_mut()) {
                *s += *g;
                *g = 0.0;
            }
        }
    }
}

/// Regularizer terms and their gradient. The acceleration of regressed joint
/// `k` at frame `i` is `p(i+1) − 2p(i) + p(i−1)`, summed over interior frames.
pub fn reg_loss(
    model: &HandModel,
    seq: &HandSequence,
    cfg: &FitConfig,
) -> Result<(RegTerms, SequenceGradient)> {
    let frames = seq.frames();
    let t = frames.len();
    let mut grad = SequenceGradient::zeros(t, model.joint_count(), model.shape_count());
    let mut terms = RegTerms::default();

    for (s, g) in seq.shape().iter().zip(grad.shape.iter_mut()) {
        terms.shape += cfg.w1 * s * s;
        *g += 2.0 * cfg.w1 * s;
    }
    for (i, f) in frames.iter().enumerate() {
        model.check_frame(f)?;
        for (m, th) in f.pose.iter().enumerate() {
            terms.pose += cfg.w2 * th.norm_squared();
            grad.frames[i].pose[m] += th * (2.0 * cfg.w2);
        }
    }
    for i in 0..t.saturating_sub(1) {
        for m in 0..model.joint_count() {
            let dv = frames[i + 1].pose[m] - frames[i].pose[m];
            terms.velocity += cfg.w3 * dv.norm_squared();
            grad.frames[i + 1].pose[m] += dv * (2.0 * cfg.w3);
            grad.frames[i].pose[m] -= dv * (2.0 * cfg.w3);
        }
    }
    if t >= 3 && cfg.w4 > 0.0 {
        let posed = frames
            .par_iter()
            .map(|f| model.pose(f))
            .collect::<Result<Vec<_>>>()?;
        let joints: Vec<Vec<Vec3>> = posed.par_iter().map(|p| p.joints()).collect();
        let eps2 = cfg.smooth_eps * cfg.smooth_eps;
        let mut jg = vec![vec![Vec3::zeros(); model.regressed_joint_count()]; t];
        for i in 1..t - 1 {
            for k in 0..model.regressed_joint_count() {
                let a = joints[i + 1][k] - joints[i][k] * 2.0 + joints[i - 1][k];
                let n = (a.norm_squared() + eps2).sqrt();
                terms.acceleration += cfg.w4 * n;
                let g = a * (cfg.w4 / n);
                jg[i + 1][k] += g;
                jg[i][k] -= g * 2.0;
                jg[i - 1][k] += g;
            }
        }
        let parts: Vec<FrameGradient> = posed
            .par_iter()
            .zip(&jg)
            .map(|(p, g)| {
                let mut fg = FrameGradient::zeros(model.joint_count(), model.shape_count());
                p.backprop_joints(g, &mut fg);
                fg
            })
            .collect();
        for (acc, p) in grad.frames.iter_mut().zip(&parts) {
            acc.add_scaled(p, 1.0);
        }
    }
    grad.fold_shape();
    Ok((terms, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossTerms {
    pub corr: f64,
    pub reg: RegTerms,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub name: &'static str,
    pub iterations: usize,
    pub initial: LossTerms,
    pub last: LossTerms,
    /// Total loss after every accepted step, starting with the initial loss.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub count: usize,
    /// Mean distance between targets and fitted points (m).
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub stages: Vec<StageReport>,
    pub residuals: Vec<ResidualStats>,
}

impl FitReport {
    pub fn initial_loss(&self) -> f64 {
        self.stages[0].initial.total
    }

    pub fn final_loss(&self) -> f64 {
        self.stages.last().map_or(0.0, |s| s.last.total)
    }
}

/// Fit to decoded fields, starting from `init` (typically the tracked input).
pub fn fit_sequence(
    model: &HandModel,
    fields: &TochSequence,
    init: &HandSequence,
    cfg: &FitConfig,
) -> Result<(HandSequence, FitReport)> {
    if fields.len() != init.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} field frames vs {} hand frames",
            fields.len(),
            init.len()
        )));
    }
    let corr: Vec<Vec<Correspondence>> = fields
        .frames()
        .par_iter()
        .map(|f| correspondences(model, f))
        .collect();
    fit_correspondences(model, &corr, init, cfg)
}

/// Fit to explicit per-frame correspondences.
pub fn fit_correspondences(
    model: &HandModel,
    corr: &[Vec<Correspondence>],
    init: &HandSequence,
    cfg: &FitConfig,
) -> Result<(HandSequence, FitReport)> {
    cfg.validate()?;
    if corr.len() != init.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} correspondence frames vs {} hand frames",
            corr.len(),
            init.len()
        )));
    }
    for f in init.frames() {
        model.check_frame(f)?;
    }
    let problem = Problem {
        model,
        corr,
        cfg,
        t: init.len(),
        j: model.joint_count(),
        b: model.shape_count(),
        fps: init.fps,
    };
    let mut x = problem.pack(init);
    let (initial, _) = problem.evaluate(&x)?;
    if !initial.total.is_finite() {
        return Err(Error::InvalidInitialization);
    }

    let per_frame = 3 * problem.j + 3;
    let root_and_trans: Vec<usize> = (0..problem.t)
        .flat_map(|i| {
            let base = i * per_frame;
            (base..base + 3).chain(base + 3 * problem.j..base + per_frame)
        })
        .collect();
    let everything: Vec<usize> = (0..x.len()).collect();

    let mut stages = Vec::new();
    for (name, active, iters) in [
        ("stage1", &root_and_trans, cfg.stage1_iters),
        ("stage2", &everything, cfg.stage2_iters),
    ] {
        let report = problem.minimize(name, &mut x, active, iters)?;
        stages.push(report);
    }

    let mut out = problem.unpack(&x)?;
    out = out.map_frames(|_, f| {
        let mut f = f.clone();
        f.canonicalize();
        f
    })?;
    let residuals = out
        .frames()
        .par_iter()
        .zip(corr)
        .map(|(f, c)| -> Result<ResidualStats> {
            let posed = model.pose(f)?;
            let mut sum = 0.0;
            let mut max: f64 = 0.0;
            for k in c {
                let r = (posed.point(&k.surface) - k.target).norm();
                sum += r;
                max = max.max(r);
            }
            Ok(ResidualStats {
                count: c.len(),
                mean: if c.is_empty() {
                    0.0
                } else {
                    sum / c.len() as f64
                },
                max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, FitReport { stages, residuals }))
}

struct Problem<'a> {
    model: &'a HandModel,
    corr: &'a [Vec<Correspondence>],
    cfg: &'a FitConfig,
    t: usize,
    j: usize,
    b: usize,
    fps: f64,
}

impl Problem<'_> {
    fn per_frame(&self) -> usize {
        3 * self.j + 3
    }

    fn pack(&self, seq: &HandSequence) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.t * self.per_frame() + self.b);
        for f in seq.frames() {
            for p in &f.pose {
                x.extend(p.iter());
            }
            x.extend(f.trans.iter());
        }
        x.extend(seq.shape());
        x
    }

    fn unpack(&self, x: &[f64]) -> Result<HandSequence> {
        let shape = x[self.t * self.per_frame()..].to_vec();
        let frames = (0..self.t)
            .map(|i| {
                let base = i * self.per_frame();
                let v = |o: usize| Vec3::new(x[o], x[o + 1], x[o + 2]);
                HandFrame {
                    pose: (0..self.j).map(|m| v(base + 3 * m)).collect(),
                    trans: v(base + 3 * self.j),
                    shape: shape.clone(),
                }
            })
            .collect();
        HandSequence::new(frames, self.fps)
    }

    fn evaluate(&self, x: &[f64]) -> Result<(LossTerms, Vec<f64>)> {
        let seq = self.unpack(x)?;
        let corr = seq
            .frames()
            .par_iter()
            .zip(self.corr)
            .map(|(f, c)| corr_loss(self.model, f, c))
            .collect::<Result<Vec<_>>>()?;
        let (reg, mut grad) = reg_loss(self.model, &seq, self.cfg)?;
        let mut corr_total = 0.0;
        for (g, (l, cg)) in grad.frames.iter_mut().zip(&corr) {
            corr_total += l;
            g.add_scaled(cg, 1.0);
        }
        grad.fold_shape();
        let mut flat = Vec::with_capacity(x.len());
        for f in &grad.frames {
            for p in &f.pose {
                flat.extend(p.iter());
            }
            flat.extend(f.trans.iter());
        }
        flat.extend(&grad.shape);
        let terms = LossTerms {
            corr: corr_total,
            reg,
            total: corr_total + reg.total(),
        };
        Ok((terms, flat))
    }

    /// Gauss-Newton diagonal of the quadratic terms, used as a preconditioner.
    fn diagonal(&self, x: &[f64]) -> Result<Vec<f64>> {
        let seq = self.unpack(x)?;
        let (j, b, pf) = (self.j, self.b, self.per_frame());
        let frames = seq
            .frames()
            .par_iter()
            .zip(self.corr)
            .map(|(f, c)| -> Result<(Vec<f64>, Vec<f64>)> {
                let posed = self.model.pose(f)?;
                let mut d = vec![0.0; pf];
                let mut ds = vec![0.0; b];
                for k in c {
                    let jac = posed.point_jacobian(&k.surface);
                    for m in 0..j {
                        for col in 0..3 {
                            d[3 * m + col] += 2.0 * jac.pose[m].column(col).norm_squared();
                        }
                    }
                    for a in 0..3 {
                        d[3 * j + a] += 2.0;
                    }
                    for (s, v) in ds.iter_mut().zip(&jac.shape) {
                        *s += 2.0 * v.norm_squared();
                    }
                }
                Ok((d, ds))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut diag = vec![0.0; x.len()];
        for (i, (d, ds)) in frames.iter().enumerate() {
            let neighbours = (i > 0) as usize + (i + 1 < self.t) as usize;
            for (o, v) in d.iter().enumerate() {
                let prior = if o < 3 * j {
                    2.0 * self.cfg.w2 + 2.0 * self.cfg.w3 * neighbours as f64
                } else {
                    0.0
                };
                diag[i * pf + o] = v + prior;
            }
            for (s, v) in ds.iter().enumerate() {
                diag[self.t * pf + s] += v;
            }
        }
        for s in 0..b {
            diag[self.t * pf + s] += 2.0 * self.cfg.w1;
        }
        // Floor each parameter class relative to its best-constrained member.
        let classes: [Box<dyn Fn(usize) -> bool>; 3] = [
            Box::new(|i: usize| i < self.t * pf && i % pf < 3 * j),
            Box::new(|i: usize| i < self.t * pf && i % pf >= 3 * j),
            Box::new(|i: usize| i >= self.t * pf),
        ];
        for class in &classes {
            let max = (0..diag.len())
                .filter(|&i| class(i))
                .map(|i| diag[i])
                .fold(0.0, f64::max);
            let floor = if max > 0.0 { 1e-4 * max } else { 1.0 };
            for (i, d) in diag.iter_mut().enumerate() {
                if class(i) {
                    *d += floor;
                }
            }
        }
        Ok(diag)
    }

    fn minimize(
        &self,
        name: &'static str,
        x: &mut [f64],
        active: &[usize],
        iters: usize,
    ) -> Result<StageReport> {
        let (mut terms, grad) = self.evaluate(x)?;
        let initial = terms;
        let mut history = vec![terms.total];
        let mut iterations = 0;
        if iters == 0 || active.is_empty() {
            return Ok(StageReport {
                name,
                iterations,
                initial,
                last: terms,
                history,
            });
        }
        let diag = self.diagonal(x)?;
        // Work in scaled coordinates u with x = x0 + scale ⊙ u.
        let scale: Vec<f64> = active.iter().map(|&i| 1.0 / diag[i].sqrt()).collect();
        let project =
            |g: &[f64]| -> Vec<f64> { active.iter().zip(&scale).map(|(&i, s)| g[i] * s).collect() };
        let mut g = project(&grad);
        let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

        while iterations < iters {
            let mut dir = lbfgs_direction(&g, &memory);
            if dot(&dir, &g) >= 0.0 {
                memory.clear();
                dir = g.iter().map(|v| -v).collect();
            }
            let slope = dot(&dir, &g);
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut trial = x.to_vec();
                for ((&i, s), d) in active.iter().zip(&scale).zip(&dir) {
                    trial[i] += step * s * d;
                }
                let (tt, tg) = self.evaluate(&trial)?;
                if tt.total.is_finite() && tt.total <= terms.total + 1e-4 * step * slope {
                    accepted = Some((trial, tt, tg));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, tt, tg)) = accepted else {
                if memory.is_empty() {
                    break;
                }
                memory.clear();
                continue;
            };
            iterations += 1;
            let new_g = project(&tg);
            let s_vec: Vec<f64> = dir.iter().map(|d| d * step).collect();
            let y_vec: Vec<f64> = new_g.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s_vec, &y_vec);
            if sy > 1e-300 {
                memory.push_back((s_vec, y_vec, 1.0 / sy));
                if memory.len() > self.cfg.history {
                    memory.pop_front();
                }
            }
            let decrease = terms.total - tt.total;
            x.copy_from_slice(&trial);
            terms = tt;
            g = new_g;
            history.push(terms.total);
            if decrease <= self.cfg.tolerance * terms.total.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        log::debug!(
            "{name}: {iterations} iterations, loss {:.6e} -> {:.6e}",
            initial.total,
            terms.total
        );
        Ok(StageReport {
            name,
            iterations,
            initial,
            last: terms,
            history,
        })
    }
}

fn lbfgs_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
