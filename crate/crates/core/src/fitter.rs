//! Per-image parameter recovery by bias-corrected moment-based first-order descent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::body_model::{BodyModel, FullParams};
use crate::dense::UvAtlas;
use crate::error::{Error, Result};
use crate::objectives::{AnnotationBundle, LossBreakdown, LossWeights, Objective};

/// Smallest focal length the optimizer may reach.
const MIN_FOCAL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitConfig {
    pub max_iters: usize,
    pub step_size: f64,
    /// Step size at `max_iters` relative to `step_size`; decays geometrically.
    pub final_step_ratio: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Stop once the mean loss over the last `window` iterations improves on the window before
    /// by less than this fraction.
    pub tolerance: f64,
    pub window: usize,
    /// Fraction of `max_iters` over which the image terms ramp up from zero.
    pub image_warmup: f64,
    /// Optimize only the camera and global rotation for the first tenth of the iterations.
    pub staged: bool,
    /// `None` picks the balance weights from the sources present in the annotation.
    pub weights: Option<LossWeights>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_size: 3e-2,
            final_step_ratio: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            tolerance: 1e-6,
            window: 10,
            staged: false,
            image_warmup: 0.5,
            weights: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("fit: {m}")));
        if self.max_iters == 0 {
            return fail("max_iters must be positive");
        }
        if !(self.step_size > 0.0) || !(self.final_step_ratio > 0.0) {
            return fail("step sizes must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.beta1 <= 0.0 || self.beta2 <= 0.0 {
            return fail("moment decay rates must lie in (0, 1)");
        }
        if !(self.tolerance > 0.0) {
            return fail("tolerance must be positive");
        }
        if self.window == 0 {
            return fail("window must be positive");
        }
        if !(0.0..=0.5).contains(&self.image_warmup) {
            return fail("image_warmup must lie in [0, 0.5]");
        }
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }

}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    /// Best parameters seen.
    pub params: FullParams,
    /// Best total loss so far: the initial value, then one entry per iteration.
    pub loss_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Breakdown at `params`.
    pub breakdown: LossBreakdown,
}

/// Mean parameters: T-pose, zero shape, unit camera.
pub fn init_mean_params(model: &BodyModel) -> FullParams {
    FullParams::zeros(model.joint_count(), model.shape_dim())
}

fn checked(b: LossBreakdown, iteration: usize) -> Result<LossBreakdown> {
    match b.non_finite_term() {
        Some(term) => Err(Error::NonFinite { term, iteration }),
        None => Ok(b),
    }
}

/// Fits model parameters to one annotation bundle by minimizing the weighted total loss.
pub fn fit(
    model: &BodyModel,
    atlas: &UvAtlas,
    ann: &AnnotationBundle,
    cfg: &FitConfig,
    init: Option<FullParams>,
) -> Result<FitResult> {
    cfg.validate()?;
    let weights = cfg.weights.unwrap_or_else(|| LossWeights::for_bundle(ann));
    let objective = Objective::new(model, atlas, ann, weights)?;
    let start = init.unwrap_or_else(|| init_mean_params(model));
    start.validate_for(model)?;

    let (nk, nb) = (model.joint_count(), model.shape_dim());
    let dim = start.dim();
    let focal_index = start.camera_offset();
    let stage_len = if cfg.staged { cfg.max_iters.div_ceil(10) } else { 0 };
    let in_first_stage = |i: usize| i < 3 || i >= focal_index;

    // Ramping the image terms in lets the 3D terms set the limb orientations before the
    // reprojection terms can pull them into a flipped local minimum. Without 3D terms a
    // uniform rescale changes nothing, so the ramp is skipped.
    let has_3d = weights.lambda_3d > 0.0 && (ann.gt_params.is_some() || ann.gt_joints3d.is_some());
    let warmup_len = if has_3d { cfg.image_warmup * cfg.max_iters as f64 } else { 0.0 };
    let evaluate = |p: &FullParams, t: usize| -> Result<LossBreakdown> {
        let alpha = if warmup_len > 0.0 { (t as f64 / warmup_len).min(1.0) } else { 1.0 };
        if alpha >= 1.0 {
            return objective.evaluate(p);
        }
        let ramped = LossWeights { lambda_2d: alpha * weights.lambda_2d, lambda_dense: alpha * weights.lambda_dense, ..weights };
        let mut b = objective.evaluate_with(p, &ramped)?;
        b.total = weights.lambda_3d * (b.l3d_joints + b.l_smpl) + weights.lambda_2d * b.l2d + weights.lambda_dense * b.l_dense;
        Ok(b)
    };

    let mut x = start.to_vec();
    let mut current = checked(evaluate(&start, 0)?, 0)?;
    let mut best = (current.total, start, current.clone());
    let mut trace = vec![current.total];
    let mut raw = vec![current.total];
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut converged = false;
    let mut iterations = 0;
    let decay = libm::pow(cfg.final_step_ratio, 1.0 / cfg.max_iters as f64);
    let mut lr = cfg.step_size;

    for t in 1..=cfg.max_iters {
        let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
        for i in 0..dim {
            let g = if t <= stage_len && !in_first_stage(i) { 0.0 } else { current.gradient[i] };
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            x[i] -= lr * (m[i] / bc1) / (libm::sqrt(v[i] / bc2) + cfg.epsilon);
        }
        x[focal_index] = x[focal_index].max(MIN_FOCAL);
        lr *= decay;

        let params = FullParams::from_slice(nk, nb, &x)?;
        current = checked(evaluate(&params, t)?, t)?;
        if current.total < best.0 {
            best = (current.total, params, current.clone());
        }
        trace.push(best.0);
        raw.push(current.total);
        iterations = t;

        if best.0 == 0.0 {
            converged = true;
            break;
        }
        // L1 terms make the raw loss noisy while the step is large, so the test compares window
        // means and only runs in the second half of the schedule.
        if 2 * t >= cfg.max_iters && t >= 2 * cfg.window {
            let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
            let before = mean(&raw[t + 1 - 2 * cfg.window..t + 1 - cfg.window]);
            let after = mean(&raw[t + 1 - cfg.window..]);
            if before - after < cfg.tolerance * before.abs() {
                converged = true;
                break;
            }
        }
    }

    // The stored gradient may come from ramped weights; report the full objective.
    let breakdown = if warmup_len > 0.0 { objective.evaluate(&best.1)? } else { best.2 };
    Ok(FitResult { params: best.1, loss_trace: trace, iterations_used: iterations, converged, breakdown })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{project_point, CameraParams, ImageFrame};
    use crate::dense::{rasterize_iuv, sample_dense_keypoints};
    use crate::math;
    use crate::mini::make_mini_model;
    use crate::objectives::{evaluate_metrics, GroundTruthParams, SparseKeypointSet};
    use crate::rotation::rodrigues;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene(model: &BodyModel, seed: u64) -> (FullParams, AnnotationBundle) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gt = FullParams::zeros(12, 4);
        for w in gt.pose.iter_mut() {
            *w = [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
        }
        for b in gt.shape.iter_mut() {
            *b = rng.random_range(-1.5..1.5);
        }
        gt.camera = CameraParams::new(rng.random_range(0.8..1.2), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let frame = ImageFrame::default();
        let mesh = model.pose_mesh(&gt).unwrap();
        let positions = mesh.joints3d.iter().map(|&j| project_point(j, &gt.camera, &frame)).collect();
        let dense = sample_dense_keypoints(&rasterize_iuv(model, &mesh, &gt.camera, &frame), 120, seed);
        let ann = AnnotationBundle {
            gt_params: Some(GroundTruthParams { pose: gt.pose.clone(), shape: gt.shape.clone() }),
            gt_joints3d: Some(mesh.joints3d.clone()),
            sparse2d: Some(SparseKeypointSet { positions, visible: vec![true; 12], ids: (0..12).collect() }),
            dense: Some(dense),
            frame,
        };
        (gt, ann)
    }

    #[test]
    fn mean_params_are_the_t_pose() {
        let model = make_mini_model(0);
        let p = init_mean_params(&model);
        assert_eq!(p.dim(), 43);
        assert_eq!(p.camera, CameraParams::new(1.0, 0.0, 0.0));
        let mesh = model.pose_mesh(&p).unwrap();
        for (a, b) in mesh.vertices.iter().zip(model.template()) {
            assert!(math::norm(math::sub(*a, *b)) < 1e-14);
        }
    }

    #[test]
    fn single_iteration_takes_one_step() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (_, ann) = scene(&model, 1);
        let cfg = FitConfig { max_iters: 1, ..FitConfig::default() };
        let r = fit(&model, &atlas, &ann, &cfg, None).unwrap();
        assert_eq!(r.loss_trace.len(), 2);
        assert_eq!(r.iterations_used, 1);
        assert!(r.loss_trace[1] <= r.loss_trace[0]);
    }

    #[test]
    fn full_supervision_recovers_ground_truth() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (gt, ann) = scene(&model, 2);
        let r = fit(&model, &atlas, &ann, &FitConfig::default(), None).unwrap();
        let m = evaluate_metrics(&model, &r.params, &gt, &atlas, &ann.frame).unwrap();
        assert!(m.pve < 1e-2, "pve {}", m.pve);
        assert!(r.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.iterations_used <= 2000);
    }

    #[test]
    fn parameter_supervision_recovers_rotations() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (gt, full) = scene(&model, 3);
        let ann = AnnotationBundle { gt_joints3d: None, sparse2d: None, dense: None, ..full };
        let r = fit(&model, &atlas, &ann, &FitConfig::default(), None).unwrap();
        for (w, w_gt) in r.params.pose.iter().zip(&gt.pose) {
            let d = math::frob_norm(&math::mat_sub(&rodrigues(*w), &rodrigues(*w_gt)));
            assert!(d < 1e-3, "rotation distance {d}");
        }
    }

    #[test]
    fn deterministic() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (_, ann) = scene(&model, 4);
        let cfg = FitConfig { max_iters: 200, ..FitConfig::default() };
        let a = fit(&model, &atlas, &ann, &cfg, None).unwrap();
        let b = fit(&model, &atlas, &ann, &cfg, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn staged_schedule_freezes_body_parameters_first() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (_, full) = scene(&model, 5);
        let ann = AnnotationBundle { gt_params: None, gt_joints3d: None, dense: None, ..full };
        let cfg = FitConfig { max_iters: 1, staged: true, ..FitConfig::default() };
        let r = fit(&model, &atlas, &ann, &cfg, None).unwrap();
        let x = r.params.to_vec();
        assert!(x[3..r.params.camera_offset()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_invalid_config() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (_, ann) = scene(&model, 6);
        for cfg in [
            FitConfig { max_iters: 0, ..FitConfig::default() },
            FitConfig { tolerance: 0.0, ..FitConfig::default() },
            FitConfig { beta1: 1.0, ..FitConfig::default() },
            FitConfig { image_warmup: 0.75, ..FitConfig::default() },
        ] {
            assert!(matches!(fit(&model, &atlas, &ann, &cfg, None), Err(Error::Config(_))));
        }
    }

    #[test]
    fn non_finite_loss_names_the_term() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let (_, mut ann) = scene(&model, 7);
        ann.sparse2d.as_mut().unwrap().positions[0] = [f64::NAN, 1.0];
        let err = fit(&model, &atlas, &ann, &FitConfig::default(), None).unwrap_err();
        assert_eq!(err, Error::NonFinite { term: "l2d", iteration: 0 });
    }
}
