use alloc::vec::Vec;

use super::losses::{reproject, resolve_anchors};
use crate::body_model::{BodyModel, FullParams};
use crate::camera::ImageFrame;
use crate::dense::{rasterize_iuv, sample_dense_keypoints, UvAtlas};
use crate::error::{invariant, Result};
use crate::math::{self, Vec3};

/// Pose used for the shape-only vertex error.
pub const PVE_T_POSE: Vec3 = [0.0; 3];

/// Mean errors of one fit against ground truth. Vertex and joint errors are in model
/// units; the dense keypoint distance is in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub pve: f64,
    pub mpjpe: f64,
    pub pve_t: f64,
    pub dkd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricOptions {
    /// Subtract each mesh's root joint before comparing vertices and joints.
    pub root_align: bool,
    /// Size and seed of the fixed dense sample used for the keypoint distance.
    pub dkd_samples: usize,
    pub dkd_seed: u64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { root_align: true, dkd_samples: 200, dkd_seed: 0 }
    }
}

fn mean_distance(a: &[Vec3], b: &[Vec3], a_origin: Vec3, b_origin: Vec3) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| math::norm(math::sub(math::sub(*x, a_origin), math::sub(*y, b_origin)))).sum();
    sum / a.len() as f64
}

pub fn evaluate_metrics(
    model: &BodyModel,
    pred: &FullParams,
    gt: &FullParams,
    atlas: &UvAtlas,
    frame: &ImageFrame,
) -> Result<MetricReport> {
    evaluate_metrics_with(model, pred, gt, atlas, frame, &MetricOptions::default())
}

/// PVE, MPJPE, PVE-T and DKD of `pred` against `gt`.
///
/// DKD samples a fixed set of visible surface points from the ground-truth render and
/// compares their projections under both parameter sets (mean L1 per keypoint).
pub fn evaluate_metrics_with(
    model: &BodyModel,
    pred: &FullParams,
    gt: &FullParams,
    atlas: &UvAtlas,
    frame: &ImageFrame,
    opts: &MetricOptions,
) -> Result<MetricReport> {
    pred.validate_for(model)?;
    gt.validate_for(model)?;
    if atlas.face_count() != model.faces().len() {
        return Err(invariant("atlas", "atlas was built for a different model"));
    }
    let pm = model.pose_mesh(pred)?;
    let gm = model.pose_mesh(gt)?;
    let (po, go) = if opts.root_align { (pm.joints3d[0], gm.joints3d[0]) } else { ([0.0; 3], [0.0; 3]) };
    let pve = mean_distance(&pm.vertices, &gm.vertices, po, go);
    let mpjpe = mean_distance(&pm.joints3d, &gm.joints3d, po, go);

    let pt = model.pose_mesh(&FullParams { pose: alloc::vec![PVE_T_POSE; model.joint_count()], ..pred.clone() })?;
    let gtt = model.pose_mesh(&FullParams { pose: alloc::vec![PVE_T_POSE; model.joint_count()], ..gt.clone() })?;
    let pve_t = mean_distance(&pt.vertices, &gtt.vertices, [0.0; 3], [0.0; 3]);

    let sample = sample_dense_keypoints(&rasterize_iuv(model, &gm, &gt.camera, frame), opts.dkd_samples, opts.dkd_seed);
    let anchors = resolve_anchors(atlas, &sample)?;
    let dkd = if anchors.is_empty() {
        0.0
    } else {
        let dists: Vec<f64> = anchors
            .iter()
            .map(|a| {
                let x = reproject(&gm, &gt.camera, frame, &a.anchor);
                let y = reproject(&pm, &pred.camera, frame, &a.anchor);
                (x[0] - y[0]).abs() + (x[1] - y[1]).abs()
            })
            .collect();
        dists.iter().sum::<f64>() / dists.len() as f64
    };
    Ok(MetricReport { pve, mpjpe, pve_t, dkd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mini::make_mini_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng) -> FullParams {
        let mut p = FullParams::zeros(12, 4);
        for w in p.pose.iter_mut() {
            *w = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        }
        for b in p.shape.iter_mut() {
            *b = rng.random_range(-2.0..2.0);
        }
        p.camera.focal = rng.random_range(0.8..1.2);
        p
    }

    #[test]
    fn identical_parameters_score_zero() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let p = random_params(&mut rng);
            let m = evaluate_metrics(&model, &p, &p, &atlas, &ImageFrame::default()).unwrap();
            assert_eq!(m, MetricReport::default());
        }
    }

    #[test]
    fn pose_only_difference_leaves_pve_t_at_zero() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_params(&mut rng);
        let mut pred = random_params(&mut rng);
        pred.shape = gt.shape.clone();
        let m = evaluate_metrics(&model, &pred, &gt, &atlas, &ImageFrame::default()).unwrap();
        assert_eq!(m.pve_t, 0.0);
        assert!(m.pve > 0.0 && m.mpjpe > 0.0 && m.dkd > 0.0);
    }

    #[test]
    fn unit_shape_offset_gives_mean_direction_norm() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gt = random_params(&mut rng);
        let mut pred = gt.clone();
        pred.shape[0] += 1.0;
        let m = evaluate_metrics(&model, &pred, &gt, &atlas, &ImageFrame::default()).unwrap();
        let expected: f64 =
            (0..model.vertex_count()).map(|v| math::norm(model.shape_dir(v, 0))).sum::<f64>() / model.vertex_count() as f64;
        assert!((m.pve_t - expected).abs() < 1e-12);
    }

    #[test]
    fn root_alignment_removes_a_common_offset() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let gt = FullParams::zeros(12, 4);
        let aligned = evaluate_metrics(&model, &gt, &gt, &atlas, &ImageFrame::default()).unwrap();
        assert_eq!(aligned.pve, 0.0);
        let opts = MetricOptions { root_align: false, ..MetricOptions::default() };
        let mut pred = gt.clone();
        pred.shape[0] = 1.0;
        let raw = evaluate_metrics_with(&model, &pred, &gt, &atlas, &ImageFrame::default(), &opts).unwrap();
        assert!(raw.pve > 0.0);
        assert!((raw.pve - raw.pve_t).abs() < 1e-12);
    }
}
