//! Synthetic scenes: sampled ground truth and the annotations rendered from it.

use std::f64::consts::FRAC_PI_4;

use densefit_core::{
    project_point, rasterize_iuv, sample_dense_keypoints, AnnotationBundle, BodyModel, CameraParams, Error,
    FullParams, GroundTruthParams, ImageFrame, IuvMap, SparseKeypointSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

const MAX_ATTEMPTS: usize = 10;

/// Sampling ranges for synthetic ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Half-width of the uniform per-axis range of non-root joint rotations, radians.
    pub pose_range: f64,
    pub root_range: f64,
    /// Standard normal shape coefficients are clipped to this magnitude.
    pub shape_clip: f64,
    pub focal_range: [f64; 2],
    pub translation_range: f64,
    pub dense_count: [usize; 2],
    pub frame: ImageFrame,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            pose_range: 0.4,
            root_range: FRAC_PI_4,
            shape_clip: 2.0,
            focal_range: [0.8, 1.2],
            translation_range: 0.1,
            dense_count: [100, 150],
            frame: ImageFrame::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub seed: u64,
    pub gt_params: FullParams,
    /// Every source: parameters, 3D joints, projected joints and dense keypoints.
    pub annotations: AnnotationBundle,
    pub frame: ImageFrame,
}

fn sample_params(model: &BodyModel, cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> FullParams {
    let mut p = FullParams::zeros(model.joint_count(), model.shape_dim());
    for (k, w) in p.pose.iter_mut().enumerate() {
        let r = if k == 0 { cfg.root_range } else { cfg.pose_range };
        *w = [rng.random_range(-r..=r), rng.random_range(-r..=r), rng.random_range(-r..=r)];
    }
    for b in p.shape.iter_mut() {
        *b = rng.sample::<f64, _>(StandardNormal).clamp(-cfg.shape_clip, cfg.shape_clip);
    }
    let t = cfg.translation_range;
    p.camera = CameraParams::new(
        rng.random_range(cfg.focal_range[0]..=cfg.focal_range[1]),
        rng.random_range(-t..=t),
        rng.random_range(-t..=t),
    );
    p
}

/// Samples ground truth from `seed` and renders its annotations.
///
/// A draw whose render has fewer foreground pixels than the requested dense count is
/// redrawn, up to ten times.
pub fn generate_scene(model: &BodyModel, seed: u64, cfg: &SceneConfig) -> Result<SyntheticScene, Error> {
    cfg.frame.validate()?;
    if cfg.dense_count[0] > cfg.dense_count[1] {
        return Err(Error::Config("scene: dense_count range is reversed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = cfg.frame;
    for _ in 0..MAX_ATTEMPTS {
        let gt = sample_params(model, cfg, &mut rng);
        let n_dense = rng.random_range(cfg.dense_count[0]..=cfg.dense_count[1]);
        let dense_seed: u64 = rng.random();
        let mesh = model.pose_mesh(&gt)?;
        let map = rasterize_iuv(model, &mesh, &gt.camera, &frame);
        if map.foreground_count() == 0 || map.foreground_count() < n_dense {
            continue;
        }
        let positions: Vec<_> = mesh.joints3d.iter().map(|&j| project_point(j, &gt.camera, &frame)).collect();
        let visible = positions.iter().map(|&p| frame.contains(p)).collect();
        let annotations = AnnotationBundle {
            gt_params: Some(GroundTruthParams { pose: gt.pose.clone(), shape: gt.shape.clone() }),
            gt_joints3d: Some(mesh.joints3d),
            sparse2d: Some(SparseKeypointSet { positions, visible, ids: (0..model.joint_count()).collect() }),
            dense: Some(sample_dense_keypoints(&map, n_dense, dense_seed)),
            frame,
        };
        return Ok(SyntheticScene { seed, gt_params: gt, annotations, frame });
    }
    Err(Error::Invariant { field: "scene", message: format!("seed {seed}: no usable render in {MAX_ATTEMPTS} draws") })
}

/// The ground-truth IUV render of a scene.
pub fn render_scene(model: &BodyModel, scene: &SyntheticScene) -> Result<IuvMap, Error> {
    let mesh = model.pose_mesh(&scene.gt_params)?;
    Ok(rasterize_iuv(model, &mesh, &scene.gt_params.camera, &scene.frame))
}
