use alloc::vec;
use alloc::vec::Vec;

use super::annotation::{AnnotationBundle, LossWeights, SparseKeypointSet};
use crate::body_model::{BodyModel, FullParams, MeshInstance};
use crate::camera::{project_point, project_point_vjp, CameraParams, ImageFrame, Point2};
use crate::dense::{phi_lookup, DenseAnchor, DenseKeypoint, UvAtlas};
use crate::error::{check_len, Error, Result};
use crate::math::{self, Vec3};
use crate::rotation::{rodrigues, rodrigues_vjp};

/// Value and partial derivatives of the 3D loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Loss3d {
    pub joints: f64,
    /// Parameter term after the pose/shape toggles.
    pub smpl: f64,
    pub d_joints: Vec<Vec3>,
    pub d_pose: Vec<Vec3>,
    pub d_shape: Vec<f64>,
}

impl Loss3d {
    pub fn value(&self) -> f64 {
        self.joints + self.smpl
    }
}

/// Sum of Euclidean joint errors plus the rotation-matrix and shape distances to the
/// ground-truth parameters. Norm subgradients at zero are zero.
pub fn loss_3d(mesh: &MeshInstance, params: &FullParams, ann: &AnnotationBundle, weights: &LossWeights) -> Result<Loss3d> {
    if !ann.has_3d() {
        return Err(Error::Missing3d);
    }
    let nk = mesh.joints3d.len();
    let mut out = Loss3d {
        joints: 0.0,
        smpl: 0.0,
        d_joints: vec![[0.0; 3]; nk],
        d_pose: vec![[0.0; 3]; params.pose.len()],
        d_shape: vec![0.0; params.shape.len()],
    };
    if let Some(gt) = &ann.gt_joints3d {
        check_len("gt_joints3d", nk, gt.len())?;
        for ((j, g), d) in mesh.joints3d.iter().zip(gt).zip(out.d_joints.iter_mut()) {
            let r = math::sub(*j, *g);
            let n = math::norm(r);
            out.joints += n;
            if n > 0.0 {
                *d = math::scale(r, 1.0 / n);
            }
        }
    }
    if let Some(gt) = &ann.gt_params {
        if weights.use_pose {
            check_len("gt_params.pose", params.pose.len(), gt.pose.len())?;
            for ((w, w_gt), d) in params.pose.iter().zip(&gt.pose).zip(out.d_pose.iter_mut()) {
                let diff = math::mat_sub(&rodrigues(*w), &rodrigues(*w_gt));
                let n = math::frob_norm(&diff);
                out.smpl += n;
                if n > 0.0 {
                    let mut g = diff;
                    for row in g.iter_mut() {
                        for x in row.iter_mut() {
                            *x /= n;
                        }
                    }
                    *d = rodrigues_vjp(*w, &g);
                }
            }
        }
        if weights.use_shape {
            check_len("gt_params.shape", params.shape.len(), gt.shape.len())?;
            let n = libm::sqrt(params.shape.iter().zip(&gt.shape).map(|(a, b)| (a - b) * (a - b)).sum());
            out.smpl += n;
            if n > 0.0 {
                for ((d, a), b) in out.d_shape.iter_mut().zip(&params.shape).zip(&gt.shape) {
                    *d = (a - b) / n;
                }
            }
        }
    }
    Ok(out)
}

/// Visibility-masked L1 distance between predicted and annotated keypoints, in pixels.
///
/// Returns the value and `∂L/∂pred`; the subgradient at a zero residual is zero.
pub fn loss_2d(pred: &[Point2], ann: &SparseKeypointSet) -> Result<(f64, Vec<Point2>)> {
    ann.validate()?;
    check_len("sparse2d", ann.len(), pred.len())?;
    let mut value = 0.0;
    let mut grad = vec![[0.0; 2]; pred.len()];
    for i in 0..pred.len() {
        if !ann.visible[i] {
            continue;
        }
        let dx = pred[i][0] - ann.positions[i][0];
        let dy = pred[i][1] - ann.positions[i][1];
        value += dx.abs() + dy.abs();
        grad[i] = [math::sign0(dx), math::sign0(dy)];
    }
    Ok((value, grad))
}

/// A dense keypoint's image position with its resolved mesh anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoredKeypoint {
    pub target: Point2,
    pub anchor: DenseAnchor,
}

pub fn resolve_anchors(atlas: &UvAtlas, dense: &[DenseKeypoint]) -> Result<Vec<AnchoredKeypoint>> {
    dense
        .iter()
        .map(|k| Ok(AnchoredKeypoint { target: [k.x, k.y], anchor: phi_lookup(atlas, k.part, k.u, k.v)? }))
        .collect()
}

/// Predicted image position of an anchored surface point.
#[inline]
pub(crate) fn reproject(mesh: &MeshInstance, cam: &CameraParams, frame: &ImageFrame, a: &DenseAnchor) -> Point2 {
    let mut q = [0.0; 2];
    for (v, w) in a.vertices.iter().zip(a.weights) {
        let p = project_point(mesh.vertices[*v], cam, frame);
        q[0] += w * p[0];
        q[1] += w * p[1];
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLoss {
    pub value: f64,
    pub d_vertices: Vec<Vec3>,
    /// `∂L/∂(f, t_x, t_y)`.
    pub d_camera: [f64; 3],
}

/// Dense keypoint loss with anchors already resolved. Anchors are constants of the annotation.
pub fn loss_dense_anchored(
    mesh: &MeshInstance,
    cam: &CameraParams,
    frame: &ImageFrame,
    anchored: &[AnchoredKeypoint],
) -> Result<DenseLoss> {
    if anchored.is_empty() {
        return Err(Error::EmptyDense);
    }
    let mut out = DenseLoss { value: 0.0, d_vertices: vec![[0.0; 3]; mesh.vertices.len()], d_camera: [0.0; 3] };
    for k in anchored {
        let q = reproject(mesh, cam, frame, &k.anchor);
        let (dx, dy) = (q[0] - k.target[0], q[1] - k.target[1]);
        out.value += dx.abs() + dy.abs();
        let g = [math::sign0(dx), math::sign0(dy)];
        for (v, w) in k.anchor.vertices.iter().zip(k.anchor.weights) {
            let d = project_point_vjp(mesh.vertices[*v], cam, frame, [w * g[0], w * g[1]], &mut out.d_camera);
            math::add_assign(&mut out.d_vertices[*v], d);
        }
    }
    Ok(out)
}

/// Sum over dense keypoints of the L1 pixel distance between the annotated position and the
/// barycentric blend of the projected anchor vertices.
pub fn loss_dense(
    mesh: &MeshInstance,
    cam: &CameraParams,
    frame: &ImageFrame,
    atlas: &UvAtlas,
    dense: &[DenseKeypoint],
) -> Result<DenseLoss> {
    if dense.is_empty() {
        return Err(Error::EmptyDense);
    }
    loss_dense_anchored(mesh, cam, frame, &resolve_anchors(atlas, dense)?)
}

/// Per-term loss values and the gradient of the weighted total with respect to the flat
/// parameter vector (see [`FullParams::to_vec`]).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub l3d_joints: f64,
    pub l_smpl: f64,
    pub l2d: f64,
    pub l_dense: f64,
    pub total: f64,
    pub gradient: Vec<f64>,
}

impl LossBreakdown {
    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("l3d_joints", self.l3d_joints),
            ("l_smpl", self.l_smpl),
            ("l2d", self.l2d),
            ("l_dense", self.l_dense),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
        .or_else(|| self.gradient.iter().any(|g| !g.is_finite()).then_some("gradient"))
    }
}

/// The weighted objective for one annotation bundle, with dense anchors resolved once.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    model: &'a BodyModel,
    ann: &'a AnnotationBundle,
    anchors: Vec<AnchoredKeypoint>,
    weights: LossWeights,
}

impl<'a> Objective<'a> {
    pub fn new(model: &'a BodyModel, atlas: &UvAtlas, ann: &'a AnnotationBundle, weights: LossWeights) -> Result<Self> {
        ann.validate_for(model.joint_count(), model.shape_dim(), model.part_count())?;
        weights.validate()?;
        let anchors = match &ann.dense {
            Some(d) if !d.is_empty() => resolve_anchors(atlas, d)?,
            _ => Vec::new(),
        };
        Ok(Self { model, ann, anchors, weights })
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn model(&self) -> &BodyModel {
        self.model
    }

    /// Loss value only, from the flat parameter layout.
    pub fn value_flat(&self, x: &[f64]) -> Result<f64> {
        let params = FullParams::from_slice(self.model.joint_count(), self.model.shape_dim(), x)?;
        Ok(self.evaluate(&params)?.total)
    }

    pub fn evaluate(&self, params: &FullParams) -> Result<LossBreakdown> {
        self.evaluate_with(params, &self.weights)
    }

    /// Evaluates under other weights, reusing the resolved anchors.
    pub fn evaluate_with(&self, params: &FullParams, weights: &LossWeights) -> Result<LossBreakdown> {
        let (mesh, cache) = self.model.pose_mesh_with_cache(params)?;
        let frame = self.ann.frame;
        let cam = params.camera;
        let w = weights;
        let nk = self.model.joint_count();

        let mut d_vertices = vec![[0.0; 3]; self.model.vertex_count()];
        let mut d_joints = vec![[0.0; 3]; nk];
        let mut d_pose_direct = vec![[0.0; 3]; nk];
        let mut d_shape_direct = vec![0.0; self.model.shape_dim()];
        let mut d_cam = [0.0; 3];
        let mut out =
            LossBreakdown { l3d_joints: 0.0, l_smpl: 0.0, l2d: 0.0, l_dense: 0.0, total: 0.0, gradient: Vec::new() };

        if self.ann.has_3d() {
            let l = loss_3d(&mesh, params, self.ann, w)?;
            out.l3d_joints = l.joints;
            out.l_smpl = l.smpl;
            for (d, g) in d_joints.iter_mut().zip(&l.d_joints) {
                math::add_assign(d, math::scale(*g, w.lambda_3d));
            }
            for (d, g) in d_pose_direct.iter_mut().zip(&l.d_pose) {
                math::add_assign(d, math::scale(*g, w.lambda_3d));
            }
            for (d, g) in d_shape_direct.iter_mut().zip(&l.d_shape) {
                *d += w.lambda_3d * g;
            }
        }
        if let Some(sparse) = &self.ann.sparse2d {
            let pred: Vec<Point2> = mesh.joints3d.iter().map(|&j| project_point(j, &cam, &frame)).collect();
            let (value, grad) = loss_2d(&pred, sparse)?;
            out.l2d = value;
            for (k, g) in grad.iter().enumerate() {
                if *g == [0.0; 2] {
                    continue;
                }
                let scaled = [w.lambda_2d * g[0], w.lambda_2d * g[1]];
                let d = project_point_vjp(mesh.joints3d[k], &cam, &frame, scaled, &mut d_cam);
                math::add_assign(&mut d_joints[k], d);
            }
        }
        if !self.anchors.is_empty() {
            let l = loss_dense_anchored(&mesh, &cam, &frame, &self.anchors)?;
            out.l_dense = l.value;
            for (d, g) in d_vertices.iter_mut().zip(&l.d_vertices) {
                math::add_assign(d, math::scale(*g, w.lambda_dense));
            }
            for (d, g) in d_cam.iter_mut().zip(l.d_camera) {
                *d += w.lambda_dense * g;
            }
        }

        out.total = w.lambda_3d * (out.l3d_joints + out.l_smpl) + w.lambda_2d * out.l2d + w.lambda_dense * out.l_dense;

        let (d_pose, d_shape) = self.model.pose_mesh_vjp(params, &cache, &d_vertices, &d_joints);
        let mut gradient = Vec::with_capacity(params.dim());
        for (a, b) in d_pose.iter().zip(&d_pose_direct) {
            gradient.extend_from_slice(&math::add(*a, *b));
        }
        gradient.extend(d_shape.iter().zip(&d_shape_direct).map(|(a, b)| a + b));
        gradient.extend_from_slice(&d_cam);
        out.gradient = gradient;
        Ok(out)
    }
}

/// Weighted total `λ₁·L_3D + λ₂·L_2D + λ₃·L_dense` and its gradient; absent sources contribute zero.
pub fn total_loss_and_grad(
    model: &BodyModel,
    atlas: &UvAtlas,
    params: &FullParams,
    ann: &AnnotationBundle,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    Objective::new(model, atlas, ann, *weights)?.evaluate(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{rasterize_iuv, sample_dense_keypoints};
    use crate::mini::make_mini_model;
    use crate::objectives::{check_gradient, GroundTruthParams};
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, spread: f64) -> FullParams {
        let mut p = FullParams::zeros(12, 4);
        for w in p.pose.iter_mut() {
            *w = [rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
        }
        for b in p.shape.iter_mut() {
            *b = rng.random_range(-1.5..1.5);
        }
        p.camera = CameraParams::new(rng.random_range(0.8..1.2), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        p
    }

    /// Annotations offset from the prediction by at least 2 px (or 0.05 units) per coordinate,
    /// so no L1 or norm term sits near a kink.
    fn offset_annotations(model: &BodyModel, atlas: &UvAtlas, at: &FullParams, rng: &mut ChaCha8Rng) -> AnnotationBundle {
        let frame = ImageFrame::default();
        let mut off = |scale: f64| {
            let m = rng.random_range(1.0..5.0) * scale;
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        };
        let mesh = model.pose_mesh(at).unwrap();
        let joints3d = mesh.joints3d.iter().map(|j| [j[0] + off(0.05), j[1] + off(0.05), j[2] + off(0.05)]).collect();
        let positions = mesh
            .joints3d
            .iter()
            .map(|&j| {
                let p = project_point(j, &at.camera, &frame);
                [p[0] + off(2.0), p[1] + off(2.0)]
            })
            .collect();
        let map = rasterize_iuv(model, &mesh, &at.camera, &frame);
        let mut dense = sample_dense_keypoints(&map, 120, 3);
        for k in dense.iter_mut() {
            let q = reproject(&mesh, &at.camera, &frame, &phi_lookup(atlas, k.part, k.u, k.v).unwrap());
            k.x = q[0] + off(2.0);
            k.y = q[1] + off(2.0);
        }
        let mut gt = random_params(rng, 0.5);
        gt.camera = at.camera;
        AnnotationBundle {
            gt_params: Some(GroundTruthParams { pose: gt.pose, shape: gt.shape }),
            gt_joints3d: Some(joints3d),
            sparse2d: Some(SparseKeypointSet { positions, visible: vec![true; 12], ids: (0..12).collect() }),
            dense: Some(dense),
            frame,
        }
    }

    #[test]
    fn coincident_parameters_give_zero_3d_loss() {
        let model = make_mini_model(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_params(&mut rng, 0.5);
        let mesh = model.pose_mesh(&p).unwrap();
        let mut ann = AnnotationBundle::empty(ImageFrame::default());
        ann.gt_params = Some(GroundTruthParams { pose: p.pose.clone(), shape: p.shape.clone() });
        ann.gt_joints3d = Some(mesh.joints3d.clone());
        let l = loss_3d(&mesh, &p, &ann, &LossWeights::default()).unwrap();
        assert_eq!(l.value(), 0.0);
        assert!(l.d_pose.iter().all(|d| *d == [0.0; 3]));
    }

    #[test]
    fn half_turn_parameter_distance() {
        let mut model_params = FullParams::zeros(1, 1);
        model_params.shape[0] = 0.25;
        let mesh = MeshInstance { vertices: Vec::new(), joints3d: vec![[0.0; 3]] };
        let mut ann = AnnotationBundle::empty(ImageFrame::default());
        ann.gt_params = Some(GroundTruthParams { pose: vec![[PI, 0.0, 0.0]], shape: vec![0.25] });
        let l = loss_3d(&mesh, &model_params, &ann, &LossWeights::default()).unwrap();
        assert!((l.smpl - libm::sqrt(8.0)).abs() < 1e-12);
        assert_eq!(l.joints, 0.0);
    }

    #[test]
    fn toggles_gate_the_parameter_terms() {
        let mesh = MeshInstance { vertices: Vec::new(), joints3d: vec![[0.0; 3]] };
        let p = FullParams::zeros(1, 2);
        let mut ann = AnnotationBundle::empty(ImageFrame::default());
        ann.gt_params = Some(GroundTruthParams { pose: vec![[PI, 0.0, 0.0]], shape: vec![3.0, 4.0] });
        let both = loss_3d(&mesh, &p, &ann, &LossWeights::default()).unwrap().smpl;
        let pose = loss_3d(&mesh, &p, &ann, &LossWeights::default().with_toggles(true, false)).unwrap().smpl;
        let shape = loss_3d(&mesh, &p, &ann, &LossWeights::default().with_toggles(false, true)).unwrap().smpl;
        assert!((pose - libm::sqrt(8.0)).abs() < 1e-12);
        assert!((shape - 5.0).abs() < 1e-12);
        assert!((both - pose - shape).abs() < 1e-12);
    }

    #[test]
    fn missing_3d_source_is_an_error() {
        let mesh = MeshInstance { vertices: Vec::new(), joints3d: vec![[0.0; 3]] };
        let ann = AnnotationBundle::empty(ImageFrame::default());
        assert_eq!(loss_3d(&mesh, &FullParams::zeros(1, 0), &ann, &LossWeights::default()), Err(Error::Missing3d));
    }

    #[test]
    fn sparse_loss_arithmetic_and_mask() {
        let ann = SparseKeypointSet { positions: vec![[10.0, 10.0], [0.0, 0.0]], visible: vec![true, false], ids: vec![0, 1] };
        let (v, g) = loss_2d(&[[13.0, 14.0], [500.0, -20.0]], &ann).unwrap();
        assert_eq!(v, 7.0);
        assert_eq!(g, vec![[1.0, 1.0], [0.0, 0.0]]);
        let hidden = SparseKeypointSet { visible: vec![false, false], ..ann.clone() };
        assert_eq!(loss_2d(&[[1e3, 1e3], [-1e3, 4.0]], &hidden).unwrap().0, 0.0);
        assert!(matches!(loss_2d(&[[0.0; 2]], &ann), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dense_loss_on_a_single_vertex_anchor() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let p = FullParams::zeros(12, 4);
        let mesh = model.pose_mesh(&p).unwrap();
        let frame = ImageFrame::default();
        let v = 40;
        let iuv = model.vertex_iuv()[v];
        let target = project_point(mesh.vertices[v], &p.camera, &frame);
        let kp = DenseKeypoint { x: target[0] + 2.0, y: target[1] - 5.0, part: iuv.part, u: iuv.u, v: iuv.v };
        let l = loss_dense(&mesh, &p.camera, &frame, &atlas, &[kp]).unwrap();
        assert!((l.value - 7.0).abs() < 1e-6);
        assert!(matches!(loss_dense(&mesh, &p.camera, &frame, &atlas, &[]), Err(Error::EmptyDense)));
    }

    #[test]
    fn dense_loss_of_rendered_keypoints_is_quantization_only() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_params(&mut rng, 0.3);
        let frame = ImageFrame::default();
        let mesh = model.pose_mesh(&p).unwrap();
        let dense = sample_dense_keypoints(&rasterize_iuv(&model, &mesh, &p.camera, &frame), 150, 2);
        let l = loss_dense(&mesh, &p.camera, &frame, &atlas, &dense).unwrap();
        assert!(l.value <= 1.0 * dense.len() as f64, "{} over {} keypoints", l.value, dense.len());
    }

    #[test]
    fn breakdown_combines_terms_with_weights() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let at = random_params(&mut rng, 0.3);
        let ann = offset_annotations(&model, &atlas, &at, &mut rng);
        let p = random_params(&mut rng, 0.3);
        let w = LossWeights::new(10.0, 1.0, 10.0);
        let b = total_loss_and_grad(&model, &atlas, &p, &ann, &w).unwrap();
        let expected = 10.0 * (b.l3d_joints + b.l_smpl) + b.l2d + 10.0 * b.l_dense;
        assert!((b.total - expected).abs() <= 1e-10 * b.total.max(1.0));

        let only2d = AnnotationBundle { gt_params: None, gt_joints3d: None, dense: None, ..ann.clone() };
        let b2 = total_loss_and_grad(&model, &atlas, &p, &only2d, &LossWeights::for_bundle(&only2d)).unwrap();
        assert_eq!((b2.l3d_joints, b2.l_smpl, b2.l_dense), (0.0, 0.0, 0.0));
        assert_eq!(b2.total, 10.0 * b2.l2d);
    }

    #[test]
    fn scaling_weights_scales_value_and_gradient() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let at = random_params(&mut rng, 0.3);
        let ann = offset_annotations(&model, &atlas, &at, &mut rng);
        let p = random_params(&mut rng, 0.3);
        let w = LossWeights::default();
        let a = total_loss_and_grad(&model, &atlas, &p, &ann, &w).unwrap();
        let b = total_loss_and_grad(&model, &atlas, &p, &ann, &w.scaled(4.0)).unwrap();
        assert!((b.total - 4.0 * a.total).abs() <= 1e-12 * b.total);
        for (x, y) in a.gradient.iter().zip(&b.gradient) {
            assert!((y - 4.0 * x).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = make_mini_model(2);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let p = random_params(&mut rng, 0.5);
            let ann = offset_annotations(&model, &atlas, &p, &mut rng);
            let obj = Objective::new(&model, &atlas, &ann, LossWeights::default()).unwrap();
            let analytic = obj.evaluate(&p).unwrap().gradient;
            let check = check_gradient(|x| obj.value_flat(x).unwrap(), &p.to_vec(), &analytic, 1e-5);
            assert!(check.kinks.is_empty(), "unexpected kinks {:?}", check.kinks);
            assert!(check.max_rel_error < 1e-4, "{check:?}");
        }
    }

    #[test]
    fn per_term_gradients_match_finite_differences() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p = random_params(&mut rng, 0.5);
        let full = offset_annotations(&model, &atlas, &p, &mut rng);
        let parts = [
            AnnotationBundle { gt_joints3d: None, sparse2d: None, dense: None, ..full.clone() },
            AnnotationBundle { gt_params: None, sparse2d: None, dense: None, ..full.clone() },
            AnnotationBundle { gt_params: None, gt_joints3d: None, dense: None, ..full.clone() },
            AnnotationBundle { gt_params: None, gt_joints3d: None, sparse2d: None, ..full.clone() },
        ];
        for ann in &parts {
            let obj = Objective::new(&model, &atlas, ann, LossWeights::new(1.0, 1.0, 1.0)).unwrap();
            let analytic = obj.evaluate(&p).unwrap().gradient;
            let check = check_gradient(|x| obj.value_flat(x).unwrap(), &p.to_vec(), &analytic, 1e-5);
            assert!(check.max_rel_error < 1e-4, "{check:?}");
        }
    }

    #[test]
    fn single_vertex_anchors_reduce_to_keypoint_l1() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let p = random_params(&mut rng, 0.4);
        let mesh = model.pose_mesh(&p).unwrap();
        let frame = ImageFrame::default();
        let verts: Vec<usize> = (0..30).map(|i| i * 17).collect();
        let targets: Vec<Point2> = verts.iter().map(|_| [rng.random_range(0.0..224.0), rng.random_range(0.0..224.0)]).collect();
        let dense: Vec<DenseKeypoint> = verts
            .iter()
            .zip(&targets)
            .map(|(&v, t)| {
                let iuv = model.vertex_iuv()[v];
                DenseKeypoint { x: t[0], y: t[1], part: iuv.part, u: iuv.u, v: iuv.v }
            })
            .collect();
        let direct: f64 = verts
            .iter()
            .zip(&targets)
            .map(|(&v, t)| {
                let q = project_point(mesh.vertices[v], &p.camera, &frame);
                (q[0] - t[0]).abs() + (q[1] - t[1]).abs()
            })
            .sum();
        let l = loss_dense(&mesh, &p.camera, &frame, &atlas, &dense).unwrap();
        assert!((l.value - direct).abs() < 1e-6 * direct);
    }

    #[test]
    fn ground_truth_is_a_fixed_point_up_to_rasterization() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let gt = random_params(&mut rng, 0.3);
        let frame = ImageFrame::default();
        let mesh = model.pose_mesh(&gt).unwrap();
        let dense = sample_dense_keypoints(&rasterize_iuv(&model, &mesh, &gt.camera, &frame), 120, 9);
        let positions = mesh.joints3d.iter().map(|&j| project_point(j, &gt.camera, &frame)).collect();
        let ann = AnnotationBundle {
            gt_params: Some(GroundTruthParams { pose: gt.pose.clone(), shape: gt.shape.clone() }),
            gt_joints3d: Some(mesh.joints3d.clone()),
            sparse2d: Some(SparseKeypointSet { positions, visible: vec![true; 12], ids: (0..12).collect() }),
            dense: Some(dense.clone()),
            frame,
        };
        let w = LossWeights::default();
        let b = total_loss_and_grad(&model, &atlas, &gt, &ann, &w).unwrap();
        assert!(b.total - w.lambda_dense * b.l_dense < 1e-6);
        assert!(b.l_dense <= dense.len() as f64);
    }
}
