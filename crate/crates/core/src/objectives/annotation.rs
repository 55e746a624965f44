use alloc::vec::Vec;

use crate::camera::{ImageFrame, Point2};
use crate::dense::DenseKeypoint;
use crate::error::{check_len, invariant, Error, Result};
use crate::math::Vec3;

/// Sparse 2D keypoints in pixels with per-keypoint visibility.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparseKeypointSet {
    pub positions: Vec<Point2>,
    pub visible: Vec<bool>,
    pub ids: Vec<usize>,
}

impl SparseKeypointSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("sparse2d.visible", self.positions.len(), self.visible.len())?;
        check_len("sparse2d.ids", self.positions.len(), self.ids.len())
    }
}

/// Ground-truth pose and shape.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruthParams {
    pub pose: Vec<Vec3>,
    pub shape: Vec<f64>,
}

/// Every supervision source available for one image; absent sources contribute nothing.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnotationBundle {
    #[cfg_attr(feature = "serde", serde(default))]
    pub gt_params: Option<GroundTruthParams>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub gt_joints3d: Option<Vec<Vec3>>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub sparse2d: Option<SparseKeypointSet>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub dense: Option<Vec<DenseKeypoint>>,
    pub frame: ImageFrame,
}

impl AnnotationBundle {
    pub fn empty(frame: ImageFrame) -> Self {
        Self { gt_params: None, gt_joints3d: None, sparse2d: None, dense: None, frame }
    }

    pub fn has_3d(&self) -> bool {
        self.gt_params.is_some() || self.gt_joints3d.is_some()
    }

    pub fn has_2d(&self) -> bool {
        self.sparse2d.is_some()
    }

    /// An empty dense list counts as absent.
    pub fn has_dense(&self) -> bool {
        self.dense.as_ref().is_some_and(|d| !d.is_empty())
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if !(self.has_3d() || self.has_2d() || self.has_dense()) {
            return Err(Error::NoSupervision);
        }
        if let Some(s) = &self.sparse2d {
            s.validate()?;
        }
        Ok(())
    }

    /// Checks annotation dimensions against a model.
    pub fn validate_for(&self, joint_count: usize, shape_dim: usize, part_count: usize) -> Result<()> {
        self.validate()?;
        if let Some(gt) = &self.gt_params {
            check_len("gt_params.pose", joint_count, gt.pose.len())?;
            check_len("gt_params.shape", shape_dim, gt.shape.len())?;
        }
        if let Some(j) = &self.gt_joints3d {
            check_len("gt_joints3d", joint_count, j.len())?;
        }
        if let Some(s) = &self.sparse2d {
            check_len("sparse2d", joint_count, s.len())?;
        }
        if let Some(d) = &self.dense {
            if d.iter().any(|k| k.part == 0 || k.part as usize > part_count) {
                return Err(invariant("dense", "keypoint part id outside the model's parts"));
            }
        }
        Ok(())
    }
}

/// Balance weights of the three loss groups and the pose/shape toggles of the parameter loss.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub lambda_3d: f64,
    pub lambda_2d: f64,
    pub lambda_dense: f64,
    pub use_pose: bool,
    pub use_shape: bool,
}

impl LossWeights {
    pub const fn new(lambda_3d: f64, lambda_2d: f64, lambda_dense: f64) -> Self {
        Self { lambda_3d, lambda_2d, lambda_dense, use_pose: true, use_shape: true }
    }

    /// `(10, 1, 10)` when all three groups are supervised, `10` for every group otherwise.
    pub fn for_sources(has_3d: bool, has_2d: bool, has_dense: bool) -> Self {
        if has_3d && has_2d && has_dense {
            Self::new(10.0, 1.0, 10.0)
        } else {
            Self::new(10.0, 10.0, 10.0)
        }
    }

    pub fn for_bundle(ann: &AnnotationBundle) -> Self {
        Self::for_sources(ann.has_3d(), ann.has_2d(), ann.has_dense())
    }

    pub fn with_toggles(mut self, use_pose: bool, use_shape: bool) -> Self {
        self.use_pose = use_pose;
        self.use_shape = use_shape;
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.lambda_3d *= c;
        self.lambda_2d *= c;
        self.lambda_dense *= c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if ok(self.lambda_3d) && ok(self.lambda_2d) && ok(self.lambda_dense) {
            Ok(())
        } else {
            Err(invariant("weights", "balance weights must be finite and non-negative"))
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::new(10.0, 1.0, 10.0)
    }
}
