//! Recovery of body-model pose, shape and camera from sparse keypoints, dense surface
//! correspondences and 3D supervision by direct gradient-based fitting.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line and the
//! experiment harness live in the `densefit` crate.
#![no_std]
extern crate alloc;

pub mod body_model;
pub mod camera;
pub mod dense;
pub mod error;
pub mod fitter;
pub mod math;
pub mod mini;
pub mod objectives;
pub mod rotation;

pub use body_model::{BodyModel, BodyModelData, FullParams, Kinematics, MeshInstance, VertexIuv};
pub use camera::{project, project_point, CameraParams, ImageFrame, Point2};
pub use dense::{
    add_uv_noise, dropout_keypoints, phi_lookup, rasterize_iuv, refine_iuv, sample_dense_keypoints, DenseAnchor,
    DenseKeypoint, Iuv, IuvMap, KeypointPartTable, UvAtlas,
};
pub use error::{Error, Result};
pub use fitter::{fit, init_mean_params, FitConfig, FitResult};
pub use mini::make_mini_model;
pub use objectives::{
    evaluate_metrics, loss_2d, loss_3d, loss_dense, total_loss_and_grad, AnnotationBundle, GroundTruthParams, LossBreakdown,
    LossWeights, MetricReport, Objective, SparseKeypointSet,
};
pub use rotation::rodrigues;
