//! Supervision losses with exact gradients, their weighted combination, evaluation metrics,
//! and a finite-difference gradient checker.

mod annotation;
mod gradcheck;
mod losses;
mod metrics;

pub use annotation::{AnnotationBundle, GroundTruthParams, LossWeights, SparseKeypointSet};
pub use gradcheck::{check_gradient, GradientCheck};
pub use losses::{
    loss_2d, loss_3d, loss_dense, loss_dense_anchored, resolve_anchors, total_loss_and_grad, AnchoredKeypoint, DenseLoss,
    Loss3d, LossBreakdown, Objective,
};
pub use metrics::{evaluate_metrics, evaluate_metrics_with, MetricOptions, MetricReport, PVE_T_POSE};
