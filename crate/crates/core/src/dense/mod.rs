//! Dense correspondence: the UV atlas over the template, IUV rasters, map refinement,
//! keypoint sampling and perturbation, and a synthetic IUV rasterizer.

mod atlas;
mod iuv;
mod raster;
mod refine;
mod sampling;

pub use atlas::{phi_lookup, DenseAnchor, UvAtlas};
pub use iuv::{DenseKeypoint, Iuv, IuvMap, BACKGROUND};
pub use raster::rasterize_iuv;
pub use refine::{refine_iuv, KeypointPartTable};
pub use sampling::{add_uv_noise, dropout_keypoints, sample_dense_keypoints};
