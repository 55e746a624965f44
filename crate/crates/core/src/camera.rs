//! Weak-perspective camera shared by the sparse and dense keypoint losses.
//!
//! A model point `(x, y, z)` maps to normalized coordinates `f·(x, y) + (t_x, t_y)`;
//! depth is dropped. Normalized `(-1, -1)` lands on the center of the top-left pixel
//! and `(1, 1)` on the center of the bottom-right pixel.

use alloc::vec::Vec;

use crate::error::{invariant, Result};
use crate::math::Vec3;

pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraParams {
    pub focal: f64,
    pub tx: f64,
    pub ty: f64,
}

impl CameraParams {
    pub const fn new(focal: f64, tx: f64, ty: f64) -> Self {
        Self { focal, tx, ty }
    }

    pub fn validate(&self) -> Result<()> {
        if self.focal > 0.0 && self.focal.is_finite() {
            Ok(())
        } else {
            Err(invariant("camera.focal", "focal length must be positive"))
        }
    }
}

impl Default for CameraParams {
    fn default() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
}

impl ImageFrame {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width > 0 && self.height > 0 {
            Ok(())
        } else {
            Err(invariant("frame", "width and height must be positive"))
        }
    }

    /// Pixels per normalized unit along x and y.
    #[inline]
    pub fn pixel_scale(&self) -> [f64; 2] {
        [(self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0]
    }

    /// Whether a pixel-space point lies within the image bounds.
    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= -0.5 && p[1] >= -0.5 && p[0] < self.width as f64 - 0.5 && p[1] < self.height as f64 - 0.5
    }
}

impl Default for ImageFrame {
    fn default() -> Self {
        Self::new(224, 224)
    }
}

#[inline]
pub fn normalized(point: Vec3, cam: &CameraParams) -> Point2 {
    [cam.focal * point[0] + cam.tx, cam.focal * point[1] + cam.ty]
}

#[inline]
pub fn normalized_to_pixel(p: Point2, frame: &ImageFrame) -> Point2 {
    let [sx, sy] = frame.pixel_scale();
    [(p[0] + 1.0) * sx, (p[1] + 1.0) * sy]
}

/// Projects one point to pixel coordinates.
#[inline]
pub fn project_point(point: Vec3, cam: &CameraParams, frame: &ImageFrame) -> Point2 {
    normalized_to_pixel(normalized(point, cam), frame)
}

pub fn project(points: &[Vec3], cam: &CameraParams, frame: &ImageFrame) -> Vec<Point2> {
    points.iter().map(|&p| project_point(p, cam, frame)).collect()
}

/// Accumulates the pullback of a pixel-space cotangent through [`project_point`].
///
/// Returns `∂L/∂point` and adds `∂L/∂(f, t_x, t_y)` into `d_cam`.
#[inline]
pub fn project_point_vjp(
    point: Vec3,
    cam: &CameraParams,
    frame: &ImageFrame,
    d_pixel: Point2,
    d_cam: &mut [f64; 3],
) -> Vec3 {
    let [sx, sy] = frame.pixel_scale();
    let gx = sx * d_pixel[0];
    let gy = sy * d_pixel[1];
    d_cam[0] += gx * point[0] + gy * point[1];
    d_cam[1] += gx;
    d_cam[2] += gy;
    [cam.focal * gx, cam.focal * gy, 0.0]
}
