//! Parametric body model: shape blending, forward kinematics and linear blend skinning.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::camera::CameraParams;
use crate::error::{check_len, invariant, Error, Result};
use crate::math::{self, Mat3, Vec3};
use crate::rotation::{rodrigues, rodrigues_vjp};

const ROW_SUM_TOL: f64 = 1e-6;

/// Template-side surface coordinate of a vertex: body part and `(U, V)` in `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VertexIuv {
    pub part: u8,
    pub u: f64,
    pub v: f64,
}

/// Raw model arrays, as read from disk or produced by a generator.
///
/// `shape_dirs` is `V×3×B` row-major, `joint_regressor` is `K×V`, `skin_weights` is `V×K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModelData {
    pub template_vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub shape_dim: usize,
    pub shape_dirs: Vec<f64>,
    pub joint_regressor: Vec<f64>,
    pub skin_weights: Vec<f64>,
    pub parents: Vec<Option<usize>>,
    pub part_count: usize,
    pub vertex_iuv: Vec<VertexIuv>,
}

/// A validated body model. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BodyModel {
    data: BodyModelData,
    /// Non-zero skin weights per vertex.
    skin: Vec<Vec<(usize, f64)>>,
    /// Non-zero regressor weights per joint.
    regressor: Vec<Vec<(usize, f64)>>,
}

impl BodyModel {
    /// Validates every structural invariant and builds the sparse caches.
    pub fn new(data: BodyModelData) -> Result<Self> {
        let nv = data.template_vertices.len();
        let nk = data.parents.len();
        let nb = data.shape_dim;
        if nv == 0 {
            return Err(invariant("template_vertices", "model has no vertices"));
        }
        if nk == 0 {
            return Err(invariant("parents", "model has no joints"));
        }
        check_len("shape_dirs", nv * 3 * nb, data.shape_dirs.len())?;
        check_len("joint_regressor", nk * nv, data.joint_regressor.len())?;
        check_len("skin_weights", nv * nk, data.skin_weights.len())?;
        check_len("vertex_iuv", nv, data.vertex_iuv.len())?;

        for (i, face) in data.faces.iter().enumerate() {
            if face.iter().any(|&v| v >= nv) {
                return Err(invariant("faces", format!("face {i} references a vertex index >= {nv}")));
            }
        }
        if data.parents[0].is_some() {
            return Err(invariant("parents", "joint 0 must be the root"));
        }
        for (k, p) in data.parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < k => {}
                Some(_) => return Err(invariant("parents", "kinematic tree not topologically ordered")),
                None => return Err(invariant("parents", format!("joint {k} has no parent"))),
            }
        }
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !data.template_vertices.iter().all(|p| finite(p)) {
            return Err(invariant("template_vertices", "non-finite coordinate"));
        }
        if !finite(&data.shape_dirs) {
            return Err(invariant("shape_dirs", "non-finite entry"));
        }

        let mut skin = Vec::with_capacity(nv);
        for v in 0..nv {
            let row = &data.skin_weights[v * nk..(v + 1) * nk];
            if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(invariant("skin_weights", format!("row {v} has a negative or non-finite weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invariant("skin_weights", format!("skin_weights row not normalized (row {v} sums to {sum})")));
            }
            skin.push(row.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(k, &w)| (k, w)).collect());
        }

        let mut regressor = Vec::with_capacity(nk);
        for k in 0..nk {
            let row = &data.joint_regressor[k * nv..(k + 1) * nv];
            if !finite(row) {
                return Err(invariant("joint_regressor", format!("row {k} has a non-finite weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(invariant("joint_regressor", format!("joint_regressor row not normalized (row {k} sums to {sum})")));
            }
            regressor.push(row.iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(v, &w)| (v, w)).collect());
        }

        if data.part_count == 0 || data.part_count > u8::MAX as usize {
            return Err(invariant("P", "part count must lie in 1..=255"));
        }
        for (v, iuv) in data.vertex_iuv.iter().enumerate() {
            if iuv.part == 0 || iuv.part as usize > data.part_count {
                return Err(invariant("vertex_iuv", format!("vertex {v} has part id {} outside 1..={}", iuv.part, data.part_count)));
            }
            if !(0.0..=255.0).contains(&iuv.u) || !(0.0..=255.0).contains(&iuv.v) {
                return Err(invariant("vertex_iuv", format!("vertex {v} has UV outside [0, 255]")));
            }
        }
        for (i, face) in data.faces.iter().enumerate() {
            let part = data.vertex_iuv[face[0]].part;
            if face.iter().any(|&v| data.vertex_iuv[v].part != part) {
                return Err(invariant("faces", format!("face {i} straddles body parts")));
            }
        }

        Ok(Self { data, skin, regressor })
    }

    pub fn data(&self) -> &BodyModelData {
        &self.data
    }

    pub fn into_data(self) -> BodyModelData {
        self.data
    }

    pub fn vertex_count(&self) -> usize {
        self.data.template_vertices.len()
    }

    pub fn joint_count(&self) -> usize {
        self.data.parents.len()
    }

    pub fn shape_dim(&self) -> usize {
        self.data.shape_dim
    }

    pub fn part_count(&self) -> usize {
        self.data.part_count
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.data.faces
    }

    pub fn template(&self) -> &[Vec3] {
        &self.data.template_vertices
    }

    pub fn vertex_iuv(&self) -> &[VertexIuv] {
        &self.data.vertex_iuv
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.data.parents
    }

    /// Dimension of [`FullParams`] for this model.
    pub fn param_dim(&self) -> usize {
        3 * self.joint_count() + self.shape_dim() + 3
    }

    /// Displacement of vertex `v` along shape component `b`.
    #[inline]
    pub fn shape_dir(&self, v: usize, b: usize) -> Vec3 {
        let nb = self.data.shape_dim;
        let base = v * 3 * nb + b;
        [self.data.shape_dirs[base], self.data.shape_dirs[base + nb], self.data.shape_dirs[base + 2 * nb]]
    }

    /// Non-zero `(joint, weight)` pairs skinning vertex `v`.
    pub fn skin_row(&self, v: usize) -> &[(usize, f64)] {
        &self.skin[v]
    }

    /// Non-zero `(vertex, weight)` pairs regressing joint `k`.
    pub fn regressor_row(&self, k: usize) -> &[(usize, f64)] {
        &self.regressor[k]
    }

    fn check_params(&self, params: &FullParams) -> Result<()> {
        check_len("pose", self.joint_count(), params.pose.len())?;
        check_len("shape", self.shape_dim(), params.shape.len())
    }

    /// Template deformed by the shape coefficients.
    pub fn shaped_template(&self, shape: &[f64]) -> Vec<Vec3> {
        let nb = self.data.shape_dim;
        self.data
            .template_vertices
            .iter()
            .enumerate()
            .map(|(v, &t)| {
                let dirs = &self.data.shape_dirs[v * 3 * nb..(v + 1) * 3 * nb];
                let mut p = t;
                for c in 0..3 {
                    for (b, &beta) in shape.iter().enumerate() {
                        p[c] += dirs[c * nb + b] * beta;
                    }
                }
                p
            })
            .collect()
    }

    /// Applies the joint regressor to a vertex set.
    pub fn regress_joints(&self, vertices: &[Vec3]) -> Vec<Vec3> {
        self.regressor
            .iter()
            .map(|row| {
                let mut j = [0.0; 3];
                for &(v, w) in row {
                    math::add_assign(&mut j, math::scale(vertices[v], w));
                }
                j
            })
            .collect()
    }

    /// Poses the model; camera entries of `params` are ignored.
    pub fn pose_mesh(&self, params: &FullParams) -> Result<MeshInstance> {
        self.pose_mesh_with_cache(params).map(|(mesh, _)| mesh)
    }

    /// Poses the model and keeps the intermediate quantities needed by [`Self::pose_mesh_vjp`].
    pub fn pose_mesh_with_cache(&self, params: &FullParams) -> Result<(MeshInstance, Kinematics)> {
        self.check_params(params)?;
        let shaped = self.shaped_template(&params.shape);
        let rest_joints = self.regress_joints(&shaped);
        let nk = self.joint_count();

        let local_rot: Vec<Mat3> = params.pose.iter().map(|&w| rodrigues(w)).collect();
        let mut world_rot = vec![math::IDENTITY; nk];
        let mut world_t = vec![[0.0; 3]; nk];
        world_rot[0] = local_rot[0];
        world_t[0] = rest_joints[0];
        for k in 1..nk {
            let p = self.data.parents[k].expect("validated");
            world_rot[k] = math::mat_mul(&world_rot[p], &local_rot[k]);
            world_t[k] = math::add(world_t[p], math::mat_vec(&world_rot[p], math::sub(rest_joints[k], rest_joints[p])));
        }

        let vertices: Vec<Vec3> = shaped
            .iter()
            .zip(&self.skin)
            .map(|(&s, row)| {
                let mut out = [0.0; 3];
                for &(k, w) in row {
                    let local = math::sub(s, rest_joints[k]);
                    let posed = math::add(math::mat_vec(&world_rot[k], local), world_t[k]);
                    math::add_assign(&mut out, math::scale(posed, w));
                }
                out
            })
            .collect();
        let joints3d = self.regress_joints(&vertices);
        Ok((MeshInstance { vertices, joints3d }, Kinematics { shaped, rest_joints, local_rot, world_rot }))
    }

    /// Pulls cotangents on posed vertices and joints back to pose and shape.
    ///
    /// Returns `(∂L/∂pose, ∂L/∂shape)`.
    pub fn pose_mesh_vjp(
        &self,
        params: &FullParams,
        cache: &Kinematics,
        d_vertices: &[Vec3],
        d_joints: &[Vec3],
    ) -> (Vec<Vec3>, Vec<f64>) {
        let nv = self.vertex_count();
        let nk = self.joint_count();
        let nb = self.shape_dim();

        let mut g = d_vertices.to_vec();
        if g.is_empty() {
            g = vec![[0.0; 3]; nv];
        }
        for (row, dj) in self.regressor.iter().zip(d_joints) {
            if *dj == [0.0; 3] {
                continue;
            }
            for &(v, w) in row {
                math::add_assign(&mut g[v], math::scale(*dj, w));
            }
        }

        let mut d_rot = vec![math::ZERO3; nk];
        let mut d_t = vec![[0.0; 3]; nk];
        let mut d_rest = vec![[0.0; 3]; nk];
        let mut d_shaped = vec![[0.0; 3]; nv];
        for v in 0..nv {
            let gv = g[v];
            if gv == [0.0; 3] {
                continue;
            }
            for &(k, w) in &self.skin[v] {
                let local = math::sub(cache.shaped[v], cache.rest_joints[k]);
                math::add_outer(&mut d_rot[k], gv, local, w);
                math::add_assign(&mut d_t[k], math::scale(gv, w));
                let back = math::scale(math::mat_t_vec(&cache.world_rot[k], gv), w);
                math::add_assign(&mut d_shaped[v], back);
                d_rest[k] = math::sub(d_rest[k], back);
            }
        }

        let mut d_local = vec![math::ZERO3; nk];
        for k in (1..nk).rev() {
            let p = self.data.parents[k].expect("validated");
            let offset = math::sub(cache.rest_joints[k], cache.rest_joints[p]);
            let dt = d_t[k];
            math::add_outer(&mut d_rot[p], dt, offset, 1.0);
            math::add_assign(&mut d_t[p], dt);
            let back = math::mat_t_vec(&cache.world_rot[p], dt);
            math::add_assign(&mut d_rest[k], back);
            d_rest[p] = math::sub(d_rest[p], back);

            let dr = d_rot[k];
            let up = math::mat_mul_bt(&dr, &cache.local_rot[k]);
            math::mat_add_assign(&mut d_rot[p], &up);
            d_local[k] = math::mat_mul_at(&cache.world_rot[p], &dr);
        }
        d_local[0] = d_rot[0];
        math::add_assign(&mut d_rest[0], d_t[0]);

        let d_pose = params.pose.iter().zip(&d_local).map(|(&w, dl)| rodrigues_vjp(w, dl)).collect();

        for (row, dr) in self.regressor.iter().zip(&d_rest) {
            for &(v, w) in row {
                math::add_assign(&mut d_shaped[v], math::scale(*dr, w));
            }
        }
        let mut d_shape = vec![0.0; nb];
        for (v, ds) in d_shaped.iter().enumerate() {
            let dirs = &self.data.shape_dirs[v * 3 * nb..(v + 1) * 3 * nb];
            for c in 0..3 {
                for (b, out) in d_shape.iter_mut().enumerate() {
                    *out += ds[c] * dirs[c * nb + b];
                }
            }
        }
        (d_pose, d_shape)
    }
}

/// Intermediate quantities of one forward pass.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub shaped: Vec<Vec3>,
    pub rest_joints: Vec<Vec3>,
    pub local_rot: Vec<Mat3>,
    pub world_rot: Vec<Mat3>,
}

/// A posed mesh and its regressed 3D joints.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshInstance {
    pub vertices: Vec<Vec3>,
    pub joints3d: Vec<Vec3>,
}

/// The optimization vector: per-joint axis-angle pose, shape coefficients and camera.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FullParams {
    /// Axis-angle per joint, radians; entry 0 is the global rotation.
    pub pose: Vec<Vec3>,
    pub shape: Vec<f64>,
    pub camera: CameraParams,
}

impl FullParams {
    /// Zero pose and shape with the unit camera.
    pub fn zeros(joint_count: usize, shape_dim: usize) -> Self {
        Self { pose: vec![[0.0; 3]; joint_count], shape: vec![0.0; shape_dim], camera: CameraParams::default() }
    }

    pub fn dim(&self) -> usize {
        3 * self.pose.len() + self.shape.len() + 3
    }

    /// Flattens as `[pose..., shape..., f, t_x, t_y]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for w in &self.pose {
            out.extend_from_slice(w);
        }
        out.extend_from_slice(&self.shape);
        out.extend_from_slice(&[self.camera.focal, self.camera.tx, self.camera.ty]);
        out
    }

    /// Inverse of [`Self::to_vec`].
    pub fn from_slice(joint_count: usize, shape_dim: usize, xs: &[f64]) -> Result<Self> {
        check_len("params", 3 * joint_count + shape_dim + 3, xs.len())?;
        let pose = xs[..3 * joint_count].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let shape = xs[3 * joint_count..3 * joint_count + shape_dim].to_vec();
        let cam = &xs[3 * joint_count + shape_dim..];
        Ok(Self { pose, shape, camera: CameraParams::new(cam[0], cam[1], cam[2]) })
    }

    /// Index of the first camera entry in the flat layout.
    pub fn camera_offset(&self) -> usize {
        3 * self.pose.len() + self.shape.len()
    }

    pub fn validate_for(&self, model: &BodyModel) -> Result<()> {
        check_len("pose", model.joint_count(), self.pose.len())?;
        check_len("shape", model.shape_dim(), self.shape.len())?;
        self.camera.validate()?;
        if self.to_vec().iter().any(|x| !x.is_finite()) {
            return Err(Error::Invariant { field: "params", message: "non-finite entry".into() });
        }
        Ok(())
    }
}
