use alloc::vec;
use alloc::vec::Vec;

use crate::body_model::BodyModel;
use crate::error::{Error, Result};

type Uv = [f64; 2];

const GRID: usize = 16;
const CELL: f64 = 256.0 / GRID as f64;
const MIN_AREA: f64 = 1e-9;
/// Barycentric slack accepted as "inside" before falling back to the nearest triangle.
const INSIDE_TOL: f64 = 1e-9;

/// A resolved dense correspondence: three mesh vertices and convex weights over them.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseAnchor {
    pub face: usize,
    pub vertices: [usize; 3],
    pub weights: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
struct PartIndex {
    faces: Vec<usize>,
    /// `GRID × GRID` buckets of faces whose UV bounding box overlaps the cell.
    cells: Vec<Vec<usize>>,
}

/// UV triangles of every face, bucketed per body part for point location.
#[derive(Debug, Clone, PartialEq)]
pub struct UvAtlas {
    faces: Vec<[usize; 3]>,
    face_part: Vec<u8>,
    face_uv: Vec<[Uv; 3]>,
    parts: Vec<PartIndex>,
}

#[inline]
fn cross(o: Uv, a: Uv, b: Uv) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

#[inline]
fn cell_of(x: f64) -> usize {
    ((x.clamp(0.0, 255.999) / CELL) as usize).min(GRID - 1)
}

impl UvAtlas {
    pub fn build(model: &BodyModel) -> Result<Self> {
        let iuv = model.vertex_iuv();
        let faces = model.faces().to_vec();
        let mut face_part = Vec::with_capacity(faces.len());
        let mut face_uv = Vec::with_capacity(faces.len());
        let mut parts = vec![PartIndex { faces: Vec::new(), cells: vec![Vec::new(); GRID * GRID] }; model.part_count()];
        for (f, face) in faces.iter().enumerate() {
            let uv = face.map(|v| [iuv[v].u, iuv[v].v]);
            let area = 0.5 * cross(uv[0], uv[1], uv[2]).abs();
            if !(area > MIN_AREA) {
                return Err(Error::DegenerateUv { face: f, area });
            }
            let part = iuv[face[0]].part;
            let index = &mut parts[part as usize - 1];
            index.faces.push(f);
            let (lo_u, hi_u) = (uv.iter().map(|p| p[0]).fold(f64::MAX, f64::min), uv.iter().map(|p| p[0]).fold(f64::MIN, f64::max));
            let (lo_v, hi_v) = (uv.iter().map(|p| p[1]).fold(f64::MAX, f64::min), uv.iter().map(|p| p[1]).fold(f64::MIN, f64::max));
            for cy in cell_of(lo_v)..=cell_of(hi_v) {
                for cx in cell_of(lo_u)..=cell_of(hi_u) {
                    index.cells[cy * GRID + cx].push(f);
                }
            }
            face_part.push(part);
            face_uv.push(uv);
        }
        Ok(Self { faces, face_part, face_uv, parts })
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn face_part(&self, face: usize) -> u8 {
        self.face_part[face]
    }

    pub fn face_uv(&self, face: usize) -> [[f64; 2]; 3] {
        self.face_uv[face]
    }

    /// Faces belonging to a part, in index order.
    pub fn part_faces(&self, part: u8) -> &[usize] {
        match part {
            0 => &[],
            p => self.parts.get(p as usize - 1).map_or(&[], |idx| idx.faces.as_slice()),
        }
    }

    fn anchor(&self, face: usize, weights: [f64; 3]) -> DenseAnchor {
        DenseAnchor { face, vertices: self.faces[face], weights }
    }

    /// Barycentric coordinates of `p` in the face's UV triangle.
    fn barycentric(&self, face: usize, p: Uv) -> [f64; 3] {
        let [a, b, c] = self.face_uv[face];
        let area = cross(a, b, c);
        let l0 = cross(p, b, c) / area;
        let l1 = cross(p, c, a) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Point on the face's UV triangle closest to `p`, as convex weights, with squared distance.
    fn closest(&self, face: usize, p: Uv) -> ([f64; 3], f64) {
        let l = self.barycentric(face, p);
        if l.iter().all(|&x| x >= 0.0) {
            return (l, 0.0);
        }
        let tri = self.face_uv[face];
        let mut best = ([0.0; 3], f64::MAX);
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let (a, b) = (tri[i], tri[j]);
            let e = [b[0] - a[0], b[1] - a[1]];
            let t = (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
            let q = [a[0] + t * e[0], a[1] + t * e[1]];
            let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
            let d2 = dx * dx + dy * dy;
            if d2 < best.1 {
                let mut w = [0.0; 3];
                w[i] = 1.0 - t;
                w[j] = t;
                best = (w, d2);
            }
        }
        best
    }
}

/// Maps a surface coordinate `(I, U, V)` to a mesh face and barycentric weights.
///
/// The face of part `I` whose UV triangle contains `(U, V)` is returned; among several
/// (points on shared edges) the lowest face index wins. Points outside every triangle of
/// the part resolve to the nearest triangle, weighted at the closest point on it.
pub fn phi_lookup(atlas: &UvAtlas, part: u8, u: f64, v: f64) -> Result<DenseAnchor> {
    let faces = atlas.part_faces(part);
    if faces.is_empty() {
        return Err(Error::EmptyPart { part });
    }
    let p = [u, v];
    let index = &atlas.parts[part as usize - 1];
    if (0.0..=256.0).contains(&u) && (0.0..=256.0).contains(&v) {
        for &f in &index.cells[cell_of(v) * GRID + cell_of(u)] {
            let l = atlas.barycentric(f, p);
            if l.iter().all(|&x| x >= -INSIDE_TOL) {
                let clamped = l.map(|x| x.max(0.0));
                let sum: f64 = clamped.iter().sum();
                return Ok(atlas.anchor(f, clamped.map(|x| x / sum)));
            }
        }
    }
    let mut best = (faces[0], [1.0, 0.0, 0.0], f64::MAX);
    for &f in faces {
        let (w, d2) = atlas.closest(f, p);
        if d2 < best.2 {
            best = (f, w, d2);
        }
    }
    Ok(atlas.anchor(best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::BodyModel;
    use crate::mini::make_mini_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Solves `[a b c; 1 1 1] w = [p; 1]` by Gaussian elimination with partial pivoting.
    fn linear_solve_oracle(tri: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
        let mut m = [
            [tri[0][0], tri[1][0], tri[2][0], p[0]],
            [tri[0][1], tri[1][1], tri[2][1], p[1]],
            [1.0, 1.0, 1.0, 1.0],
        ];
        for col in 0..3 {
            let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()).unwrap();
            m.swap(col, pivot);
            for row in 0..3 {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for k in col..4 {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
        [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]]
    }

    #[test]
    fn one_part_per_face_and_deterministic() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        assert_eq!(atlas.face_count(), model.faces().len());
        for (f, face) in model.faces().iter().enumerate() {
            assert_eq!(atlas.face_part(f), model.vertex_iuv()[face[0]].part);
        }
        assert_eq!(atlas, UvAtlas::build(&model).unwrap());
    }

    #[test]
    fn rejects_zero_area_uv_face() {
        let mut data = make_mini_model(0).into_data();
        let f = data.faces[10];
        data.vertex_iuv[f[1]] = data.vertex_iuv[f[0]];
        let model = BodyModel::new(data).unwrap();
        assert!(matches!(UvAtlas::build(&model), Err(Error::DegenerateUv { .. })));
    }

    #[test]
    fn vertex_coordinates_resolve_to_the_vertex() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        for (v, iuv) in model.vertex_iuv().iter().enumerate() {
            let a = phi_lookup(&atlas, iuv.part, iuv.u, iuv.v).unwrap();
            let w: f64 = a.vertices.iter().zip(a.weights).filter(|(&x, _)| x == v).map(|(_, w)| w).sum();
            assert!(w >= 1.0 - 1e-6, "vertex {v} got weight {w}");
        }
    }

    #[test]
    fn centroid_gets_equal_weights() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        for f in [0, 77, 300, 727] {
            let uv = atlas.face_uv(f);
            let c = [(uv[0][0] + uv[1][0] + uv[2][0]) / 3.0, (uv[0][1] + uv[1][1] + uv[2][1]) / 3.0];
            let a = phi_lookup(&atlas, atlas.face_part(f), c[0], c[1]).unwrap();
            assert_eq!(a.face, f);
            for w in a.weights {
                assert!((w - 1.0 / 3.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interior_points_match_linear_solve() {
        let model = make_mini_model(1);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let f = rng.random_range(0..atlas.face_count());
            let uv = atlas.face_uv(f);
            // Strictly interior so the containing face is unique.
            let (mut a, mut b): (f64, f64) = (rng.random_range(0.01..0.98), rng.random_range(0.01..0.98));
            if a + b > 0.99 {
                a = 0.99 - a;
                b = 0.99 - b;
            }
            let a = a.max(0.005);
            let b = b.max(0.005);
            let p = [
                uv[0][0] + a * (uv[1][0] - uv[0][0]) + b * (uv[2][0] - uv[0][0]),
                uv[0][1] + a * (uv[1][1] - uv[0][1]) + b * (uv[2][1] - uv[0][1]),
            ];
            let anchor = phi_lookup(&atlas, atlas.face_part(f), p[0], p[1]).unwrap();
            assert_eq!(anchor.face, f);
            let oracle = linear_solve_oracle(uv, p);
            for i in 0..3 {
                assert!((anchor.weights[i] - oracle[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn outside_points_clamp_to_nearest_triangle() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let a = phi_lookup(&atlas, 3, -20.0, 300.0).unwrap();
        assert_eq!(atlas.face_part(a.face), 3);
        assert!(a.weights.iter().all(|&w| w >= 0.0));
        assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // The corner (0, 255) of the part grid is the closest point.
        let uv = atlas.face_uv(a.face);
        let q = [
            a.weights[0] * uv[0][0] + a.weights[1] * uv[1][0] + a.weights[2] * uv[2][0],
            a.weights[0] * uv[0][1] + a.weights[1] * uv[1][1] + a.weights[2] * uv[2][1],
        ];
        assert!(q[0].abs() < 1e-9 && (q[1] - 255.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_part_is_an_error() {
        let atlas = UvAtlas::build(&make_mini_model(0)).unwrap();
        assert_eq!(phi_lookup(&atlas, 0, 1.0, 1.0), Err(Error::EmptyPart { part: 0 }));
        assert_eq!(phi_lookup(&atlas, 13, 1.0, 1.0), Err(Error::EmptyPart { part: 13 }));
    }

    proptest::proptest! {
        #[test]
        fn weights_are_convex(part in 1u8..=12, u in -50.0f64..300.0, v in -50.0f64..300.0) {
            let atlas = UvAtlas::build(&make_mini_model(0)).unwrap();
            let a = phi_lookup(&atlas, part, u, v).unwrap();
            proptest::prop_assert!(a.weights.iter().all(|&w| w >= 0.0));
            proptest::prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            proptest::prop_assert_eq!(atlas.face_part(a.face), part);
        }
    }
}
