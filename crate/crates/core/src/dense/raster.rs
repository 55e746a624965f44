use alloc::vec;

use super::iuv::{Iuv, IuvMap};
use crate::body_model::{BodyModel, MeshInstance};
use crate::camera::{project_point, CameraParams, ImageFrame};

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

#[inline]
fn to_byte(x: f64) -> u8 {
    libm::round(x).clamp(0.0, 255.0) as u8
}

/// Renders the posed mesh into an IUV map.
///
/// Pixel centres covered by a projected face receive the face's part id and its
/// barycentrically interpolated `(U, V)`; the smallest depth wins. Faces are not culled.
pub fn rasterize_iuv(model: &BodyModel, mesh: &MeshInstance, cam: &CameraParams, frame: &ImageFrame) -> IuvMap {
    let (w, h) = (frame.width, frame.height);
    let mut map = IuvMap::new(w, h);
    let mut depth = vec![f64::INFINITY; w as usize * h as usize];
    let iuv = model.vertex_iuv();
    let projected: alloc::vec::Vec<[f64; 2]> =
        mesh.vertices.iter().map(|&p| project_point(p, cam, frame)).collect();

    for face in model.faces() {
        let [a, b, c] = face.map(|v| projected[v]);
        let area = edge(a, b, c);
        if area.abs() < 1e-12 {
            continue;
        }
        let lo_x = libm::ceil(a[0].min(b[0]).min(c[0])).max(0.0);
        let hi_x = libm::floor(a[0].max(b[0]).max(c[0])).min(w as f64 - 1.0);
        let lo_y = libm::ceil(a[1].min(b[1]).min(c[1])).max(0.0);
        let hi_y = libm::floor(a[1].max(b[1]).max(c[1])).min(h as f64 - 1.0);
        if lo_x > hi_x || lo_y > hi_y {
            continue;
        }
        let z = face.map(|v| mesh.vertices[v][2]);
        let part = iuv[face[0]].part;
        for y in lo_y as u32..=hi_y as u32 {
            for x in lo_x as u32..=hi_x as u32 {
                let p = [x as f64, y as f64];
                let l0 = edge(b, c, p) / area;
                let l1 = edge(c, a, p) / area;
                let l2 = 1.0 - l0 - l1;
                if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                    continue;
                }
                let d = l0 * z[0] + l1 * z[1] + l2 * z[2];
                let slot = &mut depth[y as usize * w as usize + x as usize];
                if d < *slot {
                    *slot = d;
                    let u = l0 * iuv[face[0]].u + l1 * iuv[face[1]].u + l2 * iuv[face[2]].u;
                    let v = l0 * iuv[face[0]].v + l1 * iuv[face[1]].v + l2 * iuv[face[2]].v;
                    map.set(x, y, Iuv::new(part, to_byte(u), to_byte(v)));
                }
            }
        }
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body_model::{BodyModelData, FullParams, VertexIuv};
    use crate::dense::{phi_lookup, UvAtlas};
    use crate::mini::make_mini_model;
    use alloc::vec::Vec;

    /// Two-joint, two-part model holding the given triangles (in normalized image units).
    fn triangle_model(tris: &[([[f64; 3]; 3], u8)]) -> BodyModel {
        let mut template = Vec::new();
        let mut vertex_iuv = Vec::new();
        let mut faces = Vec::new();
        for (tri, part) in tris {
            let base = template.len();
            for (i, p) in tri.iter().enumerate() {
                template.push(*p);
                let uv = [[0.0, 0.0], [255.0, 0.0], [0.0, 255.0]][i];
                vertex_iuv.push(VertexIuv { part: *part, u: uv[0], v: uv[1] });
            }
            faces.push([base, base + 1, base + 2]);
        }
        let nv = template.len();
        BodyModel::new(BodyModelData {
            template_vertices: template,
            faces,
            shape_dim: 0,
            shape_dirs: Vec::new(),
            joint_regressor: vec![1.0 / nv as f64; nv],
            skin_weights: vec![1.0; nv],
            parents: vec![None],
            part_count: 2,
            vertex_iuv,
        })
        .unwrap()
    }

    fn render(model: &BodyModel, frame: ImageFrame) -> IuvMap {
        let mesh = model.pose_mesh(&FullParams::zeros(1, 0)).unwrap();
        rasterize_iuv(model, &mesh, &CameraParams::default(), &frame)
    }

    #[test]
    fn single_triangle_carries_its_part() {
        let model = triangle_model(&[([[-0.9, -0.9, 0.0], [0.9, -0.9, 0.0], [-0.9, 0.9, 0.0]], 2)]);
        let map = render(&model, ImageFrame::new(32, 32));
        let covered: Vec<_> = map.pixels().iter().filter(|p| !p.is_background()).collect();
        assert!(covered.len() > 300);
        assert!(covered.iter().all(|p| p.part == 2));
        assert!(map.validate(2).is_ok());
    }

    #[test]
    fn nearer_face_wins_on_overlap() {
        let far = ([[-0.9, -0.9, 1.0], [0.9, -0.9, 1.0], [-0.9, 0.9, 1.0]], 1);
        let near = ([[-0.5, -0.5, -1.0], [0.9, -0.5, -1.0], [-0.5, 0.9, -1.0]], 2);
        for order in [[far, near], [near, far]] {
            let map = render(&triangle_model(&order), ImageFrame::new(32, 32));
            // (-0.3, -0.3) normalized lies inside both triangles.
            assert_eq!(map.get(10, 10).part, 2);
            assert_eq!(map.get(2, 2).part, 1);
        }
    }

    #[test]
    fn off_frame_mesh_covers_nothing() {
        let model = make_mini_model(0);
        let mesh = model.pose_mesh(&FullParams::zeros(12, 4)).unwrap();
        let map = rasterize_iuv(&model, &mesh, &CameraParams::new(1.0, 5.0, 0.0), &ImageFrame::default());
        assert_eq!(map.foreground_count(), 0);
    }

    #[test]
    fn pixels_reproject_through_phi() {
        let model = make_mini_model(0);
        let atlas = UvAtlas::build(&model).unwrap();
        let mut params = FullParams::zeros(12, 4);
        params.pose[0] = [0.2, 0.4, 0.1];
        params.pose[3] = [0.0, 0.0, 0.6];
        let cam = CameraParams::new(1.1, 0.05, -0.03);
        let frame = ImageFrame::default();
        let mesh = model.pose_mesh(&params).unwrap();
        let map = rasterize_iuv(&model, &mesh, &cam, &frame);
        assert!(map.foreground_count() > 1000);
        let mut worst: f64 = 0.0;
        for y in 0..frame.height {
            for x in 0..frame.width {
                let px = map.get(x, y);
                if px.is_background() {
                    continue;
                }
                let a = phi_lookup(&atlas, px.part, px.u as f64, px.v as f64).unwrap();
                let mut q = [0.0; 2];
                for (v, w) in a.vertices.iter().zip(a.weights) {
                    let p = project_point(mesh.vertices[*v], &cam, &frame);
                    q[0] += w * p[0];
                    q[1] += w * p[1];
                }
                worst = worst.max(libm::hypot(q[0] - x as f64, q[1] - y as f64));
            }
        }
        assert!(worst < 1.0, "worst reprojection error {worst}");
    }
}
