//! Deterministic desk-scale body model used as a test fixture and by the experiment harness.
//!
//! Twelve joints, each driving one tube-shaped body part. Each tube has seven segments around
//! its axis plus a duplicated seam column so that every part unrolls to a planar UV grid.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body_model::{BodyModel, BodyModelData, VertexIuv};
use crate::math::{self, Vec3};

pub const MINI_JOINTS: usize = 12;
pub const MINI_SHAPE_DIM: usize = 4;
pub const MINI_PARTS: usize = 12;
pub const MINI_VERTICES: usize = 512;

const SEGMENTS: usize = 7;
const COLUMNS: usize = SEGMENTS + 1;

pub const JOINT_NAMES: [&str; MINI_JOINTS] = [
    "pelvis",
    "neck",
    "left_shoulder",
    "left_elbow",
    "right_shoulder",
    "right_elbow",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_hip",
    "right_knee",
    "right_ankle",
];

/// Part id `k + 1` is the tube driven by joint `k`.
pub const PART_NAMES: [&str; MINI_PARTS] = [
    "torso",
    "head",
    "left_upper_arm",
    "left_forearm",
    "right_upper_arm",
    "right_forearm",
    "left_thigh",
    "left_lower_leg",
    "left_foot",
    "right_thigh",
    "right_lower_leg",
    "right_foot",
];

pub const PARENTS: [Option<usize>; MINI_JOINTS] =
    [None, Some(0), Some(0), Some(2), Some(0), Some(4), Some(0), Some(6), Some(7), Some(0), Some(9), Some(10)];

/// Joint offset from its parent (root: absolute position).
const JOINT_OFFSETS: [Vec3; MINI_JOINTS] = [
    [0.0, 0.05, 0.0],
    [0.0, -0.5, 0.0],
    [-0.17, -0.43, 0.0],
    [-0.25, 0.0, 0.0],
    [0.17, -0.43, 0.0],
    [0.25, 0.0, 0.0],
    [-0.08, 0.02, 0.0],
    [-0.01, 0.31, 0.0],
    [0.0, 0.28, 0.0],
    [0.08, 0.02, 0.0],
    [0.01, 0.31, 0.0],
    [0.0, 0.28, 0.0],
];

/// Tube end relative to its joint when the part has no child on its axis.
const TIPS: [Option<Vec3>; MINI_JOINTS] = [
    None,
    Some([0.0, -0.27, 0.0]),
    None,
    Some([-0.23, 0.0, 0.0]),
    None,
    Some([0.23, 0.0, 0.0]),
    None,
    None,
    Some([0.0, 0.04, -0.15]),
    None,
    None,
    Some([0.0, 0.04, -0.15]),
];

/// Child joint that terminates the tube, for non-leaf parts.
const AXIS_CHILD: [Option<usize>; MINI_JOINTS] =
    [Some(1), None, Some(3), None, Some(5), None, Some(7), Some(8), None, Some(10), Some(11), None];

const RADII: [f64; MINI_JOINTS] = [0.13, 0.08, 0.045, 0.04, 0.045, 0.04, 0.06, 0.045, 0.035, 0.06, 0.045, 0.035];
const RINGS: [usize; MINI_JOINTS] = [6, 4, 5, 5, 5, 5, 6, 6, 5, 6, 6, 5];

fn is_arm(k: usize) -> bool {
    (2..=5).contains(&k)
}

fn is_leg(k: usize) -> bool {
    k >= 6
}

/// Builds the mini model. Identical seeds give bit-identical models.
pub fn make_mini_model(seed: u64) -> BodyModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = |amount: f64| 1.0 + amount * rng.random_range(-1.0..1.0);

    let mut joints = [[0.0; 3]; MINI_JOINTS];
    for k in 0..MINI_JOINTS {
        let offset = JOINT_OFFSETS[k];
        joints[k] = match PARENTS[k] {
            None => offset,
            Some(p) => math::add(joints[p], math::scale(offset, jitter(0.06))),
        };
    }
    let radii: Vec<f64> = RADII.iter().map(|r| r * jitter(0.1)).collect();
    let tips: Vec<Vec3> = (0..MINI_JOINTS)
        .map(|k| match (AXIS_CHILD[k], TIPS[k]) {
            (Some(c), _) => joints[c],
            (None, Some(t)) => math::add(joints[k], math::scale(t, jitter(0.06))),
            (None, None) => unreachable!("every part has an axis end"),
        })
        .collect();
    let bulge: Vec<(f64, f64)> =
        (0..MINI_JOINTS).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();

    let nv: usize = RINGS.iter().sum::<usize>() * COLUMNS;
    debug_assert_eq!(nv, MINI_VERTICES);
    let nb = MINI_SHAPE_DIM;

    let mut template = Vec::with_capacity(nv);
    let mut vertex_iuv = Vec::with_capacity(nv);
    let mut shape_dirs = vec![0.0; nv * 3 * nb];
    let mut skin_weights = vec![0.0; nv * MINI_JOINTS];
    let mut joint_regressor = vec![0.0; MINI_JOINTS * nv];
    let mut faces = Vec::new();

    let pelvis_y = joints[0][1];
    for k in 0..MINI_JOINTS {
        let start = joints[k];
        let axis = math::sub(tips[k], start);
        let dir = math::scale(axis, 1.0 / math::norm(axis));
        let helper = if dir[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let e1 = {
            let c = math::cross(dir, helper);
            math::scale(c, 1.0 / math::norm(c))
        };
        let e2 = math::cross(dir, e1);
        let rings = RINGS[k];
        let base = template.len();
        let limb_root = match k {
            2..=3 => joints[2],
            4..=5 => joints[4],
            6..=8 => joints[6],
            9..=11 => joints[9],
            _ => start,
        };

        for r in 0..rings {
            let t = r as f64 / (rings - 1) as f64;
            let centre = math::add(start, math::scale(axis, t));
            for c in 0..COLUMNS {
                let phi = 2.0 * PI * (c % SEGMENTS) as f64 / SEGMENTS as f64;
                let radial = math::add(math::scale(e1, libm::cos(phi)), math::scale(e2, libm::sin(phi)));
                let p = math::add(centre, math::scale(radial, radii[k]));
                let v = template.len();
                template.push(p);
                vertex_iuv.push(VertexIuv {
                    part: (k + 1) as u8,
                    u: 255.0 * c as f64 / SEGMENTS as f64,
                    v: 255.0 * t,
                });

                let mut dirs = [[0.0; 3]; MINI_SHAPE_DIM];
                dirs[0] = [0.0, 0.08 * (p[1] - pelvis_y), 0.0];
                dirs[1] = math::scale(radial, 0.2 * radii[k]);
                if is_arm(k) {
                    dirs[2] = [0.12 * (p[0] - limb_root[0]), 0.0, 0.0];
                } else if is_leg(k) {
                    dirs[2] = [0.0, 0.1 * (p[1] - limb_root[1]), 0.0];
                }
                let (a, b) = bulge[k];
                dirs[3] = math::add(math::scale(radial, 0.3 * a * radii[k]), math::scale(axis, 0.05 * b * t));
                for (bi, d) in dirs.iter().enumerate() {
                    for ci in 0..3 {
                        shape_dirs[(v * 3 + ci) * nb + bi] = d[ci];
                    }
                }

                let own = match (PARENTS[k], r) {
                    (None, _) => 1.0,
                    (Some(_), 0) => 0.5,
                    (Some(_), 1) => 0.8,
                    _ => 1.0,
                };
                skin_weights[v * MINI_JOINTS + k] = own;
                if let Some(parent) = PARENTS[k] {
                    skin_weights[v * MINI_JOINTS + parent] += 1.0 - own;
                }
                if r == 0 && c < SEGMENTS {
                    joint_regressor[k * nv + v] = 1.0 / SEGMENTS as f64;
                }
            }
        }

        for r in 0..rings - 1 {
            for c in 0..SEGMENTS {
                let a = base + r * COLUMNS + c;
                let b = a + 1;
                let d = a + COLUMNS;
                let e = d + 1;
                faces.push([a, b, e]);
                faces.push([a, e, d]);
            }
        }
    }

    BodyModel::new(BodyModelData {
        template_vertices: template,
        faces,
        shape_dim: nb,
        shape_dirs,
        joint_regressor,
        skin_weights,
        parents: PARENTS.to_vec(),
        part_count: MINI_PARTS,
        vertex_iuv,
    })
    .expect("mini model satisfies all invariants")
}
