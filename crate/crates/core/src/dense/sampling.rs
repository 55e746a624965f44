use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::iuv::{DenseKeypoint, IuvMap};

/// Uniform sample of `n` foreground pixels without replacement, in row-major order.
/// Returns every foreground pixel when fewer than `n` exist.
pub fn sample_dense_keypoints(map: &IuvMap, n: usize, seed: u64) -> Vec<DenseKeypoint> {
    let w = map.width() as usize;
    let foreground: Vec<usize> =
        map.pixels().iter().enumerate().filter(|(_, p)| !p.is_background()).map(|(i, _)| i).collect();
    let chosen: Vec<usize> = if foreground.len() <= n {
        foreground
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = index::sample(&mut rng, foreground.len(), n).into_vec();
        picks.sort_unstable();
        picks.into_iter().map(|i| foreground[i]).collect()
    };
    chosen
        .into_iter()
        .map(|i| {
            let p = map.pixels()[i];
            DenseKeypoint { x: (i % w) as f64, y: (i / w) as f64, part: p.part, u: p.u as f64, v: p.v as f64 }
        })
        .collect()
}

/// Adds zero-mean Gaussian noise of standard deviation `sigma` to `U` and `V`, clamped to `[0, 255]`.
pub fn add_uv_noise(kps: &[DenseKeypoint], sigma: f64, seed: u64) -> Vec<DenseKeypoint> {
    if sigma == 0.0 {
        return kps.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kps.iter()
        .map(|k| {
            let du = normal.sample(&mut rng);
            let dv = normal.sample(&mut rng);
            DenseKeypoint { u: (k.u + du).clamp(0.0, 255.0), v: (k.v + dv).clamp(0.0, 255.0), ..*k }
        })
        .collect()
}

/// Keeps `round(keep_fraction · len)` keypoints chosen uniformly, preserving input order.
pub fn dropout_keypoints(kps: &[DenseKeypoint], keep_fraction: f64, seed: u64) -> Vec<DenseKeypoint> {
    let keep = libm::round(keep_fraction.clamp(0.0, 1.0) * kps.len() as f64) as usize;
    if keep >= kps.len() {
        return kps.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, kps.len(), keep).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| kps[i]).collect()
}
