//! Ablation runs over synthetic scenes: supervision mixes crossed with a perturbation sweep.

use std::path::PathBuf;

use densefit_core::objectives::{evaluate_metrics_with, MetricOptions};
use densefit_core::{
    add_uv_noise, dropout_keypoints, fit, AnnotationBundle, BodyModel, Error, FitConfig, LossWeights, MetricReport,
    UvAtlas,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scene::{generate_scene, SceneConfig, SyntheticScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    GtParams,
    Joints3d,
    Sparse2d,
    Dense,
}

impl Source {
    fn is_3d(self) -> bool {
        matches!(self, Source::GtParams | Source::Joints3d)
    }
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// A named subset of supervision sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    pub name: String,
    pub sources: Vec<Source>,
    /// Probability that a scene keeps its 3D sources, drawn once per scene.
    #[serde(default = "one")]
    pub three_d_fraction: f64,
    #[serde(default = "yes")]
    pub use_pose: bool,
    #[serde(default = "yes")]
    pub use_shape: bool,
}

impl MixSpec {
    pub fn new(name: &str, sources: &[Source]) -> Self {
        Self { name: name.into(), sources: sources.to_vec(), three_d_fraction: 1.0, use_pose: true, use_shape: true }
    }

    fn has(&self, s: Source) -> bool {
        self.sources.contains(&s)
    }

    /// The supervision columns of the annotation ablation.
    pub fn supervision_mixes() -> Vec<Self> {
        use Source::*;
        vec![
            Self::new("3d+dense+2d", &[GtParams, Joints3d, Sparse2d, Dense]),
            Self { three_d_fraction: 0.2, ..Self::new("20%3d+dense+2d", &[GtParams, Joints3d, Sparse2d, Dense]) },
            Self::new("dense+2d", &[Sparse2d, Dense]),
            Self::new("2d", &[Sparse2d]),
        ]
    }

    /// Parameter supervision restricted to pose or to shape, alongside dense and sparse 2D
    /// keypoints or sparse 2D keypoints alone.
    pub fn pose_shape_mixes() -> Vec<Self> {
        use Source::*;
        vec![
            Self { use_shape: false, ..Self::new("pose-only+dense+2d", &[GtParams, Sparse2d, Dense]) },
            Self { use_pose: false, ..Self::new("shape-only+dense+2d", &[GtParams, Sparse2d, Dense]) },
            Self { use_shape: false, ..Self::new("pose-only+2d", &[GtParams, Sparse2d]) },
            Self { use_pose: false, ..Self::new("shape-only+2d", &[GtParams, Sparse2d]) },
        ]
    }
}

pub const NOISE_SIGMAS: [f64; 5] = [0.0, 5.0, 10.0, 20.0, 40.0];
pub const KEEP_FRACTIONS: [f64; 4] = [1.0, 0.6, 0.1, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case")]
pub enum Sweep {
    None,
    /// Standard deviation of Gaussian noise on dense `U`, `V`.
    NoiseSigma { values: Vec<f64> },
    /// Fraction of dense keypoints kept.
    KeepFraction { values: Vec<f64> },
}

impl Sweep {
    pub fn noise() -> Self {
        Sweep::NoiseSigma { values: NOISE_SIGMAS.to_vec() }
    }

    pub fn density() -> Self {
        Sweep::KeepFraction { values: KEEP_FRACTIONS.to_vec() }
    }

    pub fn axis(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::NoiseSigma { .. } => "noise_sigma",
            Sweep::KeepFraction { .. } => "keep_fraction",
        }
    }

    fn points(&self) -> Vec<Option<f64>> {
        match self {
            Sweep::None => vec![None],
            Sweep::NoiseSigma { values } | Sweep::KeepFraction { values } => values.iter().map(|&v| Some(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenes: usize,
    pub seed: u64,
    /// Model file; the built-in mini model when absent.
    pub model: Option<PathBuf>,
    pub model_seed: u64,
    pub mixes: Vec<MixSpec>,
    pub sweep: Sweep,
    pub scene: SceneConfig,
    pub fit: FitConfig,
    pub metrics: MetricOptions,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenes: 20,
            seed: 0,
            model: None,
            model_seed: 0,
            mixes: MixSpec::supervision_mixes(),
            sweep: Sweep::None,
            scene: SceneConfig::default(),
            fit: FitConfig::default(),
            metrics: MetricOptions::default(),
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let fail = |m: String| Err(Error::Config(m));
        if self.scenes == 0 {
            return fail("scenes must be positive".into());
        }
        if self.mixes.is_empty() {
            return fail("at least one supervision mix is required".into());
        }
        for (i, m) in self.mixes.iter().enumerate() {
            if m.sources.is_empty() {
                return fail(format!("mix '{}' has no sources", m.name));
            }
            if self.mixes[..i].iter().any(|o| o.name == m.name) {
                return fail(format!("duplicate mix name '{}'", m.name));
            }
            if !(0.0..=1.0).contains(&m.three_d_fraction) {
                return fail(format!("mix '{}': three_d_fraction must lie in [0, 1]", m.name));
            }
        }
        match &self.sweep {
            Sweep::None => {}
            Sweep::NoiseSigma { values } => {
                if values.is_empty() || values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return fail("noise sweep needs a non-empty list of finite sigmas >= 0".into());
                }
            }
            Sweep::KeepFraction { values } => {
                if values.is_empty() || values.iter().any(|f| !(0.0..=1.0).contains(f)) {
                    return fail("density sweep needs a non-empty list of fractions in [0, 1]".into());
                }
            }
        }
        self.fit.validate()
    }
}

/// Outcome of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOutcome {
    pub scene: usize,
    pub seed: u64,
    pub metrics: Option<MetricReport>,
    pub final_loss: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub dense_count: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mix: String,
    pub sweep_axis: String,
    pub sweep_value: Option<f64>,
    pub scenes: Vec<SceneOutcome>,
    /// Fits that failed; excluded from the statistics.
    pub failures: usize,
    pub mean: MetricReport,
    /// Sample standard deviation.
    pub std: MetricReport,
}

fn metric_fields(m: &MetricReport) -> [f64; 4] {
    [m.pve, m.mpjpe, m.pve_t, m.dkd]
}

fn from_fields(f: [f64; 4]) -> MetricReport {
    MetricReport { pve: f[0], mpjpe: f[1], pve_t: f[2], dkd: f[3] }
}

impl ResultRow {
    pub fn from_outcomes(mix: &str, sweep_axis: &str, sweep_value: Option<f64>, mut scenes: Vec<SceneOutcome>) -> Self {
        scenes.sort_by_key(|s| s.scene);
        let ok: Vec<[f64; 4]> = scenes.iter().filter_map(|s| s.metrics.as_ref()).map(metric_fields).collect();
        let n = ok.len() as f64;
        let mut mean = [0.0; 4];
        let mut std = [0.0; 4];
        if !ok.is_empty() {
            for i in 0..4 {
                mean[i] = ok.iter().map(|m| m[i]).sum::<f64>() / n;
                if ok.len() > 1 {
                    std[i] = (ok.iter().map(|m| (m[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                }
            }
        }
        Self {
            mix: mix.into(),
            sweep_axis: sweep_axis.into(),
            sweep_value,
            failures: scenes.len() - ok.len(),
            scenes,
            mean: from_fields(mean),
            std: from_fields(std),
        }
    }

    /// Per-scene PVE, `None` for failed fits.
    pub fn pve(&self) -> Vec<Option<f64>> {
        self.scenes.iter().map(|s| s.metrics.map(|m| m.pve)).collect()
    }
}

const STREAM_SCENE: u64 = 1;
const STREAM_3D: u64 = 2;
const STREAM_PERTURB: u64 = 3;

/// Independent pseudo-random draw for item `index` of a named stream.
fn derived(seed: u64, stream: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(16 * index as u128);
    rng
}

pub fn scene_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    derived(cfg.seed, STREAM_SCENE, index).random()
}

/// The scenes of a suite, identical for every mix and sweep point.
pub fn generate_scenes(model: &BodyModel, cfg: &ExperimentConfig) -> Result<Vec<SyntheticScene>, Error> {
    (0..cfg.scenes).into_par_iter().map(|i| generate_scene(model, scene_seed(cfg, i), &cfg.scene)).collect()
}

/// Restricts a scene's annotations to a mix and applies one sweep perturbation.
pub fn build_annotations(
    scene: &SyntheticScene,
    mix: &MixSpec,
    keep_3d: bool,
    sweep: &Sweep,
    value: Option<f64>,
    perturb_seed: u64,
) -> AnnotationBundle {
    let full = &scene.annotations;
    let take_3d = |s: Source| mix.has(s) && (!s.is_3d() || keep_3d);
    let mut dense = if take_3d(Source::Dense) { full.dense.clone() } else { None };
    if let (Some(d), Some(v)) = (dense.as_mut(), value) {
        *d = match sweep {
            Sweep::None => d.clone(),
            Sweep::NoiseSigma { .. } => add_uv_noise(d, v, perturb_seed),
            Sweep::KeepFraction { .. } => dropout_keypoints(d, v, perturb_seed),
        };
    }
    AnnotationBundle {
        gt_params: if take_3d(Source::GtParams) { full.gt_params.clone() } else { None },
        gt_joints3d: if take_3d(Source::Joints3d) { full.gt_joints3d.clone() } else { None },
        sparse2d: if take_3d(Source::Sparse2d) { full.sparse2d.clone() } else { None },
        dense,
        frame: full.frame,
    }
}

/// Loss weights for one fit: the configured weights, or the balance weights of the sources
/// present, with the mix's pose and shape toggles.
pub fn weights_for(cfg: &FitConfig, mix: &MixSpec, ann: &AnnotationBundle) -> LossWeights {
    cfg.weights.unwrap_or_else(|| LossWeights::for_bundle(ann)).with_toggles(mix.use_pose, mix.use_shape)
}

fn run_one(
    model: &BodyModel,
    atlas: &UvAtlas,
    cfg: &ExperimentConfig,
    scene_index: usize,
    scene: &SyntheticScene,
    mix: &MixSpec,
    value: Option<f64>,
) -> SceneOutcome {
    let keep_3d = derived(cfg.seed, STREAM_3D, scene_index).random_bool(mix.three_d_fraction);
    let perturb_seed = derived(cfg.seed, STREAM_PERTURB, scene_index).random();
    let ann = build_annotations(scene, mix, keep_3d, &cfg.sweep, value, perturb_seed);
    let fit_cfg = FitConfig { weights: Some(weights_for(&cfg.fit, mix, &ann)), ..cfg.fit.clone() };
    let mut outcome = SceneOutcome {
        scene: scene_index,
        seed: scene.seed,
        metrics: None,
        final_loss: None,
        iterations: 0,
        converged: false,
        dense_count: ann.dense.as_ref().map_or(0, Vec::len),
        error: None,
    };
    let result = fit(model, atlas, &ann, &fit_cfg, None).and_then(|r| {
        let m = evaluate_metrics_with(model, &r.params, &scene.gt_params, atlas, &scene.frame, &cfg.metrics)?;
        Ok((r, m))
    });
    match result {
        Ok((r, m)) => {
            outcome.metrics = Some(m);
            outcome.final_loss = r.loss_trace.last().copied();
            outcome.iterations = r.iterations_used;
            outcome.converged = r.converged;
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

/// Fits every (mix, sweep value, scene) combination in parallel and aggregates one row per
/// (mix, sweep value). Output does not depend on scheduling.
pub fn run_suite(model: &BodyModel, atlas: &UvAtlas, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, Error> {
    cfg.validate()?;
    let scenes = generate_scenes(model, cfg)?;
    let points = cfg.sweep.points();
    let jobs: Vec<(usize, usize, usize)> = (0..cfg.mixes.len())
        .flat_map(|m| (0..points.len()).flat_map(move |p| (0..cfg.scenes).map(move |s| (m, p, s))))
        .collect();
    let outcomes: Vec<SceneOutcome> = jobs
        .par_iter()
        .map(|&(m, p, s)| run_one(model, atlas, cfg, s, &scenes[s], &cfg.mixes[m], points[p]))
        .collect();

    let mut rows = Vec::with_capacity(cfg.mixes.len() * points.len());
    let mut chunks = outcomes.chunks(cfg.scenes);
    for mix in &cfg.mixes {
        for &value in &points {
            let chunk = chunks.next().expect("one chunk per (mix, sweep value)");
            rows.push(ResultRow::from_outcomes(&mix.name, cfg.sweep.axis(), value, chunk.to_vec()));
        }
    }
    Ok(rows)
}
