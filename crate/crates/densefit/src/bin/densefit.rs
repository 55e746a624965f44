use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use densefit::densefit_core::{
    evaluate_metrics, fit, make_mini_model, refine_iuv, AnnotationBundle, BodyModel, FitConfig, FullParams,
    KeypointPartTable, MetricReport, SparseKeypointSet, UvAtlas,
};
use densefit::io::{load_model, read_iuv, read_json, save_model, write_iuv, write_json};
use densefit::scene::render_scene;
use densefit::suite::generate_scenes;
use densefit::{emit_report, load_report, run_suite, ExperimentConfig, SyntheticScene, Sweep};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "densefit", version, about = "Body-model fitting from sparse and dense correspondences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in mini model as a model file.
    MakeModel {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate synthetic scenes: one JSON file and one IUV raster per scene.
    MakeData {
        /// Model file; the built-in mini model when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one annotation file (a bundle or a generated scene).
    Fit {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        annotations: PathBuf,
        /// Fit configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the supervision ablation described by an experiment config.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ablation with Gaussian noise on dense U, V.
    NoiseSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ablation with random dropout of dense keypoints.
    DensitySweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit CSV and charts from a results.json.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove wrong-part regions under sparse keypoints from an IUV raster.
    Refine {
        #[arg(long)]
        iuv: PathBuf,
        /// Sparse keypoint JSON.
        #[arg(long)]
        keypoints: PathBuf,
        /// Keypoint-to-part table JSON; derived from the model's kinematic tree when omitted.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn model_or_mini(path: Option<&Path>, seed: u64) -> Result<BodyModel> {
    match path {
        Some(p) => load_model(p).with_context(|| format!("loading model {}", p.display())),
        None => Ok(make_mini_model(seed)),
    }
}

#[derive(Serialize)]
struct TraceSummary {
    initial: f64,
    last: f64,
    len: usize,
}

#[derive(Serialize)]
struct FitOutput {
    params: FullParams,
    metrics: Option<MetricReport>,
    iterations_used: usize,
    converged: bool,
    trace: TraceSummary,
    breakdown: densefit::densefit_core::LossBreakdown,
}

fn run_fit(model: Option<&Path>, annotations: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let model = model_or_mini(model, 0)?;
    let atlas = UvAtlas::build(&model)?;
    let value: serde_json::Value = read_json(annotations)?;
    let (ann, gt): (AnnotationBundle, Option<FullParams>) = if value.get("annotations").is_some() {
        let scene: SyntheticScene = serde_json::from_value(value).context("parsing scene")?;
        (scene.annotations, Some(scene.gt_params))
    } else {
        (serde_json::from_value(value).context("parsing annotation bundle")?, None)
    };
    let cfg: FitConfig = match config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    let r = fit(&model, &atlas, &ann, &cfg, None)?;
    let metrics = gt.map(|gt| evaluate_metrics(&model, &r.params, &gt, &atlas, &ann.frame)).transpose()?;
    let output = FitOutput {
        trace: TraceSummary { initial: r.loss_trace[0], last: *r.loss_trace.last().unwrap(), len: r.loss_trace.len() },
        params: r.params,
        metrics,
        iterations_used: r.iterations_used,
        converged: r.converged,
        breakdown: r.breakdown,
    };
    write_json(out, &output)?;
    Ok(())
}

fn run_experiment(config: Option<&Path>, out: Option<PathBuf>, sweep: Option<Sweep>) -> Result<()> {
    let mut cfg: ExperimentConfig = match config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(default_sweep) = sweep {
        if std::mem::discriminant(&cfg.sweep) != std::mem::discriminant(&default_sweep) {
            cfg.sweep = default_sweep;
        }
    }
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    let model = model_or_mini(cfg.model.as_deref(), cfg.model_seed)?;
    let atlas = UvAtlas::build(&model)?;
    let rows = run_suite(&model, &atlas, &cfg)?;
    let files = emit_report(&rows, &cfg.out_dir)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeModel { out, seed } => save_model(&make_mini_model(seed), &out)?,
        Command::MakeData { model, scenes, seed, out } => {
            let model = model_or_mini(model.as_deref(), 0)?;
            let cfg = ExperimentConfig { scenes, seed, ..ExperimentConfig::default() };
            cfg.validate()?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (i, scene) in generate_scenes(&model, &cfg)?.iter().enumerate() {
                write_json(&out.join(format!("scene_{i:04}.json")), scene)?;
                write_iuv(&out.join(format!("scene_{i:04}.iuvr")), &render_scene(&model, scene)?)?;
            }
        }
        Command::Fit { model, annotations, config, out } => {
            run_fit(model.as_deref(), &annotations, config.as_deref(), &out)?
        }
        Command::Ablate { config, out } => run_experiment(config.as_deref(), out, None)?,
        Command::NoiseSweep { config, out } => run_experiment(config.as_deref(), out, Some(Sweep::noise()))?,
        Command::DensitySweep { config, out } => run_experiment(config.as_deref(), out, Some(Sweep::density()))?,
        Command::Report { input, out } => {
            let report = load_report(&input)?;
            if report.rows.is_empty() {
                bail!("{} holds no rows", input.display());
            }
            emit_report(&report.rows, &out)?;
        }
        Command::Refine { iuv, keypoints, table, model, out } => {
            let map = read_iuv(&iuv)?;
            let kps: SparseKeypointSet = read_json(&keypoints)?;
            let table = match table {
                Some(p) => read_json(&p)?,
                None => KeypointPartTable::from_kinematic_tree(model_or_mini(model.as_deref(), 0)?.parents()),
            };
            write_iuv(&out, &refine_iuv(&map, &kps, &table)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let body = serde_json::json!({ "error": { "message": e.to_string(), "causes": chain } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
