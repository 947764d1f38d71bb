//! Subcommand front end. Every command is a thin wrapper over library calls.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::config::Config;
use crate::error::Result;
use crate::eval::{Evaluator, Metrics};
use crate::fda::fda_transfer;
use crate::fusion::{load_model, save_model, train_all, Capture, Model, SceneGroup, TrainLog};
use crate::grasp::{plan_grasp_sequence, GraspPlan};
use crate::imageproc::{enhance_depth, DepthMap, RgbImage, SemanticMask};
use crate::io;
use crate::synth::{make_corpus, read_corpus};

#[derive(Parser, Debug)]
#[command(name = "lumigrasp", version, about = "Illumination-adaptive garment segmentation and grasp planning")]
pub struct Cli {
    /// Flat TOML config; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic multi-illumination corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Train alignment, structure and mask stages; writes a model directory.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Continue from an existing model directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Predict a mask and grasp sequence for one RGB/depth pair.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// mIoU / mGSR over a corpus, overall and by luminance band.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Write metrics here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bilateral smoothing and hole filling of a 16-bit PGM depth map.
    EnhanceDepth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Low-frequency amplitude transfer from a style image.
    Fda {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Overrides the config value.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump curve bank and library statistics as JSON.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// Scene seeds of a synth run.
pub fn scene_seeds(seed: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| seed.wrapping_add(i)).collect()
}

pub fn cmd_synth(cfg: &Config, out: &Path, seed: u64) -> Result<usize> {
    let dirs = make_corpus(out, &scene_seeds(seed, cfg.synth_scenes), &cfg.synth_levels, cfg.synth_width, cfg.synth_height)?;
    Ok(dirs.len())
}

/// Corpus scenes as training groups, one per scene seed.
pub fn load_groups(corpus: &Path) -> Result<Vec<SceneGroup>> {
    Ok(read_corpus(corpus)?
        .into_iter()
        .map(|(_, scenes)| SceneGroup {
            captures: scenes.into_iter().map(|s| Capture { image: s.rgb, depth: s.depth, mask: s.mask }).collect(),
        })
        .collect())
}

pub fn cmd_train(cfg: &Config, corpus: &Path, out: &Path, seed: u64, resume: Option<&Path>) -> Result<TrainLog> {
    let groups = load_groups(corpus)?;
    let mut model = match resume {
        Some(dir) => load_model(dir)?,
        None => Model::new(cfg.model_config(), cfg.variant()?, seed)?,
    };
    let log = train_all(&mut model, &groups, &cfg.train_options(seed))?;
    save_model(&model, out)?;
    fs::write(out.join("train_log.json"), serde_json::to_string_pretty(&log)? + "\n")?;
    info!("model written to {}", out.display());
    Ok(log)
}

/// Library-level prediction path used by `predict` and `eval`.
pub fn predict_scene(model: &Model, cfg: &Config, img: &RgbImage, depth: &DepthMap) -> Result<(SemanticMask, GraspPlan)> {
    let mask = model.predict_mask(img)?;
    let enhanced = enhance_depth(depth, cfg.bilateral())?;
    let plan = plan_grasp_sequence(&mask, &enhanced, cfg.grasp_k())?;
    Ok((mask, plan))
}

pub fn cmd_predict(cfg: &Config, model_dir: &Path, image: &Path, depth: &Path, out: &Path) -> Result<()> {
    let model = load_model(model_dir)?;
    let img = io::read_rgb_png(image)?;
    let d = io::read_depth_pgm(depth)?;
    let (mask, plan) = predict_scene(&model, cfg, &img, &d)?;
    fs::create_dir_all(out)?;
    io::write_mask_png(&mask, &out.join("mask.png"))?;
    fs::write(out.join("grasps.json"), plan.to_json() + "\n")?;
    Ok(())
}

pub fn evaluate(model: &Model, cfg: &Config, corpus: &Path) -> Result<Metrics> {
    let mut ev = Evaluator::new(model.config.classes);
    for (_, scenes) in read_corpus(corpus)? {
        for s in scenes {
            let (mask, plan) = predict_scene(model, cfg, &s.rgb, &s.depth)?;
            ev.add(s.mean_luma, &mask, &s.mask, &plan, &s.depth)?;
        }
    }
    Ok(ev.finish())
}

pub fn cmd_eval(cfg: &Config, model_dir: &Path, corpus: &Path) -> Result<String> {
    let model = load_model(model_dir)?;
    Ok(serde_json::to_string_pretty(&evaluate(&model, cfg, corpus)?)? + "\n")
}

pub fn cmd_enhance_depth(cfg: &Config, input: &Path, output: &Path) -> Result<()> {
    let d = io::read_depth_pgm(input)?;
    io::write_depth_pgm(&enhance_depth(&d, cfg.bilateral())?, output)
}

pub fn cmd_fda(cfg: &Config, source: &Path, target: &Path, beta: Option<f64>, out: &Path) -> Result<()> {
    let s = io::read_rgb_png(source)?;
    let t = io::read_rgb_png(target)?;
    io::write_rgb_png(&fda_transfer(&s, &t, beta.unwrap_or(cfg.beta))?, out)
}

pub fn inspect_json(model: &Model) -> serde_json::Value {
    let lib = |l: &crate::memory::ResponseLibrary| {
        json!({
            "slots": l.num_slots(),
            "dim": l.dim(),
            "alpha": l.alpha(),
            "initialized": l.initialized_count(),
            "slot_norms": l.slot_norms(),
        })
    };
    let c = &model.config;
    json!({
        "variant": model.variant.name(),
        "patch": c.patch,
        "channels": c.channels,
        "classes": c.classes,
        "curve_bank": {
            "num_curves": model.bank.num_curves(),
            "points": model.bank.points(),
            "tau": model.bank.tau,
            "curves": model.bank.curves(),
        },
        "m_l": lib(&model.lib_l),
        "m_s": lib(&model.lib_s),
    })
}

pub fn cmd_inspect(model_dir: &Path) -> Result<String> {
    Ok(serde_json::to_string_pretty(&inspect_json(&load_model(model_dir)?))? + "\n")
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth { out, seed } => {
            let n = cmd_synth(&cfg, out, *seed)?;
            info!("wrote {n} scenes to {}", out.display());
        }
        Command::Train { corpus, out, seed, resume } => {
            cmd_train(&cfg, corpus, out, *seed, resume.as_deref())?;
        }
        Command::Predict { model, image, depth, out } => cmd_predict(&cfg, model, image, depth, out)?,
        Command::Eval { model, corpus, out } => {
            let text = cmd_eval(&cfg, model, corpus)?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Command::EnhanceDepth { input, output } => cmd_enhance_depth(&cfg, input, output)?,
        Command::Fda { source, target, beta, out } => cmd_fda(&cfg, source, target, *beta, out)?,
        Command::Inspect { model } => print!("{}", cmd_inspect(model)?),
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

