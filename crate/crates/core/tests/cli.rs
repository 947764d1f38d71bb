mod common;

use common::rng;
use lumigrasp::cli::predict_scene;
use lumigrasp::config::Config;
use lumigrasp::eval::{Evaluator, BANDS};
use lumigrasp::fusion::{load_model, save_model, LIB_L_FILE, LIB_S_FILE, MODEL_FILE, PLC_FILE};
use lumigrasp::grasp::GraspPlan;
use lumigrasp::synth::level_dir;
use lumigrasp::{io, DepthMap, SemanticMask};
use rand::Rng;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = "\
synth_scenes = 5
synth_width = 32
synth_height = 32
synth_levels = [0.55, 0.85, 1.0]
";

fn epochs(n: usize) -> String {
    format!("alignment_epochs = {n}\nstructure_epochs = {n}\nmask_epochs = {n}\n")
}

const MODEL_FILES: [&str; 4] = [MODEL_FILE, PLC_FILE, LIB_L_FILE, LIB_S_FILE];

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lumigrasp")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Corpus plus a model trained on it, both under `dir`.
fn trained(dir: &Path, n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let cfg = write_config(dir, &format!("{TINY}{}", epochs(n)));
    let corpus = dir.join("corpus");
    let model = dir.join("model");
    ok(&["synth", "--config", s(&cfg), "--out", s(&corpus), "--seed", "7"]);
    ok(&["train", "--config", s(&cfg), "--corpus", s(&corpus), "--out", s(&model), "--seed", "1"]);
    (cfg, corpus, model)
}

fn count_triplets(root: &Path) -> usize {
    let mut n = 0;
    for seed in fs::read_dir(root).unwrap() {
        for level in fs::read_dir(seed.unwrap().path()).unwrap() {
            if level.unwrap().path().join("meta.json").is_file() {
                n += 1;
            }
        }
    }
    n
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["synth", "--config", s(&cfg), "--out", s(&a), "--seed", "3"]);
    ok(&["synth", "--config", s(&cfg), "--out", s(&b), "--seed", "3"]);
    assert_eq!(count_triplets(&a), 15);
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
    assert!(a.join("3").join(level_dir(0.55)).join("rgb.png").is_file());
}

#[test]
fn bad_config_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    for (text, key) in [
        ("no_such_key = 1\n", "no_such_key"),
        ("tau = -1.0\n", "tau"),
        ("alpha = 1.5\n", "alpha"),
        ("variant = \"deep\"\n", "variant"),
        ("classes = 1\n", "classes"),
        ("patch = 0\n", "patch"),
        ("canny_low = 0.9\ncanny_high = 0.5\n", "canny_low"),
        ("beta = 0.7\n", "beta"),
        ("lr = -0.1\n", "lr"),
    ] {
        let cfg = write_config(dir.path(), text);
        let r = bin(&["synth", "--config", s(&cfg), "--out", s(&out), "--seed", "1"]);
        assert_ne!(r.status.code(), Some(0), "{text}");
        let err = String::from_utf8_lossy(&r.stderr);
        assert!(err.contains(key), "{key} missing from: {err}");
    }
}

#[test]
fn seed_is_mandatory() {
    let dir = tempfile::tempdir().unwrap();
    let r = bin(&["synth", "--out", s(&dir.path().join("c"))]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn tiny_training_writes_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, model) = trained(dir.path(), 5);
    for f in MODEL_FILES.iter().chain(["train_log.json"].iter()) {
        assert!(model.join(f).is_file(), "{f}");
    }
    let log: serde_json::Value = serde_json::from_str(&fs::read_to_string(model.join("train_log.json")).unwrap()).unwrap();
    for stage in ["alignment", "structure", "mask"] {
        let c: Vec<f64> = log[stage].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert_eq!(c.len(), 5);
        assert!(c[4] < c[0], "{stage}: {c:?}");
    }
}

#[test]
fn untrained_checkpoint_cannot_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (_, corpus, model) = trained(dir.path(), 0);
    let m = load_model(&model).unwrap();
    assert!(m.lib_l.is_empty() && m.lib_s.is_empty());
    let scene = corpus.join("7").join(level_dir(1.0));
    let r = bin(&[
        "predict",
        "--model",
        s(&model),
        "--image",
        s(&scene.join("rgb.png")),
        "--depth",
        s(&scene.join("depth.pgm")),
        "--out",
        s(&dir.path().join("pred")),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, corpus, model) = trained(dir.path(), 5);
    let copy = dir.path().join("copy");
    save_model(&load_model(&model).unwrap(), &copy).unwrap();
    for f in MODEL_FILES {
        assert_eq!(fs::read(model.join(f)).unwrap(), fs::read(copy.join(f)).unwrap(), "{f}");
    }
    // resuming with no further epochs reproduces the checkpoint
    let cfg0 = dir.path().join("zero.toml");
    fs::write(&cfg0, format!("{TINY}{}", epochs(0))).unwrap();
    let resumed = dir.path().join("resumed");
    ok(&["train", "--config", s(&cfg0), "--corpus", s(&corpus), "--out", s(&resumed), "--seed", "1", "--resume", s(&model)]);
    for f in MODEL_FILES {
        assert_eq!(fs::read(model.join(f)).unwrap(), fs::read(resumed.join(f)).unwrap(), "{f}");
    }
    // and resuming with epochs continues from the loaded state
    let more = dir.path().join("more");
    ok(&["train", "--config", s(&cfg), "--corpus", s(&corpus), "--out", s(&more), "--seed", "1", "--resume", s(&model)]);
    let again = dir.path().join("again");
    ok(&["train", "--config", s(&cfg), "--corpus", s(&corpus), "--out", s(&again), "--seed", "1", "--resume", s(&model)]);
    assert_ne!(fs::read(model.join(MODEL_FILE)).unwrap(), fs::read(more.join(MODEL_FILE)).unwrap());
    assert_eq!(tree_bytes(&more), tree_bytes(&again));
}

#[test]
fn predict_matches_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg_path, corpus, model) = trained(dir.path(), 5);
    let scene = corpus.join("9").join(level_dir(0.55));
    let (img_p, depth_p) = (scene.join("rgb.png"), scene.join("depth.pgm"));
    let (o1, o2) = (dir.path().join("p1"), dir.path().join("p2"));
    for o in [&o1, &o2] {
        ok(&["predict", "--config", s(&cfg_path), "--model", s(&model), "--image", s(&img_p), "--depth", s(&depth_p), "--out", s(o)]);
    }
    assert_eq!(tree_bytes(&o1), tree_bytes(&o2));
    let cfg = Config::load(&cfg_path).unwrap();
    let m = load_model(&model).unwrap();
    let (mask, plan) = predict_scene(&m, &cfg, &io::read_rgb_png(&img_p).unwrap(), &io::read_depth_pgm(&depth_p).unwrap()).unwrap();
    assert_eq!(io::read_mask_png(&o1.join("mask.png")).unwrap(), mask);
    assert_eq!(fs::read_to_string(o1.join("grasps.json")).unwrap(), plan.to_json() + "\n");

    let r = bin(&["predict", "--model", s(&model), "--image", s(&img_p), "--depth", s(&dir.path().join("nope.pgm")), "--out", s(&o1)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error:"));
}

#[test]
fn eval_reports_bands_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, corpus, model) = trained(dir.path(), 5);
    let a = ok(&["eval", "--config", s(&cfg), "--model", s(&model), "--corpus", s(&corpus)]).stdout;
    let b = ok(&["eval", "--config", s(&cfg), "--model", s(&model), "--corpus", s(&corpus)]).stdout;
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    let keys: Vec<&String> = v["bands"].as_object().unwrap().keys().collect();
    assert_eq!(keys, BANDS.to_vec());
    let miou = v["miou"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&miou));
}

#[test]
fn inspect_dumps_library_stats() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, model) = trained(dir.path(), 5);
    let v: serde_json::Value = serde_json::from_slice(&ok(&["inspect", "--model", s(&model)]).stdout).unwrap();
    assert_eq!(v["curve_bank"]["num_curves"], 12);
    assert!(v["m_l"]["initialized"].as_u64().unwrap() >= 1);
    assert_eq!(v["variant"], "full");
}

#[test]
fn enhance_depth_and_fda_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let corpus = dir.path().join("corpus");
    ok(&["synth", "--config", s(&cfg), "--out", s(&corpus), "--seed", "2"]);
    let (a, b) = (corpus.join("2").join(level_dir(1.0)), corpus.join("3").join(level_dir(0.55)));
    let out = dir.path().join("e.pgm");
    ok(&["enhance-depth", "--input", s(&a.join("depth.pgm")), "--output", s(&out)]);
    let want = lumigrasp::imageproc::enhance_depth(&io::read_depth_pgm(&a.join("depth.pgm")).unwrap(), Default::default()).unwrap();
    assert_eq!(io::read_depth_pgm(&out).unwrap(), want.quantized());
    let out = dir.path().join("f.png");
    ok(&["fda", "--source", s(&a.join("rgb.png")), "--target", s(&b.join("rgb.png")), "--beta", "0.05", "--out", s(&out)]);
    let want = lumigrasp::fda::fda_transfer(&io::read_rgb_png(&a.join("rgb.png")).unwrap(), &io::read_rgb_png(&b.join("rgb.png")).unwrap(), 0.05).unwrap();
    assert_eq!(io::read_rgb_png(&out).unwrap(), want.quantized());
}

fn random_mask(r: &mut impl Rng, n: usize, classes: u8) -> SemanticMask {
    SemanticMask::new(n, n, (0..n * n).map(|_| r.random_range(0..classes)).collect()).unwrap()
}

#[test]
fn perfect_and_random_stubs() {
    let classes = 9;
    let mut r = rng(4);
    let depth = DepthMap::new(32, 32, vec![0.8; 1024]).unwrap();
    let mut perfect = Evaluator::new(classes);
    let mut random = Evaluator::new(classes);
    for i in 0..50 {
        let truth = random_mask(&mut r, 32, classes as u8);
        let luma = 15.0 + 30.0 * (i % 4) as f64;
        perfect.add(luma, &truth, &truth, &GraspPlan { points: vec![] }, &depth).unwrap();
        random.add(luma, &random_mask(&mut r, 32, classes as u8), &truth, &GraspPlan { points: vec![] }, &depth).unwrap();
    }
    let p = perfect.finish();
    assert_eq!(p.miou, Some(1.0));
    assert_eq!(p.bands.keys().map(String::as_str).collect::<Vec<_>>(), BANDS.to_vec());
    // uniform prediction against uniform truth: IoU = (1/K^2) / (2/K - 1/K^2)
    let want = 1.0 / (2.0 * classes as f64 - 1.0);
    let got = random.finish().miou.unwrap();
    assert!((got - want).abs() < 0.01, "{got} vs {want}");
}
