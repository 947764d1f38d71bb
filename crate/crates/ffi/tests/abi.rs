use std::ffi::{c_char, CString};
use std::ptr;

use lumigrasp::fusion::{save_model, train_all, Capture, Model, ModelConfig, SceneGroup, TrainOptions, Variant};
use lumigrasp::synth::{degrade, generate_scene, SceneSpec};
use lumigrasp::{fda, grasp, imageproc, io};
use lumigrasp_ffi::*;

fn last_error() -> String {
    let n = unsafe { lg_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; n + 1];
    unsafe { lg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    buf.iter().take(n).map(|&c| c as u8 as char).collect()
}

fn capture(seed: u64, level: f64) -> Capture {
    let s = degrade(&generate_scene(&SceneSpec::random(seed, 32, 32)).unwrap(), level).unwrap().quantized();
    Capture { image: s.rgb, depth: s.depth, mask: s.mask }
}

fn trained() -> (tempfile::TempDir, Model) {
    let groups: Vec<SceneGroup> = (0..4).map(|s| SceneGroup { captures: vec![capture(s, 0.6), capture(s, 1.0)] }).collect();
    let mut model = Model::new(ModelConfig::default(), Variant::Full, 1).unwrap();
    let opts = TrainOptions { alignment_epochs: 2, structure_epochs: 2, mask_epochs: 2, ..Default::default() };
    train_all(&mut model, &groups, &opts).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_model(&model, dir.path()).unwrap();
    (dir, model)
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lumigrasp.h")).unwrap();
    for sym in [
        "lg_model_load",
        "lg_model_free",
        "lg_model_classes",
        "lg_predict_mask",
        "lg_plan_grasps",
        "lg_enhance_depth",
        "lg_fda_transfer",
        "lg_last_error_message",
        "typedef struct LgModel LgModel",
        "LG_STATUS_OK = 0",
    ] {
        assert!(h.contains(sym), "{sym}");
    }
}

#[test]
fn null_pointers_are_reported() {
    let mut out = [0u8; 4];
    let s = unsafe { lg_predict_mask(ptr::null(), out.as_ptr(), 2, 2, out.as_mut_ptr()) };
    assert_eq!(s, LgStatus::NullPointer);
    assert!(last_error().contains("model"));
    let s = unsafe { lg_model_load(ptr::null(), ptr::null_mut()) };
    assert_eq!(s, LgStatus::NullPointer);
    let s = unsafe { lg_enhance_depth(ptr::null(), 2, 2, ptr::null_mut()) };
    assert_eq!(s, LgStatus::NullPointer);
    let mut len = 7usize;
    let s = unsafe { lg_plan_grasps(ptr::null(), ptr::null(), 2, 2, 0, ptr::null_mut(), 0, &mut len) };
    assert_eq!(s, LgStatus::NullPointer);
    assert_eq!(len, 0);
    unsafe { lg_model_free(ptr::null_mut()) };
    assert_eq!(unsafe { lg_model_classes(ptr::null()) }, 0);
}

#[test]
fn bad_arguments_map_to_codes() {
    let rgb = [0u8; 12];
    let mut out = [0u8; 12];
    assert_eq!(unsafe { lg_fda_transfer(rgb.as_ptr(), rgb.as_ptr(), 0, 2, 0.01, out.as_mut_ptr()) }, LgStatus::InvalidArgument);
    assert_eq!(unsafe { lg_fda_transfer(rgb.as_ptr(), rgb.as_ptr(), 2, 2, 0.7, out.as_mut_ptr()) }, LgStatus::InvalidArgument);
    assert!(!last_error().is_empty());

    let missing = CString::new("/nonexistent/model").unwrap();
    let mut m: *mut LgModel = ptr::null_mut();
    assert_eq!(unsafe { lg_model_load(missing.as_ptr(), &mut m) }, LgStatus::DataError);
    assert!(m.is_null());
}

#[test]
fn error_message_truncates_and_clears() {
    let mut out = [0u8; 4];
    unsafe { lg_predict_mask(ptr::null(), out.as_ptr(), 2, 2, out.as_mut_ptr()) };
    let full = last_error();
    let mut buf = [1 as c_char; 4];
    let n = unsafe { lg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full.len());
    assert_eq!(buf[3], 0);
    assert_eq!(buf[..3].iter().map(|&c| c as u8 as char).collect::<String>(), full[..3]);

    let d = [1000u16; 4];
    let mut e = [0u16; 4];
    assert_eq!(unsafe { lg_enhance_depth(d.as_ptr(), 2, 2, e.as_mut_ptr()) }, LgStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn model_round_trip_matches_library() {
    let (dir, model) = trained();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut m: *mut LgModel = ptr::null_mut();
    assert_eq!(unsafe { lg_model_load(path.as_ptr(), &mut m) }, LgStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { lg_model_classes(m) }, model.config.classes as u32);

    let c = capture(9, 0.7);
    let rgb = io::rgb_to_bytes(&c.image);
    let mut labels = vec![0u8; 32 * 32];
    assert_eq!(unsafe { lg_predict_mask(m, rgb.as_ptr(), 32, 32, labels.as_mut_ptr()) }, LgStatus::Ok);
    assert_eq!(labels, model.predict_mask(&c.image).unwrap().labels);

    assert!(labels.iter().all(|&l| (l as usize) < model.config.classes));
    unsafe { lg_model_free(m) };
}

#[test]
fn grasp_plan_matches_library() {
    let c = capture(3, 1.0);
    let mm = io::depth_to_mm(&c.depth);
    let want = grasp::plan_grasp_sequence(&c.mask, &io::depth_from_mm(32, 32, &mm).unwrap(), None).unwrap();
    assert!(!want.points.is_empty());

    let mut len = 0usize;
    let s = unsafe { lg_plan_grasps(c.mask.labels.as_ptr(), mm.as_ptr(), 32, 32, 0, ptr::null_mut(), 0, &mut len) };
    assert_eq!(s, LgStatus::BufferTooSmall);
    assert_eq!(len, want.points.len());

    let mut pts = vec![LgGraspPoint::default(); len];
    let s = unsafe { lg_plan_grasps(c.mask.labels.as_ptr(), mm.as_ptr(), 32, 32, 0, pts.as_mut_ptr(), pts.len(), &mut len) };
    assert_eq!(s, LgStatus::Ok);
    for (a, b) in pts.iter().zip(&want.points) {
        assert_eq!((a.class_id, a.row as usize, a.col as usize, a.depth_m), (b.class_id, b.row, b.col, b.depth_m));
    }

    let want2 = grasp::plan_grasp_sequence(&c.mask, &io::depth_from_mm(32, 32, &mm).unwrap(), Some(2)).unwrap();
    let mut pts = vec![LgGraspPoint::default(); 64];
    let s = unsafe { lg_plan_grasps(c.mask.labels.as_ptr(), mm.as_ptr(), 32, 32, 2, pts.as_mut_ptr(), pts.len(), &mut len) };
    assert_eq!(s, LgStatus::Ok);
    assert_eq!(len, want2.points.len());
}

#[test]
fn depth_and_fda_match_library() {
    let c = capture(4, 0.8);
    let mm = io::depth_to_mm(&c.depth);
    let mut out = vec![0u16; mm.len()];
    assert_eq!(unsafe { lg_enhance_depth(mm.as_ptr(), 32, 32, out.as_mut_ptr()) }, LgStatus::Ok);
    let d = io::depth_from_mm(32, 32, &mm).unwrap();
    let want = imageproc::enhance_depth(&d, imageproc::BilateralParams::default()).unwrap();
    assert_eq!(out, io::depth_to_mm(&want));

    let t = capture(5, 0.6);
    let (src, tgt) = (io::rgb_to_bytes(&c.image), io::rgb_to_bytes(&t.image));
    let mut rgb = vec![0u8; src.len()];
    assert_eq!(unsafe { lg_fda_transfer(src.as_ptr(), tgt.as_ptr(), 32, 32, 0.05, rgb.as_mut_ptr()) }, LgStatus::Ok);
    assert_eq!(rgb, io::rgb_to_bytes(&fda::fda_transfer(&c.image, &t.image, 0.05).unwrap()));
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lumigrasp.h"))
        .output()
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
