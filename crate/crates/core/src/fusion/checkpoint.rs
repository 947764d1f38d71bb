use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::attention::AttentionProjections;
use super::head::MaskHead;
use super::layers::{Linear, PatchDecoder, PatchEncoder};
use super::model::{Model, ModelConfig, Variant};
use crate::bytes::{Reader, Writer};
use crate::error::{Error, Result};
use crate::memory::ResponseLibrary;
use crate::plc::CurveBank;

pub const MODEL_FILE: &str = "model.gal";
pub const PLC_FILE: &str = "plc.bin";
pub const LIB_L_FILE: &str = "m_l.rlb";
pub const LIB_S_FILE: &str = "m_s.rlb";
const VERSION: u32 = 1;

fn put_matrix(w: &mut Writer, m: &Array2<f64>) {
    w.u32(m.nrows() as u32);
    w.u32(m.ncols() as u32);
    w.f32s(m.iter().copied());
}

fn get_matrix(r: &mut Reader<'_>) -> Result<Array2<f64>> {
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let n = rows.checked_mul(cols).ok_or_else(|| Error::Format("matrix size overflow".into()))?;
    let v = r.f32s(n)?;
    Ok(Array2::from_shape_vec((rows, cols), v).expect("shape checked"))
}

fn put_linear(w: &mut Writer, tag: &str, l: &Linear) {
    w.str(tag);
    put_matrix(w, &l.weight);
    w.f32s(l.bias.iter().copied());
}

fn get_linear(r: &mut Reader<'_>, tag: &str) -> Result<Linear> {
    expect_tag(r, tag)?;
    let weight = get_matrix(r)?;
    let bias = Array1::from(r.f32s(weight.ncols())?);
    Ok(Linear { weight, bias })
}

fn put_attention(w: &mut Writer, tag: &str, a: &AttentionProjections) {
    w.str(tag);
    for m in [&a.wq, &a.wk, &a.wv] {
        put_matrix(w, m);
    }
}

fn get_attention(r: &mut Reader<'_>, tag: &str, c: usize) -> Result<AttentionProjections> {
    expect_tag(r, tag)?;
    let (wq, wk, wv) = (get_matrix(r)?, get_matrix(r)?, get_matrix(r)?);
    if [&wq, &wk, &wv].iter().any(|m| m.dim() != (c, c)) {
        return Err(Error::Format(format!("section {tag}: projections must be {c}x{c}")));
    }
    Ok(AttentionProjections { wq, wk, wv })
}

fn expect_tag(r: &mut Reader<'_>, tag: &str) -> Result<()> {
    let got = r.str()?;
    if got != tag {
        return Err(Error::Format(format!("expected section {tag:?}, found {got:?}")));
    }
    Ok(())
}

fn check_linear(l: &Linear, inputs: usize, outputs: usize, tag: &str) -> Result<()> {
    if l.weight.dim() != (inputs, outputs) {
        return Err(Error::Format(format!(
            "section {tag}: expected {inputs}x{outputs} weights, found {:?}",
            l.weight.dim()
        )));
    }
    Ok(())
}

/// Serialise the network weights (libraries and curve bank are referenced).
pub fn model_to_bytes(m: &Model) -> Vec<u8> {
    let c = &m.config;
    let mut w = Writer::new();
    w.magic(b"GAL1");
    w.u32(VERSION);
    w.u32(m.variant.code());
    for v in [c.patch, c.channels, c.classes, c.num_curves, c.points] {
        w.u32(v as u32);
    }
    w.f64(c.tau);
    w.f64(c.alpha);
    put_linear(&mut w, "enc_rgb", &m.enc_rgb.linear);
    put_linear(&mut w, "dec_rgb", &m.dec_rgb.linear);
    put_linear(&mut w, "enc_depth", &m.enc_depth.linear);
    put_linear(&mut w, "dec_structure", &m.dec_structure.linear);
    put_linear(&mut w, "enc_structure", &m.enc_structure.linear);
    put_attention(&mut w, "attn_depth", &m.attn_depth);
    put_attention(&mut w, "attn_lum", &m.attn_lum);
    put_attention(&mut w, "attn_str", &m.attn_str);
    put_linear(&mut w, "head_hidden", &m.head.hidden);
    put_linear(&mut w, "head_out", &m.head.out);
    for f in [PLC_FILE, LIB_L_FILE, LIB_S_FILE] {
        w.str(f);
    }
    w.buf
}

/// Weights plus the file names of the bank and libraries.
pub struct ModelFile {
    pub model: Model,
    pub refs: [String; 3],
}

/// Parse `model.gal`; the bank and libraries are left at fresh placeholders
/// until [`load_model`] fills them from the referenced files.
pub fn model_from_bytes(data: &[u8]) -> Result<ModelFile> {
    let mut r = Reader::new(data);
    r.expect_magic(b"GAL1")?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let variant = Variant::from_code(r.u32()?)?;
    let mut dims = [0usize; 5];
    for d in dims.iter_mut() {
        *d = r.u32()? as usize;
    }
    let config = ModelConfig {
        patch: dims[0],
        channels: dims[1],
        classes: dims[2],
        num_curves: dims[3],
        points: dims[4],
        tau: r.f64()?,
        alpha: r.f64()?,
    };
    config.validate().map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let (p, c, k) = (config.patch, config.channels, config.classes);
    let enc_rgb = get_linear(&mut r, "enc_rgb")?;
    check_linear(&enc_rgb, p * p * 3, c, "enc_rgb")?;
    let dec_rgb = get_linear(&mut r, "dec_rgb")?;
    check_linear(&dec_rgb, c, p * p * 3, "dec_rgb")?;
    let enc_depth = get_linear(&mut r, "enc_depth")?;
    check_linear(&enc_depth, p * p, c, "enc_depth")?;
    let dec_structure = get_linear(&mut r, "dec_structure")?;
    check_linear(&dec_structure, c, p * p, "dec_structure")?;
    let enc_structure = get_linear(&mut r, "enc_structure")?;
    check_linear(&enc_structure, p * p, c, "enc_structure")?;
    let attn_depth = get_attention(&mut r, "attn_depth", c)?;
    let attn_lum = get_attention(&mut r, "attn_lum", c)?;
    let attn_str = get_attention(&mut r, "attn_str", c)?;
    let hidden = get_linear(&mut r, "head_hidden")?;
    check_linear(&hidden, 2 * c, c, "head_hidden")?;
    let out = get_linear(&mut r, "head_out")?;
    check_linear(&out, c, k, "head_out")?;
    let refs = [r.str()?, r.str()?, r.str()?];
    r.finish()?;
    let model = Model {
        config,
        variant,
        bank: CurveBank::from_params(config.num_curves, config.points, vec![0.0; config.num_curves * config.points], config.tau)?,
        enc_rgb: PatchEncoder { patch: p, channels_in: 3, linear: enc_rgb },
        dec_rgb: PatchDecoder { patch: p, channels_out: 3, linear: dec_rgb },
        enc_depth: PatchEncoder { patch: p, channels_in: 1, linear: enc_depth },
        dec_structure: PatchDecoder { patch: p, channels_out: 1, linear: dec_structure },
        enc_structure: PatchEncoder { patch: p, channels_in: 1, linear: enc_structure },
        attn_depth,
        attn_lum,
        attn_str,
        head: MaskHead { hidden, out },
        lib_l: ResponseLibrary::new(config.num_curves, c, config.alpha)?,
        lib_s: ResponseLibrary::new(config.num_curves, c, config.alpha)?,
    };
    Ok(ModelFile { model, refs })
}

fn safe_ref(name: &str) -> Result<&str> {
    let p = Path::new(name);
    if p.components().count() != 1 || p.is_absolute() || name == ".." {
        return Err(Error::Format(format!("checkpoint reference {name:?} must be a plain file name")));
    }
    Ok(name)
}

/// Write `model.gal`, `plc.bin`, `m_l.rlb` and `m_s.rlb` into `dir`.
pub fn save_model(m: &Model, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MODEL_FILE), model_to_bytes(m))?;
    m.bank.save(&dir.join(PLC_FILE))?;
    m.lib_l.save(&dir.join(LIB_L_FILE))?;
    m.lib_s.save(&dir.join(LIB_S_FILE))?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<Model> {
    let ModelFile { mut model, refs } = model_from_bytes(&fs::read(dir.join(MODEL_FILE))?)?;
    let c = model.config;
    let bank = CurveBank::load(&dir.join(safe_ref(&refs[0])?))?;
    let lib_l = ResponseLibrary::load(&dir.join(safe_ref(&refs[1])?))?;
    let lib_s = ResponseLibrary::load(&dir.join(safe_ref(&refs[2])?))?;
    if (bank.num_curves(), bank.points()) != (c.num_curves, c.points) {
        return Err(Error::Format("curve bank shape disagrees with model.gal".into()));
    }
    for lib in [&lib_l, &lib_s] {
        if (lib.num_slots(), lib.dim()) != (c.num_curves, c.channels) {
            return Err(Error::Format("library shape disagrees with model.gal".into()));
        }
    }
    model.bank = bank;
    model.lib_l = lib_l;
    model.lib_s = lib_s;
    Ok(model)
}
