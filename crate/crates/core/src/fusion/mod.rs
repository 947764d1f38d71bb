//! Patch-linear toy network: luminance alignment, depth structure modelling
//! and library-enhanced mask prediction.

mod attention;
mod checkpoint;
mod head;
mod layers;
mod model;
mod train;

pub use attention::{
    attention_backward, attention_rows, cross_attention, cross_attention_cached, AttentionBackward, AttentionCache,
    AttentionGrad, AttentionProjections, Query,
};
pub use checkpoint::{load_model, model_from_bytes, model_to_bytes, save_model, ModelFile, LIB_L_FILE, LIB_S_FILE, MODEL_FILE, PLC_FILE};
pub use head::{HeadCache, MaskHead, MaskHeadGrad};
pub use layers::{col2im, im2col, FeatureMap, Linear, LinearGrad, PatchDecoder, PatchEncoder, PatchGrid, PatchSource};
pub use model::{
    alignment_loss, as_feature_map, label_counts, structure_loss, AlignmentStep, MaskGrads, Model, ModelConfig,
    StructureStep, Variant,
};
pub use train::{
    structure_target, train_all, train_luminance_alignment, train_mask, train_structure, Capture, SceneGroup,
    TrainLog, TrainOptions,
};

/// Mask-stage loss and gradients for a single capture, exposed for gradient checks.
pub fn mask_loss_for(model: &Model, capture: &Capture) -> crate::Result<(f64, MaskGrads)> {
    let s = train::mask_sample(model, capture)?;
    let reads = if model.variant == Variant::NoLibrary {
        None
    } else {
        Some((model.lib_l.read_slot_or_nearest(s.id)?, model.lib_s.read_slot_or_nearest(s.id)?))
    };
    model::mask_loss(&model.mask_parts(), &s.lum, &s.structure, reads.as_ref().map(|(a, b)| (a, b)), &s.counts)
}
