//! Illumination-adaptive garment perception and grasp selection.
//!
//! The crate is organised bottom-up:
//!
//! - [`imageproc`] – luma statistics, Canny structure maps, Retinex-style
//!   decomposition and the two-stage depth enhancement (bilateral smoothing
//!   followed by gradient-weighted hole filling).
//! - [`plc`] – a bank of learnable monotone luminance curves that index an
//!   input's illumination level by matching its luma CDF.
//! - [`memory`] – slot libraries updated by exponential moving average, one
//!   slot per curve id.
//! - [`fusion`] – patch-linear encoders/decoders, cross-attention, the mask
//!   head, the three training stages and checkpoints.
//! - [`grasp`] – depth-optimal grasp point search over semantic masks.
//! - [`fda`] – low-frequency amplitude swapping between images.
//! - [`synth`] – procedural multi-illumination scenes for verification.
//! - [`eval`], [`io`], [`config`], [`cli`] – metrics, file formats and the
//!   command-line front end.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod fda;
pub mod fusion;
pub mod grasp;
pub mod imageproc;
pub mod io;
pub mod memory;
pub mod plc;
pub mod synth;

pub(crate) mod bytes;

pub use error::{Error, Result};
pub use imageproc::{BinaryMask, DepthMap, GrayImage, HistogramDescriptor, RgbImage, SemanticMask};
pub use memory::{FeatureVector, ResponseLibrary};
pub use plc::{CurveBank, CurveMatch};
