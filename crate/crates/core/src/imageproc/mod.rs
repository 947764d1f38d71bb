//! Deterministic image-processing kernels.
//!
//! Everything here is a pure function of its inputs. Ties anywhere resolve to
//! the smallest row-major index.

mod canny;
mod depth;
mod filter;
mod luma;
mod retinex;
mod types;

pub use canny::{canny, CannyParams};
pub use depth::{bilateral_filter, enhance_depth, fill_holes, fill_holes_with, BilateralParams};
pub use filter::gaussian_blur;
pub use luma::{histogram_descriptor, mean_luma, rgb_to_luma};
pub use retinex::{retinex_decompose, retinex_decompose_with, RetinexDecomposition, RETINEX_EPS, RETINEX_SIGMA};
pub use types::{BinaryMask, DepthMap, GrayImage, HistogramDescriptor, RgbImage, SemanticMask};
