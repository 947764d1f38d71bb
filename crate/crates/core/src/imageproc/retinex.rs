use super::filter::gaussian_blur;
use super::luma::{luma_of, rgb_to_luma};
use super::types::{GrayImage, RgbImage};

/// Blur radius of the luminance estimate, in pixels.
pub const RETINEX_SIGMA: f64 = 15.0;
pub const RETINEX_EPS: f64 = 1e-4;

/// Luminance/structure split of an RGB image.
#[derive(Clone, Debug, PartialEq)]
pub struct RetinexDecomposition {
    /// Smooth illumination estimate, per channel.
    pub luminance: RgbImage,
    /// Reflectance-like ratio field scaled into `[0, 1]` by its maximum.
    pub structure: GrayImage,
    /// The maximum the ratio field was divided by.
    pub scale: f64,
}

impl RetinexDecomposition {
    /// Recompose the luma plane: `(luma(I_L) + eps) * scale * I_S`.
    pub fn reconstruct(&self) -> GrayImage {
        let data = self
            .luminance
            .data
            .chunks_exact(3)
            .zip(&self.structure.data)
            .map(|(p, s)| (luma_of([p[0], p[1], p[2]]) + RETINEX_EPS) * self.scale * s)
            .collect();
        GrayImage { width: self.structure.width, height: self.structure.height, data }
    }
}

pub fn retinex_decompose(img: &RgbImage) -> RetinexDecomposition {
    retinex_decompose_with(img, RETINEX_SIGMA)
}

/// Gaussian-blur illumination estimate and luma ratio structure map.
///
/// The ratio is taken on luma (`luma(I) / (luma(I_L) + eps)`) rather than per
/// channel so that [`RetinexDecomposition::reconstruct`] is exact.
pub fn retinex_decompose_with(img: &RgbImage, sigma: f64) -> RetinexDecomposition {
    let (w, h) = (img.width, img.height);
    let planes: Vec<Vec<f64>> = (0..3).map(|c| gaussian_blur(&img.channel(c), w, h, sigma)).collect();
    let luminance = RgbImage::from_channels(w, h, [&planes[0], &planes[1], &planes[2]]);
    let luma = rgb_to_luma(img);
    let raw: Vec<f64> = luminance
        .data
        .chunks_exact(3)
        .zip(&luma.data)
        .map(|(p, l)| l / (luma_of([p[0], p[1], p[2]]) + RETINEX_EPS))
        .collect();
    let max = raw.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { max } else { 1.0 };
    let structure = GrayImage {
        width: w,
        height: h,
        data: raw.iter().map(|r| (r / scale).clamp(0.0, 1.0)).collect(),
    };
    RetinexDecomposition { luminance, structure, scale }
}
