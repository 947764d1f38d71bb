/// Separable Gaussian blur of a single plane with replicated borders.
/// `sigma <= 0` returns the input unchanged.
pub fn gaussian_blur(plane: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || plane.is_empty() {
        return plane.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= norm);

    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; plane.len()];
    for r in 0..height {
        let row = &plane[r * width..(r + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                acc += k * row[clamp(c as isize + j as isize - radius, width)];
            }
            tmp[r * width + c] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                acc += k * tmp[clamp(r as isize + j as isize - radius, height) * width + c];
            }
            out[r * width + c] = acc;
        }
    }
    out
}
