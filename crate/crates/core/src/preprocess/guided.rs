//! Guided filter with edge-replicated box windows.

use crate::error::{Error, Result};
use crate::scalar::quantize_u8;
use crate::tensorio::ImageU8;

use super::exposure::luminance_plane;
use super::EnhanceConfig;

/// Mean over the `(2r+1)^2` window around each pixel, borders replicated.
pub(crate) fn box_mean(plane: &[f64], height: usize, width: usize, r: usize) -> Vec<f64> {
    let (ph, pw) = (height + 2 * r, width + 2 * r);
    // summed-area table over the replicated-padded plane
    let mut sat = vec![0.0f64; (ph + 1) * (pw + 1)];
    for py in 0..ph {
        let sy = py.saturating_sub(r).min(height - 1);
        let mut row_sum = 0.0;
        for px in 0..pw {
            let sx = px.saturating_sub(r).min(width - 1);
            row_sum += plane[sy * width + sx];
            sat[(py + 1) * (pw + 1) + px + 1] = sat[py * (pw + 1) + px + 1] + row_sum;
        }
    }
    let side = 2 * r + 1;
    let area = (side * side) as f64;
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            let (y0, x0, y1, x1) = (y, x, y + side, x + side);
            let s = sat[y1 * (pw + 1) + x1] - sat[y0 * (pw + 1) + x1] - sat[y1 * (pw + 1) + x0]
                + sat[y0 * (pw + 1) + x0];
            out.push(s / area);
        }
    }
    out
}

/// Guided filter on normalized planes; returns values on `[0, 1]` (unclamped).
pub fn guided_filter_plane(
    input: &[f64],
    guide: &[f64],
    height: usize,
    width: usize,
    radius: usize,
    epsilon: f64,
) -> Vec<f64> {
    let mean = |p: &[f64]| box_mean(p, height, width, radius);
    let mean_i = mean(input);
    let mean_g = mean(guide);
    let ig: Vec<f64> = input.iter().zip(guide).map(|(i, g)| i * g).collect();
    let gg: Vec<f64> = guide.iter().map(|g| g * g).collect();
    let corr_ig = mean(&ig);
    let corr_gg = mean(&gg);

    let n = height * width;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 0..n {
        let var = corr_gg[k] - mean_g[k] * mean_g[k];
        let cov = corr_ig[k] - mean_i[k] * mean_g[k];
        let ak = cov / (var + epsilon);
        a.push(ak);
        b.push(mean_i[k] - ak * mean_g[k]);
    }
    let mean_a = mean(&a);
    let mean_b = mean(&b);
    (0..n).map(|k| mean_a[k] * guide[k] + mean_b[k]).collect()
}

/// Filters `input` guided by `guide`. Both images must share dimensions;
/// RGB input is filtered per channel against the guide's luminance.
pub fn guided_filter(input: &ImageU8, guide: &ImageU8, cfg: &EnhanceConfig) -> Result<ImageU8> {
    input.validate()?;
    guide.validate()?;
    if !input.same_dims(guide) {
        return Err(Error::Config(format!(
            "guided filter dims differ: {}x{}x{} vs {}x{}x{}",
            input.height, input.width, input.channels, guide.height, guide.width, guide.channels
        )));
    }
    if cfg.guided_radius == 0 || !(cfg.guided_epsilon > 0.0) {
        return Err(Error::Config("guided filter needs radius >= 1 and epsilon > 0".into()));
    }
    let (h, w, c) = (input.height, input.width, input.channels);
    let g: Vec<f64> = luminance_plane(guide).into_iter().map(|v| v / 255.0).collect();
    let mut data = vec![0u8; input.data.len()];
    for ch in 0..c {
        let plane: Vec<f64> = input.data.iter().skip(ch).step_by(c).map(|&v| v as f64 / 255.0).collect();
        let q = guided_filter_plane(&plane, &g, h, w, cfg.guided_radius, cfg.guided_epsilon);
        for (k, v) in q.into_iter().enumerate() {
            data[k * c + ch] = quantize_u8(v.clamp(0.0, 1.0) * 255.0);
        }
    }
    ImageU8::new(h, w, c, data)
}
