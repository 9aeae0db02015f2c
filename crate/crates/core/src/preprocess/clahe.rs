//! Contrast-limited adaptive histogram equalization.

use crate::error::{Error, Result};
use crate::scalar::quantize_u8;
use crate::tensorio::ImageU8;

use super::exposure::luminance_plane;
use super::EnhanceConfig;

/// Clip limits at or above this many uniform-bin heights disable clipping.
pub const UNBOUNDED_CLIP: f64 = 256.0;

/// Transfer function of one tile: clipped histogram, excess spread evenly
/// over all 256 bins, then `255 * cdf(v) / n`.
pub fn tile_mapping(hist: &[u64; 256], clip: f64) -> [f64; 256] {
    let n: u64 = hist.iter().sum();
    let mut mass: [f64; 256] = std::array::from_fn(|v| hist[v] as f64);
    if clip < UNBOUNDED_CLIP {
        let limit = clip * n as f64 / 256.0;
        let mut excess = 0.0;
        for m in mass.iter_mut() {
            if *m > limit {
                excess += *m - limit;
                *m = limit;
            }
        }
        let share = excess / 256.0;
        mass.iter_mut().for_each(|m| *m += share);
    }
    let scale = if n == 0 { 0.0 } else { 255.0 / n as f64 };
    let mut lut = [0.0; 256];
    let mut cdf = 0.0;
    for (v, m) in mass.iter().enumerate() {
        cdf += m;
        lut[v] = (cdf * scale).min(255.0);
    }
    lut
}

/// Tile boundaries `[i * len / tiles, (i + 1) * len / tiles)` and their centers.
fn tile_layout(len: usize, tiles: usize) -> (Vec<(usize, usize)>, Vec<f64>) {
    let bounds: Vec<(usize, usize)> = (0..tiles).map(|i| (i * len / tiles, (i + 1) * len / tiles)).collect();
    let centers = bounds.iter().map(|&(a, b)| (a + b) as f64 / 2.0).collect();
    (bounds, centers)
}

/// Bracketing tiles and blend weight for a pixel center.
fn bracket(pos: f64, centers: &[f64]) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if pos <= centers[0] {
        return (0, 0, 0.0);
    }
    if pos >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.partition_point(|&c| c <= pos) - 1;
    let w = (pos - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, w)
}

/// CLAHE on a single 8-bit plane; returns blended values on `[0, 255]`.
fn clahe_plane(plane: &[u8], height: usize, width: usize, tiles: usize, clip: f64) -> Vec<f64> {
    let (row_bounds, row_centers) = tile_layout(height, tiles);
    let (col_bounds, col_centers) = tile_layout(width, tiles);

    let mut luts = Vec::with_capacity(tiles * tiles);
    for &(y0, y1) in &row_bounds {
        for &(x0, x1) in &col_bounds {
            let mut hist = [0u64; 256];
            for y in y0..y1 {
                for &v in &plane[y * width + x0..y * width + x1] {
                    hist[v as usize] += 1;
                }
            }
            luts.push(tile_mapping(&hist, clip));
        }
    }

    let cols: Vec<(usize, usize, f64)> = (0..width)
        .map(|x| bracket(x as f64 + 0.5, &col_centers))
        .collect();
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let (r0, r1, wy) = bracket(y as f64 + 0.5, &row_centers);
        for (x, &(c0, c1, wx)) in cols.iter().enumerate() {
            let v = plane[y * width + x] as usize;
            let l = |r: usize, c: usize| luts[r * tiles + c][v];
            let top = (1.0 - wx) * l(r0, c0) + wx * l(r0, c1);
            let bottom = (1.0 - wx) * l(r1, c0) + wx * l(r1, c1);
            out.push((1.0 - wy) * top + wy * bottom);
        }
    }
    out
}

/// CLAHE with bilinear blending between tile centers. RGB input is
/// equalized on luminance and each channel rescaled by the luminance ratio.
pub fn clahe(img: &ImageU8, cfg: &EnhanceConfig) -> Result<ImageU8> {
    img.validate()?;
    let tiles = cfg.clahe_tiles;
    if tiles == 0 {
        return Err(Error::Config("clahe_tiles must be >= 1".into()));
    }
    if img.height < tiles || img.width < tiles {
        return Err(Error::Config(format!(
            "image {}x{} smaller than {tiles}x{tiles} tile grid",
            img.height, img.width
        )));
    }
    if img.channels == 1 {
        let eq = clahe_plane(&img.data, img.height, img.width, tiles, cfg.clahe_clip);
        return Ok(ImageU8 {
            data: eq.into_iter().map(quantize_u8).collect(),
            ..img.clone()
        });
    }
    let lum = luminance_plane(img);
    let lum_q: Vec<u8> = lum.iter().map(|&v| quantize_u8(v)).collect();
    let eq = clahe_plane(&lum_q, img.height, img.width, tiles, cfg.clahe_clip);
    Ok(rescale_by_luminance(img, &lum, &eq))
}

/// Scales each RGB pixel by `new_lum / old_lum`, clamped to `[0, 255]`.
pub(crate) fn rescale_by_luminance(img: &ImageU8, old: &[f64], new: &[f64]) -> ImageU8 {
    let mut data = Vec::with_capacity(img.data.len());
    for (i, px) in img.data.chunks_exact(img.channels).enumerate() {
        if old[i] > 0.0 {
            let ratio = new[i] / old[i];
            data.extend(px.iter().map(|&c| quantize_u8(c as f64 * ratio)));
        } else {
            data.extend(std::iter::repeat_n(quantize_u8(new[i]), img.channels));
        }
    }
    ImageU8 { data, ..img.clone() }
}
