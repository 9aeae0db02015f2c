use crate::scalar::quantize_u8;
use crate::tensorio::ImageU8;

use super::EnhanceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposureFlag {
    Under,
    Over,
    Normal,
}

/// Luminance histogram summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureReport {
    /// Mean luminance in `[0, 1]`.
    pub mean_luminance: f64,
    /// Fraction of pixels with luminance below 5% of the range.
    pub underexposed_fraction: f64,
    /// Fraction of pixels with luminance above 95% of the range.
    pub overexposed_fraction: f64,
    pub flag: ExposureFlag,
}

/// Highest histogram bin counted as underexposed (`v / 255 < 0.05`).
const UNDER_BIN_MAX: usize = 12;
/// Lowest histogram bin counted as overexposed (`v / 255 > 0.95`).
const OVER_BIN_MIN: usize = 243;

/// Per-pixel luminance on `[0, 255]` (ITU-R BT.601 weights for RGB).
pub(crate) fn luminance_plane(img: &ImageU8) -> Vec<f64> {
    match img.channels {
        1 => img.data.iter().map(|&v| v as f64).collect(),
        _ => img
            .data
            .chunks_exact(img.channels)
            .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
            .collect(),
    }
}

pub fn luminance_histogram(img: &ImageU8) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for y in luminance_plane(img) {
        hist[quantize_u8(y) as usize] += 1;
    }
    hist
}

pub fn analyze_histogram(img: &ImageU8, cfg: &EnhanceConfig) -> ExposureReport {
    let hist = luminance_histogram(img);
    let n = img.pixel_count() as f64;
    let weighted: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let mean_luminance = weighted / (255.0 * n);
    let under: u64 = hist[..=UNDER_BIN_MAX].iter().sum();
    let over: u64 = hist[OVER_BIN_MIN..].iter().sum();
    let flag = if mean_luminance < cfg.under_thresh {
        ExposureFlag::Under
    } else if mean_luminance > cfg.over_thresh {
        ExposureFlag::Over
    } else {
        ExposureFlag::Normal
    };
    ExposureReport {
        mean_luminance,
        underexposed_fraction: under as f64 / n,
        overexposed_fraction: over as f64 / n,
        flag,
    }
}

/// Exponent mapping the measured mean onto `gamma_target`.
///
/// The mean is clamped to `[1/255, 254/255]` so fully black or fully white
/// frames still give a finite positive exponent.
pub fn gamma_exponent(mean_luminance: f64, gamma_target: f64) -> f64 {
    let m = mean_luminance.clamp(1.0 / 255.0, 254.0 / 255.0);
    gamma_target.ln() / m.ln()
}

pub fn gamma_lut(gamma: f64) -> [u8; 256] {
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        *out = quantize_u8(255.0 * (v as f64 / 255.0).powf(gamma));
    }
    lut
}

/// Power-law correction towards the target brightness; identity for
/// normally exposed input.
pub fn adaptive_gamma(img: &ImageU8, report: &ExposureReport, cfg: &EnhanceConfig) -> ImageU8 {
    if report.flag == ExposureFlag::Normal {
        return img.clone();
    }
    let gamma = gamma_exponent(report.mean_luminance, cfg.gamma_target);
    if gamma == 1.0 {
        return img.clone();
    }
    let lut = gamma_lut(gamma);
    ImageU8 {
        data: img.data.iter().map(|&v| lut[v as usize]).collect(),
        ..img.clone()
    }
}
