//! Two-stage adaptive image enhancement.
//!
//! Stage one measures exposure from the luminance histogram and applies a
//! power-law correction towards a target mean brightness. Stage two runs
//! CLAHE and smooths the result with a guided filter whose guide is the
//! gamma-corrected image, so edges come from the least-processed signal.

mod clahe;
mod exposure;
mod guided;

pub use clahe::{clahe, tile_mapping, UNBOUNDED_CLIP};
pub use exposure::{
    adaptive_gamma, analyze_histogram, gamma_exponent, gamma_lut, luminance_histogram, ExposureFlag,
    ExposureReport,
};
pub use guided::{guided_filter, guided_filter_plane};

use crate::error::{Error, Result};
use crate::tensorio::ImageU8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceConfig {
    /// Tiles per axis.
    pub clahe_tiles: usize,
    /// Clip limit in multiples of the uniform bin height; `>= 256` disables clipping.
    pub clahe_clip: f64,
    pub guided_radius: usize,
    pub guided_epsilon: f64,
    pub gamma_target: f64,
    pub under_thresh: f64,
    pub over_thresh: f64,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            clahe_tiles: 8,
            clahe_clip: 2.0,
            guided_radius: 8,
            guided_epsilon: 1e-3,
            gamma_target: 0.5,
            under_thresh: 0.35,
            over_thresh: 0.65,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.clahe_tiles < 1 {
            return bad("clahe_tiles must be >= 1");
        }
        if !(self.clahe_clip >= 1.0) {
            return bad("clahe_clip must be >= 1");
        }
        if self.guided_radius < 1 {
            return bad("guided_radius must be >= 1");
        }
        if !(self.guided_epsilon > 0.0) {
            return bad("guided_epsilon must be > 0");
        }
        if !(self.gamma_target > 0.0 && self.gamma_target < 1.0) {
            return bad("gamma_target must lie in (0, 1)");
        }
        if !(0.0 < self.under_thresh && self.under_thresh < self.over_thresh && self.over_thresh < 1.0) {
            return bad("thresholds must satisfy 0 < under_thresh < over_thresh < 1");
        }
        Ok(())
    }
}

/// Intermediate images of [`enhance`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceStages {
    pub report: ExposureReport,
    pub gamma: ImageU8,
    pub clahe: ImageU8,
    pub output: ImageU8,
}

pub fn enhance_stages(img: &ImageU8, cfg: &EnhanceConfig) -> Result<EnhanceStages> {
    cfg.validate()?;
    img.validate()?;
    let report = analyze_histogram(img, cfg);
    let gamma = adaptive_gamma(img, &report, cfg);
    let clahe = clahe(&gamma, cfg)?;
    let output = guided_filter(&clahe, &gamma, cfg)?;
    Ok(EnhanceStages {
        report,
        gamma,
        clahe,
        output,
    })
}

/// Histogram analysis, adaptive gamma, CLAHE, then guided filtering of the
/// CLAHE output against the gamma-corrected image.
pub fn enhance(img: &ImageU8, cfg: &EnhanceConfig) -> Result<ImageU8> {
    enhance_stages(img, cfg).map(|s| s.output)
}
