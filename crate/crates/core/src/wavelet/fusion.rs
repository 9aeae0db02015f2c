use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorio::FeatureMap;

use super::weights::BlockWeights;

/// Blend weight of the wavelet-enhanced branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub alpha: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { alpha: 0.7 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// `alpha * we + (1 - alpha) * fpn`, elementwise.
pub fn blend<T: Scalar>(fpn: &FeatureMap<T>, we: &FeatureMap<T>, alpha: f64) -> Result<FeatureMap<T>> {
    if fpn.dims() != we.dims() {
        return Err(Error::Config(format!(
            "branch dims differ: {:?} vs {:?}",
            fpn.dims(),
            we.dims()
        )));
    }
    let a = T::lit(alpha);
    let b = T::lit(1.0 - alpha);
    let (c, h, w) = fpn.dims();
    let data = fpn.data().iter().zip(we.data()).map(|(&f, &e)| a * e + b * f).collect();
    FeatureMap::new(c, h, w, data)
}

/// 3x3 convolution, stride 1, replicate-padded borders.
pub fn refine_conv<T: Scalar>(z: &FeatureMap<T>, w: &BlockWeights<T>) -> Result<FeatureMap<T>> {
    w.validate()?;
    let (c, h, wd) = z.dims();
    if c != w.channels {
        return Err(Error::Config(format!(
            "feature map has {c} channels, refine kernel expects {}",
            w.channels
        )));
    }
    let mut out = Vec::with_capacity(c * h * wd);
    for o in 0..c {
        for y in 0..h {
            for x in 0..wd {
                let mut acc = w.refine_b[o];
                for i in 0..c {
                    let k = &w.refine_w[(o * c + i) * 9..(o * c + i + 1) * 9];
                    for dy in 0..3 {
                        let sy = (y + dy).saturating_sub(1).min(h - 1);
                        for dx in 0..3 {
                            let sx = (x + dx).saturating_sub(1).min(wd - 1);
                            acc += k[dy * 3 + dx] * z.get(i, sy, sx);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    FeatureMap::new(c, h, wd, out)
}

/// Weighted fusion of the plain and wavelet-enhanced branches followed by
/// the 3x3 refinement convolution.
pub fn fuse<T: Scalar>(
    fpn_branch: &FeatureMap<T>,
    we_branch: &FeatureMap<T>,
    cfg: &FusionConfig,
    w: &BlockWeights<T>,
) -> Result<FeatureMap<T>> {
    cfg.validate()?;
    let z = blend(fpn_branch, we_branch, cfg.alpha)?;
    refine_conv(&z, w)
}
