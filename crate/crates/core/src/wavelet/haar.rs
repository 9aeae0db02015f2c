//! Single-level orthonormal 2-D Haar transform.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorio::FeatureMap;

/// Quarter-resolution subbands of one decomposition level.
///
/// `height`/`width` record the input size so odd inputs, which are
/// replicate-padded before the transform, reconstruct to their original
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands<T> {
    pub ll: FeatureMap<T>,
    pub lh: FeatureMap<T>,
    pub hl: FeatureMap<T>,
    pub hh: FeatureMap<T>,
    pub height: usize,
    pub width: usize,
}

impl<T: Scalar> Subbands<T> {
    /// Assembles subbands for an even-sized `2h x 2w` reconstruction.
    pub fn new(ll: FeatureMap<T>, lh: FeatureMap<T>, hl: FeatureMap<T>, hh: FeatureMap<T>) -> Result<Self> {
        let (_, h, w) = ll.dims();
        let s = Self {
            ll,
            lh,
            hl,
            hh,
            height: 2 * h,
            width: 2 * w,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let d = self.ll.dims();
        if self.lh.dims() != d || self.hl.dims() != d || self.hh.dims() != d {
            return Err(Error::Config(format!(
                "subband dims differ: {:?} {:?} {:?} {:?}",
                d,
                self.lh.dims(),
                self.hl.dims(),
                self.hh.dims()
            )));
        }
        let (_, h, w) = d;
        if self.height.div_ceil(2) != h || self.width.div_ceil(2) != w || self.height == 0 || self.width == 0 {
            return Err(Error::Config(format!(
                "subbands {h}x{w} do not match output {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn energy(&self) -> T {
        self.ll.energy() + self.lh.energy() + self.hl.energy() + self.hh.energy()
    }
}

/// Forward transform. Each 2x2 block `[a b; c d]` maps to
/// `ll = (a+b+c+d)/2`, `lh = (a-b+c-d)/2`, `hl = (a+b-c-d)/2`, `hh = (a-b-c+d)/2`.
pub fn dwt2<T: Scalar>(x: &FeatureMap<T>) -> Result<Subbands<T>> {
    let (c, h, w) = x.dims();
    if x.is_empty() {
        return Err(Error::Config("dwt2 of an empty tensor".into()));
    }
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let half = T::lit(0.5);
    let n = c * oh * ow;
    let (mut ll, mut lh, mut hl, mut hh) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for ch in 0..c {
        for i in 0..oh {
            let (y0, y1) = (2 * i, (2 * i + 1).min(h - 1));
            for j in 0..ow {
                let (x0, x1) = (2 * j, (2 * j + 1).min(w - 1));
                let a = x.get(ch, y0, x0);
                let b = x.get(ch, y0, x1);
                let cc = x.get(ch, y1, x0);
                let d = x.get(ch, y1, x1);
                ll.push((a + b + cc + d) * half);
                lh.push((a - b + cc - d) * half);
                hl.push((a + b - cc - d) * half);
                hh.push((a - b - cc + d) * half);
            }
        }
    }
    let mk = |v| FeatureMap::new(c, oh, ow, v);
    Ok(Subbands {
        ll: mk(ll)?,
        lh: mk(lh)?,
        hl: mk(hl)?,
        hh: mk(hh)?,
        height: h,
        width: w,
    })
}

/// Inverse transform, cropping any padding added by [`dwt2`].
pub fn idwt2<T: Scalar>(s: &Subbands<T>) -> Result<FeatureMap<T>> {
    s.check()?;
    let (c, sh, sw) = s.ll.dims();
    let (h, w) = (s.height, s.width);
    let half = T::lit(0.5);
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for i in 0..sh {
            for j in 0..sw {
                let ll = s.ll.get(ch, i, j);
                let lh = s.lh.get(ch, i, j);
                let hl = s.hl.get(ch, i, j);
                let hh = s.hh.get(ch, i, j);
                let block = [
                    (ll + lh + hl + hh) * half,
                    (ll - lh + hl - hh) * half,
                    (ll + lh - hl - hh) * half,
                    (ll - lh - hl + hh) * half,
                ];
                for (k, v) in block.into_iter().enumerate() {
                    let (y, x) = (2 * i + k / 2, 2 * j + k % 2);
                    if y < h && x < w {
                        out[(ch * h + y) * w + x] = v;
                    }
                }
            }
        }
    }
    FeatureMap::new(c, h, w, out)
}
