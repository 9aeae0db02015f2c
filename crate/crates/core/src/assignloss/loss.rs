use crate::error::{Error, Result};
use crate::lanegeom::{sample_prior, Canvas, GtLane, LanePrior};
use crate::scalar::Scalar;

use super::assign::Assignment;
use super::cost::focal_cost;
use super::liou::line_iou;
use super::LossWeights;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub l_cls: T,
    pub l_xytl: T,
    pub l_liou: T,
    pub positives: usize,
}

impl<T: Scalar> LossBreakdown<T> {
    /// Weighted sum of already-reduced components.
    pub fn combine(l_cls: T, l_xytl: T, l_liou: T, positives: usize, lw: &LossWeights) -> Self {
        let total = T::lit(lw.w_cls) * l_cls + T::lit(lw.w_xytl) * l_xytl + T::lit(lw.w_liou) * l_liou;
        Self {
            total,
            l_cls,
            l_xytl,
            l_liou,
            positives,
        }
    }
}

/// Smooth-L1 with transition point 1.
#[inline]
pub fn smooth_l1<T: Scalar>(r: T) -> T {
    let a = r.abs();
    if a < T::one() {
        T::lit(0.5) * a * a
    } else {
        a - T::lit(0.5)
    }
}

/// Normalized start-x, start-y, angle and length residuals.
pub fn xytl_residuals<T: Scalar>(pred: &LanePrior<T>, gt: &GtLane<T>, canvas: Canvas) -> Option<[T; 4]> {
    let g = gt.geometry()?;
    let (w, h) = (T::from_usize_lossy(canvas.width), T::from_usize_lossy(canvas.height));
    Some([
        (pred.start_x - g.start_x) / w,
        (pred.start_y - g.start_y) / h,
        (pred.theta - g.theta) / T::PI(),
        (pred.length - g.length) / h,
    ])
}

/// Training loss of an assignment.
///
/// `l_cls` is the mean focal loss over all predictions (assigned ones are
/// positive targets). `l_xytl` is the smooth-L1 sum of the four normalized
/// geometry residuals and `l_liou` is `1 - LIoU`, both averaged over
/// positives; a positive sharing no rows with its lane counts as IoU 0.
pub fn total_loss<T: Scalar>(
    preds: &[LanePrior<T>],
    gts: &[GtLane<T>],
    assignment: &Assignment,
    lw: &LossWeights,
    grid: &[T],
    canvas: Canvas,
) -> Result<LossBreakdown<T>> {
    if assignment.per_gt.len() != gts.len() {
        return Err(Error::Config(format!(
            "assignment covers {} lanes, got {}",
            assignment.per_gt.len(),
            gts.len()
        )));
    }
    if let Some((p, _)) = assignment.positives().find(|&(p, _)| p >= preds.len()) {
        return Err(Error::Config(format!("assigned prediction {p} out of range")));
    }
    let owners = assignment.pred_to_gt(preds.len());
    let l_cls = if preds.is_empty() {
        T::zero()
    } else {
        preds
            .iter()
            .zip(&owners)
            .map(|(p, o)| focal_cost(p.score, o.is_some(), lw))
            .sum::<T>()
            / T::from_usize_lossy(preds.len())
    };

    let e = T::lit(lw.liou_radius_e);
    let mut xytl = T::zero();
    let mut liou = T::zero();
    let mut positives = 0usize;
    for (p, g) in assignment.positives() {
        let (pred, gt) = (&preds[p], &gts[g]);
        if let Some(r) = xytl_residuals(pred, gt, canvas) {
            xytl += r.into_iter().map(smooth_l1).sum::<T>();
        }
        let iou = line_iou(&sample_prior(pred, grid, canvas.height), &gt.sample(grid), e).unwrap_or(T::zero());
        liou += T::one() - iou;
        positives += 1;
    }
    let (l_xytl, l_liou) = if positives == 0 {
        (T::zero(), T::zero())
    } else {
        let n = T::from_usize_lossy(positives);
        (xytl / n, liou / n)
    };
    Ok(LossBreakdown::combine(l_cls, l_xytl, l_liou, positives, lw))
}
