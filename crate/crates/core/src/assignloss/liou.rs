use crate::error::{Error, Result};
use crate::lanegeom::LanePrior;
use crate::scalar::Scalar;

/// Line IoU of two lanes sampled on the same rows.
///
/// Each valid x is widened to the segment `[x - e, x + e]`; over rows where
/// both lanes are valid the result is `sum(overlap) / sum(union)`, where a
/// negative overlap (gap) is kept, so the value lies in `[-1, 1]`.
pub fn line_iou<T: Scalar>(a: &[Option<T>], b: &[Option<T>], e: T) -> Result<T> {
    let mut inter = T::zero();
    let mut union = T::zero();
    let mut common = 0usize;
    for (xa, xb) in a.iter().zip(b) {
        if let (Some(xa), Some(xb)) = (*xa, *xb) {
            let (lo, hi) = if xa <= xb { (xa, xb) } else { (xb, xa) };
            inter += (lo + e) - (hi - e);
            union += (hi + e) - (lo - e);
            common += 1;
        }
    }
    if common == 0 {
        return Err(Error::UndefinedOverlap);
    }
    Ok(inter / union)
}

/// Line IoU of two priors on their shared native grid.
pub fn prior_line_iou<T: Scalar>(a: &LanePrior<T>, b: &LanePrior<T>, e: T) -> Result<T> {
    if a.n_points() != b.n_points() {
        return Err(Error::Config(format!(
            "priors have {} and {} grid points",
            a.n_points(),
            b.n_points()
        )));
    }
    line_iou(&a.grid_xs(), &b.grid_xs(), e)
}
