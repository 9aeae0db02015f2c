use crate::error::{Error, Result};
use crate::lanegeom::{sample_prior, Canvas, GtLane, LanePrior};
use crate::scalar::Scalar;

use super::{CostWeights, LossWeights};

/// Probabilities are clamped to `[P_EPS, 1 - P_EPS]` before taking logs.
pub const P_EPS: f64 = 1e-7;

/// Similarity cost and its normalized parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimCost<T> {
    pub c_sim: T,
    pub c_dis: T,
    pub c_xy: T,
    pub c_theta: T,
    /// False when the lanes share no valid row (`c_dis` is then 1).
    pub overlap: bool,
}

/// `(c_dis * c_xy * c_theta)^2`.
#[inline]
pub fn combine_sim<T: Scalar>(c_dis: T, c_xy: T, c_theta: T) -> T {
    let p = c_dis * c_xy * c_theta;
    p * p
}

#[inline]
fn unit<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

/// Similarity between a prediction and a ground-truth lane on `grid` rows.
///
/// `c_dis` is the mean |dx| over shared rows divided by the canvas width,
/// `c_xy` the start-point distance over the canvas diagonal and `c_theta`
/// the angle difference over pi, each clamped to `[0, 1]`.
pub fn sim_cost<T: Scalar>(pred: &LanePrior<T>, gt: &GtLane<T>, grid: &[T], canvas: Canvas) -> SimCost<T> {
    let px = sample_prior(pred, grid, canvas.height);
    let gx = gt.sample(grid);
    let mut sum = T::zero();
    let mut count = 0usize;
    for (a, b) in px.iter().zip(&gx) {
        if let (Some(a), Some(b)) = (a, b) {
            sum += (*a - *b).abs();
            count += 1;
        }
    }
    let overlap = count > 0;
    let c_dis = if overlap {
        unit(sum / T::from_usize_lossy(count) / T::from_usize_lossy(canvas.width))
    } else {
        T::one()
    };
    let (c_xy, c_theta) = match gt.geometry() {
        Some(g) => {
            let d = (pred.start_x - g.start_x).hypot(pred.start_y - g.start_y);
            (
                unit(d / T::lit(canvas.diagonal())),
                unit((pred.theta - g.theta).abs() / T::PI()),
            )
        }
        None => (T::one(), T::one()),
    };
    SimCost {
        c_sim: combine_sim(c_dis, c_xy, c_theta),
        c_dis,
        c_xy,
        c_theta,
        overlap,
    }
}

/// Focal cost of a score against a binary target.
///
/// Positive: `-alpha (1 - p)^gamma ln p`; negative:
/// `-(1 - alpha) p^gamma ln(1 - p)`.
pub fn focal_cost<T: Scalar>(score: T, is_positive_target: bool, lw: &LossWeights) -> T {
    let eps = T::lit(P_EPS);
    let p = score.max(eps).min(T::one() - eps);
    let alpha = T::lit(lw.focal_alpha);
    let gamma = T::lit(lw.focal_gamma);
    if is_positive_target {
        -alpha * (T::one() - p).powf(gamma) * p.ln()
    } else {
        -(T::one() - alpha) * p.powf(gamma) * (T::one() - p).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostComponents<T> {
    pub c_sim: T,
    pub c_dis: T,
    pub c_xy: T,
    pub c_theta: T,
    pub c_cls: T,
}

/// `n_pred x n_gt` assignment costs, row-major by prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    pub n_pred: usize,
    pub n_gt: usize,
    pub cost: Vec<T>,
    pub components: Vec<CostComponents<T>>,
}

impl<T: Scalar> CostMatrix<T> {
    /// Matrix from raw costs, with zeroed component breakdown.
    pub fn from_costs(n_pred: usize, n_gt: usize, cost: Vec<T>) -> Result<Self> {
        if cost.len() != n_pred * n_gt {
            return Err(Error::Config(format!(
                "cost length {} != {n_pred}x{n_gt}",
                cost.len()
            )));
        }
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite assignment cost".into()));
        }
        let zero = CostComponents {
            c_sim: T::zero(),
            c_dis: T::zero(),
            c_xy: T::zero(),
            c_theta: T::zero(),
            c_cls: T::zero(),
        };
        Ok(Self {
            n_pred,
            n_gt,
            cost,
            components: vec![zero; n_pred * n_gt],
        })
    }

    #[inline]
    pub fn get(&self, pred: usize, gt: usize) -> T {
        self.cost[pred * self.n_gt + gt]
    }

    #[inline]
    pub fn component(&self, pred: usize, gt: usize) -> &CostComponents<T> {
        &self.components[pred * self.n_gt + gt]
    }
}

/// `w_sim * c_sim + w_cls * c_cls` for every prediction/ground-truth pair.
pub fn assignment_cost<T: Scalar>(
    preds: &[LanePrior<T>],
    gts: &[GtLane<T>],
    cw: &CostWeights,
    lw: &LossWeights,
    grid: &[T],
    canvas: Canvas,
) -> Result<CostMatrix<T>> {
    cw.validate()?;
    if preds.is_empty() || gts.is_empty() {
        return Err(Error::Config("assignment needs at least one prediction and one lane".into()));
    }
    let (w_sim, w_cls) = (T::lit(cw.w_sim), T::lit(cw.w_cls));
    let mut cost = Vec::with_capacity(preds.len() * gts.len());
    let mut components = Vec::with_capacity(preds.len() * gts.len());
    for p in preds {
        let c_cls = focal_cost(p.score, true, lw);
        for g in gts {
            let s = sim_cost(p, g, grid, canvas);
            cost.push(w_sim * s.c_sim + w_cls * c_cls);
            components.push(CostComponents {
                c_sim: s.c_sim,
                c_dis: s.c_dis,
                c_xy: s.c_xy,
                c_theta: s.c_theta,
                c_cls,
            });
        }
    }
    Ok(CostMatrix {
        n_pred: preds.len(),
        n_gt: gts.len(),
        cost,
        components,
    })
}
