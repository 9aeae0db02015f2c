//! Label assignment and training-loss evaluators for lane priors.

mod assign;
mod cost;
mod liou;
mod loss;

pub use assign::{dynamic_topk_assign, liou_matrix, Assignment};
pub use cost::{
    assignment_cost, combine_sim, focal_cost, sim_cost, CostComponents, CostMatrix, SimCost, P_EPS,
};
pub use liou::{line_iou, prior_line_iou};
pub use loss::{smooth_l1, total_loss, xytl_residuals, LossBreakdown};

use crate::error::{Error, Result};

/// Weights of the similarity and classification terms in the assignment cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub w_sim: f64,
    pub w_cls: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { w_sim: 1.0, w_cls: 1.0 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_sim >= 0.0 && self.w_cls >= 0.0) || (self.w_sim == 0.0 && self.w_cls == 0.0) {
            return Err(Error::Config("cost weights must be >= 0 and not both zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_cls: f64,
    pub w_xytl: f64,
    pub w_liou: f64,
    pub focal_alpha: f64,
    pub focal_gamma: f64,
    /// Half-width of a lane row segment in Line IoU, in pixels.
    pub liou_radius_e: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_cls: 2.0,
            w_xytl: 0.2,
            w_liou: 2.0,
            focal_alpha: 0.25,
            focal_gamma: 2.0,
            liou_radius_e: 15.0,
        }
    }
}

impl LossWeights {
    /// Line IoU radius for a canvas `width` pixels wide (15 px at 800 px).
    pub fn radius_for_width(width: usize) -> f64 {
        15.0 * width as f64 / 800.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_cls >= 0.0 && self.w_xytl >= 0.0 && self.w_liou >= 0.0) {
            return Err(Error::Config("loss weights must be >= 0".into()));
        }
        if !(self.focal_alpha > 0.0 && self.focal_alpha < 1.0) {
            return Err(Error::Config("focal_alpha must lie in (0, 1)".into()));
        }
        if !(self.focal_gamma >= 0.0) {
            return Err(Error::Config("focal_gamma must be >= 0".into()));
        }
        if !(self.liou_radius_e > 0.0) {
            return Err(Error::Config("liou_radius_e must be > 0".into()));
        }
        Ok(())
    }
}
