//! Post-processing of scored lane priors: score threshold and Line-IoU NMS.

use std::cmp::Ordering;

use crate::assignloss::prior_line_iou;
use crate::error::{Error, Result};
use crate::lanegeom::LanePrior;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceConfig {
    pub score_threshold: f64,
    pub nms_iou_threshold: f64,
    pub max_lanes: usize,
    /// Skip NMS; valid when training used one-to-one assignment.
    pub nms_free: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            score_threshold: 0.4,
            nms_iou_threshold: 0.5,
            max_lanes: 4,
            nms_free: false,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score_threshold) || !(0.0..=1.0).contains(&self.nms_iou_threshold) {
            return Err(Error::Config("inference thresholds must lie in [0, 1]".into()));
        }
        if self.max_lanes < 1 {
            return Err(Error::Config("max_lanes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Keeps priors scoring at least the threshold, in input order.
pub fn filter_by_score<T: Scalar>(preds: &[LanePrior<T>], cfg: &InferenceConfig) -> Vec<LanePrior<T>> {
    let t = T::lit(cfg.score_threshold);
    preds.iter().filter(|p| p.score >= t).cloned().collect()
}

/// Line IoU clamped to `[0, 1]`; lanes without shared rows do not overlap.
pub fn suppression_iou<T: Scalar>(a: &LanePrior<T>, b: &LanePrior<T>, e: T) -> T {
    prior_line_iou(a, b, e)
        .map(|v| v.max(T::zero()).min(T::one()))
        .unwrap_or(T::zero())
}

/// Indices of the lanes kept by greedy NMS, in keep order.
pub fn nms_indices<T: Scalar>(preds: &[LanePrior<T>], cfg: &InferenceConfig, e: T) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .score
            .partial_cmp(&preds[a].score)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let thresh = T::lit(cfg.nms_iou_threshold);
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.len() >= cfg.max_lanes {
            break;
        }
        if kept.iter().all(|&k| suppression_iou(&preds[k], &preds[i], e) <= thresh) {
            kept.push(i);
        }
    }
    kept
}

/// Greedy NMS: highest score first (ties: lower index), suppressing lanes
/// whose clamped IoU with a kept lane exceeds the threshold.
pub fn nms<T: Scalar>(preds: &[LanePrior<T>], cfg: &InferenceConfig, e: T) -> Vec<LanePrior<T>> {
    nms_indices(preds, cfg, e).into_iter().map(|i| preds[i].clone()).collect()
}

/// Score filtering followed by NMS unless `nms_free` is set.
pub fn infer<T: Scalar>(preds: &[LanePrior<T>], cfg: &InferenceConfig, e: T) -> Vec<LanePrior<T>> {
    let kept = filter_by_score(preds, cfg);
    if cfg.nms_free {
        kept
    } else {
        nms(&kept, cfg, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lanegeom::GtLane;

    fn lane(x: f64, score: f64) -> LanePrior<f64> {
        LanePrior::from_polyline(&GtLane::new(vec![(x, 0.0), (x, 99.0)]), 100, 72, score).unwrap()
    }

    #[test]
    fn score_filter() {
        let preds = vec![lane(10.0, 0.9), lane(50.0, 0.3), lane(90.0, 0.6)];
        let cfg = InferenceConfig {
            score_threshold: 0.5,
            ..Default::default()
        };
        let kept = filter_by_score(&preds, &cfg);
        assert_eq!(kept, vec![preds[0].clone(), preds[2].clone()]);
        let all = InferenceConfig {
            score_threshold: 0.0,
            ..Default::default()
        };
        assert_eq!(filter_by_score(&preds, &all), preds);
        let none = InferenceConfig {
            score_threshold: 1.0,
            ..Default::default()
        };
        assert!(filter_by_score(&preds, &none).is_empty());
    }

    #[test]
    fn duplicates_are_suppressed() {
        let preds = vec![lane(40.0, 0.8), lane(40.0, 0.9)];
        let kept = nms(&preds, &InferenceConfig::default(), 15.0);
        assert_eq!(kept, vec![preds[1].clone()]);
    }

    #[test]
    fn far_apart_lanes_all_kept_up_to_cap() {
        let preds: Vec<_> = (0..6).map(|i| lane(10.0 + 100.0 * i as f64, 0.5 + 0.05 * i as f64)).collect();
        let kept = nms_indices(&preds, &InferenceConfig::default(), 15.0);
        assert_eq!(kept, vec![5, 4, 3, 2]);
    }

    #[test]
    fn score_ties_prefer_lower_index() {
        let preds = vec![lane(40.0, 0.7), lane(41.0, 0.7)];
        assert_eq!(nms_indices(&preds, &InferenceConfig::default(), 15.0), vec![0]);
    }

    #[test]
    fn infer_modes() {
        let preds = vec![lane(40.0, 0.8), lane(40.0, 0.9), lane(200.0, 0.1)];
        let free = InferenceConfig {
            nms_free: true,
            ..Default::default()
        };
        assert_eq!(infer(&preds, &free, 15.0), filter_by_score(&preds, &free));
        let cfg = InferenceConfig::default();
        assert_eq!(infer(&preds, &cfg, 15.0), nms(&filter_by_score(&preds, &cfg), &cfg, 15.0));
        assert!(infer::<f64>(&[], &cfg, 15.0).is_empty());
    }
}
