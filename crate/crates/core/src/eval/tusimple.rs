use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lanegeom::{is_valid_x, sample_prior};
use crate::scalar::Scalar;
use crate::tensorio::{LaneFile, Lanes};

/// A point is correct when within this many pixels of the annotation.
pub const TUSIMPLE_PIXEL_THRESH: f64 = 20.0;
/// Fraction of correct points needed for a lane to count as detected.
pub const TUSIMPLE_MATCH_RATIO: f64 = 0.85;

/// Summable point and lane counts for the TuSimple metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TuSimpleCounts {
    pub correct_points: usize,
    pub gt_points: usize,
    pub matched_gt: usize,
    pub n_gt: usize,
    pub matched_pred: usize,
    pub n_pred: usize,
}

impl TuSimpleCounts {
    pub fn add(&mut self, o: &TuSimpleCounts) {
        self.correct_points += o.correct_points;
        self.gt_points += o.gt_points;
        self.matched_gt += o.matched_gt;
        self.n_gt += o.n_gt;
        self.matched_pred += o.matched_pred;
        self.n_pred += o.n_pred;
    }

    pub fn score(&self) -> TuSimpleScore {
        let ratio = |num: usize, den: usize, empty: f64| if den == 0 { empty } else { num as f64 / den as f64 };
        TuSimpleScore {
            accuracy: ratio(self.correct_points, self.gt_points, 1.0),
            fp_rate: ratio(self.n_pred - self.matched_pred, self.n_pred, 0.0),
            fn_rate: ratio(self.n_gt - self.matched_gt, self.n_gt, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuSimpleScore {
    pub accuracy: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
}

/// Row key with 1e-3 px resolution.
fn row_key<T: Scalar>(y: T) -> i64 {
    (y.as_f64() * 1000.0).round() as i64
}

/// Point and lane counts for one image.
///
/// Annotation lanes must share one set of anchor rows. Each annotation is
/// paired with the prediction that has the most correct points (ties: lower
/// index); it is detected when at least 85% of its valid points are correct.
pub fn tusimple_counts<T: Scalar>(preds: &LaneFile<T>, gts: &LaneFile<T>) -> Result<TuSimpleCounts> {
    let Lanes::Gt(gt_raw) = &gts.lanes else {
        return Err(Error::Metric("TuSimple annotations must be plain lanes".into()));
    };
    let anchors: Vec<T> = match gt_raw.first() {
        Some(l) => l.points.iter().map(|p| p.1).collect(),
        None => Vec::new(),
    };
    let anchor_keys: Vec<i64> = anchors.iter().map(|&y| row_key(y)).collect();
    for (i, l) in gt_raw.iter().enumerate() {
        let keys: Vec<i64> = l.points.iter().map(|p| row_key(p.1)).collect();
        if keys != anchor_keys {
            return Err(Error::Metric(format!("annotation lane {i} uses different anchor rows")));
        }
    }

    // prediction x per anchor row
    let pred_rows: Vec<Vec<Option<T>>> = match &preds.lanes {
        Lanes::Priors(ps) => ps.iter().map(|p| sample_prior(p, &anchors, preds.image_height)).collect(),
        Lanes::Gt(ls) => ls
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut by_row: BTreeMap<i64, T> = BTreeMap::new();
                for &(x, y) in &l.points {
                    let k = row_key(y);
                    if !anchor_keys.is_empty() && !anchor_keys.contains(&k) {
                        return Err(Error::Metric(format!(
                            "prediction {i} has a point off the anchor rows (y = {y})"
                        )));
                    }
                    if is_valid_x(x) {
                        by_row.entry(k).or_insert(x);
                    }
                }
                Ok(anchor_keys.iter().map(|k| by_row.get(k).copied()).collect())
            })
            .collect::<Result<_>>()?,
    };

    let thresh = T::lit(TUSIMPLE_PIXEL_THRESH);
    let mut counts = TuSimpleCounts {
        n_gt: gt_raw.len(),
        n_pred: pred_rows.len(),
        ..Default::default()
    };
    let mut pred_matched = vec![false; pred_rows.len()];
    for gt in gt_raw {
        let valid: Vec<(usize, T)> = gt
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| is_valid_x(p.0))
            .map(|(i, p)| (i, p.0))
            .collect();
        counts.gt_points += valid.len();
        let mut best: Option<(usize, usize)> = None;
        for (p, rows) in pred_rows.iter().enumerate() {
            let correct = valid
                .iter()
                .filter(|&&(i, xg)| rows[i].is_some_and(|xp| (xp - xg).abs() < thresh))
                .count();
            if best.is_none_or(|(_, c)| correct > c) {
                best = Some((p, correct));
            }
        }
        if let Some((p, correct)) = best {
            counts.correct_points += correct;
            if !valid.is_empty() && correct as f64 >= TUSIMPLE_MATCH_RATIO * valid.len() as f64 {
                counts.matched_gt += 1;
                pred_matched[p] = true;
            }
        }
    }
    counts.matched_pred = pred_matched.iter().filter(|&&m| m).count();
    Ok(counts)
}

pub fn tusimple_metrics<T: Scalar>(preds: &LaneFile<T>, gts: &LaneFile<T>) -> Result<TuSimpleScore> {
    Ok(tusimple_counts(preds, gts)?.score())
}
