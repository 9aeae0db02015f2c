use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::lanegeom::{sample_prior, Canvas, GtLane, LanePrior};
use crate::scalar::Scalar;

use super::cost::CostMatrix;
use super::liou::line_iou;

/// Positive predictions per ground-truth lane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub per_gt: Vec<Vec<usize>>,
}

impl Assignment {
    /// Owning ground truth of each of `n_pred` predictions.
    pub fn pred_to_gt(&self, n_pred: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_pred];
        for (g, preds) in self.per_gt.iter().enumerate() {
            for &p in preds {
                if p < n_pred {
                    out[p] = Some(g);
                }
            }
        }
        out
    }

    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.per_gt
            .iter()
            .enumerate()
            .flat_map(|(g, ps)| ps.iter().map(move |&p| (p, g)))
    }

    pub fn num_positives(&self) -> usize {
        self.per_gt.iter().map(Vec::len).sum()
    }
}

/// Line IoU of every prediction/lane pair on `grid`; pairs without shared
/// rows score 0.
pub fn liou_matrix<T: Scalar>(
    preds: &[LanePrior<T>],
    gts: &[GtLane<T>],
    grid: &[T],
    canvas: Canvas,
    e: T,
) -> Vec<T> {
    let gt_rows: Vec<Vec<Option<T>>> = gts.iter().map(|g| g.sample(grid)).collect();
    let mut out = Vec::with_capacity(preds.len() * gts.len());
    for p in preds {
        let pr = sample_prior(p, grid, canvas.height);
        for g in &gt_rows {
            out.push(line_iou(&pr, g, e).unwrap_or(T::zero()));
        }
    }
    out
}

fn by_cost<T: Scalar>(a: (T, usize), b: (T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
}

/// Dynamic top-k assignment.
///
/// Each lane `g` takes `k_g = clamp(floor(sum of its top min(k_cap, n_pred)
/// positive IoUs), 1, k_cap)` lowest-cost predictions (ties: lower index).
/// A prediction wanted by several lanes stays with the lane it is cheapest
/// for (ties: lower lane index). A lane left empty then takes its cheapest
/// prediction that is unassigned or whose owner keeps at least one other,
/// so every lane is served whenever `n_pred >= n_gt`.
pub fn dynamic_topk_assign<T: Scalar>(cm: &CostMatrix<T>, liou: &[T], k_cap: usize) -> Result<Assignment> {
    let (np, ng) = (cm.n_pred, cm.n_gt);
    if np == 0 || ng == 0 {
        return Err(Error::Config("empty cost matrix".into()));
    }
    if liou.len() != np * ng || cm.cost.len() != np * ng {
        return Err(Error::Config(format!(
            "cost ({}) and IoU ({}) matrices must both be {np}x{ng}",
            cm.cost.len(),
            liou.len()
        )));
    }
    if k_cap == 0 {
        return Err(Error::Config("k_cap must be >= 1".into()));
    }

    let mut owner: Vec<Option<usize>> = vec![None; np];
    for g in 0..ng {
        let mut ious: Vec<T> = (0..np).map(|p| liou[p * ng + g].max(T::zero())).collect();
        ious.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        let top: T = ious.iter().take(k_cap.min(np)).copied().sum();
        let k = top.floor().to_usize().unwrap_or(0).clamp(1, k_cap).min(np);

        let mut order: Vec<usize> = (0..np).collect();
        order.sort_by(|&a, &b| by_cost((cm.get(a, g), a), (cm.get(b, g), b)));
        for &p in &order[..k] {
            match owner[p] {
                Some(o) if cm.get(p, o) <= cm.get(p, g) => {}
                _ => owner[p] = Some(g),
            }
        }
    }

    let mut per_gt: Vec<Vec<usize>> = vec![Vec::new(); ng];
    for (p, o) in owner.iter().enumerate() {
        if let Some(g) = o {
            per_gt[*g].push(p);
        }
    }

    for g in 0..ng {
        if !per_gt[g].is_empty() {
            continue;
        }
        let pick = (0..np)
            .filter(|&p| owner[p].is_none_or(|o| per_gt[o].len() >= 2))
            .min_by(|&a, &b| by_cost((cm.get(a, g), a), (cm.get(b, g), b)));
        if let Some(p) = pick {
            if let Some(o) = owner[p] {
                per_gt[o].retain(|&q| q != p);
            }
            owner[p] = Some(g);
            per_gt[g].push(p);
        }
    }
    Ok(Assignment { per_gt })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(np: usize, ng: usize, c: Vec<f64>) -> CostMatrix<f64> {
        CostMatrix::from_costs(np, ng, c).unwrap()
    }

    #[test]
    fn top_two_of_three() {
        let costs = cm(3, 1, vec![0.3, 0.1, 0.2]);
        let a = dynamic_topk_assign(&costs, &[0.9, 0.8, 0.5], 4).unwrap();
        assert_eq!(a.per_gt, vec![vec![1, 2]]);
    }

    #[test]
    fn k_is_at_least_one() {
        let costs = cm(3, 1, vec![0.3, 0.1, 0.2]);
        let a = dynamic_topk_assign(&costs, &[-0.5, 0.0, 0.2], 4).unwrap();
        assert_eq!(a.per_gt, vec![vec![1]]);
    }

    #[test]
    fn conflict_goes_to_cheaper_gt() {
        // both lanes want pred 0; it is cheaper for lane 1, lane 0 falls back to pred 2
        let costs = cm(3, 2, vec![0.2, 0.1, 0.9, 0.9, 0.5, 0.8]);
        let a = dynamic_topk_assign(&costs, &[0.0; 6], 1).unwrap();
        assert_eq!(a.per_gt, vec![vec![2], vec![0]]);
        assert_eq!(a.pred_to_gt(3), vec![Some(1), None, Some(0)]);
    }

    #[test]
    fn fewer_preds_than_gts() {
        let costs = cm(1, 2, vec![0.5, 0.5]);
        let a = dynamic_topk_assign(&costs, &[1.0, 1.0], 2).unwrap();
        assert_eq!(a.per_gt, vec![vec![0], vec![]]);
    }

    #[test]
    fn errors() {
        let empty = CostMatrix::<f64>::from_costs(0, 0, vec![]).unwrap();
        assert!(matches!(dynamic_topk_assign(&empty, &[], 1), Err(Error::Config(_))));
        let c = cm(1, 1, vec![0.0]);
        assert!(dynamic_topk_assign(&c, &[0.0, 0.0], 1).is_err());
        assert!(dynamic_topk_assign(&c, &[0.0], 0).is_err());
    }
}
