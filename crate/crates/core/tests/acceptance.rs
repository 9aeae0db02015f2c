//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelane::assignloss::{
    assignment_cost, dynamic_topk_assign, focal_cost, line_iou, liou_matrix, total_loss, CostMatrix, CostWeights,
    LossWeights,
};
use wavelane::eval::{culane_counts, culane_f1, mf1_thresholds, tusimple_metrics};
use wavelane::inference::{infer, InferenceConfig};
use wavelane::lanegeom::{
    attention_rows, native_rows, uniform_rows, Canvas, GtLane, LaneGeometry, LanePrior, SampleConfig, SampleMode,
};
use wavelane::preprocess::{
    adaptive_gamma, analyze_histogram, clahe, enhance, guided_filter, EnhanceConfig, UNBOUNDED_CLIP,
};
use wavelane::tensorio::{decode_image, FeatureMap, ImageU8, LaneFile};
use wavelane::wavelet::{dwt2, fuse, idwt2, make_weights, nonlocal_block, BlockWeights, FusionConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_map(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> FeatureMap<f64> {
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.gen_range(-1.0..1.0))
}

// ---------------------------------------------------------------- 1

fn padded_energy(x: &FeatureMap<f64>) -> f64 {
    let (c, h, w) = x.dims();
    let (ph, pw) = (h + h % 2, w + w % 2);
    let mut e = 0.0;
    for ch in 0..c {
        for y in 0..ph {
            for xx in 0..pw {
                let v = x.get(ch, y.min(h - 1), xx.min(w - 1));
                e += v * v;
            }
        }
    }
    e
}

fn wavelet_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_rt, mut worst_parseval) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (c, h, w) = (rng.gen_range(1..=8), rng.gen_range(1..=64), rng.gen_range(1..=64));
        let x = random_map(&mut rng, c, h, w);
        let s = dwt2(&x).map_err(|e| e.to_string())?;
        let back = idwt2(&s).map_err(|e| e.to_string())?;
        check(back.dims() == x.dims(), || format!("dims {:?} != {:?}", back.dims(), x.dims()))?;
        worst_rt = worst_rt.max(back.max_abs_diff(&x));
        let pe = padded_energy(&x);
        worst_parseval = worst_parseval.max((s.energy() - pe).abs() / pe);
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst_rt < 1e-6, || format!("round-trip error {worst_rt:e}"))?;
    check(worst_parseval < 1e-5, || format!("Parseval error {worst_parseval:e}"))?;
    check(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("max err {worst_rt:.1e}, Parseval rel err {worst_parseval:.1e}, {secs:.2} s"))
}

// ---------------------------------------------------------------- 2

fn fusion_endpoints() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (c, h, w) = (rng.gen_range(1..=4), rng.gen_range(1..=9), rng.gen_range(1..=9));
        let fpn: FeatureMap<f32> = random_map(&mut rng, c, h, w).cast();
        let we: FeatureMap<f32> = random_map(&mut rng, c, h, w).cast();
        let id = BlockWeights::<f32>::zeros(c, 1).with_identity_refine();
        let at = |a: f64| fuse(&fpn, &we, &FusionConfig { alpha: a }, &id).map_err(|e| e.to_string());
        let (z0, z1) = (at(0.0)?, at(1.0)?);
        let bits = |m: &FeatureMap<f32>| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        check(bits(&z0) == bits(&fpn), || "alpha=0 differs from the plain branch".into())?;
        check(bits(&z1) == bits(&we), || "alpha=1 differs from the enhanced branch".into())?;
        let z = at(0.7)?;
        for ((&o, &f), &e) in z.data().iter().zip(fpn.data()).zip(we.data()) {
            let want = 0.7 * e as f64 + 0.3 * f as f64;
            worst = worst.max((o as f64 - want).abs());
        }
    }
    check(worst < 1e-6, || format!("alpha=0.7 blend error {worst:e}"))?;
    Ok(format!("endpoints bitwise, alpha=0.7 max err {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

/// Straight-line attention: scores, naive softmax, aggregation, residual.
fn naive_nonlocal(x: &FeatureMap<f64>, w: &BlockWeights<f64>) -> Vec<f64> {
    let (c, h, wd) = x.dims();
    let n = h * wd;
    let e = w.embed;
    let at = |ch: usize, i: usize| x.data()[ch * n + i];
    let proj = |m: &[f64], k: usize, i: usize| (0..c).map(|ch| m[k * c + ch] * at(ch, i)).sum::<f64>();
    let mut out = vec![0.0; c * n];
    for i in 0..n {
        let scores: Vec<f64> = (0..n)
            .map(|j| (0..e).map(|k| proj(&w.theta_w, k, i) * proj(&w.phi_w, k, j)).sum::<f64>() / (e as f64).sqrt())
            .collect();
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        let y: Vec<f64> = (0..e)
            .map(|k| (0..n).map(|j| scores[j].exp() / z * proj(&w.g_w, k, j)).sum())
            .collect();
        for ch in 0..c {
            out[ch * n + i] = at(ch, i) + (0..e).map(|k| w.out_w[ch * e + k] * y[k]).sum::<f64>();
        }
    }
    out
}

fn nonlocal_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let x = random_map(&mut rng, 2, 4, 4);
        let w = make_weights::<f64>(2, 1 + (seed as usize % 2), seed).map_err(|e| e.to_string())?;
        let want = naive_nonlocal(&x, &w);
        let got = nonlocal_block(&x, &w).map_err(|e| e.to_string())?;
        let got32 = nonlocal_block(&x.cast::<f32>(), &w.cast::<f32>()).map_err(|e| e.to_string())?;
        for ((g, g32), t) in got.data().iter().zip(got32.data()).zip(&want) {
            worst = worst.max((g - t).abs()).max((*g32 as f64 - t).abs());
        }
        let zero = nonlocal_block(&x, &BlockWeights::zeros(2, 1)).map_err(|e| e.to_string())?;
        check(zero == x, || format!("seed {seed}: zero weights changed the input"))?;
    }
    check(worst < 1e-5, || format!("max err {worst:e}"))?;
    Ok(format!("20 cases max err {worst:.1e} (f64 and f32), zero weights exact"))
}

// ---------------------------------------------------------------- 4

fn attention_sampling() -> Outcome {
    let cfg = SampleConfig {
        n_sample: 36,
        image_height: 320,
        beta: 10.0,
        mode: SampleMode::Attention,
    };
    let rows = attention_rows(&cfg);
    check(rows.windows(2).all(|p| p[0] < p[1]), || format!("not strictly sorted: {rows:?}"))?;
    check(rows[0] == 0 && *rows.last().unwrap() == 320, || "endpoints are not 0 and 320".into())?;
    check(rows.len() <= 36, || format!("{} rows", rows.len()))?;

    let limit = attention_rows(&SampleConfig { beta: 1.0 + 1e-6, ..cfg });
    let uniform = uniform_rows(&SampleConfig {
        mode: SampleMode::Uniform,
        ..cfg
    });
    check(limit.len() == uniform.len(), || "beta -> 1 changes the row count".into())?;
    let dev = limit.iter().zip(&uniform).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
    check(dev <= 1, || format!("beta -> 1 deviates by {dev} rows"))?;

    let fixture = attention_rows(&SampleConfig {
        n_sample: 5,
        image_height: 100,
        ..cfg
    });
    check(fixture == [0, 51, 74, 89, 100], || format!("H=100, n=5 gives {fixture:?}"))?;

    let gaps: Vec<i64> = rows.windows(2).map(|p| p[1] as i64 - p[0] as i64).collect();
    if let Some(i) = (0..gaps.len().saturating_sub(1)).find(|&i| gaps[i + 1] < gaps[i] - 1) {
        return Err(format!(
            "gap sequence not non-decreasing: gap[{}]={} < gap[{}]-1={} (gaps {:?}); \
             the H=100 fixture [0, 51, 74, 89, 100] has gaps 51, 23, 15, 11",
            i + 1,
            gaps[i + 1],
            i,
            gaps[i] - 1,
            gaps
        ));
    }
    Ok(format!("{} rows, beta->1 deviation {dev}, fixture ok", rows.len()))
}

// ---------------------------------------------------------------- 5

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<f64>> {
    (0..n)
        .map(|_| rng.gen_bool(0.8).then(|| rng.gen_range(0.0..1640.0)))
        .collect()
}

fn segment_liou(a: &[Option<f64>], b: &[Option<f64>], e: f64) -> Option<f64> {
    let (mut inter, mut union, mut any) = (0.0, 0.0, false);
    for (xa, xb) in a.iter().zip(b) {
        if let (Some(xa), Some(xb)) = (xa, xb) {
            inter += (xa + e).min(xb + e) - (xa - e).max(xb - e);
            union += (xa + e).max(xb + e) - (xa - e).min(xb - e);
            any = true;
        }
    }
    any.then(|| inter / union)
}

const CANVAS: Canvas = Canvas {
    height: 590,
    width: 1640,
};
const GRID_N: usize = 72;

/// Prior valid from native row `top` down to the bottom row.
fn random_prior(rng: &mut ChaCha8Rng) -> LanePrior<f64> {
    let grid = native_rows::<f64>(CANVAS.height, GRID_N);
    let top = rng.gen_range(0..GRID_N - 2);
    let x0 = rng.gen_range(0.0..1640.0);
    let slope = rng.gen_range(-3.0..3.0);
    let xs = (0..GRID_N)
        .map(|j| if j < top { -2.0 } else { (x0 + slope * (j as f64 - top as f64)).max(0.0) })
        .collect();
    LanePrior::new(
        LaneGeometry {
            start_x: rng.gen_range(0.0..1640.0),
            start_y: grid[GRID_N - 1],
            theta: rng.gen_range(0.0..std::f64::consts::PI),
            length: grid[GRID_N - 1] - grid[top] + 0.5,
        },
        xs,
        rng.gen_range(0.0..=1.0),
    )
    .unwrap()
}

/// Lane with points on native rows `lo..=hi`.
fn random_gt(rng: &mut ChaCha8Rng) -> (GtLane<f64>, usize, usize, Vec<f64>) {
    let grid = native_rows::<f64>(CANVAS.height, GRID_N);
    let lo = rng.gen_range(0..GRID_N - 2);
    let hi = rng.gen_range(lo + 1..GRID_N);
    let xs: Vec<f64> = (lo..=hi).map(|_| rng.gen_range(0.0..1640.0)).collect();
    let pts = (lo..=hi).zip(&xs).map(|(j, &x)| (x, grid[j])).collect();
    (GtLane::new(pts), lo, hi, xs)
}

fn cost_oracle(
    p: &LanePrior<f64>,
    gt: &(GtLane<f64>, usize, usize, Vec<f64>),
    cw: &CostWeights,
    lw: &LossWeights,
) -> f64 {
    let grid = native_rows::<f64>(CANVAS.height, GRID_N);
    let (_, lo, hi, xs) = gt;
    let mut diffs = Vec::new();
    for j in *lo..=*hi {
        if p.xs[j] >= 0.0 {
            diffs.push((p.xs[j] - xs[j - lo]).abs());
        }
    }
    let c_dis = if diffs.is_empty() {
        1.0
    } else {
        (diffs.iter().sum::<f64>() / diffs.len() as f64 / CANVAS.width as f64).min(1.0)
    };
    let (bx, by) = (xs[xs.len() - 1], grid[*hi]);
    let (tx, ty) = (xs[0], grid[*lo]);
    let diag = ((CANVAS.height * CANVAS.height + CANVAS.width * CANVAS.width) as f64).sqrt();
    let c_xy = (((p.start_x - bx).powi(2) + (p.start_y - by).powi(2)).sqrt() / diag).min(1.0);
    let theta = (by - ty).atan2(tx - bx);
    let c_theta = ((p.theta - theta).abs() / std::f64::consts::PI).min(1.0);
    let c_sim = (c_dis * c_xy * c_theta).powi(2);
    let s = p.score.clamp(1e-7, 1.0 - 1e-7);
    let c_cls = -lw.focal_alpha * (1.0 - s).powf(lw.focal_gamma) * s.ln();
    cw.w_sim * c_sim + cw.w_cls * c_cls
}

/// Per-lane argmin (ties: lower prediction), contested predictions go to the
/// cheapest lane (ties: lower lane), empty lanes take their cheapest free
/// prediction in lane order.
fn argmin_assignment(cost: &[f64], np: usize, ng: usize) -> Vec<Vec<usize>> {
    let c = |p: usize, g: usize| cost[p * ng + g];
    let choice: Vec<usize> = (0..ng)
        .map(|g| {
            let mut best = 0;
            for p in 1..np {
                if c(p, g) < c(best, g) {
                    best = p;
                }
            }
            best
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; np];
    for p in 0..np {
        let mut best: Option<usize> = None;
        for g in 0..ng {
            if choice[g] == p && best.map_or(true, |b| c(p, g) < c(p, b)) {
                best = Some(g);
            }
        }
        owner[p] = best;
    }
    for g in 0..ng {
        if owner.contains(&Some(g)) {
            continue;
        }
        let mut best: Option<usize> = None;
        for p in 0..np {
            if owner[p].is_none() && best.map_or(true, |b| c(p, g) < c(b, g)) {
                best = Some(p);
            }
        }
        if let Some(p) = best {
            owner[p] = Some(g);
        }
    }
    (0..ng)
        .map(|g| (0..np).filter(|&p| owner[p] == Some(g)).collect())
        .collect()
}

fn assignment_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let n = rng.gen_range(1..40);
        let (a, b) = (random_rows(&mut rng, n), random_rows(&mut rng, n));
        let e = rng.gen_range(1.0..30.0);
        let got = line_iou(&a, &b, e).ok();
        let want = segment_liou(&a, &b, e);
        check(got == want, || format!("pair {i}: {got:?} != {want:?}"))?;
    }

    let grid = native_rows::<f64>(CANVAS.height, GRID_N);
    let cw = CostWeights { w_sim: 1.5, w_cls: 0.75 };
    let lw = LossWeights::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let preds: Vec<_> = (0..rng.gen_range(1..8)).map(|_| random_prior(&mut rng)).collect();
        let gts: Vec<_> = (0..rng.gen_range(1..5)).map(|_| random_gt(&mut rng)).collect();
        let lanes: Vec<GtLane<f64>> = gts.iter().map(|g| g.0.clone()).collect();
        let cm = assignment_cost(&preds, &lanes, &cw, &lw, &grid, CANVAS).map_err(|e| e.to_string())?;
        for (p, pr) in preds.iter().enumerate() {
            for (g, gt) in gts.iter().enumerate() {
                worst = worst.max((cm.get(p, g) - cost_oracle(pr, gt, &cw, &lw)).abs());
            }
        }
    }
    check(worst < 1e-9, || format!("cost matrix error {worst:e}"))?;

    let values = [0.0, 0.5, 1.0];
    let mut cases = 0;
    for code in 0..3usize.pow(9) {
        let cost: Vec<f64> = (0..9).map(|k| values[code / 3usize.pow(k as u32) % 3]).collect();
        let cm = CostMatrix::from_costs(3, 3, cost.clone()).map_err(|e| e.to_string())?;
        let got = dynamic_topk_assign(&cm, &[0.0; 9], 1).map_err(|e| e.to_string())?;
        let want = argmin_assignment(&cost, 3, 3);
        check(got.per_gt == want, || format!("costs {cost:?}: {:?} != {want:?}", got.per_gt))?;
        cases += 1;
    }
    Ok(format!("1000 IoU pairs exact, cost err {worst:.1e}, {cases} matrices"))
}

// ---------------------------------------------------------------- 6

fn loss_properties() -> Outcome {
    let grid = native_rows::<f64>(CANVAS.height, GRID_N);
    let lanes: Vec<GtLane<f64>> = [(150.0, 2.0), (800.0, 0.0), (1500.0, -2.0)]
        .iter()
        .map(|&(x0, s)| GtLane::new((0..30).map(|k| (x0 + s * k as f64 * 10.0, 580.0 - k as f64 * 10.0)).collect()))
        .collect();
    let preds: Vec<LanePrior<f64>> = lanes
        .iter()
        .map(|l| LanePrior::from_polyline(l, CANVAS.height, GRID_N, 1.0).unwrap())
        .collect();
    let lw = LossWeights::default();
    let cw = CostWeights::default();
    let run = |lw: &LossWeights| -> Result<_, String> {
        let cm = assignment_cost(&preds, &lanes, &cw, lw, &grid, CANVAS).map_err(|e| e.to_string())?;
        let iou = liou_matrix(&preds, &lanes, &grid, CANVAS, lw.liou_radius_e);
        let a = dynamic_topk_assign(&cm, &iou, 4).map_err(|e| e.to_string())?;
        total_loss(&preds, &lanes, &a, lw, &grid, CANVAS).map_err(|e| e.to_string())
    };
    let perfect = run(&lw)?;
    check(perfect.positives == 3, || format!("{} positives", perfect.positives))?;
    check(perfect.total < 1e-6, || format!("perfect prediction loss {:e}", perfect.total))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let noisy: Vec<LanePrior<f64>> = preds
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.score = rng.gen_range(0.05..0.95);
            q.start_x += rng.gen_range(-40.0..40.0);
            q.theta += rng.gen_range(-0.2..0.2);
            q.xs.iter_mut().filter(|x| **x >= 0.0).for_each(|x| *x += rng.gen_range(0.0..20.0));
            q
        })
        .collect();
    let cm = assignment_cost(&noisy, &lanes, &cw, &lw, &grid, CANVAS).map_err(|e| e.to_string())?;
    let iou = liou_matrix(&noisy, &lanes, &grid, CANVAS, lw.liou_radius_e);
    let a = dynamic_topk_assign(&cm, &iou, 4).map_err(|e| e.to_string())?;
    let base = total_loss(&noisy, &lanes, &a, &lw, &grid, CANVAS).map_err(|e| e.to_string())?;
    for lambda in [0.25, 0.5, 2.0, 8.0] {
        let scaled = LossWeights {
            w_cls: lw.w_cls * lambda,
            w_xytl: lw.w_xytl * lambda,
            w_liou: lw.w_liou * lambda,
            ..lw
        };
        let s = total_loss(&noisy, &lanes, &a, &scaled, &grid, CANVAS).map_err(|e| e.to_string())?;
        check(s.total == lambda * base.total, || format!("scale {lambda}: {} != {}", s.total, lambda * base.total))?;
    }

    let mut worst = 0.0f64;
    for k in 1..1000 {
        let p = k as f64 / 1000.0;
        for alpha in [0.25, 0.5, 0.9] {
            let g0 = LossWeights {
                focal_gamma: 0.0,
                focal_alpha: alpha,
                ..lw
            };
            worst = worst
                .max((focal_cost(p, true, &g0) - alpha * -p.ln()).abs())
                .max((focal_cost(p, false, &g0) - (1.0 - alpha) * -(1.0 - p).ln()).abs());
        }
    }
    check(worst < 1e-12, || format!("gamma=0 focal vs cross-entropy {worst:e}"))?;
    Ok(format!("perfect total {:.1e}, scaling exact, gamma=0 err {worst:.1e}", perfect.total))
}

// ---------------------------------------------------------------- 7

fn greedy_reference(preds: &[LanePrior<f64>], cfg: &InferenceConfig, e: f64) -> Vec<LanePrior<f64>> {
    let iou = |a: &LanePrior<f64>, b: &LanePrior<f64>| {
        let rows = |p: &LanePrior<f64>| p.xs.iter().map(|&x| (x >= 0.0).then_some(x)).collect::<Vec<_>>();
        segment_liou(&rows(a), &rows(b), e).unwrap_or(0.0).clamp(0.0, 1.0)
    };
    let mut alive: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].score >= cfg.score_threshold).collect();
    let mut kept: Vec<usize> = Vec::new();
    while !alive.is_empty() && kept.len() < cfg.max_lanes {
        let mut best = alive[0];
        for &i in &alive {
            if preds[i].score > preds[best].score {
                best = i;
            }
        }
        kept.push(best);
        alive.retain(|&i| i != best && iou(&preds[i], &preds[best]) <= cfg.nms_iou_threshold);
    }
    kept.into_iter().map(|i| preds[i].clone()).collect()
}

fn nms_reference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 12;
    let e = LossWeights::radius_for_width(800);
    let mut suppressed = 0usize;
    for inst in 0..500 {
        let cfg = InferenceConfig {
            score_threshold: rng.gen_range(0.0..0.5),
            nms_iou_threshold: rng.gen_range(0.2..0.8),
            max_lanes: rng.gen_range(1..=8),
            nms_free: false,
        };
        let centers: Vec<f64> = (0..3).map(|_| rng.gen_range(50.0..750.0)).collect();
        let preds: Vec<LanePrior<f64>> = (0..8)
            .map(|_| {
                let c = centers[rng.gen_range(0..3)] + rng.gen_range(-25.0..25.0);
                let slope = rng.gen_range(-4.0..4.0);
                let top = rng.gen_range(0..n / 2);
                let xs: Vec<f64> = (0..n).map(|j| if j < top { -2.0 } else { (c + slope * j as f64).max(0.0) }).collect();
                LanePrior::new(
                    LaneGeometry {
                        start_x: xs[n - 1],
                        start_y: 319.0,
                        theta: 1.0,
                        length: 320.0,
                    },
                    xs,
                    (rng.gen_range(0..=10) as f64) / 10.0,
                )
                .unwrap()
            })
            .collect();
        let got = infer(&preds, &cfg, e);
        let want = greedy_reference(&preds, &cfg, e);
        check(got == want, || format!("instance {inst}: kept sets differ"))?;
        suppressed += preds.iter().filter(|p| p.score >= cfg.score_threshold).count() - got.len();
        for (i, a) in got.iter().enumerate() {
            for b in &got[i + 1..] {
                let rows = |p: &LanePrior<f64>| p.xs.iter().map(|&x| (x >= 0.0).then_some(x)).collect::<Vec<_>>();
                let v = segment_liou(&rows(a), &rows(b), e).unwrap_or(0.0);
                check(v <= cfg.nms_iou_threshold, || format!("instance {inst}: kept pair IoU {v}"))?;
            }
        }
    }
    Ok(format!("500 instances match, {suppressed} lanes removed"))
}

// ---------------------------------------------------------------- 8

fn vertical(x: f64, y0: f64, y1: f64) -> GtLane<f64> {
    GtLane::new((0..=10).map(|k| (x, y0 + (y1 - y0) * k as f64 / 10.0)).collect())
}

fn metric_fixtures() -> Outcome {
    let gts = LaneFile::gt(590, 1640, vec![vertical(200.0, 100.0, 580.0), vertical(800.0, 100.0, 580.0), vertical(1400.0, 100.0, 580.0)]);
    let preds = LaneFile::gt(590, 1640, vec![vertical(202.0, 100.0, 580.0), vertical(799.0, 110.0, 580.0), vertical(1100.0, 100.0, 580.0)]);
    let r = culane_f1(&preds, &gts, 0.5, 30.0).map_err(|e| e.to_string())?;
    let s = r.at(0.5).ok_or("no score at 0.5")?;
    check((s.counts.tp, s.counts.fp, s.counts.fn_) == (2, 1, 1), || format!("counts {:?}", s.counts))?;
    check((s.f1 - 2.0 / 3.0).abs() < 1e-12, || format!("F1 {}", s.f1))?;

    let anchors: Vec<f64> = (0..10).map(|k| 300.0 + 20.0 * k as f64).collect();
    let lane = |x: f64| GtLane::new(anchors.iter().map(|&y| (x, y)).collect());
    let t_gts = LaneFile::gt(720, 1280, vec![lane(300.0), lane(900.0)]);
    let t_preds = LaneFile::gt(720, 1280, vec![lane(305.0), lane(600.0)]);
    let t = tusimple_metrics(&t_preds, &t_gts).map_err(|e| e.to_string())?;
    check(
        (t.accuracy, t.fp_rate, t.fn_rate) == (0.5, 0.5, 0.5),
        || format!("TuSimple {t:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let taus = mf1_thresholds();
    for inst in 0..50 {
        let mk = |rng: &mut ChaCha8Rng| {
            let (x0, x1) = (rng.gen_range(100.0..1540.0), rng.gen_range(100.0..1540.0));
            GtLane::new((0..8).map(|k| (x0 + (x1 - x0) * k as f64 / 7.0, 580.0 - 60.0 * k as f64)).collect())
        };
        let g: Vec<_> = (0..rng.gen_range(1..=4)).map(|_| mk(&mut rng)).collect();
        let mut p: Vec<_> = g
            .iter()
            .map(|l| GtLane::new(l.points.iter().map(|&(x, y)| (x + rng.gen_range(-20.0..20.0), y)).collect()))
            .collect();
        for _ in 0..rng.gen_range(0..=2) {
            p.push(mk(&mut rng));
        }
        let counts = culane_counts(&LaneFile::gt(590, 1640, p), &LaneFile::gt(590, 1640, g), &taus, 30.0)
            .map_err(|e| e.to_string())?;
        let f1: Vec<f64> = counts.iter().map(|c| c.f1()).collect();
        check(f1.windows(2).all(|w| w[1] <= w[0]), || format!("instance {inst}: F1 {f1:?}"))?;
    }
    Ok("CULane 2/1/1 F1=2/3, TuSimple 0.5/0.5/0.5, 50 monotone F1 curves".into())
}

// ---------------------------------------------------------------- 9

fn global_equalization(img: &ImageU8) -> Vec<u8> {
    let mut hist = [0u64; 256];
    img.data.iter().for_each(|&v| hist[v as usize] += 1);
    let n = img.data.len() as f64;
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    for v in 0..256 {
        cdf += hist[v];
        lut[v] = (255.0 * cdf as f64 / n + 0.5).floor() as u8;
    }
    img.data.iter().map(|&v| lut[v as usize]).collect()
}

fn preprocess_identities() -> Outcome {
    let cfg = EnhanceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let flat = ImageU8::filled(16, 16, 1, 51).unwrap();
    let report = analyze_histogram(&flat, &cfg);
    let at_target = EnhanceConfig {
        gamma_target: report.mean_luminance,
        ..cfg
    };
    let g = adaptive_gamma(&flat, &report, &at_target);
    check(g == flat, || "gamma at mean == target is not the identity".into())?;

    let rand_img = |rng: &mut ChaCha8Rng, h: usize, w: usize| {
        ImageU8::new(h, w, 1, (0..h * w).map(|_| rng.gen()).collect()).unwrap()
    };
    let mut worst = 0i32;
    for v in [0u8, 17, 128, 255] {
        let c = ImageU8::filled(20, 24, 1, v).unwrap();
        let guide = rand_img(&mut rng, 20, 24);
        let out = guided_filter(&c, &guide, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max(out.data.iter().map(|&o| (o as i32 - v as i32).abs()).max().unwrap());
    }
    check(worst <= 1, || format!("constant input moved by {worst}"))?;
    let tiny = EnhanceConfig {
        guided_epsilon: 1e-12,
        ..cfg
    };
    let img = rand_img(&mut rng, 24, 20);
    let out = guided_filter(&img, &img, &tiny).map_err(|e| e.to_string())?;
    let dev = out.data.iter().zip(&img.data).map(|(&a, &b)| (a as i32 - b as i32).abs()).max().unwrap();
    check(dev <= 1, || format!("epsilon -> 0 deviates by {dev}"))?;

    let global = EnhanceConfig {
        clahe_tiles: 1,
        clahe_clip: UNBOUNDED_CLIP,
        ..cfg
    };
    for _ in 0..20 {
        let (h, w) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let img = rand_img(&mut rng, h, w);
        let out = clahe(&img, &global).map_err(|e| e.to_string())?;
        check(out.data == global_equalization(&img), || format!("{h}x{w}: CLAHE differs from global equalization"))?;
    }

    let dark = decode_image(include_bytes!("../fixtures/dark_road.pgm")).map_err(|e| e.to_string())?;
    let before = analyze_histogram(&dark, &cfg).mean_luminance;
    let after = analyze_histogram(&enhance(&dark, &cfg).map_err(|e| e.to_string())?, &cfg).mean_luminance;
    check(after > before, || format!("mean luminance {before} -> {after}"))?;
    Ok(format!("identities hold, dark fixture mean {before:.3} -> {after:.3}"))
}

// ---------------------------------------------------------------- 10

fn demo_determinism(suite_start: Instant) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_wavelane");
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut stdouts = Vec::new();
    for d in &dirs {
        let out = Command::new(bin)
            .args(["demo", "--seed", "7", "--output-dir"])
            .arg(d.path())
            .output()
            .map_err(|e| e.to_string())?;
        check(out.status.success(), || format!("demo failed: {}", String::from_utf8_lossy(&out.stderr)))?;
        stdouts.push(out.stdout);
    }
    check(stdouts[0] == stdouts[1], || "demo stdout differs between runs".into())?;
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    check(!names.is_empty(), || "demo wrote no artifacts".into())?;
    for n in &names {
        let a = std::fs::read(dirs[0].path().join(n)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(n)).map_err(|e| e.to_string())?;
        check(a == b, || format!("{n:?} differs between runs"))?;
    }
    let secs = suite_start.elapsed().as_secs_f64();
    check(secs < 180.0, || format!("suite took {secs:.1} s"))?;
    Ok(format!("{} artifacts byte-identical, suite {secs:.1} s", names.len()))
}

fn main() {
    let start = Instant::now();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("wavelet round-trip", Box::new(wavelet_round_trip)),
        ("fusion endpoints", Box::new(fusion_endpoints)),
        ("non-local oracle", Box::new(nonlocal_oracle)),
        ("attention sampling", Box::new(attention_sampling)),
        ("line IoU / cost / assignment", Box::new(assignment_oracles)),
        ("loss", Box::new(loss_properties)),
        ("NMS", Box::new(nms_reference)),
        ("metrics", Box::new(metric_fixtures)),
        ("preprocess", Box::new(preprocess_identities)),
        ("end-to-end determinism", Box::new(move || demo_determinism(start))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
