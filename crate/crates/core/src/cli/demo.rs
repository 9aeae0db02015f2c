//! End-to-end run on the bundled dark-road fixture.
//!
//! The untrained stand-in for a backbone is the Haar energy of the enhanced
//! frame: `[LL / 2, |LH|, |HL|, |HH|]` at half resolution. Candidate lanes are
//! straight segments from the bottom row to a fixed horizon, scored by the
//! mean fused response on the sampled rows.

use std::fmt::Write as _;

use crate::assignloss::LossWeights;
use crate::error::Result;
use crate::eval::{culane_counts, mf1_thresholds, EvalReport};
use crate::inference::{infer, InferenceConfig};
use crate::lanegeom::{sample_rows, GtLane, LanePrior, SampleConfig, DEFAULT_PRIOR_POINTS};
use crate::preprocess::{analyze_histogram, enhance_stages, gamma_exponent, EnhanceConfig};
use crate::tensorio::{decode_image, encode_image, encode_tensor, format_lanes, parse_lanes, FeatureMap, ImageU8, LaneFile};
use crate::wavelet::{dwt2, fuse, make_weights, wavelet_nonlocal, FusionConfig};

pub const FIXTURE_IMAGE: &[u8] = include_bytes!("../../fixtures/dark_road.pgm");
pub const FIXTURE_LANES: &str = include_str!("../../fixtures/dark_road.lines.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    pub enhance: EnhanceConfig,
    pub fusion: FusionConfig,
    /// `image_height` is ignored; rows span the road region.
    pub sample: SampleConfig,
    pub inference: InferenceConfig,
    pub embed: usize,
    pub horizon: f64,
    pub lane_width: f64,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            enhance: EnhanceConfig::default(),
            fusion: FusionConfig::default(),
            sample: SampleConfig::default(),
            inference: InferenceConfig::default(),
            embed: 2,
            horizon: 0.4,
            lane_width: 10.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    /// File name and contents, in write order.
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub summary: String,
    pub report: EvalReport,
}

fn energy_features(img: &ImageU8) -> Result<FeatureMap<f64>> {
    let x = FeatureMap::new(1, img.height, img.width, img.data.iter().map(|&v| v as f64 / 255.0).collect())?;
    let s = dwt2(&x)?;
    let (h, w) = (s.ll.height(), s.ll.width());
    let mut data = Vec::with_capacity(4 * h * w);
    data.extend(s.ll.data().iter().map(|v| v * 0.5));
    for band in [&s.lh, &s.hl, &s.hh] {
        data.extend(band.data().iter().map(|v| v.abs()));
    }
    FeatureMap::new(4, h, w, data)
}

/// Channel sum of `m`, bilinearly sampled at full-resolution `(y, x)`.
fn response(m: &FeatureMap<f64>, y: f64, x: f64) -> f64 {
    let (c, h, w) = m.dims();
    let fy = (y / 2.0).clamp(0.0, (h - 1) as f64);
    let fx = x / 2.0;
    if fx < 0.0 || fx > (w - 1) as f64 {
        return 0.0;
    }
    let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
    (0..c)
        .map(|ch| {
            let top = m.get(ch, y0, x0) * (1.0 - tx) + m.get(ch, y0, x1) * tx;
            let bot = m.get(ch, y1, x0) * (1.0 - tx) + m.get(ch, y1, x1) * tx;
            top * (1.0 - ty) + bot * ty
        })
        .sum()
}

fn tensor_bytes(ts: &[FeatureMap<f32>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for t in ts {
        encode_tensor(t, &mut out)?;
    }
    Ok(out)
}

pub fn run_demo(cfg: &DemoConfig) -> Result<DemoOutput> {
    let img = decode_image(FIXTURE_IMAGE)?;
    let gt: LaneFile<f64> = parse_lanes(FIXTURE_LANES)?;
    let (h, w) = (img.height, img.width);

    let stages = enhance_stages(&img, &cfg.enhance)?;
    let enhanced = &stages.output;
    let mean_out = analyze_histogram(enhanced, &cfg.enhance).mean_luminance;

    let fpn = energy_features(enhanced)?;
    let weights = make_weights::<f64>(fpn.channels(), cfg.embed, cfg.seed)?;
    let we = wavelet_nonlocal(&fpn, &weights)?;
    let fused = fuse(&fpn, &we, &cfg.fusion, &weights.clone().with_identity_refine())?;

    let bottom = (h - 1) as f64;
    let top = (cfg.horizon * bottom).round();
    let sample = SampleConfig {
        image_height: (bottom - top) as u32,
        ..cfg.sample
    };
    sample.validate()?;
    // Row offsets measured upward from the bottom row.
    let rows: Vec<f64> = sample_rows(&sample).iter().map(|&r| bottom - r as f64).collect();

    let mut raw = Vec::new();
    for xb in (0..=w).step_by(4) {
        for xt in (w / 4..=3 * w / 4).step_by(2) {
            let (xb, xt) = (xb as f64, xt as f64);
            let s: f64 = rows
                .iter()
                .map(|&y| response(&fused, y, xb + (xt - xb) * (bottom - y) / (bottom - top)))
                .sum();
            raw.push((xb, xt, s / rows.len() as f64));
        }
    }
    let lo = raw.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let hi = raw.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let candidates = raw
        .iter()
        .map(|&(xb, xt, s)| {
            let lane = GtLane::new(vec![(xb, bottom), (xt, top)]);
            LanePrior::from_polyline(&lane, h, DEFAULT_PRIOR_POINTS, (s - lo) / span)
        })
        .collect::<Result<Vec<_>>>()?;

    let e = LossWeights::radius_for_width(w);
    let kept = infer(&candidates, &cfg.inference, e);
    let detections = LaneFile::priors(h, w, kept);
    let taus = mf1_thresholds();
    let counts = culane_counts(&detections, &gt, &taus, cfg.lane_width)?;
    let report = EvalReport::from_counts(&taus, &counts, true);

    let mut summary = String::new();
    let _ = writeln!(summary, "seed={}", cfg.seed);
    let _ = writeln!(summary, "image={}x{}", h, w);
    let _ = writeln!(summary, "exposure={:?}", stages.report.flag);
    let _ = writeln!(summary, "mean_luminance_in={:.6}", stages.report.mean_luminance);
    let _ = writeln!(
        summary,
        "gamma={:.6}",
        gamma_exponent(stages.report.mean_luminance, cfg.enhance.gamma_target)
    );
    let _ = writeln!(summary, "mean_luminance_out={mean_out:.6}");
    let _ = writeln!(summary, "feature_dims={}x{}x{}", fpn.channels(), fpn.height(), fpn.width());
    let _ = writeln!(summary, "alpha={}", cfg.fusion.alpha);
    let _ = writeln!(summary, "sample_rows={}", rows.len());
    let _ = writeln!(summary, "candidates={}", candidates.len());
    let _ = writeln!(summary, "detections={}", detections.len());
    let _ = writeln!(summary, "ground_truth={}", gt.len());
    summary.push_str(&report.to_key_values());

    let row_text: String = rows.iter().map(|y| format!("{}\n", *y as u32)).collect();
    let mut artifacts = vec![
        ("enhanced.pgm".to_string(), encode_image(enhanced)?),
        ("features.wfpn".to_string(), tensor_bytes(&[fpn.cast()])?),
        ("wavelet_branch.wfpn".to_string(), tensor_bytes(&[we.cast()])?),
        ("fused.wfpn".to_string(), tensor_bytes(&[fused.cast()])?),
        ("weights.wfpn".to_string(), tensor_bytes(&weights.to_tensors()?)?),
        ("rows.txt".to_string(), row_text.into_bytes()),
        ("detections.txt".to_string(), format_lanes(&detections).into_bytes()),
    ];
    artifacts.push(("summary.txt".to_string(), summary.clone().into_bytes()));
    Ok(DemoOutput {
        artifacts,
        summary,
        report,
    })
}
