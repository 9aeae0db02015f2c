//! `key=value` settings: a config file merged under `--set` overrides,
//! which in turn sit under explicit flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::CliError;

/// A documented setting: key, default, description.
pub(crate) type KeyDoc = (&'static str, &'static str, &'static str);

pub(crate) const ENHANCE_KEYS: &[KeyDoc] = &[
    ("clahe_tiles", "8", "CLAHE tiles per axis"),
    ("clahe_clip", "2.0", "CLAHE clip limit; >= 256 disables clipping"),
    ("guided_radius", "8", "guided filter window radius in pixels"),
    ("guided_epsilon", "0.001", "guided filter regularizer"),
    ("gamma_target", "0.5", "target mean luminance of gamma correction"),
    ("under_thresh", "0.35", "mean luminance below which a frame is underexposed"),
    ("over_thresh", "0.65", "mean luminance above which a frame is overexposed"),
];

pub(crate) const FUSION_KEYS: &[KeyDoc] = &[("alpha", "0.7", "weight of the wavelet-enhanced branch")];

pub(crate) const EMBED_KEYS: &[KeyDoc] = &[("embed", "max(C/2, 1)", "embedding channels of the non-local block")];

pub(crate) const SAMPLE_KEYS: &[KeyDoc] = &[
    ("n_sample", "36", "number of sampled rows"),
    ("image_height", "320", "last row index of the sampled range"),
    ("beta", "10", "base of the logarithmic warp (> 1)"),
    ("mode", "attention", "attention | uniform"),
];

pub(crate) const COST_KEYS: &[KeyDoc] = &[
    ("cost_w_sim", "1", "weight of the similarity cost"),
    ("cost_w_cls", "1", "weight of the classification cost"),
    ("k_cap", "4", "upper bound of dynamic k"),
];

pub(crate) const LOSS_KEYS: &[KeyDoc] = &[
    ("w_cls", "2", "classification loss weight"),
    ("w_xytl", "0.2", "geometry regression loss weight"),
    ("w_liou", "2", "Line IoU loss weight"),
    ("focal_alpha", "0.25", "focal loss class balance"),
    ("focal_gamma", "2", "focal loss focusing exponent"),
    ("liou_radius_e", "15*W/800", "Line IoU row half-width for canvas width W"),
];

pub(crate) const INFERENCE_KEYS: &[KeyDoc] = &[
    ("score_threshold", "0.4", "minimum score kept"),
    ("nms_iou_threshold", "0.5", "Line IoU above which lanes are suppressed"),
    ("max_lanes", "4", "maximum lanes kept"),
    ("nms_free", "false", "skip suppression"),
    ("liou_radius_e", "15*W/800", "Line IoU row half-width for canvas width W"),
];

pub(crate) const EVAL_KEYS: &[KeyDoc] = &[
    ("lane_width", "30", "rasterized lane width in pixels"),
    ("threads", "1", "worker threads for per-image evaluation"),
];

pub(crate) const DEMO_KEYS: &[KeyDoc] = &[
    ("horizon", "0.4", "top of candidate lanes as a fraction of image height"),
    ("lane_width", "10", "rasterized lane width for scoring"),
];

/// Help text listing every accepted key with its default.
pub(crate) fn keys_help(groups: &[&[KeyDoc]]) -> String {
    let mut out = String::from("Settings (--config FILE, --set KEY=VALUE; defaults shown):\n");
    let mut seen = Vec::new();
    for g in groups {
        for (k, d, desc) in g.iter() {
            if seen.contains(k) {
                continue;
            }
            seen.push(*k);
            let _ = writeln!(out, "  {:<20} {:<12} {desc}", format!("{k}="), d);
        }
    }
    out
}

#[derive(Debug, Default)]
pub(crate) struct Settings {
    values: BTreeMap<String, String>,
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

impl Settings {
    /// Reads `path` (if any), then applies `overrides` in order.
    pub(crate) fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = split_pair(line).ok_or_else(|| {
                    CliError::Usage(format!("{}:{}: expected key=value", p.display(), i + 1))
                })?;
                values.insert(k, v);
            }
        }
        for o in overrides {
            let (k, v) = split_pair(o).ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {o:?}")))?;
            values.insert(k, v);
        }
        Ok(Self { values })
    }

    /// Rejects keys not documented in `groups`.
    pub(crate) fn check_keys(&self, groups: &[&[KeyDoc]]) -> Result<(), CliError> {
        for k in self.values.keys() {
            if !groups.iter().any(|g| g.iter().any(|(name, _, _)| name == k)) {
                return Err(CliError::Usage(format!("unknown setting {k:?}")));
            }
        }
        Ok(())
    }

    pub(crate) fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid value {v:?} for {key}"))),
        }
    }

    /// `flag`, else the setting, else `default`.
    pub(crate) fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}
