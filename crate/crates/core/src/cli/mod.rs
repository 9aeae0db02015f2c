//! Command-line front end. Every subcommand reads its inputs, builds the
//! module config from defaults, the `--config` file, `--set` overrides and
//! explicit flags (in increasing precedence), and calls the library op.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod config;
pub mod demo;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::assignloss::{
    assignment_cost, dynamic_topk_assign, liou_matrix, total_loss, CostWeights, LossWeights,
};
use crate::eval::{evaluate_paths, mf1_thresholds, EvalMode};
use crate::inference::{infer, InferenceConfig};
use crate::lanegeom::{native_rows, sample_rows, Canvas, SampleConfig, SampleMode};
use crate::preprocess::{enhance_stages, gamma_exponent, EnhanceConfig, ExposureFlag};
use crate::tensorio::{
    read_image, read_lanes, read_tensor, read_tensors, write_image, write_lanes, write_tensor, write_tensors,
    FeatureMap, LaneFile,
};
use crate::wavelet::{
    dwt2, fuse, idwt2, make_weights, read_weights, wavelet_nonlocal, write_weights, BlockWeights, FusionConfig,
    Subbands,
};
use config::*;
use demo::{run_demo, DemoConfig};

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Data(crate::Error),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Data(e)
    }
}

/// Config validation failures are the caller's fault.
fn usage_on_err(r: crate::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "wavelane", version, about = "Deterministic lane-detection toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// key=value settings file ("#" starts a comment)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one setting; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for every pseudo-random draw
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exposure analysis, adaptive gamma, CLAHE and guided filtering of a PGM/PPM
    #[command(after_help = keys_help(&[ENHANCE_KEYS]))]
    Enhance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Stop after this stage
        #[arg(long, value_enum, default_value_t = Stage::Full)]
        stage: Stage,
    },
    /// Haar transform, non-local block and weight generation on tensor files
    #[command(subcommand)]
    Wavelet(WaveletCmd),
    /// Blend the plain and wavelet-enhanced branches and apply the 3x3 refinement
    #[command(after_help = keys_help(&[FUSION_KEYS, EMBED_KEYS]))]
    Fuse {
        /// Plain branch tensor
        #[arg(long)]
        fpn: PathBuf,
        /// Wavelet-enhanced branch tensor; computed from --fpn when absent
        #[arg(long)]
        we: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Weight of the wavelet-enhanced branch [default: 0.7]
        #[arg(long)]
        alpha: Option<f64>,
        /// Block weights file; seeded weights when absent
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Replace the refinement kernel by the identity
        #[arg(long)]
        identity_refine: bool,
    },
    /// Print sampled row indices, one per line
    #[command(after_help = keys_help(&[SAMPLE_KEYS]))]
    Sample {
        /// Last row index of the range [default: 320]
        #[arg(long)]
        height: Option<u32>,
        /// Number of rows [default: 36]
        #[arg(long)]
        n: Option<usize>,
        /// Warp base [default: 10]
        #[arg(long)]
        beta: Option<f64>,
        /// [default: attention]
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Assignment cost matrix and dynamic top-k assignment as tab-separated text
    #[command(after_help = keys_help(&[COST_KEYS, LOSS_KEYS]))]
    Assign(AssignArgs),
    /// Training loss breakdown of the dynamic top-k assignment
    #[command(after_help = keys_help(&[COST_KEYS, LOSS_KEYS]))]
    Loss(AssignArgs),
    /// Score filtering and Line-IoU NMS of a prior lane file
    #[command(after_help = keys_help(&[INFERENCE_KEYS]))]
    Nms {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// CULane F1/mF1 or TuSimple accuracy of prediction files against annotations
    #[command(after_help = keys_help(&[EVAL_KEYS]))]
    Eval {
        #[arg(long, value_enum, default_value_t = ModeEval::Culane)]
        mode: ModeEval,
        /// IoU threshold; repeatable [default: 0.50..0.95 step 0.05]
        #[arg(long)]
        tau: Vec<f64>,
        /// Lane width in pixels [default: 30]
        #[arg(long)]
        width: Option<f64>,
        /// Worker threads [default: 1]
        #[arg(long)]
        threads: Option<usize>,
        /// Prediction file or directory
        preds: PathBuf,
        /// Annotation file or directory
        gts: PathBuf,
    },
    /// Run the whole pipeline on the bundled fixture and write its artifacts
    #[command(after_help = keys_help(&[ENHANCE_KEYS, FUSION_KEYS, EMBED_KEYS, SAMPLE_KEYS, INFERENCE_KEYS, DEMO_KEYS]))]
    Demo {
        #[arg(long, default_value = "demo_out")]
        output_dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum WaveletCmd {
    /// One-level 2D Haar transform; writes LL, LH, HL, HH records
    Dwt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Inverse of `dwt`
    Idwt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Non-local block on the LL subband followed by the inverse transform
    #[command(after_help = keys_help(&[EMBED_KEYS]))]
    Nonlocal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Block weights file; seeded weights when absent
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Seeded block weights
    MakeWeights {
        #[arg(long)]
        channels: usize,
        /// [default: max(channels/2, 1)]
        #[arg(long)]
        embed: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args, Debug)]
struct AssignArgs {
    /// Prior lane file
    #[arg(long)]
    preds: PathBuf,
    /// Annotation lane file
    #[arg(long)]
    gts: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Gamma,
    Clahe,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Attention,
    Uniform,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeEval {
    Culane,
    Tusimple,
}

fn parse_mode(s: &str) -> CliResult<SampleMode> {
    match s {
        "attention" => Ok(SampleMode::Attention),
        "uniform" => Ok(SampleMode::Uniform),
        _ => Err(CliError::Usage(format!("mode must be attention or uniform, got {s:?}"))),
    }
}

fn enhance_config(s: &Settings) -> CliResult<EnhanceConfig> {
    let d = EnhanceConfig::default();
    let cfg = EnhanceConfig {
        clahe_tiles: s.pick(None, "clahe_tiles", d.clahe_tiles)?,
        clahe_clip: s.pick(None, "clahe_clip", d.clahe_clip)?,
        guided_radius: s.pick(None, "guided_radius", d.guided_radius)?,
        guided_epsilon: s.pick(None, "guided_epsilon", d.guided_epsilon)?,
        gamma_target: s.pick(None, "gamma_target", d.gamma_target)?,
        under_thresh: s.pick(None, "under_thresh", d.under_thresh)?,
        over_thresh: s.pick(None, "over_thresh", d.over_thresh)?,
    };
    usage_on_err(cfg.validate())?;
    Ok(cfg)
}

fn fusion_config(s: &Settings, alpha: Option<f64>) -> CliResult<FusionConfig> {
    let cfg = FusionConfig {
        alpha: s.pick(alpha, "alpha", FusionConfig::default().alpha)?,
    };
    usage_on_err(cfg.validate())?;
    Ok(cfg)
}

fn sample_config(s: &Settings, height: Option<u32>, n: Option<usize>, beta: Option<f64>, mode: Option<ModeArg>) -> CliResult<SampleConfig> {
    let d = SampleConfig::default();
    let mode = match mode {
        Some(ModeArg::Attention) => SampleMode::Attention,
        Some(ModeArg::Uniform) => SampleMode::Uniform,
        None => match s.get::<String>("mode")? {
            Some(m) => parse_mode(&m)?,
            None => d.mode,
        },
    };
    let cfg = SampleConfig {
        n_sample: s.pick(n, "n_sample", d.n_sample)?,
        image_height: s.pick(height, "image_height", d.image_height)?,
        beta: s.pick(beta, "beta", d.beta)?,
        mode,
    };
    usage_on_err(cfg.validate())?;
    Ok(cfg)
}

fn inference_config(s: &Settings) -> CliResult<InferenceConfig> {
    let d = InferenceConfig::default();
    let cfg = InferenceConfig {
        score_threshold: s.pick(None, "score_threshold", d.score_threshold)?,
        nms_iou_threshold: s.pick(None, "nms_iou_threshold", d.nms_iou_threshold)?,
        max_lanes: s.pick(None, "max_lanes", d.max_lanes)?,
        nms_free: s.pick(None, "nms_free", d.nms_free)?,
    };
    usage_on_err(cfg.validate())?;
    Ok(cfg)
}

fn loss_weights(s: &Settings, canvas_width: usize) -> CliResult<LossWeights> {
    let d = LossWeights::default();
    let lw = LossWeights {
        w_cls: s.pick(None, "w_cls", d.w_cls)?,
        w_xytl: s.pick(None, "w_xytl", d.w_xytl)?,
        w_liou: s.pick(None, "w_liou", d.w_liou)?,
        focal_alpha: s.pick(None, "focal_alpha", d.focal_alpha)?,
        focal_gamma: s.pick(None, "focal_gamma", d.focal_gamma)?,
        liou_radius_e: s.pick(None, "liou_radius_e", LossWeights::radius_for_width(canvas_width))?,
    };
    usage_on_err(lw.validate())?;
    Ok(lw)
}

fn cost_weights(s: &Settings) -> CliResult<(CostWeights, usize)> {
    let d = CostWeights::default();
    let cw = CostWeights {
        w_sim: s.pick(None, "cost_w_sim", d.w_sim)?,
        w_cls: s.pick(None, "cost_w_cls", d.w_cls)?,
    };
    usage_on_err(cw.validate())?;
    let k_cap: usize = s.pick(None, "k_cap", 4)?;
    if k_cap == 0 {
        return Err(CliError::Usage("k_cap must be >= 1".into()));
    }
    Ok((cw, k_cap))
}

fn embed_for(s: &Settings, channels: usize, flag: Option<usize>) -> CliResult<usize> {
    s.pick(flag, "embed", (channels / 2).max(1))
}

fn block_weights(s: &Settings, path: Option<&Path>, channels: usize, seed: u64) -> CliResult<BlockWeights<f64>> {
    Ok(match path {
        Some(p) => read_weights(p)?.cast(),
        None => make_weights(channels, embed_for(s, channels, None)?, seed)?,
    })
}

fn load_pair(a: &AssignArgs) -> CliResult<(LaneFile<f64>, LaneFile<f64>)> {
    let preds: LaneFile<f64> = read_lanes(&a.preds)?;
    let gts: LaneFile<f64> = read_lanes(&a.gts)?;
    preds.as_priors()?;
    if (preds.image_height, preds.image_width) != (gts.image_height, gts.image_width) {
        return Err(CliError::Data(crate::Error::Validation(
            "prediction and annotation canvases differ".into(),
        )));
    }
    Ok((preds, gts))
}

fn exposure_name(f: ExposureFlag) -> &'static str {
    match f {
        ExposureFlag::Under => "under",
        ExposureFlag::Over => "over",
        ExposureFlag::Normal => "normal",
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let s = Settings::load(cli.global.config.as_deref(), &cli.global.set)?;
    let seed = cli.global.seed;
    let mut text = String::new();
    match cli.command {
        Command::Enhance { input, output, stage } => {
            s.check_keys(&[ENHANCE_KEYS])?;
            let cfg = enhance_config(&s)?;
            let img = read_image(&input)?;
            let st = enhance_stages(&img, &cfg)?;
            let result = match stage {
                Stage::Gamma => &st.gamma,
                Stage::Clahe => &st.clahe,
                Stage::Full => &st.output,
            };
            write_image(result, &output)?;
            let r = st.report;
            let _ = writeln!(text, "mean_luminance={:.6}", r.mean_luminance);
            let _ = writeln!(text, "underexposed_fraction={:.6}", r.underexposed_fraction);
            let _ = writeln!(text, "overexposed_fraction={:.6}", r.overexposed_fraction);
            let _ = writeln!(text, "exposure={}", exposure_name(r.flag));
            let _ = writeln!(text, "gamma={:.6}", gamma_exponent(r.mean_luminance, cfg.gamma_target));
        }
        Command::Wavelet(cmd) => match cmd {
            WaveletCmd::Dwt { input, output } => {
                s.check_keys(&[])?;
                let x = read_tensor(&input)?.cast::<f64>();
                let b = dwt2(&x)?;
                write_tensors(&[b.ll.cast(), b.lh.cast(), b.hl.cast(), b.hh.cast()], &output)?;
            }
            WaveletCmd::Idwt { input, output } => {
                s.check_keys(&[])?;
                let ts = read_tensors(&input)?;
                if ts.len() != 4 {
                    return Err(CliError::Data(crate::Error::Format(format!(
                        "expected 4 subband records, found {}",
                        ts.len()
                    ))));
                }
                let c: Vec<FeatureMap<f64>> = ts.iter().map(|t| t.cast()).collect();
                let b = Subbands::new(c[0].clone(), c[1].clone(), c[2].clone(), c[3].clone())?;
                write_tensor(&idwt2(&b)?.cast(), &output)?;
            }
            WaveletCmd::Nonlocal { input, output, weights } => {
                s.check_keys(&[EMBED_KEYS])?;
                let x = read_tensor(&input)?.cast::<f64>();
                let w = block_weights(&s, weights.as_deref(), x.channels(), seed)?;
                write_tensor(&wavelet_nonlocal(&x, &w)?.cast(), &output)?;
            }
            WaveletCmd::MakeWeights { channels, embed, output } => {
                s.check_keys(&[EMBED_KEYS])?;
                let e = embed_for(&s, channels, embed)?;
                let w = make_weights::<f32>(channels, e, seed).map_err(|e| CliError::Usage(e.to_string()))?;
                write_weights(&w, &output)?;
            }
        },
        Command::Fuse {
            fpn,
            we,
            output,
            alpha,
            weights,
            identity_refine,
        } => {
            s.check_keys(&[FUSION_KEYS, EMBED_KEYS])?;
            let cfg = fusion_config(&s, alpha)?;
            let fpn = read_tensor(&fpn)?.cast::<f64>();
            let mut w = block_weights(&s, weights.as_deref(), fpn.channels(), seed)?;
            let we = match we {
                Some(p) => read_tensor(&p)?.cast::<f64>(),
                None => wavelet_nonlocal(&fpn, &w)?,
            };
            if identity_refine {
                w = w.with_identity_refine();
            }
            write_tensor(&fuse(&fpn, &we, &cfg, &w)?.cast(), &output)?;
        }
        Command::Sample { height, n, beta, mode } => {
            s.check_keys(&[SAMPLE_KEYS])?;
            let cfg = sample_config(&s, height, n, beta, mode)?;
            for r in sample_rows(&cfg) {
                let _ = writeln!(text, "{r}");
            }
        }
        Command::Assign(a) => {
            s.check_keys(&[COST_KEYS, LOSS_KEYS])?;
            let (preds, gts) = load_pair(&a)?;
            let lw = loss_weights(&s, preds.image_width)?;
            let (cw, k_cap) = cost_weights(&s)?;
            let priors = preds.as_priors()?;
            let lanes = gts.polylines();
            let canvas = Canvas::new(preds.image_height, preds.image_width);
            let grid = native_rows::<f64>(preds.image_height, priors.first().map_or(2, |p| p.n_points()));
            let cm = assignment_cost(priors, &lanes, &cw, &lw, &grid, canvas)?;
            let liou = liou_matrix(priors, &lanes, &grid, canvas, lw.liou_radius_e);
            let asg = dynamic_topk_assign(&cm, &liou, k_cap)?;
            let owner = asg.pred_to_gt(priors.len());
            text.push_str("pred\tgt\tcost\tc_sim\tc_dis\tc_xy\tc_theta\tc_cls\tliou\tassigned\n");
            for p in 0..cm.n_pred {
                for g in 0..cm.n_gt {
                    let c = cm.component(p, g);
                    let _ = writeln!(
                        text,
                        "{p}\t{g}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{}",
                        cm.get(p, g),
                        c.c_sim,
                        c.c_dis,
                        c.c_xy,
                        c.c_theta,
                        c.c_cls,
                        liou[p * cm.n_gt + g],
                        u8::from(owner[p] == Some(g))
                    );
                }
            }
        }
        Command::Loss(a) => {
            s.check_keys(&[COST_KEYS, LOSS_KEYS])?;
            let (preds, gts) = load_pair(&a)?;
            let lw = loss_weights(&s, preds.image_width)?;
            let (cw, k_cap) = cost_weights(&s)?;
            let priors = preds.as_priors()?;
            let lanes = gts.polylines();
            let canvas = Canvas::new(preds.image_height, preds.image_width);
            let grid = native_rows::<f64>(preds.image_height, priors.first().map_or(2, |p| p.n_points()));
            let cm = assignment_cost(priors, &lanes, &cw, &lw, &grid, canvas)?;
            let liou = liou_matrix(priors, &lanes, &grid, canvas, lw.liou_radius_e);
            let asg = dynamic_topk_assign(&cm, &liou, k_cap)?;
            let l = total_loss(priors, &lanes, &asg, &lw, &grid, canvas)?;
            text.push_str("total\tl_cls\tl_xytl\tl_liou\tpositives\n");
            let _ = writeln!(
                text,
                "{:.9}\t{:.9}\t{:.9}\t{:.9}\t{}",
                l.total, l.l_cls, l.l_xytl, l.l_liou, l.positives
            );
        }
        Command::Nms { input, output } => {
            s.check_keys(&[INFERENCE_KEYS])?;
            let cfg = inference_config(&s)?;
            let lf: LaneFile<f64> = read_lanes(&input)?;
            let e = s.pick(None, "liou_radius_e", LossWeights::radius_for_width(lf.image_width))?;
            if !(e > 0.0) {
                return Err(CliError::Usage("liou_radius_e must be > 0".into()));
            }
            let kept = infer(lf.as_priors()?, &cfg, e);
            let _ = writeln!(text, "input={}", lf.len());
            let _ = writeln!(text, "kept={}", kept.len());
            write_lanes(&LaneFile::priors(lf.image_height, lf.image_width, kept), &output)?;
        }
        Command::Eval {
            mode,
            tau,
            width,
            threads,
            preds,
            gts,
        } => {
            s.check_keys(&[EVAL_KEYS])?;
            let width = s.pick(width, "lane_width", crate::eval::DEFAULT_LANE_WIDTH)?;
            let threads = s.pick(threads, "threads", 1usize)?;
            if !(width > 0.0) || threads == 0 {
                return Err(CliError::Usage("lane_width and threads must be positive".into()));
            }
            let taus = if tau.is_empty() { mf1_thresholds() } else { tau };
            if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(CliError::Usage("tau must lie in [0, 1]".into()));
            }
            let mode = match mode {
                ModeEval::Culane => EvalMode::Culane,
                ModeEval::Tusimple => EvalMode::Tusimple,
            };
            let report = evaluate_paths(&preds, &gts, mode, &taus, width, threads)?;
            text.push_str(&report.to_table());
            text.push_str(&report.to_key_values());
        }
        Command::Demo { output_dir } => {
            s.check_keys(&[ENHANCE_KEYS, FUSION_KEYS, EMBED_KEYS, SAMPLE_KEYS, INFERENCE_KEYS, DEMO_KEYS])?;
            let d = DemoConfig::default();
            let cfg = DemoConfig {
                enhance: enhance_config(&s)?,
                fusion: fusion_config(&s, None)?,
                sample: sample_config(&s, None, None, None, None)?,
                inference: inference_config(&s)?,
                embed: s.pick(None, "embed", d.embed)?,
                horizon: s.pick(None, "horizon", d.horizon)?,
                lane_width: s.pick(None, "lane_width", d.lane_width)?,
                seed,
            };
            if !(cfg.horizon > 0.0 && cfg.horizon < 1.0) || !(cfg.lane_width > 0.0) || cfg.embed == 0 {
                return Err(CliError::Usage("horizon must lie in (0, 1); lane_width and embed must be positive".into()));
            }
            let result = run_demo(&cfg)?;
            std::fs::create_dir_all(&output_dir).map_err(crate::Error::from)?;
            for (name, bytes) in &result.artifacts {
                std::fs::write(output_dir.join(name), bytes).map_err(crate::Error::from)?;
            }
            text.push_str(&result.summary);
        }
    }
    out.write_all(text.as_bytes()).map_err(crate::Error::from)?;
    Ok(())
}

/// Parses `argv` (program name first) and runs the subcommand, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(CliError::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

/// Runs with the process's standard streams.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
