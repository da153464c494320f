//! Command-line front end: synthetic data generation, training, inference,
//! evaluation, and heatmap visualization.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use f2net::center::{CenterConfig, CenterStrategy, default_sigma_gt};
use f2net::checkpoint;
use f2net::config::Config;
use f2net::data::{DataConfig, Scenario, gen_synthetic, load_dataset, write_dataset};
use f2net::fusion::FusionMode;
use f2net::imageio;
use f2net::metrics::{
    MetricReport, boundary_accuracy, default_boundary_tol, region_similarity,
};
use f2net::model::{
    EpochLog, MatchingMode, ModelConfig, TrainConfig, binarize, infer_sequence, init_params,
    train,
};
use f2net::params::ParamSet;
use f2net::tensor::{Precision, Tensor};
use f2net::{F2NetError, Result};

#[derive(Parser)]
#[command(name = "f2net", about = "Center-guided video object segmentation, desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset in the DAVIS-style layout.
    GenData(GenDataArgs),
    /// Train a model and write checkpoint + metrics log.
    Train(TrainArgs),
    /// Run inference over one sequence directory.
    Infer(InferArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Write heatmap overlays for one sequence.
    Viz(InferArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of plain,similarity,occlusion,appearance-change.
    #[arg(long, default_value = "plain,similarity,occlusion,appearance-change")]
    scenarios: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 12)]
    frames: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSV; defaults to the checkpoint path with a .csv extension.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Resume from an existing checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// First epoch of the resumed run.
    #[arg(long, default_value_t = 0)]
    start_epoch: usize,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Directory of frame PNGs for one sequence.
    #[arg(long)]
    seq: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory containing one subdirectory of mask PNGs per sequence.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 for parse failures; our contract says 1,
            // except that --help/--version remain successful
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Train(args) => cmd_train(args),
        Command::Infer(args) => cmd_infer(args, false),
        Command::Viz(args) => cmd_infer(args, true),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &F2NetError) -> u8 {
    match err {
        F2NetError::Config(_) => 1,
        _ => 2,
    }
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let scenarios = args
        .scenarios
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| Scenario::parse(s.trim()))
        .collect::<Result<Vec<_>>>()?;
    let cfg = DataConfig {
        width: args.width,
        height: args.height,
        frames: args.frames,
        count: args.count,
        scenarios,
        motion_scale: 1.0,
    };
    let seed = match std::env::var("F2NET_SEED") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| F2NetError::Config(format!("bad F2NET_SEED `{raw}`")))?,
        Err(_) => args.seed,
    };
    let samples = gen_synthetic(&cfg, seed)?;
    write_dataset(&args.out, &samples)?;
    println!(
        "wrote {} sequences ({} frames each) to {}",
        samples.len(),
        cfg.frames,
        args.out.display()
    );
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn model_config_from(cfg: &Config) -> Result<ModelConfig> {
    let defaults = ModelConfig::default();
    let width = cfg.usize_or("width", defaults.width)?;
    let height = cfg.usize_or("height", defaults.height)?;
    let sigma_gt_default = default_sigma_gt(width / 4, height / 4);
    let model = ModelConfig {
        width,
        height,
        c2: cfg.usize_or("c2", defaults.c2)?,
        c4: cfg.usize_or("c4", defaults.c4)?,
        c_embed: cfg.usize_or("c_embed", defaults.c_embed)?,
        d_center: cfg.usize_or("d_center", defaults.d_center)?,
        dec_mid: cfg.usize_or("dec_mid", defaults.dec_mid)?,
        fusion: FusionMode::parse(cfg.str_or("fusion", "csa"))?,
        matching: MatchingMode::parse(cfg.str_or("matching", "center-guided"))?,
        strategy: match cfg.str_or("strategy", "motion") {
            "motion" => CenterStrategy::Motion,
            "maximum" => CenterStrategy::Maximum,
            other => {
                return Err(F2NetError::Config(format!("unknown strategy `{other}`")));
            }
        },
        center: CenterConfig {
            k: cfg.usize_or("k", 5)?,
            n: cfg.usize_or("n", 10)?,
            nms_window: cfg.usize_or("nms_window", 3)?,
            sigma_gt: cfg.f64_or("sigma_gt", sigma_gt_default)?,
        },
        sigma_match: cfg.get("sigma_match").map(|_| cfg.f64_or("sigma_match", 0.0)).transpose()?,
    };
    model.validate()?;
    Ok(model)
}

fn train_config_from(cfg: &Config) -> Result<TrainConfig> {
    let defaults = TrainConfig::default();
    let tcfg = TrainConfig {
        lr: cfg.f64_or("lr", defaults.lr)?,
        batch_size: cfg.usize_or("batch_size", defaults.batch_size)?,
        epochs: cfg.usize_or("epochs", defaults.epochs)?,
        gt_center_epochs: cfg.usize_or("gt_center_epochs", defaults.gt_center_epochs)?,
        seed: cfg.seed(defaults.seed)?,
        precision: match cfg.str_or("precision", "double") {
            "double" | "f64" => Precision::Double,
            "single" | "f32" => Precision::Single,
            other => {
                return Err(F2NetError::Config(format!("unknown precision `{other}`")));
            }
        },
        clip_norm: cfg.f64_or("clip_norm", defaults.clip_norm)?,
        static_loss_full: match cfg.str_or("static_loss", "full") {
            "full" => true,
            "lf_only" => false,
            other => {
                return Err(F2NetError::Config(format!("unknown static_loss `{other}`")));
            }
        },
    };
    tcfg.validate()?;
    Ok(tcfg)
}

fn append_log(path: &Path, log: &EpochLog) -> Result<()> {
    use std::io::Write;
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if fresh {
        writeln!(file, "epoch,phase,loss_f,loss_b,val_J")?;
    }
    writeln!(
        file,
        "{},static,{:.6},{:.6},{:.6}",
        log.epoch, log.static_f, log.static_b, log.val_j
    )?;
    writeln!(
        file,
        "{},dynamic,{:.6},{:.6},{:.6}",
        log.epoch, log.dynamic_f, log.dynamic_b, log.val_j
    )?;
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg_file = load_config(&args.config)?;
    let model_cfg = model_config_from(&cfg_file)?;
    let tcfg = train_config_from(&cfg_file)?;
    let videos = load_dataset(&args.data)?;
    let digest = model_cfg.digest();

    let mut params = match &args.resume {
        Some(ckpt) => {
            let (params, stored) = checkpoint::load(ckpt)?;
            if stored != digest {
                return Err(F2NetError::Format(
                    "checkpoint config digest does not match the given config".into(),
                ));
            }
            params
        }
        None => init_params(&model_cfg, tcfg.seed)?,
    };

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("csv"));
    if args.start_epoch == 0 && log_path.exists() {
        std::fs::remove_file(&log_path)?;
    }
    let out = args.out.clone();
    train(
        &model_cfg,
        &tcfg,
        &mut params,
        &videos,
        args.start_epoch,
        |log, params| {
            append_log(&log_path, log)?;
            checkpoint::save(&out, params, &digest)?;
            println!(
                "epoch {:3}  L_f {:10.4}  L_b {:10.4}  val_J {:.4}",
                log.epoch,
                log.loss_f(),
                log.loss_b(),
                log.val_j
            );
            Ok(())
        },
    )?;
    if tcfg.epochs == args.start_epoch || tcfg.epochs == 0 {
        // still produce a checkpoint for downstream commands
        checkpoint::save(&args.out, &params, &digest)?;
    }
    println!("checkpoint: {}", args.out.display());
    Ok(())
}

fn load_model(args_config: &Option<PathBuf>, ckpt: &Path) -> Result<(ModelConfig, ParamSet)> {
    let cfg_file = load_config(args_config)?;
    let model_cfg = model_config_from(&cfg_file)?;
    let (params, stored) = checkpoint::load(ckpt)?;
    if stored != model_cfg.digest() {
        return Err(F2NetError::Format(
            "checkpoint config digest does not match the given config".into(),
        ));
    }
    Ok((model_cfg, params))
}

/// Nearest-neighbor expansion of a quarter-resolution map to full resolution.
fn expand4(map: &Tensor) -> Tensor {
    let (h, w) = (map.shape[0], map.shape[1]);
    let (fh, fw) = (h * 4, w * 4);
    let mut data = vec![0.0; fh * fw];
    for y in 0..fh {
        for x in 0..fw {
            data[y * fw + x] = map.data[(y / 4) * w + x / 4];
        }
    }
    Tensor::new(&[fh, fw, 1], data).expect("expanded shape")
}

fn cmd_infer(args: InferArgs, overlay: bool) -> Result<()> {
    let (model_cfg, params) = load_model(&args.config, &args.ckpt)?;
    let frame_paths = imageio::list_pngs(&args.seq)?;
    if frame_paths.is_empty() {
        return Err(F2NetError::EmptyInput(format!(
            "no frames under {}",
            args.seq.display()
        )));
    }
    let frames = frame_paths
        .iter()
        .map(|p| imageio::read_frame(p))
        .collect::<Result<Vec<_>>>()?;
    for frame in &frames {
        if frame.shape[0] != model_cfg.height || frame.shape[1] != model_cfg.width {
            return Err(F2NetError::Geometry(format!(
                "frame is {}x{}, model expects {}x{}",
                frame.shape[1], frame.shape[0], model_cfg.width, model_cfg.height
            )));
        }
    }
    let outputs = infer_sequence(&model_cfg, &params, &frames)?;
    std::fs::create_dir_all(&args.out)?;
    for (i, out) in outputs.iter().enumerate() {
        if overlay {
            let heat_full = expand4(&out.heatmap.values);
            imageio::write_overlay(
                &args.out.join(format!("{i:05}.png")),
                &frames[i],
                &heat_full,
            )?;
        } else {
            imageio::write_mask(&args.out.join(format!("{i:05}.png")), &binarize(&out.mask))?;
            imageio::write_heatmap_png(
                &args.out.join(format!("{i:05}_heat.png")),
                &out.heatmap,
            )?;
        }
    }
    println!("wrote {} frames to {}", outputs.len(), args.out.display());
    Ok(())
}

fn sequence_dirs(root: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(F2NetError::EmptyInput(format!(
            "no sequence directories under {}",
            root.display()
        )));
    }
    Ok(names)
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let names = sequence_dirs(&args.pred)?;
    let mut per_seq = Vec::new();
    for name in names {
        let pred_paths = imageio::list_pngs(&args.pred.join(&name))?;
        let gt_paths = imageio::list_pngs(&args.gt.join(&name))?;
        if pred_paths.is_empty() || pred_paths.len() != gt_paths.len() {
            return Err(F2NetError::Format(format!(
                "sequence `{name}`: {} predictions vs {} ground-truth masks",
                pred_paths.len(),
                gt_paths.len()
            )));
        }
        let mut j_vals = Vec::new();
        let mut f_vals = Vec::new();
        for (pp, gp) in pred_paths.iter().zip(&gt_paths) {
            let pred = imageio::read_mask(pp)?;
            let gt = imageio::read_mask(gp)?;
            let tol = default_boundary_tol(gt.shape[1], gt.shape[0]);
            j_vals.push(region_similarity(&pred, &gt)?);
            f_vals.push(boundary_accuracy(&pred, &gt, tol)?);
        }
        per_seq.push((name, j_vals, f_vals));
    }
    let report = MetricReport::from_frames(per_seq)?;
    std::fs::write(&args.report, report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}
