use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lipinc_core::dataset::{DatasetIndex, Split};
use lipinc_core::extract::{ExtractConfig, SequenceBundle};
use lipinc_core::ingest::load_manifest;
use lipinc_core::metrics::{evaluate, predict_label, THRESHOLD};
use lipinc_core::mstie::{Branch, Branches, FusionMode};
use lipinc_core::synth::{generate_dataset, SynthSpec};
use lipinc_core::train::{format_loss_log, load_samples, load_sequences, train_with, Checkpoint, TrainConfig};

const SEED_ENV: &str = "LIPINC_SEED";

#[derive(Parser)]
#[command(name = "lipinc", version, about = "Lip-sync deepfake detection from mouth-region inconsistencies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset.
    Synth(SynthArgs),
    /// Select frames and write the mouth sequence bundle of one clip.
    Extract(ExtractArgs),
    /// Train a detector on the train split of a dataset.
    Train(TrainArgs),
    /// Score one clip manifest or sequence bundle.
    Score(ScoreArgs),
    /// Score a dataset split and write a detection report.
    Eval(EvalArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    clips: usize,
    #[arg(long, default_value_t = 0.5)]
    fake_ratio: f64,
    /// Overridden by LIPINC_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    frames: usize,
    /// Square frame size in pixels.
    #[arg(long, default_value_t = 128)]
    size: usize,
}

#[derive(clap::Args, Clone)]
struct SelectionArgs {
    /// Local (consecutive) frames [default: 5]
    #[arg(long)]
    local: Option<usize>,
    /// Global (similar-pose) frames [default: 3]
    #[arg(long)]
    global: Option<usize>,
    /// Minimum spacing of global frames, seconds [default: 0.09]
    #[arg(long)]
    min_gap: Option<f64>,
    /// Mouth crop size as HxW [default: 64x144]
    #[arg(long, value_parser = parse_crop)]
    crop: Option<(usize, usize)>,
}

impl SelectionArgs {
    fn apply(&self, mut cfg: ExtractConfig) -> ExtractConfig {
        if let Some(v) = self.local {
            cfg.local = v;
        }
        if let Some(v) = self.global {
            cfg.global = v;
        }
        if let Some(v) = self.min_gap {
            cfg.min_gap_seconds = v;
        }
        if let Some((h, w)) = self.crop {
            cfg.crop_h = h;
            cfg.crop_w = w;
        }
        cfg
    }
}

fn parse_crop(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(h)?, parse(w)?))
}

#[derive(clap::Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Mstie,
    Concat,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchesArg {
    Both,
    Color,
    Structure,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Color,
    Structure,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Full resolution, batch 16, 100 epochs.
    Default,
    /// 32x72 crops, batch 4, 20 epochs.
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "default")]
    preset: PresetArg,
    /// [default: 100, desk 20]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 16, desk 4]
    #[arg(long)]
    batch: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 0.1]
    #[arg(long)]
    adam_eps: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    lambda_cl: Option<f64>,
    /// [default: 5]
    #[arg(long)]
    lambda_il: Option<f64>,
    /// Branch whose first-layer features feed the inconsistency loss [default: color]
    #[arg(long, value_enum)]
    il_source: Option<SourceArg>,
    /// [default: mstie]
    #[arg(long, value_enum)]
    fusion: Option<FusionArg>,
    /// [default: both]
    #[arg(long, value_enum)]
    branches: Option<BranchesArg>,
    /// Overridden by LIPINC_SEED when set [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the loss log here.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    selection: SelectionArgs,
}

#[derive(clap::Args)]
struct ScoreArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Clip manifest or sequence bundle.
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

enum Failure {
    Usage(String),
    Core(lipinc_core::Error),
}

impl From<lipinc_core::Error> for Failure {
    fn from(e: lipinc_core::Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(), Failure>;

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| lipinc_core::Error::Io { path: dir.into(), source: e })?;
    }
    fs::write(path, text).map_err(|e| lipinc_core::Error::Io { path: path.into(), source: e })?;
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let spec = SynthSpec {
        frames: a.frames,
        height: a.size,
        width: a.size,
        seed: seed_override(Some(a.seed))?.unwrap_or(0),
        ..SynthSpec::default()
    };
    let index = generate_dataset(a.clips, a.fake_ratio, &spec, &a.out)?;
    let fakes = index.entries.iter().filter(|e| e.label.is_some_and(|l| l.is_fake())).count();
    log::info!("wrote {} clips ({fakes} fake) to {}", index.entries.len(), a.out.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> Outcome {
    let cfg = a.selection.apply(ExtractConfig::default());
    cfg.validate()?;
    let clip = load_manifest(&a.manifest)?;
    let bundle = SequenceBundle::extract(&clip, &cfg)?;
    bundle.save(&a.out)?;
    log::info!(
        "{}: local {:?}, global {:?} -> {}",
        bundle.clip_id,
        bundle.sequences.local_indices,
        bundle.sequences.global_indices,
        a.out.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let mut cfg = match a.preset {
        PresetArg::Default => TrainConfig::default(),
        PresetArg::Desk => TrainConfig::desk(),
    };
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.adam_eps {
        cfg.adam_eps = v;
    }
    if let Some(v) = a.lambda_cl {
        cfg.weights.lambda_cl = v;
    }
    if let Some(v) = a.lambda_il {
        cfg.weights.lambda_il = v;
    }
    if let Some(v) = a.il_source {
        cfg.weights.il_source = match v {
            SourceArg::Color => Branch::Color,
            SourceArg::Structure => Branch::Structure,
        };
    }
    if let Some(v) = a.fusion {
        cfg.model.fusion = match v {
            FusionArg::Mstie => FusionMode::Mstie,
            FusionArg::Concat => FusionMode::Concat,
        };
    }
    if let Some(v) = a.branches {
        cfg.model.branches = match v {
            BranchesArg::Both => Branches::Both,
            BranchesArg::Color => Branches::ColorOnly,
            BranchesArg::Structure => Branches::StructureOnly,
        };
    }
    if let Some(seed) = seed_override(a.seed)? {
        cfg.seed = seed;
    }
    cfg.extract = a.selection.apply(cfg.extract);
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Outcome {
    let cfg = train_config(&a)?;
    let index = DatasetIndex::load(&a.data)?;
    let (samples, skipped) = load_samples(&index, Split::Train, &cfg.extract)?;
    if !skipped.is_empty() {
        log::warn!("{} training clips skipped", skipped.len());
    }
    log::info!("training on {} clips for {} epochs", samples.len(), cfg.epochs);
    println!("epoch,L_CL,L_IL,L_total");
    let out = train_with(&samples, &cfg, |e| println!("{},{},{},{}", e.epoch, e.cl, e.il, e.total))?;
    out.checkpoint.save(&a.out)?;
    if let Some(path) = &a.log {
        write_text(path, &format_loss_log(&out.log))?;
    }
    log::info!("checkpoint written to {}", a.out.display());
    Ok(())
}

fn score(a: ScoreArgs) -> Outcome {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let bundle = load_sequences(&a.manifest, &ckpt.config.extract)?;
    let p = ckpt.predict(&bundle)?;
    let score = p[0] as f64;
    println!("{}\t{:.6}\t{}", bundle.clip_id, score, predict_label(score, THRESHOLD));
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let index = DatasetIndex::load(&a.data)?;
    let split = match a.split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Val => Some(Split::Val),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    };
    let report = evaluate(&ckpt, &index, split, a.jobs)?;
    write_text(&a.report, &report.to_json())?;
    print!("{}", report.table());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Core(e))) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::from(match e {
                lipinc_core::Error::Config(_) => 1,
                lipinc_core::Error::NotScalar(_) => 3,
                _ => 2,
            })
        }
        Err(_) => ExitCode::from(3),
    }
}
