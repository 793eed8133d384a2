//! `lfae`: train, run and inspect the light-field autoencoder.

mod settings;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lfae::codec::{load_checkpoint, load_encoded, save_checkpoint, save_encoded};
use lfae::data::{load_light_field, save_light_field, DatasetLayout, LightField};
use lfae::metrics::{evaluate, QualityReport, QualityRow};
use lfae::train::{AugmentedSampler, Trainer};
use lfae::{build_model, Model, ModelConfig};

use settings::Settings;

/// Light-field autoencoder codec.
///
/// Settings resolve as: command-line flag, then `--config` file, then the
/// built-in default. The config file is TOML with the long flag names as
/// keys (underscores for dashes), for example `iters_per_epoch = 30` or
/// `lr_schedule = [[0, 0.001], [30, 0.0005]]`. The file also accepts
/// `brightness`, `saturation` (both `[lo, hi]`) and `flip_probability`.
#[derive(Parser, Debug)]
#[command(name = "lfae", version)]
struct Cli {
    /// Key-value settings file (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on a directory of light fields.
    Train {
        /// Directory with one subdirectory of view PNGs per light field
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Held-out light fields scored after every epoch
        #[arg(long, value_name = "DIR")]
        test_data: Option<PathBuf>,
        /// Continue from a checkpoint (its model shape wins over shape flags)
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
        /// Output directory for checkpoints, history.csv and final.lfck
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Compress one light-field directory into an .lfae file.
    Encode {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        /// Directory holding the views of one light field
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Reconstruct the views of an .lfae file as PNGs.
    Decode {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score reconstructions with MSE, PSNR and SSIM.
    Eval {
        #[arg(long, value_name = "PATH", required_unless_present = "identity")]
        checkpoint: Option<PathBuf>,
        /// Compare each field with itself instead of its reconstruction
        #[arg(long, conflicts_with = "checkpoint")]
        identity: bool,
        /// Directory with one subdirectory per light field
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Also write the report as CSV here
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Print compression ratio, model size and the layer table.
    Info {
        /// Describe this checkpoint's model instead of the configured one
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
}

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! say {
    () => {
        writeln!(std::io::stdout().lock())?
    };
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            let class = err
                .chain()
                .find_map(|e| e.downcast_ref::<lfae::Error>())
                .map_or("cli", lfae::Error::class);
            eprintln!("error[{class}]: {}", describe(&err));
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.downcast_ref::<std::io::Error>()
        .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}

/// The error chain on one line. Library errors already print their source,
/// so causes that repeat the text before them are dropped.
fn describe(err: &anyhow::Error) -> String {
    let mut line = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if line.ends_with(&text) {
            continue;
        }
        if !line.is_empty() {
            line.push_str(": ");
        }
        line.push_str(&text);
    }
    line
}

fn run(cli: Cli) -> Result<()> {
    let settings = settings::resolve(cli.settings, cli.config.as_deref())?;
    match cli.command {
        Command::Train {
            data,
            test_data,
            resume,
            out,
        } => cmd_train(&settings, &data, test_data.as_deref(), resume.as_deref(), &out),
        Command::Encode { checkpoint, input, out } => cmd_encode(&settings, &checkpoint, &input, &out),
        Command::Decode { checkpoint, input, out } => cmd_decode(&settings, &checkpoint, &input, &out),
        Command::Eval {
            checkpoint,
            identity,
            data,
            out,
        } => cmd_eval(&settings, checkpoint.as_deref(), identity, &data, out.as_deref()),
        Command::Info { checkpoint } => cmd_info(&settings, checkpoint.as_deref()),
    }
}

fn layout(root: &Path, grid: usize, s: &Settings) -> DatasetLayout {
    DatasetLayout::new(root).with_grid(grid).with_pattern(s.pattern())
}

/// Every light field under `root`, with its directory name.
fn load_dataset(root: &Path, grid: usize, s: &Settings) -> Result<Vec<(String, LightField)>> {
    let layout = layout(root, grid, s);
    let names = layout.list()?;
    if names.is_empty() {
        bail!("no light-field directories under {}", root.display());
    }
    names
        .into_iter()
        .map(|name| Ok((name.clone(), load_light_field(&layout, &name)?)))
        .collect()
}

/// A single light field stored directly in `dir`.
fn load_one(dir: &Path, grid: usize, s: &Settings) -> Result<LightField> {
    let name = dir
        .file_name()
        .with_context(|| format!("{} does not name a directory", dir.display()))?
        .to_string_lossy();
    let parent = dir.parent().unwrap_or(Path::new("."));
    Ok(load_light_field(&layout(parent, grid, s), &name)?)
}

fn check_size(fields: &[(String, LightField)], cfg: &ModelConfig) -> Result<()> {
    for (name, lf) in fields {
        if lf.size() != cfg.spatial {
            bail!(
                "light field {name:?} has {0}x{0} views but the model expects {1}x{1} (set --spatial)",
                lf.size(),
                cfg.spatial
            );
        }
    }
    Ok(())
}

fn cmd_train(s: &Settings, data: &Path, test: Option<&Path>, resume: Option<&Path>, out: &Path) -> Result<()> {
    let mut train_cfg = s.train()?;
    train_cfg.checkpoint_dir = Some(out.join("checkpoints"));
    let mut trainer = match resume {
        Some(path) => {
            if s.model_keys_set() {
                eprintln!("note: model shape comes from {}; shape flags ignored", path.display());
            }
            Trainer::resume(load_checkpoint(path)?, train_cfg)?
        }
        None => Trainer::new(build_model(&s.model()?)?, train_cfg)?,
    };
    let model_cfg = trainer.model.config().clone();
    let grid = model_cfg.grid.0;

    let fields = load_dataset(data, grid, s)?;
    check_size(&fields, &model_cfg)?;
    let test_fields: Option<Vec<LightField>> = match test {
        Some(dir) => {
            let t = load_dataset(dir, grid, s)?;
            check_size(&t, &model_cfg)?;
            Some(t.into_iter().map(|(_, lf)| lf).collect())
        }
        None => None,
    };
    let sampler = AugmentedSampler::new(fields.into_iter().map(|(_, lf)| lf).collect(), s.augment(model_cfg.spatial)?)?;

    say!(
        "training {} parameters for {} epochs x {} iterations (batch {})",
        trainer.model.parameter_count(),
        trainer.config.total_epochs,
        trainer.config.iterations_per_epoch,
        trainer.config.batch_size
    );
    let start = Instant::now();
    trainer.run(&sampler, test_fields.as_deref(), |r| {
        let test = r.test_mse.map_or(String::new(), |t| format!(" test_mse {t:.6}"));
        let _ = writeln!(
            std::io::stdout().lock(),"epoch {:4} lr {} train_mse {:.6}{test}", r.epoch, r.lr, r.train_mse);
    })?;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    trainer.history.write_csv(&out.join("history.csv"))?;
    let last = out.join("final.lfck");
    save_checkpoint(&trainer.model, Some(&trainer.adam), trainer.epochs_done as u64, &last)?;
    say!("done in {:.1?}; wrote {}", start.elapsed(), last.display());
    Ok(())
}

fn eval_model(path: &Path) -> Result<Model<f32>> {
    Ok(load_checkpoint(path)?.model.eval())
}

fn cmd_encode(s: &Settings, checkpoint: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = eval_model(checkpoint)?;
    let cfg = model.config().clone();
    let lf = load_one(input, cfg.grid.0, s)?;
    let start = Instant::now();
    let enc = model.encode(&lf)?;
    let pass = start.elapsed();
    save_encoded(&enc, out)?;
    let bytes = std::fs::metadata(out).with_context(|| format!("reading {}", out.display()))?.len();
    let raw = 4 * cfg.input_channels() * cfg.spatial * cfg.spatial;
    say!("encoder pass {pass:.3?}");
    say!(
        "wrote {} ({bytes} bytes, raw f32 {raw} bytes, ratio {:.2})",
        out.display(),
        raw as f64 / bytes as f64
    );
    Ok(())
}

fn cmd_decode(s: &Settings, checkpoint: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = eval_model(checkpoint)?;
    let enc = load_encoded(input)?;
    let start = Instant::now();
    let lf = model.decode(&enc)?;
    let pass = start.elapsed();
    save_light_field(&lf, out, s.pattern())?;
    say!("decoder pass {pass:.3?}");
    say!("wrote {} views of {1}x{1} to {2}", lf.views().len(), lf.size(), out.display());
    Ok(())
}

fn cmd_eval(s: &Settings, checkpoint: Option<&Path>, identity: bool, data: &Path, out: Option<&Path>) -> Result<()> {
    let report = if identity {
        let grid = s.model_grid();
        let fields = load_dataset(data, grid, s)?;
        let rows = fields
            .iter()
            .map(|(name, lf)| QualityRow::measure(name.clone(), lf, lf))
            .collect::<lfae::Result<Vec<_>>>()?;
        QualityReport::from_rows(rows)
    } else {
        let path = checkpoint.context("--checkpoint is required unless --identity is given")?;
        let model = eval_model(path)?;
        let fields = load_dataset(data, model.config().grid.0, s)?;
        check_size(&fields, model.config())?;
        evaluate(&model, &fields)?
    };
    write!(std::io::stdout().lock(), "{}", report.to_table())?;
    if let Some(path) = out {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_info(s: &Settings, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = match checkpoint {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            say!("checkpoint: {} ({} epochs trained)", path.display(), ck.trained_epochs);
            ck.model.config().clone()
        }
        None => s.model()?,
    };
    let params = cfg.parameter_count();
    say!(
        "grid {}x{}, views {px}x{px}, schedule {:?}, decoder out {}",
        cfg.grid.0,
        cfg.grid.1,
        cfg.channel_schedule,
        cfg.decoder_out_channels,
        px = cfg.spatial
    );
    say!("compression ratio: {:.3}", cfg.compression_ratio());
    say!("parameters: {params}");
    say!("model bytes (f32): {}", 4 * params);
    say!();
    say!(
        "{:<10} {:<14} {:>6} {:>6} {:>6} {:>6} {:>12}",
        "layer", "kind", "in_ch", "out_ch", "in_px", "out_px", "parameters"
    );
    for l in cfg.layer_specs() {
        say!(
            "{:<10} {:<14} {:>6} {:>6} {:>6} {:>6} {:>12}",
            l.name,
            format!("{:?} k{}s{}", l.kind, l.kernel, l.stride),
            l.in_channels,
            l.out_channels,
            l.in_spatial,
            l.out_spatial,
            l.parameters
        );
    }
    Ok(())
}
