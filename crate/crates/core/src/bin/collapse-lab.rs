use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use collapse_lab::augment::{AmConfig, AugmentStrategy};
use collapse_lab::harness::run::{ABLATION_BETA_ALPHA, ABLATION_FIXED_RATE};
use collapse_lab::harness::{self, output, RunConfig, RunResult};
use collapse_lab::metrics::MetricsReport;
use collapse_lab::network::checkpoint;
use collapse_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "collapse-lab", version, about = "Train and compare mixup variants on toy and image data")]
struct Cli {
    /// Overrides `run.seed` of every config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `run.output_dir`; defaults to `out`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write history.csv, metrics.json and checkpoint.bin.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Also write features.csv for the test split.
        #[arg(long)]
        features: bool,
        /// Also write grid.csv with this many points per axis (2-D features).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Long-tailed training; the config must set `data.imb_factor`.
    Imbalanced {
        #[arg(long)]
        config: PathBuf,
    },
    /// Coarse pretraining, then a linear probe on the frozen encoder.
    Transfer {
        #[arg(long)]
        pretrain: PathBuf,
        #[arg(long)]
        finetune: PathBuf,
    },
    /// Every rate-mode × one-sided × last-layer variant of AM-mixup.
    Ablation {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-sample features, predictions and confidences of a checkpoint.
    DumpFeatures {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file (binary or .csv).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Confidence grid output (2-D features only).
        #[arg(long)]
        grid_out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        grid_resolution: usize,
    },
}

impl Cli {
    fn load(&self, path: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_file(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output_dir = Some(dir.clone());
        }
        cfg.output_dir.get_or_insert_with(|| PathBuf::from("out"));
        Ok(cfg)
    }

    fn say(&self, text: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", text.as_ref());
        }
    }

    fn summary(&self, title: &str, r: &RunResult) {
        if self.quiet {
            return;
        }
        print!("{}", output::history_csv(&r.history));
        println!("{title}: {}", r.report.to_json());
    }
}

fn report_line(r: &MetricsReport) -> String {
    r.to_json().to_string()
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train {
            config,
            features,
            grid,
        } => {
            let cfg = cli.load(config)?;
            let r = harness::run(&cfg)?;
            let dir = cfg.output_dir.as_deref().expect("set by load");
            if *features || grid.is_some() {
                let test = harness::load_data(&cfg)?.test;
                if *features {
                    output::dump_features(&r.model, &test, &dir.join("features.csv"))?;
                }
                if let Some(res) = grid {
                    let feats = r.model.forward_features(test.samples())?;
                    output::dump_grid(&r.model, &feats, *res, &dir.join("grid.csv"))?;
                }
            }
            cli.summary("metrics", &r);
        }
        Command::Imbalanced { config } => {
            let cfg = cli.load(config)?;
            let r = harness::run_imbalanced(&cfg)?;
            cli.summary("metrics", &r);
        }
        Command::Transfer { pretrain, finetune } => {
            let pre = cli.load(pretrain)?;
            let mut fine = cli.load(finetune)?;
            fine.output_dir = pre.output_dir.clone();
            let r = harness::run_coarse_to_fine(&pre, &fine)?;
            cli.say(format!("coarse stage: {}", report_line(&r.coarse_report)));
            cli.say(format!("fine probe:   {}", report_line(&r.fine_report)));
        }
        Command::Ablation { config } => {
            let cfg = cli.load(config)?;
            let beta = match &cfg.strategy {
                AugmentStrategy::AmMixup(am) => am.beta,
                _ => AmConfig::default().beta,
            };
            let cells = harness::ablation_grid(beta, ABLATION_BETA_ALPHA, ABLATION_FIXED_RATE);
            let rows = harness::run_ablation(&cfg, &cells)?;
            cli.say(harness::ablation_csv(&rows).trim_end());
        }
        Command::DumpFeatures {
            checkpoint: ckpt,
            data: data_path,
            out,
            grid_out,
            grid_resolution,
        } => {
            let model = checkpoint::load(ckpt)?;
            let ds = harness::load_dataset(data_path)?;
            if ds.num_classes() != model.spec().num_classes {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint has {} classes, {} has {}",
                    model.spec().num_classes,
                    data_path.display(),
                    ds.num_classes()
                )));
            }
            output::dump_features(&model, &ds, out)?;
            if let Some(g) = grid_out {
                let feats = model.forward_features(ds.samples())?;
                output::dump_grid(&model, &feats, *grid_resolution, g)?;
            }
            cli.say(format!("wrote {} rows to {}", ds.len(), out.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
