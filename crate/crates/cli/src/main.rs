use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ecgtwa::beat_model::{fit_template, AverageBeat, FitOptions, Lead, DEFAULT_KERNELS};
use ecgtwa::dataset::{
    analyze_dataset, analyze_records, consolidate, evaluate_rows, format_report, generate_dataset, read_feature_table,
    read_report, stream_features, write_feature_table, write_report, DatasetConfig, EvalMode, EvaluateOptions,
    MANIFEST_FILE,
};
use ecgtwa::textio::{read_sample_file, write_template_file};
use ecgtwa::twa_mma::DEFAULT_SURROGATES;

const USAGE_EXIT: u8 = 1;
const DATA_EXIT: u8 = 2;

/// Artificial ECG datasets with controllable T-wave alternans, and the
/// TWA analysis and evaluation pipeline.
#[derive(Parser)]
#[command(name = "ecgtwa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, env = "ECGTWA_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit Gaussian kernel templates to average-beat files named `<subject>_<lead>.txt`.
    Fit {
        #[arg(required = true)]
        beats: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_KERNELS)]
        n_kernels: usize,
        /// Lead for every input, instead of the file-name suffix.
        #[arg(long)]
        lead: Option<Lead>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Generate a dataset from a config file.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Store all 12 leads instead of lead I.
        #[arg(long)]
        all_leads: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Extract binned TWA features from a dataset directory or record headers.
    Analyze {
        inputs: Vec<PathBuf>,
        /// Generate records from `--config` in memory instead of reading files.
        #[arg(long, requires = "config")]
        stream: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Surrogate seed for loose record files; overrides the config seed with `--stream`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SURROGATES)]
        surrogates: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-subject-out evaluation of a feature table.
    Evaluate {
        features: PathBuf,
        #[arg(long, default_value = "BL")]
        model: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Score validation windows of training subjects (optimistic).
        #[arg(long)]
        loocv: bool,
        /// Label-permutation repetitions for an AUC p-value.
        #[arg(long, default_value_t = 0)]
        permutations: usize,
        /// Fraction of training windows withheld per fold.
        #[arg(long, default_value_t = 0.0)]
        validation_frac: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Consolidate evaluation reports into one table and ROC point lists.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn workers(w: Option<usize>) -> usize {
    w.filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load_config(path: Option<&Path>) -> Result<DatasetConfig> {
    Ok(match path {
        Some(p) => DatasetConfig::load(p)?,
        None => DatasetConfig::default(),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn lead_from_name(path: &Path) -> Result<(String, Lead)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .context("file name is not valid UTF-8")?;
    let (subject, lead) = stem
        .rsplit_once('_')
        .context("expected a `<subject>_<lead>` file name")?;
    Ok((subject.to_string(), lead.parse()?))
}

fn fit_one(path: &Path, n_kernels: usize, lead: Option<Lead>, out: &Path) -> Result<PathBuf> {
    let (subject, lead) = match lead {
        Some(l) => (
            path.file_stem()
                .and_then(|s| s.to_str())
                .context("file name is not valid UTF-8")?
                .to_string(),
            l,
        ),
        None => lead_from_name(path)?,
    };
    let (fs_hz, samples) = read_sample_file(path)?;
    let beat = AverageBeat::new(samples, fs_hz)?;
    let opts = FitOptions {
        n_kernels,
        ..FitOptions::default()
    };
    let fit = fit_template(&beat, lead, &opts)?;
    if !fit.converged {
        log::warn!("{}: fit stopped after {} iterations", path.display(), fit.iterations);
    }
    let dest = out.join(format!("{subject}_{lead}.toml"));
    write_template_file(&dest, &subject, &fit.template)?;
    Ok(dest)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit {
            beats,
            n_kernels,
            lead,
            out,
        } => {
            create_dir(&out)?;
            let mut failures = 0;
            for b in &beats {
                match fit_one(b, n_kernels, lead, &out) {
                    Ok(dest) => println!("{}", dest.display()),
                    Err(e) => {
                        eprintln!("error: {}: {e:#}", b.display());
                        failures += 1;
                    }
                }
            }
            if failures == beats.len() {
                bail!("no beat file could be fitted");
            }
            if failures > 0 {
                eprintln!("warning: {failures} of {} files failed", beats.len());
            }
        }
        Command::Generate {
            config,
            seed,
            all_leads,
            common,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let m = generate_dataset(&cfg, &common.out, workers(common.workers), all_leads)?;
            let cfg_path = common.out.join("config.toml");
            fs::write(&cfg_path, cfg.to_toml()).with_context(|| format!("writing {}", cfg_path.display()))?;
            println!("{} records written to {}", m.records.len(), common.out.display());
        }
        Command::Analyze {
            inputs,
            stream,
            config,
            seed,
            surrogates,
            common,
        } => {
            let w = workers(common.workers);
            let rows = if stream {
                if !inputs.is_empty() {
                    bail!("--stream takes no input paths");
                }
                let mut cfg = load_config(config.as_deref())?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                stream_features(&cfg, w, surrogates)?
            } else {
                match inputs.as_slice() {
                    [] => bail!("give a dataset directory, record headers, or --stream"),
                    [dir] if dir.is_dir() => {
                        if !dir.join(MANIFEST_FILE).exists() {
                            bail!("{} has no {MANIFEST_FILE}", dir.display());
                        }
                        analyze_dataset(dir, w, surrogates)?
                    }
                    files => analyze_records(files, seed.unwrap_or(0), w, surrogates)?,
                }
            };
            create_dir(&common.out)?;
            let path = common.out.join("features.csv");
            write_feature_table(&path, &rows)?;
            println!("{} feature rows written to {}", rows.len(), path.display());
        }
        Command::Evaluate {
            features,
            model,
            seed,
            loocv,
            permutations,
            validation_frac,
            out,
        } => {
            if !(0.0..1.0).contains(&validation_frac) {
                bail!("--validation-frac must lie in [0, 1)");
            }
            let rows = read_feature_table(&features)?;
            let opts = EvaluateOptions {
                model,
                mode: if loocv { EvalMode::Loocv } else { EvalMode::Loot },
                seed,
                validation_frac,
                permutations,
                ..EvaluateOptions::default()
            };
            let report = evaluate_rows(&rows, &opts)?;
            write_report(&out, &report)?;
            print!("{}", format_report(&report));
        }
        Command::Report { reports, out } => {
            let loaded = reports
                .iter()
                .map(|p| read_report(p))
                .collect::<ecgtwa::Result<Vec<_>>>()?;
            let c = consolidate(&loaded);
            create_dir(&out)?;
            fs::write(out.join("summary.csv"), &c.table_csv)?;
            fs::write(out.join("summary.txt"), &c.text)?;
            for (model, roc) in &c.roc {
                let safe: String = model
                    .chars()
                    .map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' { ch } else { '_' })
                    .collect();
                fs::write(out.join(format!("roc_{safe}.csv")), roc)?;
            }
            print!("{}", c.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE_EXIT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(DATA_EXIT)
        }
    }
}
