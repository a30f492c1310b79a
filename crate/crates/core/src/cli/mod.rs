//! Command-line front end.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{DatasetProfile, ExperimentConfig, KEYS};

use crate::dataio::{load_dataset, save_dataset, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gradcheck;
use crate::knowledge::Taxonomy;
use crate::model::Checkpoint;
use crate::pipeline::{self, DatasetId, DatasetSource, RowStatus};

pub const METRICS_FILE: &str = "metrics.json";
pub const TEST_METRICS_FILE: &str = "test_metrics.json";
pub const CONFIG_ECHO_FILE: &str = "config.yaml";
pub const TABLE_JSON_FILE: &str = "comparison.json";
pub const TABLE_TEXT_FILE: &str = "comparison.txt";

#[derive(Debug, Parser)]
#[command(name = "trendkern", version, about = "Fashion trend forecasting with knowledge-enhanced LSTMs")]
pub struct Cli {
    /// Overrides the seed of every config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Clip the global gradient norm to this value.
    #[arg(long, global = true)]
    pub grad_clip: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and keep the checkpoint with the best test MAE.
    Train { config: PathBuf },
    /// Evaluate a checkpoint on the test windows of the configured dataset.
    Test { config: PathBuf, checkpoint: PathBuf },
    /// Run the benchmark rows for every config file in a directory.
    Reproduce { config_dir: PathBuf },
    /// Write a seasonal synthetic dataset.
    GenSynthetic {
        #[arg(long, default_value_t = 4)]
        groups: usize,
        #[arg(long, default_value_t = 8)]
        elements: usize,
        #[arg(long, default_value_t = 104)]
        length: usize,
        /// Destination of the trendkern-json file.
        #[arg(long)]
        output: PathBuf,
        /// Also write a taxonomy assigning element e to category e % categories.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        categories: usize,
        /// Elements of one taxonomy category share their seasonal phase.
        #[arg(long)]
        shared_phase: bool,
    },
    /// Finite-difference check of every primitive and of the full loss.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.quiet);
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn init_logging(quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_target(false)
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train { config } => cmd_train(cli, config),
        Command::Test { config, checkpoint } => cmd_test(cli, config, checkpoint),
        Command::Reproduce { config_dir } => cmd_reproduce(cli, config_dir),
        Command::GenSynthetic {
            groups,
            elements,
            length,
            output,
            taxonomy,
            categories,
            shared_phase,
        } => {
            let mut spec = SyntheticSpec::new(*groups, *elements, *length, cli.seed.unwrap_or(0));
            if *shared_phase {
                spec = spec.with_phase_categories(*categories);
            }
            let dataset = spec.generate()?;
            save_dataset(&dataset, output)?;
            if let Some(path) = taxonomy {
                Taxonomy::modulo(dataset.element_vocab_size, *categories)?.save(path)?;
            }
            println!(
                "wrote {} series of length {} to {}",
                dataset.series.len(),
                dataset.series_len(),
                output.display()
            );
            Ok(())
        }
        Command::GradCheck { trials } => {
            let seed = cli.seed.unwrap_or(0);
            let mut reports = gradcheck::primitive_suite(seed, *trials)?;
            reports.push(gradcheck::model_suite(seed)?);
            let mut failed = Vec::new();
            for r in &reports {
                let verdict = if r.passed() { "ok" } else { "FAIL" };
                println!("{:<20} {:>6} entries  max rel error {:.3e}  {verdict}", r.name, r.checked, r.max_rel_error);
                if !r.passed() {
                    failed.push(r.name.clone());
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Invalid(format!(
                    "gradient check failed for {} (tolerance {})",
                    failed.join(", "),
                    gradcheck::TOLERANCE
                )))
            }
        }
    }
}

/// Loads a config and applies the global flag overrides.
pub fn load_config(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let (mut cfg, warnings) = ExperimentConfig::load(path)?;
    for w in warnings {
        log::warn!("{}: {w}", path.display());
    }
    if let Some(seed) = cli.seed {
        cfg.model.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if cli.grad_clip.is_some() {
        cfg.train.grad_clip = cli.grad_clip;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Dataset plus taxonomy (when a path is configured).
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Option<Taxonomy>)> {
    let path = cfg
        .dataset_path
        .as_ref()
        .ok_or_else(|| Error::Config("dataset_path is not set".into()))?;
    let dataset = load_dataset(path, cfg.dataset_format)?;
    let taxonomy = cfg.taxonomy_path.as_ref().map(Taxonomy::load).transpose()?;
    Ok((dataset, taxonomy))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_train(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = load_config(cli, path)?;
    let (dataset, taxonomy) = load_data(&cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    write_file(&cfg.out_dir.join(CONFIG_ECHO_FILE), &cfg.to_text())?;
    let out = pipeline::train(&cfg.model, &cfg.train, &dataset, taxonomy.as_ref(), Some(&cfg.out_dir))?;
    write_file(&cfg.out_dir.join(METRICS_FILE), &out.best_report.to_json())?;
    println!(
        "best epoch {}: test MAE {:.6}, MAPE {:.3} (outputs in {})",
        out.best.epoch,
        out.best_report.mae,
        out.best_report.mape,
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_test(cli: &Cli, path: &Path, checkpoint: &Path) -> Result<()> {
    let cfg = load_config(cli, path)?;
    let ck = Checkpoint::load(checkpoint)?;
    let (dataset, taxonomy) = load_data(&cfg)?;
    let report = pipeline::evaluate(&ck, &dataset, taxonomy.as_ref())?;
    write_file(&cfg.out_dir.join(TEST_METRICS_FILE), &report.to_json())?;
    println!("test MAE {:.6}, MAPE {:.3} over {} samples", report.mae, report.mape, report.samples);
    Ok(())
}

/// Config files of a directory: `*.yaml`, `*.yml`, `*.conf`, sorted by name.
fn config_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("yaml" | "yml" | "conf"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_reproduce(cli: &Cli, dir: &Path) -> Result<()> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| dir.join("results"));
    let mut sources: BTreeMap<DatasetId, DatasetSource> = BTreeMap::new();
    for file in config_files(dir)? {
        let mut cfg = load_config(cli, &file)?;
        let Some(id) = cfg.dataset_profile.dataset_id() else {
            log::warn!("{}: profile {} is not a benchmark setting, ignored", file.display(), cfg.dataset_profile);
            continue;
        };
        if sources.contains_key(&id) {
            return Err(Error::Config(format!("{}: a second config for {id}", file.display())));
        }
        cfg.out_dir = out_dir.clone();
        let data = match &cfg.dataset_path {
            None => Err("dataset_path is not set".to_string()),
            Some(p) if !p.exists() => Err(format!("dataset file {} not found", p.display())),
            Some(_) => load_data(&cfg).map_err(|e| one_line(&e.to_string())),
        };
        if let Err(reason) = &data {
            log::warn!("{id}: rows skipped, {reason}");
        }
        sources.insert(
            id,
            DatasetSource {
                base: cfg.model.clone(),
                settings: cfg.train.clone(),
                data,
                out_dir: Some(cfg.out_dir.clone()),
            },
        );
    }
    let specs: Vec<_> = sources
        .iter()
        .flat_map(|(id, src)| pipeline::paper_specs(*id, &src.base))
        .collect();
    let table = pipeline::reproduce(&specs, &sources);
    write_file(&out_dir.join(TABLE_JSON_FILE), &table.to_json())?;
    let text = table.render_text();
    write_file(&out_dir.join(TABLE_TEXT_FILE), &text)?;
    print!("{text}");
    let failed = table
        .rows
        .iter()
        .filter(|r| matches!(r.result, RowStatus::Failed { .. }))
        .count();
    if failed > 0 {
        return Err(Error::Invalid(format!("{failed} benchmark row(s) failed, see {}", out_dir.display())));
    }
    Ok(())
}
