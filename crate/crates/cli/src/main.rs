//! Command-line front end: generate data, train, evaluate, ablate, render.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use modecast::model::PredictionModel;
use modecast::train::{
    evaluate, evaluate_baseline, export_predictions, run_ablation, standard_matrix, train,
    AblationStudy, PreparedDataset, TrainConfig,
};
use modecast::{
    generate_dataset, make_split, read_samples, write_samples, DatasetSpec, MetricReport,
};

#[derive(Parser)]
#[command(
    name = "modecast",
    version,
    about = "Multimodal vehicle trajectory prediction pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Mixed,
    Curved,
    Forks,
    Straight,
    LeftTurn,
    RightTurn,
    UTurn,
    Fork,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyArg {
    Attention,
    Physical,
    Lstm,
    Components,
    All,
}

impl From<StudyArg> for AblationStudy {
    fn from(s: StudyArg) -> Self {
        match s {
            StudyArg::Attention => AblationStudy::Attention,
            StudyArg::Physical => AblationStudy::Physical,
            StudyArg::Lstm => AblationStudy::Lstm,
            StudyArg::Components => AblationStudy::Components,
            StudyArg::All => AblationStudy::All,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into a line-delimited interchange file.
    Generate {
        /// Output path for the .jsonl dataset.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Dataset seed; everything derives from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenario mix or a single scenario kind.
        #[arg(long, value_enum, default_value_t = KindArg::Mixed)]
        kind: KindArg,
        #[arg(long, default_value_t = 3)]
        max_neighbors: usize,
        /// Gaussian position noise on past states, meters.
        #[arg(long, default_value_t = 0.1)]
        noise_std: f64,
        #[arg(long, default_value_t = 3.0)]
        speed_min: f64,
        #[arg(long, default_value_t = 11.0)]
        speed_max: f64,
    },
    /// Train a model and write a checkpoint plus a run record.
    Train {
        /// JSON config mirroring the training recipe; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset in the interchange format.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Where to write the run record (JSON).
        #[arg(long)]
        record: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint (or the constant-velocity baseline) on a split.
    Evaluate {
        #[arg(long, required_unless_present = "baseline")]
        checkpoint: Option<PathBuf>,
        /// Evaluate the physics baseline instead of a checkpoint.
        #[arg(long, default_value_t = false)]
        baseline: bool,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Where to write the metric report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optional train config supplying split ratios/seed and raster.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the split seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of baseline modes.
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Train and evaluate an ablation matrix, writing a table.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = StudyArg::All)]
        study: StudyArg,
        /// Output table (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Optional fixed-width text rendering of the table.
        #[arg(long)]
        text: Option<PathBuf>,
        /// Overrides the config seed (shared across rows).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render predictions (red) and ground truth (green) over the BEV maps.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the split seed used to pick samples.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => {
            TrainConfig::read_json(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn split_indices(
    data: &PreparedDataset,
    ratios: (f64, f64, f64),
    seed: u64,
    which: SplitArg,
) -> Result<Vec<usize>> {
    if which == SplitArg::All {
        return Ok((0..data.len()).collect());
    }
    let split = make_split(&data.ids(), ratios, seed)?;
    let ids = match which {
        SplitArg::Train => &split.train,
        SplitArg::Val => &split.val,
        SplitArg::Test => &split.test,
        SplitArg::All => unreachable!(),
    };
    let idx = data.indices_of(ids);
    if idx.is_empty() {
        bail!("selected split is empty");
    }
    Ok(idx)
}

fn print_report(label: &str, report: &MetricReport) {
    println!(
        "{label}: minADE_1 {:.4}  minADE_5 {:.4}  minFDE_1 {:.4}  minFDE_5 {:.4}  \
         missRate_1 {:.4}  missRate_5 {:.4}  Off-Road Rate {:.4}  ({} samples)",
        report.min_ade_1,
        report.min_ade_5,
        report.min_fde_1,
        report.min_fde_5,
        report.miss_rate_1,
        report.miss_rate_5,
        report.offroad_rate,
        report.sample_count
    );
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Command::Generate {
            out,
            count,
            seed,
            kind,
            max_neighbors,
            noise_std,
            speed_min,
            speed_max,
        } => {
            let mut spec = match kind {
                KindArg::Mixed => DatasetSpec::mixed(count, seed),
                KindArg::Curved => DatasetSpec::curved(count, seed),
                KindArg::Forks => DatasetSpec::forks(count, seed),
                single => DatasetSpec {
                    kind_weights: match single {
                        KindArg::Straight => [1.0, 0.0, 0.0, 0.0, 0.0],
                        KindArg::LeftTurn => [0.0, 1.0, 0.0, 0.0, 0.0],
                        KindArg::RightTurn => [0.0, 0.0, 1.0, 0.0, 0.0],
                        KindArg::UTurn => [0.0, 0.0, 0.0, 1.0, 0.0],
                        KindArg::Fork => [0.0, 0.0, 0.0, 0.0, 1.0],
                        _ => unreachable!(),
                    },
                    ..DatasetSpec::mixed(count, seed)
                },
            };
            spec.max_neighbors = max_neighbors;
            spec.noise_std = noise_std;
            spec.speed_range = (speed_min, speed_max);
            let samples = generate_dataset(&spec);
            let n = write_samples(&samples, &out)?;
            println!("wrote {n} samples to {}", out.display());
        }

        Command::Train {
            config,
            data,
            checkpoint,
            record,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let raw = read_samples(&data)?;
            let prepared = PreparedDataset::prepare(&raw, &cfg.raster)?;
            let split = make_split(&prepared.ids(), cfg.split_ratios, cfg.split_seed)?;
            let train_idx = prepared.indices_of(&split.train);
            let val_idx = prepared.indices_of(&split.val);
            println!(
                "training on {} samples ({} val) for {} epochs, seed {}",
                train_idx.len(),
                val_idx.len(),
                cfg.epochs,
                cfg.seed
            );
            let (mut model, run) = train(&cfg, &prepared, &train_idx, &val_idx)?;
            model.save(&checkpoint)?;
            println!(
                "checkpoint -> {} (final epoch loss {:.4}, {:.1}s, {:.1} samples/s inference)",
                checkpoint.display(),
                run.epoch_losses.last().unwrap(),
                run.wall_clock_s,
                run.throughput_sps
            );
            print_report("val", &run.final_report);
            if let Some(p) = record {
                run.write_json(&p)?;
                println!("run record -> {}", p.display());
            }
        }

        Command::Evaluate {
            checkpoint,
            baseline,
            data,
            split,
            report,
            config,
            seed,
            k,
        } => {
            let cfg = load_config(&config, None)?;
            let split_seed = seed.unwrap_or(cfg.split_seed);
            let raw = read_samples(&data)?;
            let (label, result) = if baseline {
                let prepared = PreparedDataset::prepare(&raw, &cfg.raster)?;
                let idx = split_indices(&prepared, cfg.split_ratios, split_seed, split)?;
                (
                    "constant velocity and yaw".to_string(),
                    evaluate_baseline(&prepared, &idx, k)?,
                )
            } else {
                let model = PredictionModel::load(checkpoint.as_ref().unwrap())?;
                let prepared = PreparedDataset::prepare(&raw, &model.cfg.raster)?;
                let idx = split_indices(&prepared, cfg.split_ratios, split_seed, split)?;
                let (r, throughput) = evaluate(&model, &prepared, &idx)?;
                println!("inference throughput: {throughput:.1} samples/s");
                ("model".to_string(), r)
            };
            print_report(&label, &result);
            if let Some(p) = report {
                result.write_json(&p)?;
                println!("report -> {}", p.display());
            }
        }

        Command::Ablate {
            config,
            data,
            study,
            out,
            text,
            seed,
        } => {
            let cfg = load_config(&config, seed)?;
            let raw = read_samples(&data)?;
            let prepared = PreparedDataset::prepare(&raw, &cfg.raster)?;
            let split = make_split(&prepared.ids(), cfg.split_ratios, cfg.split_seed)?;
            let train_idx = prepared.indices_of(&split.train);
            let val_idx = prepared.indices_of(&split.val);
            let matrix = standard_matrix(&cfg, study.into());
            println!("running {} ablation rows...", matrix.len());
            let table = run_ablation(&matrix, &prepared, &train_idx, &val_idx);
            print!("{}", table.render_text());
            table.write_json(&out)?;
            println!("table -> {}", out.display());
            if let Some(p) = text {
                std::fs::write(&p, table.render_text())?;
                println!("text table -> {}", p.display());
            }
        }

        Command::Render {
            checkpoint,
            data,
            out_dir,
            count,
            split,
            config,
            seed,
        } => {
            let cfg = load_config(&config, None)?;
            let split_seed = seed.unwrap_or(cfg.split_seed);
            let model = PredictionModel::load(&checkpoint)?;
            let raw = read_samples(&data)?;
            let prepared = PreparedDataset::prepare(&raw, &model.cfg.raster)?;
            let idx = split_indices(&prepared, cfg.split_ratios, split_seed, split)?;
            let take: Vec<usize> = idx.into_iter().take(count).collect();
            let files = export_predictions(&model, &prepared, &take, &out_dir)?;
            println!("wrote {} images to {}", files.len(), out_dir.display());
        }
    }
    Ok(())
}
