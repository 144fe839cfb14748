use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use replygraph_core::checkpoint::{TrainedModel, FORMAT_VERSION};
use replygraph_core::discussion::read_thread_dir;
use replygraph_core::eval::{evaluate_corpus, stream_predict, EvalReport};
use replygraph_core::report::{render_report, ModelColumn, ReportFormat, ReportOptions};
use replygraph_core::synth::{generate, GenSpec};
use replygraph_core::training::{grad_check, train, Example, TrainConfig};
use replygraph_core::{parse_thread, EncoderSpec, Horizon, LossKind, ModelConfig, ModelKind};

#[derive(Parser)]
#[command(name = "replygraph", version, about = "Ordinal hate-speech forecasting on discussion trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        num_graphs: usize,
        /// Generator settings as JSON; --seed and --num-graphs override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a model on a directory of thread files.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Training settings as JSON; --seed and --loss override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        loss: Option<LossKind>,
        /// Where to write the per-epoch loss history.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Replay every thread of a corpus depth by depth and score it.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Evaluate threads concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Render one thread as a table with a label column per checkpoint.
    StreamReport {
        #[arg(long = "ckpt")]
        ckpts: Vec<PathBuf>,
        #[arg(long)]
        thread: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Characters of comment text kept before "[...]"; 0 keeps all.
        #[arg(long, default_value_t = 80)]
        width: usize,
        /// "final", "appearance" or a horizon number.
        #[arg(long, default_value = "final")]
        at: Horizon,
    },
    /// Compare analytic gradients with central differences for every model.
    GradCheck {
        #[arg(long)]
        seed: u64,
        /// Write the full reports as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct History<'a> {
    format_version: u64,
    model_kind: ModelKind,
    loss: LossKind,
    seed: u64,
    epochs: &'a [f64],
    skipped: &'a [String],
}

#[derive(Serialize)]
struct GradCheckFile<'a> {
    format_version: u64,
    seed: u64,
    threshold: f64,
    reports: &'a [replygraph_core::training::GradCheckReport],
}

const GRAD_CHECK_THRESHOLD: f64 = 1e-4;

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            seed,
            out,
            num_graphs,
            config,
        } => {
            let base = match &config {
                Some(p) => read_json(p)?,
                None => GenSpec::default(),
            };
            let spec = GenSpec {
                seed,
                num_graphs,
                ..base
            };
            let corpus = generate(&spec)?;
            corpus.write(&out)?;
            let triggers: usize = corpus.manifest.graphs.iter().map(|e| e.trigger_ids.len()).sum();
            eprintln!("wrote {} graphs ({triggers} triggers) to {}", corpus.graphs.len(), out.display());
        }
        Command::Train {
            corpus,
            model,
            seed,
            out,
            config,
            loss,
            history,
        } => {
            let mut cfg: TrainConfig = match &config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            cfg.seed = seed;
            if let Some(l) = loss {
                cfg.loss = l;
            }
            let graphs = read_thread_dir(&corpus)?;
            let encoder = EncoderSpec::default();
            let examples: Vec<Example> = graphs.iter().map(|g| Example::new(g, &encoder)).collect();
            let outcome = train(&examples, &ModelConfig::default_for(model, encoder.dim), &cfg)?;
            for id in &outcome.skipped {
                eprintln!("warning: {id} has no gold labels; skipped");
            }
            TrainedModel::new(outcome.model, encoder)?.save(&out)?;
            if let Some(path) = history {
                let h = History {
                    format_version: FORMAT_VERSION,
                    model_kind: model,
                    loss: cfg.loss,
                    seed,
                    epochs: &outcome.history,
                    skipped: &outcome.skipped,
                };
                write(&path, &serde_json::to_string_pretty(&h)?)?;
            }
            if let Some(last) = outcome.history.last() {
                eprintln!("trained {model} for {} epochs, final loss {last:.6}", outcome.history.len());
            }
        }
        Command::Evaluate {
            ckpt,
            corpus,
            out,
            parallel,
        } => {
            let model = TrainedModel::load(&ckpt)?;
            let graphs = read_thread_dir(&corpus)?;
            let report = if parallel {
                let trajectories = graphs
                    .par_iter()
                    .map(|g| stream_predict(&model, g, &model.encoder))
                    .collect::<replygraph_core::Result<Vec<_>>>()?;
                EvalReport::build(model.model.kind(), &graphs, &trajectories)?
            } else {
                evaluate_corpus(&model, &graphs)?
            };
            write(&out, &serde_json::to_string_pretty(&report)?)?;
            let m = &report.final_horizon;
            eprintln!(
                "{} graphs, {} nodes: accuracy {:.4}, MAE {:.4}",
                report.graphs, m.total, m.accuracy, m.mae
            );
        }
        Command::StreamReport {
            ckpts,
            thread,
            format,
            out,
            width,
            at,
        } => {
            let bytes = fs::read(&thread).with_context(|| format!("reading {}", thread.display()))?;
            let g = parse_thread(&bytes)?;
            let models = ckpts.iter().map(|p| TrainedModel::load(p)).collect::<replygraph_core::Result<Vec<_>>>()?;
            let trajectories = models
                .iter()
                .map(|m| stream_predict(m, &g, &m.encoder))
                .collect::<replygraph_core::Result<Vec<_>>>()?;
            let columns: Vec<ModelColumn<'_>> = trajectories
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let name = t.model_kind.display_name();
                    let repeats = trajectories[..k].iter().filter(|u| u.model_kind == t.model_kind).count();
                    ModelColumn {
                        name: if repeats == 0 { name.to_owned() } else { format!("{name} ({})", repeats + 1) },
                        trajectory: t,
                    }
                })
                .collect();
            let options = ReportOptions {
                width: (width > 0).then_some(width),
                at,
            };
            let text = render_report(&g, &columns, format, options)?;
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::GradCheck { seed, out } => {
            let mut reports = Vec::new();
            for kind in ModelKind::ALL {
                for loss in [LossKind::Ce, LossKind::OrdinalWeighted] {
                    let r = grad_check(kind, seed, loss)?;
                    println!(
                        "{:<13} {:<17} {:>5} coords  max rel err {:.3e}  ({}[{}])",
                        kind.as_str(),
                        loss.as_str(),
                        r.coordinates,
                        r.max_relative_error,
                        r.worst_tensor,
                        r.worst_index
                    );
                    reports.push(r);
                }
            }
            let worst = reports.iter().map(|r| r.max_relative_error).fold(0.0, f64::max);
            if let Some(path) = out {
                let file = GradCheckFile {
                    format_version: FORMAT_VERSION,
                    seed,
                    threshold: GRAD_CHECK_THRESHOLD,
                    reports: &reports,
                };
                write(&path, &serde_json::to_string_pretty(&file)?)?;
            }
            if worst >= GRAD_CHECK_THRESHOLD {
                bail!("gradient check failed: max relative error {worst:.3e} >= {GRAD_CHECK_THRESHOLD:e}");
            }
            println!("PASS: max relative error {worst:.3e} < {GRAD_CHECK_THRESHOLD:e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
