//! `patchface` command-line driver.
//!
//! Every command prints `seed=N` first and then `key=value` result lines.
//! Failures print a single `error: <kind>: <message>` line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchface::harness::commands::{cmd_baseline, cmd_enroll, cmd_evaluate, cmd_identify, cmd_synth, cmd_train};
use patchface::harness::report::DECISION_KINDS;
use patchface::harness::{Config, EvalReport};
use patchface::sparse::{Extractor, ModalitySelection};

#[derive(Parser, Debug)]
#[command(name = "patchface", version, about = "Patch-level RGB-D face identification")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Key = value configuration file; defaults apply to missing keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "both", value_name = "image|depth|both")]
    modality: ModalitySelection,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    out: PathBuf,
    #[arg(long, global = true, default_value = "cnn", value_name = "cnn|hog|lbp|raw")]
    extractor: Extractor,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Writes a synthetic RGB-D dataset and its manifest.
    Synth,
    /// Trains one network per selected modality.
    Train {
        /// Dataset manifest.
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
    },
    /// Builds a gallery file from the gallery split.
    Enroll {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Directory holding image.pfnn / depth.pfnn (cnn extractor only).
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
    },
    /// Identifies one registered image/depth pair.
    Identify {
        #[arg(long, value_name = "PATH")]
        gallery: PathBuf,
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
        #[arg(long, value_name = "PGM|PPM")]
        image: PathBuf,
        #[arg(long, value_name = "PGM")]
        depth: PathBuf,
        /// Ground-truth label, copied into the decision row.
        #[arg(long)]
        label: Option<String>,
    },
    /// Identifies every probe sample against a stored gallery.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_name = "PATH")]
        gallery: PathBuf,
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
    },
    /// Enrolls and evaluates with the chosen extractor in one go.
    Baseline {
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        #[arg(long, value_name = "DIR")]
        models: Option<PathBuf>,
    },
}

fn load_config(g: &Global) -> patchface::Result<Config> {
    let config = match &g.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    Ok(match g.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    })
}

fn print_report(report: &EvalReport, out: &Path) {
    let computed = report.computed();
    for (k, acc) in report.overall().iter().enumerate() {
        if computed[k] {
            let name = DECISION_KINDS[k];
            println!("rank1_{name}={:.6}", acc.rate());
        }
    }
    println!("probes={}", report.queries.len());
    println!("seconds={:.2}", report.seconds);
    println!("report={}", out.display());
    print!("{}", report.summary_table());
}

fn run(cli: Cli) -> patchface::Result<()> {
    let g = &cli.global;
    let config = load_config(g)?;
    println!("seed={}", config.seed);
    let selection = g.modality;
    match &cli.command {
        Command::Synth => {
            let manifest = cmd_synth(&config, &g.out)?;
            println!("manifest={}", manifest.display());
        }
        Command::Train { data } => {
            for s in cmd_train(&config, data, selection, &g.out)? {
                let name = s.modality.name();
                if let Some(last) = s.outcome.history.last() {
                    println!("{name}_final_loss={:.6}", last.mean_batch_loss);
                    if let Some(h) = last.heldout_loss {
                        println!("{name}_heldout_loss={h:.6}");
                    }
                }
                println!("{name}_model={}", s.model_path.display());
                println!("{name}_log={}", s.log_path.display());
            }
        }
        Command::Enroll { data, models } => {
            let path = cmd_enroll(&config, data, g.extractor, models.as_deref(), selection, &g.out)?;
            println!("gallery={}", path.display());
        }
        Command::Identify { gallery, models, image, depth, label } => {
            let row = cmd_identify(&config, gallery, models.as_deref(), image, depth, label.as_deref(), selection, &g.out)?;
            println!("decision={row}");
        }
        Command::Evaluate { data, gallery, models } => {
            let report = cmd_evaluate(&config, data, gallery, models.as_deref(), selection, &g.out)?;
            print_report(&report, &g.out);
        }
        Command::Baseline { data, models } => {
            let report = cmd_baseline(&config, data, g.extractor, models.as_deref(), selection, &g.out)?;
            print_report(&report, &g.out);
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
