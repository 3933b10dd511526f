use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chebdea::dea::{score_all, Method, ReturnsToScale};
use chebdea::error::{Error, Result};
use chebdea::partition::TreeParams;
use chebdea::pipeline::{run_pipeline, Mode, PipelineConfig};
use chebdea::records::{load_records, preprocess, write_records, LibraryRecord};
use chebdea::report::{correlate_columns, write_drops, write_matrix, write_report, write_scores};
use chebdea::second_stage::DEFAULT_EPSILON;
use chebdea::synth::{generate_panel, write_planted, write_truth, SynthConfig};

#[derive(Parser)]
#[command(name = "chebdea", version, about = "Chebyshev-distance DEA for library panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum RtsArg {
    Vrs,
    Crs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Linear,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    None,
    Tree,
    Expert,
    Both,
}

#[derive(Args)]
struct Common {
    /// Library records CSV (or a score table for `compare`).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "vrs")]
    rts: RtsArg,
    #[arg(long, global = true, value_enum, default_value = "linear")]
    method: MethodArg,
    /// Clamp margin applied before the logit transform.
    #[arg(long, global = true, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, global = true, default_value_t = 138)]
    min_bucket: usize,
    #[arg(long, global = true, default_value_t = 7)]
    max_depth: usize,
    #[arg(long, global = true, default_value_t = 11)]
    leaves: usize,
    /// Output directory; tables go to stdout when omitted, where supported.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for scoring; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Also offer population density to the tree.
    #[arg(long, global = true)]
    tree_density: bool,
    /// Fixed kernel bandwidth instead of the rule of thumb.
    #[arg(long, global = true)]
    bandwidth: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full-sample scores for every complete record.
    Scores,
    /// Preliminary scores, environmental regression and score density.
    SecondStage,
    /// Tree categories and scores separated by them.
    Tree,
    /// Expert categories and scores separated by them.
    Expert,
    /// Correlations among the numeric columns of a score table.
    Compare,
    /// Synthetic library records with a planted environmental effect.
    Synth {
        #[arg(long, default_value_t = 4660)]
        units: usize,
        /// Variance of the latent noise.
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
    },
    /// Everything: preliminary, categorised and separated scores, comparison.
    Pipeline {
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
    },
}

impl Common {
    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Input("--input is required".into()))
    }

    fn records(&self) -> Result<Vec<LibraryRecord>> {
        let loaded = load_records(self.input()?)?;
        for w in &loaded.warnings {
            eprintln!("warning: {}", w);
        }
        Ok(loaded.records)
    }

    fn rts(&self) -> ReturnsToScale {
        match self.rts {
            RtsArg::Vrs => ReturnsToScale::Vrs,
            RtsArg::Crs => ReturnsToScale::Crs,
        }
    }

    fn method(&self) -> Method {
        match self.method {
            MethodArg::Linear => Method::Linear,
            MethodArg::Exact => Method::Exact,
        }
    }

    fn pipeline_config(&self, mode: Mode) -> Result<PipelineConfig> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Input(format!("--epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Input(format!("--bandwidth must be positive, got {}", h)));
            }
        }
        Ok(PipelineConfig {
            mode,
            rts: self.rts(),
            method: self.method(),
            epsilon: self.epsilon,
            tree: TreeParams {
                min_bucket: self.min_bucket,
                max_depth: self.max_depth,
                n_leaves: self.leaves,
            },
            tree_uses_density: self.tree_density,
            bandwidth: self.bandwidth,
        })
    }
}

fn run_report(common: &Common, mode: Mode) -> Result<()> {
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| Error::Input("--out is required".into()))?;
    let report = run_pipeline(&common.records()?, &common.pipeline_config(mode)?)?;
    for w in &report.warnings {
        eprintln!("warning: {}", w);
    }
    for path in write_report(&report, out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Scores => {
            let prepared = preprocess(&common.records()?)?;
            for d in &prepared.drops {
                eprintln!("warning: dropped {}: {}", d.id, d.reasons.join("; "));
            }
            let scores = score_all(&prepared.panel, common.rts(), common.method())?;
            match &common.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    write_scores(&scores, fs::File::create(dir.join("scores.csv"))?)?;
                    write_drops(&prepared.drops, fs::File::create(dir.join("drops.csv"))?)?;
                }
                None => write_scores(&scores, io::stdout().lock())?,
            }
        }
        Command::SecondStage => run_report(common, Mode::None)?,
        Command::Tree => run_report(common, Mode::Tree)?,
        Command::Expert => run_report(common, Mode::Expert)?,
        Command::Pipeline { mode } => {
            let mode = match mode {
                ModeArg::None => Mode::None,
                ModeArg::Tree => Mode::Tree,
                ModeArg::Expert => Mode::Expert,
                ModeArg::Both => Mode::Both,
            };
            run_report(common, mode)?
        }
        Command::Compare => {
            let (names, matrix) = correlate_columns(fs::File::open(common.input()?)?)?;
            match &common.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    write_matrix(&names, &matrix, fs::File::create(dir.join("correlations.csv"))?)?;
                }
                None => write_matrix(&names, &matrix, io::stdout().lock())?,
            }
        }
        Command::Synth { units, sigma2 } => {
            let out = common
                .out
                .as_deref()
                .ok_or_else(|| Error::Input("--out is required".into()))?;
            let config = SynthConfig {
                seed: common.seed,
                n_units: units,
                sigma2,
                ..Default::default()
            };
            let (records, truth) = generate_panel(&config)?;
            fs::create_dir_all(out)?;
            write_records(&records, fs::File::create(out.join("records.csv"))?)?;
            write_truth(&records, &truth, fs::File::create(out.join("truth.csv"))?)?;
            write_planted(&truth, fs::File::create(out.join("planted.csv"))?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.common.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build_global()
        {
            eprintln!("error: {}", e);
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
