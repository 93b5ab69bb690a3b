use std::ffi::OsString;
use std::path::PathBuf;

use asc_core::calib::{format_metric, macro_average};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::ingest::{ingest, Format};
use crate::pipeline::{evaluate, read_predictions, run_pipeline, OutDirLock, Run};
use crate::task::{Task, TaskTarget};
use crate::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "asc", version, about = "Tweet sentiment and emotion pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Run configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overrides the configured task (V-reg, V-oc, EI-reg, EI-oc, E-c)
    #[arg(long, global = true)]
    pub task: Option<String>,

    /// Overrides the configured emotion for EI tasks
    #[arg(long, global = true)]
    pub emotion: Option<String>,

    /// Directory for artifacts
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// More log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clean both splits into JSON lines
    Clean,
    /// Extract, prune and save feature matrices
    Featurize,
    /// Train the four-sub-model classifier on the configured corpus
    TrainAsc,
    /// Fit the standardizer and train the task head
    TrainHead,
    /// Search ordinal thresholds on training scores
    Calibrate,
    /// Write predictions for the evaluation split
    Predict,
    /// Score predictions; with --pred/--gold pairs no config is needed
    Evaluate {
        #[arg(long)]
        pred: Vec<PathBuf>,
        #[arg(long)]
        gold: Vec<PathBuf>,
    },
    /// Pratt importance of the training features
    Importance,
    /// All stages from cleaning to evaluation
    Run,
}

impl Common {
    fn run(&self) -> Result<Run> {
        let Some(path) = &self.config else {
            return Err(CliError::Usage("--config is required".into()));
        };
        let mut cfg = RunConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = &self.task {
            cfg.task.task = t.parse()?;
            if !cfg.task.task.is_emotion() && self.emotion.is_none() {
                cfg.task.emotion = None;
            }
        }
        if let Some(e) = &self.emotion {
            cfg.task.emotion = Some(e.clone());
        }
        cfg.task.validate()?;
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        Run::new(cfg, &base, &self.out_dir)
    }
}

/// Scores prediction/gold file pairs; EI tasks with several pairs also get
/// the macro-average. Returns the printed report.
pub fn evaluate_pairs(task: Task, emotion: Option<String>, pred: &[PathBuf], gold: &[PathBuf]) -> Result<String> {
    if pred.len() != gold.len() || pred.is_empty() {
        return Err(CliError::Usage(format!("{} --pred files for {} --gold files", pred.len(), gold.len())));
    }
    // the emotion comes from each gold file when not given
    let target = TaskTarget { task, emotion };
    if target.emotion.is_some() || !task.is_emotion() {
        target.validate()?;
    }
    let mut lines = Vec::new();
    let mut values = Vec::new();
    for (p, g) in pred.iter().zip(gold) {
        let gold = ingest(g, &Format::Task(target.clone()))?;
        let v = evaluate(&read_predictions(p, task)?, &gold, task)?;
        let label = gold.dimension.clone().unwrap_or_else(|| task.to_string());
        lines.push(format!("{label}\t{:?}\t{}", task.metric(), format_metric(v)));
        values.push(v);
    }
    if task.is_emotion() && values.len() > 1 {
        lines.push(format!("macro-average\t{}", format_metric(macro_average(&values)?)));
    }
    Ok(lines.join("\n"))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    if let Command::Evaluate { pred, gold } = &cli.command {
        if !pred.is_empty() || !gold.is_empty() {
            let task: Task = c
                .task
                .as_deref()
                .ok_or_else(|| CliError::Usage("--task is required with --pred/--gold".into()))?
                .parse()?;
            println!("{}", evaluate_pairs(task, c.emotion.clone(), pred, gold)?);
            return Ok(());
        }
    }
    let run = c.run()?;
    if let Command::Run = cli.command {
        let r = run_pipeline(&run)?;
        println!("{}\t{}\t{}", r.task, r.metric, r.reported);
        return Ok(());
    }
    let _lock = OutDirLock::acquire(&run.out_dir)?;
    match &cli.command {
        Command::Clean => run.clean(),
        Command::Featurize => run.featurize(),
        Command::TrainAsc => run.train_asc(),
        Command::TrainHead => run.train_head(),
        Command::Calibrate => run.calibrate(),
        Command::Predict => run.predict(),
        Command::Evaluate { .. } => run.evaluate().map(|r| println!("{}\t{}\t{}", r.task, r.metric, r.reported)),
        Command::Importance => run.importance().map(|r| {
            println!("R^2\t{:.4}", r.r_squared);
            for g in &r.groups {
                println!("{}\t{}\t{:.1}%", g.name, g.dim, g.percent);
            }
        }),
        Command::Run => unreachable!("handled above"),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
