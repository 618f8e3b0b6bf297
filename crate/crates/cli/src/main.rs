use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use calibeat::calibeating::climatology_run;
use calibeat::config::RunSettings;
use calibeat::datagen::{dump_stream, realize, substream, Purpose};
use calibeat::output::{write_climatology_outputs, write_run_outputs};
use calibeat::pipeline::{run_pipeline, run_replication};
use calibeat::theorems::{run_theorem_suite, TheoremSuiteConfig};
use calibeat::trace::Method;
use clap::{Args, Parser, Subcommand};
use rand::Rng;

/// Online post-hoc calibration experiments.
#[derive(Parser)]
#[command(name = "calibeat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every requested method over a stream and write CE/SHP series,
    /// plots and report.json.
    Run(StreamArgs),
    /// Check the regret, sharpness, CE and Brier guarantees; writes
    /// theorems.csv and exits nonzero if any check fails.
    Theorems(TheoremArgs),
    /// Hedged forecasts on i.i.d. Bernoulli outcomes without covariates.
    Climatology(ClimatologyArgs),
    /// Write one replication of a stream as CSV (t, score, y, truth).
    DumpStream(DumpArgs),
}

#[derive(Args, Clone)]
struct StreamArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// cov1d, label1d, reg1d, covmulti[-iid], labelmulti[-iid],
    /// adversarial-ops, adversarial-hops or csv.
    #[arg(long)]
    stream: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated, e.g. BM,OPS,TOPS,HOPS.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    tcal: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    ttrain: Option<usize>,
    #[arg(long)]
    ttest: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, requires = "csv")]
    label: Option<String>,
    #[arg(long, requires = "csv")]
    sortby: Option<String>,
    #[arg(long, requires = "csv")]
    score: Option<String>,
}

impl StreamArgs {
    fn settings(&self) -> Result<RunSettings> {
        let base = match &self.config {
            Some(path) => {
                RunSettings::load(path).with_context(|| format!("reading {}", path.display()))?
            }
            None => RunSettings::default(),
        };
        let mut flags = RunSettings::default();
        let s = &mut flags.stream;
        s.kind = self.stream.clone();
        s.csv = self.csv.clone();
        s.label = self.label.clone();
        s.sortby = self.sortby.clone();
        s.score = self.score.clone();
        s.t_train = self.ttrain;
        s.t_test = self.ttest;
        s.t_cal = self.tcal;
        s.window = self.window;
        if self.csv.is_some() && self.stream.is_none() {
            s.kind = Some("csv".into());
        }
        let e = &mut flags.experiment;
        e.methods = self.methods.clone();
        e.epsilon = self.eps;
        e.replications = self.reps;
        e.seed = self.seed;
        e.eval_stride = self.stride;
        flags.output.dir = self.out.clone();
        Ok(base.overridden_by(&flags))
    }
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seeds per synthetic stream.
    #[arg(long)]
    reps: Option<usize>,
    /// Seeds for the adversarial runs.
    #[arg(long)]
    adversarial_reps: Option<usize>,
    /// Rounds of each adversarial run.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ClimatologyArgs {
    /// Bernoulli parameter of the outcomes.
    #[arg(long, default_value_t = 0.37)]
    rate: f64,
    #[arg(long, default_value_t = 5000)]
    horizon: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    stream: StreamArgs,
    /// Replication index to dump.
    #[arg(long, default_value_t = 0)]
    rep: u64,
    /// Output file (default `<out>/stream.csv`).
    #[arg(long)]
    file: Option<PathBuf>,
}

fn run(args: &StreamArgs) -> Result<()> {
    let settings = args.settings()?;
    let config = settings.experiment()?;
    let dir = settings.output_dir();
    let report = run_pipeline(&config)?;
    write_run_outputs(&report, &dir)?;
    if report.base_not_converged > 0 {
        eprintln!(
            "warning: base model did not converge in {} of {} replications",
            report.base_not_converged, report.replications
        );
    }
    println!(
        "{} replications of {} -> {}",
        report.replications,
        report.stream,
        dir.display()
    );
    println!("{:<6} {:>10} {:>10}", "method", "CE", "SHP");
    for s in &report.series {
        let (ce, shp) = (s.ce.last(), s.shp.last());
        if let (Some(ce), Some(shp)) = (ce, shp) {
            println!(
                "{:<6} {:>10.4} {:>10.4}",
                s.method.name(),
                ce.mean,
                shp.mean
            );
        }
    }
    Ok(())
}

fn theorems(args: &TheoremArgs) -> Result<bool> {
    let mut config = TheoremSuiteConfig::default();
    if let Some(v) = args.eps {
        config.epsilon = v;
    }
    if let Some(v) = args.seed {
        config.master_seed = v;
    }
    if let Some(v) = args.reps {
        config.synthetic_seeds = v;
    }
    if let Some(v) = args.adversarial_reps {
        config.adversarial_seeds = v;
    }
    if let Some(v) = args.horizon {
        config.adversarial_len = v;
    }
    let report = run_theorem_suite(&config)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("theorems.csv");
    report.write_csv(&path)?;
    for c in &report.checks {
        let relation = if c.lower { ">=" } else { "<=" };
        println!(
            "{} {:<20} {:<28} {:>12.6} {} {:.6}",
            if c.pass { "PASS" } else { "FAIL" },
            c.check,
            c.case,
            c.measured,
            relation,
            c.bound
        );
    }
    println!("wrote {}", path.display());
    Ok(report.all_pass())
}

fn climatology(args: &ClimatologyArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.rate) {
        bail!("--rate must be in [0, 1]");
    }
    let mut outcome_rng = substream(args.seed, 0, Purpose::Generator);
    let outcomes: Vec<u8> = (0..args.horizon)
        .map(|_| u8::from(outcome_rng.random_bool(args.rate)))
        .collect();
    let mut hedge_rng = substream(args.seed, 0, Purpose::Hedge);
    let trace = climatology_run(&outcomes, args.eps, &mut hedge_rng)?;
    write_climatology_outputs(&trace, &args.out)?;
    let forecasts = trace.column(Method::F99).unwrap_or(&[]);
    let tail = &forecasts[forecasts.len().saturating_sub(1000)..];
    println!(
        "mean of last {} forecasts: {:.4} (rate {})",
        tail.len(),
        tail.iter().sum::<f64>() / tail.len().max(1) as f64,
        args.rate
    );
    Ok(())
}

fn dump(args: &DumpArgs) -> Result<()> {
    let settings = args.stream.settings()?;
    let mut config = settings.experiment()?;
    config.replications = 1;
    let stream = realize(&config.stream, config.master_seed, args.rep)?;
    let result = run_replication(&stream, &config, args.rep)?;
    let path = args
        .file
        .clone()
        .unwrap_or_else(|| settings.output_dir().join("stream.csv"));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    dump_stream(&result.online, &path)?;
    println!("wrote {} points to {}", result.online.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args).map(|()| true),
        Command::Theorems(args) => theorems(args),
        Command::Climatology(args) => climatology(args).map(|()| true),
        Command::DumpStream(args) => dump(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
