use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use unicollab::cli::{parse_seed_list, run_experiment, Experiment, Method, RunConfig};
use unicollab::model::Penalty;
use unicollab::Result;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Verb {
    Design,
    Fig2,
    Fig3,
    Fig4,
    Detect,
}

impl From<Verb> for Experiment {
    fn from(v: Verb) -> Self {
        match v {
            Verb::Design => Experiment::SingleDesign,
            Verb::Fig2 => Experiment::Fig2,
            Verb::Fig3 => Experiment::Fig3,
            Verb::Fig4 => Experiment::Fig4,
            Verb::Detect => Experiment::Detect,
        }
    }
}

/// Universal collaboration matrix design for distributed detection.
#[derive(Debug, Parser)]
#[command(name = "unicollab", version)]
struct Args {
    verb: Verb,
    /// TOML run config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed list: `7`, `1,2,3` or `0..50`.
    #[arg(long, visible_alias = "seed")]
    seeds: Option<String>,
    /// l0, l1 or none. For `design`/`detect` this picks the method unless
    /// `--method` is given.
    #[arg(long)]
    penalty: Option<Penalty>,
    #[arg(long, conflicts_with = "target_deactivation")]
    gamma: Option<f64>,
    #[arg(long)]
    target_deactivation: Option<f64>,
    /// pca, diagonal, random, l0 or l1.
    #[arg(long)]
    method: Option<Method>,
    /// CSV of signals, one per row.
    #[arg(long)]
    signals: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    i: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    pfa: Option<f64>,
    /// Comma-separated sweep values (M for fig2, I for fig3).
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
    #[arg(long)]
    grid: Option<usize>,
    /// Print nothing on success.
    #[arg(long, short)]
    quiet: bool,
}

fn build_config(args: &Args) -> Result<RunConfig> {
    let experiment = Experiment::from(args.verb);
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(experiment),
    };
    cfg.experiment = experiment;
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seed_list(s)?;
    }
    if let Some(p) = args.penalty {
        cfg.penalty = p;
        if args.method.is_none() {
            cfg.method = match p {
                Penalty::L0 => Method::L0,
                Penalty::L1 => Method::L1,
                Penalty::None => Method::Pca,
            };
        }
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(g) = args.gamma {
        cfg.gamma = Some(g);
        cfg.target_deactivation = None;
    }
    if let Some(t) = args.target_deactivation {
        cfg.target_deactivation = Some(t);
        cfg.gamma = None;
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(n, m, i, sigma, pfa, grid);
    if let Some(t) = args.trials {
        cfg.trials = Some(t);
    }
    if let Some(s) = &args.signals {
        cfg.signals = Some(s.clone());
    }
    if let Some(s) = &args.sweep {
        cfg.sweep = Some(s.clone());
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<()> {
    let cfg = build_config(args)?;
    let files = run_experiment(&cfg, &cfg.output_dir)?;
    if !args.quiet {
        for f in files {
            println!("{}", f.display());
        }
    }
    Ok(())
}

fn report(kind: &str, message: &str) {
    let record = serde_json::json!({
        "error": { "kind": kind, "message": message }
    });
    eprintln!("{record}");
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.render().to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
