use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use slaterank::harness::{
    eval_command, gradcheck_command, rerank_pipeline, synth_command, train_command, ConfigError,
    Precision, RunConfig,
};

#[derive(Parser)]
#[command(name = "slaterank", version, about = "Context-aware learning to rank")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model, keeping the checkpoint with the best validation NDCG@5
    Train(RunArgs),
    /// Evaluate a saved checkpoint on the test split
    Eval(EvalArgs),
    /// Re-ranking comparison: base ranker ordering, then models with and
    /// without positional encodings trained on the sorted slates
    Rerank(RunArgs),
    /// Verify analytic gradients of every loss against finite differences
    Gradcheck(GradcheckArgs),
    /// Generate synthetic LETOR files from the config's data.synthetic spec
    Synth(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override a config field by its serialized path, e.g. --set model.N=4
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the config's rng seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's float width
    #[arg(long, value_enum)]
    precision: Option<Precision>,
    /// Output directory
    #[arg(long, default_value = "runs/latest")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Checkpoint to score with (defaults to <out>/checkpoint.bin)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Check a single loss by name (e.g. --only ranknet)
    #[arg(long)]
    only: Option<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Corrupt the score gradients on purpose; the check must then fail
    #[arg(long, hide = true)]
    sabotage: bool,
}

fn resolve(args: &RunArgs) -> Result<RunConfig, slaterank::Error> {
    let mut config = RunConfig::from_file(&args.config)?;
    config.apply_overrides(&args.set)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(precision) = args.precision {
        config.precision = precision;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), slaterank::Error> {
    match cli.command {
        Command::Train(args) => {
            let config = resolve(&args)?;
            let outcome = train_command(&config, &args.out)?;
            println!(
                "best epoch {} with validation ndcg@5 = {:.5}",
                outcome.best_epoch, outcome.best_valid_ndcg5
            );
            if outcome.skipped_slates > 0 {
                eprintln!(
                    "warning: skipped {} slate evaluations with no clicked items",
                    outcome.skipped_slates
                );
            }
            println!("test split:");
            print!("{}", outcome.test_report.table());
            println!("outputs in {}", args.out.display());
        }
        Command::Eval(args) => {
            let config = resolve(&args.run)?;
            let checkpoint = args
                .checkpoint
                .unwrap_or_else(|| args.run.out.join("checkpoint.bin"));
            let report = eval_command(&config, &checkpoint, &args.run.out)?;
            println!("test split ({}):", checkpoint.display());
            print!("{}", report.table());
        }
        Command::Rerank(args) => {
            let config = resolve(&args)?;
            let outcome = rerank_pipeline(&config, &args.out)?;
            let at5 = |r: &slaterank::metrics::EvalReport| {
                r.ndcg_at(5).map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into())
            };
            println!("test ndcg@5  base ordering: {}", at5(&outcome.base_report));
            println!("test ndcg@5  without PE:    {}", at5(&outcome.no_pe.test_report));
            println!("test ndcg@5  with PE:       {}", at5(&outcome.pe.test_report));
            println!("outputs in {}", args.out.display());
        }
        Command::Gradcheck(args) => {
            let summary = gradcheck_command(args.only.as_deref(), args.sabotage, args.seed)?;
            for line in summary.lines() {
                println!("{line}");
            }
            if let Some(failure) = summary.first_failure() {
                return Err(failure.into());
            }
        }
        Command::Synth(args) => {
            let config = resolve(&args)?;
            let spec = config.data.synthetic.ok_or_else(|| ConfigError::Invalid {
                reason: "synth requires a data.synthetic section".into(),
            })?;
            synth_command(&spec, config.seed, &args.out)?;
            println!(
                "wrote train.txt, vali.txt, test.txt under {}",
                args.out.display()
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit 0; genuine usage
            // errors follow the documented exit code 1.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
