use std::path::PathBuf;
use std::process::ExitCode;

use author2vec_cli::stages::{self, BaselineKind, EvalTask, PretrainInput};
use author2vec_cli::{CliError, Context, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "author2vec",
    version,
    about = "Author embeddings from post-embedding sequences"
)]
struct Args {
    /// Experiment config (TOML). Defaults apply to every key left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. `1` gives bitwise-reproducible artifacts.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root; overrides `output` in the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Dotted config override, e.g. `--set pretrain.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus with planted labels.
    Synth,
    /// Load, label and filter the corpus; stub-embed its posts.
    Ingest,
    /// Pre-train the encoder on author identity.
    Pretrain {
        #[arg(long, value_enum, default_value = "posts")]
        input: PretrainInput,
    },
    /// Encode every author with the pretrained model.
    EmbedAuthors {
        #[arg(long, value_enum, default_value = "posts")]
        input: PretrainInput,
    },
    /// Fit a comparison embedder.
    Baseline {
        #[arg(value_enum)]
        kind: BaselineKind,
    },
    /// Cross-validated attribute probes over the configured embeddings.
    Eval {
        #[command(subcommand)]
        task: TaskArg,
    },
    /// t-SNE scatter plot of one embedding.
    Viz,
    /// Print the resolved config as TOML.
    ShowConfig,
    /// Run the whole pipeline on a synthetic corpus.
    Synthetic,
}

#[derive(Subcommand, Debug)]
enum TaskArg {
    Gender,
    Depression,
    Mbti,
    Custom {
        #[arg(long)]
        attribute: String,
    },
}

fn run(args: Args) -> Result<(), CliError> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut config = ExperimentConfig::load(args.config.as_deref(), &overrides)?;
    if let Some(out) = args.output {
        config.output = out;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let ctx = Context::new(config);
    match args.command {
        Command::Synth => stages::cmd_synth(&ctx)?,
        Command::Ingest => {
            let s = stages::cmd_ingest(&ctx)?;
            println!("{} authors, {} posts", s.authors, s.posts);
        }
        Command::Pretrain { input } => {
            let s = stages::cmd_pretrain(&ctx, input)?;
            println!(
                "{} authors; best epoch {} (held-out top-1 {:?}, top-5 {:?})",
                s.authors, s.best_epoch, s.best.heldout_top1, s.best.heldout_top5
            );
        }
        Command::EmbedAuthors { input } => stages::cmd_embed_authors(&ctx, input)?,
        Command::Baseline { kind } => {
            let s = stages::cmd_baseline(&ctx, kind)?;
            println!(
                "{} dims; {} authors without evidence",
                s.dim,
                s.no_evidence.len()
            );
        }
        Command::Eval { task } => {
            let task = match task {
                TaskArg::Gender => EvalTask::Gender,
                TaskArg::Depression => EvalTask::Depression,
                TaskArg::Mbti => EvalTask::Mbti,
                TaskArg::Custom { attribute } => EvalTask::Custom(attribute),
            };
            let s = stages::cmd_eval(&ctx, &task)?;
            print!(
                "{}",
                author2vec_core::evalharness::comparison_table(&s.reports)
            );
        }
        Command::Viz => {
            let s = stages::cmd_viz(&ctx)?;
            println!("{} points, final KL {:?}", s.points, s.final_kl);
        }
        Command::ShowConfig => print!("{}", ctx.config.to_toml()),
        Command::Synthetic => {
            let s = stages::cmd_synthetic(&ctx)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
