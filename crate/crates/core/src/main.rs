//! wmbench CLI: train, generate, detect, attack, evaluate, report.
//!
//! Exit codes: 0 success, 2 config error, 3 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// println! that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

use wmbench::corpus::{synthetic_corpus, write_corpus};
use wmbench::error::{Error, Result};
use wmbench::run::{
    cmd_attack, cmd_detect, cmd_evaluate, cmd_generate, cmd_report, cmd_train, AttackKind,
    EvalSource, RunConfig, RunContext,
};

#[derive(Parser)]
#[command(
    name = "wmbench",
    about = "Text watermarking bench: embed, detect, attack, and score watermarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Override the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn open(&self) -> Result<RunContext> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(out_dir) = &self.out_dir {
            config.out_dir = out_dir.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        RunContext::open(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic synthetic corpus split into train/scoring/prompt
    /// files.
    GenCorpus {
        /// Directory for corpus_train.txt, corpus_scoring.txt,
        /// corpus_prompts.txt.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 3000)]
        docs: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Train the generation and scoring models from the configured corpora.
    Train(ConfigArgs),
    /// Generate one population of texts.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Scheme label from the config; omit for the clean population.
        #[arg(long)]
        scheme: Option<String>,
    },
    /// Score a corpus against the clean population for one scheme.
    Detect {
        #[command(flatten)]
        config: ConfigArgs,
        /// Scheme label from the config.
        #[arg(long)]
        scheme: String,
        /// Positives file (relative to the run directory); defaults to the
        /// scheme's generated corpus.
        #[arg(long)]
        input: Option<String>,
        /// Output name for score/roc/summary files; defaults to the scheme
        /// label.
        #[arg(long)]
        tag: Option<String>,
    },
    /// Attack a watermarked corpus (scrub or steal).
    Attack {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        scheme: String,
    },
    /// Assemble the weighted characteristic-score report.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Score bundled reference measurements from this fixture directory
        /// instead of live artifacts.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Re-emit CSV and plots from an existing report.json.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { out_dir, docs, seed } => {
            if docs < 10 {
                return Err(Error::Config("need at least 10 docs".into()));
            }
            std::fs::create_dir_all(&out_dir)?;
            let all = synthetic_corpus(seed, docs);
            let train_end = docs * 7 / 10;
            let scoring_end = docs * 9 / 10;
            let splits = [
                ("corpus_train.txt", &all[..train_end]),
                ("corpus_scoring.txt", &all[train_end..scoring_end]),
                ("corpus_prompts.txt", &all[scoring_end..]),
            ];
            for (name, docs) in splits {
                let path = out_dir.join(name);
                write_corpus(&path, docs)?;
                say!("wrote {} ({} docs)", path.display(), docs.len());
            }
        }
        Command::Train(args) => {
            let mut ctx = args.open()?;
            let outcome = cmd_train(&mut ctx)?;
            say!(
                "trained {}: vocab {} tokens {}",
                outcome.model_path.display(),
                outcome.vocab_size,
                outcome.trained_tokens
            );
        }
        Command::Generate { config, scheme } => {
            let mut ctx = config.open()?;
            let outcome = cmd_generate(&mut ctx, scheme.as_deref())?;
            say!(
                "generated {} texts -> {} ({:.2}s)",
                outcome.texts,
                outcome.file.display(),
                outcome.seconds
            );
        }
        Command::Detect {
            config,
            scheme,
            input,
            tag,
        } => {
            let mut ctx = config.open()?;
            let summary = cmd_detect(&mut ctx, &scheme, input.as_deref(), tag.as_deref())?;
            say!(
                "{}: auc {:.4} over {} marked / {} clean texts ({:.3}s detect)",
                summary.tag, summary.auc, summary.positives, summary.negatives,
                summary.detect_seconds
            );
        }
        Command::Attack {
            config,
            kind,
            scheme,
        } => {
            let mut ctx = config.open()?;
            let kind: AttackKind = kind.parse()?;
            let files = cmd_attack(&mut ctx, kind, &scheme)?;
            for f in files {
                say!("attacked -> {}", f.display());
            }
        }
        Command::Evaluate { config, fixtures } => {
            let mut ctx = config.open()?;
            let source = match fixtures {
                Some(dir) => EvalSource::Fixtures(dir),
                None => EvalSource::Live,
            };
            let report = cmd_evaluate(&mut ctx, source)?;
            for group in &report.groups {
                for e in &group.entries {
                    say!(
                        "{}/{}/{}: s_d {:.3} s_t {:.3} s_u {:.3} s_r {:.3} s_i {:.3} -> s_cefw {:.3}",
                        group.model,
                        group.dataset,
                        e.scheme,
                        e.scores.s_d,
                        e.scores.s_t,
                        e.scores.s_u,
                        e.scores.s_r,
                        e.scores.s_i,
                        e.s_cefw
                    );
                }
            }
            say!("report: {}", ctx.path("report.json").display());
        }
        Command::Report { report, out_dir } => {
            for f in cmd_report(&report, &out_dir)? {
                say!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
