use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqbo::loops::{
    aggregate_curves, build_feature_map, make_oracle, read_records, run_experiment, write_curves,
    DataSource, ExperimentOutcome, LoopConfig, Mode, OracleFile,
};
use seqbo::oracles::load_pool;
use seqbo::{Alphabet, AntibodySequence};

mod plot;

/// Sequence-level Bayesian optimization of antibody binding.
#[derive(Debug, Parser)]
#[command(name = "seqbo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Replay the loop against a pre-computed pool of scored sequences.
    Validate {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Pool CSV with `heavy_chain,light_chain,ddg` columns.
        #[arg(long)]
        pool: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Config override, `key=value`; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the loop with a live oracle proposing arbitrary masked mutants.
    Full {
        config: PathBuf,
        /// Oracle file (TOML) with the wild type, mask and oracle.
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the encoding of joined sequences as JSON lines.
    Encode {
        /// Experiment config selecting the encoder; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Joined sequences, `HEAVY|LIGHT`.
        #[arg(required = true)]
        sequences: Vec<String>,
    },
    /// Evaluate the oracle of an oracle file on joined sequences.
    OracleEval {
        #[arg(long)]
        oracle: PathBuf,
        /// Joined sequences; the wild type is evaluated when none are given.
        sequences: Vec<String>,
    },
    /// Aggregate best-so-far curves from record files.
    Curves {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Curves CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG plot of the curves.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

/// A failure and the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: e.to_string(),
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: e.to_string(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let alphabet = Alphabet::standard();
    match command {
        Command::Validate {
            config,
            pool,
            out,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides, Mode::Validation)?;
            let pool = load_pool(&pool, &alphabet).map_err(usage)?;
            let outcome = run_experiment(&cfg, &DataSource::Pool(&pool), &alphabet, Some(&out)).map_err(runtime)?;
            report(&outcome, &out)
        }
        Command::Full {
            config,
            oracle,
            out,
            overrides,
        } => {
            let cfg = load_config(&config, &overrides, Mode::Full)?;
            let problem = OracleFile::load(&oracle)
                .and_then(|f| f.resolve(&alphabet))
                .map_err(usage)?;
            let oracle = make_oracle(&problem.oracle).map_err(usage)?;
            let source = DataSource::Oracle {
                wild_type: &problem.wild_type,
                mask: &problem.mask,
                oracle: oracle.as_ref(),
            };
            let outcome = run_experiment(&cfg, &source, &alphabet, Some(&out)).map_err(runtime)?;
            report(&outcome, &out)
        }
        Command::Encode {
            config,
            overrides,
            sequences,
        } => {
            let cfg = match config {
                Some(path) => LoopConfig::load(&path, &overrides).map_err(usage)?,
                None => LoopConfig::from_toml_str(&LoopConfig::new(Mode::Validation).to_toml(), &overrides)
                    .map_err(usage)?,
            };
            let seqs = parse_sequences(&sequences, &alphabet)?;
            let refs: Vec<&AntibodySequence> = seqs.iter().collect();
            let mut features = build_feature_map(&cfg, &alphabet, &refs, seqs[0].len()).map_err(usage)?;
            for s in &seqs {
                let enc = features.encode(s).map_err(runtime)?;
                let line = serde_json::json!({
                    "sequence": s.joined(),
                    "encoder": enc.encoder().name(),
                    "dimension": enc.dimension(),
                    "values": enc.to_dense(),
                });
                println!("{line}");
            }
            Ok(())
        }
        Command::OracleEval { oracle, sequences } => {
            let problem = OracleFile::load(&oracle)
                .and_then(|f| f.resolve(&alphabet))
                .map_err(usage)?;
            let oracle = make_oracle(&problem.oracle).map_err(usage)?;
            let seqs = if sequences.is_empty() {
                vec![problem.wild_type.clone()]
            } else {
                parse_sequences(&sequences, &alphabet)?
            };
            for s in &seqs {
                let value = oracle.evaluate(s).map_err(runtime)?;
                println!("{}\t{value}", s.joined());
            }
            Ok(())
        }
        Command::Curves { records, out, plot } => {
            let mut sets = Vec::with_capacity(records.len());
            for path in &records {
                let recs = read_records(path).map_err(usage)?;
                sets.push((path.display().to_string(), recs));
            }
            let points = aggregate_curves(&sets).map_err(usage)?;
            write_curves(&out, &points).map_err(runtime)?;
            if let Some(p) = plot {
                plot::render_svg(&p, &points).map_err(runtime)?;
            }
            Ok(())
        }
    }
}

/// Loads a config, applying overrides, and checks it matches the subcommand.
fn load_config(path: &Path, overrides: &[String], mode: Mode) -> Result<LoopConfig, Failure> {
    let cfg = LoopConfig::load(path, overrides).map_err(usage)?;
    if cfg.mode != mode {
        return Err(usage(format!(
            "{} sets mode = {:?}, which does not match this subcommand",
            path.display(),
            cfg.mode
        )));
    }
    Ok(cfg)
}

fn parse_sequences(joined: &[String], alphabet: &Alphabet) -> Result<Vec<AntibodySequence>, Failure> {
    joined
        .iter()
        .map(|s| AntibodySequence::from_joined(s, alphabet))
        .collect::<seqbo::Result<Vec<_>>>()
        .map_err(usage)
}

fn report(outcome: &ExperimentOutcome, out: &Path) -> Result<(), Failure> {
    for s in &outcome.summaries {
        match (&s.failure, s.final_best) {
            (Some(msg), _) => eprintln!("trial {}: failed: {msg}", s.trial),
            (None, Some(best)) => eprintln!("trial {}: best {best}", s.trial),
            (None, None) => eprintln!("trial {}: no records", s.trial),
        }
    }
    eprintln!("outputs written to {}", out.display());
    match outcome.failed_trials() {
        0 => Ok(()),
        n => Err(runtime(format!("{n} of {} trials failed", outcome.summaries.len()))),
    }
}
