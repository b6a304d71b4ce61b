use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use schemakit_cli::config::{Overrides, Settings};
use schemakit_cli::ops::{self, IntrusionMethod, Outputs, RankMode};
use schemakit_cli::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "schemakit",
    version,
    about = "Event schema induction, matching and evaluation"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags beat `SCHEMAKIT_*` variables, which beat the config file, which
/// beats built-in defaults.
#[derive(Debug, Args)]
struct Global {
    /// Ontology JSON document [env: SCHEMAKIT_ONTOLOGY]
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    /// Schema library directory [env: SCHEMAKIT_LIBRARY]
    #[arg(long, global = true)]
    library: Option<PathBuf>,
    /// TOML config file [env: SCHEMAKIT_CONFIG]
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every seeded stage [env: SCHEMAKIT_SEED]
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine frequent itemsets from a transactions file, or from the
    /// co-reference transactions of a corpus.
    Mine {
        /// Lines `doc_id<TAB>chain_id<TAB>items...`.
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        transactions: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// A count, or a fraction of transactions when it has a decimal point.
        #[arg(long)]
        min_support: Option<String>,
        #[arg(long)]
        min_items: Option<usize>,
        #[arg(long)]
        max_items: Option<usize>,
    },
    /// Order, rank and chain itemsets into skeleton schemas.
    BuildSkeletons {
        #[arg(long)]
        transactions: PathBuf,
        #[arg(long)]
        itemsets: PathBuf,
        /// `pmi`, or `table:<path>` for a tab-separated pair score table.
        #[arg(long, default_value = "pmi")]
        scorer: ops::ScorerChoice,
        #[arg(long)]
        top_sequences: Option<usize>,
        #[arg(long)]
        reuse_cap: Option<usize>,
        #[arg(long)]
        top_chains: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn skeletons into partially filled schemas.
    Instantiate {
        #[arg(long)]
        skeletons: PathBuf,
        /// Skeleton ids; all when omitted.
        #[arg(long = "id")]
        ids: Vec<String>,
        /// Output directory; the library when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate schema files or directories; the library when none given.
    Validate {
        paths: Vec<PathBuf>,
        /// Print reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Cov@t of the library over a corpus, per event-count stratum.
    Coverage {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated thresholds in (0, 1].
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Comma-separated strata `lo:hi` or `lo:`.
        #[arg(long, value_delimiter = ',')]
        strata: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ranking metrics against gold document-schema labels.
    Rank {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        mode: RankMode,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        strata: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match library schemas against documents with soft-logic inference.
    Infer {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        /// Try every schema on every document.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate schema intrusion tasks.
    IntrusionGen {
        #[arg(long, value_enum, default_value = "library")]
        method: IntrusionMethod,
        /// Corpus method: the corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corpus method: `matches.jsonl` from `infer` over that corpus.
        #[arg(long)]
        matches: Option<PathBuf>,
        #[arg(long)]
        tasks_per_schema: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score annotator responses against an answer key.
    IntrusionScore {
        #[arg(long)]
        answer_key: PathBuf,
        /// CSV `task_id,annotator_id,pick` with a header.
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic library, corpus and gold labels.
    Synth {
        #[arg(long)]
        n_schemas: Option<usize>,
        #[arg(long)]
        n_docs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        /// Address to listen on [env: SCHEMAKIT_BIND]
        #[arg(long)]
        bind: Option<String>,
        /// Concurrent jobs [env: SCHEMAKIT_WORKERS]
        #[arg(long)]
        workers: Option<usize>,
        /// Job output root [env: SCHEMAKIT_DATA_DIR]
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Skeletons offered for instantiation.
        #[arg(long)]
        skeletons: Option<PathBuf>,
    },
}

fn emit(outputs: &Outputs, out: Option<&Path>) -> anyhow::Result<()> {
    println!("{}", outputs.summary.trim_end());
    if let Some(dir) = out {
        for path in outputs.write_to(dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn library_id(path: &Path) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("library")
        .to_string()
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let flags = Overrides {
        config: cli.global.config,
        ontology: cli.global.ontology,
        library: cli.global.library,
        seed: cli.global.seed,
    };
    let mut s = Settings::resolve(&flags, |k| std::env::var(k).ok())?;
    let ontology = |s: &Settings| ops::read_ontology(&s.ontology);
    let library = |s: &Settings| ops::read_library(&s.library);
    match cli.command {
        Command::Mine {
            transactions,
            corpus,
            out,
            min_support,
            min_items,
            max_items,
        } => {
            let mut mining = s.mining;
            let mut min_support_fraction = None;
            match min_support {
                Some(v) if v.contains('.') => {
                    min_support_fraction = Some(v.parse().context("--min-support")?)
                }
                Some(v) => mining.min_support = v.parse().context("--min-support")?,
                None => {}
            }
            mining.min_items = min_items.unwrap_or(mining.min_items);
            mining.max_items = max_items.unwrap_or(mining.max_items);
            let p = ops::MineParams {
                transactions,
                corpus,
                min_support_fraction,
                mining,
            };
            emit(&ops::mine(&p)?, Some(&out))?;
        }
        Command::BuildSkeletons {
            transactions,
            itemsets,
            scorer,
            top_sequences,
            reuse_cap,
            top_chains,
            out,
        } => {
            let mut builder = s.builder;
            builder.top_sequences = top_sequences.unwrap_or(builder.top_sequences);
            builder.reuse_cap = reuse_cap.unwrap_or(builder.reuse_cap);
            builder.top_chains = top_chains.unwrap_or(builder.top_chains);
            let p = ops::BuildParams {
                transactions,
                itemsets,
                scorer,
                builder,
            };
            emit(&ops::build(&p, &ontology(&s)?)?, Some(&out))?;
        }
        Command::Instantiate {
            skeletons,
            ids,
            out,
        } => {
            let out = out.unwrap_or_else(|| s.library.clone());
            let p = ops::InstantiateParams { skeletons, ids };
            emit(&ops::instantiate(&p, &ontology(&s)?)?, Some(&out))?;
        }
        Command::Validate { paths, json } => {
            let paths = if paths.is_empty() {
                vec![s.library.clone()]
            } else {
                paths
            };
            let outcomes = ops::validate_paths(&paths, &ontology(&s)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&outcomes)?);
            } else {
                print!("{}", ops::render_validation(&outcomes));
            }
            if !outcomes.iter().all(ops::ValidationOutcome::ok) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Coverage {
            corpus,
            thresholds,
            strata,
            out,
        } => {
            if let Some(t) = thresholds {
                s.coverage.thresholds = t;
            }
            if let Some(st) = strata {
                s.coverage.strata = st;
            }
            let p = ops::CoverageParams {
                corpus,
                coverage: s.coverage.clone(),
            };
            emit(
                &ops::coverage_report(&p, &library(&s)?, &library_id(&s.library))?,
                out.as_deref(),
            )?;
        }
        Command::Rank {
            corpus,
            gold,
            mode,
            ks,
            strata,
            out,
        } => {
            let p = ops::RankParams {
                corpus,
                gold,
                mode,
                ks: ks.unwrap_or_else(|| s.rank.ks.clone()),
                strata: strata.unwrap_or_else(|| s.coverage.strata.clone()),
            };
            emit(&ops::rank(&p, &library(&s)?)?, out.as_deref())?;
        }
        Command::Infer {
            corpus,
            top_k,
            exhaustive,
            out,
        } => {
            let mut inference = s.inference;
            inference.top_k = top_k.unwrap_or(inference.top_k);
            let p = ops::InferParams {
                corpus,
                inference,
                exhaustive,
            };
            emit(&ops::infer(&p, &library(&s)?)?, Some(&out))?;
        }
        Command::IntrusionGen {
            method,
            corpus,
            matches,
            tasks_per_schema,
            out,
        } => {
            let mut intrusion = s.intrusion;
            intrusion.tasks_per_schema = tasks_per_schema.unwrap_or(intrusion.tasks_per_schema);
            let p = ops::IntrusionParams {
                method,
                corpus,
                matches,
                intrusion,
            };
            emit(&ops::intrusion_generate(&p, &library(&s)?)?, Some(&out))?;
        }
        Command::IntrusionScore {
            answer_key,
            responses,
            out,
        } => {
            let p = ops::ScoreParams {
                answer_key,
                responses,
            };
            emit(&ops::intrusion_score(&p)?, out.as_deref())?;
        }
        Command::Synth {
            n_schemas,
            n_docs,
            out,
        } => {
            let mut synth = s.synth;
            synth.n_schemas = n_schemas.unwrap_or(synth.n_schemas);
            synth.n_docs = n_docs.unwrap_or(synth.n_docs);
            emit(
                &ops::synth(&ops::SynthParams { synth }, &ontology(&s)?)?,
                Some(&out),
            )?;
        }
        Command::Serve {
            bind,
            workers,
            data_dir,
            skeletons,
        } => {
            if let Some(b) = bind {
                s.server.bind = b;
            }
            if let Some(w) = workers {
                anyhow::ensure!(w > 0, "--workers must be at least 1");
                s.server.workers = w;
            }
            if let Some(d) = data_dir {
                s.server.data_dir = d;
            }
            if skeletons.is_some() {
                s.server.skeletons = skeletons;
            }
            let ont = ontology(&s)?;
            let state = AppState::new(s, ont).context("opening the library store")?;
            tokio::runtime::Runtime::new()?.block_on(server::serve(state))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
