use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use lexsplit::adadrop::{dropout_probability, read_stats_tsv, write_stats_tsv};
use lexsplit::anonymize::{anonymize_with_phrases, identify_training_keywords};
use lexsplit::corpus::{random_split, LabeledCorpus, SplitManifest};
use lexsplit::harness::{
    evaluate, fit_model, run_gap_experiment, run_synthetic_benchmark, ConfigFile, EvalMetrics,
    ExperimentConfig, ExperimentReport, ModelArtifact, ModelKind, TrainedModel,
};
use lexsplit::neural::{write_metrics, Regularizer};
use lexsplit::split_graph::{construct_lexicon_split, verify_disjoint_lexicons, LexiconSplitConfig};
use lexsplit::synth::{generate, SynthConfig};

/// Lexicon-disjoint train/test splits and the random-versus-lexicon
/// accuracy gap.
#[derive(Parser)]
#[command(name = "lexsplit", version)]
struct Cli {
    /// `key = value` settings file; command-line flags take precedence.
    #[arg(long, global = true, env = "LEXSPLIT_CONFIG")]
    config: Option<PathBuf>,
    /// Random seed (default: the config file's `seed`, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress to stderr (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted keywords.
    Synth(SynthArgs),
    /// Partition a corpus into train and test sides.
    #[command(subcommand)]
    Split(SplitCommand),
    /// Mask keywords found on the train side of a split.
    Anonymize(AnonymizeArgs),
    /// Fit a model on the train side of a split.
    Train(TrainArgs),
    /// Score a trained model on the test side of a split.
    Eval(EvalArgs),
    /// Aggregate metrics files into a gap report.
    Report(ReportArgs),
    /// Run every (model, regularizer, split, seed) cell and write a report.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth keyword map.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    docs_per_class: Option<usize>,
    #[arg(long)]
    keyword_pool: Option<usize>,
    #[arg(long)]
    keywords_per_doc: Option<usize>,
    #[arg(long)]
    doc_length: Option<usize>,
    #[arg(long)]
    context_vocab: Option<usize>,
    #[arg(long)]
    skew: Option<f64>,
}

#[derive(Subcommand)]
enum SplitCommand {
    /// Stratified random split.
    Random(RandomSplitArgs),
    /// Split whose sides share no class lexicon.
    Lexicon(LexiconSplitArgs),
}

#[derive(Args)]
struct RandomSplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// |test| / |train|.
    #[arg(long)]
    test_ratio: Option<f64>,
}

#[derive(Args)]
struct LexiconSplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Initial lexicon count per class.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ratio_cutoff: Option<f64>,
    #[arg(long)]
    k_decay: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// One graph over all classes.
    #[arg(long)]
    global_graph: bool,
    /// Check the result for lexicon leaks and fail if any are found.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct AnonymizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Occurrence log (default: OUT with a .log.jsonl suffix).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Keywords per class.
    #[arg(long)]
    k: Option<usize>,
    /// Also anonymize the test side.
    #[arg(long)]
    all: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// nb, lr or mlpmax.
    #[arg(long)]
    model: ModelKind,
    /// none, anon or adadrop; anon masks train-side keywords itself, so
    /// pass the original corpus.
    #[arg(long, default_value = "none")]
    regularizer: Regularizer,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-word gradient statistics TSV (mlpmax only).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Per-epoch loss and accuracy as JSON (mlpmax only).
    #[arg(long)]
    epoch_log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    adadrop_threshold: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Artifact written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, num_args = 1.., required = true)]
    metrics: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Add the most-dropped words of a stats TSV as header notes.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Corpus to split; without it, each seed runs on its own synthetic corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    regularizers: Option<Vec<Regularizer>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
}

struct Resolved {
    config: ExperimentConfig,
    seed: u64,
}

fn load_context(cli: &Cli) -> Result<Resolved> {
    let mut config = ExperimentConfig::default();
    let mut seed = 0;
    if let Some(path) = &cli.config {
        let file = ConfigFile::load(path)?;
        file.apply(&mut config)?;
        if let Some(s) = file.get("seed")? {
            seed = s;
        }
    }
    if let Some(s) = cli.seed {
        seed = s;
    }
    Ok(Resolved { config, seed })
}

fn load_corpus(path: &PathBuf) -> Result<LabeledCorpus> {
    LabeledCorpus::load_jsonl(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn load_manifest(path: &PathBuf, corpus: &LabeledCorpus) -> Result<SplitManifest> {
    let m = SplitManifest::read(path).with_context(|| format!("loading manifest {}", path.display()))?;
    m.validate(corpus)
        .with_context(|| format!("manifest {} does not match the corpus", path.display()))?;
    Ok(m)
}

fn run(cli: Cli) -> Result<()> {
    let ctx = load_context(&cli)?;
    let mut cfg = ctx.config;
    let seed = ctx.seed;
    match cli.command {
        Command::Synth(a) => {
            let d = SynthConfig::default();
            let sc = SynthConfig {
                n_classes: a.classes.unwrap_or(d.n_classes),
                docs_per_class: a.docs_per_class.unwrap_or(d.docs_per_class),
                keyword_pool_size: a.keyword_pool.unwrap_or(d.keyword_pool_size),
                keywords_per_doc: a.keywords_per_doc.unwrap_or(d.keywords_per_doc),
                doc_length: a.doc_length.unwrap_or(d.doc_length),
                context_vocab_size: a.context_vocab.unwrap_or(d.context_vocab_size),
                skew: a.skew.unwrap_or(d.skew),
                seed,
                ..d
            };
            let s = generate(&sc)?;
            s.corpus.write_jsonl(&a.out)?;
            s.truth.write(&a.truth)?;
            println!("wrote {} documents to {}", s.corpus.len(), a.out.display());
        }
        Command::Split(SplitCommand::Random(a)) => {
            let corpus = load_corpus(&a.corpus)?;
            let m = random_split(&corpus, a.test_ratio.unwrap_or(cfg.test_ratio), seed)?;
            m.write(&a.out)?;
            println!(
                "random split: {} train, {} test, ratio {:.4}",
                m.train_ids.len(),
                m.test_ids.len(),
                m.ratio
            );
        }
        Command::Split(SplitCommand::Lexicon(a)) => {
            let corpus = load_corpus(&a.corpus)?;
            let l = &cfg.lexicon;
            let lc = LexiconSplitConfig {
                k_init: a.k.unwrap_or(l.k_init),
                ratio_cutoff: a.ratio_cutoff.unwrap_or(l.ratio_cutoff),
                k_decay: a.k_decay.unwrap_or(l.k_decay),
                k_min: a.k_min.unwrap_or(l.k_min),
                max_iterations: a.max_iterations.unwrap_or(l.max_iterations),
                global_graph: a.global_graph || l.global_graph,
                seed,
                features: l.features,
            };
            let m = construct_lexicon_split(&corpus, &lc)?;
            m.write(&a.out)?;
            for w in &m.warnings {
                eprintln!("{w}");
            }
            println!(
                "lexicon split: {} train, {} test, ratio {:.4}, k {} after {} iteration(s)",
                m.train_ids.len(),
                m.test_ids.len(),
                m.ratio,
                m.k_final,
                m.iterations
            );
            if a.verify {
                let r = verify_disjoint_lexicons(&m, &corpus)?;
                println!(
                    "verified {} phrases: {} violation(s), shared vocabulary {:.4}",
                    r.phrases_checked,
                    r.violations.len(),
                    r.shared_vocab_fraction
                );
                if !r.is_clean() {
                    bail!("lexicon split leaks {} phrase occurrence(s)", r.violations.len());
                }
            }
        }
        Command::Anonymize(a) => {
            let corpus = load_corpus(&a.corpus)?;
            let m = load_manifest(&a.manifest, &corpus)?;
            let (train_pos, _) = corpus.split_positions(&m)?;
            let train = corpus.subset(&train_pos)?;
            let k = a.k.unwrap_or(cfg.settings.anon_k);
            let keywords = identify_training_keywords(&train, k, &cfg.settings.features)?;
            let train_ids: std::collections::HashSet<&str> = m.train_ids.iter().map(String::as_str).collect();
            let all = a.all;
            let anon = anonymize_with_phrases(&corpus, &keywords.all_phrases(), seed, |d| {
                all || train_ids.contains(d.id.as_str())
            })?;
            let log = a.log.unwrap_or_else(|| a.out.with_extension("log.jsonl"));
            anon.write(&a.out, &log)?;
            println!(
                "replaced {} keyword occurrence(s); log at {}",
                anon.occurrences.len(),
                log.display()
            );
        }
        Command::Train(a) => {
            let corpus = load_corpus(&a.corpus)?;
            let m = load_manifest(&a.manifest, &corpus)?;
            let n = &mut cfg.settings.neural;
            n.epochs = a.epochs.unwrap_or(n.epochs);
            n.embedding_dim = a.embedding_dim.unwrap_or(n.embedding_dim);
            n.hidden_dim = a.hidden_dim.unwrap_or(n.hidden_dim);
            n.batch_size = a.batch_size.unwrap_or(n.batch_size);
            n.optimizer.learning_rate = a.learning_rate.unwrap_or(n.optimizer.learning_rate);
            n.adadrop_threshold = a.adadrop_threshold.unwrap_or(n.adadrop_threshold);
            n.validate()?;
            let artifact = fit_model(a.model, a.regularizer, &corpus, &m, &cfg.settings, seed)?;
            artifact.save(&a.out)?;
            if let (Some(path), TrainedModel::MlpMax { checkpoint }, Some(stats)) =
                (&a.stats, &artifact.trained, &artifact.grad_stats)
            {
                let n = &checkpoint.config;
                let schedule = dropout_probability(stats, n.adadrop_threshold, n.adadrop_p_max)?;
                write_stats_tsv(path, &checkpoint.vocab, stats, &schedule)?;
            } else if a.stats.is_some() {
                bail!("--stats needs --model mlpmax");
            }
            if let Some(path) = &a.epoch_log {
                if artifact.epochs.is_empty() {
                    bail!("--epoch-log needs --model mlpmax");
                }
                write_metrics(path, &artifact.epochs)?;
            }
            println!("trained {} ({}) to {}", a.model, a.regularizer, a.out.display());
        }
        Command::Eval(a) => {
            let artifact = ModelArtifact::load(&a.model)
                .with_context(|| format!("loading model {}", a.model.display()))?;
            let corpus = load_corpus(&a.corpus)?;
            let m = load_manifest(&a.manifest, &corpus)?;
            let mut metrics = evaluate(&artifact, &corpus, &m)?;
            for (role, p) in [("model", &a.model), ("corpus", &a.corpus), ("manifest", &a.manifest)] {
                metrics.paths.insert(role.into(), p.display().to_string());
            }
            metrics.write(&a.out)?;
            println!(
                "{} ({}) on {} split: accuracy {:.4} over {} documents",
                metrics.model, metrics.regularizer, metrics.split, metrics.accuracy, metrics.n_test
            );
        }
        Command::Report(a) => {
            let metrics: Vec<EvalMetrics> = a
                .metrics
                .iter()
                .map(|p| EvalMetrics::read(p).with_context(|| format!("loading metrics {}", p.display())))
                .collect::<Result<_>>()?;
            let mut report = ExperimentReport::from_metrics(&metrics);
            if let Some(path) = &a.stats {
                let rows = read_stats_tsv(path)?;
                let top: Vec<String> = rows
                    .iter()
                    .take(a.top)
                    .map(|(w, avg, p)| format!("{w} (A={avg:.3e}, p={p:.3})"))
                    .collect();
                report.notes.push(format!("most-dropped words: {}", top.join(", ")));
            }
            report.write_tsv(&a.out)?;
            print!("{}", report.to_tsv());
        }
        Command::Experiment(a) => {
            if let Some(v) = a.models {
                cfg.models = v;
            }
            if let Some(v) = a.regularizers {
                cfg.regularizers = v;
            }
            match (a.seeds, cli.seed) {
                (Some(v), _) => cfg.seeds = v,
                (None, Some(s)) => cfg.seeds = vec![s],
                (None, None) => {}
            }
            if let Some(e) = a.epochs {
                cfg.settings.neural.epochs = e;
            }
            info!("{} cells", cfg.cells().len());
            let out = match &a.corpus {
                Some(path) => run_gap_experiment(&load_corpus(path)?, &cfg, Some(&a.out_dir))?,
                None => run_synthetic_benchmark(&SynthConfig::default(), &cfg, Some(&a.out_dir))?,
            };
            print!("{}", out.report.to_tsv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
