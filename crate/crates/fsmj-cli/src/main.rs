//! Command-line front end: ingest raw text into sparse corpora, train the
//! multinomial naive Bayes model, rank features (greedy max-JS or one of the
//! six baselines), and evaluate accuracy-versus-feature-count curves.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fsmj_core::baselines::{self, GlobalFn, Metric};
use fsmj_core::corpus;
use fsmj_core::divergence::{JsConfig, ReferenceKind};
use fsmj_core::eval::{self, CompareConfig, EvalOptions};
use fsmj_core::fsmj;
use fsmj_core::mnb;

#[derive(Parser)]
#[command(name = "fsmj", version, about = "Feature selection toolkit for text categorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sparse corpus from a directory-per-class tree of .txt files
    Ingest(IngestArgs),
    /// Estimate multinomial naive Bayes parameters from a corpus
    Train(TrainArgs),
    /// Rank features by greedy max-JS (from a model) or a baseline metric (from a corpus)
    Rank(RankArgs),
    /// Evaluate a ranking: accuracy over a grid of feature counts
    Eval(EvalArgs),
    /// Run fsmj plus all six baselines under all three global functions
    Compare(CompareArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Root directory: one subdirectory per class, one .txt file per document
    #[arg(long)]
    input: PathBuf,
    /// Drop terms appearing in fewer than this many documents
    #[arg(long, default_value_t = 3)]
    min_df: usize,
    /// Optional stopword file (one word per line)
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Vectorize against an existing vocabulary instead of building one
    /// (min-df is skipped; unseen terms are dropped)
    #[arg(long)]
    use_vocab: Option<PathBuf>,
    /// Output corpus file
    #[arg(long)]
    out: PathBuf,
    /// Output vocabulary file
    #[arg(long)]
    vocab_out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus file
    #[arg(long)]
    corpus: PathBuf,
    /// Vocabulary file (default: <corpus>.vocab if present)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Additive smoothing parameter
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Output model file
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GlobalMode {
    Sum,
    Max,
    Avg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Reference {
    Mixture,
    Complement,
}

#[derive(Args)]
struct RankArgs {
    /// fsmj or one of df|ig|chi|rs|cet|ngl
    #[arg(long)]
    method: String,
    /// Model file (required for --method fsmj)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Corpus file (required for baseline methods)
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Vocabulary file for the term column (default: <corpus>.vocab if present)
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// How many features to rank (default: all)
    #[arg(long)]
    top: Option<usize>,
    /// Global function for baseline methods
    #[arg(long, value_enum, default_value_t = GlobalMode::Max)]
    global: GlobalMode,
    /// Weights for --global avg, comma separated (default: class priors)
    #[arg(long)]
    weights: Option<String>,
    /// Contingency smoothing for baseline methods
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// JS reference distribution for fsmj
    #[arg(long, value_enum, default_value_t = Reference::Mixture)]
    reference: Reference,
    /// Weight each class's KL by its prior (classical JS) for fsmj
    #[arg(long)]
    weighted_js: bool,
    /// Output ranking file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Training corpus file
    #[arg(long)]
    train: PathBuf,
    /// Test corpus file
    #[arg(long)]
    test: PathBuf,
    /// Vocabulary for the train corpus (default: <train>.vocab if present)
    #[arg(long)]
    train_vocab: Option<PathBuf>,
    /// Vocabulary for the test corpus (default: <test>.vocab if present)
    #[arg(long)]
    test_vocab: Option<PathBuf>,
    /// Ranking file
    #[arg(long)]
    ranking: PathBuf,
    /// CSV method label (default: ranking file stem)
    #[arg(long)]
    method_label: Option<String>,
    /// CSV global_fn label
    #[arg(long, default_value = "none")]
    global_label: String,
    /// Comma-separated feature counts (default: log grid clipped to the ranking)
    #[arg(long)]
    ks: Option<String>,
    /// Additive smoothing parameter
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Also report macro-averaged F1 (adds a CSV column)
    #[arg(long)]
    macro_f1: bool,
    /// Output CSV file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    train_vocab: Option<PathBuf>,
    #[arg(long)]
    test_vocab: Option<PathBuf>,
    /// Comma-separated feature counts (default: log grid clipped to M)
    #[arg(long)]
    ks: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long)]
    macro_f1: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest(args) => ingest(args),
        Command::Train(args) => train(args),
        Command::Rank(args) => rank(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Compare(args) => compare_cmd(args),
    }
}

/// Writes one line to stdout; exits quietly if the downstream pipe closed
/// (e.g. `fsmj compare ... | head`).
fn say(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout();
    if writeln!(out, "{line}").is_err() {
        std::process::exit(0);
    }
}

macro_rules! say {
    ($($arg:tt)*) => { say(format_args!($($arg)*)) };
}

/// `<corpus>.vocab` when it exists and no explicit path was given.
fn vocab_or_default(explicit: Option<PathBuf>, corpus_path: &Path) -> Option<PathBuf> {
    explicit.or_else(|| {
        let mut os = corpus_path.as_os_str().to_owned();
        os.push(".vocab");
        let candidate = PathBuf::from(os);
        candidate.exists().then_some(candidate)
    })
}

fn load_corpus(
    path: &Path,
    vocab: Option<PathBuf>,
) -> Result<fsmj_core::LabeledCorpus> {
    let vocab = vocab_or_default(vocab, path);
    corpus::load_sparse(path, vocab.as_deref())
        .with_context(|| format!("loading corpus {}", path.display()))
}

fn parse_ks(spec: &str) -> Result<Vec<usize>> {
    let mut ks = spec
        .split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad k value {t:?}")))
        .collect::<Result<Vec<usize>>>()?;
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        bail!("ks must be positive integers");
    }
    Ok(ks)
}

fn ingest(args: IngestArgs) -> Result<()> {
    let documents = corpus::read_class_dirs(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    if documents.is_empty() {
        bail!("no documents found under {}", args.input.display());
    }
    let built = if let Some(vocab_path) = &args.use_vocab {
        let text = std::fs::read_to_string(vocab_path)
            .with_context(|| format!("reading vocabulary {}", vocab_path.display()))?;
        let terms: Vec<String> = text.lines().map(str::to_string).collect();
        let n = terms.len();
        let vocab = fsmj_core::Vocabulary::new(terms, vec![0; n])?;
        corpus::vectorize_with_vocab(&documents, &vocab)?
    } else {
        let stopwords = match &args.stopwords {
            Some(p) => Some(
                corpus::read_stopwords(p)
                    .with_context(|| format!("reading stopwords {}", p.display()))?,
            ),
            None => None,
        };
        corpus::build_corpus_filtered(&documents, args.min_df, stopwords.as_ref())?
    };
    corpus::save_sparse(&built, &args.out, &args.vocab_out)?;
    say!(
        "ingested {} docs, {} classes, {} terms -> {}",
        built.n_docs(),
        built.n_classes(),
        built.n_features(),
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus, args.vocab)?;
    let model = mnb::estimate_params(&corpus, args.alpha)?;
    mnb::save_model(&model, &args.model_out)?;
    say!(
        "trained {} classes x {} features (alpha {}) -> {}",
        model.n_classes(),
        model.n_features(),
        args.alpha,
        args.model_out.display()
    );
    Ok(())
}

fn rank(args: RankArgs) -> Result<()> {
    if args.method == "fsmj" {
        let model_path = args
            .model
            .as_deref()
            .context("--method fsmj requires --model")?;
        let model = mnb::load_model(model_path)
            .with_context(|| format!("loading model {}", model_path.display()))?;
        let top = args.top.unwrap_or_else(|| model.n_features());
        let config = JsConfig {
            reference: match args.reference {
                Reference::Mixture => ReferenceKind::Mixture,
                Reference::Complement => ReferenceKind::Complement,
            },
            weighted: args.weighted_js,
        };
        let ranking = fsmj::rank_with(&model, top, config, fsmj::Strategy::Incremental)?;
        let vocab = load_vocab_for_terms(args.vocab.as_deref())?;
        fsmj::save_ranking(&ranking, vocab.as_ref(), &args.out)?;
        say!("ranked top {} of {} features -> {}", top, model.n_features(), args.out.display());
        return Ok(());
    }

    let metric: Metric = args
        .method
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))
        .context("--method must be fsmj or df|ig|chi|rs|cet|ngl")?;
    let corpus_path = args
        .corpus
        .as_deref()
        .context("baseline methods require --corpus")?;
    let vocab = vocab_or_default(args.vocab, corpus_path);
    let corpus = corpus::load_sparse(corpus_path, vocab.as_deref())
        .with_context(|| format!("loading corpus {}", corpus_path.display()))?;
    let top = args.top.unwrap_or_else(|| corpus.n_features());

    let global = match args.global {
        GlobalMode::Sum => GlobalFn::Sum,
        GlobalMode::Max => GlobalFn::Max,
        GlobalMode::Avg => {
            let weights = match &args.weights {
                Some(spec) => spec
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad weight {t:?}")))
                    .collect::<Result<Vec<f64>>>()?,
                None => {
                    let d = corpus.n_docs() as f64;
                    corpus.class_doc_counts().iter().map(|&c| c as f64 / d).collect()
                }
            };
            GlobalFn::WeightedAvg(weights)
        }
    };
    let ranking = baselines::rank_by_metric(&corpus, metric, &global, args.epsilon, top)?;
    fsmj::save_ranking(&ranking, Some(corpus.vocabulary()), &args.out)?;
    say!(
        "ranked top {} of {} features by {}/{} -> {}",
        top,
        corpus.n_features(),
        metric,
        global.as_str(),
        args.out.display()
    );
    Ok(())
}

fn load_vocab_for_terms(path: Option<&Path>) -> Result<Option<fsmj_core::Vocabulary>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading vocabulary {}", p.display()))?;
            let terms: Vec<String> = text.lines().map(str::to_string).collect();
            let n = terms.len();
            Ok(Some(fsmj_core::Vocabulary::new(terms, vec![0; n])?))
        }
    }
}

fn print_grid_means(points: &[eval::CurvePoint]) {
    for (method, global_fn, mean) in eval::grid_means(points) {
        say!("grid_mean\t{method}\t{global_fn}\t{mean:.6}");
    }
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let train = load_corpus(&args.train, args.train_vocab)?;
    let test = load_corpus(&args.test, args.test_vocab)?;
    let method_label = args.method_label.clone().unwrap_or_else(|| {
        args.ranking
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "ranking".to_string())
    });
    let ranking = fsmj::load_ranking(&args.ranking, method_label.clone())?;
    let ks = match &args.ks {
        Some(spec) => parse_ks(spec)?,
        None => eval::default_k_grid(ranking.len()),
    };
    let options = EvalOptions {
        method: Some(method_label),
        global_fn: Some(args.global_label.clone()),
        macro_f1: args.macro_f1,
    };
    let points = eval::evaluate_with(&train, &test, &ranking, &ks, args.alpha, &options)?;
    if args.macro_f1 {
        eval::emit_csv_with_macro_f1(&points, &args.out)?;
    } else {
        eval::emit_csv(&points, &args.out)?;
    }
    print_grid_means(&points);
    say!("wrote {} curve points -> {}", points.len(), args.out.display());
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let train = load_corpus(&args.train, args.train_vocab)?;
    let test = load_corpus(&args.test, args.test_vocab)?;
    let ks = match &args.ks {
        Some(spec) => Some(parse_ks(spec)?),
        None => None,
    };
    let config = CompareConfig { ks, alpha: args.alpha, epsilon: args.epsilon, macro_f1: args.macro_f1 };
    let points = eval::compare(&train, &test, &config)?;
    if args.macro_f1 {
        eval::emit_csv_with_macro_f1(&points, &args.out)?;
    } else {
        eval::emit_csv(&points, &args.out)?;
    }
    print_grid_means(&points);
    say!("wrote {} curve points -> {}", points.len(), args.out.display());
    Ok(())
}
