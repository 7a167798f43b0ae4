use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sentigraph::codec::{
    decode, read_json, read_treebank_graph, write_graph_file, write_json, write_treebank_graph, EncodeMode,
    GraphSentence,
};
use sentigraph::io::{read, treebank_name, write_atomic};
use sentigraph::metrics::evaluate;
use sentigraph::parser::{
    load_checkpoint, predict, read_embeddings, save_checkpoint, train, train_with_grid, EmbeddingProvider, EpochLog,
    Hyperparams, Model, ParserError, SelectionMetric, TrainOptions, EXTERNAL_LEARNING_RATE,
};
use sentigraph::treebank_ops::{
    load_lexicon, merge_treebanks, plan_experiment, stats, translate_word_level, MergeStrategy, Stats, TreebankSplits,
};
use sentigraph::{DepGraph, Treebank};

const SEED_ENV: &str = "SENTIGRAPH_SEED";

#[derive(Parser)]
#[command(
    name = "sentigraph",
    version,
    about = "Structured sentiment analysis as dependency graph parsing"
)]
struct Cli {
    /// TOML file with default values for any option; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suppress timestamps so repeated runs give identical output.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between opinion JSON and graph files.
    Convert(ConvertArgs),
    /// Train one parser per experiment plan entry.
    Train(TrainArgs),
    /// Parse sentences with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Translate a treebank word by word with a lexicon.
    Translate(TranslateArgs),
    /// Concatenate treebanks, prefixing sentence ids with treebank names.
    Merge(MergeArgs),
    /// Print sentence, holder, target and expression counts.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Graph,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    from: Format,
    #[arg(long, value_enum)]
    to: Format,
    /// Encoding used when writing graphs: head_final or head_first.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resolve label collisions by keeping the last opinion's label.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Comma-separated training files.
    #[arg(long, value_delimiter = ',', required = true)]
    train: Vec<PathBuf>,
    /// Comma-separated development files, paired with training files by
    /// treebank name.
    #[arg(long, value_delimiter = ',')]
    dev: Vec<PathBuf>,
    /// Merge strategy: 1, 2 or 3.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    /// Learning rates tried in order until a run converges.
    #[arg(long, value_delimiter = ',')]
    lr_grid: Vec<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Precomputed token vectors replacing the trainable embedding table.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Dev score used for model selection: labeled_edge_f1 or
    /// sentiment_graph_f1.
    #[arg(long)]
    selection: Option<String>,
    /// Checkpoint path. With several models the model name is inserted
    /// before the extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    from: Option<Format>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_graph: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Count a tuple as matched only when polarities agree.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    require_polarity: Option<bool>,
    /// Compare edge labels as well as edges.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    labeled: Option<bool>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Look words up in lower case.
    #[arg(long)]
    case_fold: bool,
    /// Where to write the coverage report; standard error by default.
    #[arg(long)]
    coverage: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long = "in", value_delimiter = ',', required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in", value_delimiter = ',', required = true)]
    input: Vec<PathBuf>,
}

/// Options that may come from the configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    mode: Option<String>,
    strategy: Option<String>,
    selection: Option<String>,
    require_polarity: Option<bool>,
    labeled: Option<bool>,
    force: Option<bool>,
    case_fold: Option<bool>,
    lexicon: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    lr_grid: Option<Vec<f64>>,
    embedding_dim: Option<usize>,
    recurrent_hidden_dim: Option<usize>,
    recurrent_layers: Option<usize>,
    projection_dim_edge: Option<usize>,
    projection_dim_label: Option<usize>,
    dropout_rate: Option<f64>,
    learning_rate: Option<f64>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    batch_size: Option<usize>,
    edge_threshold: Option<f64>,
}

enum Failure {
    Usage(String),
    Data(String),
    NotConverged(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Usage(_) => 2,
            Failure::NotConverged(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::NotConverged(m) => m,
        }
    }
}

fn data<E: Display>(context: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Data(format!("{}: {}", context, e))
}

fn parser_failure(context: impl Display, e: ParserError) -> Failure {
    match e {
        ParserError::NonConverged { .. } => Failure::NotConverged(format!("{}: {}", context, e)),
        _ => Failure::Data(format!("{}: {} [{}]", context, e, e.code())),
    }
}

fn parse_option<T: FromStr>(what: &str, value: &str) -> Result<T, Failure>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Failure::Usage(format!("invalid {} {:?}: {}", what, value, e)))
}

fn check_exists(paths: &[&Path]) -> Result<(), Failure> {
    for p in paths {
        if !p.is_file() {
            return Err(Failure::Usage(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

fn guess_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Graph,
    }
}

fn load_treebank(path: &Path, format: Format) -> Result<Treebank, Failure> {
    let bytes = read(path).map_err(data(path.display()))?;
    let name = treebank_name(path);
    match format {
        Format::Json => {
            read_json(&bytes, &name).map_err(|e| Failure::Data(format!("{}: {} [{}]", path.display(), e, e.code())))
        }
        Format::Graph => {
            let text = String::from_utf8(bytes).map_err(data(path.display()))?;
            let (tb, dangling) = read_treebank_graph(&text, &name)
                .map_err(|e| Failure::Data(format!("{}: {} [{}]", path.display(), e, e.code())))?;
            if dangling > 0 {
                log::warn!("{}: dropped {} dangling edges", path.display(), dangling);
            }
            Ok(tb)
        }
    }
}

fn graph_file(tb: &Treebank, mode: EncodeMode, force: bool) -> Result<Vec<u8>, Failure> {
    write_treebank_graph(tb, mode, force)
        .map(String::into_bytes)
        .map_err(|e| Failure::Data(format!("{} [{}]", e, e.code())))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(path, bytes).map_err(data(path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).map_err(data("stdout"))
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {}", path.display(), e)))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {}", path.display(), e)))
}

fn seed(flag: Option<u64>, config: &Config) -> Result<u64, Failure> {
    if let Some(s) = flag.or(config.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => parse_option(SEED_ENV, v.trim()),
        Err(_) => Ok(1),
    }
}

fn mode(flag: Option<&str>, config: &Config) -> Result<EncodeMode, Failure> {
    match flag.or(config.mode.as_deref()) {
        Some(m) => parse_option("mode", m),
        None => Ok(EncodeMode::default()),
    }
}

fn run_convert(args: &ConvertArgs, config: &Config) -> Result<(), Failure> {
    check_exists(&[&args.input])?;
    let mode = mode(args.mode.as_deref(), config)?;
    let force = args.force || config.force.unwrap_or(false);
    let tb = load_treebank(&args.input, args.from)?;
    let bytes = match args.to {
        Format::Json => write_json(&tb),
        Format::Graph => graph_file(&tb, mode, force)?,
    };
    write_output(args.out.as_deref(), &bytes)
}

fn hyperparams(args: &TrainArgs, config: &Config, external: bool) -> Result<Hyperparams, Failure> {
    let mut hp = Hyperparams::default();
    if external {
        hp.learning_rate = EXTERNAL_LEARNING_RATE;
    }
    macro_rules! take {
        ($($field:ident),*) => {$(if let Some(v) = config.$field { hp.$field = v; })*};
    }
    take!(
        embedding_dim,
        recurrent_hidden_dim,
        recurrent_layers,
        projection_dim_edge,
        projection_dim_label,
        dropout_rate,
        learning_rate,
        max_epochs,
        patience,
        batch_size,
        edge_threshold
    );
    if let Some(lr) = args.lr {
        hp.learning_rate = lr;
    }
    if let Some(e) = args.epochs {
        hp.max_epochs = e;
    }
    if let Some(p) = args.patience {
        hp.patience = p;
    }
    if let Some(b) = args.batch_size {
        hp.batch_size = b;
    }
    hp.seed = seed(args.seed, config)?;
    hp.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(hp)
}

fn load_provider(path: Option<&Path>) -> Result<EmbeddingProvider, Failure> {
    match path {
        None => Ok(EmbeddingProvider::Trainable),
        Some(p) => {
            check_exists(&[p])?;
            let bytes = read(p).map_err(data(p.display()))?;
            let file = read_embeddings(&bytes).map_err(|e| parser_failure(p.display(), e))?;
            Ok(EmbeddingProvider::Precomputed(file))
        }
    }
}

/// `model.sgph` with model name `x` becomes `model.x.sgph`.
fn model_path(out: &Path, name: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let file = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{}.{}.{}", stem, name, ext),
        None => format!("{}.{}", stem, name),
    };
    out.with_file_name(file)
}

fn log_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".log.jsonl");
    model.with_file_name(name)
}

fn log_lines(log: &[EpochLog]) -> Vec<u8> {
    let mut out = String::new();
    for entry in log {
        out.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
        out.push('\n');
    }
    out.into_bytes()
}

fn run_train(args: &TrainArgs, config: &Config, deterministic: bool) -> Result<(), Failure> {
    let mut paths: Vec<&Path> = args.train.iter().map(PathBuf::as_path).collect();
    paths.extend(args.dev.iter().map(PathBuf::as_path));
    check_exists(&paths)?;
    let strategy: MergeStrategy = match args.strategy.as_deref().or(config.strategy.as_deref()) {
        Some(s) => parse_option("strategy", s)?,
        None => MergeStrategy::Single,
    };
    let selection: SelectionMetric = match args.selection.as_deref().or(config.selection.as_deref()) {
        Some(s) => parse_option("selection metric", s)?,
        None => SelectionMetric::default(),
    };
    let provider = load_provider(args.embeddings.as_deref().or(config.embeddings.as_deref()))?;
    let hp = hyperparams(args, config, provider.is_external())?;
    let grid = if args.lr_grid.is_empty() {
        config.lr_grid.clone().unwrap_or_default()
    } else {
        args.lr_grid.clone()
    };

    let mut splits: Vec<TreebankSplits> = Vec::new();
    for path in &args.train {
        let tb = load_treebank(path, guess_format(path))?;
        if splits.iter().any(|s| s.name == tb.name) {
            return Err(Failure::Usage(format!("two training files named {:?}", tb.name)));
        }
        splits.push(TreebankSplits {
            name: tb.name.clone(),
            train: Some(tb),
            dev: None,
        });
    }
    for path in &args.dev {
        let tb = load_treebank(path, guess_format(path))?;
        let slot = splits
            .iter_mut()
            .find(|s| s.name == tb.name)
            .ok_or_else(|| Failure::Usage(format!("{}: no training file named {:?}", path.display(), tb.name)))?;
        if slot.dev.is_some() {
            return Err(Failure::Usage(format!("two development files named {:?}", tb.name)));
        }
        slot.dev = Some(tb);
    }
    let plan = plan_experiment(&splits, strategy).map_err(|e| Failure::Data(format!("{} [{}]", e, e.code())))?;

    let opts = TrainOptions {
        selection,
        deterministic,
    };
    let mut trained: Vec<(PathBuf, Model, Vec<EpochLog>)> = Vec::new();
    for entry in &plan {
        let out = if plan.len() == 1 {
            args.out.clone()
        } else {
            model_path(&args.out, &entry.model_name)
        };
        log::info!(
            "training {} on {} sentences, selecting on {}",
            entry.model_name,
            entry.train.len(),
            entry.dev.len()
        );
        let result = if grid.is_empty() {
            train(&entry.train, &entry.dev, &hp, &provider, opts)
        } else {
            train_with_grid(&entry.train, &entry.dev, &hp, &provider, opts, &grid).map(|(o, lr)| {
                log::info!("{} converged with learning rate {}", entry.model_name, lr);
                o
            })
        };
        let outcome = result.map_err(|e| parser_failure(&entry.model_name, e))?;
        eprintln!(
            "{}: best dev F1 {:.4} at epoch {}",
            entry.model_name, outcome.best_f1, outcome.best_epoch
        );
        trained.push((out, outcome.model, outcome.log));
    }
    for (path, model, log) in trained {
        write_atomic(&path, &save_checkpoint(&model)).map_err(data(path.display()))?;
        let lp = log_path(&path);
        write_atomic(&lp, &log_lines(&log)).map_err(data(lp.display()))?;
    }
    Ok(())
}

fn run_predict(args: &PredictArgs, config: &Config) -> Result<(), Failure> {
    check_exists(&[&args.model, &args.input])?;
    let bytes = read(&args.model).map_err(data(args.model.display()))?;
    let model = load_checkpoint(&bytes).map_err(|e| parser_failure(args.model.display(), e))?;
    let provider = load_provider(args.embeddings.as_deref().or(config.embeddings.as_deref()))?;
    let mut tb = load_treebank(&args.input, args.from.unwrap_or_else(|| guess_format(&args.input)))?;

    let graphs: Vec<DepGraph> =
        predict(&model, &tb.sentences, &provider).map_err(|e| parser_failure(args.input.display(), e))?;
    let mut dangling = 0;
    for (s, g) in tb.sentences.iter_mut().zip(&graphs) {
        let (opinions, warnings) = decode(g, s).map_err(data(&s.sent_id))?;
        dangling += warnings.dangling_count();
        s.opinions = opinions;
    }
    if dangling > 0 {
        log::warn!("dropped {} dangling predicted edges", dangling);
    }

    let json = write_json(&tb);
    if let Some(path) = &args.out_graph {
        let sentences: Vec<GraphSentence> = tb
            .sentences
            .iter()
            .zip(graphs)
            .map(|(s, g)| GraphSentence::from_sentence(s, g))
            .collect();
        write_atomic(path, write_graph_file(&sentences).as_bytes()).map_err(data(path.display()))?;
    }
    match &args.out_json {
        Some(path) => write_atomic(path, &json).map_err(data(path.display())),
        None if args.out_graph.is_none() => write_output(None, &json),
        None => Ok(()),
    }
}

fn run_evaluate(args: &EvaluateArgs, config: &Config) -> Result<(), Failure> {
    check_exists(&[&args.pred, &args.gold])?;
    let pred = load_treebank(&args.pred, guess_format(&args.pred))?;
    let gold = load_treebank(&args.gold, guess_format(&args.gold))?;
    let require_polarity = args.require_polarity.or(config.require_polarity).unwrap_or(true);
    let labeled = args.labeled.or(config.labeled).unwrap_or(true);
    let mode = mode(args.mode.as_deref(), config)?;
    let report = evaluate(&pred, &gold, require_polarity, labeled, mode)
        .map_err(|e| Failure::Data(format!("{} [{}]", e, e.code())))?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_output(args.out.as_deref(), text.as_bytes())
}

fn run_translate(args: &TranslateArgs, config: &Config) -> Result<(), Failure> {
    let lexicon_path = args
        .lexicon
        .as_deref()
        .or(config.lexicon.as_deref())
        .ok_or_else(|| Failure::Usage("--lexicon is required".to_string()))?;
    check_exists(&[lexicon_path, &args.input])?;
    let case_fold = args.case_fold || config.case_fold.unwrap_or(false);
    let lex_bytes = read(lexicon_path).map_err(data(lexicon_path.display()))?;
    let lex = load_lexicon(&lex_bytes, case_fold)
        .map_err(|e| Failure::Data(format!("{}: {} [{}]", lexicon_path.display(), e, e.code())))?;
    if lex.duplicate_warnings > 0 {
        log::warn!(
            "{}: {} duplicate entries overridden",
            lexicon_path.display(),
            lex.duplicate_warnings
        );
    }
    let tb = load_treebank(&args.input, guess_format(&args.input))?;
    let (translated, coverage) =
        translate_word_level(&tb, &lex).map_err(|e| Failure::Data(format!("{} [{}]", e, e.code())))?;
    let bytes = match guess_format(&args.out) {
        Format::Json => write_json(&translated),
        Format::Graph => graph_file(&translated, EncodeMode::default(), true)?,
    };
    let mut report = serde_json::to_string(&coverage).expect("coverage serializes");
    report.push('\n');
    write_atomic(&args.out, &bytes).map_err(data(args.out.display()))?;
    match &args.coverage {
        Some(path) => write_atomic(path, report.as_bytes()).map_err(data(path.display())),
        None => {
            eprint!("{}", report);
            Ok(())
        }
    }
}

fn run_merge(args: &MergeArgs) -> Result<(), Failure> {
    let paths: Vec<&Path> = args.input.iter().map(PathBuf::as_path).collect();
    check_exists(&paths)?;
    let parts = args
        .input
        .iter()
        .map(|p| load_treebank(p, guess_format(p)))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge_treebanks(&parts).map_err(|e| Failure::Data(format!("{} [{}]", e, e.code())))?;
    let bytes = match guess_format(&args.out) {
        Format::Json => write_json(&merged),
        Format::Graph => graph_file(&merged, EncodeMode::default(), true)?,
    };
    write_atomic(&args.out, &bytes).map_err(data(args.out.display()))
}

fn run_stats(args: &StatsArgs) -> Result<(), Failure> {
    let paths: Vec<&Path> = args.input.iter().map(PathBuf::as_path).collect();
    check_exists(&paths)?;
    let mut out = String::new();
    let mut total = Stats::default();
    for path in &args.input {
        let tb = load_treebank(path, guess_format(path))?;
        let st = stats(&tb);
        total = total + st;
        out.push_str(&stats_line(&tb.name, st));
    }
    if args.input.len() > 1 {
        out.push_str(&stats_line("total", total));
    }
    write_output(None, out.as_bytes())
}

#[derive(Serialize)]
struct StatsLine<'a> {
    name: &'a str,
    #[serde(flatten)]
    stats: Stats,
}

fn stats_line(name: &str, stats: Stats) -> String {
    format!(
        "{}\n",
        serde_json::to_string(&StatsLine { name, stats }).expect("stats serialize")
    )
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Convert(a) => run_convert(a, &config),
        Command::Train(a) => run_train(a, &config, cli.deterministic),
        Command::Predict(a) => run_predict(a, &config),
        Command::Evaluate(a) => run_evaluate(a, &config),
        Command::Translate(a) => run_translate(a, &config),
        Command::Merge(a) => run_merge(a),
        Command::Stats(a) => run_stats(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let mut logger = env_logger::Builder::new();
    logger.filter_level(level).parse_default_env();
    if cli.deterministic {
        logger.format_timestamp(None);
    }
    logger.init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
