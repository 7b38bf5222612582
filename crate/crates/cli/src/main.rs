use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use revclass::analytics::{
    classify_batch, group_ratios, prioritize, ratios_chart, read_predictions, reviewer_report, reviewers_chart,
    write_priority_csv, write_ratios_csv, write_reviewer_csv, AnalyticsError, BatchItem, BatchOptions, GroupPriority,
};
use revclass::attributes::{FileRevisionPair, PythonGrammar};
use revclass::baseline::{baseline_features, train_and_evaluate_baseline, AttributeSet, BaselineConfig};
use revclass::classifier::{self, Classifier, EncoderSet, ModelConfig, TrainedModel};
use revclass::corpus::dataset::{clear_feature_cache, write_attributes_csv, write_feature_cache, AttributeRow};
use revclass::corpus::mining::{mine, ChangeQuery, GerritClient, MineOptions, RetryPolicy};
use revclass::corpus::store::{read_jsonl, write_jsonl, InlinePairRecord};
use revclass::corpus::{
    build_samples, import_dataset, load_samples, sample_comments, DatasetDir, Group, LabeledSample, LoadOptions,
    ReviewComment,
};
use revclass::evaluation::{cross_validate, run_ablations, write_summary_csv, CvOptions, EvalReport, SplitMode};

#[derive(Parser)]
#[command(name = "revclass", version, about = "Classify code review comments into feedback groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download merged and abandoned changes with their inline comments.
    Mine(MineArgs),
    /// Import a published labeled dataset into a dataset directory.
    ImportDataset(ImportArgs),
    /// Draw a seeded random sample of comments for labeling.
    Sample(SampleArgs),
    /// Compute code contexts and attributes for every labeled comment.
    Extract(ExtractArgs),
    /// Train one model on the whole dataset.
    Train(TrainArgs),
    /// Classify unlabeled comments into a predictions CSV.
    Classify(ClassifyArgs),
    /// Cross-validate the classifier, optionally over the ablation grid.
    Evaluate(EvaluateArgs),
    /// Cross-validate the random-forest baseline on the same folds.
    Baseline(BaselineArgs),
    /// Reports over a predictions CSV.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    endpoint: String,
    #[arg(long)]
    since: chrono::NaiveDate,
    #[arg(long)]
    until: chrono::NaiveDate,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    project: Option<String>,
    #[arg(long, default_value_t = 100)]
    page_size: usize,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// File extensions whose revisions are downloaded; pass an empty value
    /// to skip file download.
    #[arg(long, value_delimiter = ',', default_value = ".py")]
    extensions: Vec<String>,
    #[arg(long, default_value_t = 100)]
    min_interval_ms: u64,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    comments: PathBuf,
    /// Inline file pairs (comment_id, file_path, source, destination).
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Dataset directory to sample from.
    #[arg(long, conflicts_with = "comments")]
    dataset: Option<PathBuf>,
    /// Comments JSONL to sample from.
    #[arg(long)]
    comments: Option<PathBuf>,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Ignore cached features and recompute them.
    #[arg(long)]
    no_cache: bool,
    /// Extensions of source-related files.
    #[arg(long, value_delimiter = ',', default_value = ".py")]
    extensions: Vec<String>,
}

impl DatasetArgs {
    fn load(&self) -> Result<Vec<LabeledSample>> {
        let dir = DatasetDir::open(&self.dataset);
        let opts = LoadOptions { grammar: &PythonGrammar, extensions: self.extensions.clone(), use_cache: !self.no_cache };
        let samples = load_samples(&dir, &opts).with_context(|| format!("loading {}", self.dataset.display()))?;
        info!("{} source-related labeled samples", samples.len());
        if samples.is_empty() {
            bail!("no labeled source-related samples in {}", self.dataset.display());
        }
        Ok(samples)
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, default_value = "attributes.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArg {
    /// key = value model configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<ModelConfig> {
        Ok(match &self.config {
            Some(p) => ModelConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ModelConfig::default(),
        })
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Review comments, one JSON object per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Dataset directory whose stored file pairs resolve the comments.
    #[arg(long, conflicts_with = "pairs")]
    dataset: Option<PathBuf>,
    /// Inline file pairs JSONL resolving the comments.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    chunk_size: usize,
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
    /// Plain random folds instead of stratified ones.
    #[arg(long)]
    unstratified: bool,
    /// Folds evaluated concurrently; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl CvArgs {
    fn options(&self) -> CvOptions {
        CvOptions {
            k: self.folds,
            seed: self.split_seed,
            mode: if self.unstratified { SplitMode::Unstratified } else { SplitMode::Stratified },
            jobs: self.jobs,
        }
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    cv: CvArgs,
    /// Report JSON, or a directory when `--ablations` is set.
    #[arg(long)]
    out: PathBuf,
    /// Table-style CSV next to the JSON report.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run every channel/encoder combination on shared folds.
    #[arg(long)]
    ablations: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    cv: CvArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    n_trees: usize,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// fregnan_replication or table2_27.
    #[arg(long, default_value = "fregnan_replication")]
    attribute_set: String,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Per-reviewer group counts.
    Reviewers(ReviewersArgs),
    /// Predicted comments ordered by urgency.
    Prioritize(PrioritizeArgs),
    /// Share of each predicted group.
    Ratios(RatiosArgs),
}

#[derive(Args)]
struct ReviewersArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comments JSONL giving each comment's author.
    #[arg(long, conflicts_with = "dataset")]
    comments: Option<PathBuf>,
    /// Dataset directory giving each comment's author.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    no_chart: bool,
    /// Reviewers shown in the chart.
    #[arg(long, default_value_t = 20)]
    chart_limit: usize,
}

#[derive(Args)]
struct PrioritizeArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated group order, most urgent first.
    #[arg(long, default_value = "Functional,Refactoring,Documentation,Discussion,FalsePositive")]
    priority: String,
}

#[derive(Args)]
struct RatiosArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_chart: bool,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mine(a) => cmd_mine(a),
        Command::ImportDataset(a) => cmd_import(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Train(a) => cmd_train(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Report(ReportCommand::Reviewers(a)) => cmd_reviewers(a),
        Command::Report(ReportCommand::Prioritize(a)) => cmd_prioritize(a),
        Command::Report(ReportCommand::Ratios(a)) => cmd_ratios(a),
    }
}

fn cmd_mine(a: MineArgs) -> Result<()> {
    let query = ChangeQuery { since: a.since, until: a.until, page_size: a.page_size, project: a.project };
    let dir = DatasetDir::create(&a.out)?;
    let client = GerritClient::new(&a.endpoint, RetryPolicy::default(), Duration::from_millis(a.min_interval_ms));
    let extensions = a.extensions.into_iter().filter(|e| !e.is_empty()).collect();
    let summary = mine(&client, &query, &dir, &MineOptions { workers: a.workers, file_extensions: extensions })?;
    println!(
        "{} changes, {} comments, {} file pairs ({} changes and {} comments skipped)",
        summary.changes, summary.comments, summary.pairs, summary.skipped_changes, summary.skipped_comments
    );
    Ok(())
}

fn cmd_import(a: ImportArgs) -> Result<()> {
    let s = import_dataset(&a.labels, &a.comments, a.pairs.as_deref(), &a.out)?;
    println!("{} comments, {} labeled, {} file pairs", s.comments, s.labeled, s.pairs);
    for g in Group::ALL {
        println!("  {:<14} {:>5}  {:>6.2}%", g.to_string(), s.group_counts.get(&g).copied().unwrap_or(0), s.percentage(g));
    }
    if let Some(k) = s.kappa {
        println!("annotator agreement (Cohen's kappa): {k:.3}");
    }
    if s.labels_without_comment + s.invalid_comments > 0 {
        println!("{} labels without a comment, {} invalid comments", s.labels_without_comment, s.invalid_comments);
    }
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let corpus: Vec<ReviewComment> = match (&a.dataset, &a.comments) {
        (Some(d), None) => DatasetDir::open(d).read_comments()?,
        (None, Some(c)) => read_jsonl(c)?,
        _ => bail!("pass exactly one of --dataset or --comments"),
    };
    let sample = sample_comments(&corpus, a.n, a.seed)?;
    match &a.out {
        Some(p) => write_jsonl(p, &sample)?,
        None => {
            let mut out = io::stdout().lock();
            for c in &sample {
                serde_json::to_writer(&mut out, c)?;
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let dir = DatasetDir::open(&a.data.dataset);
    clear_feature_cache(&dir)?;
    let opts = LoadOptions { grammar: &PythonGrammar, extensions: a.data.extensions.clone(), use_cache: false };
    let samples = build_samples(&dir, &opts)?;
    write_feature_cache(&dir, &samples)?;
    let rows: Vec<AttributeRow> = samples.iter().map(AttributeRow::from_sample).collect();
    write_attributes_csv(&a.out, &rows)?;
    let failed = samples.iter().filter(|s| s.metadata.parse_failed).count();
    let missing = samples.iter().filter(|s| s.metadata.context_unavailable).count();
    println!("{} comments: {failed} parse failures, {missing} without code context", samples.len());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let samples = a.data.load()?;
    let encoders = EncoderSet::from_config(&cfg)?;
    let model = classifier::train(&samples, &cfg, &encoders)?;
    if let Some(best) = model.history.best() {
        println!("best epoch {}: val_loss {:.4}, val_accuracy {:.3}", best.epoch, best.val_loss, best.val_accuracy);
    }
    model.save(&a.out)?;
    Ok(())
}

fn read_pair_map(a: &ClassifyArgs) -> Result<HashMap<String, FileRevisionPair>> {
    Ok(match (&a.dataset, &a.pairs) {
        (Some(d), _) => DatasetDir::open(d).read_pairs()?,
        (None, Some(p)) => read_jsonl::<InlinePairRecord>(p)?
            .into_iter()
            .map(|r| (r.comment_id, FileRevisionPair::new(r.file_path, r.source, r.destination)))
            .collect(),
        (None, None) => HashMap::new(),
    })
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let encoders = EncoderSet::from_config(&model.config)?;
    let clf = Classifier::new(model, encoders)?;
    let pairs = read_pair_map(&a)?;
    let reader = BufReader::new(File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?);
    let items = reader.lines().enumerate().filter_map(|(n, line)| {
        let line = match line {
            Ok(l) if l.trim().is_empty() => return None,
            Ok(l) => l,
            Err(e) => return Some(Err(AnalyticsError::Io(e))),
        };
        Some(
            serde_json::from_str::<ReviewComment>(&line)
                .map_err(|e| AnalyticsError::Format(format!("{}:{}: {e}", a.input.display(), n + 1)))
                .map(|comment| {
                    let pair = pairs.get(&comment.comment_id).cloned();
                    BatchItem { comment, pair }
                }),
        )
    });
    let out = BufWriter::new(File::create(&a.out)?);
    let opts = BatchOptions { chunk_size: a.chunk_size, jobs: a.jobs };
    let summary = classify_batch(&clf, items, &PythonGrammar, out, &opts)?;
    println!("{} rows written, {} with errors", summary.rows, summary.errors);
    Ok(())
}

fn print_report(r: &EvalReport) {
    use revclass::evaluation::Aggregation;
    println!(
        "{:<28} accuracy pooled {:.3}, fold mean {:.3}",
        r.name,
        r.accuracy(Aggregation::Pooled),
        r.accuracy(Aggregation::FoldMean)
    );
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let samples = a.data.load()?;
    let encoders = EncoderSet::from_config(&cfg)?;
    let opts = a.cv.options();
    if a.ablations {
        fs::create_dir_all(&a.out)?;
        let reports = run_ablations(&samples, &cfg, &encoders, &opts)?;
        for r in &reports {
            r.write_json(&a.out.join(format!("{}.json", r.name)))?;
            r.write_csv(&a.out.join(format!("{}.csv", r.name)))?;
            print_report(r);
        }
        write_summary_csv(&a.out.join("summary.csv"), &reports)?;
    } else {
        let report = cross_validate("model", &samples, &cfg, &encoders, &opts)?;
        report.write_json(&a.out)?;
        if let Some(csv) = &a.csv {
            report.write_csv(csv)?;
        }
        print_report(&report);
    }
    Ok(())
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let Some(attribute_set) = AttributeSet::parse(&a.attribute_set) else {
        bail!("unknown attribute set {:?}", a.attribute_set);
    };
    let cfg = BaselineConfig { n_trees: a.n_trees, max_depth: a.max_depth, seed: a.seed, attribute_set };
    let samples = a.data.load()?;
    let pairs = match attribute_set {
        AttributeSet::FregnanReplication => DatasetDir::open(&a.data.dataset).read_pairs()?,
        AttributeSet::Table2_27 => HashMap::new(),
    };
    let features = baseline_features(&samples, &pairs, attribute_set, &PythonGrammar);
    let report = train_and_evaluate_baseline(&samples, &features, &cfg, &a.cv.options())?;
    report.write_json(&a.out)?;
    if let Some(csv) = &a.csv {
        report.write_csv(csv)?;
    }
    print_report(&report);
    Ok(())
}

fn authors(comments: Option<&Path>, dataset: Option<&Path>) -> Result<HashMap<String, String>> {
    let list: Vec<ReviewComment> = match (comments, dataset) {
        (Some(c), None) => read_jsonl(c)?,
        (None, Some(d)) => DatasetDir::open(d).read_comments()?,
        _ => bail!("pass exactly one of --comments or --dataset"),
    };
    Ok(list.into_iter().map(|c| (c.comment_id, c.author_id)).collect())
}

fn read_predictions_file(path: &Path) -> Result<Vec<revclass::analytics::PredictionRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_predictions(BufReader::new(file))?)
}

fn cmd_reviewers(a: ReviewersArgs) -> Result<()> {
    let rows = read_predictions_file(&a.predictions)?;
    let stats = reviewer_report(&rows, &authors(a.comments.as_deref(), a.dataset.as_deref())?);
    fs::create_dir_all(&a.out)?;
    write_reviewer_csv(BufWriter::new(File::create(a.out.join("reviewers.csv"))?), &stats)?;
    if !a.no_chart {
        reviewers_chart(&a.out.join("reviewers.svg"), &stats, a.chart_limit)?;
    }
    println!("{} reviewers", stats.len());
    Ok(())
}

fn cmd_prioritize(a: PrioritizeArgs) -> Result<()> {
    let priority: GroupPriority = a.priority.parse()?;
    let ranking = prioritize(&read_predictions_file(&a.predictions)?, &priority);
    write_priority_csv(BufWriter::new(File::create(&a.out)?), &ranking)?;
    println!("{} comments ranked", ranking.len());
    Ok(())
}

fn cmd_ratios(a: RatiosArgs) -> Result<()> {
    let ratios = group_ratios(&read_predictions_file(&a.predictions)?);
    fs::create_dir_all(&a.out)?;
    write_ratios_csv(BufWriter::new(File::create(a.out.join("ratios.csv"))?), &ratios)?;
    if !a.no_chart {
        ratios_chart(&a.out.join("ratios.svg"), &ratios)?;
    }
    for r in &ratios {
        println!("  {:<14} {:>5}  {:>6.2}%", r.group.to_string(), r.count, r.percentage);
    }
    Ok(())
}
