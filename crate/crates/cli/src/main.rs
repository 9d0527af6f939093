//! `bpsignal` command-line entry point.
//!
//! Every stage of `run` is also available as its own subcommand; files
//! written by one are read by the next.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bpsignal::analysis::VarianceParams;
use bpsignal::cohort::{build_cohorts, CohortConfig};
use bpsignal::eval::{category_tsv, summary_tsv, CvSettings};
use bpsignal::ingest::{read_grouped, read_name_list, write_grouped, RecordFilter};
use bpsignal::lexicon::{parse_dic, Lexicon};
use bpsignal::ml::{Hyperparams, ModelKind, SavedModel};
use bpsignal::pipeline::{
    best_per_category, category_matrices, category_stage, cohort_users, create, emotion_stage, evaluate_stage,
    feature_set_stage, feature_set_tsv, features_stage, ingest_stage, merit_stage, profile_stage, read_category_map,
    read_json, read_matrix, read_users, run_pipeline, variance_stage, write_json, write_matrix, write_text,
    write_users, CohortSummary, FeatureSet, Lexicons, PipelineConfig,
};
use bpsignal::synth::{generate_corpus, SynthSpec};
use bpsignal::textproc::{TfidfModel, TfidfParams};
use bpsignal::userfeat::{assemble, FeatureModels, FeaturePart};
use bpsignal::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "bpsignal", version, about = "Bipolar self-report cohort and classifier pipeline")]
struct Cli {
    /// Worker threads; 1 gives the same output as any other count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dump into one JSON line per author.
    Ingest(IngestArgs),
    /// Detect self-reporters, prune and sample controls.
    Cohort(CohortArgs),
    /// Dictionary category profiles as a feature CSV.
    Profile(ProfileArgs),
    /// Full feature matrix (profiles, tf-idf, behavioral).
    Features(FeaturesArgs),
    /// Fit one model on a feature CSV.
    Train(TrainArgs),
    /// Apply a trained model to a feature CSV.
    Predict(PredictArgs),
    /// Nested cross-validation with baselines.
    Evaluate(EvaluateArgs),
    /// Group comparisons.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Every stage from a JSON config.
    Run(RunArgs),
}

#[derive(Args)]
struct LexiconArgs {
    /// LIWC-format .dic file (bundled demo dictionary when absent).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Summary-variable definitions (JSON).
    #[arg(long)]
    summaries: Option<PathBuf>,
    /// Empath-style word lists.
    #[arg(long)]
    empath: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Keep only these subreddits (one per line).
    #[arg(long)]
    subreddits: Option<PathBuf>,
    /// Grouped JSONL output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the stats JSON here.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct CohortArgs {
    /// Grouped JSONL from `ingest`.
    #[arg(long)]
    input: PathBuf,
    /// CohortConfig JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Topic category map JSON, replacing the one in the config.
    #[arg(long)]
    category_map: Option<PathBuf>,
    #[arg(long)]
    out_bipolar: Option<PathBuf>,
    #[arg(long)]
    out_control: Option<PathBuf>,
    /// Both cohorts merged in author order.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cohort summary (.tsv for the table form, JSON otherwise).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    lexicons: LexiconArgs,
    #[arg(long)]
    users: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    lexicons: LexiconArgs,
    #[arg(long)]
    users: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated: category_profile, tfidf, behavioral.
    #[arg(long, value_delimiter = ',', value_parser = parse_part,
          default_value = "category_profile,tfidf,behavioral")]
    parts: Vec<FeaturePart>,
    /// Reuse a fitted tf-idf model instead of fitting one.
    #[arg(long, conflicts_with = "tfidf_out")]
    tfidf_model: Option<PathBuf>,
    /// Save the fitted tf-idf model.
    #[arg(long)]
    tfidf_out: Option<PathBuf>,
    #[arg(long)]
    min_df: Option<usize>,
    /// 0 keeps the whole vocabulary.
    #[arg(long)]
    max_features: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: ModelKind,
    /// Hyperparameters JSON; the first default grid point when absent.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    features: PathBuf,
    /// Model JSON from `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of user_id, predicted label, score.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    features: PathBuf,
    /// Comma-separated model kinds.
    #[arg(long, value_delimiter = ',', required = true)]
    model: Vec<ModelKind>,
    /// Grid JSON: an array of hyperparameter objects, or an object keyed by
    /// model. Default grids fill the gaps.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    k_outer: usize,
    #[arg(long, default_value_t = 5)]
    k_inner: usize,
    #[arg(long)]
    out: PathBuf,
    /// Summary table (TSV).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Compare these column subsets instead of the whole matrix.
    #[arg(long, value_delimiter = ',', value_parser = parse_set, conflicts_with = "per_category")]
    feature_sets: Vec<FeatureSet>,
    /// Evaluate within each topic category (needs --users).
    #[arg(long, requires = "users")]
    per_category: bool,
    #[arg(long)]
    users: Option<PathBuf>,
    /// CohortConfig JSON naming the categories.
    #[arg(long)]
    cohort_config: Option<PathBuf>,
    #[arg(long)]
    category_map: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Welch t-test per feature, ranked by p.
    Merit {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rows in the TSV form.
        #[arg(long, default_value_t = 25)]
        top: usize,
    },
    /// Group means of the emotion categories.
    Emotion {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_delimiter = ',')]
        categories: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Month-to-month variability per category.
    Variance(VarianceArgs),
}

#[derive(Args)]
struct VarianceArgs {
    #[arg(long)]
    users: PathBuf,
    /// LIWC-format .dic file (bundled demo dictionary when absent).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    categories: Vec<String>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n_sample: Option<usize>,
    #[arg(long)]
    min_user_tokens: Option<usize>,
    #[arg(long)]
    min_month_tokens: Option<usize>,
    #[arg(long)]
    min_months: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Spec JSON, or one of the bundled specs: planted, null, oscillator, mini.
    #[arg(long)]
    spec: String,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dictionary the vocabulary is drawn from.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_part(s: &str) -> std::result::Result<FeaturePart, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| format!("unknown feature part {s:?} (category_profile, tfidf, behavioral)"))
}

fn parse_set(s: &str) -> std::result::Result<FeatureSet, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| format!("unknown feature set {s:?} (liwc, empath, tfidf, user, all)"))
}

fn need(what: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", p.display())))
    }
}

fn need_opt(what: &str, p: Option<&Path>) -> Result<()> {
    p.map_or(Ok(()), |p| need(what, p))
}

fn read_config_json<T: for<'de> serde::Deserialize<'de>>(what: &str, p: &Path) -> Result<T> {
    need(what, p)?;
    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{what} {}: {e}", p.display())))
}

fn is_tsv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

/// Writes the TSV form for `.tsv` paths, JSON otherwise.
fn write_report<T: serde::Serialize>(path: &Path, value: &T, tsv: impl FnOnce() -> String) -> Result<()> {
    if is_tsv(path) {
        write_text(path, &tsv())
    } else {
        write_json(path, value)
    }
}

impl LexiconArgs {
    fn load(&self) -> Result<Lexicons> {
        need_opt("lexicon", self.lexicon.as_deref())?;
        need_opt("summaries", self.summaries.as_deref())?;
        need_opt("empath word lists", self.empath.as_deref())?;
        Lexicons::load(self.lexicon.as_deref(), self.summaries.as_deref(), self.empath.as_deref())
    }
}

fn load_liwc(p: Option<&Path>) -> Result<Lexicon> {
    match p {
        Some(p) => {
            need("lexicon", p)?;
            parse_dic(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)
        }
        None => Ok(Lexicon::demo()),
    }
}

fn cohort_config(config: Option<&Path>, category_map: Option<&Path>) -> Result<CohortConfig> {
    let mut cfg: CohortConfig = match config {
        Some(p) => read_config_json("cohort config", p)?,
        None => CohortConfig::default(),
    };
    if let Some(p) = category_map {
        need("category map", p)?;
        cfg.category_map = read_category_map(p)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ingest(a: &IngestArgs) -> Result<()> {
    need("input", &a.input)?;
    let filter = match &a.subreddits {
        Some(p) => {
            need("subreddit list", p)?;
            RecordFilter::all().subreddits(read_name_list(p)?)
        }
        None => RecordFilter::all(),
    };
    let (corpus, stats) = ingest_stage(&a.input, &filter)?;
    match &a.out {
        Some(p) => write_grouped(create(p)?, &corpus).map_err(|e| Error::io(p, e))?,
        None => write_grouped(std::io::stdout().lock(), &corpus).map_err(|e| Error::io("<stdout>", e))?,
    }
    if let Some(p) = &a.stats {
        write_json(p, &stats)?;
    }
    eprintln!("{}", serde_json::to_string(&stats)?);
    Ok(())
}

fn cohort(a: &CohortArgs) -> Result<()> {
    need("input", &a.input)?;
    if a.out.is_none() && a.out_bipolar.is_none() && a.out_control.is_none() {
        return Err(Error::Config("give --out or --out-bipolar/--out-control".into()));
    }
    let cfg = cohort_config(a.config.as_deref(), a.category_map.as_deref())?;
    let f = std::fs::File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let corpus = read_grouped(f)?;
    let result = build_cohorts(&corpus, &cfg)?;
    log::info!("{} bipolar, {} control", result.bipolar.len(), result.control.len());
    if let Some(p) = &a.summary {
        let s = CohortSummary::new(&result, cfg.category_map.keys().cloned());
        write_report(p, &s, || s.to_tsv())?;
    }
    if let Some(p) = &a.out_bipolar {
        write_users(p, &result.bipolar)?;
    }
    if let Some(p) = &a.out_control {
        write_users(p, &result.control)?;
    }
    if let Some(p) = &a.out {
        write_users(p, &cohort_users(result))?;
    }
    Ok(())
}

fn read_users_checked(p: &Path) -> Result<Vec<bpsignal::cohort::UserDoc>> {
    need("users", p)?;
    read_users(p)
}

fn read_matrix_checked(p: &Path) -> Result<bpsignal::matrix::FeatureMatrix> {
    need("features", p)?;
    read_matrix(p)
}

fn profile(a: &ProfileArgs) -> Result<()> {
    let lexicons = a.lexicons.load()?;
    let users = read_users_checked(&a.users)?;
    write_matrix(&a.out, &profile_stage(&users, &lexicons)?)
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let lexicons = a.lexicons.load()?;
    let users = read_users_checked(&a.users)?;
    let mut params = TfidfParams::default();
    if let Some(m) = a.min_df {
        params.min_df = m;
    }
    if let Some(m) = a.max_features {
        params.max_features = (m > 0).then_some(m);
    }
    let data = match &a.tfidf_model {
        Some(p) => {
            let model: TfidfModel = read_config_json("tf-idf model", p)?;
            let models = FeatureModels {
                profiles: lexicons.blocks(),
                tfidf: Some(&model),
            };
            assemble(&users, &a.parts, &models)?
        }
        None => {
            let (data, tfidf) = features_stage(&users, &lexicons, &a.parts, params)?;
            match (&a.tfidf_out, tfidf) {
                (Some(p), Some(t)) => write_json(p, &t)?,
                (Some(_), None) => log::warn!("tf-idf not among the parts; no model written"),
                _ => {}
            }
            data
        }
    };
    log::info!("{} users x {} features", data.len(), data.width());
    write_matrix(&a.out, &data)
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = read_matrix_checked(&a.features)?;
    let hp = match &a.params {
        Some(p) => {
            let hp: Hyperparams = read_config_json("params", p)?;
            if hp.kind() != a.model {
                return Err(Error::Config(format!("params describe {}, not {}", hp.kind(), a.model)));
            }
            hp
        }
        None => a.model.default_grid()[0],
    };
    let m = SavedModel::train(&data, hp, a.seed)?;
    write_json(&a.out, &m)
}

fn predict(a: &PredictArgs) -> Result<()> {
    let data = read_matrix_checked(&a.features)?;
    need("model", &a.model)?;
    let m: SavedModel = read_json(&a.model)?;
    let pred = m.predict(&data)?;
    let scores = m.model.scores(&data)?;
    let mut out = String::from("user_id,predicted,score\n");
    for ((id, p), s) in data.user_ids.iter().zip(&pred).zip(&scores) {
        out.push_str(&format!("{id},{p},{}\n", bpsignal::matrix::format_value(*s)));
    }
    let acc = bpsignal::ml::metrics(&data.labels, &pred)?;
    log::info!("accuracy {:.4}, f1 {:.4}", acc.accuracy, acc.f1);
    write_text(&a.out, &out)
}

/// Grid file: a list of hyperparameter points or an object keyed by model.
fn read_grids(p: &Path) -> Result<BTreeMap<ModelKind, Vec<Hyperparams>>> {
    let v: serde_json::Value = read_config_json("grid", p)?;
    let bad = |e: serde_json::Error| Error::Config(format!("grid {}: {e}", p.display()));
    if v.is_array() {
        let points: Vec<Hyperparams> = serde_json::from_value(v).map_err(bad)?;
        let mut out: BTreeMap<ModelKind, Vec<Hyperparams>> = BTreeMap::new();
        for hp in points {
            out.entry(hp.kind()).or_default().push(hp);
        }
        Ok(out)
    } else {
        let out: BTreeMap<ModelKind, Vec<Hyperparams>> = serde_json::from_value(v).map_err(bad)?;
        for (k, g) in &out {
            if g.is_empty() || g.iter().any(|h| h.kind() != *k) {
                return Err(Error::Config(format!("grid for {k} is empty or mixes models")));
            }
        }
        Ok(out)
    }
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let data = read_matrix_checked(&a.features)?;
    let grids = match &a.grid {
        Some(p) => read_grids(p)?,
        None => BTreeMap::new(),
    };
    let grid = |k: ModelKind| grids.get(&k).cloned().unwrap_or_else(|| k.default_grid());
    let cv = CvSettings {
        k_outer: a.k_outer,
        k_inner: a.k_inner,
        seed: a.seed,
    };
    if a.k_outer < 2 || a.k_inner < 2 {
        return Err(Error::Config("cv folds must be at least 2".into()));
    }
    if a.per_category {
        let users = read_users_checked(a.users.as_deref().expect("clap requires users"))?;
        let cfg = cohort_config(a.cohort_config.as_deref(), a.category_map.as_deref())?;
        let mats = category_matrices(&data, &users, cfg.category_map.keys().cloned())?;
        let res = category_stage(&mats, &a.model, grid, &cv)?;
        write_json(&a.out, &res)?;
        if let Some(p) = &a.table {
            write_text(p, &category_tsv(&best_per_category(&res)))?;
        }
    } else if !a.feature_sets.is_empty() {
        let rows = feature_set_stage(&data, &a.model, &a.feature_sets, grid, &cv)?;
        write_json(&a.out, &rows)?;
        if let Some(p) = &a.table {
            write_text(p, &feature_set_tsv(&rows))?;
        }
    } else {
        let report = evaluate_stage(&data, &a.model, grid, &cv)?;
        for r in &report.reports {
            log::info!("{}: accuracy {:.4} +- {:.4}", r.model_kind, r.mean_accuracy, r.std_accuracy);
        }
        write_json(&a.out, &report)?;
        if let Some(p) = &a.table {
            write_text(p, &summary_tsv(&report.reports))?;
        }
    }
    Ok(())
}

fn emotion_categories(given: &[String]) -> Vec<String> {
    if given.is_empty() {
        bpsignal::analysis::EMOTION_CATEGORIES.iter().map(|s| s.to_string()).collect()
    } else {
        given.to_vec()
    }
}

fn analyze(what: &AnalyzeCommand) -> Result<()> {
    match what {
        AnalyzeCommand::Merit { features, out, top } => {
            let m = merit_stage(&read_matrix_checked(features)?)?;
            write_report(out, &m, || m.to_tsv(Some(*top)))
        }
        AnalyzeCommand::Emotion { features, categories, out } => {
            let e = emotion_stage(&read_matrix_checked(features)?, &emotion_categories(categories))?;
            write_report(out, &e, || e.to_tsv())
        }
        AnalyzeCommand::Variance(a) => {
            let lexicon = load_liwc(a.lexicon.as_deref())?;
            let users = read_users_checked(&a.users)?;
            let mut params = VarianceParams::default();
            for (slot, v) in [
                (&mut params.n_sample, a.n_sample),
                (&mut params.min_user_tokens, a.min_user_tokens),
                (&mut params.min_month_tokens, a.min_month_tokens),
                (&mut params.min_months, a.min_months),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            let v = variance_stage(&users, &lexicon, &emotion_categories(&a.categories), &params, a.seed)?;
            write_report(&a.out, &v, || v.to_tsv())
        }
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match a.spec.as_str() {
        "planted" => SynthSpec::planted(),
        "null" => SynthSpec::null(),
        "oscillator" => SynthSpec::oscillator(),
        "mini" => SynthSpec::mini(),
        path => {
            let p = Path::new(path);
            need("synth spec", p)?;
            SynthSpec::from_json(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?
        }
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let lexicon = load_liwc(a.lexicon.as_deref())?;
    // words the cohort rules react to never appear in generated text
    let defaults = CohortConfig::default();
    let banned: BTreeSet<String> = defaults
        .mention_words
        .iter()
        .chain(&defaults.flair_keywords)
        .map(|w| w.to_lowercase())
        .collect();
    let corpus = generate_corpus(&spec, &lexicon, &banned)?;
    for p in [&a.out, &a.truth] {
        if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
    }
    corpus.write(&a.out, &a.truth)?;
    log::info!("{} records for {} users", corpus.records.len(), corpus.truth.labels.len());
    Ok(())
}

fn run(a: &RunArgs) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    let written = run_pipeline(&cfg)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let (name, r) = match &cli.command {
        Command::Ingest(a) => ("ingest", ingest(a)),
        Command::Cohort(a) => ("cohort", cohort(a)),
        Command::Profile(a) => ("profile", profile(a)),
        Command::Features(a) => ("features", features(a)),
        Command::Train(a) => ("train", train(a)),
        Command::Predict(a) => ("predict", predict(a)),
        Command::Evaluate(a) => ("evaluate", evaluate(a)),
        Command::Analyze { what } => ("analyze", analyze(what)),
        Command::Synth(a) => ("synth", synth(a)),
        // run_pipeline names its own stages
        Command::Run(a) => return run(a),
    };
    r.map_err(|e| e.in_stage(name))
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Internal => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("BPSIGNAL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(4);
        }
    }
    match std::panic::catch_unwind(|| dispatch(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(4)
        }
    }
}
