//! End-to-end runs and the file formats passed between stages.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    emotion_summary, feature_merit, variance_analysis, EmotionSummary, MeritReport, VarianceParams,
    VarianceReport, EMOTION_CATEGORIES,
};
use crate::cohort::{CohortConfig, CohortResult, Rejected, UserDoc};
use crate::error::{Error, Result};
use crate::eval::{category_tsv, nested_cv, per_category_eval, summary_tsv, CVReport, CategoryOutcome, CvSettings};
use crate::ingest::{group_by_user, load_corpus, CorpusStats, GroupedCorpus, RecordFilter};
use crate::lexicon::{demo_summaries, parse_dic, parse_summaries, word_lists_to_dic, Lexicon, SummaryVariableDef, DEMO_EMPATH};
use crate::matrix::{FeatureMatrix, Label, TFIDF_PREFIX};
use crate::ml::{Hyperparams, ModelKind};
use crate::textproc::{fit_tfidf, TfidfModel, TfidfParams};
use crate::userfeat::{assemble, CategoryBlock, FeatureModels, FeaturePart};

/// Column subsets compared against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Liwc,
    Empath,
    Tfidf,
    User,
    All,
}

impl FeatureSet {
    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Liwc => "liwc",
            FeatureSet::Empath => "empath",
            FeatureSet::Tfidf => "tfidf",
            FeatureSet::User => "user",
            FeatureSet::All => "all",
        }
    }

    pub fn select(self, data: &FeatureMatrix) -> FeatureMatrix {
        match self {
            FeatureSet::All => data.clone(),
            FeatureSet::Tfidf => data.select_columns(|n| n.starts_with(TFIDF_PREFIX)),
            s => {
                let prefix = format!("{}:", s.name());
                data.select_columns(|n| n.starts_with(&prefix))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k_outer: usize,
    pub k_inner: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k_outer: 10,
            k_inner: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Rows written to the merit table.
    pub merit_top: usize,
    pub emotion_categories: Vec<String>,
    /// Monthly variance runs only when set.
    pub variance: Option<VarianceParams>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            merit_top: 25,
            emotion_categories: EMOTION_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            variance: None,
        }
    }
}

fn all_parts() -> Vec<FeaturePart> {
    vec![FeaturePart::CategoryProfile, FeaturePart::Tfidf, FeaturePart::Behavioral]
}

fn all_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_category_models() -> Vec<ModelKind> {
    vec![ModelKind::Rf]
}

/// Configuration of a full run. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// LIWC-format dictionary; the bundled demo dictionary when absent.
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    /// Summary-variable definitions (JSON).
    #[serde(default)]
    pub summaries: Option<PathBuf>,
    /// Empath-style word lists (`category: word, word`).
    #[serde(default)]
    pub empath: Option<PathBuf>,
    /// JSON object mapping topic category to subreddit list.
    #[serde(default)]
    pub category_map: Option<PathBuf>,
    #[serde(default)]
    pub cohort: CohortConfig,
    #[serde(default)]
    pub tfidf: TfidfParams,
    #[serde(default = "all_parts")]
    pub features: Vec<FeaturePart>,
    #[serde(default = "all_models")]
    pub models: Vec<ModelKind>,
    /// Per-model grid overrides.
    #[serde(default)]
    pub grids: BTreeMap<ModelKind, Vec<Hyperparams>>,
    #[serde(default)]
    pub cv: CvConfig,
    /// Extra feature-set comparison; empty skips it.
    #[serde(default)]
    pub feature_sets: Vec<FeatureSet>,
    /// Models run per topic category; empty skips it.
    #[serde(default = "default_category_models")]
    pub category_models: Vec<ModelKind>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn require_file(what: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", p.display())))
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("pipeline config: {e}")))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.input);
        fix(&mut cfg.output_dir);
        for p in [&mut cfg.lexicon, &mut cfg.summaries, &mut cfg.empath, &mut cfg.category_map]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    /// Checks referenced files and settings before any work happens.
    pub fn validate(&self) -> Result<()> {
        require_file("input", &self.input)?;
        for (what, p) in [
            ("lexicon", &self.lexicon),
            ("summaries", &self.summaries),
            ("empath word lists", &self.empath),
            ("category map", &self.category_map),
        ] {
            if let Some(p) = p {
                require_file(what, p)?;
            }
        }
        self.cohort.validate()?;
        if self.features.is_empty() {
            return Err(Error::Config("no feature parts selected".into()));
        }
        if self.cv.k_outer < 2 || self.cv.k_inner < 2 {
            return Err(Error::Config("cv folds must be at least 2".into()));
        }
        for (kind, grid) in &self.grids {
            if grid.is_empty() {
                return Err(Error::Config(format!("empty grid for {kind}")));
            }
            if let Some(g) = grid.iter().find(|g| g.kind() != *kind) {
                return Err(Error::Config(format!("grid for {kind} contains {}", g.label())));
            }
        }
        Ok(())
    }

    pub fn grid(&self, kind: ModelKind) -> Vec<Hyperparams> {
        self.grids.get(&kind).cloned().unwrap_or_else(|| kind.default_grid())
    }

    pub fn cv_settings(&self) -> CvSettings {
        CvSettings {
            k_outer: self.cv.k_outer,
            k_inner: self.cv.k_inner,
            seed: self.seed,
        }
    }

    pub fn cohort_config(&self) -> Result<CohortConfig> {
        let mut c = self.cohort.clone();
        if let Some(p) = &self.category_map {
            c.category_map = read_category_map(p)?;
        }
        Ok(c)
    }
}

pub fn read_category_map(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// The dictionaries feeding the category-profile columns.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub liwc: Lexicon,
    pub summaries: Vec<SummaryVariableDef>,
    pub empath: Option<Lexicon>,
}

impl Lexicons {
    pub fn demo() -> Self {
        Self {
            liwc: Lexicon::demo(),
            summaries: demo_summaries(),
            empath: Some(demo_empath()),
        }
    }

    /// Loads the given files; absent paths fall back to the bundled demo
    /// resources. Custom dictionaries get no summaries unless given.
    pub fn load(lexicon: Option<&Path>, summaries: Option<&Path>, empath: Option<&Path>) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let liwc = match lexicon {
            Some(p) => parse_dic(&read(p)?)?,
            None => Lexicon::demo(),
        };
        let summaries = match (summaries, lexicon) {
            (Some(p), _) => parse_summaries(&read(p)?)?,
            (None, None) => demo_summaries(),
            (None, Some(_)) => Vec::new(),
        };
        for s in &summaries {
            s.validate(&liwc)?;
        }
        let empath = match empath {
            Some(p) => parse_dic(&word_lists_to_dic(&read(p)?)?)?,
            None => demo_empath(),
        };
        Ok(Self {
            liwc,
            summaries,
            empath: Some(empath),
        })
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        Self::load(cfg.lexicon.as_deref(), cfg.summaries.as_deref(), cfg.empath.as_deref())
    }

    pub fn blocks(&self) -> Vec<CategoryBlock<'_>> {
        let mut b = vec![CategoryBlock {
            namespace: "liwc",
            lexicon: &self.liwc,
            summaries: &self.summaries,
            punctuation: true,
        }];
        if let Some(e) = &self.empath {
            b.push(CategoryBlock {
                namespace: "empath",
                lexicon: e,
                summaries: &[],
                punctuation: false,
            });
        }
        b
    }
}

pub fn demo_empath() -> Lexicon {
    parse_dic(&word_lists_to_dic(DEMO_EMPATH).expect("bundled word lists convert")).expect("bundled word lists parse")
}

// ---- file handoffs ----

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// One user per line, in author order.
pub fn write_users(path: &Path, users: &[UserDoc]) -> Result<()> {
    let mut w = create(path)?;
    for u in users {
        serde_json::to_writer(&mut w, u)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_users(path: &Path) -> Result<Vec<UserDoc>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let u: UserDoc = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(u);
    }
    Ok(out)
}

pub fn write_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = create(path)?;
    m.write_csv(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureMatrix::read_csv(BufReader::new(f))
}

// ---- stages ----

pub fn ingest_stage(input: &Path, filter: &RecordFilter) -> Result<(GroupedCorpus, CorpusStats)> {
    let (records, stats) = load_corpus(input, filter)?;
    Ok((group_by_user(records), stats))
}

/// Cohort sizes, membership and per-category counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_bipolar: usize,
    pub n_control: usize,
    pub bipolar_tokens: usize,
    pub control_tokens: usize,
    /// category -> [bipolar users, control users]
    pub categories: BTreeMap<String, [usize; 2]>,
    pub eligible_subreddits: BTreeSet<String>,
    pub rejected: BTreeMap<String, Rejected>,
    pub bipolar: Vec<String>,
    pub control: Vec<String>,
}

impl CohortSummary {
    pub fn new(result: &CohortResult, category_names: impl IntoIterator<Item = String>) -> Self {
        let mut categories: BTreeMap<String, [usize; 2]> = category_names.into_iter().map(|c| (c, [0, 0])).collect();
        for (i, group) in [&result.bipolar, &result.control].into_iter().enumerate() {
            for u in group {
                for c in &u.categories {
                    categories.entry(c.clone()).or_default()[i] += 1;
                }
            }
        }
        Self {
            n_bipolar: result.bipolar.len(),
            n_control: result.control.len(),
            bipolar_tokens: result.bipolar.iter().map(|u| u.token_count).sum(),
            control_tokens: result.control.iter().map(|u| u.token_count).sum(),
            categories,
            eligible_subreddits: result.eligible_subreddits.clone(),
            rejected: result.rejected.clone(),
            bipolar: result.bipolar.iter().map(|u| u.author.clone()).collect(),
            control: result.control.iter().map(|u| u.author.clone()).collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("category\tbipolar\tcontrol\n");
        out.push_str(&format!("all\t{}\t{}\n", self.n_bipolar, self.n_control));
        for (c, [b, n]) in &self.categories {
            out.push_str(&format!("{c}\t{b}\t{n}\n"));
        }
        out
    }
}

/// Both cohorts merged in author order.
pub fn cohort_users(result: CohortResult) -> Vec<UserDoc> {
    let mut users: Vec<UserDoc> = result.bipolar.into_iter().chain(result.control).collect();
    users.sort_by(|a, b| a.author.cmp(&b.author));
    users
}

/// Fits tf-idf (when requested) on all users and assembles the matrix.
pub fn features_stage(
    users: &[UserDoc],
    lexicons: &Lexicons,
    parts: &[FeaturePart],
    tfidf_params: TfidfParams,
) -> Result<(FeatureMatrix, Option<TfidfModel>)> {
    let tfidf = if parts.contains(&FeaturePart::Tfidf) {
        let docs: Vec<_> = users.iter().map(UserDoc::tokens).collect();
        Some(fit_tfidf(&docs, tfidf_params)?)
    } else {
        None
    };
    let models = FeatureModels {
        profiles: lexicons.blocks(),
        tfidf: tfidf.as_ref(),
    };
    let m = assemble(users, parts, &models)?;
    Ok((m, tfidf))
}

/// Category-profile columns only.
pub fn profile_stage(users: &[UserDoc], lexicons: &Lexicons) -> Result<FeatureMatrix> {
    features_stage(users, lexicons, &[FeaturePart::CategoryProfile], TfidfParams::default()).map(|(m, _)| m)
}

/// Rows of users active in each topic category.
pub fn category_matrices(
    data: &FeatureMatrix,
    users: &[UserDoc],
    categories: impl IntoIterator<Item = String>,
) -> Result<BTreeMap<String, FeatureMatrix>> {
    let by_author: BTreeMap<&str, &UserDoc> = users.iter().map(|u| (u.author.as_str(), u)).collect();
    let mut out = BTreeMap::new();
    for cat in categories {
        let mut rows = Vec::new();
        for (i, id) in data.user_ids.iter().enumerate() {
            let u = by_author
                .get(id.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("user {id} missing from users file")))?;
            if u.categories.contains(&cat) {
                rows.push(i);
            }
        }
        out.insert(cat, data.select_rows(&rows));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_users: usize,
    pub n_bipolar: usize,
    pub n_features: usize,
    pub reports: Vec<CVReport>,
}

pub fn evaluate_stage(data: &FeatureMatrix, models: &[ModelKind], grids: impl Fn(ModelKind) -> Vec<Hyperparams>, cv: &CvSettings) -> Result<EvaluationReport> {
    let reports = models
        .iter()
        .map(|&k| nested_cv(data, k, &grids(k), cv))
        .collect::<Result<_>>()?;
    Ok(EvaluationReport {
        n_users: data.len(),
        n_bipolar: data.labels.iter().filter(|&&l| l == 1).count(),
        n_features: data.width(),
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetRow {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub n_features: usize,
    pub mean_accuracy: Option<f64>,
    pub mean_f1: Option<f64>,
}

/// Nested CV of every model on every column subset. Empty subsets are
/// reported with no score.
pub fn feature_set_stage(
    data: &FeatureMatrix,
    models: &[ModelKind],
    sets: &[FeatureSet],
    grids: impl Fn(ModelKind) -> Vec<Hyperparams>,
    cv: &CvSettings,
) -> Result<Vec<FeatureSetRow>> {
    let mut rows = Vec::new();
    for &set in sets {
        let sub = set.select(data);
        for &model in models {
            let r = if sub.width() == 0 {
                None
            } else {
                Some(nested_cv(&sub, model, &grids(model), cv)?)
            };
            rows.push(FeatureSetRow {
                model,
                feature_set: set,
                n_features: sub.width(),
                mean_accuracy: r.as_ref().map(|r| r.mean_accuracy),
                mean_f1: r.as_ref().map(|r| r.mean_f1),
            });
        }
    }
    Ok(rows)
}

pub fn feature_set_tsv(rows: &[FeatureSetRow]) -> String {
    let sets: BTreeSet<FeatureSet> = rows.iter().map(|r| r.feature_set).collect();
    let mut models: Vec<ModelKind> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model);
        }
    }
    let mut out = String::from("model");
    for s in &sets {
        out.push('\t');
        out.push_str(s.name());
    }
    out.push('\n');
    for m in models {
        out.push_str(m.name());
        for s in &sets {
            let v = rows
                .iter()
                .find(|r| r.model == m && r.feature_set == *s)
                .and_then(|r| r.mean_accuracy);
            out.push('\t');
            out.push_str(&v.map_or("NA".to_string(), |v| format!("{v:.3}")));
        }
        out.push('\n');
    }
    out
}

pub type CategoryResults = BTreeMap<ModelKind, BTreeMap<String, CategoryOutcome>>;

pub fn category_stage(
    matrices: &BTreeMap<String, FeatureMatrix>,
    models: &[ModelKind],
    grids: impl Fn(ModelKind) -> Vec<Hyperparams>,
    cv: &CvSettings,
) -> Result<CategoryResults> {
    models
        .iter()
        .map(|&k| per_category_eval(matrices, k, &grids(k), cv).map(|r| (k, r)))
        .collect()
}

/// Per category, the outcome of the most accurate model.
pub fn best_per_category(results: &CategoryResults) -> BTreeMap<String, CategoryOutcome> {
    let mut best: BTreeMap<String, CategoryOutcome> = BTreeMap::new();
    for outcomes in results.values() {
        for (cat, o) in outcomes {
            let better = match (best.get(cat), o) {
                (None, _) => true,
                (Some(CategoryOutcome::Skipped { .. }), CategoryOutcome::Evaluated { .. }) => true,
                (Some(CategoryOutcome::Evaluated { report: a, .. }), CategoryOutcome::Evaluated { report: b, .. }) => {
                    b.mean_accuracy > a.mean_accuracy
                }
                _ => false,
            };
            if better {
                best.insert(cat.clone(), o.clone());
            }
        }
    }
    best
}

/// LIWC-namespace columns.
pub fn liwc_columns(data: &FeatureMatrix) -> Vec<String> {
    data.feature_names.iter().filter(|n| n.starts_with("liwc:")).cloned().collect()
}

pub fn merit_stage(data: &FeatureMatrix) -> Result<MeritReport> {
    let cols = liwc_columns(data);
    if cols.is_empty() {
        feature_merit(data, None)
    } else {
        feature_merit(data, Some(&cols))
    }
}

pub fn emotion_stage(data: &FeatureMatrix, categories: &[String]) -> Result<EmotionSummary> {
    emotion_summary(data, categories)
}

pub fn variance_stage(
    users: &[UserDoc],
    lexicon: &Lexicon,
    categories: &[String],
    params: &VarianceParams,
    seed: u64,
) -> Result<VarianceReport> {
    let (bip, ctl): (Vec<UserDoc>, Vec<UserDoc>) = users.iter().cloned().partition(|u| u.label == Label::Bipolar);
    variance_analysis(&bip, &ctl, lexicon, categories, params, seed)
}

/// Files written by [`run_pipeline`], relative to the output directory.
pub mod files {
    pub const INGEST_STATS: &str = "ingest_stats.json";
    pub const COHORT: &str = "cohort.json";
    pub const TABLE1: &str = "table1_cohort.tsv";
    pub const USERS: &str = "users.jsonl";
    pub const TFIDF: &str = "tfidf.json";
    pub const FEATURES: &str = "features.csv";
    pub const EVALUATION: &str = "evaluation.json";
    pub const TABLE2: &str = "table2_models.tsv";
    pub const FEATURE_SETS: &str = "feature_sets.json";
    pub const TABLE3: &str = "table3_feature_sets.tsv";
    pub const CATEGORIES: &str = "categories.json";
    pub const TABLE4: &str = "table4_categories.tsv";
    pub const MERIT: &str = "merit.json";
    pub const TABLE5: &str = "table5_merit.tsv";
    pub const EMOTION: &str = "emotion.json";
    pub const TABLE6: &str = "table6_emotion.tsv";
    pub const VARIANCE: &str = "variance.json";
    pub const TABLE7: &str = "table7_variance.tsv";
}

/// Runs every stage and writes the reports. Returns the written paths.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let lexicons = Lexicons::from_config(cfg).map_err(|e| e.in_stage("lexicon"))?;
    let cohort_cfg = cfg.cohort_config()?;
    let out = &cfg.output_dir;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let p = out.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };

    log::info!("ingest {}", cfg.input.display());
    let (corpus, stats) = ingest_stage(&cfg.input, &RecordFilter::all()).map_err(|e| e.in_stage("ingest"))?;
    emit(files::INGEST_STATS, &|p| write_json(p, &stats))?;

    log::info!("cohort over {} authors", corpus.len());
    let result = crate::cohort::build_cohorts(&corpus, &cohort_cfg).map_err(|e| e.in_stage("cohort"))?;
    drop(corpus);
    let summary = CohortSummary::new(&result, cohort_cfg.category_map.keys().cloned());
    emit(files::COHORT, &|p| write_json(p, &summary))?;
    emit(files::TABLE1, &|p| write_text(p, &summary.to_tsv()))?;
    let users = cohort_users(result);
    emit(files::USERS, &|p| write_users(p, &users))?;

    log::info!("features for {} users", users.len());
    let (data, tfidf) = features_stage(&users, &lexicons, &cfg.features, cfg.tfidf).map_err(|e| e.in_stage("features"))?;
    if let Some(t) = &tfidf {
        emit(files::TFIDF, &|p| write_json(p, t))?;
    }
    emit(files::FEATURES, &|p| write_matrix(p, &data))?;

    let cv = cfg.cv_settings();
    let grids = |k| cfg.grid(k);
    log::info!("evaluate {} models", cfg.models.len());
    let eval = evaluate_stage(&data, &cfg.models, grids, &cv).map_err(|e| e.in_stage("evaluate"))?;
    emit(files::EVALUATION, &|p| write_json(p, &eval))?;
    emit(files::TABLE2, &|p| write_text(p, &summary_tsv(&eval.reports)))?;

    if !cfg.feature_sets.is_empty() {
        let rows = feature_set_stage(&data, &cfg.models, &cfg.feature_sets, grids, &cv)
            .map_err(|e| e.in_stage("evaluate"))?;
        emit(files::FEATURE_SETS, &|p| write_json(p, &rows))?;
        emit(files::TABLE3, &|p| write_text(p, &feature_set_tsv(&rows)))?;
    }

    if !cfg.category_models.is_empty() {
        let mats = category_matrices(&data, &users, cohort_cfg.category_map.keys().cloned())?;
        let res = category_stage(&mats, &cfg.category_models, grids, &cv).map_err(|e| e.in_stage("evaluate"))?;
        emit(files::CATEGORIES, &|p| write_json(p, &res))?;
        emit(files::TABLE4, &|p| write_text(p, &category_tsv(&best_per_category(&res))))?;
    }

    log::info!("analyze");
    let merit = merit_stage(&data).map_err(|e| e.in_stage("analyze"))?;
    emit(files::MERIT, &|p| write_json(p, &merit))?;
    emit(files::TABLE5, &|p| write_text(p, &merit.to_tsv(Some(cfg.analysis.merit_top))))?;
    let emo = emotion_stage(&data, &cfg.analysis.emotion_categories).map_err(|e| e.in_stage("analyze"))?;
    emit(files::EMOTION, &|p| write_json(p, &emo))?;
    emit(files::TABLE6, &|p| write_text(p, &emo.to_tsv()))?;
    if let Some(params) = &cfg.analysis.variance {
        let v = variance_stage(&users, &lexicons.liwc, &cfg.analysis.emotion_categories, params, cfg.seed)
            .map_err(|e| e.in_stage("analyze"))?;
        emit(files::VARIANCE, &|p| write_json(p, &v))?;
        emit(files::TABLE7, &|p| write_text(p, &v.to_tsv()))?;
    }
    Ok(written)
}
