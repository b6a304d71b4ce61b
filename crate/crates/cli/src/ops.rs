//! The work behind each subcommand and job kind. Every operation is a pure
//! function of its parameters, the ontology and the library, and returns
//! named output files; the CLI writes them to `--out`, the server to a job
//! directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use schemakit::inference::{infer_corpus, infer_document_exhaustive, InferenceConfig, MatchResult};
use schemakit::ingest::{
    build_transactions, event_multiset, load_corpus, read_transactions, write_corpus_lines,
    write_transactions, DocumentGraph, EventMultiset, Transaction,
};
use schemakit::intrusion::{
    generate_tasks, read_answer_key, read_responses, score_responses, write_answer_key,
    write_review, write_task_export, write_tasks, CorpusEvidence, IntrusionConfig, Method,
};
use schemakit::metrics::{
    coverage, evaluate_document_ranking, evaluate_schema_ranking, parse_strata, read_gold_labels,
    render_coverage_table, render_ranking_table,
};
use schemakit::mining::{mine_frequent, read_itemsets, write_itemsets, MiningConfig};
use schemakit::ontology::{load_ontology, Ontology};
use schemakit::schema::{
    read_skeletons, schema_from_skeleton, validate_schema, write_skeletons, Schema, Severity,
};
use schemakit::skeleton::{
    build_skeletons, default_scorer, render_curation_queue, BuilderConfig, PairScorer, TableScorer,
};
use schemakit::synth::{synthesize, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::config::{CoverageSettings, Settings};

/// Named output files plus a short human summary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outputs {
    /// Paths relative to the output directory, in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    /// Writes every file under `dir`, creating directories as needed.
    pub fn write_to(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn read_ontology(path: &Path) -> anyhow::Result<Ontology> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading ontology {}", path.display()))?;
    load_ontology(&bytes).with_context(|| format!("loading ontology {}", path.display()))
}

pub fn read_library(dir: &Path) -> anyhow::Result<Vec<Schema>> {
    schemakit::schema::load_library(dir)
        .with_context(|| format!("loading library {}", dir.display()))
}

fn read_corpus(path: &Path) -> anyhow::Result<Vec<DocumentGraph>> {
    let docs = load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))?;
    if docs.is_empty() {
        bail!("corpus {} has no documents", path.display());
    }
    Ok(docs)
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn json_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|t| serde_json::to_string(&t).expect("serializable output") + "\n")
        .collect()
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable output");
    v.push(b'\n');
    v
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MineParams {
    /// A transactions file, or a document corpus (directory or JSON lines)
    /// to build them from. Exactly one is given.
    #[serde(default)]
    pub transactions: Option<PathBuf>,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    /// Minimum support as a fraction of transactions, in (0, 1]; replaces
    /// `mining.min_support` when set.
    #[serde(default)]
    pub min_support_fraction: Option<f64>,
    pub mining: MiningConfig,
}

/// Smallest count reaching `fraction` of `n` transactions, at least 1.
pub fn support_from_fraction(fraction: f64, n: usize) -> anyhow::Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        bail!("support fraction {fraction} outside (0, 1]");
    }
    Ok(((fraction * n as f64).ceil() as usize).max(1))
}

/// Frequent itemsets; the transactions too when built from a corpus.
impl MineParams {
    pub fn check(&self) -> anyhow::Result<()> {
        if self.transactions.is_some() == self.corpus.is_some() {
            bail!("give exactly one of a transactions file or a corpus");
        }
        Ok(())
    }
}

pub fn mine(p: &MineParams) -> anyhow::Result<Outputs> {
    p.check()?;
    let mut out = Outputs::default();
    let (transactions, origin) = match (&p.transactions, &p.corpus) {
        (Some(path), None) => (read_transactions(&read_text(path)?)?, String::new()),
        (None, Some(path)) => {
            let docs = read_corpus(path)?;
            let t: Vec<Transaction> = docs.iter().flat_map(build_transactions).collect();
            out.add("transactions.tsv", write_transactions(&t));
            (t, format!("{} documents, ", docs.len()))
        }
        _ => bail!("give exactly one of a transactions file or a corpus"),
    };
    let mut mining = p.mining;
    if let Some(f) = p.min_support_fraction {
        mining.min_support = support_from_fraction(f, transactions.len())?;
    }
    mining.validate()?;
    let itemsets = mine_frequent(&transactions, &mining);
    out.add("itemsets.tsv", write_itemsets(&itemsets));
    out.summary = format!(
        "{origin}{} transactions, {} frequent itemsets (min support {})",
        transactions.len(),
        itemsets.len(),
        mining.min_support
    );
    Ok(out)
}

/// `pmi`, or `table:<path>` for a tabulated score file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScorerChoice {
    Pmi,
    Table(PathBuf),
}

impl std::str::FromStr for ScorerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "pmi" => Ok(ScorerChoice::Pmi),
            Some(("table", path)) if !path.is_empty() => Ok(ScorerChoice::Table(path.into())),
            _ => Err(format!("scorer `{s}`: expected `pmi` or `table:<path>`")),
        }
    }
}

impl TryFrom<String> for ScorerChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ScorerChoice> for String {
    fn from(c: ScorerChoice) -> String {
        match c {
            ScorerChoice::Pmi => "pmi".into(),
            ScorerChoice::Table(p) => format!("table:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildParams {
    pub transactions: PathBuf,
    pub itemsets: PathBuf,
    pub scorer: ScorerChoice,
    pub builder: BuilderConfig,
}

/// Ranked skeleton chains and a readable curation queue. Any ontology
/// event type may extend a sequence.
pub fn build(p: &BuildParams, ontology: &Ontology) -> anyhow::Result<Outputs> {
    let transactions = read_transactions(&read_text(&p.transactions)?)?;
    let itemsets = read_itemsets(&read_text(&p.itemsets)?)?;
    let universe: Vec<&str> = ontology.event_type_ids().collect();
    let scorer: Box<dyn PairScorer> = match &p.scorer {
        ScorerChoice::Table(path) => Box::new(TableScorer::parse(&read_text(path)?)?),
        ScorerChoice::Pmi => Box::new(default_scorer(&transactions)?),
    };
    let skeletons = build_skeletons(&itemsets, &universe, scorer.as_ref(), &p.builder)?;
    let mut out = Outputs::default();
    out.add("skeletons.jsonl", write_skeletons(&skeletons));
    out.add("curation.txt", render_curation_queue(&skeletons, ontology));
    out.summary = format!(
        "{} skeletons from {} itemsets",
        skeletons.len(),
        itemsets.len()
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstantiateParams {
    pub skeletons: PathBuf,
    /// Skeleton ids to import; every skeleton when empty.
    #[serde(default)]
    pub ids: Vec<String>,
}

/// Partially filled schemas, one `<id>.json` each. Each is validated; a
/// skeleton that cannot be imported is an error.
pub fn instantiate(p: &InstantiateParams, ontology: &Ontology) -> anyhow::Result<Outputs> {
    let skeletons = read_skeletons(&read_text(&p.skeletons)?)?;
    let wanted: BTreeSet<&str> = p.ids.iter().map(String::as_str).collect();
    if let Some(missing) = wanted
        .iter()
        .find(|id| !skeletons.iter().any(|s| &s.id == *id))
    {
        bail!("no skeleton `{missing}` in {}", p.skeletons.display());
    }
    let mut out = Outputs::default();
    let mut warnings = 0;
    for sk in skeletons
        .iter()
        .filter(|s| wanted.is_empty() || wanted.contains(s.id.as_str()))
    {
        let schema = schema_from_skeleton(sk, ontology)?;
        let report = validate_schema(&schema, ontology);
        if !report.ok {
            bail!(
                "skeleton `{}` imports with errors: {:?}",
                sk.id,
                report.errors().collect::<Vec<_>>()
            );
        }
        warnings += report.warnings().count();
        out.add(format!("{}.json", schema.id), schema.to_json());
    }
    out.summary = format!(
        "{} schemas instantiated, {warnings} warnings",
        out.files.len()
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub source: String,
    pub schema_id: Option<String>,
    pub report: Option<schemakit::schema::ValidationReport>,
    /// Set when the file did not parse as a schema.
    pub parse_error: Option<String>,
}

impl ValidationOutcome {
    pub fn ok(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.ok)
    }
}

/// Validates schema files; a directory contributes every schema in it.
pub fn validate_paths(
    paths: &[PathBuf],
    ontology: &Ontology,
) -> anyhow::Result<Vec<ValidationOutcome>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter(|p| {
                    !p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with('.'))
                })
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(path.clone());
        }
    }
    files
        .iter()
        .map(|f| {
            let bytes = std::fs::read(f).with_context(|| format!("reading {}", f.display()))?;
            let source = f.display().to_string();
            Ok(match Schema::from_json(&bytes) {
                Ok(schema) => ValidationOutcome {
                    source,
                    schema_id: Some(schema.id.clone()),
                    report: Some(validate_schema(&schema, ontology)),
                    parse_error: None,
                },
                Err(e) => ValidationOutcome {
                    source,
                    schema_id: None,
                    report: None,
                    parse_error: Some(e.to_string()),
                },
            })
        })
        .collect()
}

pub fn render_validation(outcomes: &[ValidationOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        match (&o.report, &o.parse_error) {
            (_, Some(e)) => out.push_str(&format!("{}: unreadable: {e}\n", o.source)),
            (Some(r), None) => {
                let status = if r.ok { "ok" } else { "invalid" };
                out.push_str(&format!(
                    "{} ({}): {status}, {} error(s), {} warning(s)\n",
                    o.source,
                    o.schema_id.as_deref().unwrap_or("?"),
                    r.errors().count(),
                    r.warnings().count()
                ));
                for issue in &r.issues {
                    let sev = match issue.severity {
                        Severity::Error => "error",
                        Severity::Warning => "warning",
                    };
                    out.push_str(&format!(
                        "  {sev} at {}: {}\n",
                        issue.location, issue.message
                    ));
                }
            }
            (None, None) => unreachable!("an outcome has a report or a parse error"),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageParams {
    pub corpus: PathBuf,
    pub coverage: CoverageSettings,
}

pub fn coverage_report(
    p: &CoverageParams,
    library: &[Schema],
    library_id: &str,
) -> anyhow::Result<Outputs> {
    let docs = read_corpus(&p.corpus)?;
    let multisets: Vec<EventMultiset> = docs.iter().map(event_multiset).collect();
    let mut report = coverage(
        &multisets,
        library,
        &p.coverage.thresholds,
        &p.coverage.strata()?,
    )?;
    report.library_id = library_id.to_string();
    report.corpus_id = stem(&p.corpus);
    let mut out = Outputs::default();
    let table = render_coverage_table(&report);
    out.add("coverage.json", pretty(&report));
    out.add("coverage.txt", table.clone());
    out.summary = table;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// Rank schemas for each document.
    Schemas,
    /// Rank documents for each schema.
    Documents,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankParams {
    pub corpus: PathBuf,
    /// `doc_id<TAB>schema_id` lines.
    pub gold: PathBuf,
    pub mode: RankMode,
    pub ks: Vec<usize>,
    pub strata: Vec<String>,
}

pub fn rank(p: &RankParams, library: &[Schema]) -> anyhow::Result<Outputs> {
    let docs = read_corpus(&p.corpus)?;
    let multisets: Vec<EventMultiset> = docs.iter().map(event_multiset).collect();
    let gold = read_gold_labels(&read_text(&p.gold)?)?;
    let strata = parse_strata(&p.strata.join(","))?;
    let mut reports = Vec::new();
    if matches!(p.mode, RankMode::Schemas | RankMode::Both) {
        reports.push(evaluate_schema_ranking(
            &multisets, library, &gold, &p.ks, &strata,
        )?);
    }
    if matches!(p.mode, RankMode::Documents | RankMode::Both) {
        reports.push(evaluate_document_ranking(
            &multisets, library, &gold, &p.ks, &strata,
        )?);
    }
    let mut out = Outputs::default();
    let tables: Vec<String> = reports.iter().map(render_ranking_table).collect();
    out.add("ranking.json", pretty(&reports));
    out.add("ranking.txt", tables.join("\n"));
    out.summary = tables.join("\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferParams {
    pub corpus: PathBuf,
    pub inference: InferenceConfig,
    /// Try every schema instead of the prefiltered top k.
    #[serde(default)]
    pub exhaustive: bool,
}

/// Match results, best first per document, and solver diagnostics.
pub fn infer(p: &InferParams, library: &[Schema]) -> anyhow::Result<Outputs> {
    let docs = read_corpus(&p.corpus)?;
    if library.is_empty() {
        bail!("library is empty");
    }
    let inferred = if p.exhaustive {
        docs.iter()
            .map(|d| infer_document_exhaustive(library, d, &p.inference))
            .collect::<schemakit::Result<Vec<_>>>()?
    } else {
        infer_corpus(library, &docs, &p.inference)?
    };
    let matched = inferred
        .iter()
        .flat_map(|d| &d.results)
        .filter(|r| r.theta > 0.0)
        .count();
    let truncated = inferred
        .iter()
        .flat_map(|d| &d.diagnostics)
        .filter(|d| d.truncated)
        .count();
    let mut out = Outputs::default();
    out.add(
        "matches.jsonl",
        json_lines(inferred.iter().flat_map(|d| &d.results)),
    );
    out.add(
        "diagnostics.jsonl",
        json_lines(inferred.iter().flat_map(|d| &d.diagnostics)),
    );
    out.summary = format!(
        "{} documents, {matched} matches with positive confidence, {truncated} truncated groundings",
        docs.len()
    );
    Ok(out)
}

pub fn read_matches(text: &str) -> anyhow::Result<Vec<MatchResult>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("match file line {}", i + 1)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum IntrusionMethod {
    Library,
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrusionParams {
    pub method: IntrusionMethod,
    /// Corpus method only: the corpus and the `infer` matches over it.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub matches: Option<PathBuf>,
    pub intrusion: IntrusionConfig,
}

/// Annotator export, answer key, full task records and the review sheet.
pub fn intrusion_generate(p: &IntrusionParams, library: &[Schema]) -> anyhow::Result<Outputs> {
    let evidence;
    let method = match p.method {
        IntrusionMethod::Library => Method::Library,
        IntrusionMethod::Corpus => {
            let (Some(corpus), Some(matches)) = (&p.corpus, &p.matches) else {
                bail!("the corpus method needs both a corpus and a match file");
            };
            let docs = read_corpus(corpus)?;
            let n_events: BTreeMap<String, usize> = docs
                .iter()
                .map(|d| (d.doc_id.clone(), d.n_events()))
                .collect();
            let results = read_matches(&read_text(matches)?)?;
            evidence = CorpusEvidence::from_results(n_events, &results);
            Method::Corpus(&evidence)
        }
    };
    let (tasks, skipped) = generate_tasks(library, method, &p.intrusion)?;
    let mut out = Outputs::default();
    out.add("export.jsonl", write_task_export(&tasks));
    out.add("answer_key.tsv", write_answer_key(&tasks));
    out.add("tasks.jsonl", write_tasks(&tasks));
    out.add("review.tsv", write_review(&tasks));
    let skipped_text: String = skipped
        .iter()
        .map(|(id, e)| format!("{id}\t{e}\n"))
        .collect();
    out.add("skipped.tsv", skipped_text);
    out.summary = format!(
        "{} tasks ({} method), {} hosts skipped",
        tasks.len(),
        method.name(),
        skipped.len()
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreParams {
    pub answer_key: PathBuf,
    pub responses: PathBuf,
}

pub fn intrusion_score(p: &ScoreParams) -> anyhow::Result<Outputs> {
    let key = read_answer_key(&read_text(&p.answer_key)?)?;
    let responses = read_responses(&read_text(&p.responses)?)?;
    let report = score_responses(&key, &responses)?;
    let pct = |x: f64| format!("{:.1}", 100.0 * x);
    let b = &report.baselines;
    let table = format!(
        "tasks\ttotal\t1-ann\t2-ann\tall-ann\n{}\t{}\t{}\t{}\t{}\nrandom\t{}\t{}\t{}\t{}\n",
        report.n_tasks,
        pct(report.total),
        pct(report.one_ann),
        pct(report.two_ann),
        pct(report.all_ann),
        pct(b.random),
        pct(b.random_1),
        pct(b.random_2),
        pct(b.random_3),
    );
    let mut out = Outputs::default();
    out.add("scores.json", pretty(&report));
    out.add("scores.txt", table.clone());
    out.summary = table;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub synth: SynthConfig,
}

/// A synthetic library, a corpus generated from it and the gold labels.
pub fn synth(p: &SynthParams, ontology: &Ontology) -> anyhow::Result<Outputs> {
    let data = synthesize(ontology, &p.synth);
    let mut out = Outputs::default();
    out.add("corpus.jsonl", write_corpus_lines(&data.corpus));
    let mut gold = String::from("# doc_id\tschema_id\n");
    for (doc, schema) in &data.gold {
        gold.push_str(&format!("{doc}\t{schema}\n"));
    }
    out.add("gold.tsv", gold);
    for s in &data.library {
        out.add(format!("library/{}.json", s.id), s.to_json());
    }
    out.summary = format!(
        "{} schemas, {} documents",
        data.library.len(),
        data.corpus.len()
    );
    Ok(out)
}

/// Parameter defaults drawn from resolved settings, for the job kinds that
/// take configuration.
pub fn default_params(kind: &str, settings: &Settings) -> serde_json::Value {
    use serde_json::json;
    match kind {
        "mine" => json!({ "mining": settings.mining }),
        "build" => json!({ "scorer": "pmi", "builder": settings.builder }),
        "coverage" => json!({ "coverage": settings.coverage }),
        "rank" => json!({
            "mode": RankMode::Both,
            "ks": settings.rank.ks,
            "strata": settings.coverage.strata,
        }),
        "infer" => json!({ "inference": settings.inference }),
        "intrusion" => {
            json!({ "method": IntrusionMethod::Library, "intrusion": settings.intrusion })
        }
        _ => json!({}),
    }
}
