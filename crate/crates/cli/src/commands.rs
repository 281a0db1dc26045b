//! Subcommand implementations. Each command reads its inputs through the run
//! config, writes into its own directory under `output_dir`, and finishes by
//! writing a `manifest.json` next to its outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use reqprio::corpus::{
    build_instances, load_benchmark, load_requirements, load_reviews, window_reviews, Benchmark, FeedbackMessage,
    PrioritizationInstance, ReleaseSchedule, Requirement,
};
use reqprio::evalharness::{
    evaluate_ranking, stat_report, CutoffLabel, write_metrics_csv, write_stats_csv, MetricsRow, PlotData,
};
use reqprio::feedbackprops::{
    extract_properties, IntentScorer, LexiconScorer, NeutralScorer, PropertyTable, RuleIntentScorer, ScoreFile,
    SentimentScorer, WithOverrides,
};
use reqprio::nrpsolver::{
    apply_requires_filter, nsga2, reference_front, share_of_reference, value_cost_front, Front, NrpProblem,
    ObjectiveSet, RunManifest,
};
use reqprio::priority::{
    associate, cluster_associate, prioritize_irefeed, prioritize_refeed, rank, save_priority_csv, PriorityTable,
    TextSimilarity,
};
use reqprio::requiresminer::{
    dvalue, dvalue_variant, evaluate_pairs, mine, ChatClient, DValueVariant, FixtureClient, MiningOutcome,
    Provenance, RequiresSet,
};
use reqprio::textkit::{dense_cosine, Normalizer};
use reqprio::topicmodel::{
    cluster_by_embeddings, cluster_requirements, fit_lda, ClusterSet, EmbeddingTable, LdaConfig,
};
use reqprio::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{CoherenceSpace, MineMode, RunConfig, ScorerMode, ShareBasis};
use crate::http::HttpChatClient;
use crate::sha256_hex;

pub const BASELINE_METHOD: &str = "refeed";

/// Provenance record written next to every command's outputs. It carries no
/// timestamps so that reruns produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Input file name to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null", default)]
    pub details: serde_json::Value,
}

/// State shared by every command: the config, its hash and the inputs read so far.
pub struct Context {
    pub config: RunConfig,
    pub config_sha256: String,
    inputs: BTreeMap<String, String>,
}

impl Context {
    pub fn new(config: RunConfig, config_sha256: String) -> Self {
        Context {
            config,
            config_sha256,
            inputs: BTreeMap::new(),
        }
    }

    fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let key = match path.parent().and_then(Path::file_name) {
            Some(dir) => format!("{}/{name}", dir.to_string_lossy()),
            None => name,
        };
        self.inputs.insert(key, sha256_hex(&bytes));
        Ok(())
    }

    fn out_dir(&self, sub: &str) -> Result<PathBuf> {
        let dir = self.config.output_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn write_manifest(&self, dir: &Path, command: &str, details: serde_json::Value) -> Result<()> {
        let m = Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: self.config_sha256.clone(),
            seed: self.config.seed,
            inputs: self.inputs.clone(),
            details,
        };
        write_json(&dir.join("manifest.json"), &m)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Data(format!("writing {}: {e}", path.display()))
}

/// `app:2024-03/2024-06` becomes `app_2024-03_2024-06`.
pub fn instance_file_stem(instance_id: &str) -> String {
    instance_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Debug, Serialize)]
struct InstanceSummary {
    id: String,
    n: usize,
    k: usize,
    window_start: String,
    window_end: String,
    reviews: usize,
}

pub fn ingest(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config.clone();
    let d = &cfg.data;
    let req_path = cfg.optional(&d.requirements, "requirements")?;
    let rev_path = cfg.optional(&d.reviews, "reviews")?;
    let bench_path = cfg.optional(&d.benchmark, "benchmark")?;
    if req_path.is_none() && rev_path.is_none() && bench_path.is_none() {
        return Err(Error::Config("ingest needs at least one of data.requirements, data.reviews, data.benchmark".into()));
    }
    let out = ctx.out_dir("ingest")?;
    let mut summary = serde_json::Map::new();
    let requirements = match req_path {
        Some(p) => {
            ctx.record_input(p)?;
            let reqs = load_requirements(p)?;
            summary.insert("requirements".into(), reqs.len().into());
            Some(reqs)
        }
        None => None,
    };
    let reviews = match rev_path {
        Some(p) => {
            ctx.record_input(p)?;
            let revs = load_reviews(p)?;
            summary.insert("reviews".into(), revs.len().into());
            Some(revs)
        }
        None => None,
    };
    if let Some(p) = bench_path {
        ctx.record_input(p)?;
        let b = load_benchmark(p)?;
        summary.insert("benchmark_requirements".into(), b.rows.len().into());
        summary.insert("stakeholders".into(), b.stakeholders.into());
    }
    if let Some(reqs) = &requirements {
        let instances = instances_for(&cfg, reqs)?;
        let list: Vec<InstanceSummary> = instances
            .iter()
            .map(|inst| InstanceSummary {
                id: inst.id.clone(),
                n: inst.n(),
                k: inst.k(),
                window_start: inst.window.start.to_string(),
                window_end: inst.window.end.to_string(),
                reviews: reviews.as_deref().map_or(0, |r| window_reviews(r, inst).len()),
            })
            .collect();
        summary.insert(
            "instances".into(),
            serde_json::to_value(list).map_err(|e| Error::Data(e.to_string()))?,
        );
    }
    let summary = serde_json::Value::Object(summary);
    write_json(&out.join("summary.json"), &summary)?;
    info!("ingest summary: {summary}");
    ctx.write_manifest(&out, "ingest", serde_json::Value::Null)
}

fn instances_for(cfg: &RunConfig, reqs: &[Requirement]) -> Result<Vec<PrioritizationInstance>> {
    let apps: BTreeSet<&str> = match &cfg.prioritize.app {
        Some(a) => std::iter::once(a.as_str()).collect(),
        None => reqs.iter().map(|r| r.app.as_str()).collect(),
    };
    let mut out = Vec::new();
    for app in apps {
        let schedule = ReleaseSchedule::from_requirements(app, reqs)?;
        out.extend(build_instances(&schedule, reqs)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// shared text pipeline

fn normalizer(cfg: &RunConfig) -> Result<Normalizer> {
    let n = match cfg.optional(&cfg.data.stopwords, "stopwords")? {
        Some(p) => Normalizer::from_stopword_file(p)?,
        None => Normalizer::default(),
    };
    Ok(n.stemming(cfg.prioritize.stemming))
}

/// Sentence scorers selected by `prioritize.scorer`.
struct Scorers {
    lexicon: LexiconScorer,
    file: Option<ScoreFile>,
    mode: ScorerMode,
}

impl Scorers {
    fn from_config(ctx: &mut Context) -> Result<Self> {
        let cfg = ctx.config.clone();
        let lexicon = match cfg.optional(&cfg.data.lexicon, "lexicon")? {
            Some(p) => {
                ctx.record_input(p)?;
                LexiconScorer::load(p)?
            }
            None => LexiconScorer::default(),
        };
        let file = match cfg.prioritize.scorer {
            ScorerMode::Builtin => None,
            ScorerMode::File | ScorerMode::FileStrict => {
                let p = cfg.require(&cfg.data.sentence_scores, "sentence_scores")?;
                ctx.record_input(p)?;
                Some(ScoreFile::load(p)?)
            }
        };
        Ok(Scorers {
            lexicon,
            file,
            mode: cfg.prioritize.scorer,
        })
    }

    fn properties(&self, messages: &[FeedbackMessage]) -> PropertyTable {
        let run = |s: &dyn SentimentScorer, i: &dyn IntentScorer| extract_properties(messages, s, i);
        match (&self.file, self.mode) {
            (Some(file), ScorerMode::File) => run(
                &WithOverrides {
                    file,
                    inner: self.lexicon.clone(),
                },
                &WithOverrides {
                    file,
                    inner: RuleIntentScorer,
                },
            ),
            (Some(file), ScorerMode::FileStrict) => run(
                &WithOverrides {
                    file,
                    inner: NeutralScorer,
                },
                &WithOverrides {
                    file,
                    inner: NeutralScorer,
                },
            ),
            _ => run(&self.lexicon, &RuleIntentScorer),
        }
    }
}

fn lda_clusters(
    cfg: &RunConfig,
    requirements: &[Requirement],
    corpus_texts: &[&str],
    norm: &Normalizer,
    seed: u64,
) -> Result<(ClusterSet, Option<reqprio::topicmodel::TopicModel>)> {
    let corpus: Vec<_> = corpus_texts.iter().map(|t| norm.normalize(t)).collect();
    if corpus.iter().all(|d| d.is_empty()) {
        warn!("no usable text to fit topics on; every requirement forms its own cluster");
        let ids: Vec<&str> = requirements.iter().map(|r| r.id.as_str()).collect();
        return Ok((ClusterSet::singletons(&ids), None));
    }
    let model = fit_lda(
        &corpus,
        &LdaConfig {
            topics: cfg.prioritize.topics,
            passes: cfg.prioritize.passes,
            seed,
            ..LdaConfig::default()
        },
    )?;
    Ok((cluster_requirements(&model, requirements, norm), Some(model)))
}

/// Embedding tables restricted to the given requirement and message ids.
struct Embeddings {
    requirements: EmbeddingTable,
    messages: EmbeddingTable,
}

impl Embeddings {
    fn load(ctx: &mut Context) -> Result<Option<Self>> {
        let cfg = ctx.config.clone();
        let r = cfg.optional(&cfg.data.requirement_embeddings, "requirement_embeddings")?;
        let m = cfg.optional(&cfg.data.message_embeddings, "message_embeddings")?;
        match (r, m) {
            (Some(r), Some(m)) => {
                ctx.record_input(r)?;
                ctx.record_input(m)?;
                Ok(Some(Embeddings {
                    requirements: EmbeddingTable::load(r)?,
                    messages: EmbeddingTable::load(m)?,
                }))
            }
            (None, None) => Ok(None),
            _ => Err(Error::Config(
                "embedding-backed methods need both data.requirement_embeddings and data.message_embeddings".into(),
            )),
        }
    }

    fn subset(table: &EmbeddingTable, ids: impl Iterator<Item = String>) -> Result<EmbeddingTable> {
        let mut map = BTreeMap::new();
        for id in ids {
            let v = table
                .get(&id)
                .ok_or_else(|| Error::Data(format!("no embedding for `{id}`")))?;
            map.insert(id, v.to_vec());
        }
        EmbeddingTable::new(map)
    }
}

// ---------------------------------------------------------------------------
// topics

#[derive(Debug, Serialize)]
struct TopicsReport {
    instance: String,
    perplexity_trace: Vec<f64>,
    top_words: Vec<Vec<String>>,
    clusters: Vec<ClusterReport>,
}

#[derive(Debug, Serialize)]
struct ClusterReport {
    label: String,
    coherence: f64,
    members: Vec<String>,
}

fn cluster_report(clusters: &ClusterSet) -> Vec<ClusterReport> {
    clusters
        .clusters()
        .iter()
        .map(|c| ClusterReport {
            label: format!("{:?}", c.label),
            coherence: c.coherence,
            members: c.members.clone(),
        })
        .collect()
}

pub fn topics(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config.clone();
    let (instances, reviews) = load_prioritization_inputs(ctx)?;
    let norm = normalizer(&cfg)?;
    let out = ctx.out_dir("topics")?;
    let reports: Vec<TopicsReport> = instances
        .par_iter()
        .map(|inst| {
            let msgs = window_reviews(&reviews, inst);
            let texts: Vec<&str> = msgs.iter().map(|m| m.text.as_str()).collect();
            let (mut clusters, model) = lda_clusters(&cfg, &inst.requirements, &texts, &norm, cfg.seed)?;
            let sim = TextSimilarity::fit(&inst.requirements, &msgs, &norm);
            clusters.assign_coherence(|a, b| sim.requirement_similarity(a, b));
            let (perplexity_trace, top_words) = match &model {
                Some(m) => (
                    m.perplexity_trace().to_vec(),
                    (0..m.topics())
                        .map(|t| m.top_words(t, 10).into_iter().map(str::to_string).collect())
                        .collect(),
                ),
                None => (Vec::new(), Vec::new()),
            };
            if let Some(m) = &model {
                write_json(&out.join(format!("{}.model.json", instance_file_stem(&inst.id))), &m.dump())?;
            }
            Ok(TopicsReport {
                instance: inst.id.clone(),
                perplexity_trace,
                top_words,
                clusters: cluster_report(&clusters),
            })
        })
        .collect::<Result<_>>()?;
    write_json(&out.join("topics.json"), &reports)?;
    ctx.write_manifest(&out, "topics", serde_json::Value::Null)
}

fn load_prioritization_inputs(ctx: &mut Context) -> Result<(Vec<PrioritizationInstance>, Vec<FeedbackMessage>)> {
    let cfg = ctx.config.clone();
    let req_path = cfg.require(&cfg.data.requirements, "requirements")?;
    let rev_path = cfg.require(&cfg.data.reviews, "reviews")?;
    ctx.record_input(req_path)?;
    ctx.record_input(rev_path)?;
    let reqs = load_requirements(req_path)?;
    let reviews = load_reviews(rev_path)?;
    Ok((instances_for(&cfg, &reqs)?, reviews))
}

// ---------------------------------------------------------------------------
// prioritize

/// Scores every requirement of one instance under each configured method.
fn prioritize_instance(
    cfg: &RunConfig,
    inst: &PrioritizationInstance,
    reviews: &[FeedbackMessage],
    scorers: &Scorers,
    norm: &Normalizer,
    embeddings: Option<&Embeddings>,
) -> Result<Vec<PriorityTable>> {
    let msgs = window_reviews(reviews, inst);
    if msgs.is_empty() {
        warn!("instance {} has no reviews in its window; all scores are 0", inst.id);
    }
    let props = scorers.properties(&msgs);
    let sim = TextSimilarity::fit(&inst.requirements, &msgs, norm);
    let assoc = associate(&inst.requirements, &msgs, &sim, cfg.prioritize.threshold);
    info!("{}: {} messages, {} associations", inst.id, msgs.len(), assoc.total_links());

    let mut tables = vec![prioritize_refeed(BASELINE_METHOD, &assoc, &props, &sim)?];

    let texts: Vec<&str> = msgs.iter().map(|m| m.text.as_str()).collect();
    let (mut clusters, model) = lda_clusters(cfg, &inst.requirements, &texts, norm, cfg.seed)?;
    match (cfg.prioritize.coherence, &model) {
        (CoherenceSpace::Topic, Some(model)) => {
            let theta: BTreeMap<&str, Vec<f64>> = inst
                .requirements
                .iter()
                .filter_map(|r| Some((r.id.as_str(), model.infer(&norm.normalize(&r.text))?)))
                .collect();
            clusters.assign_coherence(|a, b| match (theta.get(a), theta.get(b)) {
                (Some(u), Some(v)) => dense_cosine(u, v),
                _ => 0.0,
            });
        }
        _ => clusters.assign_coherence(|a, b| sim.requirement_similarity(a, b)),
    }
    let cassoc = cluster_associate(&clusters, &assoc)?;
    tables.push(prioritize_irefeed("lda", &cassoc, &props, &sim, false)?);
    tables.push(prioritize_irefeed("lda_c", &cassoc, &props, &sim, true)?);

    if let Some(e) = embeddings {
        let ids = inst.requirement_ids();
        let req_emb = Embeddings::subset(&e.requirements, ids.iter().cloned())?;
        let msg_emb = Embeddings::subset(&e.messages, msgs.iter().map(|m| m.id.clone()))?;
        let mut eclusters = if msgs.is_empty() {
            ClusterSet::singletons(&ids)
        } else {
            cluster_by_embeddings(&ids, &req_emb, &msg_emb, cfg.prioritize.topics, cfg.seed)?
        };
        eclusters.assign_coherence(|a, b| req_emb.similarity(a, b));
        let ecassoc = cluster_associate(&eclusters, &assoc)?;
        tables.push(prioritize_irefeed("embed", &ecassoc, &props, &sim, false)?);
        tables.push(prioritize_irefeed("embed_c", &ecassoc, &props, &sim, true)?);
    }
    Ok(tables)
}

fn metrics_for(inst: &PrioritizationInstance, tables: &[PriorityTable]) -> Vec<MetricsRow> {
    tables
        .iter()
        .flat_map(|t| evaluate_ranking(&inst.id, &t.method, &rank(t), &inst.ground_truth))
        .collect()
}

/// Writes metrics.csv, stats.csv and plot.json for a finished set of rows.
fn write_evaluation(cfg: &RunConfig, out: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_metrics_csv(rows, create_file(&out.join("metrics.csv"))?)?;
    let methods: BTreeSet<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    let variants: Vec<&str> = methods.iter().copied().filter(|m| *m != BASELINE_METHOD).collect();
    let report = stat_report(rows, BASELINE_METHOD, &variants)?;
    write_stats_csv(&report, create_file(&out.join("stats.csv"))?)?;
    let mut plot = PlotData::default();
    plot.add_dataset(&cfg.prioritize.dataset, rows);
    plot.save(&out.join("plot.json"))
}

pub fn prioritize(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config.clone();
    let (instances, reviews) = load_prioritization_inputs(ctx)?;
    let scorers = Scorers::from_config(ctx)?;
    let embeddings = Embeddings::load(ctx)?;
    let norm = normalizer(&cfg)?;
    let out = ctx.out_dir("prioritize")?;
    if instances.is_empty() {
        write_metrics_csv(&[], create_file(&out.join("metrics.csv"))?)?;
        return Err(Error::Data(
            "no prioritization instances: requirements need at least two release periods".into(),
        ));
    }
    let pdir = out.join("priorities");
    std::fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;

    let per_instance: Vec<Vec<MetricsRow>> = instances
        .par_iter()
        .map(|inst| {
            let tables = prioritize_instance(&cfg, inst, &reviews, &scorers, &norm, embeddings.as_ref())?;
            save_priority_csv(&tables, &pdir.join(format!("{}.csv", instance_file_stem(&inst.id))))?;
            Ok(metrics_for(inst, &tables))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<MetricsRow> = per_instance.into_iter().flatten().collect();
    write_evaluation(&cfg, &out, &rows)?;
    let details = serde_json::json!({
        "instances": instances.iter().map(|i| &i.id).collect::<Vec<_>>(),
        "methods": rows.iter().map(|r| r.method.as_str()).collect::<BTreeSet<_>>(),
    });
    ctx.write_manifest(&out, "prioritize", details)
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug, Deserialize)]
struct PriorityRecord {
    requirement_id: String,
    method: String,
    #[allow(dead_code)]
    score: f64,
    rank: usize,
}

/// Reads a priority CSV back into `(method, ranked ids)` pairs, methods in
/// the order they first appear in the file.
pub fn read_rankings(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{name}: {e}")))?;
    let mut by_method: Vec<(String, Vec<(usize, String)>)> = Vec::new();
    for (i, rec) in reader.deserialize::<PriorityRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::parse(&name, i + 1, e.to_string()))?;
        let slot = match by_method.iter().position(|(m, _)| *m == rec.method) {
            Some(j) => j,
            None => {
                by_method.push((rec.method, Vec::new()));
                by_method.len() - 1
            }
        };
        by_method[slot].1.push((rec.rank, rec.requirement_id));
    }
    Ok(by_method
        .into_iter()
        .map(|(m, mut v)| {
            v.sort();
            (m, v.into_iter().map(|(_, id)| id).collect())
        })
        .collect())
}

pub fn evaluate(ctx: &mut Context, priorities: Option<&Path>) -> Result<()> {
    let cfg = ctx.config.clone();
    let req_path = cfg.require(&cfg.data.requirements, "requirements")?;
    ctx.record_input(req_path)?;
    let instances = instances_for(&cfg, &load_requirements(req_path)?)?;
    let pdir = priorities
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("prioritize").join("priorities"));
    if !pdir.is_dir() {
        return Err(Error::Config(format!(
            "priority directory {} does not exist; run `prioritize` first",
            pdir.display()
        )));
    }
    let out = ctx.out_dir("evaluate")?;
    let mut rows = Vec::new();
    for inst in &instances {
        let path = pdir.join(format!("{}.csv", instance_file_stem(&inst.id)));
        if !path.exists() {
            warn!("no priorities for instance {}", inst.id);
            continue;
        }
        ctx.record_input(&path)?;
        for (method, ranking) in read_rankings(&path)? {
            rows.extend(evaluate_ranking(&inst.id, &method, &ranking, &inst.ground_truth));
        }
    }
    if rows.is_empty() {
        write_metrics_csv(&[], create_file(&out.join("metrics.csv"))?)?;
        return Err(Error::Data("no priority tables matched any instance".into()));
    }
    write_evaluation(&cfg, &out, &rows)?;
    ctx.write_manifest(&out, "evaluate", serde_json::Value::Null)
}

// ---------------------------------------------------------------------------
// mine

/// Clusters for the per-cluster prompts: an assignment file when configured,
/// otherwise topics fitted on the requirement texts themselves.
fn mining_clusters(ctx: &mut Context, requirements: &[Requirement]) -> Result<ClusterSet> {
    let cfg = ctx.config.clone();
    if let Some(p) = cfg.optional(&cfg.data.clusters, "clusters")? {
        ctx.record_input(p)?;
        #[derive(Deserialize)]
        struct Row {
            requirement_id: String,
            cluster: String,
        }
        let name = p.display().to_string();
        let mut reader = csv::Reader::from_path(p).map_err(|e| Error::Data(format!("{name}: {e}")))?;
        let mut assignments = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::parse(&name, i + 1, e.to_string()))?;
            assignments.push((reqprio::corpus::normalize_id(&row.requirement_id), row.cluster));
        }
        let clusters = ClusterSet::from_assignments(&assignments)?;
        let known: BTreeSet<&str> = requirements.iter().map(|r| r.id.as_str()).collect();
        if let Some(bad) = assignments.iter().find(|(id, _)| !known.contains(id.as_str())) {
            return Err(Error::Integrity(format!("cluster file names unknown requirement `{}`", bad.0)));
        }
        return Ok(clusters);
    }
    let norm = normalizer(&cfg)?;
    let texts: Vec<&str> = requirements.iter().map(|r| r.text.as_str()).collect();
    Ok(lda_clusters(&cfg, requirements, &texts, &norm, cfg.seed)?.0)
}

#[derive(Debug, Serialize)]
struct Transcript<'a> {
    index: usize,
    source: String,
    prompt_sha256: String,
    #[serde(flatten)]
    exchange: &'a reqprio::requiresminer::Exchange,
}

fn write_accuracy(path: &Path, outcome: &MiningOutcome, gold: &RequiresSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let err = csv_err(path);
    w.write_record(["source", "pairs", "correct", "recall", "precision", "f1"]).map_err(&err)?;
    for (name, set) in [
        ("baseline", &outcome.baseline),
        ("clusters", &outcome.cluster_union()),
        ("combined", &outcome.combined),
    ] {
        let prf = evaluate_pairs(set, gold);
        let correct = set.iter().filter(|p| gold.contains(p)).count();
        w.write_record([
            name.to_string(),
            set.len().to_string(),
            correct.to_string(),
            format!("{:.6}", prf.recall),
            format!("{:.6}", prf.precision),
            format!("{:.6}", prf.f1),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn mine_cmd(ctx: &mut Context) -> Result<MiningOutcome> {
    let cfg = ctx.config.clone();
    let bench_path = cfg.require(&cfg.data.benchmark, "benchmark")?;
    ctx.record_input(bench_path)?;
    let gold_path = cfg.optional(&cfg.data.gold_pairs, "gold_pairs")?;
    let client: Box<dyn ChatClient> = match cfg.mine.mode {
        MineMode::Fixture => {
            let p = cfg.require(&cfg.data.fixtures, "fixtures")?;
            ctx.record_input(p)?;
            Box::new(FixtureClient::load(p)?)
        }
        MineMode::Live => Box::new(HttpChatClient::from_config(&cfg.mine)?),
    };
    let requirements = load_benchmark(bench_path)?.requirements();
    let clusters = mining_clusters(ctx, &requirements)?;
    let out = ctx.out_dir("mine")?;

    let outcome = mine(client.as_ref(), &requirements, &clusters, cfg.mine.max_in_flight)?;
    let failures = outcome.failures();
    if failures == outcome.exchanges.len() {
        return Err(Error::Service(format!("all {failures} prompts failed")));
    }
    if failures > 0 {
        warn!("{failures} of {} prompts got no response; results are partial", outcome.exchanges.len());
    }

    outcome.baseline.save(&out.join("pairs_baseline.csv"))?;
    outcome.cluster_union().save(&out.join("pairs_clusters.csv"))?;
    outcome.combined.save(&out.join("pairs_combined.csv"))?;
    let transcripts: Vec<Transcript> = outcome
        .exchanges
        .iter()
        .enumerate()
        .map(|(i, e)| Transcript {
            index: i,
            source: if i == 0 { "baseline".into() } else { format!("cluster{}", i - 1) },
            prompt_sha256: reqprio::requiresminer::prompt_sha256(&e.prompt),
            exchange: e,
        })
        .collect();
    write_json(&out.join("transcripts.json"), &transcripts)?;

    match gold_path {
        Some(p) => {
            ctx.record_input(p)?;
            let gold = RequiresSet::load(p, Provenance::Gold)?;
            write_accuracy(&out.join("accuracy.csv"), &outcome, &gold)?;
        }
        None => info!("no gold pairs configured; skipping accuracy"),
    }
    let details = serde_json::json!({
        "mode": cfg.mine.mode,
        "model": if cfg.mine.mode == MineMode::Live { Some(&cfg.mine.model) } else { None },
        "prompts": outcome.exchanges.len(),
        "failures": failures,
        "clusters": clusters.len(),
    });
    ctx.write_manifest(&out, "mine", details)?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// dvalue

/// The pair set behind the D-values: `data.pairs` if set, else the combined
/// pairs of an earlier `mine` run.
fn load_pairs(ctx: &mut Context) -> Result<RequiresSet> {
    let cfg = ctx.config.clone();
    let path = match cfg.optional(&cfg.data.pairs, "pairs")? {
        Some(p) => p.to_path_buf(),
        None => {
            let mined = cfg.output_dir.join("mine").join("pairs_combined.csv");
            if !mined.exists() {
                return Err(Error::Config(
                    "no requires pairs: set data.pairs or run `mine` first".into(),
                ));
            }
            mined
        }
    };
    ctx.record_input(&path)?;
    RequiresSet::load(&path, Provenance::Imported)
}

pub fn dvalue_cmd(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.config.clone();
    let bench_path = cfg.require(&cfg.data.benchmark, "benchmark")?;
    ctx.record_input(bench_path)?;
    let ids = load_benchmark(bench_path)?.ids();
    let pairs = load_pairs(ctx)?;
    let raw = dvalue(&pairs, &ids)?;
    let out = ctx.out_dir("dvalue")?;
    let path = out.join("dvalues.csv");
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    let err = csv_err(&path);
    w.write_record(["requirement_id", "variant", "count", "dvalue"]).map_err(&err)?;
    for variant in DValueVariant::ALL {
        let v = dvalue_variant(&raw, variant)?;
        for ((id, d), c) in v.ids.iter().zip(&v.values).zip(&v.counts) {
            w.write_record([id.clone(), variant.to_string(), c.to_string(), format!("{d:.10}")])
                .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    ctx.write_manifest(&out, "dvalue", serde_json::json!({ "pairs": pairs.len() }))
}

// ---------------------------------------------------------------------------
// nrp

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    pub variant: String,
    pub baseline_share: f64,
    pub irefeed_share: f64,
    pub runs: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord {
    variant: String,
    seed: u64,
    baseline_share: f64,
    irefeed_share: f64,
    baseline_points: usize,
    irefeed_points: usize,
    reference_points: usize,
}

#[derive(Debug, Serialize)]
struct NrpManifestEntry<'a> {
    variant: &'a str,
    #[serde(flatten)]
    run: &'a RunManifest,
}

fn save_front(front: &Front, path: &Path) -> Result<()> {
    front.write_csv(create_file(path)?)
}

fn benchmark_problem(cfg: &RunConfig, bench: &Benchmark) -> Result<NrpProblem> {
    let p = NrpProblem::from_benchmark(bench)?;
    match &cfg.nrp.weights {
        Some(w) if w.len() != bench.stakeholders => Err(Error::Config(format!(
            "nrp.weights has {} entries but the benchmark has {} stakeholders",
            w.len(),
            bench.stakeholders
        ))),
        Some(w) => p.with_weights(w.clone()),
        None => Ok(p),
    }
}

/// Runs the bi-objective baseline and one tri-objective search per variant for
/// every seed, then averages each side's share of the per-seed reference front.
pub fn nrp_cmd(ctx: &mut Context) -> Result<Vec<ShareRow>> {
    let cfg = ctx.config.clone();
    let bench_path = cfg.require(&cfg.data.benchmark, "benchmark")?;
    ctx.record_input(bench_path)?;
    let bench = load_benchmark(bench_path)?;
    let problem = benchmark_problem(&cfg, &bench)?;
    let pairs = load_pairs(ctx)?;
    let raw = dvalue(&pairs, &problem.ids)?;
    let out = ctx.out_dir("nrp")?;
    let fronts_dir = out.join("fronts");
    std::fs::create_dir_all(&fronts_dir).map_err(|e| Error::io(&fronts_dir, e))?;

    let seeds: Vec<u64> = (0..cfg.nrp.runs as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
    let basis = |f: &Front| -> Front {
        let f = if cfg.nrp.requires_filter {
            apply_requires_filter(f, &pairs, &problem.ids)
        } else {
            f.clone()
        };
        match cfg.nrp.share_basis {
            ShareBasis::ValueCostFront => value_cost_front(&f),
            ShareBasis::FullFront => f,
        }
    };

    let baselines = seeds
        .par_iter()
        .map(|&seed| nsga2(&problem, &cfg.nrp.params(seed), ObjectiveSet::Bi))
        .collect::<Result<Vec<_>>>()?;
    for (seed, run) in seeds.iter().zip(&baselines) {
        save_front(&run.front, &fronts_dir.join(format!("baseline_seed{seed}.csv")))?;
    }
    let mut manifests: Vec<(String, RunManifest)> =
        baselines.iter().map(|r| ("baseline".to_string(), r.manifest.clone())).collect();

    let mut records = Vec::new();
    let mut table = Vec::new();
    for &variant in &cfg.nrp.variants {
        let dv = dvalue_variant(&raw, variant)?;
        let tri_problem = problem.clone().with_dvalues(&dv)?;
        let runs = seeds
            .par_iter()
            .map(|&seed| nsga2(&tri_problem, &cfg.nrp.params(seed), ObjectiveSet::Tri))
            .collect::<Result<Vec<_>>>()?;
        let (mut sum_b, mut sum_i) = (0.0, 0.0);
        for ((&seed, base), tri) in seeds.iter().zip(&baselines).zip(&runs) {
            save_front(&tri.front, &fronts_dir.join(format!("{variant}_seed{seed}.csv")))?;
            let (b, t) = (basis(&base.front), basis(&tri.front));
            let reference = reference_front(&[&b, &t]);
            let (bs, ts) = (share_of_reference(&b, &reference), share_of_reference(&t, &reference));
            sum_b += bs;
            sum_i += ts;
            records.push(RunRecord {
                variant: variant.to_string(),
                seed,
                baseline_share: bs,
                irefeed_share: ts,
                baseline_points: b.value_cost_points().len(),
                irefeed_points: t.value_cost_points().len(),
                reference_points: reference.value_cost_points().len(),
            });
            manifests.push((variant.to_string(), tri.manifest.clone()));
        }
        let n = seeds.len() as f64;
        table.push(ShareRow {
            variant: variant.to_string(),
            baseline_share: sum_b / n,
            irefeed_share: sum_i / n,
            runs: seeds.len(),
            low_confidence: seeds.len() < 2,
        });
    }
    if seeds.len() < 2 {
        warn!("shares come from a single seeded run and are flagged low-confidence");
    }

    let path = out.join("shares.csv");
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    let err = csv_err(&path);
    w.write_record(["variant", "baseline_share", "irefeed_share", "runs", "low_confidence"])
        .map_err(&err)?;
    for r in &table {
        w.write_record([
            r.variant.clone(),
            format!("{:.2}", r.baseline_share),
            format!("{:.2}", r.irefeed_share),
            r.runs.to_string(),
            r.low_confidence.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("runs.csv");
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    for r in &records {
        w.serialize(r).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let entries: Vec<NrpManifestEntry> = manifests
        .iter()
        .map(|(v, m)| NrpManifestEntry { variant: v, run: m })
        .collect();
    write_json(&out.join("runs_manifest.json"), &entries)?;
    let details = serde_json::json!({
        "seeds": seeds,
        "share_basis": cfg.nrp.share_basis,
        "requires_filter": cfg.nrp.requires_filter,
        "pairs": pairs.len(),
    });
    ctx.write_manifest(&out, "nrp", details)?;
    Ok(table)
}

/// Reads a table written by [`nrp_cmd`].
pub fn read_share_table(path: &Path) -> Result<Vec<ShareRow>> {
    let name = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{name}: {e}")))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(&name, i + 1, e.to_string())))
        .collect()
}

// ---------------------------------------------------------------------------
// report

/// Collects whatever earlier commands produced into a Markdown summary.
pub fn report(ctx: &mut Context) -> Result<()> {
    let root = ctx.config.output_dir.clone();
    let mut md = String::from("# Run report\n\n");
    let mut found = false;

    for sub in ["prioritize", "evaluate"] {
        let path = root.join(sub).join("metrics.csv");
        if !path.exists() {
            continue;
        }
        found = true;
        ctx.record_input(&path)?;
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::Data(e.to_string()))?;
        #[derive(Deserialize)]
        struct Row {
            method: String,
            cutoff_label: String,
            recall: f64,
            precision: f64,
            f1: f64,
            f2: f64,
        }
        let rows: Vec<Row> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
        let order = |c: &str| CutoffLabel::ALL.iter().position(|l| l.as_str() == c).unwrap_or(usize::MAX);
        // (method, cutoff order, cutoff label) -> sums of R, P, F1, F2 and a row count
        type Sums = (f64, f64, f64, f64, usize);
        let mut means: BTreeMap<(&str, usize, &str), Sums> = BTreeMap::new();
        for r in &rows {
            let e = means.entry((r.method.as_str(), order(&r.cutoff_label), r.cutoff_label.as_str())).or_default();
            e.0 += r.recall;
            e.1 += r.precision;
            e.2 += r.f1;
            e.3 += r.f2;
            e.4 += 1;
        }
        md.push_str(&format!("## Prioritization metrics ({sub})\n\n"));
        md.push_str("| method | cutoff | recall | precision | F1 | F2 |\n|---|---|---|---|---|---|\n");
        for ((m, _, c), (r, p, f1, f2, n)) in &means {
            let n = *n as f64;
            md.push_str(&format!(
                "| {m} | {c} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
                r / n,
                p / n,
                f1 / n,
                f2 / n
            ));
        }
        md.push('\n');
    }

    let acc = root.join("mine").join("accuracy.csv");
    if acc.exists() {
        found = true;
        ctx.record_input(&acc)?;
        md.push_str("## Requires mining\n\n");
        md.push_str(&csv_as_markdown(&acc)?);
        md.push('\n');
    }

    let shares = root.join("nrp").join("shares.csv");
    if shares.exists() {
        found = true;
        ctx.record_input(&shares)?;
        md.push_str("## Share of reference front (%)\n\n");
        md.push_str(&csv_as_markdown(&shares)?);
        md.push('\n');
    }

    if !found {
        return Err(Error::Config(format!(
            "nothing to report under {}; run another command first",
            root.display()
        )));
    }
    let out = ctx.out_dir("report")?;
    let path = out.join("report.md");
    std::fs::write(&path, md).map_err(|e| Error::io(&path, e))?;
    ctx.write_manifest(&out, "report", serde_json::Value::Null)
}

fn csv_as_markdown(path: &Path) -> Result<String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let mut s = format!("| {} |\n|{}\n", headers.iter().collect::<Vec<_>>().join(" | "), "---|".repeat(headers.len()));
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        s.push_str(&format!("| {} |\n", rec.iter().collect::<Vec<_>>().join(" | ")));
    }
    Ok(s)
}
