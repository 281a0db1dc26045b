//! Mining "requires" pairs with a chat model, and deriving per-requirement
//! dependency values (D-values) from a pair set.
//!
//! A pair `a -> b` means `a` cannot be released without `b`. The baseline
//! prompt lists every requirement at once; cluster prompts list one
//! requirement cluster each. Their answers are merged into a combined set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{normalize_id, Requirement};
use crate::error::{Error, Result};
use crate::evalharness::{prf, Prf};
use crate::topicmodel::ClusterSet;

/// Prompt sent to the model; `{requirements}` is replaced by one `id: text`
/// line per requirement.
pub const PROMPT_TEMPLATE: &str = "A “requires” relation between two requirements (req_x and req_y) is defined as: \
req x requires req y for the purpose of software release, but not vice versa. Identify and output all the \
“requires” pairs from the requirements provided below, using the format: req_x --> req_y.\n{requirements}";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequiresPair {
    pub from: String,
    pub to: String,
}

impl RequiresPair {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        RequiresPair {
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn reversed(&self) -> RequiresPair {
        RequiresPair::new(self.to.clone(), self.from.clone())
    }
}

impl std::fmt::Display for RequiresPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} --> {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Baseline,
    Cluster(usize),
    Combined,
    Gold,
    Imported,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiresSet {
    pub provenance: Provenance,
    pairs: BTreeSet<RequiresPair>,
}

impl RequiresSet {
    pub fn new(provenance: Provenance) -> Self {
        RequiresSet {
            provenance,
            pairs: BTreeSet::new(),
        }
    }

    /// Self-loops are rejected; returns whether the pair was new.
    pub fn insert(&mut self, pair: RequiresPair) -> Result<bool> {
        if pair.from == pair.to {
            return Err(Error::Integrity(format!("self-loop on `{}`", pair.from)));
        }
        Ok(self.pairs.insert(pair))
    }

    pub fn from_pairs(provenance: Provenance, pairs: impl IntoIterator<Item = RequiresPair>) -> Result<Self> {
        let mut s = RequiresSet::new(provenance);
        for p in pairs {
            s.insert(p)?;
        }
        Ok(s)
    }

    pub fn pairs(&self) -> &BTreeSet<RequiresPair> {
        &self.pairs
    }

    pub fn contains(&self, pair: &RequiresPair) -> bool {
        self.pairs.contains(pair)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RequiresPair> {
        self.pairs.iter()
    }

    /// Pairs present in both directions, each reported once as `(a, b)` with `a < b`.
    pub fn bidirectional(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .filter(|p| p.from < p.to && self.pairs.contains(&p.reversed()))
            .map(|p| (p.from.clone(), p.to.clone()))
            .collect()
    }

    /// Loads a `from_id,to_id` CSV; ids are normalized (`r_1` becomes `r1`).
    pub fn load(path: &Path, provenance: Provenance) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            from_id: String,
            to_id: String,
        }
        let rows: Vec<Row> = crate::corpus::read_records(path)?;
        let mut set = RequiresSet::new(provenance);
        for (i, r) in rows.into_iter().enumerate() {
            set.insert(RequiresPair::new(normalize_id(&r.from_id), normalize_id(&r.to_id)))
                .map_err(|e| Error::parse(path.display().to_string(), i + 1, e.to_string()))?;
        }
        Ok(set)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("writing pairs: {e}"));
        w.write_record(["from_id", "to_id"]).map_err(err)?;
        for p in &self.pairs {
            w.write_record([&p.from, &p.to]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing pairs: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Fills the prompt template with `id: text` lines in the given order.
pub fn build_prompt(requirements: &[Requirement]) -> Result<String> {
    if requirements.is_empty() {
        return Err(Error::Data("cannot build a prompt without requirements".into()));
    }
    let lines: Vec<String> = requirements.iter().map(|r| format!("{}: {}", r.id, r.text)).collect();
    Ok(PROMPT_TEMPLATE.replace("{requirements}", &lines.join("\n")))
}

/// One prompt per cluster, listing that cluster's members in benchmark order.
pub fn cluster_prompts(requirements: &[Requirement], clusters: &ClusterSet) -> Result<Vec<String>> {
    let by_id: HashMap<&str, &Requirement> = requirements.iter().map(|r| (r.id.as_str(), r)).collect();
    let order: HashMap<&str, usize> = requirements.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    clusters
        .clusters()
        .iter()
        .map(|c| {
            let mut members: Vec<&Requirement> = c
                .members
                .iter()
                .map(|m| {
                    by_id
                        .get(m.as_str())
                        .copied()
                        .ok_or_else(|| Error::Integrity(format!("cluster member `{m}` is not a known requirement")))
                })
                .collect::<Result<_>>()?;
            members.sort_by_key(|r| order[r.id.as_str()]);
            build_prompt(&members.into_iter().cloned().collect::<Vec<_>>())
        })
        .collect()
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// What the parser kept and dropped from one response.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ParseReport {
    pub matched_lines: usize,
    pub unknown_ids: Vec<String>,
    pub self_loops: usize,
    pub duplicates: usize,
}

fn arrow_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^\s*(?:[-*•+]\s+|\d+[.)]\s*)?[`*_]*([A-Za-z][A-Za-z0-9_-]*?)[`*_:]*\s*(?:-->|->|→|⟶|=>)\s*[`*_]*([A-Za-z][A-Za-z0-9_-]*)",
        )
        .unwrap()
    })
}

/// Extracts `a --> b` lines (also `->` and `→`, optionally behind list
/// markers). Ids are matched case-insensitively against `valid_ids`; unknown
/// ids and self-loops are dropped with a warning.
pub fn parse_requires(response: &str, valid_ids: &BTreeSet<String>, provenance: Provenance) -> (RequiresSet, ParseReport) {
    let lookup: HashMap<String, &String> = valid_ids.iter().map(|id| (id.to_lowercase(), id)).collect();
    let resolve = |raw: &str| lookup.get(&normalize_id(raw).to_lowercase()).map(|s| (*s).clone());
    let mut set = RequiresSet::new(provenance);
    let mut report = ParseReport::default();
    for line in response.lines() {
        let Some(c) = arrow_line().captures(line) else { continue };
        report.matched_lines += 1;
        let (from, to) = match (resolve(&c[1]), resolve(&c[2])) {
            (Some(f), Some(t)) => (f, t),
            (f, t) => {
                for (raw, res) in [(&c[1], f), (&c[2], t)] {
                    if res.is_none() {
                        warn!("dropping pair with unknown requirement id `{raw}`");
                        report.unknown_ids.push(raw.to_string());
                    }
                }
                continue;
            }
        };
        if from == to {
            warn!("dropping self-loop `{from} --> {to}`");
            report.self_loops += 1;
            continue;
        }
        if !set.insert(RequiresPair::new(from, to)).expect("self-loops filtered above") {
            report.duplicates += 1;
        }
    }
    if report.matched_lines == 0 && !response.trim().is_empty() {
        warn!("response contained no parsable `a --> b` lines");
    }
    (set, report)
}

/// Union of the baseline and every cluster result.
pub fn aggregate(baseline: &RequiresSet, clusters: &[RequiresSet]) -> RequiresSet {
    let mut out = RequiresSet::new(Provenance::Combined);
    out.pairs.extend(baseline.pairs.iter().cloned());
    for c in clusters {
        out.pairs.extend(c.pairs.iter().cloned());
    }
    out
}

/// Recall/precision/F-scores with directed pairs as items.
pub fn evaluate_pairs(predicted: &RequiresSet, gold: &RequiresSet) -> Prf {
    prf(predicted.pairs.iter(), &gold.pairs)
}

/// A source of chat completions. Each call is an independent conversation.
pub trait ChatClient: Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub prompt_sha256: String,
    pub response_text: String,
}

/// Replays recorded responses keyed by the SHA-256 of the prompt.
#[derive(Debug, Clone, Default)]
pub struct FixtureClient {
    responses: HashMap<String, String>,
}

impl FixtureClient {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        FixtureClient {
            responses: entries
                .into_iter()
                .map(|e| (e.prompt_sha256.to_lowercase(), e.response_text))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<FixtureEntry> =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
        Ok(FixtureClient::new(entries))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatClient for FixtureClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let key = prompt_sha256(prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::Service(format!("no recorded response for prompt {key}")))
    }
}

/// A prompt, its response (if the call succeeded) and what was parsed from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
    pub pairs: Vec<RequiresPair>,
    pub report: ParseReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningOutcome {
    pub baseline: RequiresSet,
    pub clusters: Vec<RequiresSet>,
    pub combined: RequiresSet,
    /// Index 0 is the baseline prompt, then one per cluster.
    pub exchanges: Vec<Exchange>,
}

impl MiningOutcome {
    /// Distinct pairs found by the cluster prompts together.
    pub fn cluster_union(&self) -> RequiresSet {
        let mut out = aggregate(&RequiresSet::new(Provenance::Combined), &self.clusters);
        out.provenance = Provenance::Cluster(usize::MAX);
        out
    }

    pub fn failures(&self) -> usize {
        self.exchanges.iter().filter(|e| e.response.is_none()).count()
    }
}

/// Runs `f` over `items` on at most `limit` threads, keeping input order.
fn bounded_map<T: Sync, R: Send>(items: &[T], limit: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..limit.max(1).min(items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Sends the baseline prompt and one prompt per cluster, with at most
/// `max_in_flight` requests outstanding. Failed calls are recorded and
/// contribute no pairs.
pub fn mine(
    client: &dyn ChatClient,
    requirements: &[Requirement],
    clusters: &ClusterSet,
    max_in_flight: usize,
) -> Result<MiningOutcome> {
    let valid: BTreeSet<String> = requirements.iter().map(|r| r.id.clone()).collect();
    let mut prompts = vec![build_prompt(requirements)?];
    prompts.extend(cluster_prompts(requirements, clusters)?);
    let responses = bounded_map(&prompts, max_in_flight, |p| client.complete(p));

    let mut sets = Vec::new();
    let mut exchanges = Vec::new();
    for (i, (prompt, response)) in prompts.into_iter().zip(responses).enumerate() {
        let provenance = if i == 0 { Provenance::Baseline } else { Provenance::Cluster(i - 1) };
        let (set, report, response, error) = match response {
            Ok(text) => {
                let (set, report) = parse_requires(&text, &valid, provenance);
                (set, report, Some(text), None)
            }
            Err(e) => {
                warn!("prompt {i} failed: {e}");
                (RequiresSet::new(provenance), ParseReport::default(), None, Some(e.to_string()))
            }
        };
        exchanges.push(Exchange {
            prompt,
            response,
            error,
            pairs: set.iter().cloned().collect(),
            report,
        });
        sets.push(set);
    }
    let baseline = sets.remove(0);
    let combined = aggregate(&baseline, &sets);
    for (a, b) in combined.bidirectional() {
        warn!("both `{a} --> {b}` and `{b} --> {a}` were found; keeping both");
    }
    Ok(MiningOutcome {
        baseline,
        clusters: sets,
        combined,
        exchanges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DValueVariant {
    Raw,
    Log,
    Inverse,
    Power,
    Zscore,
}

impl DValueVariant {
    pub const ALL: [DValueVariant; 5] = [
        DValueVariant::Raw,
        DValueVariant::Log,
        DValueVariant::Inverse,
        DValueVariant::Power,
        DValueVariant::Zscore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DValueVariant::Raw => "raw",
            DValueVariant::Log => "log",
            DValueVariant::Inverse => "inverse",
            DValueVariant::Power => "power",
            DValueVariant::Zscore => "zscore",
        }
    }
}

impl std::fmt::Display for DValueVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DValueVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DValueVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown D-value variant `{s}` (expected raw, log, inverse, power or zscore)")))
    }
}

/// Per-requirement dependency values, in requirement order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DValueVector {
    pub variant: DValueVariant,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
    /// Right-hand-side occurrence counts behind the raw values.
    pub counts: Vec<usize>,
    pub total_pairs: usize,
}

impl DValueVector {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|i| i == id).map(|p| self.values[p])
    }

    pub fn as_map(&self) -> BTreeMap<&str, f64> {
        self.ids.iter().map(String::as_str).zip(self.values.iter().copied()).collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("writing D-values: {e}"));
        w.write_record(["requirement_id", "variant", "count", "dvalue"]).map_err(err)?;
        for ((id, v), c) in self.ids.iter().zip(&self.values).zip(&self.counts) {
            w.write_record([id.clone(), self.variant.to_string(), c.to_string(), v.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing D-values: {e}")))
    }
}

/// `D_i = count_i / |pairs|`, where `count_i` is the number of pairs whose
/// right-hand side is requirement `i`.
pub fn dvalue<S: AsRef<str>>(pairs: &RequiresSet, requirement_ids: &[S]) -> Result<DValueVector> {
    let ids: Vec<String> = requirement_ids.iter().map(|s| s.as_ref().to_string()).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut counts = vec![0usize; ids.len()];
    for p in pairs.iter() {
        for id in [&p.from, &p.to] {
            if !index.contains_key(id.as_str()) {
                return Err(Error::Integrity(format!("pair `{p}` mentions unknown requirement `{id}`")));
            }
        }
        counts[index[p.to.as_str()]] += 1;
    }
    let total = pairs.len();
    if total == 0 {
        warn!("no requires pairs; all D-values are 0");
    }
    let values = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();
    Ok(DValueVector {
        variant: DValueVariant::Raw,
        ids,
        values,
        counts,
        total_pairs: total,
    })
}

/// Transforms raw D-values. The z-score variant uses the population standard
/// deviation and is shifted so its minimum is 0; a constant vector gives all
/// zeros.
pub fn dvalue_variant(raw: &DValueVector, variant: DValueVariant) -> Result<DValueVector> {
    if raw.variant != DValueVariant::Raw {
        return Err(Error::Config(format!("variants are derived from raw D-values, got `{}`", raw.variant)));
    }
    let values = match variant {
        DValueVariant::Raw => raw.values.clone(),
        DValueVariant::Log => raw.values.iter().map(|d| d.ln_1p()).collect(),
        DValueVariant::Inverse => raw.values.iter().map(|d| 1.0 - d).collect(),
        DValueVariant::Power => raw.values.iter().map(|d| d.sqrt()).collect(),
        DValueVariant::Zscore => {
            let n = raw.values.len().max(1) as f64;
            let mean = raw.values.iter().sum::<f64>() / n;
            let sd = (raw.values.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd == 0.0 {
                warn!("D-values have zero variance; z-scores set to 0");
                vec![0.0; raw.values.len()]
            } else {
                let z: Vec<f64> = raw.values.iter().map(|d| (d - mean) / sd).collect();
                let min = z.iter().copied().fold(f64::INFINITY, f64::min);
                z.iter().map(|v| v - min).collect()
            }
        }
    };
    Ok(DValueVector {
        variant,
        values,
        ..raw.clone()
    })
}
