//! LDA topic model over review text, dominant-topic clustering of
//! requirements, and per-cluster coherence.
//!
//! The model is trained by collapsed Gibbs sampling. One pass is one full
//! sweep over every token of the corpus. Requirements are assigned to the topic
//! with the highest posterior weight given their bag of words; the posterior is
//! obtained by folding the requirement into the fitted model with a fixed
//! number of EM steps, which keeps assignment deterministic.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Requirement;
use crate::error::{Error, Result};
use crate::textkit::{cosine, dense_cosine, Normalizer, SparseVector, TokenSequence, Vocabulary};

pub const DEFAULT_TOPICS: usize = 20;
pub const DEFAULT_PASSES: usize = 15;
pub const DEFAULT_BETA: f64 = 0.01;
const FOLD_IN_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    pub passes: usize,
    pub seed: u64,
    /// Symmetric document-topic prior; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: DEFAULT_TOPICS,
            passes: DEFAULT_PASSES,
            seed: 0,
            alpha: None,
            beta: DEFAULT_BETA,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TopicModel {
    topics: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    passes: usize,
    vocabulary: Vocabulary,
    phi: Vec<Vec<f64>>,
    perplexity_trace: Vec<f64>,
}

/// Serialized form of a fitted model, with phi rounded to 10 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub passes: usize,
    pub vocabulary: Vec<String>,
    pub phi: Vec<Vec<f64>>,
}

fn round10(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

impl TopicModel {
    /// Builds a model from explicit topic-word rows. Each row must be a
    /// distribution over `vocabulary`.
    pub fn from_phi(vocabulary: Vocabulary, phi: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::Config("topic model needs at least one topic".into()));
        }
        for row in &phi {
            if row.len() != vocabulary.len() {
                return Err(Error::Config("phi row length differs from vocabulary size".into()));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
                return Err(Error::Config("phi rows must be probability distributions".into()));
            }
        }
        Ok(TopicModel {
            topics: phi.len(),
            alpha,
            beta: 0.0,
            seed: 0,
            passes: 0,
            vocabulary,
            phi,
            perplexity_trace: Vec::new(),
        })
    }

    pub fn topics(&self) -> usize {
        self.topics
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// Training perplexity after initialization, then after each pass.
    pub fn perplexity_trace(&self) -> &[f64] {
        &self.perplexity_trace
    }

    pub fn top_words(&self, topic: usize, n: usize) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.vocabulary.len()).collect();
        idx.sort_by(|&a, &b| self.phi[topic][b].total_cmp(&self.phi[topic][a]).then(a.cmp(&b)));
        idx.into_iter().take(n).map(|i| self.vocabulary.term(i)).collect()
    }

    /// Topic distribution of a new document, or `None` if none of its tokens
    /// are in the vocabulary.
    pub fn infer(&self, doc: &TokenSequence) -> Option<Vec<f64>> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc.tokens() {
            if let Some(i) = self.vocabulary.get(t) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        if counts.is_empty() {
            return None;
        }
        let k = self.topics;
        let total: f64 = counts.values().sum();
        let mut theta = vec![1.0 / k as f64; k];
        let mut expected = vec![0.0; k];
        for _ in 0..FOLD_IN_ITERATIONS {
            expected.iter_mut().for_each(|e| *e = 0.0);
            for (&w, &c) in &counts {
                let z: f64 = (0..k).map(|t| theta[t] * self.phi[t][w]).sum();
                if z <= 0.0 {
                    continue;
                }
                for t in 0..k {
                    expected[t] += c * theta[t] * self.phi[t][w] / z;
                }
            }
            let denom = total + k as f64 * self.alpha;
            for t in 0..k {
                theta[t] = (expected[t] + self.alpha) / denom;
            }
        }
        Some(theta)
    }

    pub fn dominant_topic(&self, doc: &TokenSequence) -> Option<usize> {
        self.infer(doc).map(|theta| argmax(&theta))
    }

    pub fn dump(&self) -> ModelDump {
        ModelDump {
            k: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            passes: self.passes,
            vocabulary: self.vocabulary.terms().to_vec(),
            phi: self.phi.iter().map(|r| r.iter().map(|p| round10(*p)).collect()).collect(),
        }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

struct GibbsState {
    docs: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
    alpha: f64,
    beta: f64,
    vocab: usize,
}

impl GibbsState {
    fn phi(&self) -> Vec<Vec<f64>> {
        let vb = self.vocab as f64 * self.beta;
        self.topic_word
            .iter()
            .zip(&self.topic_total)
            .map(|(row, &tot)| row.iter().map(|&c| (c as f64 + self.beta) / (tot as f64 + vb)).collect())
            .collect()
    }

    fn perplexity(&self) -> f64 {
        let phi = self.phi();
        let k = self.topic_total.len();
        let (mut loglik, mut tokens) = (0.0, 0usize);
        for (d, doc) in self.docs.iter().enumerate() {
            let denom = doc.len() as f64 + k as f64 * self.alpha;
            for &w in doc {
                let p: f64 = (0..k)
                    .map(|t| (self.doc_topic[d][t] as f64 + self.alpha) / denom * phi[t][w])
                    .sum();
                loglik += p.ln();
                tokens += 1;
            }
        }
        if tokens == 0 {
            return f64::NAN;
        }
        (-loglik / tokens as f64).exp()
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng, weights: &mut [f64]) {
        let k = self.topic_total.len();
        let vb = self.vocab as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.z[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for (t, slot) in weights.iter_mut().enumerate().take(k) {
                    total += (self.doc_topic[d][t] as f64 + self.alpha) * (self.topic_word[t][w] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vb);
                    *slot = total;
                }
                let u = rng.random::<f64>() * total;
                let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.z[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }
}

/// Fits LDA by collapsed Gibbs sampling. Identical inputs and seed give a
/// bit-identical model.
pub fn fit_lda(corpus: &[TokenSequence], config: &LdaConfig) -> Result<TopicModel> {
    if config.topics < 2 {
        return Err(Error::Config("LDA needs at least two topics".into()));
    }
    if config.passes < 1 {
        return Err(Error::Config("LDA needs at least one pass".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Config("LDA corpus is empty".into()));
    }
    let vocabulary = Vocabulary::from_corpus(corpus);
    if vocabulary.is_empty() {
        return Err(Error::Config("LDA vocabulary is empty after normalization".into()));
    }
    let k = config.topics;
    let alpha = config.alpha();
    if !(alpha > 0.0 && config.beta > 0.0) {
        return Err(Error::Config("Dirichlet priors must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let docs: Vec<Vec<usize>> = corpus
        .iter()
        .map(|d| d.tokens().iter().map(|t| vocabulary.get(t).expect("vocabulary built from corpus")).collect())
        .collect();
    let mut state = GibbsState {
        z: Vec::with_capacity(docs.len()),
        doc_topic: vec![vec![0; k]; docs.len()],
        topic_word: vec![vec![0; vocabulary.len()]; k],
        topic_total: vec![0; k],
        alpha,
        beta: config.beta,
        vocab: vocabulary.len(),
        docs,
    };
    for d in 0..state.docs.len() {
        let mut zd = Vec::with_capacity(state.docs[d].len());
        for &w in &state.docs[d] {
            let t = rng.random_range(0..k);
            zd.push(t);
            state.doc_topic[d][t] += 1;
            state.topic_word[t][w] += 1;
            state.topic_total[t] += 1;
        }
        state.z.push(zd);
    }

    let mut trace = vec![state.perplexity()];
    let mut weights = vec![0.0; k];
    for _ in 0..config.passes {
        state.sweep(&mut rng, &mut weights);
        trace.push(state.perplexity());
    }

    Ok(TopicModel {
        topics: k,
        alpha,
        beta: config.beta,
        seed: config.seed,
        passes: config.passes,
        phi: state.phi(),
        vocabulary,
        perplexity_trace: trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLabel {
    Topic(usize),
    /// Requirements with no in-vocabulary token (or no embedding).
    Fallback,
}

impl std::fmt::Display for ClusterLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClusterLabel::Topic(t) => write!(f, "topic{t}"),
            ClusterLabel::Fallback => f.write_str("fallback"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementCluster {
    pub label: ClusterLabel,
    pub members: Vec<String>,
    /// Coherence factor in [0, 1]; 1 until [`ClusterSet::assign_coherence`] runs.
    pub coherence: f64,
}

impl RequirementCluster {
    pub fn new(label: ClusterLabel, members: Vec<String>) -> Self {
        RequirementCluster {
            label,
            members,
            coherence: 1.0,
        }
    }

    pub fn is_fallback(&self) -> bool {
        self.label == ClusterLabel::Fallback
    }
}

/// A partition of an instance's requirements into clusters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterSet {
    clusters: Vec<RequirementCluster>,
}

impl ClusterSet {
    /// Validates that no requirement appears twice and that clusters are non-empty.
    pub fn new(clusters: Vec<RequirementCluster>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &clusters {
            if c.members.is_empty() {
                return Err(Error::Integrity(format!("cluster {} has no members", c.label)));
            }
            for m in &c.members {
                if !seen.insert(m.as_str()) {
                    return Err(Error::Integrity(format!("requirement `{m}` is in more than one cluster")));
                }
            }
        }
        Ok(ClusterSet { clusters })
    }

    /// Every requirement in its own cluster.
    pub fn singletons<S: AsRef<str>>(ids: &[S]) -> Self {
        ClusterSet {
            clusters: ids
                .iter()
                .enumerate()
                .map(|(i, id)| RequirementCluster::new(ClusterLabel::Topic(i), vec![id.as_ref().to_string()]))
                .collect(),
        }
    }

    /// Builds clusters from `(requirement id, cluster label)` pairs, keeping
    /// first-seen order of labels and members.
    pub fn from_assignments(assignments: &[(String, String)]) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut members: HashMap<String, Vec<String>> = HashMap::new();
        for (id, label) in assignments {
            if !members.contains_key(label) {
                order.push(label.clone());
            }
            members.entry(label.clone()).or_default().push(id.clone());
        }
        ClusterSet::new(
            order
                .into_iter()
                .enumerate()
                .map(|(i, l)| RequirementCluster::new(ClusterLabel::Topic(i), members.remove(&l).unwrap()))
                .collect(),
        )
    }

    pub fn clusters(&self) -> &[RequirementCluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn cluster_of(&self, id: &str) -> Option<&RequirementCluster> {
        self.clusters.iter().find(|c| c.members.iter().any(|m| m == id))
    }

    pub fn flagged(&self) -> impl Iterator<Item = &str> {
        self.clusters
            .iter()
            .filter(|c| c.is_fallback())
            .flat_map(|c| c.members.iter().map(String::as_str))
    }

    /// Computes each cluster's coherence with `sim`. The fallback cluster is
    /// not a topical group and keeps coherence 1.
    pub fn assign_coherence(&mut self, sim: impl Fn(&str, &str) -> f64) {
        for c in &mut self.clusters {
            c.coherence = if c.is_fallback() {
                1.0
            } else {
                coherence_with(&c.members, &sim)
            };
        }
    }
}

/// Assigns every requirement to its dominant topic. Requirements whose tokens
/// are all out of vocabulary go to a fallback cluster and are logged.
pub fn cluster_requirements(model: &TopicModel, requirements: &[Requirement], normalizer: &Normalizer) -> ClusterSet {
    let mut by_topic: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut fallback = Vec::new();
    for r in requirements {
        match model.dominant_topic(&normalizer.normalize(&r.text)) {
            Some(t) => by_topic.entry(t).or_default().push(r.id.clone()),
            None => {
                warn!("requirement `{}` has no in-vocabulary tokens; using fallback cluster", r.id);
                fallback.push(r.id.clone());
            }
        }
    }
    let mut clusters: Vec<_> = by_topic
        .into_iter()
        .map(|(t, m)| RequirementCluster::new(ClusterLabel::Topic(t), m))
        .collect();
    if !fallback.is_empty() {
        clusters.push(RequirementCluster::new(ClusterLabel::Fallback, fallback));
    }
    ClusterSet { clusters }
}

/// `min(1, mean pairwise similarity)` over unordered member pairs, floored at
/// 0; a singleton cluster has coherence 1.
pub fn coherence_with<S: AsRef<str>>(members: &[S], sim: impl Fn(&str, &str) -> f64) -> f64 {
    if members.len() < 2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            sum += sim(members[i].as_ref(), members[j].as_ref());
            pairs += 1;
        }
    }
    (sum / pairs as f64).clamp(0.0, 1.0)
}

/// Coherence over TF-IDF (or any sparse) requirement vectors. Members without
/// a vector count as zero vectors.
pub fn coherence(cluster: &RequirementCluster, vectors: &HashMap<String, SparseVector>) -> f64 {
    let empty = SparseVector::new();
    coherence_with(&cluster.members, |a, b| {
        cosine(vectors.get(a).unwrap_or(&empty), vectors.get(b).unwrap_or(&empty))
    })
}

/// Dense per-item embeddings loaded from `id,dim0..dimD` CSV files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dims: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(vectors: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let dims = vectors.values().next().map_or(0, Vec::len);
        if vectors.values().any(|v| v.len() != dims) {
            return Err(Error::Data("embedding rows differ in dimension".into()));
        }
        Ok(EmbeddingTable { dims, vectors })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader.headers().map_err(|e| Error::parse(&name, 0, e.to_string()))?.clone();
        if headers.get(0) != Some("id") || headers.len() < 2 {
            return Err(Error::parse(&name, 0, "header must be id,dim0..dimD"));
        }
        let mut vectors = BTreeMap::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(&name, i + 1, e.to_string()))?;
            let v = rec
                .iter()
                .skip(1)
                .map(|x| x.parse::<f64>().map_err(|_| Error::parse(&name, i + 1, format!("`{x}` is not a number"))))
                .collect::<Result<Vec<_>>>()?;
            if vectors.insert(rec[0].to_string(), v).is_some() {
                return Err(Error::Integrity(format!("duplicate embedding id `{}`", &rec[0])));
            }
        }
        EmbeddingTable::new(vectors)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        match (self.get(a), self.get(b)) {
            (Some(u), Some(v)) => dense_cosine(u, v),
            _ => 0.0,
        }
    }
}

/// Embedding-backed clustering: message embeddings are grouped into `topics`
/// centroids by seeded spherical k-means, and each requirement joins the
/// centroid with the highest cosine similarity.
pub fn cluster_by_embeddings(
    requirement_ids: &[String],
    requirements: &EmbeddingTable,
    messages: &EmbeddingTable,
    topics: usize,
    seed: u64,
) -> Result<ClusterSet> {
    let points: Vec<&[f64]> = messages.vectors.values().map(Vec::as_slice).collect();
    if points.is_empty() || topics == 0 {
        return Err(Error::Config("embedding clustering needs messages and at least one topic".into()));
    }
    if requirements.dims() != messages.dims() && !requirements.vectors.is_empty() {
        return Err(Error::Data("requirement and message embeddings differ in dimension".into()));
    }
    let k = topics.min(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..points.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut centroids: Vec<Vec<f64>> = idx[..k].iter().map(|&i| unit(points[i])).collect();
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (p, a) in points.iter().zip(assign.iter_mut()) {
            let best = nearest(&centroids, p);
            if best != *a {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut sum = vec![0.0; messages.dims()];
            let mut any = false;
            for (p, _) in points.iter().zip(&assign).filter(|(_, a)| **a == c) {
                for (s, x) in sum.iter_mut().zip(unit(p)) {
                    *s += x;
                }
                any = true;
            }
            if any {
                *centroid = unit(&sum);
            }
        }
    }

    let mut by_topic: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut fallback = Vec::new();
    for id in requirement_ids {
        match requirements.get(id) {
            Some(v) => by_topic.entry(nearest(&centroids, v)).or_default().push(id.clone()),
            None => {
                warn!("requirement `{id}` has no embedding; using fallback cluster");
                fallback.push(id.clone());
            }
        }
    }
    let mut clusters: Vec<_> = by_topic
        .into_iter()
        .map(|(t, m)| RequirementCluster::new(ClusterLabel::Topic(t), m))
        .collect();
    if !fallback.is_empty() {
        clusters.push(RequirementCluster::new(ClusterLabel::Fallback, fallback));
    }
    ClusterSet::new(clusters)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> usize {
    let sims: Vec<f64> = centroids.iter().map(|c| dense_cosine(c, v)).collect();
    argmax(&sims)
}
