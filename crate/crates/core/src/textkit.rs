//! Tokenization, TF-IDF vectors and the similarity measures used for
//! feedback association and cluster coherence.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The shipped English stopword list, one token per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords_en.txt");

/// Lowercase word tokens with stopwords and punctuation removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_text(&self) -> String {
        self.0.join(" ")
    }

    pub fn term_set(&self) -> BTreeSet<&str> {
        self.0.iter().map(String::as_str).collect()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(
            iter.into_iter()
                .map(Into::into)
                .filter(|t: &String| t.chars().any(char::is_alphanumeric))
                .collect(),
        )
    }
}

pub struct Normalizer {
    stopwords: HashSet<String>,
    stemmer: Option<Stemmer>,
}

impl std::fmt::Debug for Normalizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Normalizer")
            .field("stopwords", &self.stopwords.len())
            .field("stem", &self.stemmer.is_some())
            .finish()
    }
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::with_stopwords(parse_stopwords(DEFAULT_STOPWORDS))
    }
}

fn parse_stopwords(list: &str) -> HashSet<String> {
    list.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

impl Normalizer {
    pub fn with_stopwords(stopwords: HashSet<String>) -> Self {
        Normalizer {
            stopwords,
            stemmer: None,
        }
    }

    pub fn from_stopword_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Normalizer::with_stopwords(parse_stopwords(&text)))
    }

    /// Enables Porter stemming of every surviving token.
    pub fn stemming(mut self, enabled: bool) -> Self {
        self.stemmer = enabled.then(|| Stemmer::create(Algorithm::English));
        self
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn normalize(&self, text: &str) -> TokenSequence {
        let lower = text.to_lowercase();
        let tokens = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty() && !self.stopwords.contains(*t))
            .map(|t| match &self.stemmer {
                Some(s) => s.stem(t).into_owned(),
                None => t.to_string(),
            });
        TokenSequence(tokens.collect())
    }
}

/// Normalizes with the shipped stopword list and no stemming.
pub fn normalize(text: &str) -> TokenSequence {
    static DEFAULT: std::sync::OnceLock<Normalizer> = std::sync::OnceLock::new();
    DEFAULT.get_or_init(Normalizer::default).normalize(text)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary whose indices follow the sorted term order.
    pub fn from_corpus(corpus: &[TokenSequence]) -> Self {
        let set: BTreeSet<&str> = corpus.iter().flat_map(|d| d.0.iter().map(String::as_str)).collect();
        Vocabulary::from_terms(set.into_iter().map(str::to_string).collect())
    }

    pub fn from_terms(terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, index }
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Non-negative sparse weights keyed by vocabulary index; zeros are never stored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: BTreeMap<usize, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        SparseVector::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut v = SparseVector::new();
        for (i, w) in pairs {
            v.add(i, w);
        }
        v
    }

    pub fn add(&mut self, index: usize, weight: f64) {
        let e = self.entries.entry(index).or_insert(0.0);
        *e += weight;
        if *e == 0.0 {
            self.entries.remove(&index);
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.get(&index).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&i, &w)| (i, w))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (small, large) = if self.nnz() <= other.nnz() {
            (self, other)
        } else {
            (other, self)
        };
        small.entries.iter().map(|(i, w)| w * large.get(*i)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    TfIdf,
    RawCount,
}

/// A fitted TF-IDF transform: `weight(t, d) = tf(t, d) * ln(N / df(t))`.
#[derive(Debug, Clone)]
pub struct TfIdf {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
    weighting: Weighting,
}

impl TfIdf {
    pub fn fit(corpus: &[TokenSequence], weighting: Weighting) -> Self {
        let vocabulary = Vocabulary::from_corpus(corpus);
        let mut df = vec![0usize; vocabulary.len()];
        for doc in corpus {
            for term in doc.term_set() {
                df[vocabulary.get(term).expect("term from corpus")] += 1;
            }
        }
        let n = corpus.len() as f64;
        let idf = df.iter().map(|&d| (n / d as f64).ln()).collect();
        TfIdf {
            vocabulary,
            idf,
            weighting,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|i| self.idf[i])
    }

    /// Out-of-vocabulary terms are ignored.
    pub fn transform(&self, doc: &TokenSequence) -> SparseVector {
        let mut v = SparseVector::new();
        for t in &doc.0 {
            if let Some(i) = self.vocabulary.get(t) {
                let w = match self.weighting {
                    Weighting::TfIdf => self.idf[i],
                    Weighting::RawCount => 1.0,
                };
                v.add(i, w);
            }
        }
        v
    }
}

pub fn tfidf(corpus: &[TokenSequence]) -> (Vocabulary, Vec<SparseVector>) {
    let model = TfIdf::fit(corpus, Weighting::TfIdf);
    let vectors = corpus.iter().map(|d| model.transform(d)).collect();
    (model.vocabulary, vectors)
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (u.dot(v) / denom).clamp(0.0, 1.0)
}

/// Cosine similarity of dense vectors; 0 when either is zero. Not clamped,
/// since embeddings may contain negative components.
pub fn dense_cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// Jaccard similarity of the token sets; defined as 0 when both are empty.
pub fn jaccard(a: &TokenSequence, b: &TokenSequence) -> f64 {
    let (sa, sb) = (a.term_set(), b.term_set());
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}
