//! Per-message feedback properties: negative sentiment, positive sentiment
//! and feature-request intention.
//!
//! Messages are split into sentences and each sentence is scored by a
//! pluggable scorer. `neg` averages the scores of negative sentences only and
//! `pos` those of positive sentences only; a message with no sentence of a
//! polarity gets 0 for it. `int` averages per-sentence intent over all
//! sentences.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use log::warn;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::FeedbackMessage;
use crate::error::{Error, Result};

pub const DEFAULT_LEXICON: &str = include_str!("../resources/valence_lexicon.txt");

/// Normalization constant for summed valence, `|s| / sqrt(s^2 + C)`.
const VALENCE_NORM: f64 = 15.0;
/// Scale applied to a valence that follows a negator.
const NEGATION_SCALE: f64 = -0.74;

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "etc.", "vs.", "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "approx.", "no.", "fig.", "inc.",
    "ltd.", "jr.", "sr.", "a.m.", "p.m.", "u.s.",
];

/// Splits on terminal punctuation followed by whitespace or end of text, and on
/// line breaks. A period closing a known abbreviation does not end a sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let push = |from: usize, to: usize, out: &mut Vec<String>| {
        let s: String = chars[from..to].iter().collect();
        let s = s.trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            push(start, i, &mut out);
            start = i + 1;
            i += 1;
            continue;
        }
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '.' | '!' | '?' | '"' | '\'' | ')' | '”' | '’') {
                end += 1;
            }
            let at_gap = end == chars.len() || chars[end].is_whitespace();
            if at_gap && !(c == '.' && closes_abbreviation(&chars[start..end])) {
                push(start, end, &mut out);
                start = end;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    push(start, chars.len(), &mut out);
    out
}

fn closes_abbreviation(span: &[char]) -> bool {
    let word_start = span.iter().rposition(|c| c.is_whitespace()).map_or(0, |p| p + 1);
    let word: String = span[word_start..].iter().collect::<String>().to_lowercase();
    let word = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    ABBREVIATIONS.contains(&word)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

impl std::str::FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" => Ok(Polarity::Negative),
            "neutral" | "neu" => Ok(Polarity::Neutral),
            "positive" | "pos" => Ok(Polarity::Positive),
            other => Err(Error::Data(format!("unknown polarity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentenceSentiment {
    pub polarity: Polarity,
    /// Strength of the sentence's polarity in [0, 1]; ignored when neutral.
    pub score: f64,
}

impl SentenceSentiment {
    pub const NEUTRAL: SentenceSentiment = SentenceSentiment {
        polarity: Polarity::Neutral,
        score: 0.0,
    };
}

/// Identifies a sentence to a scorer, so file-backed scorers can look it up.
#[derive(Debug, Clone, Copy)]
pub struct SentenceRef<'a> {
    pub message_id: &'a str,
    pub index: usize,
    pub text: &'a str,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("{0}")]
pub struct ScorerError(pub String);

pub trait SentimentScorer: Sync {
    fn score(&self, sentence: &SentenceRef<'_>) -> std::result::Result<SentenceSentiment, ScorerError>;
}

pub trait IntentScorer: Sync {
    /// Likelihood in [0, 1] that the sentence requests a feature.
    fn intent(&self, sentence: &SentenceRef<'_>) -> std::result::Result<f64, ScorerError>;
}

/// One scored sentence of a message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SentenceScore {
    pub index: usize,
    pub polarity: Polarity,
    pub neg_score: f64,
    pub pos_score: f64,
    pub intent_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SentimentSummary {
    pub neg: f64,
    pub pos: f64,
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackProperties {
    pub message_id: String,
    pub neg: f64,
    pub pos: f64,
    pub int: f64,
    pub n: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl FeedbackProperties {
    pub fn sum(&self) -> f64 {
        self.neg + self.pos + self.int
    }
}

fn sentiment_of_sentences(message_id: &str, sentences: &[String], scorer: &dyn SentimentScorer) -> SentimentSummary {
    let (mut neg, mut pos) = (0.0, 0.0);
    let (mut n_neg, mut n_pos) = (0, 0);
    for (index, text) in sentences.iter().enumerate() {
        let s = scorer
            .score(&SentenceRef {
                message_id,
                index,
                text,
            })
            .unwrap_or_else(|e| {
                warn!("sentiment scorer failed on {message_id}#{index}: {e}; treating as neutral");
                SentenceSentiment::NEUTRAL
            });
        let score = s.score.clamp(0.0, 1.0);
        match s.polarity {
            Polarity::Negative => {
                neg += score;
                n_neg += 1;
            }
            Polarity::Positive => {
                pos += score;
                n_pos += 1;
            }
            Polarity::Neutral => {}
        }
    }
    SentimentSummary {
        neg: if n_neg == 0 { 0.0 } else { neg / n_neg as f64 },
        pos: if n_pos == 0 { 0.0 } else { pos / n_pos as f64 },
        n: sentences.len(),
        n_pos,
        n_neg,
    }
}

fn intention_of_sentences(message_id: &str, sentences: &[String], classifier: &dyn IntentScorer) -> f64 {
    if sentences.is_empty() {
        return 0.0;
    }
    let total: f64 = sentences
        .iter()
        .enumerate()
        .map(|(index, text)| {
            classifier
                .intent(&SentenceRef {
                    message_id,
                    index,
                    text,
                })
                .map(|v| v.clamp(0.0, 1.0))
                .unwrap_or_else(|e| {
                    warn!("intent scorer failed on {message_id}#{index}: {e}; scoring 0");
                    0.0
                })
        })
        .sum();
    total / sentences.len() as f64
}

pub fn sentiment(message: &FeedbackMessage, scorer: &dyn SentimentScorer) -> SentimentSummary {
    sentiment_of_sentences(&message.id, &split_sentences(&message.text), scorer)
}

pub fn intention(message: &FeedbackMessage, classifier: &dyn IntentScorer) -> f64 {
    intention_of_sentences(&message.id, &split_sentences(&message.text), classifier)
}

pub fn properties(
    message: &FeedbackMessage,
    scorer: &dyn SentimentScorer,
    classifier: &dyn IntentScorer,
) -> FeedbackProperties {
    let sentences = split_sentences(&message.text);
    let s = sentiment_of_sentences(&message.id, &sentences, scorer);
    FeedbackProperties {
        message_id: message.id.clone(),
        neg: s.neg,
        pos: s.pos,
        int: intention_of_sentences(&message.id, &sentences, classifier),
        n: s.n,
        n_pos: s.n_pos,
        n_neg: s.n_neg,
    }
}

/// Per-sentence breakdown, mainly for reports and debugging.
pub fn sentence_scores(
    message: &FeedbackMessage,
    scorer: &dyn SentimentScorer,
    classifier: &dyn IntentScorer,
) -> Vec<SentenceScore> {
    split_sentences(&message.text)
        .iter()
        .enumerate()
        .map(|(index, text)| {
            let r = SentenceRef {
                message_id: &message.id,
                index,
                text,
            };
            let s = scorer.score(&r).unwrap_or(SentenceSentiment::NEUTRAL);
            let score = s.score.clamp(0.0, 1.0);
            SentenceScore {
                index,
                polarity: s.polarity,
                neg_score: if s.polarity == Polarity::Negative { score } else { 0.0 },
                pos_score: if s.polarity == Polarity::Positive { score } else { 0.0 },
                intent_score: classifier.intent(&r).unwrap_or(0.0).clamp(0.0, 1.0),
            }
        })
        .collect()
}

/// Properties of every message, keyed by message id. Both the per-requirement
/// and per-cluster scorers read from the same table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyTable(BTreeMap<String, FeedbackProperties>);

impl PropertyTable {
    pub fn get(&self, message_id: &str) -> Option<&FeedbackProperties> {
        self.0.get(message_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeedbackProperties> {
        self.0.values()
    }
}

impl FromIterator<FeedbackProperties> for PropertyTable {
    fn from_iter<I: IntoIterator<Item = FeedbackProperties>>(iter: I) -> Self {
        PropertyTable(iter.into_iter().map(|p| (p.message_id.clone(), p)).collect())
    }
}

pub fn extract_properties(
    messages: &[FeedbackMessage],
    scorer: &dyn SentimentScorer,
    classifier: &dyn IntentScorer,
) -> PropertyTable {
    messages.par_iter().map(|m| properties(m, scorer, classifier)).collect::<Vec<_>>().into_iter().collect()
}

/// Lexicon scorer: a sentence's polarity is the sign of its summed token
/// valence and its score is `|s| / sqrt(s^2 + 15)`. A valence preceded by a
/// negator within three tokens is flipped and damped.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    valence: HashMap<String, f64>,
}

impl Default for LexiconScorer {
    fn default() -> Self {
        LexiconScorer::parse(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }
}

impl LexiconScorer {
    pub fn parse(text: &str) -> Result<Self> {
        let mut valence = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tok, val) = line
                .split_once(',')
                .ok_or_else(|| Error::parse("lexicon", i + 1, "expected token,valence"))?;
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| Error::parse("lexicon", i + 1, format!("bad valence `{val}`")))?;
            valence.insert(tok.trim().to_lowercase(), v);
        }
        Ok(LexiconScorer { valence })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LexiconScorer::parse(&text)
    }

    pub fn valence_sum(&self, sentence: &str) -> f64 {
        let tokens: Vec<String> = sentence
            .split_whitespace()
            .map(|t| {
                t.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
                    .replace('’', "'")
                    .to_lowercase()
            })
            .filter(|t| !t.is_empty())
            .collect();
        let mut sum = 0.0;
        for (i, t) in tokens.iter().enumerate() {
            if let Some(v) = self.valence.get(t.trim_matches('\'')) {
                let negated = tokens[i.saturating_sub(3)..i].iter().any(|p| is_negator(p));
                sum += if negated { v * NEGATION_SCALE } else { *v };
            }
        }
        sum
    }
}

fn is_negator(token: &str) -> bool {
    matches!(
        token,
        "not" | "no" | "never" | "cannot" | "nothing" | "nobody" | "none" | "neither" | "nor" | "without"
    ) || token.ends_with("n't")
        || matches!(token, "dont" | "doesnt" | "didnt" | "cant" | "wont" | "isnt" | "wasnt")
}

impl SentimentScorer for LexiconScorer {
    fn score(&self, sentence: &SentenceRef<'_>) -> std::result::Result<SentenceSentiment, ScorerError> {
        let s = self.valence_sum(sentence.text);
        let polarity = if s > 0.0 {
            Polarity::Positive
        } else if s < 0.0 {
            Polarity::Negative
        } else {
            Polarity::Neutral
        };
        Ok(SentenceSentiment {
            polarity,
            score: s.abs() / (s * s + VALENCE_NORM).sqrt(),
        })
    }
}

/// Rule-based feature-request detector: 1 for request phrasings or a leading
/// imperative verb, 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleIntentScorer;

fn request_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            \bplease\s+(add|make|let|allow|bring|include|give|enable|support|implement|consider)\b
            | \bwould\s+(be\s+(nice|great|good|helpful|awesome)|love)\b
            | \bwish(es|ed)?\b
            | \bshould\s+(have|add|be\s+able|include|allow|support)\b
            | \b(i|we)\s+(want|need)\s+(an?|the|to)\b
            | \b(i'd|i\s+would|we'd|we\s+would)\s+like\b
            | \b(can|could)\s+you\s+(add|make|include|bring|allow)\b
            | \bneeds?\s+(an?\s+)?(option|feature|setting|way)\b
            | \bfeature\s+request\b
            | \bhope\s+(you|they)\s+(add|bring|include)\b
            | \badd\s+(an?\s+|the\s+)?(option|feature|ability|setting|support)\b
            ",
        )
        .unwrap()
    })
}

const IMPERATIVE_VERBS: &[&str] = &[
    "add", "allow", "bring", "make", "let", "include", "give", "enable", "provide", "support", "introduce",
    "implement", "create", "put",
];

impl IntentScorer for RuleIntentScorer {
    fn intent(&self, sentence: &SentenceRef<'_>) -> std::result::Result<f64, ScorerError> {
        let lower = sentence.text.to_lowercase().replace('’', "'");
        let first = lower
            .split_whitespace()
            .next()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .unwrap_or("");
        let hit = IMPERATIVE_VERBS.contains(&first) || request_pattern().is_match(&lower);
        Ok(if hit { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub polarity: Polarity,
    pub score: f64,
    pub intent: Option<f64>,
}

/// Externally computed sentence scores (`message_id,sentence_index,polarity,score,intent`).
/// Used alone it fails on unknown sentences; wrap it with [`WithOverrides`]
/// to fall back to a built-in scorer.
#[derive(Debug, Clone, Default)]
pub struct ScoreFile {
    rows: HashMap<(String, usize), ScoreRow>,
}

#[derive(Debug, Deserialize)]
struct ScoreRecord {
    message_id: String,
    sentence_index: usize,
    polarity: String,
    score: f64,
    #[serde(default)]
    intent: Option<f64>,
}

impl ScoreFile {
    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let records: Vec<ScoreRecord> = crate::corpus::read_records(path)?;
        let mut rows = HashMap::new();
        let mut seen = HashSet::new();
        for (i, r) in records.into_iter().enumerate() {
            let polarity = r.polarity.parse().map_err(|e: Error| Error::parse(&name, i + 1, e.to_string()))?;
            if !(0.0..=1.0).contains(&r.score) || r.intent.is_some_and(|v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::parse(&name, i + 1, "scores must lie in [0, 1]"));
            }
            let key = (r.message_id, r.sentence_index);
            if !seen.insert(key.clone()) {
                return Err(Error::Integrity(format!("duplicate score row for {}#{}", key.0, key.1)));
            }
            rows.insert(
                key,
                ScoreRow {
                    polarity,
                    score: r.score,
                    intent: r.intent,
                },
            );
        }
        Ok(ScoreFile { rows })
    }

    pub fn insert(&mut self, message_id: &str, index: usize, row: ScoreRow) {
        self.rows.insert((message_id.to_string(), index), row);
    }

    pub fn get(&self, message_id: &str, index: usize) -> Option<&ScoreRow> {
        self.rows.get(&(message_id.to_string(), index))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl SentimentScorer for ScoreFile {
    fn score(&self, s: &SentenceRef<'_>) -> std::result::Result<SentenceSentiment, ScorerError> {
        self.get(s.message_id, s.index)
            .map(|r| SentenceSentiment {
                polarity: r.polarity,
                score: r.score,
            })
            .ok_or_else(|| ScorerError(format!("no score row for {}#{}", s.message_id, s.index)))
    }
}

impl IntentScorer for ScoreFile {
    fn intent(&self, s: &SentenceRef<'_>) -> std::result::Result<f64, ScorerError> {
        self.get(s.message_id, s.index)
            .and_then(|r| r.intent)
            .ok_or_else(|| ScorerError(format!("no intent score for {}#{}", s.message_id, s.index)))
    }
}

/// Rows from a score file take precedence; other sentences go to `inner`.
pub struct WithOverrides<'a, S> {
    pub file: &'a ScoreFile,
    pub inner: S,
}

impl<S: SentimentScorer> SentimentScorer for WithOverrides<'_, S> {
    fn score(&self, s: &SentenceRef<'_>) -> std::result::Result<SentenceSentiment, ScorerError> {
        match self.file.get(s.message_id, s.index) {
            Some(r) => Ok(SentenceSentiment {
                polarity: r.polarity,
                score: r.score,
            }),
            None => self.inner.score(s),
        }
    }
}

impl<S: IntentScorer> IntentScorer for WithOverrides<'_, S> {
    fn intent(&self, s: &SentenceRef<'_>) -> std::result::Result<f64, ScorerError> {
        match self.file.get(s.message_id, s.index).and_then(|r| r.intent) {
            Some(v) => Ok(v),
            None => self.inner.intent(s),
        }
    }
}

/// Scores every sentence neutral with zero intent.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeutralScorer;

impl SentimentScorer for NeutralScorer {
    fn score(&self, _: &SentenceRef<'_>) -> std::result::Result<SentenceSentiment, ScorerError> {
        Ok(SentenceSentiment::NEUTRAL)
    }
}

impl IntentScorer for NeutralScorer {
    fn intent(&self, _: &SentenceRef<'_>) -> std::result::Result<f64, ScorerError> {
        Ok(0.0)
    }
}
