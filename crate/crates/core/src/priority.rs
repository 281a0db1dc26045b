//! Feedback association and priority scoring.
//!
//! A requirement's ReFeed score averages `sim(r, m) * (neg + pos + int)` over
//! the messages associated with it. The iReFeed score averages the same terms
//! over the union of messages associated with any requirement in its cluster,
//! still weighting each term by the similarity between `r` itself and the
//! message. The coherence-weighted variant multiplies that by the cluster's
//! coherence factor.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FeedbackMessage, Requirement};
use crate::error::{Error, Result};
use crate::feedbackprops::PropertyTable;
use crate::textkit::{cosine, Normalizer, SparseVector, TfIdf, Weighting};
use crate::topicmodel::{ClusterSet, EmbeddingTable};

pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Similarity between a requirement and a feedback message, in [0, 1].
pub trait SimilarityFn: Sync {
    fn sim(&self, requirement_id: &str, message_id: &str) -> f64;
}

impl<F: Fn(&str, &str) -> f64 + Sync> SimilarityFn for F {
    fn sim(&self, requirement_id: &str, message_id: &str) -> f64 {
        self(requirement_id, message_id)
    }
}

/// Explicit similarity values; unlisted pairs have similarity 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimilarityTable(HashMap<(String, String), f64>);

impl SimilarityTable {
    pub fn insert(&mut self, requirement_id: &str, message_id: &str, sim: f64) {
        self.0.insert((requirement_id.to_string(), message_id.to_string()), sim);
    }
}

impl<'a> FromIterator<(&'a str, &'a str, f64)> for SimilarityTable {
    fn from_iter<I: IntoIterator<Item = (&'a str, &'a str, f64)>>(iter: I) -> Self {
        let mut t = SimilarityTable::default();
        for (r, m, s) in iter {
            t.insert(r, m, s);
        }
        t
    }
}

impl SimilarityFn for SimilarityTable {
    fn sim(&self, requirement_id: &str, message_id: &str) -> f64 {
        self.0
            .get(&(requirement_id.to_string(), message_id.to_string()))
            .copied()
            .unwrap_or(0.0)
    }
}

/// TF-IDF cosine similarity, with IDF fitted over requirements and messages together.
#[derive(Debug, Clone)]
pub struct TextSimilarity {
    requirements: HashMap<String, SparseVector>,
    messages: HashMap<String, SparseVector>,
}

impl TextSimilarity {
    pub fn fit(requirements: &[Requirement], messages: &[FeedbackMessage], normalizer: &Normalizer) -> Self {
        let req_tokens: Vec<_> = requirements.iter().map(|r| normalizer.normalize(&r.text)).collect();
        let msg_tokens: Vec<_> = messages.iter().map(|m| normalizer.normalize(&m.text)).collect();
        let corpus: Vec<_> = req_tokens.iter().chain(&msg_tokens).cloned().collect();
        let model = TfIdf::fit(&corpus, Weighting::TfIdf);
        TextSimilarity {
            requirements: requirements
                .iter()
                .zip(&req_tokens)
                .map(|(r, t)| (r.id.clone(), model.transform(t)))
                .collect(),
            messages: messages
                .iter()
                .zip(&msg_tokens)
                .map(|(m, t)| (m.id.clone(), model.transform(t)))
                .collect(),
        }
    }

    pub fn requirement_vectors(&self) -> &HashMap<String, SparseVector> {
        &self.requirements
    }

    /// Cosine between two requirements, used for cluster coherence.
    pub fn requirement_similarity(&self, a: &str, b: &str) -> f64 {
        match (self.requirements.get(a), self.requirements.get(b)) {
            (Some(u), Some(v)) => cosine(u, v),
            _ => 0.0,
        }
    }
}

impl SimilarityFn for TextSimilarity {
    fn sim(&self, requirement_id: &str, message_id: &str) -> f64 {
        match (self.requirements.get(requirement_id), self.messages.get(message_id)) {
            (Some(u), Some(v)) => cosine(u, v),
            _ => 0.0,
        }
    }
}

/// Cosine between precomputed requirement and message embeddings.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingSimilarity<'a> {
    pub requirements: &'a EmbeddingTable,
    pub messages: &'a EmbeddingTable,
}

impl SimilarityFn for EmbeddingSimilarity<'_> {
    fn sim(&self, requirement_id: &str, message_id: &str) -> f64 {
        match (self.requirements.get(requirement_id), self.messages.get(message_id)) {
            (Some(u), Some(v)) => crate::textkit::dense_cosine(u, v),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub message_id: String,
    pub sim: f64,
}

/// Messages associated with each requirement. Every requirement passed to
/// [`associate`] has an entry, possibly empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssociationMap {
    threshold: f64,
    map: BTreeMap<String, Vec<Association>>,
}

impl AssociationMap {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn get(&self, requirement_id: &str) -> Option<&[Association]> {
        self.map.get(requirement_id).map(Vec::as_slice)
    }

    pub fn requirement_ids(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Association])> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn total_links(&self) -> usize {
        self.map.values().map(Vec::len).sum()
    }
}

/// Keeps `(r, m)` iff `sim(r, m) > threshold`. Messages keep their input order.
pub fn associate(
    requirements: &[Requirement],
    messages: &[FeedbackMessage],
    sim: &dyn SimilarityFn,
    threshold: f64,
) -> AssociationMap {
    let map = requirements
        .par_iter()
        .map(|r| {
            let linked = messages
                .iter()
                .filter_map(|m| {
                    let s = sim.sim(&r.id, &m.id);
                    (s > threshold).then(|| Association {
                        message_id: m.id.clone(),
                        sim: s,
                    })
                })
                .collect();
            (r.id.clone(), linked)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    AssociationMap { threshold, map }
}

/// The cluster-level mapping used by the iReFeed scores: each requirement sees
/// the union of messages associated with its cluster and that cluster's
/// coherence factor. Members of the fallback cluster see only their own
/// messages and a factor of 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterAssociationMap {
    unions: Vec<Vec<String>>,
    alphas: Vec<f64>,
    group_of: BTreeMap<String, usize>,
}

impl ClusterAssociationMap {
    pub fn messages_for(&self, requirement_id: &str) -> Option<&[String]> {
        self.group_of.get(requirement_id).map(|&g| self.unions[g].as_slice())
    }

    pub fn alpha_for(&self, requirement_id: &str) -> Option<f64> {
        self.group_of.get(requirement_id).map(|&g| self.alphas[g])
    }

    pub fn requirement_ids(&self) -> impl Iterator<Item = &str> {
        self.group_of.keys().map(String::as_str)
    }
}

pub fn cluster_associate(clusters: &ClusterSet, assoc: &AssociationMap) -> Result<ClusterAssociationMap> {
    let mut out = ClusterAssociationMap::default();
    let push_group = |out: &mut ClusterAssociationMap, members: &[String], alpha: f64| {
        // First-seen order keeps a singleton's union identical to its own
        // association list, so both scores sum in the same order.
        let mut seen = HashSet::new();
        let union: Vec<String> = members
            .iter()
            .filter_map(|m| assoc.get(m))
            .flatten()
            .filter(|a| seen.insert(a.message_id.as_str()))
            .map(|a| a.message_id.clone())
            .collect();
        let g = out.unions.len();
        out.unions.push(union);
        out.alphas.push(alpha);
        for m in members {
            out.group_of.insert(m.clone(), g);
        }
    };
    for c in clusters.clusters() {
        if c.is_fallback() {
            for m in &c.members {
                push_group(&mut out, std::slice::from_ref(m), 1.0);
            }
        } else {
            push_group(&mut out, &c.members, c.coherence);
        }
    }
    if let Some(missing) = assoc.requirement_ids().find(|r| !out.group_of.contains_key(*r)) {
        return Err(Error::Integrity(format!("requirement `{missing}` is not in any cluster")));
    }
    Ok(out)
}

/// Mean of `sim(r, m) * (neg + pos + int)` over `messages`; 0 when empty.
fn mean_term<'a>(
    requirement_id: &str,
    messages: impl ExactSizeIterator<Item = &'a str>,
    props: &PropertyTable,
    sim: &dyn SimilarityFn,
) -> Result<f64> {
    let count = messages.len();
    if count == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for m in messages {
        let p = props
            .get(m)
            .ok_or_else(|| Error::Data(format!("no feedback properties for message `{m}`")))?;
        total += sim.sim(requirement_id, m) * p.sum();
    }
    Ok(total / count as f64)
}

pub fn score_refeed(
    requirement_id: &str,
    associated: &[Association],
    props: &PropertyTable,
    sim: &dyn SimilarityFn,
) -> Result<f64> {
    mean_term(
        requirement_id,
        associated.iter().map(|a| a.message_id.as_str()),
        props,
        sim,
    )
}

pub fn score_irefeed(
    requirement_id: &str,
    cluster_messages: &[String],
    props: &PropertyTable,
    sim: &dyn SimilarityFn,
) -> Result<f64> {
    mean_term(requirement_id, cluster_messages.iter().map(String::as_str), props, sim)
}

pub fn score_irefeed_c(
    requirement_id: &str,
    cluster_messages: &[String],
    props: &PropertyTable,
    sim: &dyn SimilarityFn,
    alpha: f64,
) -> Result<f64> {
    Ok(alpha * score_irefeed(requirement_id, cluster_messages, props, sim)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Refeed,
    Irefeed,
    IrefeedC,
}

impl Formula {
    pub fn as_str(self) -> &'static str {
        match self {
            Formula::Refeed => "refeed",
            Formula::Irefeed => "irefeed",
            Formula::IrefeedC => "irefeed_c",
        }
    }
}

/// Scores for every requirement of an instance under one method. `method` is
/// the reporting name (for example `lda_c`), `formula` the scoring rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityTable {
    pub method: String,
    pub formula: Formula,
    pub scores: BTreeMap<String, f64>,
}

impl PriorityTable {
    pub fn get(&self, requirement_id: &str) -> Option<f64> {
        self.scores.get(requirement_id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn prioritize_refeed(
    method: &str,
    assoc: &AssociationMap,
    props: &PropertyTable,
    sim: &dyn SimilarityFn,
) -> Result<PriorityTable> {
    let scores = assoc
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(r, f)| Ok((r.to_string(), score_refeed(r, f, props, sim)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(PriorityTable {
        method: method.to_string(),
        formula: Formula::Refeed,
        scores,
    })
}

/// iReFeed scores, coherence-weighted when `weighted` is set.
pub fn prioritize_irefeed(
    method: &str,
    cassoc: &ClusterAssociationMap,
    props: &PropertyTable,
    sim: &dyn SimilarityFn,
    weighted: bool,
) -> Result<PriorityTable> {
    let scores = cassoc
        .requirement_ids()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|r| {
            let msgs = cassoc.messages_for(r).unwrap_or_default();
            let s = if weighted {
                score_irefeed_c(r, msgs, props, sim, cassoc.alpha_for(r).unwrap_or(1.0))?
            } else {
                score_irefeed(r, msgs, props, sim)?
            };
            Ok((r.to_string(), s))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(PriorityTable {
        method: method.to_string(),
        formula: if weighted { Formula::IrefeedC } else { Formula::Irefeed },
        scores,
    })
}

/// Requirement ids by descending score, ties by ascending id.
pub fn rank(table: &PriorityTable) -> Vec<String> {
    let mut entries: Vec<(&String, f64)> = table.scores.iter().map(|(k, v)| (k, *v)).collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().map(|(k, _)| k.clone()).collect()
}

/// Writes `requirement_id,method,score,rank` rows (rank is 1-based).
pub fn write_priority_csv(tables: &[PriorityTable], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Data(format!("writing priority table: {e}"));
    w.write_record(["requirement_id", "method", "score", "rank"]).map_err(io)?;
    for t in tables {
        for (i, id) in rank(t).iter().enumerate() {
            w.write_record([id.as_str(), &t.method, &t.scores[id].to_string(), &(i + 1).to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Data(format!("writing priority table: {e}")))?;
    Ok(())
}

pub fn save_priority_csv(tables: &[PriorityTable], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_priority_csv(tables, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedbackprops::FeedbackProperties;
    use crate::topicmodel::{ClusterLabel, RequirementCluster};
    use chrono::NaiveDate;

    fn reqs(ids: &[&str]) -> Vec<Requirement> {
        ids.iter().map(|id| Requirement::new(*id, format!("text of {id}"))).collect()
    }

    fn msgs(ids: &[&str]) -> Vec<FeedbackMessage> {
        let d = NaiveDate::from_ymd_opt(2024, 5, 1).unwrap();
        ids.iter().map(|id| FeedbackMessage::new(*id, format!("body {id}"), d)).collect()
    }

    fn prop(id: &str, neg: f64, pos: f64, int: f64) -> FeedbackProperties {
        FeedbackProperties {
            message_id: id.into(),
            neg,
            pos,
            int,
            n: 1,
            n_pos: 0,
            n_neg: 0,
        }
    }

    fn example_sims() -> SimilarityTable {
        [
            ("r1", "m1", 0.15),
            ("r1", "m2", 0.2),
            ("r1", "m3", 0.06),
            ("r2", "m1", 0.07),
            ("r2", "m2", 0.22),
            ("r2", "m3", 0.13),
        ]
        .into_iter()
        .collect()
    }

    fn ids(a: &[Association]) -> Vec<&str> {
        a.iter().map(|a| a.message_id.as_str()).collect()
    }

    #[test]
    fn associates_above_threshold() {
        let m = associate(&reqs(&["r1", "r2"]), &msgs(&["m1", "m2", "m3"]), &example_sims(), DEFAULT_THRESHOLD);
        assert_eq!(ids(m.get("r1").unwrap()), ["m1", "m2"]);
        assert_eq!(ids(m.get("r2").unwrap()), ["m2", "m3"]);
        let tight = associate(&reqs(&["r1", "r2"]), &msgs(&["m1", "m2", "m3"]), &|_: &str, _: &str| 1.0, 1.0);
        assert_eq!(tight.total_links(), 0);
        let full = associate(&reqs(&["r1", "r2"]), &msgs(&["m1", "m2", "m3"]), &|_: &str, _: &str| 1.0, 0.1);
        assert_eq!(full.total_links(), 6);
    }

    #[test]
    fn threshold_is_strict() {
        let m = associate(&reqs(&["r"]), &msgs(&["m"]), &|_: &str, _: &str| 0.1, 0.1);
        assert!(m.get("r").unwrap().is_empty());
    }

    #[test]
    fn cluster_union() {
        let assoc = associate(&reqs(&["r1", "r2"]), &msgs(&["m1", "m2", "m3"]), &example_sims(), 0.1);
        let cs = ClusterSet::new(vec![RequirementCluster::new(ClusterLabel::Topic(0), vec!["r1".into(), "r2".into()])])
            .unwrap();
        let c = cluster_associate(&cs, &assoc).unwrap();
        assert_eq!(c.messages_for("r1").unwrap(), ["m1", "m2", "m3"]);
        assert_eq!(c.messages_for("r2").unwrap(), ["m1", "m2", "m3"]);

        let single = cluster_associate(&ClusterSet::singletons(&["r1", "r2"]), &assoc).unwrap();
        assert_eq!(single.messages_for("r2").unwrap(), ["m2", "m3"]);

        let partial = ClusterSet::singletons(&["r1"]);
        assert!(matches!(cluster_associate(&partial, &assoc), Err(Error::Integrity(_))));
    }

    #[test]
    fn disjoint_clusters_have_disjoint_unions() {
        let sims: SimilarityTable = [("a", "m1", 0.5), ("b", "m2", 0.5)].into_iter().collect();
        let assoc = associate(&reqs(&["a", "b"]), &msgs(&["m1", "m2"]), &sims, 0.1);
        let c = cluster_associate(&ClusterSet::singletons(&["a", "b"]), &assoc).unwrap();
        assert_eq!(c.messages_for("a").unwrap(), ["m1"]);
        assert_eq!(c.messages_for("b").unwrap(), ["m2"]);
    }

    #[test]
    fn fallback_members_are_scored_alone() {
        let assoc = associate(&reqs(&["r1", "r2"]), &msgs(&["m1", "m2", "m3"]), &example_sims(), 0.1);
        let mut fb = RequirementCluster::new(ClusterLabel::Fallback, vec!["r1".into(), "r2".into()]);
        fb.coherence = 0.2;
        let c = cluster_associate(&ClusterSet::new(vec![fb]).unwrap(), &assoc).unwrap();
        assert_eq!(c.messages_for("r1").unwrap(), ["m1", "m2"]);
        assert_eq!(c.alpha_for("r1"), Some(1.0));
    }

    #[test]
    fn refeed_hand_value() {
        let props: PropertyTable = [prop("m", 0.2, 0.4, 1.0)].into_iter().collect();
        let f = [Association {
            message_id: "m".into(),
            sim: 0.5,
        }];
        let p = score_refeed("r", &f, &props, &|_: &str, _: &str| 0.5).unwrap();
        assert!((p - 0.8).abs() < 1e-12);
        assert_eq!(score_refeed("r", &[], &props, &|_: &str, _: &str| 0.5).unwrap(), 0.0);
    }

    #[test]
    fn equal_terms_average_to_the_term() {
        let props: PropertyTable = [prop("a", 0.1, 0.2, 0.3), prop("b", 0.3, 0.2, 0.1)].into_iter().collect();
        let f = [
            Association {
                message_id: "a".into(),
                sim: 0.4,
            },
            Association {
                message_id: "b".into(),
                sim: 0.4,
            },
        ];
        let p = score_refeed("r", &f, &props, &|_: &str, _: &str| 0.4).unwrap();
        assert!((p - 0.4 * 0.6).abs() < 1e-12);
    }

    #[test]
    fn missing_props_is_data_error() {
        let f = [Association {
            message_id: "ghost".into(),
            sim: 0.5,
        }];
        let err = score_refeed("r", &f, &PropertyTable::default(), &|_: &str, _: &str| 0.5).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn coherence_weighting() {
        let props: PropertyTable = [prop("m", 0.2, 0.4, 1.0)].into_iter().collect();
        let msgs = vec!["m".to_string()];
        let s = |_: &str, _: &str| 0.5;
        let base = score_irefeed("r", &msgs, &props, &s).unwrap();
        assert_eq!(score_irefeed_c("r", &msgs, &props, &s, 1.0).unwrap(), base);
        assert!((score_irefeed_c("r", &msgs, &props, &s, 0.4).unwrap() - 0.32).abs() < 1e-12);
        assert_eq!(score_irefeed_c("r", &msgs, &props, &s, 0.0).unwrap(), 0.0);
        assert_eq!(score_irefeed("r", &[], &props, &s).unwrap(), 0.0);
    }

    #[test]
    fn ranks_with_id_ties() {
        let t = PriorityTable {
            method: "x".into(),
            formula: Formula::Refeed,
            scores: [("a", 0.3), ("b", 0.9), ("c", 0.3)].iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        assert_eq!(rank(&t), ["b", "a", "c"]);
        let zeros = PriorityTable {
            method: "x".into(),
            formula: Formula::Refeed,
            scores: [("z", 0.0), ("a", 0.0), ("m", 0.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        assert_eq!(rank(&zeros), ["a", "m", "z"]);
    }

    #[test]
    fn csv_layout() {
        let t = PriorityTable {
            method: "refeed".into(),
            formula: Formula::Refeed,
            scores: [("a", 0.25), ("b", 0.5)].iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        };
        let mut buf = Vec::new();
        write_priority_csv(&[t], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "requirement_id,method,score,rank\nb,refeed,0.5,1\na,refeed,0.25,2\n"
        );
    }

    #[test]
    fn text_similarity_links_shared_terms() {
        let r = vec![Requirement::new("r1", "export document to pdf"), Requirement::new("r2", "dark theme colors")];
        let d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let m = vec![
            FeedbackMessage::new("m1", "please let me export to pdf", d),
            FeedbackMessage::new("m2", "the app is slow", d),
        ];
        let sim = TextSimilarity::fit(&r, &m, &Normalizer::default());
        assert!(sim.sim("r1", "m1") > 0.1);
        assert_eq!(sim.sim("r2", "m1"), 0.0);
        assert_eq!(sim.sim("r1", "unknown"), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rank_is_permutation_invariant(scores in proptest::collection::vec(0u8..5, 1..20), seed in any::<u64>()) {
                use rand::{seq::SliceRandom, SeedableRng};
                let mut entries: Vec<(String, f64)> =
                    scores.iter().enumerate().map(|(i, s)| (format!("r{i:02}"), *s as f64 / 4.0)).collect();
                let t1 = PriorityTable { method: "x".into(), formula: Formula::Refeed, scores: entries.iter().cloned().collect() };
                entries.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let t2 = PriorityTable { method: "x".into(), formula: Formula::Refeed, scores: entries.into_iter().collect() };
                prop_assert_eq!(rank(&t1), rank(&t2));
            }

            #[test]
            fn singleton_clusters_reduce_to_refeed(
                sims in proptest::collection::vec(0.0f64..1.0, 12),
                p in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 4),
            ) {
                let r_ids = ["r0", "r1", "r2"];
                // Input order deliberately differs from lexicographic order.
                let m_ids = ["m9", "m10", "m2", "m11"];
                let table: SimilarityTable = (0..12).map(|i| (r_ids[i / 4], m_ids[i % 4], sims[i])).collect();
                let props: PropertyTable = p.iter().enumerate().map(|(i, &(a, b, c))| prop(m_ids[i], a, b, c)).collect();
                let assoc = associate(&reqs(&r_ids), &msgs(&m_ids), &table, DEFAULT_THRESHOLD);
                let refeed = prioritize_refeed("refeed", &assoc, &props, &table).unwrap();
                let c = cluster_associate(&ClusterSet::singletons(&r_ids), &assoc).unwrap();
                let ire = prioritize_irefeed("irefeed", &c, &props, &table, false).unwrap();
                let irc = prioritize_irefeed("irefeed_c", &c, &props, &table, true).unwrap();
                for r in r_ids {
                    prop_assert_eq!(refeed.scores[r], ire.scores[r]);
                    prop_assert_eq!(ire.scores[r], irc.scores[r]);
                    let f = assoc.get(r).unwrap();
                    let terms: f64 = f.iter().map(|a| a.sim * props.get(&a.message_id).unwrap().sum()).sum();
                    prop_assert!((refeed.scores[r] * f.len() as f64 - terms).abs() <= 1e-12);
                }
            }
        }
    }
}
