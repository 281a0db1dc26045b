//! TOML run configuration. Relative paths resolve against the directory that
//! holds the config file.

use std::path::{Path, PathBuf};

use reqprio::nrpsolver::{CrowdingMode, SearchParams};
use reqprio::requiresminer::DValueVariant;
use reqprio::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Upper bound on worker threads; 0 lets the runtime decide.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub data: DataPaths,
    #[serde(default)]
    pub prioritize: PrioritizeConfig,
    #[serde(default)]
    pub mine: MineConfig,
    #[serde(default)]
    pub nrp: NrpConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub requirements: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    /// `requirement_id,cluster` assignments used for mining prompts.
    pub clusters: Option<PathBuf>,
    pub gold_pairs: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
    /// `from_id,to_id` pairs for D-values; defaults to the mined combined set.
    pub pairs: Option<PathBuf>,
    pub requirement_embeddings: Option<PathBuf>,
    pub message_embeddings: Option<PathBuf>,
    /// Per-sentence scores overriding the built-in scorers.
    pub sentence_scores: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerMode {
    /// Lexicon sentiment and rule-based intent.
    #[default]
    Builtin,
    /// Score-file rows first, built-in scorers for the rest.
    File,
    /// Score file only; missing sentences count as neutral with zero intent.
    FileStrict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrioritizeConfig {
    pub dataset: String,
    pub app: Option<String>,
    pub topics: usize,
    pub passes: usize,
    pub threshold: f64,
    pub scorer: ScorerMode,
    pub stemming: bool,
    pub coherence: CoherenceSpace,
}

/// Vector space for the pairwise requirement similarities behind cluster coherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceSpace {
    #[default]
    Tfidf,
    /// Cosine between inferred topic mixtures.
    Topic,
}

impl Default for PrioritizeConfig {
    fn default() -> Self {
        PrioritizeConfig {
            dataset: "dataset".into(),
            app: None,
            topics: reqprio::topicmodel::DEFAULT_TOPICS,
            passes: reqprio::topicmodel::DEFAULT_PASSES,
            threshold: reqprio::priority::DEFAULT_THRESHOLD,
            scorer: ScorerMode::Builtin,
            stemming: false,
            coherence: CoherenceSpace::Tfidf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MineMode {
    #[default]
    Fixture,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MineConfig {
    pub mode: MineMode,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            mode: MineMode::Fixture,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "REQPRIO_API_KEY".into(),
            temperature: 0.0,
            max_in_flight: 4,
            timeout_secs: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareBasis {
    /// Each run's front is first reduced to its own (value, cost) non-dominated set.
    #[default]
    ValueCostFront,
    /// Every distinct (value, cost) tuple of the returned front counts.
    FullFront,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NrpConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover: f64,
    pub mutation: Option<f64>,
    pub crowding: CrowdingMode,
    pub runs: usize,
    pub variants: Vec<DValueVariant>,
    pub weights: Option<Vec<f64>>,
    pub share_basis: ShareBasis,
    pub requires_filter: bool,
}

impl Default for NrpConfig {
    fn default() -> Self {
        let p = SearchParams::default();
        NrpConfig {
            population: p.population,
            generations: p.generations,
            tournament: p.tournament,
            crossover: p.crossover,
            mutation: p.mutation,
            crowding: p.crowding,
            runs: 10,
            variants: DValueVariant::ALL.to_vec(),
            weights: None,
            share_basis: ShareBasis::ValueCostFront,
            requires_filter: false,
        }
    }
}

impl NrpConfig {
    pub fn params(&self, seed: u64) -> SearchParams {
        SearchParams {
            population: self.population,
            generations: self.generations,
            tournament: self.tournament,
            crossover: self.crossover,
            mutation: self.mutation,
            seed,
            crowding: self.crowding,
        }
    }
}

/// A parsed config plus the raw text it came from (hashed into manifests).
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source_sha256: String,
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate_knobs()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(LoadedConfig {
            config: RunConfig::from_toml(&text, base)?,
            source_sha256: crate::sha256_hex(text.as_bytes()),
        })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        let d = &mut self.data;
        for p in [
            &mut d.requirements,
            &mut d.reviews,
            &mut d.benchmark,
            &mut d.clusters,
            &mut d.gold_pairs,
            &mut d.fixtures,
            &mut d.pairs,
            &mut d.requirement_embeddings,
            &mut d.message_embeddings,
            &mut d.sentence_scores,
            &mut d.stopwords,
            &mut d.lexicon,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    fn validate_knobs(&self) -> Result<()> {
        let p = &self.prioritize;
        if p.topics < 2 || p.passes == 0 {
            return Err(Error::Config("prioritize.topics must be at least 2 and passes positive".into()));
        }
        if !(0.0..1.0).contains(&p.threshold) {
            return Err(Error::Config("prioritize.threshold must lie in [0, 1)".into()));
        }
        if self.mine.max_in_flight == 0 {
            return Err(Error::Config("mine.max_in_flight must be positive".into()));
        }
        if self.nrp.runs == 0 {
            return Err(Error::Config("nrp.runs must be positive".into()));
        }
        self.nrp.params(self.seed).validate()
    }

    /// Returns the path, or a configuration error naming the missing key.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`data.{key}` is not set")))?;
        if !p.exists() {
            return Err(Error::Config(format!("`data.{key}` points to missing file {}", p.display())));
        }
        Ok(p)
    }

    /// Checks an optional path only when it is set.
    pub fn optional<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<Option<&'a Path>> {
        match path {
            Some(_) => self.require(path, key).map(Some),
            None => Ok(None),
        }
    }
}
