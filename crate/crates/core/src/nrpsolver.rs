//! Next Release Problem: choose a subset of requirements that maximizes
//! weighted stakeholder value while minimizing development cost, optionally
//! also maximizing total D-value. Solved with NSGA-II; small instances can be
//! solved exactly by enumeration.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Benchmark;
use crate::error::{Error, Result};
use crate::requiresminer::{DValueVector, RequiresSet};

pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSet {
    /// (value, cost)
    Bi,
    /// (value, cost, D-value)
    Tri,
}

impl ObjectiveSet {
    pub fn senses(self) -> &'static [Sense] {
        match self {
            ObjectiveSet::Bi => &[Sense::Maximize, Sense::Minimize],
            ObjectiveSet::Tri => &[Sense::Maximize, Sense::Minimize, Sense::Maximize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrpProblem {
    pub ids: Vec<String>,
    /// `values[s][i]`: stakeholder `s`'s score for requirement `i`.
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub costs: Vec<f64>,
    pub dvalues: Option<Vec<f64>>,
    /// Weighted value per requirement, cached from `values` and `weights`.
    value_per_req: Vec<f64>,
}

impl NrpProblem {
    pub fn new(ids: Vec<String>, values: Vec<Vec<f64>>, weights: Vec<f64>, costs: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Data("NRP instance has no requirements".into()));
        }
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::Data(format!(
                "{} stakeholder score vectors but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if costs.len() != n || values.iter().any(|v| v.len() != n) {
            return Err(Error::Data(format!("score and cost vectors must all have length {n}")));
        }
        let bad = |x: &f64| !x.is_finite() || *x < 0.0;
        if values.iter().flatten().any(bad) || costs.iter().any(bad) {
            return Err(Error::Data("scores and costs must be finite and non-negative".into()));
        }
        if weights.iter().any(bad) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("stakeholder weights must be non-negative with a positive sum".into()));
        }
        let value_per_req = (0..n).map(|i| values.iter().zip(&weights).map(|(v, w)| w * v[i]).sum()).collect();
        Ok(NrpProblem {
            ids,
            values,
            weights,
            costs,
            dvalues: None,
            value_per_req,
        })
    }

    /// Unit weights; cost is the development estimate.
    pub fn from_benchmark(b: &Benchmark) -> Result<Self> {
        let values = (0..b.stakeholders).map(|s| b.rows.iter().map(|r| r.values[s]).collect()).collect();
        NrpProblem::new(
            b.ids(),
            values,
            vec![1.0; b.stakeholders],
            b.rows.iter().map(|r| r.development).collect(),
        )
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        let mut p = NrpProblem::new(self.ids, self.values, weights, self.costs)?;
        p.dvalues = self.dvalues;
        Ok(p)
    }

    /// Attaches D-values, matched to requirements by id.
    pub fn with_dvalues(mut self, d: &DValueVector) -> Result<Self> {
        let map = d.as_map();
        let values = self
            .ids
            .iter()
            .map(|id| {
                map.get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("no D-value for requirement `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Data("D-values must be finite and non-negative".into()));
        }
        self.dvalues = Some(values);
        Ok(self)
    }

    /// Random integer-valued instance for tests and benchmarks.
    pub fn random(n: usize, stakeholders: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..stakeholders)
            .map(|_| (0..n).map(|_| rng.random_range(1..=10) as f64).collect())
            .collect();
        let costs = (0..n).map(|_| rng.random_range(1..=30) as f64).collect();
        NrpProblem::new((1..=n).map(|i| format!("r{i}")).collect(), values, vec![1.0; stakeholders], costs)
            .expect("generated instance is valid")
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn value_of(&self, i: usize) -> f64 {
        self.value_per_req[i]
    }

    fn check(&self, set: ObjectiveSet) -> Result<()> {
        if set == ObjectiveSet::Tri && self.dvalues.is_none() {
            return Err(Error::Config("the tri-objective formulation needs D-values".into()));
        }
        Ok(())
    }

    fn objectives(&self, x: &[bool], set: ObjectiveSet) -> Vec<f64> {
        let mut value = 0.0;
        let mut cost = 0.0;
        let mut d = 0.0;
        for (i, _) in x.iter().enumerate().filter(|(_, b)| **b) {
            value += self.value_per_req[i];
            cost += self.costs[i];
            if let Some(dv) = &self.dvalues {
                d += dv[i];
            }
        }
        match set {
            ObjectiveSet::Bi => vec![value, cost],
            ObjectiveSet::Tri => vec![value, cost, d],
        }
    }

    pub fn evaluate(&self, x: Vec<bool>, set: ObjectiveSet) -> Result<Solution> {
        self.check(set)?;
        if x.len() != self.n() {
            return Err(Error::Data(format!("decision vector has length {} but n = {}", x.len(), self.n())));
        }
        let objectives = self.objectives(&x, set);
        Ok(Solution { x, objectives })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<bool>,
    /// `(value, cost)` or `(value, cost, dvalue)`.
    pub objectives: Vec<f64>,
}

impl Solution {
    pub fn value(&self) -> f64 {
        self.objectives[0]
    }

    pub fn cost(&self) -> f64 {
        self.objectives[1]
    }

    pub fn dvalue(&self) -> Option<f64> {
        self.objectives.get(2).copied()
    }

    pub fn bitstring(&self) -> String {
        self.x.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }

    pub fn selected<'a>(&self, ids: &'a [String]) -> Vec<&'a str> {
        self.x.iter().zip(ids).filter(|(b, _)| **b).map(|(_, id)| id.as_str()).collect()
    }

    fn value_cost_key(&self) -> (u64, u64) {
        (self.objectives[0].to_bits(), self.objectives[1].to_bits())
    }
}

/// Whether `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates_objectives(a: &[f64], b: &[f64], senses: &[Sense]) -> Result<bool> {
    if a.len() != b.len() || a.len() != senses.len() {
        return Err(Error::Data(format!(
            "objective arity mismatch ({}, {}, {} senses)",
            a.len(),
            b.len(),
            senses.len()
        )));
    }
    Ok(dominates_unchecked(a, b, senses))
}

fn dominates_unchecked(a: &[f64], b: &[f64], senses: &[Sense]) -> bool {
    let mut strictly = false;
    for ((x, y), s) in a.iter().zip(b).zip(senses) {
        let (x, y) = match s {
            Sense::Maximize => (*x, *y),
            Sense::Minimize => (-*x, -*y),
        };
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

pub fn dominates(a: &Solution, b: &Solution, senses: &[Sense]) -> Result<bool> {
    dominates_objectives(&a.objectives, &b.objectives, senses)
}

/// A set of mutually non-dominated solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub senses: Vec<Sense>,
    pub solutions: Vec<Solution>,
}

impl Front {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn is_non_dominated(&self) -> bool {
        self.solutions.iter().all(|a| {
            self.solutions
                .iter()
                .all(|b| !dominates_unchecked(&b.objectives, &a.objectives, &self.senses))
        })
    }

    /// Distinct `(value, cost)` tuples on this front.
    pub fn value_cost_points(&self) -> BTreeSet<(u64, u64)> {
        self.solutions.iter().map(Solution::value_cost_key).collect()
    }

    /// Writes `value,cost[,dvalue],bitstring` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let tri = self.senses.len() == 3;
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("writing front: {e}"));
        let header: &[&str] = if tri {
            &["value", "cost", "dvalue", "bitstring"]
        } else {
            &["value", "cost", "bitstring"]
        };
        w.write_record(header).map_err(err)?;
        let mut sorted: Vec<&Solution> = self.solutions.iter().collect();
        sorted.sort_by(|a, b| a.cost().total_cmp(&b.cost()).then(b.value().total_cmp(&a.value())).then(a.x.cmp(&b.x)));
        for s in sorted {
            let mut rec: Vec<String> = s.objectives.iter().map(|v| v.to_string()).collect();
            rec.push(s.bitstring());
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing front: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrowdingMode {
    /// Crowding distance over every objective.
    #[default]
    Full,
    /// Crowding distance over value and cost only.
    ValueCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub population: usize,
    /// Generations including the initial population; evaluations = population * generations.
    pub generations: usize,
    pub tournament: usize,
    pub crossover: f64,
    /// Per-bit flip probability; `None` means `1 / n`.
    pub mutation: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub crowding: CrowdingMode,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            population: 200,
            generations: 50,
            tournament: 5,
            crossover: 0.8,
            mutation: None,
            seed: 0,
            crowding: CrowdingMode::Full,
        }
    }
}

impl SearchParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return Err(Error::Config(format!("population must be even and at least 2, got {}", self.population)));
        }
        if self.generations == 0 || self.tournament == 0 {
            return Err(Error::Config("generations and tournament size must be positive".into()));
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.crossover) || self.mutation.is_some_and(|m| !prob(m)) {
            return Err(Error::Config("crossover and mutation probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub params: SearchParams,
    pub objective_set: ObjectiveSet,
    pub mutation_probability: f64,
    pub evaluations: usize,
    /// Size of the first non-dominated front after each generation.
    pub first_front_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsgaRun {
    pub front: Front,
    pub population: Vec<Solution>,
    pub manifest: RunManifest,
}

/// Fast non-dominated sort; returns fronts of population indices.
fn non_dominated_sort(pop: &[Solution], senses: &[Sense]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates_unchecked(&pop[i].objectives, &pop[j].objectives, senses) {
                dominated_by_me[i].push(j);
                dom_count[j] += 1;
            } else if dominates_unchecked(&pop[j].objectives, &pop[i].objectives, senses) {
                dominated_by_me[j].push(i);
                dom_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dom_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn crowding_distances(pop: &[Solution], front: &[usize], objectives: usize) -> Vec<f64> {
    let mut dist = vec![0.0; front.len()];
    if front.len() <= 2 {
        return vec![f64::INFINITY; front.len()];
    }
    let mut order: Vec<usize> = (0..front.len()).collect();
    for m in 0..objectives {
        let obj = |k: usize| pop[front[k]].objectives[m];
        order.sort_by(|&a, &b| obj(a).total_cmp(&obj(b)).then(a.cmp(&b)));
        let (lo, hi) = (obj(order[0]), obj(order[order.len() - 1]));
        dist[order[0]] = f64::INFINITY;
        dist[order[order.len() - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..order.len() - 1 {
                dist[order[w]] += (obj(order[w + 1]) - obj(order[w - 1])) / (hi - lo);
            }
        }
    }
    dist
}

/// Rank (front index) and crowding distance of every member.
fn rank_and_crowd(pop: &[Solution], senses: &[Sense], crowd_objs: usize) -> (Vec<Vec<usize>>, Vec<usize>, Vec<f64>) {
    let fronts = non_dominated_sort(pop, senses);
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, f) in fronts.iter().enumerate() {
        for (k, d) in f.iter().zip(crowding_distances(pop, f, crowd_objs)) {
            rank[*k] = r;
            crowd[*k] = d;
        }
    }
    (fronts, rank, crowd)
}

fn better(a: usize, b: usize, rank: &[usize], crowd: &[f64]) -> bool {
    rank[a] < rank[b] || (rank[a] == rank[b] && crowd[a] > crowd[b])
}

/// NSGA-II with tournament selection (rank, then crowding distance),
/// single-point crossover, bit-flip mutation and elitist (mu + lambda)
/// survival. The initial population counts as the first generation, so a run
/// performs exactly `population * generations` evaluations.
pub fn nsga2(problem: &NrpProblem, params: &SearchParams, set: ObjectiveSet) -> Result<NsgaRun> {
    params.validate()?;
    problem.check(set)?;
    let n = problem.n();
    let senses = set.senses();
    let crowd_objs = match params.crowding {
        CrowdingMode::Full => senses.len(),
        CrowdingMode::ValueCost => 2,
    };
    let pm = params.mutation.unwrap_or(1.0 / n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let eval_all = |xs: Vec<Vec<bool>>| -> Vec<Solution> {
        xs.into_par_iter()
            .map(|x| {
                let objectives = problem.objectives(&x, set);
                Solution { x, objectives }
            })
            .collect()
    };

    let initial: Vec<Vec<bool>> = (0..params.population)
        .map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect())
        .collect();
    let mut pop = eval_all(initial);
    let mut evaluations = pop.len();
    let (fronts, mut rank, mut crowd) = rank_and_crowd(&pop, senses, crowd_objs);
    let mut first_front_sizes = vec![fronts[0].len()];

    for _ in 1..params.generations {
        let tournament = |rng: &mut ChaCha8Rng| {
            let mut best = rng.random_range(0..pop.len());
            for _ in 1..params.tournament {
                let c = rng.random_range(0..pop.len());
                if better(c, best, &rank, &crowd) {
                    best = c;
                }
            }
            best
        };
        let mut children = Vec::with_capacity(params.population);
        while children.len() < params.population {
            let (a, b) = (tournament(&mut rng), tournament(&mut rng));
            let mut c1 = pop[a].x.clone();
            let mut c2 = pop[b].x.clone();
            if n > 1 && rng.random_bool(params.crossover) {
                let point = rng.random_range(1..n);
                c1[point..].swap_with_slice(&mut c2[point..]);
            }
            for c in [&mut c1, &mut c2] {
                for bit in c.iter_mut() {
                    if rng.random_bool(pm) {
                        *bit = !*bit;
                    }
                }
            }
            children.push(c1);
            children.push(c2);
        }
        let offspring = eval_all(children);
        evaluations += offspring.len();

        let mut merged = std::mem::take(&mut pop);
        merged.extend(offspring);
        let (fronts, _, _) = rank_and_crowd(&merged, senses, crowd_objs);
        let mut keep: Vec<usize> = Vec::with_capacity(params.population);
        for f in &fronts {
            if keep.len() + f.len() <= params.population {
                keep.extend(f);
            } else {
                let d = crowding_distances(&merged, f, crowd_objs);
                let mut order: Vec<usize> = (0..f.len()).collect();
                order.sort_by(|&x, &y| d[y].total_cmp(&d[x]).then(f[x].cmp(&f[y])));
                keep.extend(order.into_iter().take(params.population - keep.len()).map(|k| f[k]));
                break;
            }
        }
        let mut slots: Vec<Option<Solution>> = merged.into_iter().map(Some).collect();
        pop = keep.iter().map(|&k| slots[k].take().unwrap()).collect();
        let (fronts, r, c) = rank_and_crowd(&pop, senses, crowd_objs);
        rank = r;
        crowd = c;
        first_front_sizes.push(fronts[0].len());
    }

    let mut seen = BTreeSet::new();
    let mut front_solutions = Vec::new();
    for (i, s) in pop.iter().enumerate() {
        if rank[i] == 0 && seen.insert(s.x.clone()) {
            front_solutions.push(s.clone());
        }
    }
    Ok(NsgaRun {
        front: Front {
            senses: senses.to_vec(),
            solutions: front_solutions,
        },
        population: pop,
        manifest: RunManifest {
            params: params.clone(),
            objective_set: set,
            mutation_probability: pm,
            evaluations,
            first_front_sizes,
        },
    })
}

/// Non-dominated subset with one representative per objective tuple, found
/// by a lexicographic sweep: a point can only be dominated by points that
/// sort before it.
fn pareto_filter(mut points: Vec<Solution>, senses: &[Sense]) -> Vec<Solution> {
    let key = |s: &Solution| -> Vec<f64> {
        s.objectives
            .iter()
            .zip(senses)
            .map(|(v, sense)| if *sense == Sense::Maximize { -v } else { *v })
            .collect()
    };
    points.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.x.cmp(&b.x))
    });
    let mut archive: Vec<Solution> = Vec::new();
    for p in points {
        let dup_or_dominated = archive
            .iter()
            .any(|a| a.objectives == p.objectives || dominates_unchecked(&a.objectives, &p.objectives, senses));
        if !dup_or_dominated {
            archive.push(p);
        }
    }
    archive
}

/// Exact Pareto front by enumerating all `2^n` subsets (one solution per
/// distinct objective tuple).
pub fn brute_force_pareto(problem: &NrpProblem, set: ObjectiveSet) -> Result<Front> {
    problem.check(set)?;
    let n = problem.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::Config(format!(
            "exhaustive search is limited to {BRUTE_FORCE_LIMIT} requirements, instance has {n}"
        )));
    }
    let senses = set.senses();
    let all: Vec<Solution> = (0u32..1 << n)
        .into_par_iter()
        .map(|mask| {
            let x: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let objectives = problem.objectives(&x, set);
            Solution { x, objectives }
        })
        .collect();
    Ok(Front {
        senses: senses.to_vec(),
        solutions: pareto_filter(all, senses),
    })
}

fn project(s: &Solution) -> Solution {
    Solution {
        x: s.x.clone(),
        objectives: s.objectives[..2].to_vec(),
    }
}

/// Merges fronts on the (value, cost) projection and keeps the non-dominated
/// tuples.
pub fn reference_front(fronts: &[&Front]) -> Front {
    let senses = ObjectiveSet::Bi.senses();
    let merged: Vec<Solution> = fronts.iter().flat_map(|f| f.solutions.iter().map(project)).collect();
    Front {
        senses: senses.to_vec(),
        solutions: pareto_filter(merged, senses),
    }
}

/// The front's own non-dominated subset on the (value, cost) projection.
pub fn value_cost_front(front: &Front) -> Front {
    reference_front(&[front])
}

/// Percentage of the front's distinct (value, cost) tuples that appear on the reference.
pub fn share_of_reference(front: &Front, reference: &Front) -> f64 {
    let points = front.value_cost_points();
    if points.is_empty() {
        warn!("share of reference requested for an empty front");
        return 0.0;
    }
    let reference = reference.value_cost_points();
    100.0 * points.intersection(&reference).count() as f64 / points.len() as f64
}

/// Drops solutions that select some `a` without `b` for a pair `a -> b`.
pub fn apply_requires_filter(front: &Front, pairs: &RequiresSet, ids: &[String]) -> Front {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let constraints: Vec<(usize, usize)> = pairs
        .iter()
        .filter_map(|p| Some((*index.get(p.from.as_str())?, *index.get(p.to.as_str())?)))
        .collect();
    Front {
        senses: front.senses.clone(),
        solutions: front
            .solutions
            .iter()
            .filter(|s| constraints.iter().all(|&(a, b)| !s.x[a] || s.x[b]))
            .cloned()
            .collect(),
    }
}

/// Fraction of `oracle`'s distinct objective tuples that `found` also
/// contains, and whether any found point dominates an oracle point.
pub fn oracle_coverage(found: &Front, oracle: &Front) -> (f64, bool) {
    let key = |s: &Solution| s.objectives.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let found_keys: BTreeSet<Vec<u64>> = found.solutions.iter().map(key).collect();
    let oracle_keys: BTreeMap<Vec<u64>, &Solution> = oracle.solutions.iter().map(|s| (key(s), s)).collect();
    let hit = oracle_keys.keys().filter(|k| found_keys.contains(*k)).count();
    let dominating = found.solutions.iter().any(|f| {
        oracle
            .solutions
            .iter()
            .any(|o| dominates_unchecked(&f.objectives, &o.objectives, &oracle.senses))
    });
    (hit as f64 / oracle_keys.len().max(1) as f64, dominating)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::requiresminer::{Provenance, RequiresPair};

    const BI: &[Sense] = &[Sense::Maximize, Sense::Minimize];

    fn sol(value: f64, cost: f64) -> Solution {
        Solution {
            x: vec![],
            objectives: vec![value, cost],
        }
    }

    fn front(points: &[(f64, f64)]) -> Front {
        Front {
            senses: BI.to_vec(),
            solutions: points.iter().map(|&(v, c)| sol(v, c)).collect(),
        }
    }

    fn small(values: &[f64], costs: &[f64]) -> NrpProblem {
        NrpProblem::new(
            (1..=values.len()).map(|i| format!("r{i}")).collect(),
            vec![values.to_vec()],
            vec![1.0],
            costs.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&sol(4713.0, 167.0), &sol(4097.0, 175.0), BI).unwrap());
        assert!(!dominates(&sol(1.0, 1.0), &sol(1.0, 1.0), BI).unwrap());
        assert!(!dominates(&sol(5.0, 10.0), &sol(10.0, 5.0), BI).unwrap());
        assert!(!dominates(&sol(10.0, 5.0), &sol(5.0, 10.0), &[Sense::Maximize, Sense::Maximize]).unwrap());
        assert!(dominates_objectives(&[1.0], &[1.0, 2.0], BI).is_err());
    }

    #[test]
    fn objectives_are_dot_products() {
        let p = NrpProblem::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec![1.0, 2.0],
            vec![7.0, 8.0, 9.0],
        )
        .unwrap();
        let s = p.evaluate(vec![true, false, true], ObjectiveSet::Bi).unwrap();
        assert_eq!(s.objectives, [1.0 + 8.0 + 3.0 + 12.0, 16.0]);
        assert!(p.evaluate(vec![true], ObjectiveSet::Bi).is_err());
        assert!(matches!(p.evaluate(vec![true; 3], ObjectiveSet::Tri), Err(Error::Config(_))));
    }

    #[test]
    fn brute_force_examples() {
        let one = brute_force_pareto(&small(&[3.0], &[2.0]), ObjectiveSet::Bi).unwrap();
        assert_eq!(one.len(), 2);
        // First two Word Processor rows: value 8+9+s3+9 vs 8+9+s3+9 with costs 22 and 25.
        let two = small(&[30.0, 30.0], &[22.0, 25.0]);
        let f = brute_force_pareto(&two, ObjectiveSet::Bi).unwrap();
        let bits: BTreeSet<String> = f.solutions.iter().map(Solution::bitstring).collect();
        assert_eq!(bits, ["00", "10", "11"].iter().map(|s| s.to_string()).collect());
        assert!(brute_force_pareto(&NrpProblem::random(21, 1, 0), ObjectiveSet::Bi).is_err());
    }

    #[test]
    fn reference_front_examples() {
        let a = front(&[(4097.0, 175.0)]);
        let b = front(&[(4713.0, 167.0)]);
        let r = reference_front(&[&a, &b]);
        assert_eq!(r.value_cost_points(), b.value_cost_points());
        let f = front(&[(1.0, 1.0), (2.0, 2.0), (1.0, 3.0)]);
        assert_eq!(reference_front(&[&f]).len(), 2);
        assert_eq!(reference_front(&[&f, &f]), reference_front(&[&f]));
    }

    #[test]
    fn share_examples() {
        let reference = front(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert_eq!(share_of_reference(&reference, &reference), 100.0);
        assert_eq!(share_of_reference(&front(&[(0.5, 4.0)]), &reference), 0.0);
        let five = front(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (0.5, 5.0), (0.2, 6.0)]);
        assert_eq!(share_of_reference(&five, &reference), 60.0);
        assert_eq!(share_of_reference(&front(&[]), &reference), 0.0);
    }

    #[test]
    fn requires_filter_examples() {
        let ids: Vec<String> = ["r1", "r2", "r3"].iter().map(|s| s.to_string()).collect();
        let p = small(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        let mk = |x: Vec<bool>| p.evaluate(x, ObjectiveSet::Bi).unwrap();
        let f = Front {
            senses: BI.to_vec(),
            solutions: vec![mk(vec![false, false, true]), mk(vec![false, true, true])],
        };
        let pairs = RequiresSet::from_pairs(Provenance::Gold, [RequiresPair::new("r3", "r2")]).unwrap();
        let kept = apply_requires_filter(&f, &pairs, &ids);
        assert_eq!(kept.solutions.len(), 1);
        assert_eq!(kept.solutions[0].bitstring(), "011");
        assert_eq!(apply_requires_filter(&f, &RequiresSet::new(Provenance::Gold), &ids), f);
    }

    #[test]
    fn nsga2_run_shape_and_determinism() {
        let p = NrpProblem::random(15, 3, 7);
        let params = SearchParams {
            population: 40,
            generations: 10,
            ..SearchParams::default()
        }
        .with_seed(3);
        let a = nsga2(&p, &params, ObjectiveSet::Bi).unwrap();
        let b = nsga2(&p, &params, ObjectiveSet::Bi).unwrap();
        assert_eq!(a.population, b.population);
        assert_eq!(a.manifest.evaluations, 400);
        assert_eq!(a.manifest.first_front_sizes.len(), 10);
        assert!(a.front.is_non_dominated());
        for s in &a.front.solutions {
            assert_eq!(p.evaluate(s.x.clone(), ObjectiveSet::Bi).unwrap(), *s);
        }
        assert!(nsga2(&p, &params, ObjectiveSet::Tri).is_err());
        let odd = SearchParams {
            population: 41,
            ..params
        };
        assert!(nsga2(&p, &odd, ObjectiveSet::Bi).is_err());
    }

    #[test]
    fn default_run_uses_ten_thousand_evaluations() {
        let p = NrpProblem::random(12, 2, 1);
        let run = nsga2(&p, &SearchParams::default(), ObjectiveSet::Bi).unwrap();
        assert_eq!(run.manifest.evaluations, 10_000);
        let oracle = brute_force_pareto(&p, ObjectiveSet::Bi).unwrap();
        let (coverage, dominating) = oracle_coverage(&run.front, &oracle);
        assert!(!dominating);
        assert!(coverage >= 0.9, "coverage {coverage}");
    }

    #[test]
    fn tri_objective_run() {
        let ids: Vec<String> = (1..=10).map(|i| format!("r{i}")).collect();
        let d = DValueVector {
            variant: crate::requiresminer::DValueVariant::Raw,
            ids: ids.clone(),
            values: (0..10).map(|i| i as f64 / 45.0).collect(),
            counts: (0..10).collect(),
            total_pairs: 45,
        };
        let p = NrpProblem::random(10, 2, 4).with_dvalues(&d).unwrap();
        let run = nsga2(&p, &SearchParams::default().with_seed(1), ObjectiveSet::Tri).unwrap();
        assert!(run.front.is_non_dominated());
        assert_eq!(run.front.solutions[0].objectives.len(), 3);
        let oracle = brute_force_pareto(&p, ObjectiveSet::Tri).unwrap();
        assert!(!oracle_coverage(&run.front, &oracle).1);
    }

    #[test]
    fn front_csv() {
        let p = small(&[3.0, 1.0], &[2.0, 1.0]);
        let f = brute_force_pareto(&p, ObjectiveSet::Bi).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "value,cost,bitstring\n0,0,00\n1,1,01\n3,2,10\n4,3,11\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn brute_force_front_is_exact(seed in any::<u64>(), n in 1usize..9) {
                let p = NrpProblem::random(n, 2, seed);
                let f = brute_force_pareto(&p, ObjectiveSet::Bi).unwrap();
                prop_assert!(f.is_non_dominated());
                // every subset is dominated by or equal to some front point
                for mask in 0u32..1 << n {
                    let s = p.evaluate((0..n).map(|i| mask >> i & 1 == 1).collect(), ObjectiveSet::Bi).unwrap();
                    prop_assert!(f.solutions.iter().any(|o| o.objectives == s.objectives
                        || dominates_unchecked(&o.objectives, &s.objectives, BI)));
                }
            }

            #[test]
            fn nsga_front_never_beats_oracle(seed in any::<u64>()) {
                let p = NrpProblem::random(8, 2, seed);
                let params = SearchParams { population: 20, generations: 5, ..SearchParams::default() }.with_seed(seed);
                let run = nsga2(&p, &params, ObjectiveSet::Bi).unwrap();
                let oracle = brute_force_pareto(&p, ObjectiveSet::Bi).unwrap();
                prop_assert!(!oracle_coverage(&run.front, &oracle).1);
                prop_assert!(run.front.is_non_dominated());
            }

            #[test]
            fn share_of_own_reference_is_full(points in proptest::collection::vec((0u8..20, 0u8..20), 1..15)) {
                let f = front(&points.iter().map(|&(v, c)| (v as f64, c as f64)).collect::<Vec<_>>());
                let r = reference_front(&[&f]);
                prop_assert_eq!(share_of_reference(&r, &r), 100.0);
                prop_assert!(r.is_non_dominated());
            }

            /// Single-requirement selections compare identically under raw,
            /// log and power D-values, since those transforms preserve order.
            #[test]
            fn monotone_variants_preserve_dominance(raw in proptest::collection::vec(0.0f64..1.0, 4), seed in any::<u64>()) {
                use crate::requiresminer::{dvalue_variant, DValueVariant};
                let ids: Vec<String> = (1..=4).map(|i| format!("r{i}")).collect();
                let base = NrpProblem::random(4, 1, seed);
                let rawv = DValueVector { variant: DValueVariant::Raw, ids, values: raw, counts: vec![0; 4], total_pairs: 0 };
                let senses = ObjectiveSet::Tri.senses();
                let mut relations = Vec::new();
                for v in [DValueVariant::Raw, DValueVariant::Log, DValueVariant::Power] {
                    let p = base.clone().with_dvalues(&dvalue_variant(&rawv, v).unwrap()).unwrap();
                    let singles: Vec<Solution> = (0..4)
                        .map(|i| p.evaluate((0..4).map(|j| j == i).collect(), ObjectiveSet::Tri).unwrap())
                        .collect();
                    let rel: Vec<bool> = singles.iter().flat_map(|a| singles.iter()
                        .map(|b| dominates_unchecked(&a.objectives, &b.objectives, senses))).collect();
                    relations.push(rel);
                }
                prop_assert_eq!(&relations[0], &relations[1]);
                prop_assert_eq!(&relations[0], &relations[2]);
            }
        }
    }
}
