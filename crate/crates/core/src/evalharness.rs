//! Ranking evaluation: cutoff protocol, recall/precision/F-scores, and the
//! paired significance tests used to compare methods.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CutoffLabel {
    #[serde(rename = "k-20")]
    KMinus20,
    #[serde(rename = "k-10")]
    KMinus10,
    #[serde(rename = "k")]
    K,
    #[serde(rename = "k+10")]
    KPlus10,
    #[serde(rename = "k+20")]
    KPlus20,
}

impl CutoffLabel {
    pub const ALL: [CutoffLabel; 5] = [
        CutoffLabel::KMinus20,
        CutoffLabel::KMinus10,
        CutoffLabel::K,
        CutoffLabel::KPlus10,
        CutoffLabel::KPlus20,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CutoffLabel::KMinus20 => "k-20",
            CutoffLabel::KMinus10 => "k-10",
            CutoffLabel::K => "k",
            CutoffLabel::KPlus10 => "k+10",
            CutoffLabel::KPlus20 => "k+20",
        }
    }

    /// Offset from `k` in tenths of `n`.
    fn tenths(self) -> i64 {
        match self {
            CutoffLabel::KMinus20 => -2,
            CutoffLabel::KMinus10 => -1,
            CutoffLabel::K => 0,
            CutoffLabel::KPlus10 => 1,
            CutoffLabel::KPlus20 => 2,
        }
    }
}

impl std::fmt::Display for CutoffLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The five cutoff sizes `k + d*n/10` for `d` in -2..=2, rounded half away
/// from zero and clamped to `[1, n]`. Computed in integer tenths so that
/// values such as 4.5 round exactly.
pub fn cutoffs(k: usize, n: usize) -> [(CutoffLabel, usize); 5] {
    let n_max = n.max(1) as i64;
    CutoffLabel::ALL.map(|label| {
        let tenths = 10 * k as i64 + label.tenths() * n as i64;
        let rounded = tenths.signum() * ((tenths.abs() + 5) / 10);
        (label, rounded.clamp(1, n_max) as usize)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub f2: f64,
}

impl Prf {
    pub fn from_rp(recall: f64, precision: f64) -> Self {
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        let f2 = if 4.0 * precision + recall == 0.0 {
            0.0
        } else {
            5.0 * recall * precision / (4.0 * precision + recall)
        };
        Prf {
            recall,
            precision,
            f1,
            f2,
        }
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Recall => self.recall,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
            Metric::F2 => self.f2,
        }
    }
}

/// Recall and precision of `selected` against `truth`; duplicates in the
/// selection count once.
pub fn prf<'a, T: Ord + 'a>(selected: impl IntoIterator<Item = &'a T>, truth: &BTreeSet<T>) -> Prf {
    let sel: BTreeSet<&T> = selected.into_iter().collect();
    let hits = sel.iter().filter(|s| truth.contains(**s)).count() as f64;
    let recall = if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 };
    let precision = if sel.is_empty() { 0.0 } else { hits / sel.len() as f64 };
    Prf::from_rp(recall, precision)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Recall,
    Precision,
    F1,
    F2,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Recall, Metric::Precision, Metric::F1, Metric::F2];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Precision => "precision",
            Metric::F1 => "f1",
            Metric::F2 => "f2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub instance: String,
    pub method: String,
    pub cutoff_label: CutoffLabel,
    pub cutoff_size: usize,
    #[serde(flatten)]
    pub prf: Prf,
}

/// Five metric rows for one ranked list, one per cutoff.
pub fn evaluate_ranking(instance: &str, method: &str, ranking: &[String], truth: &BTreeSet<String>) -> Vec<MetricsRow> {
    cutoffs(truth.len(), ranking.len())
        .into_iter()
        .map(|(label, size)| MetricsRow {
            instance: instance.to_string(),
            method: method.to_string(),
            cutoff_label: label,
            cutoff_size: size,
            prf: prf(ranking.iter().take(size), truth),
        })
        .collect()
}

pub fn write_metrics_csv(rows: &[MetricsRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Data(format!("writing metrics: {e}"));
    w.write_record(["instance", "method", "cutoff_label", "cutoff_size", "recall", "precision", "f1", "f2"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.method.clone(),
            r.cutoff_label.to_string(),
            r.cutoff_size.to_string(),
            format!("{:.6}", r.prf.recall),
            format!("{:.6}", r.prf.precision),
            format!("{:.6}", r.prf.f1),
            format!("{:.6}", r.prf.f2),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing metrics: {e}")))
}

/// Differences with magnitude at or below this are treated as zero, and
/// magnitudes closer than this are treated as tied.
const DIFF_EPS: f64 = 1e-12;
const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub m: usize,
    pub p_value: f64,
    pub exact: bool,
    /// Set when every difference was zero and no test was possible.
    pub degenerate: bool,
}

/// Two-sided Wilcoxon signed-rank test on `(variant, baseline)` pairs.
///
/// Zero differences are dropped and tied magnitudes share their average rank.
/// Up to 25 non-zero differences use the exact null distribution (with ties,
/// the distribution of the tied ranks); beyond that a normal approximation
/// with continuity and tie corrections.
pub fn wilcoxon(pairs: &[(f64, f64)]) -> WilcoxonResult {
    let mut diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).filter(|d| d.abs() > DIFF_EPS).collect();
    let m = diffs.len();
    if m == 0 {
        return WilcoxonResult {
            w_plus: 0.0,
            m: 0,
            p_value: 1.0,
            exact: true,
            degenerate: true,
        };
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    // Doubled average ranks are integers, which keeps the exact DP integral.
    let mut doubled = vec![0usize; m];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && (diffs[j].abs() - diffs[i].abs()).abs() <= DIFF_EPS {
            j += 1;
        }
        // ranks i+1..=j, average (i+1+j)/2, doubled i+1+j
        for d in &mut doubled[i..j] {
            *d = i + 1 + j;
        }
        tie_sizes.push(j - i);
        i = j;
    }
    let t_plus: usize = diffs.iter().zip(&doubled).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_plus = t_plus as f64 / 2.0;

    let (p, exact) = if m <= EXACT_LIMIT {
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0f64; total + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=total).rev() {
                counts[s] += counts[s - r];
            }
        }
        let all = 2f64.powi(m as i32);
        let lower: f64 = counts[..=t_plus].iter().sum::<f64>() / all;
        let upper: f64 = counts[t_plus..].iter().sum::<f64>() / all;
        ((2.0 * lower.min(upper)).min(1.0), true)
    } else {
        let mf = m as f64;
        let mean = mf * (mf + 1.0) / 4.0;
        let tie_adj: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_adj;
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        ((2.0 * normal.sf(z)).min(1.0), false)
    };
    WilcoxonResult {
        w_plus,
        m,
        p_value: p,
        exact,
        degenerate: false,
    }
}

/// Fisher's combination: `X = -2 * sum(ln p)` referred to a chi-squared
/// distribution with `2m` degrees of freedom. Zero inputs are clipped to the
/// smallest positive double.
pub fn fisher_combine(pvalues: &[f64]) -> Result<f64> {
    if pvalues.is_empty() {
        return Err(Error::Data("Fisher's method needs at least one p-value".into()));
    }
    let mut x = 0.0;
    for &p in pvalues {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::Data(format!("p-value {p} outside [0, 1]")));
        }
        let p = if p == 0.0 {
            warn!("p-value of 0 clipped to {:e}", f64::MIN_POSITIVE);
            f64::MIN_POSITIVE
        } else {
            p
        };
        x -= 2.0 * p.ln();
    }
    Ok(chi2_even_sf(x, pvalues.len()))
}

/// Upper tail of chi-squared with `2m` degrees of freedom:
/// `exp(-x/2) * sum_{j<m} (x/2)^j / j!`.
fn chi2_even_sf(x: f64, m: usize) -> f64 {
    let h = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..m {
        term *= h / j as f64;
        sum += term;
    }
    ((-h).exp() * sum).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub metric: Metric,
    pub cutoff_label: CutoffLabel,
    pub variant: String,
    pub wilcoxon_p: f64,
    pub degenerate: bool,
    /// Combined over all variants at this `(metric, cutoff)`.
    pub fisher_p: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatReport {
    pub baseline: String,
    pub rows: Vec<StatRow>,
}

/// Compares each variant against `baseline`, pairing metric values by
/// instance at every `(metric, cutoff)`. Instances missing either method are
/// skipped.
pub fn stat_report(rows: &[MetricsRow], baseline: &str, variants: &[&str]) -> Result<StatReport> {
    let mut by_key: BTreeMap<(&str, CutoffLabel, &str), &Prf> = BTreeMap::new();
    for r in rows {
        by_key.insert((r.method.as_str(), r.cutoff_label, r.instance.as_str()), &r.prf);
    }
    let instances: BTreeSet<&str> = rows.iter().map(|r| r.instance.as_str()).collect();
    let mut out = Vec::new();
    for metric in Metric::ALL {
        for label in CutoffLabel::ALL {
            let mut group = Vec::new();
            for &v in variants {
                let pairs: Vec<(f64, f64)> = instances
                    .iter()
                    .filter_map(|inst| {
                        let a = by_key.get(&(v, label, inst))?;
                        let b = by_key.get(&(baseline, label, inst))?;
                        Some((a.metric(metric), b.metric(metric)))
                    })
                    .collect();
                let w = wilcoxon(&pairs);
                group.push(StatRow {
                    metric,
                    cutoff_label: label,
                    variant: v.to_string(),
                    wilcoxon_p: w.p_value,
                    degenerate: w.degenerate,
                    fisher_p: 1.0,
                });
            }
            if !group.is_empty() {
                let ps: Vec<f64> = group.iter().map(|g| g.wilcoxon_p).collect();
                let f = fisher_combine(&ps)?;
                for g in &mut group {
                    g.fisher_p = f;
                }
            }
            out.extend(group);
        }
    }
    Ok(StatReport {
        baseline: baseline.to_string(),
        rows: out,
    })
}

pub fn write_stats_csv(report: &StatReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Data(format!("writing stats: {e}"));
    w.write_record(["metric", "cutoff_label", "variant", "wilcoxon_p", "fisher_p"]).map_err(err)?;
    for r in &report.rows {
        w.write_record([
            r.metric.as_str().to_string(),
            r.cutoff_label.to_string(),
            r.variant.clone(),
            format!("{:.6e}", r.wilcoxon_p),
            format!("{:.6e}", r.fisher_p),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("writing stats: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub cutoff_label: CutoffLabel,
    pub mean: f64,
}

/// Per-dataset, per-metric series of instance-averaged values for each
/// method, ordered by cutoff.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlotData {
    pub datasets: BTreeMap<String, BTreeMap<String, BTreeMap<String, Vec<SeriesPoint>>>>,
}

impl PlotData {
    pub fn add_dataset(&mut self, dataset: &str, rows: &[MetricsRow]) {
        let mut sums: BTreeMap<(&str, CutoffLabel), (Prf, usize)> = BTreeMap::new();
        for r in rows {
            let e = sums.entry((r.method.as_str(), r.cutoff_label)).or_default();
            e.0.recall += r.prf.recall;
            e.0.precision += r.prf.precision;
            e.0.f1 += r.prf.f1;
            e.0.f2 += r.prf.f2;
            e.1 += 1;
        }
        let ds = self.datasets.entry(dataset.to_string()).or_default();
        for metric in Metric::ALL {
            let series = ds.entry(metric.as_str().to_string()).or_default();
            for (&(method, label), (sum, count)) in &sums {
                series.entry(method.to_string()).or_default().push(SeriesPoint {
                    cutoff_label: label,
                    mean: sum.metric(metric) / *count as f64,
                });
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
