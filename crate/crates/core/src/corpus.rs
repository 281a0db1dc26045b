//! Requirements, feedback messages, release schedules and the time-windowed
//! prioritization instances built from them.
//!
//! Requirements come from release notes and carry the month they shipped in.
//! Two consecutive release periods form one instance: the earlier period is the
//! ground truth, and only reviews written before the earlier period (at most
//! roughly two years' worth) are admissible evidence.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Months, NaiveDate};
use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Months of review history admitted before the cut-off month.
pub const REVIEW_HISTORY_MONTHS: u32 = 24;

/// A calendar release period (year and month), ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    year: i32,
    month: u32,
}

impl Period {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range")));
        }
        Ok(Period { year, month })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("validated period")
    }

    pub fn last_day(&self) -> NaiveDate {
        self.plus_months(1).first_day().pred_opt().expect("date in range")
    }

    pub fn plus_months(&self, months: u32) -> Period {
        let d = self.first_day() + Months::new(months);
        Period {
            year: d.year(),
            month: d.month(),
        }
    }

    pub fn minus_months(&self, months: u32) -> Period {
        let d = self.first_day() - Months::new(months);
        Period {
            year: d.year(),
            month: d.month(),
        }
    }

    pub fn of_date(date: NaiveDate) -> Period {
        Period {
            year: date.year(),
            month: date.month(),
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Data(format!("period `{s}` is not YYYY-MM")))?;
        let year = y
            .parse::<i32>()
            .map_err(|_| Error::Data(format!("period `{s}` has a bad year")))?;
        let month = m
            .parse::<u32>()
            .map_err(|_| Error::Data(format!("period `{s}` has a bad month")))?;
        if y.len() != 4 || m.len() != 2 {
            return Err(Error::Data(format!("period `{s}` is not YYYY-MM")));
        }
        Period::new(year, month)
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A candidate requirement. Benchmark requirements have no release period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub text: String,
    pub period: Option<Period>,
    pub app: String,
}

impl Requirement {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Requirement {
            id: id.into(),
            text: text.into(),
            period: None,
            app: String::new(),
        }
    }

    pub fn in_period(mut self, period: Period) -> Self {
        self.period = Some(period);
        self
    }

    pub fn for_app(mut self, app: impl Into<String>) -> Self {
        self.app = app.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub id: String,
    pub text: String,
    pub timestamp: NaiveDate,
    pub app: String,
    pub rating: Option<u8>,
}

impl FeedbackMessage {
    pub fn new(id: impl Into<String>, text: impl Into<String>, timestamp: NaiveDate) -> Self {
        FeedbackMessage {
            id: id.into(),
            text: text.into(),
            timestamp,
            app: String::new(),
            rating: None,
        }
    }
}

/// `r_1` style benchmark labels are folded to `r1`.
pub fn normalize_id(raw: &str) -> String {
    static PATTERN: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = PATTERN.get_or_init(|| Regex::new(r"^([A-Za-z]+)_(\d+)$").unwrap());
    let raw = raw.trim();
    match re.captures(raw) {
        Some(c) => format!("{}{}", &c[1], &c[2]),
        None => raw.to_string(),
    }
}

#[derive(Debug, Deserialize)]
struct RequirementRecord {
    id: String,
    text: String,
    #[serde(default)]
    period: Option<String>,
    #[serde(default)]
    app: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ReviewRecord {
    id: String,
    text: String,
    timestamp: String,
    #[serde(default)]
    app: Option<String>,
    #[serde(default, deserialize_with = "empty_as_none")]
    rating: Option<i64>,
}

fn empty_as_none<'de, D>(d: D) -> std::result::Result<Option<i64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Str(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Int(v)) => Ok(Some(v)),
        Some(Raw::Str(s)) if s.trim().is_empty() => Ok(None),
        Some(Raw::Str(s)) => s.trim().parse().map(Some).map_err(serde::de::Error::custom),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads every record of a CSV (with header) or JSON array file, reporting the
/// 1-based data row of the first record that fails to deserialize.
pub(crate) fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let name = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_json(path) {
        if bytes.iter().all(|b| b.is_ascii_whitespace()) {
            return Ok(Vec::new());
        }
        let values: Vec<serde_json::Value> =
            serde_json::from_slice(&bytes).map_err(|e| Error::parse(&name, 0, e.to_string()))?;
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| serde_json::from_value(v).map_err(|e| Error::parse(&name, i + 1, e.to_string())))
            .collect()
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        reader
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::parse(&name, i + 1, e.to_string())))
            .collect()
    }
}

/// Loads requirements from a CSV (`id,text,period,app`) or JSON file.
///
/// `period` and `app` may be omitted (benchmark-style files); instances can
/// only be built from requirements that carry a period.
pub fn load_requirements(path: &Path) -> Result<Vec<Requirement>> {
    let name = path.display().to_string();
    let records: Vec<RequirementRecord> = read_records(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        let row = i + 1;
        let id = normalize_id(&rec.id);
        if id.is_empty() {
            return Err(Error::parse(&name, row, "empty id"));
        }
        if rec.text.trim().is_empty() {
            return Err(Error::parse(&name, row, format!("requirement {id} has empty text")));
        }
        let period = match rec.period.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(p) => Some(p.parse::<Period>().map_err(|e| Error::parse(&name, row, e.to_string()))?),
        };
        if !seen.insert(id.clone()) {
            return Err(Error::Integrity(format!("duplicate requirement id `{id}` (row {row} of {name})")));
        }
        out.push(Requirement {
            id,
            text: rec.text.trim().to_string(),
            period,
            app: rec.app.unwrap_or_default().trim().to_string(),
        });
    }
    Ok(out)
}

/// Loads reviews from a CSV (`id,text,timestamp,app,rating`) or JSON file.
/// Duplicate texts under distinct ids are kept.
pub fn load_reviews(path: &Path) -> Result<Vec<FeedbackMessage>> {
    let name = path.display().to_string();
    let records: Vec<ReviewRecord> = read_records(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        let row = i + 1;
        if rec.text.trim().is_empty() {
            return Err(Error::parse(&name, row, format!("review {} has empty text", rec.id)));
        }
        let timestamp = NaiveDate::parse_from_str(rec.timestamp.trim(), "%Y-%m-%d")
            .map_err(|e| Error::parse(&name, row, format!("bad timestamp `{}`: {e}", rec.timestamp)))?;
        let rating = match rec.rating {
            None => None,
            Some(r @ 1..=5) => Some(r as u8),
            Some(r) => return Err(Error::parse(&name, row, format!("rating {r} outside 1-5"))),
        };
        if !seen.insert(rec.id.clone()) {
            return Err(Error::Integrity(format!("duplicate review id `{}` (row {row} of {name})", rec.id)));
        }
        out.push(FeedbackMessage {
            id: rec.id.trim().to_string(),
            text: rec.text.trim().to_string(),
            timestamp,
            app: rec.app.unwrap_or_default().trim().to_string(),
            rating,
        });
    }
    Ok(out)
}

/// One row of an NRP benchmark file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub id: String,
    pub text: String,
    /// One score per stakeholder, in column order.
    pub values: Vec<f64>,
    pub design: f64,
    pub development: f64,
    pub qa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Benchmark {
    pub stakeholders: usize,
    pub rows: Vec<BenchmarkRow>,
}

impl Benchmark {
    pub fn requirements(&self) -> Vec<Requirement> {
        self.rows.iter().map(|r| Requirement::new(r.id.clone(), r.text.clone())).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.id.clone()).collect()
    }
}

/// Loads an NRP benchmark CSV with header
/// `id,text,value_s1..value_sK,design,development,qa`.
pub fn load_benchmark(path: &Path) -> Result<Benchmark> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(&name, 0, e.to_string()))?
        .clone();
    let col = |h: &str| headers.iter().position(|x| x == h);
    let (id_col, text_col) = match (col("id"), col("text")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::parse(&name, 0, "header must contain `id` and `text`")),
    };
    let mut value_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("value_s").and_then(|k| k.parse().ok()).map(|k| (k, i)))
        .collect();
    value_cols.sort();
    if value_cols.is_empty() {
        return Err(Error::parse(&name, 0, "no value_s<k> stakeholder columns"));
    }
    let (design_col, dev_col, qa_col) = match (col("design"), col("development"), col("qa")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::parse(&name, 0, "header must contain design, development and qa")),
    };

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(&name, row, e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::parse(&name, row, format!("`{raw}` is not a number")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parse(&name, row, format!("`{raw}` must be a non-negative number")));
            }
            Ok(v)
        };
        let id = normalize_id(rec.get(id_col).unwrap_or(""));
        if !seen.insert(id.clone()) {
            return Err(Error::Integrity(format!("duplicate requirement id `{id}` (row {row} of {name})")));
        }
        rows.push(BenchmarkRow {
            id,
            text: rec.get(text_col).unwrap_or("").to_string(),
            values: value_cols.iter().map(|&(_, c)| num(c)).collect::<Result<_>>()?,
            design: num(design_col)?,
            development: num(dev_col)?,
            qa: num(qa_col)?,
        });
    }
    Ok(Benchmark {
        stakeholders: value_cols.len(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchedulePeriod {
    pub period: Period,
    pub requirement_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReleaseSchedule {
    pub app: String,
    periods: Vec<SchedulePeriod>,
}

impl ReleaseSchedule {
    pub fn new(app: impl Into<String>, periods: Vec<SchedulePeriod>) -> Result<Self> {
        if periods.windows(2).any(|w| w[0].period >= w[1].period) {
            return Err(Error::Integrity("release periods must be strictly increasing".into()));
        }
        let mut seen = HashSet::new();
        for p in &periods {
            for id in &p.requirement_ids {
                if !seen.insert(id.as_str()) {
                    return Err(Error::Integrity(format!("requirement `{id}` scheduled in more than one period")));
                }
            }
        }
        Ok(ReleaseSchedule {
            app: app.into(),
            periods,
        })
    }

    /// Groups requirements of `app` by release period.
    pub fn from_requirements(app: &str, requirements: &[Requirement]) -> Result<Self> {
        let mut grouped: BTreeMap<Period, Vec<String>> = BTreeMap::new();
        for r in requirements.iter().filter(|r| app.is_empty() || r.app == app) {
            let period = r
                .period
                .ok_or_else(|| Error::Data(format!("requirement `{}` has no release period", r.id)))?;
            grouped.entry(period).or_default().push(r.id.clone());
        }
        ReleaseSchedule::new(
            app,
            grouped
                .into_iter()
                .map(|(period, requirement_ids)| SchedulePeriod {
                    period,
                    requirement_ids,
                })
                .collect(),
        )
    }

    pub fn periods(&self) -> &[SchedulePeriod] {
        &self.periods
    }
}

/// Inclusive calendar range of admissible reviews.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReviewWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl ReviewWindow {
    /// The window for an instance whose earlier (ground-truth) period is
    /// `release`: it closes at the end of the preceding month and reaches back
    /// [`REVIEW_HISTORY_MONTHS`] months before that month.
    pub fn preceding(release: Period) -> Self {
        let cutoff = release.minus_months(1);
        ReviewWindow {
            start: cutoff.minus_months(REVIEW_HISTORY_MONTHS).first_day(),
            end: cutoff.last_day(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrioritizationInstance {
    pub id: String,
    pub app: String,
    pub earlier: Period,
    pub later: Period,
    pub requirements: Vec<Requirement>,
    pub ground_truth: BTreeSet<String>,
    pub window: ReviewWindow,
}

impl PrioritizationInstance {
    pub fn n(&self) -> usize {
        self.requirements.len()
    }

    pub fn k(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn requirement_ids(&self) -> Vec<String> {
        self.requirements.iter().map(|r| r.id.clone()).collect()
    }
}

/// One instance per consecutive pair of release periods. Pairs where either
/// period is empty are skipped with a warning.
pub fn build_instances(
    schedule: &ReleaseSchedule,
    requirements: &[Requirement],
) -> Result<Vec<PrioritizationInstance>> {
    let by_id: HashMap<&str, &Requirement> = requirements.iter().map(|r| (r.id.as_str(), r)).collect();
    let lookup = |id: &str| -> Result<Requirement> {
        by_id
            .get(id)
            .map(|r| (*r).clone())
            .ok_or_else(|| Error::Integrity(format!("scheduled requirement `{id}` not found")))
    };

    let mut out = Vec::new();
    for pair in schedule.periods.windows(2) {
        let (earlier, later) = (&pair[0], &pair[1]);
        if earlier.requirement_ids.is_empty() || later.requirement_ids.is_empty() {
            warn!(
                "skipping instance {}/{}: a period has no requirements",
                earlier.period, later.period
            );
            continue;
        }
        let mut reqs = Vec::with_capacity(earlier.requirement_ids.len() + later.requirement_ids.len());
        for id in earlier.requirement_ids.iter().chain(&later.requirement_ids) {
            reqs.push(lookup(id)?);
        }
        let prefix = if schedule.app.is_empty() {
            String::new()
        } else {
            format!("{}:", schedule.app)
        };
        out.push(PrioritizationInstance {
            id: format!("{prefix}{}/{}", earlier.period, later.period),
            app: schedule.app.clone(),
            earlier: earlier.period,
            later: later.period,
            requirements: reqs,
            ground_truth: earlier.requirement_ids.iter().cloned().collect(),
            window: ReviewWindow::preceding(earlier.period),
        });
    }
    Ok(out)
}

/// Reviews admissible for `instance`, sorted by timestamp then id. When the
/// corpus starts inside the window every available earlier review is kept.
pub fn window_reviews(messages: &[FeedbackMessage], instance: &PrioritizationInstance) -> Vec<FeedbackMessage> {
    let mut out: Vec<FeedbackMessage> = messages
        .iter()
        .filter(|m| instance.app.is_empty() || m.app.is_empty() || m.app == instance.app)
        .filter(|m| instance.window.contains(m.timestamp))
        .cloned()
        .collect();
    out.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ym(s: &str) -> Period {
        s.parse().unwrap()
    }

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn reqs(spec: &[(&str, usize)]) -> Vec<Requirement> {
        let mut out = Vec::new();
        for (p, count) in spec {
            for i in 0..*count {
                out.push(Requirement::new(format!("{p}-{i}"), "some feature").in_period(ym(p)));
            }
        }
        out
    }

    #[test]
    fn period_parsing_and_order() {
        assert!(ym("2024-12") < ym("2025-01"));
        assert_eq!(ym("2025-02").to_string(), "2025-02");
        assert_eq!(ym("2024-03").last_day(), date("2024-03-31"));
        assert_eq!(ym("2024-02").last_day(), date("2024-02-29"));
        assert!("2025-13".parse::<Period>().is_err());
        assert!("2025/01".parse::<Period>().is_err());
        assert!("25-01".parse::<Period>().is_err());
    }

    #[test]
    fn benchmark_style_row_normalizes_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "id,text\nr_1,Create a new file\n");
        let r = load_requirements(&p).unwrap();
        assert_eq!(r, vec![Requirement::new("r1", "Create a new file")]);
    }

    #[test]
    fn empty_files_load_as_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_requirements(&write(&dir, "a.csv", "")).unwrap().is_empty());
        assert!(load_requirements(&write(&dir, "b.csv", "id,text,period,app\n")).unwrap().is_empty());
        assert!(load_requirements(&write(&dir, "c.json", "[]")).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "id,text,period,app\nr7,a,2025-01,x\nr7,b,2025-02,x\n");
        assert!(matches!(load_requirements(&p), Err(Error::Integrity(_))));
    }

    #[test]
    fn malformed_row_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "r.csv", "id,text,period,app\nr1,a,2025-01,x\nr2,b,2025-1x,x\n");
        match load_requirements(&p) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let p = write(&dir, "v.csv", "id,text,timestamp,app,rating\nm1,ok,2024-01-01,x,9\n");
        assert!(matches!(load_reviews(&p), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn json_requirements_and_reviews() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "r.json",
            r#"[{"id":"a","text":"Share screen","period":"2025-02","app":"zoom"}]"#,
        );
        let r = load_requirements(&p).unwrap();
        assert_eq!(r[0].period, Some(ym("2025-02")));
        let p = write(
            &dir,
            "m.json",
            r#"[{"id":"m1","text":"great","timestamp":"2024-05-01","app":"zoom","rating":5},
                {"id":"m2","text":"meh","timestamp":"2024-05-02","app":"zoom","rating":null}]"#,
        );
        let m = load_reviews(&p).unwrap();
        assert_eq!(m[0].rating, Some(5));
        assert_eq!(m[1].rating, None);
    }

    #[test]
    fn csv_reviews_allow_missing_rating() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "id,text,timestamp,app,rating\nm1,\"Good app. Thanks\",2024-01-03,zoom,\n");
        let m = load_reviews(&p).unwrap();
        assert_eq!(m[0].rating, None);
        assert_eq!(m[0].text, "Good app. Thanks");
    }

    #[test]
    fn benchmark_file_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "wp.csv",
            "id,text,value_s1,value_s2,value_s3,value_s4,design,development,qa\n\
             r_1,Create a new file,8,9,8,9,17,22,12\n",
        );
        let b = load_benchmark(&p).unwrap();
        assert_eq!(b.stakeholders, 4);
        assert_eq!(b.rows[0].id, "r1");
        assert_eq!(b.rows[0].values, vec![8.0, 9.0, 8.0, 9.0]);
        assert_eq!(b.rows[0].development, 22.0);
    }

    #[test]
    fn zoom_instance_shape() {
        let r = reqs(&[("2025-02", 19), ("2025-03", 52)]);
        let s = ReleaseSchedule::from_requirements("", &r).unwrap();
        let inst = build_instances(&s, &r).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!((inst[0].n(), inst[0].k()), (71, 19));
    }

    #[test]
    fn three_periods_give_two_instances() {
        let r = reqs(&[("2024-01", 2), ("2024-02", 3), ("2024-03", 4)]);
        let s = ReleaseSchedule::from_requirements("", &r).unwrap();
        let inst = build_instances(&s, &r).unwrap();
        let shapes: Vec<_> = inst.iter().map(|i| (i.n(), i.k())).collect();
        assert_eq!(shapes, vec![(5, 2), (7, 3)]);
        for i in &inst {
            let later = i.requirements.iter().filter(|r| !i.ground_truth.contains(&r.id)).count();
            assert_eq!(i.k() + later, i.n());
        }
    }

    #[test]
    fn single_period_gives_nothing() {
        let r = reqs(&[("2024-01", 3)]);
        let s = ReleaseSchedule::from_requirements("", &r).unwrap();
        assert!(build_instances(&s, &r).unwrap().is_empty());
    }

    #[test]
    fn empty_period_is_skipped() {
        let r = reqs(&[("2024-01", 2), ("2024-03", 2)]);
        let s = ReleaseSchedule::new(
            "",
            vec![
                SchedulePeriod {
                    period: ym("2024-01"),
                    requirement_ids: vec!["2024-01-0".into(), "2024-01-1".into()],
                },
                SchedulePeriod {
                    period: ym("2024-02"),
                    requirement_ids: vec![],
                },
                SchedulePeriod {
                    period: ym("2024-03"),
                    requirement_ids: vec!["2024-03-0".into(), "2024-03-1".into()],
                },
            ],
        )
        .unwrap();
        assert!(build_instances(&s, &r).unwrap().is_empty());
    }

    #[test]
    fn schedule_rejects_unordered_or_repeated() {
        let p = |s: &str, ids: &[&str]| SchedulePeriod {
            period: ym(s),
            requirement_ids: ids.iter().map(|x| x.to_string()).collect(),
        };
        assert!(ReleaseSchedule::new("", vec![p("2024-02", &["a"]), p("2024-01", &["b"])]).is_err());
        assert!(ReleaseSchedule::new("", vec![p("2024-01", &["a"]), p("2024-02", &["a"])]).is_err());
    }

    #[test]
    fn february_instance_uses_jan_2023_to_jan_2025() {
        let r = reqs(&[("2025-02", 1), ("2025-03", 1)]);
        let s = ReleaseSchedule::from_requirements("", &r).unwrap();
        let inst = &build_instances(&s, &r).unwrap()[0];
        assert_eq!(inst.window.start, date("2023-01-01"));
        assert_eq!(inst.window.end, date("2025-01-31"));

        let msgs: Vec<_> = ["2022-12-31", "2023-01-01", "2024-06-15", "2025-01-31", "2025-02-01"]
            .iter()
            .enumerate()
            .map(|(i, d)| FeedbackMessage::new(format!("m{i}"), "text", date(d)))
            .collect();
        let kept: Vec<_> = window_reviews(&msgs, inst).into_iter().map(|m| m.id).collect();
        assert_eq!(kept, vec!["m1", "m2", "m3"]);
    }

    #[test]
    fn short_history_keeps_everything_available() {
        let r = reqs(&[("2025-02", 1), ("2025-03", 1)]);
        let s = ReleaseSchedule::from_requirements("", &r).unwrap();
        let inst = &build_instances(&s, &r).unwrap()[0];
        let msgs: Vec<_> = (0..6)
            .map(|i| FeedbackMessage::new(format!("m{i}"), "text", ym("2024-08").plus_months(i).first_day()))
            .collect();
        assert_eq!(window_reviews(&msgs, inst).len(), 6);

        let late: Vec<_> = (0..3)
            .map(|i| FeedbackMessage::new(format!("x{i}"), "text", ym("2025-03").plus_months(i).first_day()))
            .collect();
        assert!(window_reviews(&late, inst).is_empty());
    }

    #[test]
    fn window_filters_other_apps() {
        let r: Vec<_> = reqs(&[("2025-02", 1), ("2025-03", 1)])
            .into_iter()
            .map(|r| r.for_app("zoom"))
            .collect();
        let s = ReleaseSchedule::from_requirements("zoom", &r).unwrap();
        let inst = &build_instances(&s, &r).unwrap()[0];
        let mut a = FeedbackMessage::new("a", "t", date("2024-01-01"));
        a.app = "zoom".into();
        let mut b = FeedbackMessage::new("b", "t", date("2024-01-01"));
        b.app = "webex".into();
        let kept = window_reviews(&[a, b], inst);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "a");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn windowing_is_idempotent_and_precedes_release(
                days in proptest::collection::vec(0i64..2500, 0..60),
                release_offset in 0u32..60,
            ) {
                let release = ym("2021-01").plus_months(release_offset);
                let r = vec![
                    Requirement::new("a", "x").in_period(release),
                    Requirement::new("b", "y").in_period(release.plus_months(1)),
                ];
                let s = ReleaseSchedule::from_requirements("", &r).unwrap();
                let inst = &build_instances(&s, &r).unwrap()[0];
                let base = date("2019-01-01");
                let msgs: Vec<_> = days
                    .iter()
                    .enumerate()
                    .map(|(i, d)| FeedbackMessage::new(format!("m{i}"), "t", base + chrono::Duration::days(*d)))
                    .collect();
                let once = window_reviews(&msgs, inst);
                let twice = window_reviews(&once, inst);
                prop_assert_eq!(&once, &twice);
                for m in &once {
                    prop_assert!(m.timestamp < release.first_day());
                }
            }
        }
    }
}
