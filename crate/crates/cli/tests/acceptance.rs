//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion. Built with `harness = false`.
//!
//! Criteria listed in `EXPECTED_FAIL` are reported but do not fail the
//! process; if one of them starts passing the line says so.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use reqprio::corpus::{
    build_instances, load_benchmark, load_requirements, load_reviews, window_reviews, ReleaseSchedule,
};
use reqprio::evalharness::{cutoffs, evaluate_ranking, fisher_combine, wilcoxon, Prf};
use reqprio::feedbackprops::{extract_properties, FeedbackProperties, LexiconScorer, PropertyTable, RuleIntentScorer};
use reqprio::nrpsolver::{brute_force_pareto, nsga2, oracle_coverage, NrpProblem, ObjectiveSet, SearchParams};
use reqprio::priority::{
    associate, cluster_associate, prioritize_irefeed, prioritize_refeed, score_irefeed, score_irefeed_c,
    score_refeed, Association, SimilarityTable, TextSimilarity, DEFAULT_THRESHOLD,
};
use reqprio::requiresminer::{dvalue, dvalue_variant, DValueVariant, Provenance, RequiresSet};
use reqprio::textkit::Normalizer;
use reqprio::topicmodel::{fit_lda, ClusterLabel, ClusterSet, LdaConfig, RequirementCluster};
use reqprio_cli::commands::read_share_table;
use reqprio_cli::{run, Cli};

/// Criterion numbers known not to hold on the shipped synthetic data.
const EXPECTED_FAIL: &[usize] = &[9];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn cli(config: &str, out: &Path, args: &[&str]) -> Result<(), String> {
    let cfg = root().join("configs").join(config);
    let mut argv = vec![
        "reqprio".to_string(),
        "-c".into(),
        cfg.display().to_string(),
        "-o".into(),
        out.display().to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    let parsed = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    run(&parsed).map_err(|e| format!("`{}` failed: {e}", args.join(" ")))
}

fn props(id: &str, neg: f64, pos: f64, int: f64) -> FeedbackProperties {
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

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// 1 -------------------------------------------------------------------------

fn criterion_1() -> Check {
    let sims = SimilarityTable::from_iter([
        ("r1", "m1", 0.15),
        ("r1", "m2", 0.2),
        ("r1", "m3", 0.06),
        ("r2", "m1", 0.07),
        ("r2", "m2", 0.22),
        ("r2", "m3", 0.13),
        ("r3", "m1", 0.05),
        ("r3", "m2", 0.1),
        ("r3", "m3", 0.0),
    ]);
    let table: PropertyTable = [
        props("m1", 0.6, 0.0, 1.0),
        props("m2", 0.0, 0.8, 0.5),
        props("m3", 0.3, 0.4, 0.0),
    ]
    .into_iter()
    .collect();
    let (s1, s2, s3) = (1.6, 1.3, 0.7);
    let assoc = |links: &[(&str, f64)]| -> Vec<Association> {
        links
            .iter()
            .map(|(m, s)| Association {
                message_id: m.to_string(),
                sim: *s,
            })
            .collect()
    };
    let union: Vec<String> = ["m1", "m2", "m3"].iter().map(|s| s.to_string()).collect();
    let tol = 1e-12;
    let err = |e: reqprio::Error| e.to_string();

    let r1 = score_refeed("r1", &assoc(&[("m1", 0.15), ("m2", 0.2)]), &table, &sims).map_err(err)?;
    let r2 = score_refeed("r2", &assoc(&[("m2", 0.22), ("m3", 0.13)]), &table, &sims).map_err(err)?;
    ensure(close(r1, (0.15 * s1 + 0.2 * s2) / 2.0, tol), format!("ReFeed r1 = {r1}"))?;
    ensure(close(r2, (0.22 * s2 + 0.13 * s3) / 2.0, tol), format!("ReFeed r2 = {r2}"))?;

    let i1 = score_irefeed("r1", &union, &table, &sims).map_err(err)?;
    let i2 = score_irefeed("r2", &union, &table, &sims).map_err(err)?;
    ensure(close(i1, (0.15 * s1 + 0.2 * s2 + 0.06 * s3) / 3.0, tol), format!("iReFeed r1 = {i1}"))?;
    ensure(close(i2, (0.07 * s1 + 0.22 * s2 + 0.13 * s3) / 3.0, tol), format!("iReFeed r2 = {i2}"))?;

    let c2 = score_irefeed_c("r2", &union, &table, &sims, 0.4).map_err(err)?;
    ensure(close(c2, 0.4 * (0.07 * s1 + 0.22 * s2 + 0.13 * s3) / 3.0, tol), format!("iReFeed-C r2 = {c2}"))?;

    // r3 has no similarity above the threshold, so its message set is empty.
    let reqs: Vec<_> = ["r1", "r2", "r3"].iter().map(|r| reqprio::corpus::Requirement::new(*r, "")).collect();
    let msgs: Vec<_> = ["m1", "m2", "m3"]
        .iter()
        .map(|m| reqprio::corpus::FeedbackMessage::new(*m, "", chrono_date()))
        .collect();
    let map = associate(&reqs, &msgs, &sims, DEFAULT_THRESHOLD);
    let linked: Vec<&str> = map.get("r1").unwrap().iter().map(|a| a.message_id.as_str()).collect();
    ensure(linked == ["m1", "m2"], format!("r1 linked to {linked:?}"))?;
    let refeed = prioritize_refeed("refeed", &map, &table, &sims).map_err(err)?;
    ensure(refeed.get("r3") == Some(0.0), "empty message set must score exactly 0")?;
    ensure(
        score_irefeed("r3", &[], &table, &sims).map_err(err)? == 0.0,
        "empty cluster union must score exactly 0",
    )?;
    Ok(format!("ReFeed {r1:.6}/{r2:.6}, iReFeed {i1:.6}/{i2:.6}, empty set 0"))
}

fn chrono_date() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
}

// 2 -------------------------------------------------------------------------

fn criterion_2() -> Check {
    let demo = root().join("data/demo");
    let err = |e: reqprio::Error| e.to_string();
    let reqs = load_requirements(&demo.join("requirements.csv")).map_err(err)?;
    let reviews = load_reviews(&demo.join("reviews.csv")).map_err(err)?;
    let schedule = ReleaseSchedule::from_requirements("quillpad", &reqs).map_err(err)?;
    let instances = build_instances(&schedule, &reqs).map_err(err)?;
    let norm = Normalizer::default();
    let mut compared = 0;
    for inst in &instances {
        let msgs = window_reviews(&reviews, inst);
        let table = extract_properties(&msgs, &LexiconScorer::default(), &RuleIntentScorer);
        let sim = TextSimilarity::fit(&inst.requirements, &msgs, &norm);
        let assoc = associate(&inst.requirements, &msgs, &sim, DEFAULT_THRESHOLD);
        let refeed = prioritize_refeed("refeed", &assoc, &table, &sim).map_err(err)?;

        let singles = ClusterSet::singletons(&inst.requirement_ids());
        let cassoc = cluster_associate(&singles, &assoc).map_err(err)?;
        let irefeed = prioritize_irefeed("lda", &cassoc, &table, &sim, false).map_err(err)?;
        ensure(refeed.scores == irefeed.scores, format!("{}: singleton iReFeed differs from ReFeed", inst.id))?;

        // One cluster holding everything, coherence left at 1.
        let whole = ClusterSet::new(vec![RequirementCluster::new(
            ClusterLabel::Topic(0),
            inst.requirement_ids(),
        )])
        .map_err(err)?;
        let wassoc = cluster_associate(&whole, &assoc).map_err(err)?;
        let plain = prioritize_irefeed("lda", &wassoc, &table, &sim, false).map_err(err)?;
        let weighted = prioritize_irefeed("lda_c", &wassoc, &table, &sim, true).map_err(err)?;
        ensure(plain.scores == weighted.scores, format!("{}: alpha = 1 changed scores", inst.id))?;
        compared += refeed.len();
    }
    ensure(compared > 0, "no requirements compared")?;
    Ok(format!("{compared} requirements over {} instances, exact equality", instances.len()))
}

// 3 -------------------------------------------------------------------------

fn criterion_3() -> Check {
    let sizes: Vec<usize> = cutoffs(19, 71).iter().map(|(_, s)| *s).collect();
    ensure(sizes == [5, 12, 19, 26, 33], format!("cutoffs(19, 71) = {sizes:?}"))?;
    let p = Prf::from_rp(0.6, 0.3);
    ensure(close(p.f1, 0.4, 1e-12) && close(p.f2, 0.5, 1e-12), format!("F1 {} F2 {}", p.f1, p.f2))?;
    Ok(format!("cutoffs {sizes:?}; F1 {:.3}, F2 {:.3}", p.f1, p.f2))
}

// 4 -------------------------------------------------------------------------

/// Upper tail of chi-squared(4) by composite Simpson integration of the density.
fn chi2_4_tail(x: f64) -> f64 {
    let density = |t: f64| t * (-t / 2.0).exp() / 4.0;
    let (a, b, steps) = (x, x + 200.0, 100_000);
    let h = (b - a) / steps as f64;
    let mut s = density(a) + density(b);
    for i in 1..steps {
        s += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn criterion_4() -> Check {
    let pairs: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64 + 0.5, 0.0)).collect();
    let w = wilcoxon(&pairs);
    ensure(w.exact && w.p_value == 2.0 / 64.0, format!("Wilcoxon p = {}", w.p_value))?;
    let f = fisher_combine(&[0.05, 0.05]).map_err(|e| e.to_string())?;
    let oracle = chi2_4_tail(-2.0 * (0.05f64.ln() * 2.0));
    ensure(close(f, oracle, 1e-3), format!("Fisher {f} vs oracle {oracle}"))?;
    Ok(format!("Wilcoxon p = {}, Fisher {f:.6} vs integral {oracle:.6}", w.p_value))
}

// 5 -------------------------------------------------------------------------

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn criterion_5() -> Check {
    // Structured rankings: each truth set is scattered through the ranking at
    // a different stride so that recall grows unevenly.
    let mut checked = 0;
    for n in 5..=40usize {
        for k in 1..n {
            let stride = (5..).step_by(2).find(|s| gcd(*s, n) == 1).unwrap();
            let ranking: Vec<String> = (0..n).map(|i| format!("r{}", (i * stride + k) % n)).collect();
            let truth: BTreeSet<String> = (0..n).filter(|i| i % (n / k).max(1) == 0).take(k).map(|i| format!("r{i}")).collect();
            let rows = evaluate_ranking("i", "m", &ranking, &truth);
            for w in rows.windows(2) {
                ensure(w[1].prf.recall >= w[0].prf.recall, format!("recall fell at n={n} k={k}"))?;
            }
            for r in &rows {
                let (rc, pr) = (r.prf.recall, r.prf.precision);
                if rc + pr > 0.0 && (rc - pr).abs() > 1e-12 {
                    ensure((r.prf.f2 > r.prf.f1) == (rc > pr), format!("F2/F1 order wrong at n={n} k={k}"))?;
                }
            }
            let all = evaluate_ranking("i", "m", &ranking, &truth);
            let full = reqprio::evalharness::prf(ranking.iter(), &truth);
            ensure(close(full.precision, truth.len() as f64 / n as f64, 1e-12), "P at cutoff n must be k/n")?;
            checked += all.len();
        }
    }

    // Both pipelines read one property table: the run fails if either needs a
    // message the table lacks, and identical inputs give identical tables.
    let demo = root().join("data/demo");
    let err = |e: reqprio::Error| e.to_string();
    let reqs = load_requirements(&demo.join("requirements.csv")).map_err(err)?;
    let reviews = load_reviews(&demo.join("reviews.csv")).map_err(err)?;
    let inst = build_instances(&ReleaseSchedule::from_requirements("quillpad", &reqs).map_err(err)?, &reqs)
        .map_err(err)?
        .remove(0);
    let msgs = window_reviews(&reviews, &inst);
    let table = extract_properties(&msgs, &LexiconScorer::default(), &RuleIntentScorer);
    let again = extract_properties(&msgs, &LexiconScorer::default(), &RuleIntentScorer);
    ensure(table == again, "property extraction is not a function of its input")?;
    let sim = TextSimilarity::fit(&inst.requirements, &msgs, &Normalizer::default());
    let assoc = associate(&inst.requirements, &msgs, &sim, DEFAULT_THRESHOLD);
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for (_, links) in assoc.iter() {
        used.extend(links.iter().map(|a| a.message_id.as_str()));
    }
    ensure(used.iter().all(|m| table.get(m).is_some()), "association uses a message without properties")?;
    prioritize_refeed("refeed", &assoc, &table, &sim).map_err(err)?;
    let singles = ClusterSet::singletons(&inst.requirement_ids());
    prioritize_irefeed("lda", &cluster_associate(&singles, &assoc).map_err(err)?, &table, &sim, false).map_err(err)?;
    Ok(format!("{checked} metric rows satisfy the properties; one shared property table"))
}

// 6 -------------------------------------------------------------------------

fn criterion_6(out: &Path) -> Check {
    cli("wordprocessor.toml", out, &["mine"])?;
    let path = out.join("mine/accuracy.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let rows: BTreeMap<String, Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<String> = l.split(',').map(str::to_string).collect();
            (f[0].clone(), f)
        })
        .collect();
    let count = |s: &str| rows.get(s).map(|r| r[1].clone()).unwrap_or_default();
    let counts = (count("baseline"), count("clusters"), count("combined"));
    ensure(
        counts == ("18".into(), "26".into(), "37".into()),
        format!("distinct pairs {counts:?}"),
    )?;
    let num = |s: &str, i: usize| -> f64 { rows[s][i].parse().unwrap_or(f64::NAN) };
    let (r, p) = (num("combined", 3), num("combined", 4));
    ensure(close(r, 0.17, 0.005) && close(p, 0.30, 0.005), format!("combined R {r} P {p}"))?;
    Ok(format!("pairs 18/26/37, combined R {r:.3} P {p:.3}"))
}

// 7 -------------------------------------------------------------------------

/// Average ranks (1-based), ties sharing their mean rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_7(out: &Path) -> Check {
    let err = |e: reqprio::Error| e.to_string();
    let pairs = RequiresSet::load(&out.join("mine/pairs_combined.csv"), Provenance::Combined).map_err(err)?;
    let ids = load_benchmark(&root().join("data/wordprocessor/benchmark.csv")).map_err(err)?.ids();
    let raw = dvalue(&pairs, &ids).map_err(err)?;
    let total: f64 = raw.values.iter().sum();
    ensure(close(total, 1.0, 1e-12), format!("raw D-values sum to {total}"))?;
    let zero = raw.values.iter().position(|&d| d == 0.0).ok_or("no requirement with D = 0")?;
    let mut notes = Vec::new();
    for variant in DValueVariant::ALL {
        let v = dvalue_variant(&raw, variant).map_err(err)?;
        match variant {
            DValueVariant::Log => ensure(v.values[zero] == 0.0, "log(D = 0) must be 0")?,
            DValueVariant::Inverse => ensure(v.values[zero] == 1.0, "inverse(D = 0) must be 1")?,
            DValueVariant::Power => ensure(v.values[zero] == 0.0, "power(D = 0) must be 0")?,
            DValueVariant::Zscore => {
                let min = v.values.iter().copied().fold(f64::INFINITY, f64::min);
                ensure(min == 0.0, format!("shifted z-score minimum {min}"))?;
            }
            DValueVariant::Raw => {}
        }
        let rho = spearman(&raw.values, &v.values);
        let want = if variant == DValueVariant::Inverse { -1.0 } else { 1.0 };
        ensure(close(rho, want, 1e-12), format!("{variant}: rank correlation {rho}"))?;
        notes.push(format!("{variant} {rho:+.0}"));
    }
    Ok(format!("sum {total:.12}; rank correlations {}", notes.join(", ")))
}

// 8 -------------------------------------------------------------------------

fn criterion_8() -> Check {
    let mut worst = f64::INFINITY;
    for instance in 0..20u64 {
        let problem = NrpProblem::random(12, 4, 1000 + instance);
        let oracle = brute_force_pareto(&problem, ObjectiveSet::Bi).map_err(|e| e.to_string())?;
        let mut coverages = Vec::new();
        for seed in 0..10 {
            let run = nsga2(&problem, &SearchParams::default().with_seed(seed), ObjectiveSet::Bi)
                .map_err(|e| e.to_string())?;
            ensure(run.manifest.evaluations == 10_000, format!("{} evaluations", run.manifest.evaluations))?;
            let (cov, dominating) = oracle_coverage(&run.front, &oracle);
            ensure(!dominating, format!("instance {instance} seed {seed}: a solver point dominates the oracle"))?;
            coverages.push(cov);
        }
        coverages.sort_by(f64::total_cmp);
        let median = (coverages[4] + coverages[5]) / 2.0;
        ensure(median >= 0.9, format!("instance {instance}: median coverage {median:.3}"))?;
        worst = worst.min(median);
    }
    Ok(format!("20 instances, lowest median coverage {:.1}%", 100.0 * worst))
}

// 9 -------------------------------------------------------------------------

fn criterion_9(out: &Path) -> Check {
    cli("wordprocessor.toml", out, &["nrp"])?;
    let table = read_share_table(&out.join("nrp/shares.csv")).map_err(|e| e.to_string())?;
    let summary: Vec<String> = table
        .iter()
        .map(|r| format!("{} {:.1}/{:.1}", r.variant, r.baseline_share, r.irefeed_share))
        .collect();
    let wrong: Vec<&str> = table
        .iter()
        .filter(|r| {
            let above = r.irefeed_share > r.baseline_share;
            if r.variant == "inverse" {
                above
            } else {
                !above
            }
        })
        .map(|r| r.variant.as_str())
        .collect();
    ensure(table.len() == 5 && table.iter().all(|r| r.runs == 10), "expected 5 variants over 10 runs")?;
    ensure(
        wrong.is_empty(),
        format!("direction wrong for {wrong:?} (baseline/iReFeed: {})", summary.join(", ")),
    )?;
    Ok(format!("baseline/iReFeed: {}", summary.join(", ")))
}

// 10 ------------------------------------------------------------------------

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_10(scratch: &Path) -> Check {
    let demo = root().join("data/demo");
    let err = |e: reqprio::Error| e.to_string();
    let reviews = load_reviews(&demo.join("reviews.csv")).map_err(err)?;
    let norm = Normalizer::default();
    let corpus: Vec<_> = reviews.iter().take(200).map(|m| norm.normalize(&m.text)).collect();
    let cfg = LdaConfig {
        topics: 8,
        passes: 15,
        seed: 5,
        ..LdaConfig::default()
    };
    let a = serde_json::to_string(&fit_lda(&corpus, &cfg).map_err(err)?.dump()).unwrap();
    let b = serde_json::to_string(&fit_lda(&corpus, &cfg).map_err(err)?.dump()).unwrap();
    ensure(a == b, "LDA dumps differ between identical fits")?;

    let problem = NrpProblem::random(30, 3, 9);
    let params = SearchParams::default().with_seed(42);
    let r1 = nsga2(&problem, &params, ObjectiveSet::Bi).map_err(err)?;
    let r2 = nsga2(&problem, &params, ObjectiveSet::Bi).map_err(err)?;
    ensure(r1.population == r2.population && r1.front == r2.front, "NSGA-II runs differ")?;

    let mut trees = Vec::new();
    for k in 0..2 {
        let out = scratch.join(format!("run{k}"));
        for cmd in [&["ingest"][..], &["topics"], &["prioritize"], &["evaluate"], &["report"]] {
            cli("demo.toml", &out.join("demo"), cmd)?;
        }
        for cmd in [&["mine"][..], &["dvalue"], &["nrp", "--runs", "3"], &["report"]] {
            cli("wordprocessor.toml", &out.join("wp"), cmd)?;
        }
        trees.push(tree(&out));
    }
    ensure(trees[0].len() > 20, format!("only {} output files", trees[0].len()))?;
    let keys: Vec<_> = trees[0].keys().collect();
    ensure(keys == trees[1].keys().collect::<Vec<_>>(), "runs produced different file sets")?;
    if let Some(diff) = keys.iter().find(|k| trees[0][**k] != trees[1][**k]) {
        return Err(format!("{} differs between runs", diff.display()));
    }
    Ok(format!("LDA, NSGA-II and {} CLI output files byte-identical", keys.len()))
}

fn main() {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let wp = scratch.path().join("wp");
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("formula oracles", Box::new(criterion_1)),
        ("reduction identities", Box::new(criterion_2)),
        ("cutoff protocol", Box::new(criterion_3)),
        ("statistics", Box::new(criterion_4)),
        ("evaluation properties", Box::new(criterion_5)),
        ("requires mining", Box::new(|| criterion_6(&wp))),
        ("D-values", Box::new(|| criterion_7(&wp))),
        ("NSGA-II vs exhaustive oracle", Box::new(criterion_8)),
        ("reference-front share direction", Box::new(|| criterion_9(&wp))),
        ("determinism", Box::new(|| criterion_10(&scratch.path().join("det")))),
    ];
    let mut unexpected = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let expected_fail = EXPECTED_FAIL.contains(&n);
        let (status, detail) = match (&result, expected_fail) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("PASS (listed as expected failure)", d.clone()),
            (Err(e), true) => ("FAIL (expected)", e.clone()),
            (Err(e), false) => {
                unexpected += 1;
                ("FAIL", e.clone())
            }
        };
        println!("criterion {n:>2} [{name}]: {status} ({secs:.1}s) {detail}");
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
