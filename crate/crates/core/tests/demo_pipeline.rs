//! End-to-end prioritization over the bundled demo corpus using only the
//! library API.

use std::path::{Path, PathBuf};

use reqprio::corpus::{build_instances, load_requirements, load_reviews, window_reviews, ReleaseSchedule};
use reqprio::evalharness::{evaluate_ranking, stat_report};
use reqprio::feedbackprops::{extract_properties, LexiconScorer, RuleIntentScorer};
use reqprio::priority::{associate, cluster_associate, prioritize_irefeed, prioritize_refeed, rank, TextSimilarity};
use reqprio::textkit::Normalizer;
use reqprio::topicmodel::{cluster_requirements, fit_lda, LdaConfig};

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo")
}

#[test]
fn demo_corpus_runs_through_every_stage() {
    let reqs = load_requirements(&demo().join("requirements.csv")).unwrap();
    let reviews = load_reviews(&demo().join("reviews.csv")).unwrap();
    let schedule = ReleaseSchedule::from_requirements("quillpad", &reqs).unwrap();
    let instances = build_instances(&schedule, &reqs).unwrap();
    assert_eq!(instances.len(), 3);
    assert_eq!((instances[0].n(), instances[0].k()), (15, 7));

    let norm = Normalizer::default();
    let mut rows = Vec::new();
    for inst in &instances {
        let msgs = window_reviews(&reviews, inst);
        assert!(!msgs.is_empty());
        assert!(msgs.iter().all(|m| inst.window.contains(m.timestamp)));

        let props = extract_properties(&msgs, &LexiconScorer::default(), &RuleIntentScorer);
        assert_eq!(props.len(), msgs.len());
        let sim = TextSimilarity::fit(&inst.requirements, &msgs, &norm);
        let assoc = associate(&inst.requirements, &msgs, &sim, 0.1);
        let corpus: Vec<_> = msgs.iter().map(|m| norm.normalize(&m.text)).collect();
        let model = fit_lda(
            &corpus,
            &LdaConfig {
                seed: 3,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        let mut clusters = cluster_requirements(&model, &inst.requirements, &norm);
        clusters.assign_coherence(|a, b| sim.requirement_similarity(a, b));
        assert!(clusters.clusters().iter().all(|c| (0.0..=1.0).contains(&c.coherence)));
        let cassoc = cluster_associate(&clusters, &assoc).unwrap();

        let tables = [
            prioritize_refeed("refeed", &assoc, &props, &sim).unwrap(),
            prioritize_irefeed("lda", &cassoc, &props, &sim, false).unwrap(),
            prioritize_irefeed("lda_c", &cassoc, &props, &sim, true).unwrap(),
        ];
        for t in &tables {
            assert_eq!(t.len(), inst.n());
            // Weighted scores never exceed the unweighted ones.
            if t.method == "lda_c" {
                for (id, s) in &t.scores {
                    assert!(*s <= tables[1].scores[id] + 1e-15);
                }
            }
            rows.extend(evaluate_ranking(&inst.id, &t.method, &rank(t), &inst.ground_truth));
        }
    }
    assert_eq!(rows.len(), 3 * 3 * 5);

    let report = stat_report(&rows, "refeed", &["lda", "lda_c"]).unwrap();
    assert_eq!(report.rows.len(), 4 * 5 * 2);
    assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.wilcoxon_p)));
}
