use std::collections::BTreeSet;

use proptest::prelude::*;
use rankfuse::corpus::{Qrels, RunList};
use rankfuse::evaluation::{average_precision, evaluate, precision_at, r_precision};
use rankfuse_testkit as oracle;

/// A ranked list of up to 20 docs drawn from a 30-doc universe, plus a set of
/// up to 5 relevant docs from that universe.
fn instance() -> impl Strategy<Value = (Vec<String>, BTreeSet<String>)> {
    let universe: Vec<String> = (0..30).map(|i| format!("d{i:02}")).collect();
    let u2 = universe.clone();
    (
        Just(universe).prop_shuffle().prop_flat_map(|u| (0usize..=20).prop_map(move |n| u[..n].to_vec())),
        prop::sample::subsequence(u2, 0..=5).prop_map(|v| v.into_iter().collect()),
    )
}

fn qrels_for(relevant: &BTreeSet<String>) -> Qrels {
    let mut q = Qrels::new();
    q.touch_query("q");
    for d in relevant {
        q.set("q", d, 1);
    }
    q.set("q", "judged-nonrel", 0);
    q
}

fn run_for(ranked: &[String]) -> RunList {
    RunList::from_scores("r", ranked.iter().enumerate().map(|(i, d)| ("q", d.clone(), 100.0 - i as f64))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn metrics_match_list_walking_oracle((ranked, relevant) in instance()) {
        let qrels = qrels_for(&relevant);
        let j = qrels.query("q").unwrap();
        let flags: Vec<bool> = ranked.iter().map(|d| relevant.contains(d)).collect();
        let r = relevant.len();
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close(average_precision(&ranked, j), oracle::average_precision(&flags, r)));
        prop_assert!(close(r_precision(&ranked, j), oracle::r_precision(&flags, r)));
        for k in [10, 20] {
            prop_assert!((precision_at(&ranked, j, k) - oracle::precision_at(&flags, k)).abs() <= 1e-12);
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval((ranked, relevant) in instance()) {
        let report = evaluate(&run_for(&ranked), &qrels_for(&relevant), &["q".to_string()].into()).unwrap();
        let m = report.per_query["q"];
        for v in [m.ap, m.rp].into_iter().flatten().chain([m.p10, m.p20]) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn precision_never_rises_when_labels_are_removed(
        (ranked, relevant) in instance(),
        mask in prop::collection::vec(any::<bool>(), 5),
    ) {
        let kept: BTreeSet<String> = relevant.iter().zip(&mask).filter(|(_, k)| **k).map(|(d, _)| d.clone()).collect();
        let (full, reduced) = (qrels_for(&relevant), qrels_for(&kept));
        for k in [10, 20] {
            prop_assert!(
                precision_at(&ranked, reduced.query("q").unwrap(), k)
                    <= precision_at(&ranked, full.query("q").unwrap(), k)
            );
        }
    }

    #[test]
    fn only_the_ranking_matters((ranked, relevant) in instance(), offset in -50.0f64..50.0) {
        let qrels = qrels_for(&relevant);
        let queries: BTreeSet<String> = ["q".to_string()].into();
        let a = evaluate(&run_for(&ranked), &qrels, &queries).unwrap();
        let rescored = RunList::from_scores(
            "other-tag",
            ranked.iter().enumerate().map(|(i, d)| ("q", d.clone(), offset - 3.0 * i as f64)),
        ).unwrap();
        let b = evaluate(&rescored, &qrels, &queries).unwrap();
        prop_assert_eq!(a.per_query, b.per_query);
        prop_assert_eq!(a.mean, b.mean);
    }
}

#[test]
fn removing_a_label_can_raise_average_precision() {
    let ranked: Vec<String> = (1..=20).map(|i| format!("d{i}")).collect();
    let full = qrels_for(&["d1".to_string(), "d20".to_string()].into());
    let partial = qrels_for(&["d1".to_string()].into());
    let before = average_precision(&ranked, full.query("q").unwrap()).unwrap();
    let after = average_precision(&ranked, partial.query("q").unwrap()).unwrap();
    assert_eq!((before, after), (0.55, 1.0));
    assert!(precision_at(&ranked, partial.query("q").unwrap(), 20) < precision_at(&ranked, full.query("q").unwrap(), 20));
}

#[test]
fn perfect_retrieval_has_unit_r_precision() {
    let relevant: BTreeSet<String> = (0..7).map(|i| format!("r{i}")).collect();
    let mut ranked: Vec<String> = relevant.iter().rev().cloned().collect();
    ranked.extend((0..5).map(|i| format!("n{i}")));
    let report = evaluate(&run_for(&ranked), &qrels_for(&relevant), &["q".to_string()].into()).unwrap();
    assert_eq!(report.mean.rp, 1.0);
    assert_eq!(report.mean.map, 1.0);
}
