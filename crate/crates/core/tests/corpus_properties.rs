use proptest::prelude::*;
use rankfuse::corpus::{parse_qrels, parse_run, write_qrels, write_run, Qrels, RunList};

fn run_lines() -> impl Strategy<Value = Vec<(u8, u16, i32)>> {
    // (query, doc, score/4) triples; duplicates removed below
    prop::collection::vec((0u8..4, 0u16..40, -400i32..400), 0..80)
}

fn dedup(lines: Vec<(u8, u16, i32)>) -> Vec<(u8, u16, i32)> {
    let mut seen = std::collections::HashSet::new();
    lines.into_iter().filter(|(q, d, _)| seen.insert((*q, *d))).collect()
}

fn render(lines: &[(u8, u16, i32)]) -> String {
    lines
        .iter()
        .enumerate()
        .map(|(i, (q, d, s))| format!("{q} Q0 doc{d} {} {} tagX\n", i + 1, f64::from(*s) / 4.0 + 0.1))
        .collect()
}

proptest! {
    #[test]
    fn canonical_runs_round_trip(lines in run_lines(), depth in 1usize..50) {
        let run = parse_run(render(&dedup(lines)).as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_run(&run, depth, &mut buf).unwrap();
        prop_assert_eq!(parse_run(buf.as_slice()).unwrap(), run.truncated(depth));
    }

    #[test]
    fn line_order_does_not_matter(lines in run_lines()) {
        let lines = dedup(lines);
        let mut reversed = lines.clone();
        reversed.reverse();
        let a = parse_run(render(&lines).as_bytes()).unwrap();
        let b = parse_run(render(&reversed).as_bytes()).unwrap();
        prop_assert_eq!(&a, &b);
        for list in a.queries().values() {
            let ranks: Vec<usize> = list.iter().map(|e| e.rank).collect();
            prop_assert_eq!(ranks, (1..=list.len()).collect::<Vec<_>>());
        }
        // canonicalizing twice changes nothing
        let mut buf = Vec::new();
        write_run(&a, usize::MAX, &mut buf).unwrap();
        let again = parse_run(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        write_run(&again, usize::MAX, &mut buf2).unwrap();
        prop_assert_eq!(buf, buf2);
    }

    #[test]
    fn qrels_round_trip(entries in prop::collection::btree_map((0u8..5, 0u16..50), 0u32..4, 0..60)) {
        let mut q = Qrels::new();
        for ((qid, d), g) in &entries {
            q.set(&qid.to_string(), &format!("D{d}"), *g);
        }
        let mut buf = Vec::new();
        write_qrels(&q, &mut buf).unwrap();
        prop_assert_eq!(parse_qrels(buf.as_slice()).unwrap(), q);
    }
}

#[test]
fn awkward_scores_round_trip_exactly() {
    let scores = [1.0 / 61.0, 1e-300, -0.0, 123456789.12345679, 1.0 / 3.0 + 1e-17, 5e-324];
    let run = RunList::from_scores("t", scores.iter().enumerate().map(|(i, &s)| ("1", format!("d{i}"), s))).unwrap();
    let mut buf = Vec::new();
    write_run(&run, 1000, &mut buf).unwrap();
    assert_eq!(parse_run(buf.as_slice()).unwrap(), run);
}
