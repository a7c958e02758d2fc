//! Synthetic runs and qrels with tunable system quality.
//!
//! Every system ranks the same candidate documents of a query. It fills
//! positions one at a time: with probability equal to its quality it takes a
//! uniformly chosen remaining relevant document, otherwise a uniformly chosen
//! remaining document of any kind. Quality 1 puts all relevant documents
//! first; quality 0 gives relevance-blind uniform rankings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Qrels, RunList};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_queries: usize,
    pub docs_per_query: usize,
    pub relevant_per_query: usize,
    /// One quality in [0, 1] per system; its length is the system count.
    pub quality: Vec<f64>,
    /// Length of each emitted ranked list; all candidates when `None`.
    pub run_depth: Option<usize>,
}

impl SynthConfig {
    pub fn num_systems(&self) -> usize {
        self.quality.len()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_queries == 0 || self.docs_per_query == 0 || self.relevant_per_query == 0 {
            return bad("query, document and relevant counts must be positive".into());
        }
        if self.quality.is_empty() {
            return bad("at least one system quality is required".into());
        }
        if self.relevant_per_query > self.docs_per_query {
            return bad(format!(
                "{} relevant documents per query exceed {} documents per query",
                self.relevant_per_query, self.docs_per_query
            ));
        }
        if let Some(q) = self.quality.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return bad(format!("system quality {q} is outside [0, 1]"));
        }
        if self.run_depth == Some(0) {
            return bad("run depth must be positive".into());
        }
        Ok(())
    }
}

/// `n` qualities spaced evenly from `best` down to `worst`.
pub fn linear_profile(n: usize, best: f64, worst: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![best],
        _ => (0..n)
            .map(|j| best + (worst - best) * j as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn doc_id(query: usize, k: usize) -> String {
    format!("Q{query}-D{k:05}")
}

/// Ranks candidates `0..docs` for one system.
fn sample_ranking(rng: &mut ChaCha8Rng, relevant: &[bool], quality: f64, depth: usize) -> Vec<usize> {
    let mut rel: Vec<usize> = (0..relevant.len()).filter(|&k| relevant[k]).collect();
    let mut non: Vec<usize> = (0..relevant.len()).filter(|&k| !relevant[k]).collect();
    let mut ranking = Vec::with_capacity(depth);
    while ranking.len() < depth && !(rel.is_empty() && non.is_empty()) {
        let biased = !rel.is_empty() && rng.random::<f64>() < quality;
        let take_rel = biased || {
            let remaining = rel.len() + non.len();
            rng.random_range(0..remaining) < rel.len()
        };
        let pool = if take_rel { &mut rel } else { &mut non };
        let idx = rng.random_range(0..pool.len());
        ranking.push(pool.swap_remove(idx));
    }
    ranking
}

/// Generates `quality.len()` runs tagged `sys01`, `sys02`, ... and a qrels
/// judging every candidate (relevant grade 1, others 0). Query ids are
/// `1..=num_queries`. Output is a pure function of the config.
pub fn generate_synthetic(config: &SynthConfig) -> Result<(Vec<RunList>, Qrels)> {
    config.validate()?;
    let systems = config.num_systems();
    let depth = config.run_depth.unwrap_or(config.docs_per_query).min(config.docs_per_query);
    let queries: Vec<usize> = (1..=config.num_queries).collect();

    let per_query = par::map(&queries, |&q| {
        let base = (q as u64) * (systems as u64 + 1);
        let mut judge = stream_rng(config.seed, base);
        let mut relevant = vec![false; config.docs_per_query];
        let mut ids: Vec<usize> = (0..config.docs_per_query).collect();
        for _ in 0..config.relevant_per_query {
            let idx = judge.random_range(0..ids.len());
            relevant[ids.swap_remove(idx)] = true;
        }
        let rankings: Vec<Vec<usize>> = config
            .quality
            .iter()
            .enumerate()
            .map(|(j, &quality)| {
                let mut rng = stream_rng(config.seed, base + 1 + j as u64);
                sample_ranking(&mut rng, &relevant, quality, depth)
            })
            .collect();
        (relevant, rankings)
    });

    let mut qrels = Qrels::new();
    let mut entries: Vec<Vec<(String, String, f64)>> = vec![Vec::new(); systems];
    for (&q, (relevant, rankings)) in queries.iter().zip(per_query) {
        let qid = q.to_string();
        for (k, &rel) in relevant.iter().enumerate() {
            qrels.set(&qid, &doc_id(q, k), u32::from(rel));
        }
        for (j, ranking) in rankings.into_iter().enumerate() {
            let len = ranking.len();
            entries[j].extend(
                ranking
                    .into_iter()
                    .enumerate()
                    .map(|(pos, k)| (qid.clone(), doc_id(q, k), (len - pos) as f64)),
            );
        }
    }
    let width = systems.to_string().len().max(2);
    let runs = entries
        .into_iter()
        .enumerate()
        .map(|(j, e)| RunList::from_scores(&format!("sys{:0width$}", j + 1), e))
        .collect::<Result<Vec<_>>>()?;
    Ok((runs, qrels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(quality: Vec<f64>) -> SynthConfig {
        SynthConfig {
            seed: 7,
            num_queries: 6,
            docs_per_query: 40,
            relevant_per_query: 5,
            quality,
            run_depth: None,
        }
    }

    #[test]
    fn perfect_system_puts_relevant_first() {
        let (runs, qrels) = generate_synthetic(&config(vec![1.0])).unwrap();
        for (q, list) in runs[0].queries() {
            assert!(list[..5].iter().all(|e| qrels.is_relevant(q, &e.doc_id)));
            assert_eq!(list.len(), 40);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = config(vec![0.7, 0.2]);
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate_synthetic(&cfg).unwrap().0, generate_synthetic(&other).unwrap().0);
    }

    #[test]
    fn validation() {
        assert!(generate_synthetic(&SynthConfig { relevant_per_query: 41, ..config(vec![0.5]) }).is_err());
        assert!(generate_synthetic(&config(vec![1.5])).is_err());
        assert!(generate_synthetic(&config(vec![])).is_err());
        assert!(generate_synthetic(&SynthConfig { num_queries: 0, ..config(vec![0.5]) }).is_err());
    }

    #[test]
    fn profile_spacing() {
        let p = linear_profile(3, 0.8, 0.2);
        assert!(p.iter().zip([0.8, 0.5, 0.2]).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(linear_profile(1, 0.8, 0.2), vec![0.8]);
    }

    #[test]
    fn truncated_runs() {
        let (runs, qrels) = generate_synthetic(&SynthConfig { run_depth: Some(10), ..config(vec![0.3]) }).unwrap();
        assert_eq!(runs[0].max_depth(), 10);
        assert_eq!(qrels.num_judgments(), 6 * 40);
        assert_eq!(runs[0].tag(), "sys01");
    }
}
