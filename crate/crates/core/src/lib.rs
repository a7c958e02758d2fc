//! Linear-combination rank fusion with least-squares weights trained from
//! full or pooled (partial) relevance judgments.
//!
//! The pipeline, module by module:
//!
//! * [`corpus`]: TREC run and qrels parsing, canonicalization and output.
//! * [`pooling`]: fixed-depth pools and the partial qrels they induce.
//! * [`fusion`]: reciprocal rank normalization, linear combination, CombSum,
//!   CombMNZ and Borda count.
//! * [`regression`]: training-matrix assembly and the least-squares solver.
//! * [`evaluation`]: MAP, R-precision, P@10, P@20 and qrels sensitivity.
//! * [`harness`]: cross-validation, incremental curves, method comparison,
//!   query grouping and synthetic data.
//!
//! Per-query and per-experiment work runs on rayon when the default
//! `parallel` feature is on and sequentially otherwise; outputs are
//! identical either way.
//!
//! ```
//! use rankfuse::corpus::{parse_qrels, parse_run};
//! use rankfuse::evaluation::evaluate;
//!
//! let run = parse_run("1 Q0 a 1 2.0 sys\n1 Q0 b 2 1.0 sys\n".as_bytes())?;
//! let qrels = parse_qrels("1 0 b 1\n".as_bytes())?;
//! let report = evaluate(&run, &qrels, &["1".to_string()].into())?;
//! assert_eq!(report.mean.map, 0.5);
//! # Ok::<(), rankfuse::Error>(())
//! ```

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod harness;
pub mod par;
pub mod pooling;
pub mod regression;

pub use error::{Error, Result};
