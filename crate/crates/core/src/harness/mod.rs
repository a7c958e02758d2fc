//! End-to-end experiment drivers built on the library modules.

mod experiment;
mod groups;
mod split;
mod synth;

pub use experiment::{
    compare_methods, cross_validated_fusion, incremental_fusion_curve, write_compare_csv,
    write_curve_csv, CompareMethod, CompareRow, CurveRow, Experiment, ExperimentConfig, FoldResult,
    FusionSettings, XvalOutcome,
};
pub use groups::{
    group_by_relcount, grouped_eval, write_grouped_csv, GroupMode, GroupReport, QueryGroup,
};
pub use split::{split_odd_even, FoldSplit};
pub use synth::{generate_synthetic, linear_profile, SynthConfig};
