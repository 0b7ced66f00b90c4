//! Semantic-induction solvers, manifold quality and the distance-recovery
//! regression diagnostic.

mod items;
mod manifold;
mod solve;
mod varadhan;

pub use items::{parse_google, parse_sat, parse_tsv, read_items, EvalItem, ItemKind};
pub use manifold::{knn_purity, DEFAULT_PURITY_K};
pub use solve::{
    evaluate_task, ideal_point, rank_candidates, EvalOptions, EvalReport, Metric, SectionReport,
    WordVectors,
};
pub use varadhan::{varadhan_diagnostic, VaradhanFit};
