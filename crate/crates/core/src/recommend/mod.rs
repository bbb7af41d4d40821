//! Neighborhood recommendation from profile text, evaluated with k-fold
//! Accuracy@N and AreaCost@N.

mod eval;
mod regions;
mod tokenize;

pub use eval::{
    accuracy_at, area_cost_at, assign_users, build_docs, check_no_leakage, cross_validate, eval_users, fold_sizes,
    home_of, idf_weights, rank_neighborhoods, CutoffMetrics, Eligibility, EvalParams, EvalReport, EvalUser,
    FoldReport, NeighborhoodDoc, Ranker, UserPool, UserResult, DEFAULT_NS,
};
pub use regions::{BoundarySet, Region, GRID_BASELINE_WIDTH_M};
pub use tokenize::{tokenize, TermVector, Tokenizer};
