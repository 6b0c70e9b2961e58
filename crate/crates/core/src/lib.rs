//! Recursive interrogation of query-suggestion services and topical
//! group-bias analysis of the collected suggestions.
//!
//! The crate is organised along the audit pipeline:
//!
//! * [`source`]: suggestion backends (live HTTP, fixture replay, synthetic).
//! * [`tree`]: recursive suggestion-tree construction, pruning and tree files.
//! * [`preprocess`]: root stripping, stopword removal, stage bookkeeping.
//! * [`embedding`]: word-vector loading and mean pooling.
//! * [`clustering`]: k-means, silhouette analysis and k selection.
//! * [`regression`]: cluster shares, dummy-variable OLS and bias reports.
//! * [`pipeline`]: run configuration and the file-based stage commands.

pub mod clustering;
pub mod embedding;
pub mod pipeline;
pub mod preprocess;
pub mod regression;
pub mod seed;
pub mod source;
pub mod tree;

pub use source::{Query, SuggestionList, SuggestionSource};
pub use tree::{RootTerm, SuggestionTree, TreeNode};
