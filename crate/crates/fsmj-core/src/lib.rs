//! Feature selection for bag-of-words text categorization.
//!
//! The core of the crate is a greedy forward ranker (`fsmj`) that scores
//! candidate features by the Jensen-Shannon divergence between per-class
//! multinomial models restricted to the selected features plus one grouped
//! remainder cell. Around it sit the pieces needed to use and judge it:
//!
//! - [`corpus`]: tokenization, vocabulary pruning, sparse corpus files
//! - [`mnb`]: multinomial naive Bayes estimation and MAP classification
//! - [`divergence`]: KL / Jeffreys / JS closed forms and the grouped
//!   remainder reduction
//! - [`fsmj`]: the greedy maximum-JS feature ranking
//! - [`baselines`]: DF, IG, Chi, RS, CET, NGL on binary presence features
//!   with sum / max / weighted-average global aggregation
//! - [`eval`]: accuracy-versus-feature-count curves and CSV output

pub mod baselines;
pub mod corpus;
pub mod divergence;
pub mod eval;
pub mod fsmj;
pub mod mnb;

pub use corpus::{LabeledCorpus, SparseDocument, Vocabulary};
pub use divergence::{JsConfig, ReferenceKind};
pub use fsmj::FeatureRanking;
pub use mnb::MnbModel;
