//! Evaluation of synthetic relational databases against their originals.
//!
//! The crate measures two things about a synthetic database: *fidelity*
//! (how close its distributions are to the original data) and *utility*
//! (how well it can stand in for the original in downstream predictive
//! tasks). Fidelity is assessed at three granularities:
//!
//! * single column — statistical tests (Kolmogorov-Smirnov, chi-squared)
//!   and distances (total variation, Hellinger, Jensen-Shannon,
//!   Wasserstein) with bootstrap separability decisions,
//! * single table — maximum mean discrepancy, pairwise correlation
//!   difference, and discriminative detection,
//! * multi table — cardinality shape similarity and discriminative
//!   detection with relational aggregation, which augments a table with
//!   count/mean/nunique summaries of its child tables before training a
//!   real-vs-synthetic classifier.
//!
//! Detection frames fidelity as a two-sample test: a classifier is
//! cross-validated on labeled real/synthetic rows and its pooled
//! out-of-fold accuracy is tested against the chance baseline with an
//! exact binomial test. Below-chance accuracy is a data-copying
//! diagnostic. Utility is measured train-on-synthetic / evaluate-on-real
//! with rank correlations over model and feature orderings.
//!
//! All estimators are deterministic given their seeds, including under
//! parallel execution.

pub mod aggregate;
pub mod bench;
pub mod data;
pub mod detect;
pub mod fixtures;
pub mod learn;
pub mod metrics;
pub mod seed;
pub mod utility;

pub use data::{load_database, Column, Database, Schema, SemType, Table};

/// Version tag written into every report document.
pub const REPORT_VERSION: &str = "1";
