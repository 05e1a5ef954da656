//! Slide-level gene-expression regression from histology patch features.
//!
//! The crate is organised as a pipeline:
//!
//! - [`imageprep`]: optical density, stain estimation/normalization, tiling
//! - [`expression`]: gene panels, expression matrices, `log2(1+x)` transform
//! - [`features`]: the `H2RF` patch-feature format and mean aggregation
//! - [`regressor`]: the convolutional regression head, Adam, training loops
//! - [`metrics`]: correlation, FDR, R², t-test, ANOVA, AUROC, evaluation report
//! - [`survival`]: Kaplan–Meier, log-rank, Cox regression, concordance
//! - [`subtype`]: nearest-centroid calling and the soft-voting classifier
//! - [`synthetic`]: seeded generators for fixtures and benchmarks

pub mod expression;
pub mod features;
pub mod hash;
pub mod imageprep;
pub mod metrics;
pub mod regressor;
pub mod subtype;
pub mod survival;
pub mod synthetic;

mod util;
