//! Availability extrapolation and query-budget planning for binary
//! point-of-interest (POI) networks.
//!
//! During a disaster, only a fraction of POIs (gas stations, pharmacies,
//! grocery stores, ...) can be checked each reporting cycle. This crate
//! fills in the rest: it learns pairwise correlations from state history,
//! extrapolates the unobserved POIs from the observed ones, and — when the
//! observer controls which POIs get queried — picks the query set that makes
//! the extrapolation as accurate as possible under a cost budget.
//!
//! The pieces:
//! - [`model`]: POI scenarios (binary state series, costs, values) and masks
//!   of known POIs
//! - [`correlation`]: agreement and change-correlation metrics and the
//!   thresholded correlation graph
//! - [`prediction`]: baseline predictors and the hybrid spatial/temporal
//!   predictor, plus its misprediction-rate model
//! - [`selection`]: budgeted greedy query selection (static and dynamic)
//!   with an exhaustive oracle for small instances
//! - [`scenario`]: synthetic cluster-correlated scenario generation
//! - [`evaluation`]: trial harness, error curves, worst-case overage

pub mod correlation;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod prediction;
pub mod scenario;
pub mod selection;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
