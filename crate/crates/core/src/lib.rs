//! Minimax FIR equalizers that extend the analog bandwidth of ADCs.
//!
//! The converter front end is modeled as a first-order RC lowpass. An FIR filter
//! cascaded after it is designed so that the combined response approximates a
//! pure delay up to a passband edge beyond the RC cutoff and is small above a
//! stopband edge. The crate provides
//!
//! - the LP formulation of the complex minimax design ([`minimax_design`]),
//! - closed-form order estimates ([`order_estimation`]),
//! - a search for the minimal order meeting given ripples ([`order_search`]),
//! - minimax re-fitting of the estimator parameters from design sweeps ([`curve_fit`]).

pub mod adc_model;
pub mod curve_fit;
pub mod design_grid;
pub mod error;
pub mod lp;
pub mod minimax_design;
pub mod order_estimation;
pub mod order_search;
pub mod response_eval;

pub use adc_model::AdcModel;
pub use design_grid::{Band, DesignSpec, ErrorReference, GridConfig, GridPoint};
pub use error::{Error, Result};
pub use minimax_design::{design_filter, DesignOutcome, FirFilter};
pub use order_estimation::{estimate_order, round_order, EstimateQuery, EstimatorParams, Region};
pub use order_search::{find_minimal_order, find_minimal_order_from, SearchResult};
pub use response_eval::Ripples;
