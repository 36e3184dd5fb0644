//! Minimal-order search seeded by the closed-form estimate.
//!
//! Starting from `N₀`, the search walks down while designs keep meeting the
//! ripple specification, or up until the first one does. Steps are ±1 because
//! `δ*(N)` is only approximately monotone: the desired delay `N/2` changes with
//! the order, and an odd order can be markedly worse than the even order below
//! it. The downward walk therefore looks one order past a failure before it
//! stops.

use serde::{Deserialize, Serialize};

use crate::adc_model::AdcModel;
use crate::design_grid::{DesignSpec, GridConfig};
use crate::error::{Error, Result};
use crate::minimax_design::{design_filter, DesignOutcome};
use crate::order_estimation::{estimate_order, round_order, EstimateQuery, EstimatorParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub n_min: usize,
    /// Design at `n_min`.
    pub outcome: DesignOutcome,
    /// Unrounded estimate, when the search was seeded by the estimator.
    pub n_est: Option<f64>,
    pub start: usize,
    /// Orders designed, in visiting order.
    pub visited: Vec<usize>,
}

/// Default cap on the searched orders.
pub fn default_n_max(start: usize) -> usize {
    4 * start + 64
}

/// Smallest order meeting `spec`, starting from the rounded estimate.
///
/// The query must lie in the estimator's validity box and the model must define
/// an extension ratio; use [`find_minimal_order_from`] otherwise.
pub fn find_minimal_order(
    spec: &DesignSpec,
    model: &AdcModel,
    cfg: &GridConfig,
    params: &EstimatorParams,
    n_max: Option<usize>,
) -> Result<SearchResult> {
    spec.validate()?;
    let query = EstimateQuery::from_design(spec, model)?;
    query.check_box()?;
    let n_est = estimate_order(&query, params)?;
    let start = round_order(n_est);
    let mut result = search(spec, model, cfg, start, n_max)?;
    result.n_est = Some(n_est);
    Ok(result)
}

/// Smallest order meeting `spec`, starting from an explicit order.
pub fn find_minimal_order_from(
    spec: &DesignSpec,
    model: &AdcModel,
    cfg: &GridConfig,
    start: usize,
    n_max: Option<usize>,
) -> Result<SearchResult> {
    spec.validate()?;
    search(spec, model, cfg, start, n_max)
}

fn search(
    spec: &DesignSpec,
    model: &AdcModel,
    cfg: &GridConfig,
    start: usize,
    n_max: Option<usize>,
) -> Result<SearchResult> {
    let n_max = n_max.unwrap_or_else(|| default_n_max(start));
    if n_max < start {
        return Err(Error::Config(format!("n_max {n_max} is below the starting order {start}")));
    }
    let mut visited = Vec::new();
    let mut design = |n: usize| -> Result<DesignOutcome> {
        visited.push(n);
        design_filter(spec, model, n, cfg)
    };

    let first = design(start)?;
    let (n_min, outcome) = if first.meets_spec {
        let mut last = (start, first);
        'down: loop {
            for step in 1..=2 {
                let Some(n) = last.0.checked_sub(step) else { break 'down };
                let next = design(n)?;
                if next.meets_spec {
                    last = (n, next);
                    continue 'down;
                }
            }
            break;
        }
        last
    } else {
        let mut closest = (start, excess(spec, &first));
        let mut found = None;
        for n in start + 1..=n_max {
            let o = design(n)?;
            if o.meets_spec {
                found = Some((n, o));
                break;
            }
            let e = excess(spec, &o);
            if e < closest.1 {
                closest = (n, e);
            }
        }
        match found {
            Some(f) => f,
            None => {
                let best = design_filter(spec, model, closest.0, cfg)?;
                return Err(Error::SearchExhausted {
                    n_max,
                    best_order: closest.0,
                    best_ripple_p: best.ripples.passband,
                    best_ripple_s: best.ripples.stopband,
                });
            }
        }
    };
    log::debug!("minimal order {n_min} (start {start}, visited {visited:?})");
    Ok(SearchResult {
        n_min,
        outcome,
        n_est: None,
        start,
        visited,
    })
}

/// How far a design misses its specification: the larger ripple-to-target ratio.
fn excess(spec: &DesignSpec, o: &DesignOutcome) -> f64 {
    (o.ripples.passband / spec.delta_p).max(o.ripples.stopband / spec.delta_s)
}
