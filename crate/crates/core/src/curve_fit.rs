//! Refitting the order-estimator constants from a sweep of actual designs.
//!
//! For fixed `P1..P4` and `Q3` the estimate is linear in `Q1, Q2, Q4, Q5`, so the
//! minimax fit over those four is a small Chebyshev linear program. The outer
//! five parameters are searched by multi-start Nelder–Mead on the resulting
//! max deviation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adc_model::AdcModel;
use crate::design_grid::{linspace, DesignSpec, GridConfig};
use crate::error::{Error, Result};
use crate::lp::{self, DenseConstraints, SolverOptions};
use crate::order_estimation::{
    select_region, EstimatorParams, Region, RegionParams, ALPHA_RANGE, DW_RANGE, P_DELTA_RANGE, WR_RANGE,
};
use crate::order_search::find_minimal_order;

/// One designed point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    /// Transition width in units of π.
    pub dw: f64,
    pub wr: f64,
    pub alpha: f64,
    /// Measured `δ̄_p·δ̄_s` of the minimal-order design.
    pub p_delta_achieved: f64,
    pub n_actual: usize,
    /// Specified `δ_p·δ_s` of the sweep point.
    pub p_delta_target: f64,
}

impl FitRecord {
    fn p_delta(&self, use_target: bool) -> f64 {
        if use_target {
            self.p_delta_target
        } else {
            self.p_delta_achieved
        }
    }
}

/// Closed intervals swept for each estimator input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRanges {
    pub dw: (f64, f64),
    pub wr: (f64, f64),
    pub alpha: (f64, f64),
    pub p_delta: (f64, f64),
}

impl SweepRanges {
    /// The estimator's validity box restricted to one weighting region.
    pub fn region(region: Region) -> Self {
        let wr = match region {
            Region::One => (1.0, WR_RANGE.1),
            Region::Two => (WR_RANGE.0, 1.0),
        };
        SweepRanges {
            dw: DW_RANGE,
            wr,
            alpha: ALPHA_RANGE,
            p_delta: P_DELTA_RANGE,
        }
    }
}

/// Grid sizes per input, in the order `dw, wr, alpha, p_delta`.
pub type SweepCounts = [usize; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub ranges: SweepRanges,
    pub counts: SweepCounts,
    /// Passband edge `x_e` shared by every design, in radians.
    pub passband_edge: f64,
    pub grid: GridConfig,
}

impl SweepConfig {
    pub fn new(ranges: SweepRanges, counts: SweepCounts) -> Self {
        SweepConfig {
            ranges,
            counts,
            passband_edge: 0.8 * PI,
            grid: GridConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.ranges;
        let checks = [
            ("dw", r.dw, DW_RANGE),
            ("wr", r.wr, WR_RANGE),
            ("alpha", r.alpha, ALPHA_RANGE),
            ("p_delta", r.p_delta, P_DELTA_RANGE),
        ];
        for (name, (lo, hi), (blo, bhi)) in checks {
            let slack = 1e-9;
            if !(lo <= hi && lo >= blo * (1.0 - slack) && hi <= bhi * (1.0 + slack)) {
                return Err(Error::Config(format!(
                    "{name} range [{lo}, {hi}] must lie within [{blo}, {bhi}]"
                )));
            }
        }
        if let Some(c) = self.counts.iter().find(|&&c| c < 2) {
            return Err(Error::Config(format!("every sweep count must be ≥ 2, got {c}")));
        }
        if !(self.passband_edge > 0.0 && self.passband_edge < PI) {
            return Err(Error::Config(format!("passband edge {} must lie in (0, π)", self.passband_edge)));
        }
        self.grid.validate()
    }

    /// All `(dw, wr, alpha, p_delta)` tuples, `dw` varying slowest.
    pub fn tuples(&self) -> Vec<[f64; 4]> {
        let r = &self.ranges;
        let [nd, nw, na, np] = self.counts;
        let logspace = |(lo, hi): (f64, f64), n| linspace(lo.log10(), hi.log10(), n).map(|e| 10f64.powf(e));
        let mut out = Vec::with_capacity(nd * nw * na * np);
        for dw in linspace(r.dw.0, r.dw.1, nd) {
            for wr in logspace(r.wr, nw) {
                for alpha in linspace(r.alpha.0, r.alpha.1, na) {
                    for pd in logspace(r.p_delta, np) {
                        out.push([dw, wr, alpha, pd]);
                    }
                }
            }
        }
        out
    }
}

/// Largest ripple a sweep point may request.
const MAX_RIPPLE: f64 = 0.1;

/// `δ_p = √(P_δ·W_r)`, `δ_s = √(P_δ/W_r)`, or `None` when either leaves `(0, 0.1]`.
pub fn split_ripples(p_delta: f64, wr: f64) -> Option<(f64, f64)> {
    let dp = (p_delta * wr).sqrt();
    let ds = (p_delta / wr).sqrt();
    // Rounding in the log-spaced grid must not push a boundary point out.
    let ok = |d: f64| d > 0.0 && d <= MAX_RIPPLE * (1.0 + 1e-12);
    (ok(dp) && ok(ds)).then(|| (dp.min(MAX_RIPPLE), ds.min(MAX_RIPPLE)))
}

/// Designs the minimal-order filter at one sweep point.
pub fn design_record(cfg: &SweepConfig, tuple: [f64; 4], params: &EstimatorParams) -> Result<Option<FitRecord>> {
    let [dw, wr, alpha, pd] = tuple;
    let Some((dp, ds)) = split_ripples(pd, wr) else {
        log::warn!("skipping dw={dw}, wr={wr}, alpha={alpha}, p_delta={pd}: ripples outside (0, 0.1]");
        return Ok(None);
    };
    let spec = DesignSpec::new(cfg.passband_edge, dw * PI, dp, ds)?;
    let model = AdcModel::first_order_rc(cfg.passband_edge / alpha)?;
    let found = find_minimal_order(&spec, &model, &cfg.grid, params, None)?;
    log::info!(
        "dw={dw:.4}, wr={wr:.4e}, alpha={alpha:.4}, p_delta={pd:.3e}: N_min = {} (N_est = {:.2})",
        found.n_min,
        found.n_est.unwrap_or(f64::NAN)
    );
    Ok(Some(FitRecord {
        dw,
        wr,
        alpha,
        p_delta_achieved: found.outcome.ripples.product(),
        n_actual: found.n_min,
        p_delta_target: pd,
    }))
}

/// Runs the whole sweep. Tuples with unrealizable ripples are skipped.
pub fn generate_dataset(cfg: &SweepConfig, params: &EstimatorParams) -> Result<Vec<FitRecord>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for t in cfg.tuples() {
        if let Some(rec) = design_record(cfg, t, params)? {
            out.push(rec);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub seed: u64,
    /// Nelder–Mead starts; the first is the current parameter set.
    pub starts: usize,
    /// Objective evaluations per start.
    pub max_evaluations: usize,
    /// Fit against the specified instead of the achieved ripple product.
    pub use_target_p_delta: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: 0x5eed,
            starts: 8,
            max_evaluations: 1500,
            use_target_p_delta: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// `base` with the fitted region replaced.
    pub params: EstimatorParams,
    pub region: Region,
    /// Max absolute order deviation over the region's records.
    pub epsilon: f64,
}

/// Max `|N_est − N|` over the records of `region`. Infinite when the estimate
/// is undefined at any record.
pub fn max_deviation(dataset: &[FitRecord], params: &RegionParams, region: Region, use_target: bool) -> f64 {
    region_records(dataset, region).into_iter().fold(0.0, |m, r| {
        let w = region.effective_ratio(r.wr);
        let u = params.upsilon_raw(r.dw, w);
        let n = params.estimate_raw(r.dw, w, r.alpha, r.p_delta(use_target));
        if u > 0.0 && n.is_finite() {
            m.max((n - r.n_actual as f64).abs())
        } else {
            f64::INFINITY
        }
    })
}

fn region_records(dataset: &[FitRecord], region: Region) -> Vec<FitRecord> {
    dataset
        .iter()
        .filter(|r| select_region(r.wr).is_ok_and(|g| g == region))
        .copied()
        .collect()
}

/// Minimax fit of one region's constants, starting from `base`.
pub fn fit_parameters(
    dataset: &[FitRecord],
    region: Region,
    base: &EstimatorParams,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut records = region_records(dataset, region);
    if records.is_empty() {
        return Err(Error::Config(format!("no records in region {}", region.index())));
    }
    if let Some(r) = records
        .iter()
        .find(|r| ![r.dw, r.wr, r.alpha, r.p_delta(opts.use_target_p_delta)].iter().all(|v| v.is_finite() && *v > 0.0))
    {
        return Err(Error::Config(format!("invalid fit record {r:?}")));
    }
    // Canonical order makes the fit independent of the input order.
    records.sort_by(|a, b| {
        [a.dw, a.wr, a.alpha, a.p_delta_achieved, a.p_delta_target, a.n_actual as f64]
            .iter()
            .zip([b.dw, b.wr, b.alpha, b.p_delta_achieved, b.p_delta_target, b.n_actual as f64])
            .map(|(x, y)| x.total_cmp(&y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let problem = InnerFit::new(&records, region, opts.use_target_p_delta);
    let start = base.region(region);
    let x0 = [start.p[0], start.p[1], start.p[2], start.p[3], start.q[2]];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut best: Option<(f64, RegionParams)> = None;
    let mut converged = false;
    for s in 0..opts.starts.max(1) {
        let init: [f64; 5] = if s == 0 {
            x0
        } else {
            x0.map(|v| v * (1.0 + rng.gen_range(-0.25..0.25)) + rng.gen_range(-0.01..0.01))
        };
        let (x, _, ok) = nelder_mead(|x| problem.objective(x).0, &init, opts.max_evaluations);
        converged |= ok;
        let (eps, params) = problem.objective(&x);
        if let Some(params) = params {
            // The reported epsilon is always recomputed from the parameters.
            let verified = max_deviation(&records, &params, region, opts.use_target_p_delta);
            log::debug!("fit start {s}: epsilon {eps:.4} (verified {verified:.4})");
            if best.as_ref().map_or(true, |(e, _)| verified < *e) {
                best = Some((verified, params));
            }
        }
    }

    let Some((epsilon, fitted)) = best.filter(|(e, _)| e.is_finite()) else {
        return Err(Error::FitNotConverged {
            params: Box::new(*start),
            epsilon: max_deviation(&records, start, region, opts.use_target_p_delta),
        });
    };
    if !converged {
        return Err(Error::FitNotConverged {
            params: Box::new(fitted),
            epsilon,
        });
    }
    let mut params = *base;
    *params.region_mut(region) = fitted;
    Ok(FitResult { params, region, epsilon })
}

/// Chebyshev fit of `Q1, Q2, Q4, Q5` for fixed `P1..P4, Q3`.
struct InnerFit {
    points: Vec<FitPoint>,
    /// Bounding box of `(dw, log10 W)` over the records.
    hull: ((f64, f64), (f64, f64)),
}

/// A record in the form the estimate consumes: `W ≥ 1` and `−log10 P_δ`.
struct FitPoint {
    dw: f64,
    w: f64,
    alpha: f64,
    neg_log_pd: f64,
    n: f64,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl InnerFit {
    fn new(records: &[FitRecord], region: Region, use_target: bool) -> Self {
        let points: Vec<FitPoint> = records
            .iter()
            .map(|r| FitPoint {
                dw: r.dw,
                w: region.effective_ratio(r.wr),
                alpha: r.alpha,
                neg_log_pd: -r.p_delta(use_target).log10(),
                n: r.n_actual as f64,
            })
            .collect();
        let hull = (
            span(points.iter().map(|p| p.dw)),
            span(points.iter().map(|p| p.w.log10())),
        );
        InnerFit { points, hull }
    }

    /// Optimal epsilon and full parameters, or infinity when `Υ` is not
    /// positive over the records' `(dw, W)` box.
    fn objective(&self, x: &[f64]) -> (f64, Option<RegionParams>) {
        let p = [x[0], x[1], x[2], x[3]];
        let q3 = x[4];
        let trial = RegionParams { p, q: [0.0, 0.0, q3, 0.0, 0.0] };
        let ((d0, d1), (l0, l1)) = self.hull;
        let positive = linspace(d0, d1, 9)
            .all(|dw| linspace(l0, l1, 9).all(|l| trial.upsilon_raw(dw, 10f64.powf(l)) > 0.0));
        if !positive || x.iter().any(|v| !v.is_finite()) {
            return (f64::INFINITY, None);
        }

        // Rows ±(a_k·q − b_k) ≤ ε with a_k = (c/dw, c, α − 1, 1), c = (1 + log10 W)^Q3.
        let mut rows = Vec::with_capacity(2 * self.points.len());
        let mut rhs = Vec::with_capacity(2 * self.points.len());
        for r in &self.points {
            let c = (1.0 + r.w.log10()).powf(q3);
            let a = [c / r.dw, c, r.alpha - 1.0, 1.0];
            let b = r.n - r.neg_log_pd / trial.upsilon_raw(r.dw, r.w);
            if !(b.is_finite() && c.is_finite()) {
                return (f64::INFINITY, None);
            }
            rows.push(a.to_vec());
            rhs.push(b);
            rows.push(a.map(|v| -v).to_vec());
            rhs.push(-b);
        }
        match lp::solve(&DenseConstraints::new(&rows, rhs), &SolverOptions::default()) {
            Ok(sol) => {
                let q = [sol.coeffs[0], sol.coeffs[1], q3, sol.coeffs[2], sol.coeffs[3]];
                (sol.delta, Some(RegionParams { p, q }))
            }
            Err(_) => (f64::INFINITY, None),
        }
    }
}

/// Nelder–Mead minimization. Returns the best point, its value, and whether the
/// simplex collapsed or the best value stagnated before the evaluation budget
/// ran out.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], max_evals: usize) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-3 { 0.05 * x[i] } else { 2.5e-4 };
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = n + 1;
    let stall_window = 40 * n;
    let (mut record, mut record_eval) = (f64::INFINITY, evals);
    let converged = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        if lo < record - 1e-9 * (1.0 + lo.abs()) {
            (record, record_eval) = (lo, evals);
        } else if lo.is_finite() && evals - record_eval >= stall_window {
            break true;
        }
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-9 || (lo.is_finite() && (hi - lo).abs() <= 1e-12 * (1.0 + lo.abs()) && size < 1e-6) {
            break true;
        }
        if evals >= max_evals {
            break false;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        x[j] = best[j] + 0.5 * (x[j] - best[j]);
                    }
                    *v = f(x);
                    evals += 1;
                }
            }
        }
    };
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, converged)
}
