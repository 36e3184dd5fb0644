//! Closed-form estimate of the equalizer order.
//!
//! ```text
//! N_est = −log10(P_δ) / Υ(Δ, W) + Γ(Δ, W, α)
//! Υ     = P1·Δ^P2 + P3·log10(W) + P4
//! Γ     = (Q1/Δ + Q2)·(1 + log10(W))^Q3 + Q4·(α − 1) + Q5
//! ```
//!
//! `Δ` is the transition width in units of π (0.1 for a 0.1π transition band).
//! `W` is the weighting ratio `δ_p/δ_s` in region 1 (`W_r ≥ 1`) and its reciprocal
//! in region 2, so the formulas always see `W ≥ 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::adc_model::AdcModel;
use crate::design_grid::DesignSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// `W_r ≥ 1`
    One,
    /// `W_r < 1`
    Two,
}

impl Region {
    pub fn index(self) -> usize {
        match self {
            Region::One => 1,
            Region::Two => 2,
        }
    }

    /// Weighting ratio as seen by the region's formulas.
    pub fn effective_ratio(self, wr: f64) -> f64 {
        match self {
            Region::One => wr,
            Region::Two => 1.0 / wr,
        }
    }
}

pub fn select_region(wr: f64) -> Result<Region> {
    if !(wr > 0.0) {
        return Err(Error::Domain(format!("weighting ratio must be positive, got {wr}")));
    }
    Ok(if wr >= 1.0 { Region::One } else { Region::Two })
}

/// `P1..P4` of Υ and `Q1..Q5` of Γ for one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub p: [f64; 4],
    pub q: [f64; 5],
}

impl RegionParams {
    pub fn to_vec(&self) -> Vec<f64> {
        self.p.iter().chain(&self.q).copied().collect()
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut p = [0.0; 4];
        let mut q = [0.0; 5];
        p.copy_from_slice(&v[..4]);
        q.copy_from_slice(&v[4..9]);
        RegionParams { p, q }
    }

    /// Υ without validity checks. `dw` in units of π, `w` already region-mapped.
    pub fn upsilon_raw(&self, dw: f64, w: f64) -> f64 {
        let [p1, p2, p3, p4] = self.p;
        p1 * dw.powf(p2) + p3 * w.log10() + p4
    }

    /// Γ without validity checks. NaN when the power base is negative.
    pub fn gamma_raw(&self, dw: f64, w: f64, alpha: f64) -> f64 {
        let [q1, q2, q3, q4, q5] = self.q;
        (q1 / dw + q2) * (1.0 + w.log10()).powf(q3) + q4 * (alpha - 1.0) + q5
    }

    /// `N_est` without validity checks.
    pub fn estimate_raw(&self, dw: f64, w: f64, alpha: f64, p_delta: f64) -> f64 {
        -p_delta.log10() / self.upsilon_raw(dw, w) + self.gamma_raw(dw, w, alpha)
    }
}

/// Estimator constants for both regions. The default holds the published fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub region1: RegionParams,
    pub region2: RegionParams,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            region1: RegionParams {
                p: [0.9155, 1.1199, -0.0027, 0.0098],
                q: [-0.1682, 0.5913, 2.0607, 11.1035, -6.115],
            },
            region2: RegionParams {
                p: [1.2041, 1.2962, -0.0019, 0.0174],
                q: [-0.1023, 0.9368, 2.8292, 11.7762, -8.725],
            },
        }
    }
}

impl EstimatorParams {
    pub fn region(&self, region: Region) -> &RegionParams {
        match region {
            Region::One => &self.region1,
            Region::Two => &self.region2,
        }
    }

    pub fn region_mut(&mut self, region: Region) -> &mut RegionParams {
        match region {
            Region::One => &mut self.region1,
            Region::Two => &mut self.region2,
        }
    }

    /// Checks that `P1 > 0` and Υ stays positive over the validity box (20×20 sample).
    pub fn validate(&self) -> Result<()> {
        for region in [Region::One, Region::Two] {
            let rp = self.region(region);
            if rp.to_vec().iter().any(|v| !v.is_finite()) {
                return Err(Error::EstimatorDomain(format!("region {} has non-finite parameters", region.index())));
            }
            if !(rp.p[0] > 0.0) {
                return Err(Error::EstimatorDomain(format!("region {} P1 must be positive", region.index())));
            }
            for i in 0..20 {
                let dw = DW_RANGE.0 + (DW_RANGE.1 - DW_RANGE.0) * i as f64 / 19.0;
                for j in 0..20 {
                    let w = 10f64.powf(4.0 * j as f64 / 19.0);
                    let u = rp.upsilon_raw(dw, w);
                    if !(u > 0.0) {
                        return Err(Error::EstimatorDomain(format!(
                            "region {} Υ = {u} at dw = {dw}, W = {w}",
                            region.index()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

pub const DW_RANGE: (f64, f64) = (0.05, 0.15);
pub const WR_RANGE: (f64, f64) = (1e-4, 1e4);
pub const ALPHA_RANGE: (f64, f64) = (1.0, 1.5);
pub const P_DELTA_RANGE: (f64, f64) = (1e-10, 1e-2);

/// Inputs of the order estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateQuery {
    /// Transition width in units of π.
    pub dw: f64,
    /// Weighting ratio `δ_p/δ_s`.
    pub wr: f64,
    /// Extension ratio `ω_e/ω_c`.
    pub alpha: f64,
    /// Ripple product `δ_p·δ_s`.
    pub p_delta: f64,
}

/// Relative slack on the box edges so values produced by floating-point
/// arithmetic (e.g. `0.8π/0.7π·…`) are not rejected.
const BOX_SLACK: f64 = 1e-9;

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo * (1.0 - BOX_SLACK) && v <= hi * (1.0 + BOX_SLACK)
}

impl EstimateQuery {
    /// Validated query inside the region the estimator was fitted on.
    pub fn new(dw: f64, wr: f64, alpha: f64, p_delta: f64) -> Result<Self> {
        let q = EstimateQuery { dw, wr, alpha, p_delta };
        q.check_box()?;
        Ok(q)
    }

    /// Query without the validity-box check (extrapolation).
    pub fn unchecked(dw: f64, wr: f64, alpha: f64, p_delta: f64) -> Self {
        EstimateQuery { dw, wr, alpha, p_delta }
    }

    /// Query describing a design problem, not yet checked against the box.
    /// Fails for the ideal model, whose extension ratio is undefined.
    pub fn from_design(spec: &DesignSpec, model: &AdcModel) -> Result<Self> {
        let alpha = spec
            .extension_ratio(model)
            .ok_or_else(|| Error::EstimatorDomain("alpha undefined for ideal model".into()))?;
        Ok(EstimateQuery::unchecked(
            spec.transition_width / PI,
            spec.weighting_ratio(),
            alpha,
            spec.ripple_product(),
        ))
    }

    pub fn check_box(&self) -> Result<()> {
        let checks = [
            ("transition width / π", self.dw, DW_RANGE),
            ("weighting ratio", self.wr, WR_RANGE),
            ("extension ratio", self.alpha, ALPHA_RANGE),
            ("ripple product", self.p_delta, P_DELTA_RANGE),
        ];
        for (name, v, range) in checks {
            if !in_range(v, range) {
                return Err(Error::EstimatorDomain(format!(
                    "{name} {v} outside [{}, {}]",
                    range.0, range.1
                )));
            }
        }
        Ok(())
    }
}

/// Υ for the given region; `wr` is the raw weighting ratio.
pub fn upsilon(dw: f64, wr: f64, params: &EstimatorParams, region: Region) -> Result<f64> {
    if !(wr > 0.0 && dw > 0.0) {
        return Err(Error::EstimatorDomain(format!("Υ needs dw > 0 and wr > 0 (dw = {dw}, wr = {wr})")));
    }
    let u = params.region(region).upsilon_raw(dw, region.effective_ratio(wr));
    if !(u > 0.0) {
        return Err(Error::EstimatorDomain(format!("Υ = {u} is not positive at dw = {dw}, wr = {wr}")));
    }
    Ok(u)
}

/// Γ for the given region; `wr` is the raw weighting ratio.
pub fn gamma(dw: f64, wr: f64, alpha: f64, params: &EstimatorParams, region: Region) -> Result<f64> {
    if !(wr > 0.0 && dw > 0.0) {
        return Err(Error::EstimatorDomain(format!("Γ needs dw > 0 and wr > 0 (dw = {dw}, wr = {wr})")));
    }
    let w = region.effective_ratio(wr);
    let base = 1.0 + w.log10();
    if !(base > 0.0) {
        return Err(Error::EstimatorDomain(format!(
            "1 + log10(W) = {base} is not positive in region {}",
            region.index()
        )));
    }
    Ok(params.region(region).gamma_raw(dw, w, alpha))
}

/// Unrounded order estimate. The region is chosen from `q.wr`; the validity box is
/// not re-checked here, so an unchecked query extrapolates.
pub fn estimate_order(q: &EstimateQuery, params: &EstimatorParams) -> Result<f64> {
    if !(q.p_delta > 0.0) {
        return Err(Error::EstimatorDomain(format!("ripple product {} must be positive", q.p_delta)));
    }
    let region = select_region(q.wr)?;
    let u = upsilon(q.dw, q.wr, params, region)?;
    let g = gamma(q.dw, q.wr, q.alpha, params, region)?;
    Ok(-q.p_delta.log10() / u + g)
}

/// Nearest integer, ties rounded up. Negative estimates clamp to zero.
pub fn round_order(n_est: f64) -> usize {
    (n_est + 0.5).floor().max(0.0) as usize
}
