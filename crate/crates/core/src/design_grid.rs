//! Band specification and the discretization used by the LP design.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::adc_model::AdcModel;
use crate::error::{Error, Result};

/// Where the approximation error, and therefore the ripple bounds, are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ErrorReference {
    /// Error of the filter against the inverted converter response:
    /// `|H_r − D/Q_c|` in the passband and `|H_r|` in the stopband. Equals the
    /// output error divided by `|Q_c|`.
    #[default]
    Equalizer,
    /// Error at the cascade output: `|H_r·Q_c − D|` and `|H_r·Q_c|`.
    Output,
}

/// Ripple bounds and band edges of an equalizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    /// Passband edge `x_e = ω_e T_s` in radians.
    pub passband_edge: f64,
    /// Transition width `Δ_ω T_s` in radians.
    pub transition_width: f64,
    /// Passband ripple bound (linear).
    pub delta_p: f64,
    /// Stopband ripple bound (linear).
    pub delta_s: f64,
    #[serde(default)]
    pub reference: ErrorReference,
}

impl DesignSpec {
    pub fn new(passband_edge: f64, transition_width: f64, delta_p: f64, delta_s: f64) -> Result<Self> {
        let spec = DesignSpec {
            passband_edge,
            transition_width,
            delta_p,
            delta_s,
            reference: ErrorReference::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Convenience constructor with band edges given in units of π.
    pub fn from_pi_units(edge: f64, width: f64, delta_p: f64, delta_s: f64) -> Result<Self> {
        Self::new(edge * PI, width * PI, delta_p, delta_s)
    }

    pub fn with_reference(self, reference: ErrorReference) -> Self {
        DesignSpec { reference, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let (xe, dx) = (self.passband_edge, self.transition_width);
        if !(xe > 0.0 && xe < PI) {
            return Err(Error::Config(format!("passband edge {xe} outside (0, π)")));
        }
        if !(dx > 0.0) {
            return Err(Error::Config(format!("transition width {dx} must be positive")));
        }
        if !(xe + dx < PI) {
            return Err(Error::Config(format!(
                "degenerate stopband: passband edge + transition width = {} ≥ π",
                xe + dx
            )));
        }
        for (name, d) in [("delta_p", self.delta_p), ("delta_s", self.delta_s)] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {d}")));
            }
        }
        Ok(())
    }

    pub fn stopband_edge(&self) -> f64 {
        self.passband_edge + self.transition_width
    }

    /// Weighting ratio `W_r = δ_p / δ_s`.
    pub fn weighting_ratio(&self) -> f64 {
        self.delta_p / self.delta_s
    }

    /// Ripple product `P_δ = δ_p · δ_s`.
    pub fn ripple_product(&self) -> f64 {
        self.delta_p * self.delta_s
    }

    /// Extension ratio `α = x_e / x_c`; undefined for the ideal model.
    pub fn extension_ratio(&self, model: &AdcModel) -> Option<f64> {
        model.cutoff().map(|xc| self.passband_edge / xc)
    }
}

/// Grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Frequency points over both bands.
    pub n_omega: usize,
    /// Rotation angles over `[0, 2π)`.
    pub n_theta: usize,
    /// Points per band on the verification grid.
    pub n_verify: usize,
    /// Lower bound on frequency points per filter coefficient. The effective
    /// design grid size is `max(n_omega, ceil(min_density · (N + 1)))`.
    pub min_density: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_omega: 400,
            n_theta: 16,
            n_verify: 8192,
            min_density: 16.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_omega < 64 {
            return Err(Error::Config(format!("n_omega must be ≥ 64, got {}", self.n_omega)));
        }
        if self.n_theta < 4 {
            return Err(Error::Config(format!("n_theta must be ≥ 4, got {}", self.n_theta)));
        }
        if self.n_verify < 4 * self.n_omega {
            return Err(Error::Config(format!(
                "n_verify must be ≥ 4·n_omega = {}, got {}",
                4 * self.n_omega,
                self.n_verify
            )));
        }
        if !(self.min_density >= 0.0 && self.min_density.is_finite()) {
            return Err(Error::Config(format!(
                "min_density must be finite and nonnegative, got {}",
                self.min_density
            )));
        }
        Ok(())
    }

    /// Number of design frequencies used for an order-`order` filter.
    pub fn effective_points(&self, order: usize) -> usize {
        let by_density = (self.min_density * (order + 1) as f64).ceil() as usize;
        self.n_omega.max(by_density)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    Passband,
    Stopband,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub band: Band,
    pub weight: f64,
}

const MIN_POINTS_PER_BAND: usize = 16;

/// Uniform grid on `[lo, hi]` with both endpoints.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { hi } else { lo + step * i as f64 })
}

/// Splits `total` points between passband and stopband proportionally to width.
fn split_points(spec: &DesignSpec, total: usize) -> (usize, usize) {
    let wp = spec.passband_edge;
    let ws = PI - spec.stopband_edge();
    let np = ((total as f64) * wp / (wp + ws)).round() as usize;
    let np = np.clamp(MIN_POINTS_PER_BAND, total.saturating_sub(MIN_POINTS_PER_BAND).max(MIN_POINTS_PER_BAND));
    let ns = total.saturating_sub(np).max(MIN_POINTS_PER_BAND);
    (np, ns)
}

/// Builds the design grid with `n_omega` points over passband and stopband.
///
/// Both edges of each band are grid points. Passband weight is 1, stopband weight `δ_p/δ_s`.
pub fn build_design_grid(spec: &DesignSpec, cfg: &GridConfig) -> Result<Vec<GridPoint>> {
    spec.validate()?;
    cfg.validate()?;
    Ok(grid_with_points(spec, cfg.n_omega))
}

pub(crate) fn grid_with_points(spec: &DesignSpec, total: usize) -> Vec<GridPoint> {
    let (np, ns) = split_points(spec, total);
    let ws = spec.weighting_ratio();
    let pass = linspace(0.0, spec.passband_edge, np).map(|x| GridPoint {
        x,
        band: Band::Passband,
        weight: 1.0,
    });
    let stop = linspace(spec.stopband_edge(), PI, ns).map(|x| GridPoint {
        x,
        band: Band::Stopband,
        weight: ws,
    });
    pass.chain(stop).collect()
}

/// Uniform rotation angles `2πm / n_theta`.
pub fn build_rotation_angles(n_theta: usize) -> Result<Vec<f64>> {
    if n_theta < 4 {
        return Err(Error::Config(format!(
            "at least 4 rotation angles are required, got {n_theta}"
        )));
    }
    Ok((0..n_theta)
        .map(|m| 2.0 * PI * m as f64 / n_theta as f64)
        .collect())
}
