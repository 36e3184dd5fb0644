//! Minimax design of the bandwidth-extension filter.
//!
//! The weighted complex error `E(x) = W(x)·(H(x)·Q_c(x) − D(x))` (output reference)
//! or `E(x) = W(x)·(H(x) − D(x)/Q_c(x))` (equalizer reference) is bounded in
//! modulus through the real-rotation identity `|z| = max_Θ Re{z·e^{jΘ}}`, sampled
//! at a finite set of angles. Each (frequency, angle) pair gives one linear
//! constraint in the coefficients and `δ`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adc_model::AdcModel;
use crate::design_grid::{
    build_rotation_angles, grid_with_points, Band, DesignSpec, ErrorReference, GridConfig, GridPoint,
};
use crate::error::{Error, Result};
use crate::lp::{self, ConstraintSet, LpSolution, SolverOptions};
use crate::response_eval::{measure_ripples, Ripples};

/// Real FIR filter of order `N` (`N + 1` taps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    coeffs: Vec<f64>,
}

impl FirFilter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("a filter needs at least one coefficient".into()));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Config(format!("non-finite coefficient {bad}")));
        }
        Ok(FirFilter { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Group delay of the desired response, `N/2` samples.
    pub fn group_delay(&self) -> f64 {
        self.order() as f64 / 2.0
    }
}

/// Target of the cascade: a pure `N/2` delay in the passband, zero in the stopband.
pub fn desired_response(order: usize, x: f64, band: Band) -> Complex64 {
    match band {
        Band::Passband => Complex64::cis(-x * order as f64 / 2.0),
        Band::Stopband => Complex64::new(0.0, 0.0),
    }
}

/// Discretized minimax problem.
///
/// Row `k = i·n_θ + m` reads `Re{e^{jΘ_m}·g_i}·h − δ ≤ Re{e^{jΘ_m}·t_i}`. For the
/// output reference `g_i[n] = W_i·Q_c(x_i)·e^{−jx_i n}` and `t_i = W_i·D(x_i)`; for the
/// equalizer reference `g_i[n] = W_i·e^{−jx_i n}` and `t_i = W_i·D(x_i)/Q_c(x_i)`.
/// The complex rows are stored once per frequency; the rotated real rows are
/// produced on demand.
#[derive(Debug, Clone)]
pub struct LpProblem {
    order: usize,
    points: Vec<GridPoint>,
    angles: Vec<f64>,
    /// `Re g_i` (one row per frequency).
    re: DMatrix<f64>,
    /// `Im g_i`
    im: DMatrix<f64>,
    /// `t_i`
    targets: Vec<Complex64>,
    rhs: Vec<f64>,
}

impl LpProblem {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Number of unknowns: `N + 1` coefficients and `δ`.
    pub fn n_vars(&self) -> usize {
        self.order + 2
    }

    /// Objective vector over `(h[0..=N], δ)`.
    pub fn objective(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_vars()];
        c[self.order + 1] = 1.0;
        c
    }

    /// Coefficient of `δ` in every row.
    pub fn delta_coefficient(&self) -> f64 {
        -1.0
    }

    /// Complex weighted error `g_i·h − t_i` at each design frequency.
    pub fn weighted_errors(&self, h: &[f64]) -> Vec<Complex64> {
        let hv = nalgebra::DVector::from_column_slice(h);
        let re = &self.re * &hv;
        let im = &self.im * &hv;
        self.targets
            .iter()
            .enumerate()
            .map(|(i, t)| Complex64::new(re[i], im[i]) - t)
            .collect()
    }

    /// Largest constraint violation of `(h, δ)`, zero when feasible.
    pub fn max_violation(&self, h: &[f64], delta: f64) -> f64 {
        (lp::max_residual(self, h) - delta).max(0.0)
    }

    fn split(&self, k: usize) -> (usize, f64) {
        let nt = self.angles.len();
        (k / nt, self.angles[k % nt])
    }
}

impl ConstraintSet for LpProblem {
    fn n_rows(&self) -> usize {
        self.points.len() * self.angles.len()
    }

    fn n_coeffs(&self) -> usize {
        self.order + 1
    }

    fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    fn apply(&self, h: &[f64]) -> Vec<f64> {
        let hv = nalgebra::DVector::from_column_slice(h);
        let re = &self.re * &hv;
        let im = &self.im * &hv;
        let trig: Vec<(f64, f64)> = self.angles.iter().map(|t| (t.cos(), t.sin())).collect();
        (0..self.points.len())
            .flat_map(|i| {
                let (gr, gi) = (re[i], im[i]);
                trig.iter().map(move |(c, s)| c * gr - s * gi)
            })
            .collect()
    }

    fn row(&self, k: usize) -> Vec<f64> {
        let (i, theta) = self.split(k);
        let (c, s) = (theta.cos(), theta.sin());
        (0..=self.order)
            .map(|j| c * self.re[(i, j)] - s * self.im[(i, j)])
            .collect()
    }
}

/// Builds the LP for an order-`order` filter over the given grid and rotation angles.
pub fn assemble_lp(
    grid: &[GridPoint],
    angles: &[f64],
    model: &AdcModel,
    order: usize,
    reference: ErrorReference,
) -> Result<LpProblem> {
    if grid.is_empty() || angles.is_empty() {
        return Err(Error::Config("LP assembly needs a nonempty grid and angle set".into()));
    }
    let np = grid.len();
    let nc = order + 1;
    let mut re = DMatrix::zeros(np, nc);
    let mut im = DMatrix::zeros(np, nc);
    let mut targets = Vec::with_capacity(np);
    let mut rhs = Vec::with_capacity(np * angles.len());
    for (i, p) in grid.iter().enumerate() {
        let q = model.response_at(p.x);
        let d = desired_response(order, p.x, p.band);
        let (scale, target) = match reference {
            ErrorReference::Output => (p.weight * q, p.weight * d),
            ErrorReference::Equalizer => (Complex64::new(p.weight, 0.0), p.weight * d / q),
        };
        for n in 0..nc {
            let g = scale * Complex64::cis(-p.x * n as f64);
            re[(i, n)] = g.re;
            im[(i, n)] = g.im;
        }
        rhs.extend(angles.iter().map(|&t| (Complex64::cis(t) * target).re));
        targets.push(target);
    }
    Ok(LpProblem {
        order,
        points: grid.to_vec(),
        angles: angles.to_vec(),
        re,
        im,
        targets,
        rhs,
    })
}

/// Solves the LP, returning the coefficients and optimal `δ*`.
pub fn solve_lp(problem: &LpProblem) -> Result<(Vec<f64>, f64)> {
    let sol = solve_lp_detailed(problem, &SolverOptions::default())?;
    Ok((sol.coeffs, sol.delta))
}

pub fn solve_lp_detailed(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution> {
    lp::solve(problem, opts)
}

/// Everything known about one designed filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOutcome {
    pub filter: FirFilter,
    /// Optimal weighted error of the discretized problem.
    pub delta_star: f64,
    /// Ripples on the dense verification grid.
    pub ripples: Ripples,
    pub meets_spec: bool,
}

impl DesignOutcome {
    pub fn order(&self) -> usize {
        self.filter.order()
    }
}

/// Designs the minimax equalizer of order `order` and verifies it.
pub fn design_filter(spec: &DesignSpec, model: &AdcModel, order: usize, cfg: &GridConfig) -> Result<DesignOutcome> {
    spec.validate()?;
    cfg.validate()?;
    let grid = grid_with_points(spec, cfg.effective_points(order));
    let angles = build_rotation_angles(cfg.n_theta)?;
    let problem = assemble_lp(&grid, &angles, model, order, spec.reference)?;
    let (coeffs, delta_star) = solve_lp(&problem)?;
    let filter = FirFilter::new(coeffs)?;
    let ripples = measure_ripples(&filter, model, spec, cfg.n_verify);
    let meets_spec = ripples.passband <= spec.delta_p && ripples.stopband <= spec.delta_s;
    log::debug!(
        "N = {order}: δ* = {delta_star:.6e}, ripples {:.2}/{:.2} dB",
        ripples.passband_db(),
        ripples.stopband_db()
    );
    Ok(DesignOutcome {
        filter,
        delta_star,
        ripples,
        meets_spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dc_point() -> GridPoint {
        GridPoint { x: 0.0, band: Band::Passband, weight: 1.0 }
    }

    #[test]
    fn desired_response_values() {
        assert_eq!(desired_response(48, 0.0, Band::Passband), Complex64::new(1.0, 0.0));
        assert_eq!(desired_response(7, 1.3, Band::Stopband), Complex64::new(0.0, 0.0));
        let z = desired_response(2, PI / 2.0, Band::Passband);
        assert!((z - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn dc_constraint_and_rotation_by_pi() {
        let p = assemble_lp(&[dc_point()], &[0.0], &AdcModel::Ideal, 0, ErrorReference::Output).unwrap();
        assert_eq!(p.n_rows(), 1);
        assert_eq!(p.row(0), vec![1.0]);
        assert_eq!(p.rhs(), &[1.0]);
        assert_eq!(p.objective(), vec![0.0, 1.0]);
        assert_eq!(p.delta_coefficient(), -1.0);

        let p = assemble_lp(&[dc_point()], &[PI], &AdcModel::Ideal, 0, ErrorReference::Output).unwrap();
        assert_relative_eq!(p.row(0)[0], -1.0);
        assert_relative_eq!(p.rhs()[0], -1.0);
    }

    #[test]
    fn two_angles_interpolate_dc() {
        let p = assemble_lp(&[dc_point()], &[0.0, PI], &AdcModel::Ideal, 0, ErrorReference::Output).unwrap();
        let (h, d) = solve_lp(&p).unwrap();
        assert!(d.abs() < 1e-12);
        assert_relative_eq!(h[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn row_count_is_grid_times_angles() {
        let spec = DesignSpec::from_pi_units(0.8, 0.1, 0.1, 1e-4).unwrap();
        let grid = crate::design_grid::build_design_grid(&spec, &GridConfig::default()).unwrap();
        let angles = build_rotation_angles(16).unwrap();
        let p = assemble_lp(&grid, &angles, &AdcModel::Ideal, 10, ErrorReference::Output).unwrap();
        assert_eq!(p.n_rows(), 6400);
        assert_eq!(p.rhs().len(), 6400);
        assert_eq!(p.n_vars(), 12);
    }

    #[test]
    fn structured_operators_match_explicit_rows() {
        let spec = DesignSpec::from_pi_units(0.6, 0.1, 0.05, 0.01).unwrap();
        let grid = grid_with_points(&spec, 70);
        let angles = build_rotation_angles(6).unwrap();
        let model = AdcModel::first_order_rc(0.5 * PI).unwrap();
        let p = assemble_lp(&grid, &angles, &model, 5, ErrorReference::Output).unwrap();
        let rows: Vec<Vec<f64>> = (0..p.n_rows()).map(|k| p.row(k)).collect();
        let dense = lp::DenseConstraints::new(&rows, p.rhs().to_vec());

        // Every row against its closed form.
        for k in [0, 7, 100, p.n_rows() - 1] {
            let pt = grid[k / 6];
            let th = angles[k % 6];
            for n in 0..6 {
                let g = pt.weight * model.response_at(pt.x) * Complex64::cis(-pt.x * n as f64);
                assert_relative_eq!(p.row(k)[n], (Complex64::cis(th) * g).re, epsilon = 1e-12);
            }
            let d = pt.weight * desired_response(5, pt.x, pt.band);
            assert_relative_eq!(p.rhs()[k], (Complex64::cis(th) * d).re, epsilon = 1e-12);
        }

        // Equalizer reference: same rows divided by Q_c.
        let pe = assemble_lp(&grid, &angles, &model, 5, ErrorReference::Equalizer).unwrap();
        let h0: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
        for ((eo, ee), pt) in p.weighted_errors(&h0).iter().zip(pe.weighted_errors(&h0)).zip(&grid) {
            assert_relative_eq!((eo / model.response_at(pt.x) - ee).norm(), 0.0, epsilon = 1e-12);
        }

        let h: Vec<f64> = (0..6).map(|i| (i as f64 * 0.37).sin()).collect();
        for (a, b) in p.apply(&h).iter().zip(dense.apply(&h)) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn lowpass_design_is_feasible_and_balanced() {
        let spec = DesignSpec::from_pi_units(0.5, 0.1, 0.01, 0.001).unwrap();
        let cfg = GridConfig::default();
        let grid = grid_with_points(&spec, cfg.effective_points(30));
        let angles = build_rotation_angles(cfg.n_theta).unwrap();
        let p = assemble_lp(&grid, &angles, &AdcModel::Ideal, 30, ErrorReference::Equalizer).unwrap();
        let (h, d) = solve_lp(&p).unwrap();
        assert!(p.max_violation(&h, d) <= 1e-10);
        let err = p.weighted_errors(&h);
        let band_max = |b: Band| {
            p.points().iter().zip(&err).filter(|(q, _)| q.band == b).map(|(_, e)| e.norm()).fold(0.0, f64::max)
        };
        // Modulus can exceed the polygonal bound by at most 1/cos(π/16).
        let slack = 1.0 / (PI / 16.0).cos();
        for b in [Band::Passband, Band::Stopband] {
            let m = band_max(b);
            assert!(m <= d * slack * (1.0 + 1e-9), "{b:?}: {m} vs {d}");
            assert!(m >= d * 0.99, "{b:?}: {m} vs {d}");
        }
    }
}
