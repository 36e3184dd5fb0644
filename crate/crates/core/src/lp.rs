//! Linear programs of the form
//!
//! ```text
//! minimize δ  subject to  a_i·h − δ ≤ b_i  (i = 1..m),  δ ≥ 0,  h free
//! ```
//!
//! solved through their standard-form dual
//!
//! ```text
//! minimize Σ b_i y_i  subject to  Σ y_i a_i = 0,  Σ y_i + y_b = 1,  y ≥ 0
//! ```
//!
//! with a dense revised simplex method. The basis has only `n + 1` rows (one per
//! coefficient plus one); its inverse is updated after each pivot and
//! refactored periodically. The simplex multipliers of the dual are the
//! coefficients `h` and `−δ`; pricing a column amounts to evaluating one
//! constraint residual, so each iteration enters the most violated constraint,
//! as in an exchange algorithm.
//!
//! On heavily weighted problems rounding can leave the method pivoting through
//! degenerate bases without raising the lower bound. After a long stall it
//! stops and accepts the best point found if that is within
//! [`SolverOptions::stall_gap_tolerance`] of the bound.

use nalgebra::{DMatrix, DVector};

use crate::error::{BestPoint, Error, Result};

/// Constraint rows `a_i` and right-hand sides `b_i` of a minimax LP.
pub trait ConstraintSet {
    fn n_rows(&self) -> usize;
    fn n_coeffs(&self) -> usize;
    fn rhs(&self) -> &[f64];
    /// `A h`
    fn apply(&self, h: &[f64]) -> Vec<f64>;
    fn row(&self, i: usize) -> Vec<f64>;

    fn row_max_abs(&self, i: usize) -> f64 {
        self.row(i).iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Explicit row-major constraint matrix.
#[derive(Debug, Clone)]
pub struct DenseConstraints {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

impl DenseConstraints {
    pub fn new(rows: &[Vec<f64>], b: Vec<f64>) -> Self {
        let n = rows.first().map_or(0, Vec::len);
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        DenseConstraints { a, b }
    }
}

impl ConstraintSet for DenseConstraints {
    fn n_rows(&self) -> usize {
        self.a.nrows()
    }
    fn n_coeffs(&self) -> usize {
        self.a.ncols()
    }
    fn rhs(&self) -> &[f64] {
        &self.b
    }
    fn apply(&self, h: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(h)).as_slice().to_vec()
    }
    fn row(&self, i: usize) -> Vec<f64> {
        self.a.row(i).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative optimality tolerance: at termination no constraint exceeds the
    /// certified lower bound on `δ*` by more than this fraction.
    pub optimality_tolerance: f64,
    /// Retry with rows normalized to unit max-abs coefficient when the
    /// unscaled problem runs into conditioning trouble.
    pub allow_row_scaling: bool,
    /// Relative gap between the best point and the lower bound accepted after
    /// the bound has stopped improving.
    pub stall_gap_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 20_000,
            optimality_tolerance: 1e-11,
            allow_row_scaling: true,
            stall_gap_tolerance: 5e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub coeffs: Vec<f64>,
    /// Optimal objective, equal to `max(0, max_i a_i·h − b_i)` at `coeffs`.
    pub delta: f64,
    /// Lower bound on the optimum certified by the final dual-feasible basis.
    pub lower_bound: f64,
    pub iterations: usize,
    pub row_scaled: bool,
}

/// Largest constraint residual `max(0, max_i a_i·h − b_i)`.
pub fn max_residual<C: ConstraintSet + ?Sized>(problem: &C, h: &[f64]) -> f64 {
    problem
        .apply(h)
        .iter()
        .zip(problem.rhs())
        .fold(0.0, |m, (ah, b)| m.max(ah - b))
}

pub fn solve<C: ConstraintSet + ?Sized>(problem: &C, opts: &SolverOptions) -> Result<LpSolution> {
    if problem.n_rows() == 0 || problem.n_coeffs() == 0 {
        return Err(Error::Config("LP needs at least one row and one coefficient".into()));
    }
    let unit = vec![1.0; problem.n_rows()];
    match Simplex::new(problem, unit).run(opts) {
        Ok(sol) => Ok(sol),
        Err(Error::Solver { reason, .. }) if opts.allow_row_scaling => {
            log::debug!("retrying LP with row scaling after: {reason}");
            let scale: Vec<f64> = (0..problem.n_rows())
                .map(|i| {
                    let m = problem.row_max_abs(i);
                    if m > 0.0 { 1.0 / m } else { 1.0 }
                })
                .collect();
            Simplex::new(problem, scale).run(opts).map(|mut s| {
                s.row_scaled = true;
                s
            })
        }
        Err(e) => Err(e),
    }
}

/// Pivots between refactorizations of the basis inverse.
const REFACTOR_INTERVAL: usize = 50;

/// Non-improving pivots, in multiples of the basis size, before a stall is declared.
const STALL_LIMIT: usize = 4;

/// Column of the dual standard form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    Row(usize),
    Bound,
    /// Artificial unit column for coefficient `k`, fixed at zero.
    Artificial(usize),
}

/// Revised simplex state. Row `i` enters the basis as the column
/// `scale[i]·(a_i, 1)` with cost `scale[i]·b_i`.
struct Simplex<'a, C: ?Sized> {
    problem: &'a C,
    scale: Vec<f64>,
    nr: usize,
    nc: usize,
}

impl<'a, C: ConstraintSet + ?Sized> Simplex<'a, C> {
    fn new(problem: &'a C, scale: Vec<f64>) -> Self {
        let nr = problem.n_rows();
        let nc = problem.n_coeffs();
        Simplex { problem, scale, nr, nc }
    }

    fn column(&self, v: Var) -> DVector<f64> {
        let mut col = DVector::zeros(self.nc + 1);
        match v {
            Var::Row(i) => {
                let s = self.scale[i];
                for (j, a) in self.problem.row(i).into_iter().enumerate() {
                    col[j] = s * a;
                }
                col[self.nc] = s;
            }
            Var::Bound => col[self.nc] = 1.0,
            Var::Artificial(k) => col[k] = 1.0,
        }
        col
    }

    fn cost(&self, v: Var) -> f64 {
        match v {
            Var::Row(i) => self.scale[i] * self.problem.rhs()[i],
            _ => 0.0,
        }
    }

    /// Position in Bland's ordering.
    fn index(&self, v: Var) -> usize {
        match v {
            Var::Row(i) => i,
            Var::Bound => self.nr,
            Var::Artificial(k) => self.nr + 1 + k,
        }
    }

    fn run(&self, opts: &SolverOptions) -> Result<LpSolution> {
        let (nr, nc) = (self.nr, self.nc);
        let m = nc + 1;
        let rhs = self.problem.rhs();
        let b_scale = rhs.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        let mut r = DVector::zeros(m);
        r[nc] = 1.0;

        let mut basis: Vec<Var> = (0..nc).map(Var::Artificial).chain([Var::Bound]).collect();
        let mut in_basis = vec![false; nr];
        let mut bmat = DMatrix::identity(m, m);
        let mut binv = DMatrix::identity(m, m);
        let mut since_refactor = 0usize;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut last_bound = f64::NEG_INFINITY;
        let mut stall = 0usize;

        for iter in 0..opts.max_iterations {
            if since_refactor >= REFACTOR_INTERVAL {
                binv = bmat.clone().try_inverse().ok_or_else(|| self.singular(&best))?;
                since_refactor = 0;
            }
            // r is the last unit vector, so x_B is the last column of B⁻¹.
            let xb = binv.column(nc).clone_owned();
            let cb = DVector::from_iterator(m, basis.iter().map(|&v| self.cost(v)));
            let lam = binv.tr_mul(&cb);
            if xb.iter().chain(lam.iter()).any(|v| !v.is_finite()) {
                return Err(self.singular(&best));
            }
            let h = &lam.as_slice()[..nc];
            let bound = -lam[nc];

            let residual: Vec<f64> = self.problem.apply(h).iter().zip(rhs).map(|(a, b)| a - b).collect();
            let delta = residual.iter().fold(0.0f64, |a, &v| a.max(v));
            if best.as_ref().map_or(true, |(_, d)| delta < *d) {
                best = Some((h.to_vec(), delta));
            }

            // Pivots that remove artificials are degenerate by construction.
            let artificials_left = basis.iter().any(|v| matches!(v, Var::Artificial(_)));
            if bound > last_bound + opts.optimality_tolerance * bound.abs() || artificials_left {
                stall = 0;
            } else {
                stall += 1;
            }
            last_bound = last_bound.max(bound);
            let bland = stall > m;
            if stall > STALL_LIMIT * m {
                if let Some(sol) = self.accept_stalled(&best, last_bound, iter, opts) {
                    return Ok(sol);
                }
            }

            // Entering column: a constraint violated at (h, bound), or the δ ≥ 0 bound.
            let tau = opts.optimality_tolerance * bound.abs().max(1e-3 * b_scale);
            let entering = if bound < -tau {
                Some(Var::Bound)
            } else if bland {
                (0..nr).find(|&i| !in_basis[i] && residual[i] - bound > tau).map(Var::Row)
            } else {
                (0..nr)
                    .filter(|&i| !in_basis[i] && residual[i] - bound > tau)
                    .max_by(|&a, &b| residual[a].total_cmp(&residual[b]))
                    .map(Var::Row)
            };
            let Some(q) = entering else {
                if since_refactor > 0 {
                    // Confirm optimality with a freshly factored basis.
                    since_refactor = REFACTOR_INTERVAL;
                    continue;
                }
                log::trace!("simplex optimal after {iter} pivots: δ = {delta:.12e}, bound {bound:.12e}");
                return Ok(LpSolution {
                    coeffs: h.to_vec(),
                    delta,
                    lower_bound: bound.min(delta),
                    iterations: iter,
                    row_scaled: false,
                });
            };

            let col = self.column(q);
            let u = &binv * &col;
            let leave = self.ratio_test(&basis, &xb, &u, bland).ok_or_else(|| {
                self.failure("unbounded dual ray; constraint data is not finite", best.clone())
            })?;

            log::trace!("simplex {iter}: bound {bound:.10e} δ {delta:.10e} enter {q:?} leave {:?}", basis[leave]);
            if let Var::Row(i) = basis[leave] {
                in_basis[i] = false;
            }
            if let Var::Row(i) = q {
                in_basis[i] = true;
            }
            basis[leave] = q;
            bmat.set_column(leave, &col);
            // B⁻¹ ← (I − (u − e_r) e_rᵀ / u_r) B⁻¹
            let pivot_row = binv.row(leave).transpose() / u[leave];
            let mut v = u;
            v[leave] -= 1.0;
            binv.ger(-1.0, &v, &pivot_row, 1.0);
            since_refactor += 1;
        }
        if let Some(sol) = self.accept_stalled(&best, last_bound, opts.max_iterations, opts) {
            return Ok(sol);
        }
        Err(self.failure(
            &format!("iteration limit {} exceeded", opts.max_iterations),
            best,
        ))
    }

    /// The best point so far, if it is close enough to the lower bound.
    fn accept_stalled(
        &self,
        best: &Option<(Vec<f64>, f64)>,
        bound: f64,
        iterations: usize,
        opts: &SolverOptions,
    ) -> Option<LpSolution> {
        let (h, delta) = best.as_ref()?;
        let gap = delta - bound.max(0.0);
        if gap > opts.stall_gap_tolerance * delta {
            return None;
        }
        log::debug!("simplex stalled after {iterations} pivots: δ = {delta:.12e}, bound {bound:.12e}");
        Some(LpSolution {
            coeffs: h.clone(),
            delta: *delta,
            lower_bound: bound.max(0.0),
            iterations,
            row_scaled: false,
        })
    }

    /// Leaving position for direction `u`. Artificials sit at zero and leave
    /// first; otherwise a two-pass Harris test picks the largest pivot among the
    /// near-minimal ratios. Under Bland's rule the ratio test is strict and ties
    /// go to the smallest index.
    fn ratio_test(&self, basis: &[Var], xb: &DVector<f64>, u: &DVector<f64>, bland: bool) -> Option<usize> {
        let piv_tol = 1e-9 * u.amax();
        if piv_tol == 0.0 || !piv_tol.is_finite() {
            return None;
        }
        let artificial = (0..basis.len())
            .filter(|&k| matches!(basis[k], Var::Artificial(_)) && u[k].abs() > piv_tol)
            .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()));
        if artificial.is_some() {
            return artificial;
        }
        let candidates: Vec<usize> = (0..basis.len())
            .filter(|&k| !matches!(basis[k], Var::Artificial(_)) && u[k] > piv_tol)
            .collect();
        let ratio = |k: usize| xb[k].max(0.0) / u[k];
        if bland {
            let min = candidates.iter().map(|&k| ratio(k)).fold(f64::INFINITY, f64::min);
            let ties = min + 1e-14 * min.abs();
            return candidates
                .into_iter()
                .filter(|&k| ratio(k) <= ties)
                .min_by_key(|&k| self.index(basis[k]));
        }
        let feas_tol = 1e-12 * xb.amax().max(1.0);
        let theta_max = candidates
            .iter()
            .map(|&k| (xb[k].max(0.0) + feas_tol) / u[k])
            .fold(f64::INFINITY, f64::min);
        candidates
            .into_iter()
            .filter(|&k| ratio(k) <= theta_max)
            .max_by(|&a, &b| u[a].total_cmp(&u[b]))
    }

    fn singular(&self, best: &Option<(Vec<f64>, f64)>) -> Error {
        self.failure("numerically singular basis", best.clone())
    }

    fn failure(&self, reason: &str, best: Option<(Vec<f64>, f64)>) -> Error {
        Error::Solver {
            reason: reason.to_string(),
            best: best.map(|(coeffs, delta)| BestPoint { coeffs, delta }),
        }
    }
}
