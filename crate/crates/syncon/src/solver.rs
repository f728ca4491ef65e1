//! Deterministic least-squares kernels behind every estimator.
//!
//! All three constraint regimes fit the same data shape: a target vector
//! `y0` of length `T` regressed on the columns of a `T x J` matrix `Y`,
//! minimizing the mean squared residual
//!
//! ```text
//! f(w) = (1/T) * || y0 - Y w ||^2
//! ```
//!
//! subject to one of
//!
//! - `Simplex`:      w >= 0 and sum(w) = 1  (unit simplex),
//! - `AddingUp`:     sum(w) = 1 only,
//! - `Unrestricted`: w free in R^J.
//!
//! The simplex regime is solved by Frank-Wolfe with away steps: vertices of
//! the simplex are the unit coordinate vectors, so the linear minimization
//! oracle is an `O(J)` argmin over the gradient, away steps give linear
//! convergence on the polytope, and iterates stay exactly feasible because
//! they are convex combinations of vertices (no projection step). Exact line
//! search is closed form for quadratics. The duality gap
//! `max_v grad(w)'(w - v)` doubles as the optimality certificate.
//!
//! The equality-constrained and unrestricted regimes reduce to plain least
//! squares (the adding-up constraint via the substitution
//! `w_J = 1 - sum_{j<J} w_j`) and are solved by Householder QR.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default duality-gap tolerance for the simplex solver.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for the simplex solver.
pub const DEFAULT_MAX_ITER: usize = 200_000;
/// Condition-number cutoff on the triangular QR factor for OLS regimes.
pub const COND_LIMIT: f64 = 1e12;

/// Constraint regime for a least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Weights on the unit simplex: nonnegative, summing to one.
    Simplex,
    /// Weights summing to one, sign unrestricted.
    AddingUp,
    /// Free weights.
    Unrestricted,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Simplex => write!(f, "simplex"),
            Regime::AddingUp => write!(f, "adding-up"),
            Regime::Unrestricted => write!(f, "unrestricted"),
        }
    }
}

/// A least-squares problem: fit `y0` on the columns of `y` under `regime`.
#[derive(Debug, Clone)]
pub struct LsProblem {
    /// Target vector, length `T`.
    pub y0: DVector<f64>,
    /// Design matrix, `T x J`; column `j` holds the series of unit `j`.
    pub y: DMatrix<f64>,
    pub regime: Regime,
}

impl LsProblem {
    pub fn new(y0: DVector<f64>, y: DMatrix<f64>, regime: Regime) -> Result<Self> {
        let p = LsProblem { y0, y, regime };
        p.validate()?;
        Ok(p)
    }

    /// Checks dimensions, finiteness, and the `T >= J` requirement of the
    /// OLS-type regimes.
    pub fn validate(&self) -> Result<()> {
        let (t, j) = (self.y.nrows(), self.y.ncols());
        if t == 0 || j == 0 {
            return Err(Error::DimensionMismatch(format!(
                "need T >= 1 and J >= 1, got T={t}, J={j}"
            )));
        }
        if self.y0.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "y0 has length {}, expected {t}",
                self.y0.len()
            )));
        }
        if !self.y0.iter().all(|v| v.is_finite()) || !self.y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("LsProblem data".into()));
        }
        if self.regime != Regime::Simplex && t < j {
            return Err(Error::Precondition(format!(
                "{} regime: T0 >= J required, got T0={t}, J={j}",
                self.regime
            )));
        }
        Ok(())
    }

    /// Mean squared residual `(1/T) ||y0 - Y w||^2` at `w`.
    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        let r = &self.y0 - &self.y * w;
        r.norm_squared() / self.y.nrows() as f64
    }
}

/// Solution of a least-squares fit with its optimality certificate.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Fitted weights, length `J`.
    pub weights: DVector<f64>,
    /// Mean squared residual at `weights`.
    pub objective: f64,
    /// Optimality certificate: Frank-Wolfe duality gap for the simplex
    /// regime; scaled sup-norm of the (projected) normal-equation residual
    /// for the OLS regimes.
    pub kkt_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Quadratic form of `f(w) = w'Qw - 2 b'w + c` with `Q = Y'Y/T`, `b = Y'y0/T`.
///
/// Shared by the simplex solver and the warm-started variant used inside the
/// nested estimator's outer search.
pub(crate) struct SimplexQuadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
}

impl SimplexQuadratic {
    pub(crate) fn from_problem(y0: &DVector<f64>, y: &DMatrix<f64>) -> Self {
        let t = y.nrows() as f64;
        let q = y.tr_mul(y) / t;
        let b = y.tr_mul(y0) / t;
        let c = y0.norm_squared() / t;
        SimplexQuadratic { q, b, c }
    }

    /// Objective value `w'Qw - 2 b'w + c` (the mean squared residual).
    pub(crate) fn value(&self, w: &DVector<f64>) -> f64 {
        let qw = self.qw(w);
        w.dot(&qw) - 2.0 * self.b.dot(w) + self.c
    }

    fn qw(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.q * w
    }
}

/// Outcome of the core Frank-Wolfe loop, before packaging into a report.
pub(crate) struct FwOutcome {
    pub weights: DVector<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Frank-Wolfe with away steps from an arbitrary feasible start.
///
/// Stops when the duality gap falls below `gap_threshold`. The iterate stays
/// on the simplex by construction: forward steps form convex combinations
/// with a vertex, away steps shrink one active coordinate and set it exactly
/// to zero on a drop step.
pub(crate) fn frank_wolfe_away(
    quad: &SimplexQuadratic,
    start: DVector<f64>,
    gap_threshold: f64,
    max_iter: usize,
) -> FwOutcome {
    let j = quad.b.len();
    let mut w = start;
    if j == 1 {
        return FwOutcome {
            weights: DVector::from_element(1, 1.0),
            gap: 0.0,
            iterations: 0,
            converged: true,
        };
    }

    let mut qw = quad.qw(&w);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // Refresh Qw from scratch periodically; between refreshes it is
        // updated incrementally in O(J).
        if iterations.is_multiple_of(64) {
            qw = quad.qw(&w);
        }
        // grad = 2 (Qw - b); the factor 2 is kept explicit below.
        let mut s = 0usize; // forward vertex: argmin gradient
        let mut g_min = f64::INFINITY;
        let mut v = usize::MAX; // away vertex: argmax gradient over support
        let mut g_max = f64::NEG_INFINITY;
        let mut g_dot_w = 0.0;
        for k in 0..j {
            let gk = 2.0 * (qw[k] - quad.b[k]);
            if gk < g_min {
                g_min = gk;
                s = k;
            }
            if w[k] > 0.0 && gk > g_max {
                g_max = gk;
                v = k;
            }
            g_dot_w += gk * w[k];
        }

        let fw_gap = g_dot_w - g_min;
        gap = fw_gap;
        if fw_gap <= gap_threshold {
            converged = true;
            break;
        }
        let away_gap = if v == usize::MAX { 0.0 } else { g_max - g_dot_w };

        let w_qw = w.dot(&qw);
        if fw_gap >= away_gap {
            // Forward step toward vertex s: d = e_s - w, gamma in [0, 1].
            let d_qd = quad.q[(s, s)] - 2.0 * qw[s] + w_qw;
            let gamma = if d_qd > 0.0 {
                (fw_gap / (2.0 * d_qd)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            if gamma >= 1.0 {
                w.fill(0.0);
                w[s] = 1.0;
                for k in 0..j {
                    qw[k] = quad.q[(k, s)];
                }
            } else {
                let keep = 1.0 - gamma;
                for k in 0..j {
                    w[k] *= keep;
                    qw[k] = keep * qw[k] + gamma * quad.q[(k, s)];
                }
                w[s] += gamma;
            }
        } else {
            // Away step from vertex v: d = w - e_v, gamma in [0, w_v/(1-w_v)].
            let wv = w[v];
            if wv >= 1.0 {
                // Single-vertex iterate; the away gap is zero here, so this
                // branch is unreachable, but guard against drift.
                converged = fw_gap <= gap_threshold;
                break;
            }
            let gamma_max = wv / (1.0 - wv);
            let d_qd = w_qw - 2.0 * qw[v] + quad.q[(v, v)];
            let gamma = if d_qd > 0.0 {
                (away_gap / (2.0 * d_qd)).clamp(0.0, gamma_max)
            } else {
                gamma_max
            };
            let grow = 1.0 + gamma;
            for k in 0..j {
                w[k] *= grow;
                qw[k] = grow * qw[k] - gamma * quad.q[(k, v)];
            }
            w[v] -= gamma;
            if gamma >= gamma_max {
                w[v] = 0.0; // drop step: leave the face exactly
            }
        }
        iterations += 1;
    }

    if !converged {
        // Report the gap at the final iterate.
        let qw_final = quad.qw(&w);
        let mut g_min = f64::INFINITY;
        let mut g_dot_w = 0.0;
        for k in 0..j {
            let gk = 2.0 * (qw_final[k] - quad.b[k]);
            g_min = g_min.min(gk);
            g_dot_w += gk * w[k];
        }
        gap = g_dot_w - g_min;
        converged = gap <= gap_threshold;
    }

    FwOutcome {
        weights: w,
        // The true gap is nonnegative; near a vertex the computed value can
        // round to a tiny negative.
        gap: gap.max(0.0),
        iterations,
        converged,
    }
}

/// Solve the simplex-constrained problem
/// `min over w in the unit simplex of (1/T) sum_t (y0_t - w'y_t)^2`.
///
/// Frank-Wolfe with away steps, uniform-weight initialization, exact line
/// search, stopping when the duality gap reaches
/// `tol * max(1, f(uniform))`. Deterministic given inputs: fixed start,
/// fixed step rule, index-order tie breaking.
///
/// Returns the best iterate with `converged = false` when the iteration cap
/// is hit before the gap target.
pub fn solve_simplex_qp(p: &LsProblem, tol: f64, max_iter: usize) -> Result<SolveReport> {
    p.validate()?;
    if p.regime != Regime::Simplex {
        return Err(Error::Precondition(format!(
            "solve_simplex_qp expects the simplex regime, got {}",
            p.regime
        )));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Precondition(format!("tol must be > 0, got {tol}")));
    }
    let j = p.y.ncols();
    let quad = SimplexQuadratic::from_problem(&p.y0, &p.y);
    let uniform = DVector::from_element(j, 1.0 / j as f64);
    let f0 = p.objective(&uniform);
    let threshold = tol * f0.max(1.0);

    let out = frank_wolfe_away(&quad, uniform, threshold, max_iter);
    let objective = p.objective(&out.weights);
    debug_assert!(out.weights.iter().all(|&v| v >= -1e-12));
    debug_assert!((out.weights.sum() - 1.0).abs() <= 1e-10);
    Ok(SolveReport {
        weights: out.weights,
        objective,
        kkt_gap: out.gap,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Least squares under the adding-up constraint `sum(w) = 1` only.
///
/// Substitutes `w_J = 1 - sum_{j<J} w_j`, which turns the problem into an
/// unconstrained regression of `y0 - Y_J` on the differenced columns
/// `Y_j - Y_J`, solved by QR.
pub fn solve_adding_up_ls(p: &LsProblem) -> Result<SolveReport> {
    p.validate()?;
    if p.regime != Regime::AddingUp {
        return Err(Error::Precondition(format!(
            "solve_adding_up_ls expects the adding-up regime, got {}",
            p.regime
        )));
    }
    let (t, j) = (p.y.nrows(), p.y.ncols());
    if j == 1 {
        let weights = DVector::from_element(1, 1.0);
        let objective = p.objective(&weights);
        return Ok(SolveReport {
            weights,
            objective,
            kkt_gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let last = p.y.column(j - 1);
    let mut z = DMatrix::zeros(t, j - 1);
    for col in 0..j - 1 {
        for row in 0..t {
            z[(row, col)] = p.y[(row, col)] - last[row];
        }
    }
    let r = &p.y0 - &last;
    let u = qr_least_squares(&z, &r, Regime::AddingUp)?;

    let mut weights = DVector::zeros(j);
    let mut partial = 0.0;
    for k in 0..j - 1 {
        weights[k] = u[k];
        partial += u[k];
    }
    weights[j - 1] = 1.0 - partial;

    let objective = p.objective(&weights);
    // Stationarity on the reparametrized design: residual orthogonal to the
    // differenced columns.
    let resid = &r - &z * &u;
    let grad = z.tr_mul(&resid);
    let scale = z.tr_mul(&r).amax().max(1.0);
    Ok(SolveReport {
        weights,
        objective,
        kkt_gap: grad.amax() / scale,
        iterations: 1,
        converged: true,
    })
}

/// Unrestricted ordinary least squares via Householder QR.
pub fn solve_ols(p: &LsProblem) -> Result<SolveReport> {
    p.validate()?;
    if p.regime != Regime::Unrestricted {
        return Err(Error::Precondition(format!(
            "solve_ols expects the unrestricted regime, got {}",
            p.regime
        )));
    }
    let weights = qr_least_squares(&p.y, &p.y0, Regime::Unrestricted)?;
    let objective = p.objective(&weights);
    let resid = &p.y0 - &p.y * &weights;
    let grad = p.y.tr_mul(&resid);
    let scale = p.y.tr_mul(&p.y0).amax().max(1.0);
    Ok(SolveReport {
        weights,
        objective,
        kkt_gap: grad.amax() / scale,
        iterations: 1,
        converged: true,
    })
}

/// Thin-QR least squares with a condition check on the triangular factor.
fn qr_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, regime: Regime) -> Result<DVector<f64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for k in 0..r.nrows().min(r.ncols()) {
        let d = r[(k, k)].abs();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::RankDeficient {
            regime: regime.to_string(),
            cond,
        });
    }
    let qtb = qr.q().tr_mul(b);
    r.solve_upper_triangular(&qtb).ok_or(Error::RankDeficient {
        regime: regime.to_string(),
        cond,
    })
}

/// Optimality certificate for feasible weights.
///
/// For the simplex regime this is the Frank-Wolfe duality gap
/// `max over vertices v of grad f(w)'(w - v)`: nonnegative, and zero exactly
/// at the optimum. For the adding-up regime it is the sup-norm of the
/// gradient projected on the constraint plane; for the unrestricted regime
/// the sup-norm of the gradient.
pub fn kkt_gap(p: &LsProblem, w: &DVector<f64>) -> Result<f64> {
    p.validate()?;
    let j = p.y.ncols();
    if w.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "weights have length {}, expected {j}",
            w.len()
        )));
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("weights".into()));
    }
    match p.regime {
        Regime::Simplex => {
            if w.iter().any(|&v| v < -1e-12) {
                return Err(Error::InfeasibleInput(
                    p.regime.to_string(),
                    "negative weight".into(),
                ));
            }
            if (w.sum() - 1.0).abs() > 1e-8 {
                return Err(Error::InfeasibleInput(
                    p.regime.to_string(),
                    format!("weights sum to {}", w.sum()),
                ));
            }
            let t = p.y.nrows() as f64;
            let resid = &p.y * w - &p.y0;
            let grad = p.y.tr_mul(&resid) * (2.0 / t);
            Ok((grad.dot(w) - grad.min()).max(0.0))
        }
        Regime::AddingUp => {
            if (w.sum() - 1.0).abs() > 1e-8 {
                return Err(Error::InfeasibleInput(
                    p.regime.to_string(),
                    format!("weights sum to {}", w.sum()),
                ));
            }
            let t = p.y.nrows() as f64;
            let resid = &p.y * w - &p.y0;
            let grad = p.y.tr_mul(&resid) * (2.0 / t);
            let mean = grad.mean();
            Ok(grad.iter().map(|g| (g - mean).abs()).fold(0.0, f64::max))
        }
        Regime::Unrestricted => {
            let t = p.y.nrows() as f64;
            let resid = &p.y * w - &p.y0;
            let grad = p.y.tr_mul(&resid) * (2.0 / t);
            Ok(grad.amax())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(slice: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(slice)
    }

    fn problem(y0: &[f64], cols: &[&[f64]], regime: Regime) -> LsProblem {
        let t = y0.len();
        let j = cols.len();
        let mut y = DMatrix::zeros(t, j);
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                y[(r, c)] = *v;
            }
        }
        LsProblem::new(vec_of(y0), y, regime).unwrap()
    }

    #[test]
    fn simplex_single_column_puts_all_weight_on_it() {
        let p = problem(&[1.0, 2.0, 3.0], &[&[0.5, 1.5, 2.5]], Regime::Simplex);
        let rep = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(rep.weights[0], 1.0);
        let expected = ((0.5f64).powi(2) * 3.0) / 3.0;
        assert!((rep.objective - expected).abs() < 1e-15);
    }

    #[test]
    fn simplex_perfect_fit_vertex_is_found() {
        // y0 equals column 2 (index 1) of an affinely independent design.
        let c0 = [1.0, 0.0, 0.0, 2.0, 1.0, -1.0];
        let c1 = [0.0, 1.0, 0.0, -1.0, 2.0, 0.5];
        let c2 = [0.0, 0.0, 1.0, 0.5, -1.0, 2.0];
        let p = problem(&c1, &[&c0, &c1, &c2], Regime::Simplex);
        let rep = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(rep.objective < 1e-12);
        assert!((rep.weights[1] - 1.0).abs() < 1e-6);
        assert!(rep.weights[0].abs() < 1e-6 && rep.weights[2].abs() < 1e-6);
    }

    // Grid+polish oracle for this instance gives exactly 0.0025: the first
    // three rows are matched by w = (0.5, 0.3, 0.2) and the all-ones row
    // leaves residual 0.1 for every simplex point. Frozen from the oracle in
    // tests/solver_oracles.rs.
    #[test]
    fn simplex_matches_frozen_grid_oracle_value() {
        let p = problem(
            &[0.5, 0.3, 0.2, 1.1],
            &[
                &[1.0, 0.0, 0.0, 1.0],
                &[0.0, 1.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 1.0],
            ],
            Regime::Simplex,
        );
        let rep = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((rep.objective - 0.0025).abs() < 1e-6);
        assert!(rep.converged);
    }

    #[test]
    fn simplex_weights_stay_feasible() {
        let p = problem(
            &[0.9, -0.3, 0.4, 1.2, 0.1],
            &[
                &[1.0, 0.2, -0.5, 0.7, 0.0],
                &[0.3, -1.0, 0.8, 0.2, 0.4],
                &[-0.2, 0.5, 0.1, 1.0, -0.6],
            ],
            Regime::Simplex,
        );
        let rep = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(rep.weights.iter().all(|&v| v >= -1e-12));
        assert!((rep.weights.sum() - 1.0).abs() <= 1e-10);
        assert!(rep.kkt_gap >= 0.0);
    }

    #[test]
    fn simplex_rejects_nan() {
        let y = DMatrix::from_element(3, 2, 1.0);
        let mut y0 = vec_of(&[1.0, 2.0, 3.0]);
        y0[1] = f64::NAN;
        let err = LsProblem::new(y0, y, Regime::Simplex).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn simplex_iteration_cap_returns_best_iterate() {
        let p = problem(
            &[0.5, 0.3, 0.2, 1.1],
            &[
                &[1.0, 0.0, 0.0, 1.0],
                &[0.0, 1.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 1.0],
            ],
            Regime::Simplex,
        );
        let rep = solve_simplex_qp(&p, 1e-14, 2).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.weights.len(), 3);
        assert!((rep.weights.sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn simplex_is_deterministic() {
        let p = problem(
            &[0.9, -0.3, 0.4, 1.2, 0.1, -0.7],
            &[
                &[1.0, 0.2, -0.5, 0.7, 0.0, 0.3],
                &[0.3, -1.0, 0.8, 0.2, 0.4, -0.1],
                &[-0.2, 0.5, 0.1, 1.0, -0.6, 0.9],
                &[0.6, 0.1, 0.3, -0.4, 0.2, 0.5],
            ],
            Regime::Simplex,
        );
        let a = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(a.weights.as_slice(), b.weights.as_slice());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn scale_equivariance_bitwise_at_half() {
        // f(uniform) > 4 on this instance so the gap threshold scales exactly
        // with the power-of-two factor and the iteration paths coincide.
        let y0 = [5.0, -3.0, 4.0, 6.0, -2.0];
        let c0 = [1.0, 0.5, -0.25, 2.0, 0.75];
        let c1 = [-0.5, 1.25, 0.5, -1.0, 0.25];
        let c2 = [0.25, -0.75, 1.5, 0.5, -1.25];
        let p = problem(&y0, &[&c0, &c1, &c2], Regime::Simplex);
        let scale = |s: &[f64], k: f64| s.iter().map(|v| v * k).collect::<Vec<_>>();
        let ph = problem(
            &scale(&y0, 0.5),
            &[&scale(&c0, 0.5), &scale(&c1, 0.5), &scale(&c2, 0.5)],
            Regime::Simplex,
        );
        let a = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = solve_simplex_qp(&ph, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(a.weights.as_slice(), b.weights.as_slice());
        assert!((b.objective - 0.25 * a.objective).abs() <= 1e-15 * a.objective);
    }

    #[test]
    fn scale_equivariance_at_ten_within_tolerance() {
        let y0 = [5.0, -3.0, 4.0, 6.0, -2.0];
        let c0 = [1.0, 0.5, -0.25, 2.0, 0.75];
        let c1 = [-0.5, 1.25, 0.5, -1.0, 0.25];
        let c2 = [0.25, -0.75, 1.5, 0.5, -1.25];
        let p = problem(&y0, &[&c0, &c1, &c2], Regime::Simplex);
        let scale = |s: &[f64], k: f64| s.iter().map(|v| v * k).collect::<Vec<_>>();
        let pk = problem(
            &scale(&y0, 10.0),
            &[&scale(&c0, 10.0), &scale(&c1, 10.0), &scale(&c2, 10.0)],
            Regime::Simplex,
        );
        let a = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let b = solve_simplex_qp(&pk, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for k in 0..3 {
            assert!((a.weights[k] - b.weights[k]).abs() < 1e-6);
        }
        assert!((b.objective - 100.0 * a.objective).abs() <= 1e-7 * 100.0 * a.objective.max(1.0));
    }

    #[test]
    fn adding_up_exact_representation() {
        // y0 equals column 1; the representation e_1 satisfies the constraint.
        let c0 = [1.0, 2.0, -1.0, 0.5, 3.0];
        let c1 = [0.5, -1.0, 2.0, 1.5, 0.0];
        let c2 = [2.0, 0.0, 1.0, -0.5, 1.0];
        let p = problem(&c0, &[&c0, &c1, &c2], Regime::AddingUp);
        let rep = solve_adding_up_ls(&p).unwrap();
        assert!(rep.objective < 1e-20);
        assert!((rep.weights[0] - 1.0).abs() < 1e-10);
        assert!((rep.weights.sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn adding_up_two_columns_matches_scalar_formula() {
        let y0 = [1.0, 2.0, 0.5, -1.0];
        let c0 = [0.8, 1.5, 0.2, -0.3];
        let c1 = [-0.2, 0.4, 1.0, 0.6];
        let p = problem(&y0, &[&c0, &c1], Regime::AddingUp);
        let rep = solve_adding_up_ls(&p).unwrap();
        // Oracle: w1 = ((y0 - Y2)'(Y1 - Y2)) / ||Y1 - Y2||^2.
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..4 {
            let z = c0[t] - c1[t];
            num += (y0[t] - c1[t]) * z;
            den += z * z;
        }
        let w1 = num / den;
        assert!((rep.weights[0] - w1).abs() < 1e-12);
        assert!((rep.weights[1] - (1.0 - w1)).abs() < 1e-12);
    }

    #[test]
    fn adding_up_stationarity_residual_is_small() {
        let y0 = [0.3, 1.0, -0.7, 0.2, 1.4, -0.1, 0.8, 0.5];
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                (0..8)
                    .map(|t| ((t * 7 + c * 3 + 1) as f64 * 0.37).sin())
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let p = problem(&y0, &refs, Regime::AddingUp);
        let rep = solve_adding_up_ls(&p).unwrap();
        assert!(rep.kkt_gap <= 1e-8);
        assert!((rep.weights.sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn ols_square_full_rank_interpolates() {
        let p = problem(
            &[1.0, -2.0, 0.5],
            &[&[1.0, 0.3, 0.2], &[0.1, 1.2, -0.4], &[-0.3, 0.5, 0.9]],
            Regime::Unrestricted,
        );
        let rep = solve_ols(&p).unwrap();
        assert!(rep.objective < 1e-18);
    }

    #[test]
    fn ols_recovers_exact_linear_combination() {
        let c0 = [1.0, 2.0, -1.0, 0.5, 3.0, 0.1];
        let c1 = [0.5, -1.0, 2.0, 1.5, 0.0, -0.4];
        let c2 = [2.0, 0.0, 1.0, -0.5, 1.0, 0.7];
        let y0: Vec<f64> = (0..6).map(|t| 2.0 * c0[t] - c1[t]).collect();
        let p = problem(&y0, &[&c0, &c1, &c2], Regime::Unrestricted);
        let rep = solve_ols(&p).unwrap();
        assert!((rep.weights[0] - 2.0).abs() < 1e-10);
        assert!((rep.weights[1] + 1.0).abs() < 1e-10);
        assert!(rep.weights[2].abs() < 1e-10);
    }

    #[test]
    fn ols_requires_t_at_least_j() {
        let y = DMatrix::from_fn(2, 3, |r, c| (r + c) as f64);
        let err = LsProblem::new(vec_of(&[1.0, 2.0]), y, Regime::Unrestricted).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("T0 >= J required"), "message was: {msg}");
    }

    #[test]
    fn ols_detects_rank_deficiency() {
        // Second column is twice the first.
        let c0 = [1.0, 2.0, 3.0, 4.0];
        let c1 = [2.0, 4.0, 6.0, 8.0];
        let p = problem(&[1.0, 0.0, 1.0, 0.0], &[&c0, &c1], Regime::Unrestricted);
        let err = solve_ols(&p).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    // Deterministic pseudo-random doubles in (-1, 1) for test fixtures.
    fn noise(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn relaxation_ordering_on_random_instance() {
        // Fixed arbitrary instance with T=20, J=5.
        let t = 20;
        let mut state = 0x9e3779b97f4a7c15u64;
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..t).map(|_| 1.7 * noise(&mut state)).collect())
            .collect();
        let y0: Vec<f64> = (0..t).map(|_| 1.3 * noise(&mut state)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();

        let ps = problem(&y0, &refs, Regime::Simplex);
        let pa = problem(&y0, &refs, Regime::AddingUp);
        let pu = problem(&y0, &refs, Regime::Unrestricted);
        let os = solve_simplex_qp(&ps, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().objective;
        let oa = solve_adding_up_ls(&pa).unwrap().objective;
        let ou = solve_ols(&pu).unwrap().objective;
        assert!(ou <= oa + 1e-12 * oa.max(1.0));
        assert!(oa <= os + 1e-12 * os.max(1.0));
    }

    #[test]
    fn kkt_gap_zero_at_optimum_positive_at_vertex() {
        let y0 = [1.0, 0.4, -0.2, 0.9];
        let c0 = [0.9, 0.5, -0.1, 1.0];
        let c1 = [-0.5, 0.2, 0.8, -0.3];
        let p = problem(&y0, &[&c0, &c1], Regime::Simplex);
        let rep = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let gap_opt = kkt_gap(&p, &rep.weights).unwrap();
        assert!(gap_opt <= DEFAULT_TOL * rep.objective.max(1.0) * 1.01);

        // e_2 is suboptimal: moving toward vertex 1 improves the objective.
        let e2 = vec_of(&[0.0, 1.0]);
        let gap_e2 = kkt_gap(&p, &e2).unwrap();
        assert!(gap_e2 > 1e-3);
    }

    #[test]
    fn kkt_gap_rejects_infeasible_weights() {
        let p = problem(&[1.0, 2.0], &[&[1.0, 0.0], &[0.0, 1.0]], Regime::Simplex);
        let bad = vec_of(&[0.9, 0.3]);
        assert!(matches!(
            kkt_gap(&p, &bad),
            Err(Error::InfeasibleInput(_, _))
        ));
        let neg = vec_of(&[1.2, -0.2]);
        assert!(matches!(
            kkt_gap(&p, &neg),
            Err(Error::InfeasibleInput(_, _))
        ));
    }
}
