//! Estimator front-ends: from an observed panel to weights and
//! treatment-effect estimates.
//!
//! Five estimators share one output shape:
//!
//! - `sc` — simplex-constrained fit on all pre-treatment lags,
//! - `sc_demeaned` — the same after removing pre-treatment means, which is
//!   numerically identical to adding an intercept to the fit,
//! - `ols` / `ols_addup` — unrestricted and sum-to-one least squares,
//! - `sc_nested_*` — two-level fit: inner simplex fit of selected predictors
//!   under a diagonal weighting matrix `V`, outer derivative-free search for
//!   the `V` that minimizes the pre-treatment outcome fit.
//!
//! Implied-loading reporting lives in [`crate::diagnostics`] because it
//! needs the simulation ground truth.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::PanelData;
use crate::error::{Error, Result};
use crate::opt::nelder_mead;
use crate::solver::{
    frank_wolfe_away, kkt_gap, solve_adding_up_ls, solve_ols, solve_simplex_qp, LsProblem, Regime,
    SimplexQuadratic, SolveReport, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stable estimator identifiers used in configs, summaries, and output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    Sc,
    ScDemeaned,
    Ols,
    OlsAddup,
    ScNestedHalflags,
    ScNestedMean,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 6] = [
        EstimatorId::Sc,
        EstimatorId::ScDemeaned,
        EstimatorId::Ols,
        EstimatorId::OlsAddup,
        EstimatorId::ScNestedHalflags,
        EstimatorId::ScNestedMean,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::Sc => "sc",
            EstimatorId::ScDemeaned => "sc_demeaned",
            EstimatorId::Ols => "ols",
            EstimatorId::OlsAddup => "ols_addup",
            EstimatorId::ScNestedHalflags => "sc_nested_halflags",
            EstimatorId::ScNestedMean => "sc_nested_mean",
        }
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

/// A fitted weight vector with its fit statistics and solver certificate.
#[derive(Debug, Clone)]
pub struct WeightSolution {
    /// Control-unit weights, length `J`.
    pub weights: DVector<f64>,
    /// Level term of the demeaned fit; `None` for every other estimator.
    pub intercept: Option<f64>,
    pub regime: EstimatorId,
    /// Mean squared pre-treatment residual (demeaned residuals for the
    /// demeaned fit, all outcome lags for the nested fits).
    pub pre_mse: f64,
    pub l1_norm: f64,
    pub l2_norm: f64,
    pub report: SolveReport,
}

impl WeightSolution {
    fn from_report(report: SolveReport, regime: EstimatorId, pre_mse: f64) -> Self {
        let l1_norm = report.weights.iter().map(|w| w.abs()).sum();
        let l2_norm = report.weights.norm();
        WeightSolution {
            weights: report.weights.clone(),
            intercept: None,
            regime,
            pre_mse,
            l1_norm,
            l2_norm,
            report,
        }
    }
}

/// Which pre-treatment outcome lags enter the nested fit's predictor block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagSelector {
    /// Every pre-treatment lag.
    AllLags,
    /// The earliest `ceil(T0/2)` lags.
    FirstHalfLags,
    /// A single row holding each unit's pre-treatment mean.
    MeanOfLags,
}

/// Predictor block specification for the nested estimator.
#[derive(Debug, Clone)]
pub struct PredictorSpec {
    pub lag_selector: LagSelector,
    pub include_covariates: bool,
    /// Fixed diagonal of `V` (nonnegative, summing to one). When present the
    /// outer search is skipped and the inner fit runs at exactly this `V`.
    pub v_weights: Option<DVector<f64>>,
}

impl PredictorSpec {
    pub fn new(lag_selector: LagSelector, include_covariates: bool) -> Self {
        PredictorSpec {
            lag_selector,
            include_covariates,
            v_weights: None,
        }
    }
}

/// Synthetic control fit: simplex-constrained least squares on all
/// pre-treatment lags.
pub fn fit_sc(panel: &PanelData) -> Result<WeightSolution> {
    fit_sc_with(panel, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// [`fit_sc`] with explicit solver tolerance and iteration cap.
pub fn fit_sc_with(panel: &PanelData, tol: f64, max_iter: usize) -> Result<WeightSolution> {
    panel.validate()?;
    require_pre_periods(panel, 2)?;
    let p = LsProblem::new(panel.treated_pre(), panel.controls_pre(), Regime::Simplex)?;
    let report = solve_simplex_qp(&p, tol, max_iter)?;
    let pre_mse = report.objective;
    Ok(WeightSolution::from_report(report, EstimatorId::Sc, pre_mse))
}

/// Demeaned synthetic control: the simplex fit on pre-period-demeaned
/// outcomes, with the level difference absorbed into an intercept
/// `ybar_0 - ybar' w` (pre-treatment means).
pub fn fit_demeaned_sc(panel: &PanelData) -> Result<WeightSolution> {
    fit_demeaned_sc_with(panel, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn fit_demeaned_sc_with(panel: &PanelData, tol: f64, max_iter: usize) -> Result<WeightSolution> {
    panel.validate()?;
    require_pre_periods(panel, 2)?;
    let t0 = panel.t0;
    let y0 = panel.treated_pre();
    let y = panel.controls_pre();

    let y0_mean = y0.sum() / t0 as f64;
    let y0_dm = y0.map(|v| v - y0_mean);
    let mut col_means = DVector::zeros(y.ncols());
    let mut y_dm = y.clone();
    for c in 0..y.ncols() {
        let m = y.column(c).sum() / t0 as f64;
        col_means[c] = m;
        for r in 0..t0 {
            y_dm[(r, c)] -= m;
        }
    }

    let p = LsProblem::new(y0_dm, y_dm, Regime::Simplex)?;
    let report = solve_simplex_qp(&p, tol, max_iter)?;
    let intercept = y0_mean - col_means.dot(&report.weights);
    let pre_mse = report.objective;
    let mut sol = WeightSolution::from_report(report, EstimatorId::ScDemeaned, pre_mse);
    sol.intercept = Some(intercept);
    Ok(sol)
}

/// OLS constraint menu for [`fit_ols`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlsConstraint {
    Unrestricted,
    AddingUp,
}

/// Least-squares fit without the nonnegativity constraint, optionally
/// keeping the adding-up constraint.
pub fn fit_ols(panel: &PanelData, constraint: OlsConstraint) -> Result<WeightSolution> {
    panel.validate()?;
    let (regime, id) = match constraint {
        OlsConstraint::Unrestricted => (Regime::Unrestricted, EstimatorId::Ols),
        OlsConstraint::AddingUp => (Regime::AddingUp, EstimatorId::OlsAddup),
    };
    let p = LsProblem::new(panel.treated_pre(), panel.controls_pre(), regime)?;
    let report = match constraint {
        OlsConstraint::Unrestricted => solve_ols(&p)?,
        OlsConstraint::AddingUp => solve_adding_up_ls(&p)?,
    };
    let pre_mse = report.objective;
    Ok(WeightSolution::from_report(report, id, pre_mse))
}

/// Build the predictor block `(x0, X1)` for the nested estimator: selected
/// outcome lags first, covariate rows after.
pub fn build_predictors(
    panel: &PanelData,
    spec: &PredictorSpec,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    panel.validate()?;
    let t0 = panel.t0;
    let j = panel.n_controls();

    let lag_rows: usize = match spec.lag_selector {
        LagSelector::AllLags => t0,
        LagSelector::FirstHalfLags => t0.div_ceil(2),
        LagSelector::MeanOfLags => 1,
    };
    let cov = if spec.include_covariates {
        Some(panel.covariates.as_ref().ok_or_else(|| {
            Error::MissingCovariates("predictor spec includes covariates but the panel has none".into())
        })?)
    } else {
        None
    };
    let q = cov.map_or(0, |z| z.ncols());
    let rows = lag_rows + q;

    let mut x0 = DVector::zeros(rows);
    let mut x1 = DMatrix::zeros(rows, j);
    match spec.lag_selector {
        LagSelector::AllLags | LagSelector::FirstHalfLags => {
            for r in 0..lag_rows {
                x0[r] = panel.y[(r, 0)];
                for c in 0..j {
                    x1[(r, c)] = panel.y[(r, c + 1)];
                }
            }
        }
        LagSelector::MeanOfLags => {
            x0[0] = panel.y.column(0).rows(0, t0).sum() / t0 as f64;
            for c in 0..j {
                x1[(0, c)] = panel.y.column(c + 1).rows(0, t0).sum() / t0 as f64;
            }
        }
    }
    if let Some(z) = cov {
        for c in 0..q {
            x0[lag_rows + c] = z[(0, c)];
            for unit in 0..j {
                x1[(lag_rows + c, unit)] = z[(unit + 1, c)];
            }
        }
    }
    Ok((x0, x1))
}

/// Number of outer-search restarts (uniform `V` plus seeded perturbations).
const OUTER_STARTS: usize = 5;
/// Evaluation budget per restart.
const OUTER_BUDGET: usize = 500;
/// Inner solver tolerance while the outer search is probing.
const SEARCH_TOL: f64 = 1e-7;
const SEARCH_MAX_ITER: usize = 50_000;
/// Fixed seed for the deterministic start perturbations.
const OUTER_START_SEED: u64 = 0x5343_4f4e_5633;

/// Nested synthetic control fit.
///
/// Inner problem: `w(V) = argmin over the simplex of ||x0 - X1 w||_V` for a
/// diagonal, trace-one `V`. Outer problem: pick `V` minimizing the mean
/// squared pre-treatment outcome residual over all lags. The diagonal is
/// parametrized by a softmax over `R` free reals and searched by Nelder-Mead
/// from five deterministic starts; the returned weights re-solve the inner
/// problem at the winning `V` at full tolerance.
pub fn fit_sc_nested(panel: &PanelData, spec: &PredictorSpec) -> Result<WeightSolution> {
    panel.validate()?;
    require_pre_periods(panel, 2)?;
    let (x0, x1) = build_predictors(panel, spec)?;
    let rows = x0.len();
    let j = x1.ncols();

    // Outer objective pieces: mean squared residual over all pre-treatment
    // lags, evaluated through the quadratic form of the full pre block.
    let outer_quad = SimplexQuadratic::from_problem(&panel.treated_pre(), &panel.controls_pre());

    let id = match (spec.lag_selector, spec.include_covariates) {
        (LagSelector::FirstHalfLags, true) => EstimatorId::ScNestedHalflags,
        (LagSelector::MeanOfLags, true) => EstimatorId::ScNestedMean,
        _ => EstimatorId::Sc,
    };

    // Fixed V: no outer search, one full-tolerance inner solve.
    if let Some(v) = &spec.v_weights {
        if v.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "v_weights has length {}, expected R={rows}",
                v.len()
            )));
        }
        if v.iter().any(|x| *x < 0.0) || (v.sum() - 1.0).abs() > 1e-8 {
            return Err(Error::Precondition(
                "v_weights must be nonnegative and sum to one".into(),
            ));
        }
        let (report, _) = solve_inner_fresh(&x0, &x1, v)?;
        let pre_mse = outer_quad.value(&report.weights);
        return Ok(WeightSolution::from_report(report, id, pre_mse));
    }

    // Deterministic multi-starts in softmax space: the origin (uniform V)
    // plus seeded Gaussian perturbations.
    let mut starts: Vec<Vec<f64>> = vec![vec![0.0; rows]];
    for k in 1..OUTER_STARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(OUTER_START_SEED);
        rng.set_stream(k as u64);
        let s: Vec<f64> = (0..rows)
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        starts.push(s);
    }

    let mut best: Option<(DVector<f64>, DVector<f64>, f64)> = None; // (v, w, outer mse)
    for start in &starts {
        let mut warm = DVector::from_element(j, 1.0 / j as f64);
        let mut objective = |u: &[f64]| -> f64 {
            let v = softmax(u);
            let quad = scaled_quadratic(&x0, &x1, &v);
            let f_start = quad.value(&warm);
            let threshold = SEARCH_TOL * f_start.max(1.0);
            let out = frank_wolfe_away(&quad, warm.clone(), threshold, SEARCH_MAX_ITER);
            let mse = outer_quad.value(&out.weights);
            warm = out.weights.clone();
            if best.as_ref().is_none_or(|(_, _, m)| mse < *m) {
                best = Some((v, out.weights, mse));
            }
            mse
        };
        nelder_mead(&mut objective, start, 0.25, OUTER_BUDGET);
    }

    let (v_best, w_search, mse_search) = best.ok_or_else(|| {
        Error::OuterSearchFailed("no outer evaluation produced a finite objective".into())
    })?;

    // Re-solve the inner problem at the winning V at full tolerance. Keep
    // the search iterate instead if the refit does not improve the outer
    // fit, so the returned objective never exceeds any probed V.
    let (report, quad_best) = solve_inner_fresh(&x0, &x1, &v_best)?;
    let mse_fresh = outer_quad.value(&report.weights);
    if mse_fresh <= mse_search {
        let sol = WeightSolution::from_report(report, id, mse_fresh);
        return Ok(sol);
    }
    let gap = {
        let scaled = scaled_problem(&x0, &x1, &v_best);
        kkt_gap(&scaled, &w_search)?
    };
    let search_report = SolveReport {
        objective: quad_best.value(&w_search),
        weights: w_search,
        kkt_gap: gap,
        iterations: 0,
        converged: true,
    };
    Ok(WeightSolution::from_report(search_report, id, mse_search))
}

/// Treatment-effect estimates for every post-treatment period:
/// `alpha_hat_t = y_0t - w'y_t - intercept`.
pub fn treatment_effects(panel: &PanelData, w: &WeightSolution) -> Result<DVector<f64>> {
    panel.validate()?;
    let j = panel.n_controls();
    if w.weights.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "weights have length {}, panel has J={j}",
            w.weights.len()
        )));
    }
    let intercept = w.intercept.unwrap_or(0.0);
    let mut alpha = DVector::zeros(panel.t1);
    for s in 0..panel.t1 {
        let t = panel.t0 + s;
        let mut synth = 0.0;
        for c in 0..j {
            synth += w.weights[c] * panel.y[(t, c + 1)];
        }
        alpha[s] = panel.y[(t, 0)] - synth - intercept;
    }
    Ok(alpha)
}

/// Fit one estimator by identifier with default settings.
pub fn fit(panel: &PanelData, id: EstimatorId) -> Result<WeightSolution> {
    fit_with_tol(panel, id, DEFAULT_TOL)
}

/// Fit one estimator by identifier; `tol` applies to the simplex-based fits.
pub fn fit_with_tol(panel: &PanelData, id: EstimatorId, tol: f64) -> Result<WeightSolution> {
    match id {
        EstimatorId::Sc => fit_sc_with(panel, tol, DEFAULT_MAX_ITER),
        EstimatorId::ScDemeaned => fit_demeaned_sc_with(panel, tol, DEFAULT_MAX_ITER),
        EstimatorId::Ols => fit_ols(panel, OlsConstraint::Unrestricted),
        EstimatorId::OlsAddup => fit_ols(panel, OlsConstraint::AddingUp),
        EstimatorId::ScNestedHalflags => fit_sc_nested(
            panel,
            &PredictorSpec::new(LagSelector::FirstHalfLags, true),
        ),
        EstimatorId::ScNestedMean => {
            fit_sc_nested(panel, &PredictorSpec::new(LagSelector::MeanOfLags, true))
        }
    }
}

fn require_pre_periods(panel: &PanelData, min: usize) -> Result<()> {
    if panel.t0 < min {
        return Err(Error::Precondition(format!(
            "need at least {min} pre-treatment periods, got {}",
            panel.t0
        )));
    }
    Ok(())
}

fn softmax(u: &[f64]) -> DVector<f64> {
    let max = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut v = DVector::from_iterator(u.len(), u.iter().map(|x| (x - max).exp()));
    let sum = v.sum();
    v /= sum;
    v
}

/// Row-scale `(x0, X1)` by `sqrt(R v_r)` so a uniform `V` reproduces the
/// plain all-lags problem with identical floating-point values.
fn scaled_problem(x0: &DVector<f64>, x1: &DMatrix<f64>, v: &DVector<f64>) -> LsProblem {
    let rows = x0.len();
    let mut y0 = x0.clone();
    let mut y = x1.clone();
    for r in 0..rows {
        let s = (rows as f64 * v[r]).sqrt();
        y0[r] *= s;
        for c in 0..y.ncols() {
            y[(r, c)] *= s;
        }
    }
    LsProblem {
        y0,
        y,
        regime: Regime::Simplex,
    }
}

fn scaled_quadratic(x0: &DVector<f64>, x1: &DMatrix<f64>, v: &DVector<f64>) -> SimplexQuadratic {
    let p = scaled_problem(x0, x1, v);
    SimplexQuadratic::from_problem(&p.y0, &p.y)
}

fn solve_inner_fresh(
    x0: &DVector<f64>,
    x1: &DMatrix<f64>,
    v: &DVector<f64>,
) -> Result<(SolveReport, SimplexQuadratic)> {
    let p = scaled_problem(x0, x1, v);
    let report = solve_simplex_qp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let quad = SimplexQuadratic::from_problem(&p.y0, &p.y);
    Ok((report, quad))
}
