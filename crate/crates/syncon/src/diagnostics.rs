//! Ground-truth diagnostics for simulated panels.
//!
//! These quantities need the data-generating process, not just the observed
//! panel: the implied loadings `mu_hat = M' w` of a weight vector (the
//! object the consistency results are about), the sample moments that drive
//! the convergence rates, and the exact decomposition of each period's
//! estimation error into a factor gap and shock terms. None of this is
//! computable on an ingested real panel, where loadings are unobserved.

use serde::{Deserialize, Serialize};

use crate::dgp::FactorModelTruth;
use crate::error::{Error, Result};
use crate::estimators::WeightSolution;

/// Implied loadings and fit summary of one weight vector under known truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadingDiagnostics {
    /// `M' w` over the control rows of the loading matrix, length `F`.
    pub implied_mu: Vec<f64>,
    /// `Z' w` over the control rows of the covariates, when present.
    pub implied_z: Option<Vec<f64>>,
    /// `implied_mu - mu_0`.
    pub mu_error: Vec<f64>,
    pub weight_l1: f64,
    pub weight_l2: f64,
    pub pre_mse: f64,
}

/// Pre-period sample moments of shocks and factors.
///
/// These are the four quantities whose vanishing drives the consistency
/// results; they are reported raw so trend diagnostics can be run across
/// panel sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionDiagnostics {
    /// `max_j |T0^-1 sum_t eps_0t eps_jt|` over controls `j`.
    pub max_eps0_epsj_corr: f64,
    /// `max_{f,j} |T0^-1 sum_t lambda_ft eps_jt|` over all units including
    /// the treated one.
    pub max_lambda_eps_corr: f64,
    /// `min_j T0^-1 sum_t eps_jt^2` over controls `j`.
    pub min_eps_sq: f64,
    /// `max_{i != j} |T0^-1 sum_t eps_it eps_jt|` over control pairs.
    pub max_cross_eps_corr: f64,
}

/// One post-period estimation error split into its exact components:
/// `alpha_hat - alpha = factor_gap + own_shock + weighted_shock`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    /// Common-structure mismatch: `lambda_t'(mu_0 - mu_hat)` plus the
    /// covariate analogue, minus any intercept.
    pub factor_gap: f64,
    /// The treated unit's own shock `eps_0t`.
    pub own_shock: f64,
    /// `-eps_t' w`, the weighted control shocks.
    pub weighted_shock: f64,
}

impl ErrorDecomposition {
    pub fn total(&self) -> f64 {
        self.factor_gap + self.own_shock + self.weighted_shock
    }
}

/// Implied loadings `mu_hat = M_J' w` (and `z_hat = Z_J' w` when covariates
/// exist), using the control rows `1..=J` of the truth's loading matrix.
pub fn implied_loadings(
    w: &WeightSolution,
    truth: &FactorModelTruth,
) -> Result<LoadingDiagnostics> {
    let cfg = &truth.config;
    let j = cfg.n_controls();
    if w.weights.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "weights have length {}, truth has J={j}",
            w.weights.len()
        )));
    }
    let f = cfg.n_factors;
    let implied_mu: Vec<f64> = (0..f)
        .map(|fac| {
            (0..j)
                .map(|unit| cfg.loadings[(unit + 1, fac)] * w.weights[unit])
                .sum()
        })
        .collect();
    let mu_error: Vec<f64> = (0..f).map(|fac| implied_mu[fac] - cfg.loadings[(0, fac)]).collect();

    let implied_z = cfg.covariates.as_ref().map(|cov| {
        let q = cov.z.ncols();
        (0..q)
            .map(|c| {
                (0..j)
                    .map(|unit| cov.z[(unit + 1, c)] * w.weights[unit])
                    .sum()
            })
            .collect()
    });

    Ok(LoadingDiagnostics {
        implied_mu,
        implied_z,
        mu_error,
        weight_l1: w.l1_norm,
        weight_l2: w.l2_norm,
        pre_mse: w.pre_mse,
    })
}

/// Sample moments of pre-period shocks and factors.
pub fn assumption_diagnostics(truth: &FactorModelTruth) -> Result<AssumptionDiagnostics> {
    let cfg = &truth.config;
    let t0 = cfg.t0;
    if t0 < 2 {
        return Err(Error::Precondition(
            "assumption diagnostics need at least 2 pre-periods".into(),
        ));
    }
    let j = cfg.n_controls();
    let inv_t0 = 1.0 / t0 as f64;

    let mut max_eps0_epsj = 0.0f64;
    for unit in 1..=j {
        let mut acc = 0.0;
        for t in 0..t0 {
            acc += truth.shocks[(t, 0)] * truth.shocks[(t, unit)];
        }
        max_eps0_epsj = max_eps0_epsj.max((acc * inv_t0).abs());
    }

    let mut max_lambda_eps = 0.0f64;
    for f in 0..cfg.n_factors {
        for unit in 0..=j {
            let mut acc = 0.0;
            for t in 0..t0 {
                acc += truth.factors[(t, f)] * truth.shocks[(t, unit)];
            }
            max_lambda_eps = max_lambda_eps.max((acc * inv_t0).abs());
        }
    }

    let mut min_eps_sq = f64::INFINITY;
    for unit in 1..=j {
        let mut acc = 0.0;
        for t in 0..t0 {
            acc += truth.shocks[(t, unit)] * truth.shocks[(t, unit)];
        }
        min_eps_sq = min_eps_sq.min(acc * inv_t0);
    }

    let mut max_cross = 0.0f64;
    for a in 1..=j {
        for b in (a + 1)..=j {
            let mut acc = 0.0;
            for t in 0..t0 {
                acc += truth.shocks[(t, a)] * truth.shocks[(t, b)];
            }
            max_cross = max_cross.max((acc * inv_t0).abs());
        }
    }

    Ok(AssumptionDiagnostics {
        max_eps0_epsj_corr: max_eps0_epsj,
        max_lambda_eps_corr: max_lambda_eps,
        min_eps_sq,
        max_cross_eps_corr: max_cross,
    })
}

/// Exact decomposition of the estimation error at post-period `t`
/// (0-indexed within the post block).
pub fn error_decomposition(
    w: &WeightSolution,
    truth: &FactorModelTruth,
    t: usize,
) -> Result<ErrorDecomposition> {
    let cfg = &truth.config;
    if t >= cfg.t1 {
        return Err(Error::Precondition(format!(
            "post-period index {t} out of range (T1={})",
            cfg.t1
        )));
    }
    let j = cfg.n_controls();
    if w.weights.len() != j {
        return Err(Error::DimensionMismatch(format!(
            "weights have length {}, truth has J={j}",
            w.weights.len()
        )));
    }
    let row = cfg.t0 + t;

    let diag = implied_loadings(w, truth)?;
    let mut factor_gap = 0.0;
    for f in 0..cfg.n_factors {
        factor_gap += truth.factors[(row, f)] * (cfg.loadings[(0, f)] - diag.implied_mu[f]);
    }
    if let (Some(theta), Some(cov)) = (&truth.theta, &cfg.covariates) {
        let implied_z = diag.implied_z.as_ref().expect("covariates imply implied_z");
        for c in 0..cov.z.ncols() {
            factor_gap += theta[(row, c)] * (cov.z[(0, c)] - implied_z[c]);
        }
    }
    factor_gap -= w.intercept.unwrap_or(0.0);

    let own_shock = truth.shocks[(row, 0)];
    let mut weighted_shock = 0.0;
    for unit in 0..j {
        weighted_shock -= truth.shocks[(row, unit + 1)] * w.weights[unit];
    }

    Ok(ErrorDecomposition {
        factor_gap,
        own_shock,
        weighted_shock,
    })
}
