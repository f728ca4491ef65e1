//! Panel simulation from a linear factor model.
//!
//! Untreated potential outcomes follow
//!
//! ```text
//! y_it = lambda_t' mu_i (+ theta_t' z_i) + eps_it,
//! ```
//!
//! with common factors `lambda_t`, unit loadings `mu_i`, optional observed
//! covariates `z_i` whose effects `theta_t` vary over time, and idiosyncratic
//! shocks `eps_it`. Unit 0 is treated: its post-period outcomes add the true
//! treatment effects. The simulator returns both the observed panel and the
//! ground truth (factor paths, shock paths, loadings) so diagnostics can
//! compute implied loadings and error decompositions.
//!
//! Randomness is counter-based and splittable: every replication draws from
//! ChaCha streams keyed by `(seed, rep_index, component)`, so parallel Monte
//! Carlo runs are reproducible regardless of thread scheduling and
//! replication streams never overlap.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed covariate block of a factor-model configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariateConfig {
    /// Covariate values, `(J+1) x q`; row 0 is the treated unit.
    pub z: DMatrix<f64>,
    /// Standard deviations of the iid time-varying covariate effects.
    pub theta_sd: DVector<f64>,
}

/// Full description of a simulated panel's data-generating process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorModelConfig {
    /// Number of common factors.
    pub n_factors: usize,
    /// AR(1) coefficient shared by all factors, in (-1, 1).
    pub ar_coefficient: f64,
    /// Stationary variance of each factor.
    pub factor_variance: f64,
    /// Loadings, `(J+1) x F`; row 0 is the treated unit.
    pub loadings: DMatrix<f64>,
    /// Idiosyncratic shock standard deviation per unit, length `J+1`.
    pub shock_sd: DVector<f64>,
    pub covariates: Option<CovariateConfig>,
    /// True treatment effects for the treated unit, length `T1`.
    pub treatment_effects: DVector<f64>,
    pub t0: usize,
    pub t1: usize,
}

impl FactorModelConfig {
    pub fn n_units(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.loadings.nrows() - 1
    }

    pub fn periods(&self) -> usize {
        self.t0 + self.t1
    }

    pub fn validate(&self) -> Result<()> {
        if self.ar_coefficient.abs() >= 1.0 || !self.ar_coefficient.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "ar_coefficient must lie in (-1, 1), got {}",
                self.ar_coefficient
            )));
        }
        if !self.factor_variance.is_finite() || self.factor_variance <= 0.0 {
            return Err(Error::InvalidScenario("factor_variance must be > 0".into()));
        }
        if self.n_factors == 0 || self.loadings.ncols() != self.n_factors {
            return Err(Error::DimensionMismatch(format!(
                "loadings have {} columns, expected F={}",
                self.loadings.ncols(),
                self.n_factors
            )));
        }
        if self.loadings.nrows() < 2 {
            return Err(Error::InvalidScenario(
                "need a treated unit and at least one control".into(),
            ));
        }
        if self.shock_sd.len() != self.loadings.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "shock_sd has length {}, expected J+1={}",
                self.shock_sd.len(),
                self.loadings.nrows()
            )));
        }
        if !self.shock_sd.iter().all(|s| *s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidScenario(
                "shock_sd must be nonnegative and finite".into(),
            ));
        }
        if !self.loadings.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("loadings".into()));
        }
        if let Some(cov) = &self.covariates {
            if cov.z.nrows() != self.loadings.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "covariate matrix has {} rows, expected J+1={}",
                    cov.z.nrows(),
                    self.loadings.nrows()
                )));
            }
            if cov.z.ncols() == 0 {
                return Err(Error::InvalidScenario("covariates present but q = 0".into()));
            }
            if cov.theta_sd.len() != cov.z.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "theta_sd has length {}, expected q={}",
                    cov.theta_sd.len(),
                    cov.z.ncols()
                )));
            }
        }
        if self.t0 == 0 {
            return Err(Error::InvalidScenario("need at least one pre-period".into()));
        }
        if self.treatment_effects.len() != self.t1 {
            return Err(Error::DimensionMismatch(format!(
                "treatment_effects has length {}, expected T1={}",
                self.treatment_effects.len(),
                self.t1
            )));
        }
        Ok(())
    }
}

/// Ground truth for one simulated panel: every random component as drawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorModelTruth {
    /// Factor paths, `(T0+T1) x F`.
    pub factors: DMatrix<f64>,
    /// Covariate-effect paths, `(T0+T1) x q`, when covariates are present.
    pub theta: Option<DMatrix<f64>>,
    /// Idiosyncratic shocks, `(T0+T1) x (J+1)`; column 0 is the treated unit.
    pub shocks: DMatrix<f64>,
    pub config: FactorModelConfig,
}

/// An observed panel: outcomes for the treated unit (column 0) and `J`
/// controls over `T0` pre-treatment and `T1` post-treatment periods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelData {
    /// Outcomes, `(T0+T1) x (J+1)`; column 0 is the treated unit.
    pub y: DMatrix<f64>,
    pub t0: usize,
    pub t1: usize,
    /// Observed covariates, `(J+1) x q`, when available.
    pub covariates: Option<DMatrix<f64>>,
}

impl PanelData {
    /// Number of control units.
    pub fn n_controls(&self) -> usize {
        self.y.ncols() - 1
    }

    /// Treated outcomes over the pre-period.
    pub fn treated_pre(&self) -> DVector<f64> {
        DVector::from_iterator(self.t0, self.y.column(0).iter().take(self.t0).copied())
    }

    /// Control outcomes over the pre-period, `T0 x J`.
    pub fn controls_pre(&self) -> DMatrix<f64> {
        self.y.view((0, 1), (self.t0, self.n_controls())).into_owned()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.nrows() != self.t0 + self.t1 {
            return Err(Error::DimensionMismatch(format!(
                "panel has {} rows, expected T0+T1={}",
                self.y.nrows(),
                self.t0 + self.t1
            )));
        }
        if self.y.ncols() < 2 {
            return Err(Error::DimensionMismatch(
                "panel needs a treated column and at least one control".into(),
            ));
        }
        if !self.y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("panel outcomes".into()));
        }
        if let Some(z) = &self.covariates {
            if z.nrows() != self.y.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "covariates have {} rows, expected one per unit ({})",
                    z.nrows(),
                    self.y.ncols()
                )));
            }
        }
        Ok(())
    }
}

/// Independent ChaCha streams for the random components of one panel draw.
///
/// All streams share a key derived from the scenario seed; the stream id
/// packs `(rep_index, component)`, so draws for different replications or
/// components never share generator state.
pub struct PanelRng {
    factors: ChaCha8Rng,
    theta: ChaCha8Rng,
    shocks: ChaCha8Rng,
}

const STREAMS_PER_REP: u64 = 4;

impl PanelRng {
    pub fn new(seed: u64, rep_index: u64) -> Self {
        let make = |component: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep_index.wrapping_mul(STREAMS_PER_REP) + component);
            rng
        };
        PanelRng {
            factors: make(0),
            theta: make(1),
            shocks: make(2),
        }
    }
}

/// Simulate mutually independent AR(1) factor paths.
///
/// Each column starts from its stationary law `N(0, var)` and evolves with
/// innovation variance `var * (1 - ar^2)`, so the marginal variance is `var`
/// at every period with no burn-in.
pub fn simulate_ar1_factors(
    n_factors: usize,
    ar: f64,
    var: f64,
    length: usize,
    rng: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    if ar.abs() >= 1.0 || !ar.is_finite() {
        return Err(Error::InvalidScenario(format!(
            "AR coefficient must lie in (-1, 1), got {ar}"
        )));
    }
    if !var.is_finite() || var <= 0.0 {
        return Err(Error::InvalidScenario("factor variance must be > 0".into()));
    }
    let sd0 = var.sqrt();
    let innov_sd = (var * (1.0 - ar * ar)).sqrt();
    let mut out = DMatrix::zeros(length, n_factors);
    for f in 0..n_factors {
        let mut prev = 0.0;
        for t in 0..length {
            let z: f64 = rng.sample(StandardNormal);
            let x = if t == 0 { sd0 * z } else { ar * prev + innov_sd * z };
            out[(t, f)] = x;
            prev = x;
        }
    }
    Ok(out)
}

/// Draw one panel from the factor model.
///
/// Untreated cells satisfy `y = factors * loadings' (+ theta * z') + shocks`
/// exactly as constructed; the treated column adds the configured treatment
/// effects over the post-period. The RNG consumption order is fixed
/// (factors, then covariate effects, then shocks in row-major order), so the
/// draw is a pure function of `(cfg, rng state)`.
pub fn simulate_panel(
    cfg: &FactorModelConfig,
    rng: &mut PanelRng,
) -> Result<(PanelData, FactorModelTruth)> {
    cfg.validate()?;
    let periods = cfg.periods();
    let n_units = cfg.n_units();

    let factors = simulate_ar1_factors(
        cfg.n_factors,
        cfg.ar_coefficient,
        cfg.factor_variance,
        periods,
        &mut rng.factors,
    )?;

    let theta = cfg.covariates.as_ref().map(|cov| {
        let q = cov.z.ncols();
        DMatrix::from_fn(periods, q, |_, c| {
            let z: f64 = rng.theta.sample(StandardNormal);
            cov.theta_sd[c] * z
        })
    });

    let mut shocks = DMatrix::zeros(periods, n_units);
    for t in 0..periods {
        for i in 0..n_units {
            let z: f64 = rng.shocks.sample(StandardNormal);
            shocks[(t, i)] = cfg.shock_sd[i] * z;
        }
    }

    let mut y = DMatrix::zeros(periods, n_units);
    for t in 0..periods {
        for i in 0..n_units {
            let mut v = 0.0;
            for f in 0..cfg.n_factors {
                v += factors[(t, f)] * cfg.loadings[(i, f)];
            }
            if let (Some(th), Some(cov)) = (&theta, &cfg.covariates) {
                for c in 0..cov.z.ncols() {
                    v += th[(t, c)] * cov.z[(i, c)];
                }
            }
            y[(t, i)] = v + shocks[(t, i)];
        }
    }
    for s in 0..cfg.t1 {
        y[(cfg.t0 + s, 0)] += cfg.treatment_effects[s];
    }

    let panel = PanelData {
        y,
        t0: cfg.t0,
        t1: cfg.t1,
        covariates: cfg.covariates.as_ref().map(|c| c.z.clone()),
    };
    let truth = FactorModelTruth {
        factors,
        theta,
        shocks,
        config: cfg.clone(),
    };
    Ok((panel, truth))
}

/// Named Monte Carlo designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Two AR(1) factors; the treated unit and the first half of the
    /// controls load on the first factor, the rest on the second.
    TwoFactorGroups,
    /// As above plus two observed covariates; controls split into four
    /// equal groups crossing loading and covariate patterns.
    TwoFactorCovariates,
    /// One iid factor loaded by every unit; used for the OLS variance law.
    SimpleExampleF1,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioKind::TwoFactorGroups => write!(f, "two_factor_groups"),
            ScenarioKind::TwoFactorCovariates => write!(f, "two_factor_covariates"),
            ScenarioKind::SimpleExampleF1 => write!(f, "simple_example_f1"),
        }
    }
}

/// Rule tying the number of pre-treatment periods to the number of controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum T0Rule {
    JPlus5,
    TwoTimesJ,
    Explicit(usize),
}

impl T0Rule {
    pub fn t0(&self, j: usize) -> usize {
        match self {
            T0Rule::JPlus5 => j + 5,
            T0Rule::TwoTimesJ => 2 * j,
            T0Rule::Explicit(t0) => *t0,
        }
    }

    /// Label used to key reference-table cells.
    pub fn panel_label(&self) -> String {
        match self {
            T0Rule::JPlus5 => "A".into(),
            T0Rule::TwoTimesJ => "B".into(),
            T0Rule::Explicit(t0) => format!("T0={t0}"),
        }
    }
}

impl std::fmt::Display for T0Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            T0Rule::JPlus5 => write!(f, "J+5"),
            T0Rule::TwoTimesJ => write!(f, "2J"),
            T0Rule::Explicit(t0) => write!(f, "{t0}"),
        }
    }
}

/// A full Monte Carlo scenario: design, size, seed, and estimator menu.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Number of control units.
    pub j: usize,
    pub t0_rule: T0Rule,
    pub seed: u64,
    pub replications: usize,
    /// Estimator identifiers to fit on every replication.
    pub estimators: Vec<String>,
    /// Idiosyncratic shock standard deviation; only `simple_example_f1`
    /// departs from 1.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn default_sigma() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn t0(&self) -> usize {
        self.t0_rule.t0(self.j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(Error::InvalidScenario("J must be >= 1".into()));
        }
        match self.kind {
            ScenarioKind::TwoFactorGroups => {
                if !self.j.is_multiple_of(2) {
                    return Err(Error::InvalidScenario(format!(
                        "two_factor_groups needs an even J, got {}",
                        self.j
                    )));
                }
            }
            ScenarioKind::TwoFactorCovariates => {
                if !self.j.is_multiple_of(4) {
                    return Err(Error::InvalidScenario(format!(
                        "two_factor_covariates needs J divisible by 4, got {}",
                        self.j
                    )));
                }
            }
            ScenarioKind::SimpleExampleF1 => {}
        }
        if self.t0() == 0 {
            return Err(Error::InvalidScenario("T0 must be >= 1".into()));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidScenario("sigma must be > 0".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidScenario("estimator menu is empty".into()));
        }
        Ok(())
    }

    /// The factor-model configuration this scenario induces.
    pub fn factor_model(&self) -> Result<FactorModelConfig> {
        self.validate()?;
        let j = self.j;
        let t0 = self.t0();
        let cfg = match self.kind {
            ScenarioKind::TwoFactorGroups => {
                let mut loadings = DMatrix::zeros(j + 1, 2);
                loadings[(0, 0)] = 1.0;
                for u in 1..=j {
                    if u <= j / 2 {
                        loadings[(u, 0)] = 1.0;
                    } else {
                        loadings[(u, 1)] = 1.0;
                    }
                }
                FactorModelConfig {
                    n_factors: 2,
                    ar_coefficient: 0.5,
                    factor_variance: 1.0,
                    loadings,
                    shock_sd: DVector::from_element(j + 1, 1.0),
                    covariates: None,
                    treatment_effects: DVector::zeros(1),
                    t0,
                    t1: 1,
                }
            }
            ScenarioKind::TwoFactorCovariates => {
                let mut loadings = DMatrix::zeros(j + 1, 2);
                let mut z = DMatrix::zeros(j + 1, 2);
                loadings[(0, 0)] = 1.0;
                z[(0, 0)] = 1.0;
                let group = j / 4;
                for u in 1..=j {
                    let g = (u - 1) / group; // 0..4: crossing mu x z
                    let mu_first = g < 2;
                    let z_first = g.is_multiple_of(2);
                    loadings[(u, if mu_first { 0 } else { 1 })] = 1.0;
                    z[(u, if z_first { 0 } else { 1 })] = 1.0;
                }
                FactorModelConfig {
                    n_factors: 2,
                    ar_coefficient: 0.5,
                    factor_variance: 1.0,
                    loadings,
                    shock_sd: DVector::from_element(j + 1, 1.0),
                    covariates: Some(CovariateConfig {
                        z,
                        theta_sd: DVector::from_element(2, 1.0),
                    }),
                    treatment_effects: DVector::zeros(1),
                    t0,
                    t1: 1,
                }
            }
            ScenarioKind::SimpleExampleF1 => FactorModelConfig {
                n_factors: 1,
                ar_coefficient: 0.0,
                factor_variance: 1.0,
                loadings: DMatrix::from_element(j + 1, 1, 1.0),
                shock_sd: DVector::from_element(j + 1, self.sigma),
                covariates: None,
                treatment_effects: DVector::zeros(1),
                t0,
                t1: 1,
            },
        };
        Ok(cfg)
    }
}

/// Draw the panel for replication `rep_index` of a scenario.
pub fn make_scenario_panel(
    s: &ScenarioConfig,
    rep_index: u64,
) -> Result<(PanelData, FactorModelTruth)> {
    let cfg = s.factor_model()?;
    let mut rng = PanelRng::new(s.seed, rep_index);
    simulate_panel(&cfg, &mut rng)
}
