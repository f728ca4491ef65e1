//! Replication engine and summarizer for the simulation studies.
//!
//! Every replication draws its own panel from counter-based RNG streams,
//! fits the scenario's estimator menu, and records implied loadings and the
//! one-period-ahead treatment-effect estimate. Replications run in parallel
//! up to the requested width, but aggregation always reduces in replication
//! order, so summaries are byte-identical across parallelism levels.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{make_scenario_panel, ScenarioConfig, ScenarioKind, T0Rule};
use crate::diagnostics::{implied_loadings, LoadingDiagnostics};
use crate::error::{Error, Result};
use crate::estimators::{fit, treatment_effects, EstimatorId, WeightSolution};

/// Everything recorded for one estimator on one replication.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub solution: WeightSolution,
    pub diagnostics: LoadingDiagnostics,
    pub alpha_hat: DVector<f64>,
}

/// Run one replication of a scenario: draw the panel, fit every requested
/// estimator. Estimator failures are recorded per estimator, never fatal.
pub fn run_replication(
    s: &ScenarioConfig,
    rep: u64,
) -> Result<BTreeMap<String, std::result::Result<RepOutcome, String>>> {
    let (panel, truth) = make_scenario_panel(s, rep)?;
    let mut out = BTreeMap::new();
    for name in &s.estimators {
        let id: EstimatorId = match name.parse() {
            Ok(id) => id,
            Err(e) => {
                out.insert(name.clone(), Err(e.to_string()));
                continue;
            }
        };
        let result = fit(&panel, id).and_then(|solution| {
            let diagnostics = implied_loadings(&solution, &truth)?;
            let alpha_hat = treatment_effects(&panel, &solution)?;
            Ok(RepOutcome {
                solution,
                diagnostics,
                alpha_hat,
            })
        });
        out.insert(name.clone(), result.map_err(|e| e.to_string()));
    }
    Ok(out)
}

/// Per-estimator moments across successful replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorSummary {
    /// Mean implied loading per factor.
    pub mean_mu: Vec<f64>,
    /// Sample standard deviation (denominator R-1) per factor.
    pub sd_mu: Vec<f64>,
    pub mean_z: Option<Vec<f64>>,
    pub sd_z: Option<Vec<f64>>,
    /// Moments of the one-period-ahead treatment-effect estimate.
    pub mean_alpha1: f64,
    pub sd_alpha1: f64,
    pub mean_pre_mse: f64,
    /// Mean Euclidean norm of the weight vector (dilution measure).
    pub mean_l2: f64,
    pub failures: usize,
    pub successes: usize,
}

/// Scenario summary: the configuration plus per-estimator moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McSummary {
    pub scenario: ScenarioConfig,
    pub per_estimator: BTreeMap<String, EstimatorSummary>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Run all replications of a scenario and summarize.
///
/// `parallelism` is the number of worker threads; `0` uses the default
/// thread pool width. The summary is independent of `parallelism`.
pub fn run_mc(s: &ScenarioConfig, parallelism: usize) -> Result<McSummary> {
    s.validate()?;
    if s.replications < 2 {
        return Err(Error::InvalidScenario(
            "need at least 2 replications to form standard deviations".into(),
        ));
    }

    let reps: Vec<BTreeMap<String, std::result::Result<RepOutcome, String>>> =
        if parallelism == 1 {
            (0..s.replications as u64)
                .map(|rep| run_replication(s, rep))
                .collect::<Result<Vec<_>>>()?
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(parallelism)
                .build()
                .map_err(|e| Error::InvalidScenario(format!("thread pool: {e}")))?;
            pool.install(|| {
                (0..s.replications as u64)
                    .into_par_iter()
                    .map(|rep| run_replication(s, rep))
                    .collect::<Result<Vec<_>>>()
            })?
        };

    let mut per_estimator = BTreeMap::new();
    for name in &s.estimators {
        let mut mu_samples: Vec<Vec<f64>> = Vec::new();
        let mut z_samples: Vec<Vec<f64>> = Vec::new();
        let mut alpha1 = Vec::new();
        let mut pre_mse = Vec::new();
        let mut l2 = Vec::new();
        let mut failures = 0usize;
        let mut first_failure = None;

        // Ordered reduction: replication index order, regardless of the
        // completion order inside the pool.
        for rep in &reps {
            match rep.get(name) {
                Some(Ok(outcome)) => {
                    mu_samples.push(outcome.diagnostics.implied_mu.clone());
                    if let Some(z) = &outcome.diagnostics.implied_z {
                        z_samples.push(z.clone());
                    }
                    alpha1.push(outcome.alpha_hat[0]);
                    pre_mse.push(outcome.solution.pre_mse);
                    l2.push(outcome.solution.l2_norm);
                }
                Some(Err(e)) => {
                    failures += 1;
                    if first_failure.is_none() {
                        first_failure = Some(e.clone());
                    }
                }
                None => unreachable!("estimator menu is fixed per run"),
            }
        }

        let successes = mu_samples.len();
        if successes == 0 {
            return Err(Error::AllReplicationsFailed {
                estimator: name.clone(),
                replications: s.replications,
                first_failure: first_failure.unwrap_or_else(|| "no outcome".into()),
            });
        }

        let n_factors = mu_samples[0].len();
        let mut mean_mu = Vec::with_capacity(n_factors);
        let mut sd_mu = Vec::with_capacity(n_factors);
        for f in 0..n_factors {
            let xs: Vec<f64> = mu_samples.iter().map(|m| m[f]).collect();
            mean_mu.push(mean(&xs));
            sd_mu.push(sample_sd(&xs));
        }
        let (mean_z, sd_z) = if z_samples.len() == successes && !z_samples.is_empty() {
            let q = z_samples[0].len();
            let mut mz = Vec::with_capacity(q);
            let mut sz = Vec::with_capacity(q);
            for c in 0..q {
                let xs: Vec<f64> = z_samples.iter().map(|z| z[c]).collect();
                mz.push(mean(&xs));
                sz.push(sample_sd(&xs));
            }
            (Some(mz), Some(sz))
        } else {
            (None, None)
        };

        per_estimator.insert(
            name.clone(),
            EstimatorSummary {
                mean_mu,
                sd_mu,
                mean_z,
                sd_z,
                mean_alpha1: mean(&alpha1),
                sd_alpha1: sample_sd(&alpha1),
                mean_pre_mse: mean(&pre_mse),
                mean_l2: mean(&l2),
                failures,
                successes,
            },
        );
    }

    Ok(McSummary {
        scenario: s.clone(),
        per_estimator,
    })
}

/// Observed versus predicted sampling spread of the unrestricted-OLS
/// treatment-effect estimate in the one-factor design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceLawResult {
    /// Replication standard deviation of the estimate.
    pub sd_alpha: f64,
    /// `sigma / sqrt(1 - c)`.
    pub predicted: f64,
    pub t0: usize,
    pub successes: usize,
}

/// Monte Carlo check of the asymptotic variance law `sigma^2 / (1 - c)` for
/// unrestricted OLS in the one-factor design with `J/T0 -> c`.
///
/// `t0_override` fixes the number of pre-periods directly; otherwise
/// `T0 = round(J / c)` (which requires `c > 0`).
pub fn simple_example_variance(
    c: f64,
    j: usize,
    sigma: f64,
    reps: usize,
    seed: u64,
    t0_override: Option<usize>,
) -> Result<VarianceLawResult> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidScenario(format!("c must lie in [0, 1), got {c}")));
    }
    let t0 = match t0_override {
        Some(t0) => t0,
        None => {
            if c == 0.0 {
                return Err(Error::InvalidScenario(
                    "c = 0 needs an explicit T0 (any T0 >> J)".into(),
                ));
            }
            (j as f64 / c).round() as usize
        }
    };
    if t0 < j {
        return Err(Error::InvalidScenario(format!(
            "T0={t0} < J={j}: OLS not defined"
        )));
    }
    let scenario = ScenarioConfig {
        kind: ScenarioKind::SimpleExampleF1,
        j,
        t0_rule: T0Rule::Explicit(t0),
        seed,
        replications: reps,
        estimators: vec![EstimatorId::Ols.as_str().to_string()],
        sigma,
    };
    let summary = run_mc(&scenario, 0)?;
    let stats = &summary.per_estimator[EstimatorId::Ols.as_str()];
    Ok(VarianceLawResult {
        sd_alpha: stats.sd_alpha1,
        predicted: sigma / (1.0 - c).sqrt(),
        t0,
        successes: stats.successes,
    })
}

/// One reference cell: a published value and the absolute tolerance a rerun
/// is held to (sized for Monte Carlo error at the reference's own
/// replication count).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub value: f64,
    pub tolerance: f64,
}

type CellKey = (String, String, usize, String);

/// A reference table of Monte Carlo results, keyed by
/// `(panel, estimator, J, statistic)`.
///
/// File format: one record per line, `panel,estimator,J,statistic,value,
/// tolerance`; `#` starts a comment.
#[derive(Debug, Clone, Default)]
pub struct ReferenceTable {
    cells: BTreeMap<CellKey, ReferenceCell>,
}

impl ReferenceTable {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(Error::ParseError {
                    path: path.into(),
                    row: line_no + 1,
                    column: "record".into(),
                    message: format!("expected 6 comma-separated fields, got {}", fields.len()),
                });
            }
            let parse_num = |s: &str, col: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|e| Error::ParseError {
                    path: path.into(),
                    row: line_no + 1,
                    column: col.into(),
                    message: e.to_string(),
                })
            };
            let j = fields[2].parse::<usize>().map_err(|e| Error::ParseError {
                path: path.into(),
                row: line_no + 1,
                column: "J".into(),
                message: e.to_string(),
            })?;
            let value = parse_num(fields[4], "value")?;
            let tolerance = parse_num(fields[5], "tolerance")?;
            cells.insert(
                (fields[0].into(), fields[1].into(), j, fields[3].into()),
                ReferenceCell { value, tolerance },
            );
        }
        Ok(ReferenceTable { cells })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, panel: &str, estimator: &str, j: usize, statistic: &str) -> Option<ReferenceCell> {
        self.cells
            .get(&(panel.into(), estimator.into(), j, statistic.into()))
            .copied()
    }
}

/// One compared cell of a [`ComparisonReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellComparison {
    pub panel: String,
    pub estimator: String,
    pub j: usize,
    pub statistic: String,
    pub observed: f64,
    pub reference: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Cell-by-cell comparison of a summary against a reference table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<CellComparison>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.deviation).fold(0.0, f64::max)
    }

    /// Rows ordered worst first (largest deviation-to-tolerance ratio).
    pub fn worst_first(&self) -> Vec<&CellComparison> {
        let mut rows: Vec<&CellComparison> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            let ra = a.deviation / a.tolerance.max(f64::MIN_POSITIVE);
            let rb = b.deviation / b.tolerance.max(f64::MIN_POSITIVE);
            rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
        });
        rows
    }
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "panel      estimator               J statistic    observed  reference  deviation  tolerance  result"
        )?;
        for row in self.worst_first() {
            writeln!(
                f,
                "{:<10} {:<20} {:>4} {:<10} {:>10.4} {:>10.4} {:>10.4} {:>10.4}  {}",
                row.panel,
                row.estimator,
                row.j,
                row.statistic,
                row.observed,
                row.reference,
                row.deviation,
                row.tolerance,
                if row.pass { "pass" } else { "FAIL" }
            )?;
        }
        let status = if self.all_pass() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{} ({} cells, max deviation {:.4})",
            status,
            self.rows.len(),
            self.max_deviation()
        )
    }
}

/// The statistics a scenario's summary is compared on, matching the layout
/// of the reference tables for that design.
fn comparison_statistics(kind: ScenarioKind) -> &'static [&'static str] {
    match kind {
        ScenarioKind::TwoFactorGroups => {
            &["mean_mu1", "sd_mu1", "mean_mu2", "sd_mu2", "sd_alpha"]
        }
        ScenarioKind::TwoFactorCovariates => {
            &["mean_mu1", "sd_mu1", "mean_z1", "sd_z1", "sd_alpha"]
        }
        ScenarioKind::SimpleExampleF1 => &["mean_mu1", "sd_mu1", "sd_alpha"],
    }
}

fn summary_statistic(stats: &EstimatorSummary, statistic: &str) -> Option<f64> {
    match statistic {
        "mean_mu1" => stats.mean_mu.first().copied(),
        "mean_mu2" => stats.mean_mu.get(1).copied(),
        "sd_mu1" => stats.sd_mu.first().copied(),
        "sd_mu2" => stats.sd_mu.get(1).copied(),
        "mean_z1" => stats.mean_z.as_ref().and_then(|z| z.first().copied()),
        "sd_z1" => stats.sd_z.as_ref().and_then(|z| z.first().copied()),
        "sd_alpha" => Some(stats.sd_alpha1),
        "mean_alpha" => Some(stats.mean_alpha1),
        _ => None,
    }
}

/// Compare a summary's cells against a reference table.
///
/// Every statistic the scenario's table layout defines must exist in the
/// reference; a missing counterpart is an error rather than a silent skip.
pub fn compare_to_reference(
    summary: &McSummary,
    reference: &ReferenceTable,
) -> Result<ComparisonReport> {
    let panel = summary.scenario.t0_rule.panel_label();
    let j = summary.scenario.j;
    let mut rows = Vec::new();
    for (name, stats) in &summary.per_estimator {
        for statistic in comparison_statistics(summary.scenario.kind) {
            let observed = match summary_statistic(stats, statistic) {
                Some(v) => v,
                None => continue, // statistic not produced by this run
            };
            let cell = reference.get(&panel, name, j, statistic).ok_or_else(|| {
                Error::MissingReferenceCell {
                    panel: panel.clone(),
                    estimator: name.clone(),
                    j,
                    statistic: statistic.to_string(),
                }
            })?;
            let deviation = (observed - cell.value).abs();
            rows.push(CellComparison {
                panel: panel.clone(),
                estimator: name.clone(),
                j,
                statistic: statistic.to_string(),
                observed,
                reference: cell.value,
                deviation,
                tolerance: cell.tolerance,
                pass: deviation <= cell.tolerance,
            });
        }
    }
    Ok(ComparisonReport { rows })
}
