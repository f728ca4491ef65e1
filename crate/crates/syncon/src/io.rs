//! File formats and run provenance.
//!
//! - Panels travel as wide CSV: header `time,unit0,unit1,...`, one row per
//!   period, the treated unit in the column named `unit0`. Numbers are
//!   written in shortest round-trip form, so write-then-read reproduces a
//!   panel exactly.
//! - Covariates are a small CSV with one row per unit in panel column order.
//! - Scenario configurations are flat `key = value` text, hand-editable and
//!   hashable; the SHA-256 of the canonicalized text identifies a run.
//! - Every output directory gets a `manifest.json` recording the command,
//!   config digest, seed, tool version, and produced files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgp::{PanelData, ScenarioConfig, ScenarioKind, T0Rule};
use crate::error::{Error, Result};
use crate::estimators::WeightSolution;

/// Environment variable that overrides the scenario seed when set.
pub const SEED_ENV_VAR: &str = "SYNCON_SEED";

fn fmt_f64(v: f64) -> String {
    // `Display` for f64 is the shortest string that round-trips.
    format!("{v}")
}

/// Write a panel as wide CSV (`time,unit0,unit1,...`).
pub fn write_panel_csv(panel: &PanelData, path: &Path) -> Result<()> {
    panel.validate()?;
    let mut w = csv::Writer::from_path(path)?;
    let n_units = panel.y.ncols();
    let mut header = Vec::with_capacity(n_units + 1);
    header.push("time".to_string());
    for u in 0..n_units {
        header.push(format!("unit{u}"));
    }
    w.write_record(&header)?;
    for t in 0..panel.y.nrows() {
        let mut rec = Vec::with_capacity(n_units + 1);
        rec.push((t + 1).to_string());
        for u in 0..n_units {
            rec.push(fmt_f64(panel.y[(t, u)]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a wide panel CSV. `t0` is the number of pre-treatment rows; the
/// remaining rows form the post-period. The column named `unit0` becomes the
/// treated unit regardless of its position; other unit columns keep their
/// header order.
pub fn parse_panel_csv(path: &Path, t0: usize, covariates: Option<&Path>) -> Result<PanelData> {
    let display = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(&display, e))?.clone();
    if headers.is_empty() || headers.get(0) != Some("time") {
        return Err(Error::ParseError {
            path: display,
            row: 1,
            column: "time".into(),
            message: "first header column must be 'time'".into(),
        });
    }
    let mut treated_col = None;
    let mut control_cols = Vec::new();
    for (idx, name) in headers.iter().enumerate().skip(1) {
        if name == "unit0" {
            treated_col = Some(idx);
        } else {
            control_cols.push((idx, name.to_string()));
        }
    }
    let treated_col = treated_col.ok_or_else(|| Error::MissingTreatedColumn(display.clone()))?;
    if control_cols.is_empty() {
        return Err(Error::ParseError {
            path: display,
            row: 1,
            column: "header".into(),
            message: "need at least one control column".into(),
        });
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut prev_time: Option<f64> = None;
    for (rec_idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(&display, e))?;
        let row_no = rec_idx + 1; // 1-based data row
        let parse_cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| Error::ParseError {
                path: display.clone(),
                row: row_no,
                column: column.to_string(),
                message: "missing field".into(),
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| Error::ParseError {
                path: display.clone(),
                row: row_no,
                column: column.to_string(),
                message: format!("not a number: '{raw}'"),
            })?;
            Ok(v)
        };

        let time = parse_cell(0, "time")?;
        if let Some(prev) = prev_time {
            if time <= prev {
                return Err(Error::NonMonotoneTime {
                    path: display,
                    row: row_no,
                    previous: prev,
                    current: time,
                });
            }
        }
        prev_time = Some(time);

        let mut row = Vec::with_capacity(control_cols.len() + 1);
        let treated = parse_cell(treated_col, "unit0")?;
        if !treated.is_finite() {
            return Err(Error::NonFiniteCell {
                path: display,
                row: row_no,
                column: "unit0".into(),
            });
        }
        row.push(treated);
        for (idx, name) in &control_cols {
            let v = parse_cell(*idx, name)?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCell {
                    path: display,
                    row: row_no,
                    column: name.clone(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    if rows.len() <= t0 {
        return Err(Error::Precondition(format!(
            "panel has {} rows but T0={t0}; need at least one post-period row",
            rows.len()
        )));
    }
    if t0 == 0 {
        return Err(Error::Precondition("T0 must be >= 1".into()));
    }
    let n_units = control_cols.len() + 1;
    let y = DMatrix::from_fn(rows.len(), n_units, |r, c| rows[r][c]);

    let covariates = match covariates {
        Some(cov_path) => Some(parse_covariates_csv(cov_path, n_units)?),
        None => None,
    };

    let panel = PanelData {
        y,
        t0,
        t1: rows.len() - t0,
        covariates,
    };
    panel.validate()?;
    Ok(panel)
}

/// Read a covariate CSV: a header naming the covariates, then one row per
/// unit in panel column order (treated unit first).
pub fn parse_covariates_csv(path: &Path, n_units: usize) -> Result<DMatrix<f64>> {
    let display = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(&display, e))?.clone();
    let q = headers.len();
    if q == 0 {
        return Err(Error::ParseError {
            path: display,
            row: 1,
            column: "header".into(),
            message: "covariate file has no columns".into(),
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (rec_idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(&display, e))?;
        let row_no = rec_idx + 1;
        let mut row = Vec::with_capacity(q);
        for (c, name) in headers.iter().enumerate() {
            let raw = record.get(c).ok_or_else(|| Error::ParseError {
                path: display.clone(),
                row: row_no,
                column: name.to_string(),
                message: "missing field".into(),
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| Error::ParseError {
                path: display.clone(),
                row: row_no,
                column: name.to_string(),
                message: format!("not a number: '{raw}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteCell {
                    path: display,
                    row: row_no,
                    column: name.to_string(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.len() != n_units {
        return Err(Error::DimensionMismatch(format!(
            "covariate file {display} has {} rows, panel has {n_units} units",
            rows.len()
        )));
    }
    Ok(DMatrix::from_fn(n_units, q, |r, c| rows[r][c]))
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    let row = match e.position() {
        Some(pos) => pos.line() as usize,
        None => 0,
    };
    Error::ParseError {
        path: path.to_string(),
        row,
        column: "record".into(),
        message: e.to_string(),
    }
}

/// Parse a scenario from flat `key = value` text.
///
/// Keys: `kind`, `j`, `t0_rule` (`J+5`, `2J`, or an integer), `seed`,
/// `replications`, `estimators` (comma list), optional `sigma`. `#` starts a
/// comment. The `SYNCON_SEED` environment variable, when set, overrides the
/// seed.
pub fn parse_scenario_config(text: &str, path: &str) -> Result<ScenarioConfig> {
    let mut pairs = BTreeMap::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ParseError {
            path: path.into(),
            row: line_no + 1,
            column: "line".into(),
            message: "expected 'key = value'".into(),
        })?;
        pairs.insert(key.trim().to_lowercase(), value.trim().to_string());
    }

    let lookup = |key: &str| -> Result<&String> {
        pairs.get(key).ok_or_else(|| Error::ParseError {
            path: path.into(),
            row: 0,
            column: key.into(),
            message: format!("missing key '{key}'"),
        })
    };
    let bad = |key: &str, msg: String| Error::ParseError {
        path: path.into(),
        row: 0,
        column: key.into(),
        message: msg,
    };

    let kind = match lookup("kind")?.as_str() {
        "two_factor_groups" => ScenarioKind::TwoFactorGroups,
        "two_factor_covariates" => ScenarioKind::TwoFactorCovariates,
        "simple_example_f1" => ScenarioKind::SimpleExampleF1,
        other => {
            return Err(bad(
                "kind",
                format!("unknown scenario kind '{other}' (expected two_factor_groups, two_factor_covariates, or simple_example_f1)"),
            ))
        }
    };
    let j: usize = lookup("j")?
        .parse()
        .map_err(|e| bad("j", format!("{e}")))?;
    let t0_raw = lookup("t0_rule")?.replace(' ', "").to_uppercase();
    let t0_rule = match t0_raw.as_str() {
        "J+5" => T0Rule::JPlus5,
        "2J" | "2XJ" | "2*J" => T0Rule::TwoTimesJ,
        other => match other.parse::<usize>() {
            Ok(t0) => T0Rule::Explicit(t0),
            Err(_) => {
                return Err(bad(
                    "t0_rule",
                    format!("expected 'J+5', '2J', or an integer, got '{other}'"),
                ))
            }
        },
    };
    let mut seed: u64 = lookup("seed")?
        .parse()
        .map_err(|e| bad("seed", format!("{e}")))?;
    if let Ok(env_seed) = std::env::var(SEED_ENV_VAR) {
        seed = env_seed
            .trim()
            .parse()
            .map_err(|e| bad(SEED_ENV_VAR, format!("environment override: {e}")))?;
    }
    let replications: usize = lookup("replications")?
        .parse()
        .map_err(|e| bad("replications", format!("{e}")))?;
    let estimators: Vec<String> = lookup("estimators")?
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let sigma: f64 = match pairs.get("sigma") {
        Some(raw) => raw.parse().map_err(|e| bad("sigma", format!("{e}")))?,
        None => 1.0,
    };

    let config = ScenarioConfig {
        kind,
        j,
        t0_rule,
        seed,
        replications,
        estimators,
        sigma,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_config(&text, &path.display().to_string())
}

/// Render a scenario back to its canonical `key = value` form.
pub fn scenario_config_text(s: &ScenarioConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("kind = {}\n", s.kind));
    out.push_str(&format!("j = {}\n", s.j));
    out.push_str(&format!("t0_rule = {}\n", s.t0_rule));
    out.push_str(&format!("seed = {}\n", s.seed));
    out.push_str(&format!("replications = {}\n", s.replications));
    out.push_str(&format!("estimators = {}\n", s.estimators.join(",")));
    out.push_str(&format!("sigma = {}\n", fmt_f64(s.sigma)));
    out
}

/// Stable hex digest of a scenario's canonicalized text form.
pub fn config_digest(s: &ScenarioConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(scenario_config_text(s).as_bytes());
    hex::encode(hasher.finalize())
}

/// Provenance record written next to every output set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: String, config_digest: String, seed: u64, outputs: Vec<String>) -> Self {
        RunManifest {
            command,
            config_digest,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

/// The JSON document `fit` emits: weights, fit statistics, and estimated
/// treatment effects, with a fixed key set (`intercept` is null unless the
/// fit is demeaned).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDocument {
    pub weights: Vec<f64>,
    pub intercept: Option<f64>,
    pub pre_mse: f64,
    pub l1: f64,
    pub l2: f64,
    pub alpha_hat: Vec<f64>,
    pub regime: String,
    pub converged: bool,
    pub kkt_gap: f64,
}

impl FitDocument {
    pub fn new(solution: &WeightSolution, alpha_hat: &[f64]) -> Self {
        FitDocument {
            weights: solution.weights.iter().copied().collect(),
            intercept: solution.intercept,
            pre_mse: solution.pre_mse,
            l1: solution.l1_norm,
            l2: solution.l2_norm,
            alpha_hat: alpha_hat.to_vec(),
            regime: solution.regime.to_string(),
            converged: solution.report.converged,
            kkt_gap: solution.report.kkt_gap,
        }
    }
}
