//! Command-line surface: simulate panels, fit estimators, run Monte Carlo
//! scenarios, and check summaries against reference tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use syncon::dgp::make_scenario_panel;
use syncon::estimators::{fit_with_tol, treatment_effects, EstimatorId};
use syncon::io::{
    config_digest, load_scenario_config, parse_panel_csv, write_panel_csv, FitDocument,
    RunManifest,
};
use syncon::montecarlo::{compare_to_reference, run_mc, ReferenceTable};
use syncon::solver::DEFAULT_TOL;

#[derive(Parser)]
#[command(
    name = "syncon",
    version,
    about = "Synthetic control estimation, panel simulation, and Monte Carlo reproduction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one scenario replication and write the panel, ground truth, and manifest.
    Simulate {
        /// Scenario config file (key = value text).
        #[arg(long)]
        scenario: PathBuf,
        /// Replication index to draw.
        #[arg(long, default_value_t = 0)]
        rep: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one estimator on a panel CSV and write the solution as JSON.
    Fit {
        /// Wide panel CSV (columns time,unit0,unit1,...).
        #[arg(long)]
        panel: PathBuf,
        /// Number of pre-treatment rows.
        #[arg(long)]
        t0: usize,
        /// Covariates CSV (one row per unit, panel column order).
        #[arg(long)]
        covariates: Option<PathBuf>,
        /// Estimator id: sc, sc_demeaned, ols, ols_addup,
        /// sc_nested_halflags, sc_nested_mean.
        #[arg(long)]
        estimator: String,
        /// Solver tolerance for the simplex-based estimators.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo scenario and write the summary (plus a comparison
    /// report when a reference table is given).
    Mc {
        #[arg(long)]
        scenario: PathBuf,
        /// Worker threads (0 = default pool width).
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        #[arg(long)]
        out: PathBuf,
        /// Reference table to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Compare a stored summary against a reference table.
    Report {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> syncon::Result<ExitCode> {
    match cli.command {
        Command::Simulate { scenario, rep, out } => {
            let config = load_scenario_config(&scenario)?;
            let (panel, truth) = make_scenario_panel(&config, rep)?;
            std::fs::create_dir_all(&out)?;

            let panel_path = out.join("panel.csv");
            write_panel_csv(&panel, &panel_path)?;
            let truth_path = out.join("truth.json");
            std::fs::write(&truth_path, serde_json::to_string_pretty(&truth)?)?;

            let manifest = RunManifest::new(
                format!("simulate --rep {rep}"),
                config_digest(&config),
                config.seed,
                vec!["panel.csv".into(), "truth.json".into()],
            );
            manifest.write(&out)?;
            println!("wrote {} and {}", panel_path.display(), truth_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit {
            panel,
            t0,
            covariates,
            estimator,
            tol,
            out,
        } => {
            let id: EstimatorId = estimator.parse()?;
            let data = parse_panel_csv(&panel, t0, covariates.as_deref())?;
            let solution = fit_with_tol(&data, id, tol)?;
            let alpha = treatment_effects(&data, &solution)?;
            let doc = FitDocument::new(&solution, alpha.as_slice());
            if let Some(parent) = out.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(&out, serde_json::to_string_pretty(&doc)?)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Mc {
            scenario,
            parallelism,
            out,
            reference,
        } => {
            let config = load_scenario_config(&scenario)?;
            let summary = run_mc(&config, parallelism)?;
            std::fs::create_dir_all(&out)?;

            let summary_path = out.join("mc_summary.json");
            std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
            let mut outputs = vec!["mc_summary.json".to_string()];

            let mut all_pass = true;
            if let Some(ref_path) = reference {
                let table = ReferenceTable::load(&ref_path)?;
                let report = compare_to_reference(&summary, &table)?;
                let report_path = out.join("comparison.txt");
                std::fs::write(&report_path, format!("{report}\n"))?;
                outputs.push("comparison.txt".into());
                println!("{report}");
                all_pass = report.all_pass();
            }

            let manifest = RunManifest::new(
                format!("mc --parallelism {parallelism}"),
                config_digest(&config),
                config.seed,
                outputs,
            );
            manifest.write(&out)?;
            println!("wrote {}", summary_path.display());
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Report { summary, reference } => {
            let text = std::fs::read_to_string(&summary)?;
            let summary: syncon::montecarlo::McSummary = serde_json::from_str(&text)?;
            let table = ReferenceTable::load(&reference)?;
            let report = compare_to_reference(&summary, &table)?;
            println!("{report}");
            Ok(if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
