use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evasion_kinetics::experiments::{
    compare_compliance_vs_evasion, evasion_sweep, fit_quadratic_through_origin, spread_comparison,
    DEFAULT_SWEEP_ETAS,
};
use evasion_kinetics::integrator::evolve_observed;
use evasion_kinetics::io::{self, load_config, parse_percent_list, LoadedConfig, RunManifest};
use evasion_kinetics::metrics::metrics_report;
use evasion_kinetics::validation::run_invariant_suite;
use evasion_kinetics::{CoefficientTables, Error};
use serde_json::json;

/// Kinetic income-exchange model with taxation and heterogeneous tax evasion.
#[derive(Debug, Parser)]
#[command(name = "evasion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (JSON or TOML) or a manifest.json from an earlier run.
    /// Defaults to the nine-class, three-sector reference setup.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// No randomness is used anywhere; accepted for scripts that pass it.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate to the stationary state and write state.csv and metrics.json.
    Run {
        /// Also write trajectory.csv, one row every STRIDE steps.
        #[arg(long, value_name = "STRIDE", value_parser = clap::value_parser!(u64).range(1..))]
        dump_trajectory: Option<u64>,
    },
    /// Sweep the total evasion level and fit d = a eta^2 + b eta.
    Sweep {
        /// Comma-separated evasion levels in percent.
        #[arg(long, value_name = "LIST", value_parser = parse_percent_list)]
        eta: Option<EtaList>,
    },
    /// Per-class difference between the configured evasion profile and full compliance.
    Compare,
    /// Gini indices for widespread versus concentrated evasion at level 1/6.
    Spread,
    /// Run the invariant suite and report pass/fail per check.
    Validate,
}

type EtaList = Vec<f64>;

/// Failure categories and their exit codes.
enum Failure {
    Engine(Error),
    Config(Error),
    Io(PathBuf, std::io::Error),
    ChecksFailed(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Engine(_) => 1,
            Failure::Config(_) => 3,
            Failure::Io(..) => 4,
            Failure::ChecksFailed(_) => 5,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::InvalidConfig { .. } => Failure::Config(e),
            Error::Io { path, source } => Failure::Io(path, source),
            other => Failure::Engine(other),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Engine(e) | Failure::Config(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "i/o error on {}: {e}", path.display()),
            Failure::ChecksFailed(n) => write!(f, "{n} invariant check(s) failed"),
        }
    }
}

struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(dir: &Path, manifest: RunManifest) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Io(path.clone(), e))?;
        self.manifest.outputs.push(PathBuf::from(name));
        Ok(())
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.manifest.outputs.push(PathBuf::from("manifest.json"));
        let path = self.dir.join("manifest.json");
        fs::write(&path, self.manifest.to_json() + "\n").map_err(|e| Failure::Io(path, e))
    }
}

fn load(cli: &Cli) -> Result<(LoadedConfig, Option<RunManifest>), Failure> {
    match &cli.config {
        None => Ok((LoadedConfig::reference(), None)),
        Some(path) => {
            let loaded = load_config(path)?;
            let previous = RunManifest::read(path).ok();
            Ok((loaded, previous))
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let (loaded, previous) = load(cli)?;
    let opts = &loaded.integration;
    let model = &loaded.model;
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    let mut say = |line: String| {
        let _ = writeln!(stdout, "{line}");
    };

    match &cli.command {
        Command::Run { dump_trajectory } => {
            let stride = dump_trajectory.or(previous.as_ref().and_then(|p| p.dump_trajectory));
            let mut manifest = RunManifest::new("run", &loaded);
            manifest.dump_trajectory = stride;
            let mut outputs = Outputs::new(&cli.out, manifest)?;

            let tables = CoefficientTables::new(model)?;
            let x0 = loaded.initial.build(model)?;
            let mut trajectory = String::new();
            if stride.is_some() {
                trajectory = io::trajectory_header(model.n, model.m) + "\n";
            }
            let result = evolve_observed(&x0, &tables, opts, |step, t, x| {
                if let Some(s) = stride {
                    if step % s == 0 {
                        trajectory.push_str(&io::trajectory_row(t, x, &model.incomes));
                        trajectory.push('\n');
                    }
                }
            })?;
            let metrics = metrics_report(&result.state, model)?;

            outputs.write("state.csv", &io::state_csv(&result.state))?;
            let metrics_json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
            outputs.write("metrics.json", &(metrics_json + "\n"))?;
            if stride.is_some() {
                outputs.write("trajectory.csv", &trajectory)?;
            }
            outputs.manifest.summary = json!({
                "converged": result.converged,
                "final_time": result.final_time,
                "residual": result.residual,
                "mu": result.mu,
            });
            say(format!(
                "converged: {} at t = {} (residual {:.3e})",
                result.converged, result.final_time, result.residual
            ));
            say(format!(
                "gini = {}, income gap d = {}",
                io::format_sig4(metrics.gini_total),
                metrics
                    .income_gap
                    .map(io::format_sig4)
                    .unwrap_or_else(|| "undefined".into())
            ));
            outputs.finish()
        }
        Command::Sweep { eta } => {
            let etas = eta
                .clone()
                .or_else(|| previous.as_ref().and_then(|p| p.eta.clone()))
                .unwrap_or_else(|| DEFAULT_SWEEP_ETAS.to_vec());
            let mut manifest = RunManifest::new("sweep", &loaded);
            manifest.eta = Some(etas.clone());
            let mut outputs = Outputs::new(&cli.out, manifest)?;

            let rows = evasion_sweep(model, &etas, &loaded.initial, opts)?;
            let csv = io::sweep_csv(&rows);
            outputs.write("sweep.csv", &csv)?;
            say(csv.trim_end().to_string());

            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| r.income_gap.map(|d| (r.eta, d)))
                .collect();
            match fit_quadratic_through_origin(&points) {
                Ok((a, b)) => {
                    say(format!(
                        "fit: d(eta) = {} eta^2 + {} eta",
                        io::format_sig4(a),
                        io::format_sig4(b)
                    ));
                    outputs.manifest.summary = json!({ "fit": { "a": a, "b": b } });
                }
                Err(e) => say(format!("fit: {e}")),
            }
            if rows.iter().any(|r| !r.converged) {
                log::warn!("some sweep points did not reach stationarity");
            }
            outputs.finish()
        }
        Command::Compare => {
            let mut outputs = Outputs::new(&cli.out, RunManifest::new("compare", &loaded))?;
            let delta = compare_compliance_vs_evasion(model, &loaded.initial, opts)?;
            let csv = io::compare_csv(&delta);
            outputs.write("compare.csv", &csv)?;
            say(csv.trim_end().to_string());
            outputs.finish()
        }
        Command::Spread => {
            let mut outputs = Outputs::new(&cli.out, RunManifest::new("spread", &loaded))?;
            let report = spread_comparison(model, &loaded.initial, opts)?;
            for (label, case) in [
                ("widespread", &report.widespread),
                ("concentrated", &report.concentrated),
            ] {
                let sectors: Vec<String> = case
                    .gini_per_sector
                    .iter()
                    .map(|g| g.map(io::format_sig4).unwrap_or_else(|| "undefined".into()))
                    .collect();
                say(format!(
                    "{label}: theta_ev = {:?}, evasion level = {}, gini = {}, per sector = [{}]",
                    case.theta_ev,
                    io::format_sig4(case.evasion_level),
                    io::format_sig4(case.gini_total),
                    sectors.join(", ")
                ));
            }
            say(format!(
                "gini difference = {:.3e}",
                (report.widespread.gini_total - report.concentrated.gini_total).abs()
            ));
            outputs.manifest.summary = serde_json::to_value(&report).expect("report serializes");
            outputs.finish()
        }
        Command::Validate => {
            let checks = run_invariant_suite(&loaded)?;
            let mut failed = 0;
            for check in &checks {
                let status = if check.passed { "PASS" } else { "FAIL" };
                if !check.passed {
                    failed += 1;
                }
                say(format!("{status} {}: {}", check.name, check.detail));
            }
            if failed > 0 {
                return Err(Failure::ChecksFailed(failed));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
