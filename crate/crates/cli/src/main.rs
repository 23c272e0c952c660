//! `vscfdi` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid input,
//! 3 infeasible attack, 4 unobservable system.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use vscfdi::attacksynth::{forge_measurements, plan_csv, synthesize, AttackSpec, DEFAULT_DELTA};
use vscfdi::capability::{chart_csv, chart_params, operating_point_from_state, sample_chart};
use vscfdi::harness::{emit_figures, run_experiment, TrialSettings};
use vscfdi::measmodel::{
    build_config, generate_measurements, mix_seed, read_measurements, write_measurements,
    StateVector, DEFAULT_SIGMA,
};
use vscfdi::netcase::{bundled_ieee14_case, parse_case_with_state, NetworkCase, Side};
use vscfdi::wls::{
    detect_and_identify, estimate, estimation_report, DetectionStop, DEFAULT_THRESHOLD,
};
use vscfdi::Error;

#[derive(Parser)]
#[command(
    name = "vscfdi",
    version,
    about = "State estimation and targeted FDI attacks on a VSC-HVDC grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate noisy measurements from the case's ground-truth state.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        group: u8,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
    },
    /// Estimate the state and run bad-data identification.
    Se {
        #[command(flatten)]
        common: Common,
        /// Measurement CSV produced by `gen`.
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Synthesize and forge an attack on converter 1.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        measurements: PathBuf,
        #[command(flatten)]
        margins: Margins,
        /// Seed of the noise added to forged entries.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Forge tampered entries without measurement noise.
        #[arg(long)]
        exact: bool,
    },
    /// Capability chart of converter 1 with its operating point.
    Pqchart {
        #[command(flatten)]
        common: Common,
        /// Use the estimate from these measurements instead of the true state.
        #[arg(long)]
        measurements: Option<PathBuf>,
        #[command(flatten)]
        margins: Margins,
        #[arg(long, default_value_t = 360)]
        resolution: usize,
    },
    /// Monte-Carlo campaign over groups and margins.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Measurement groups, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        group: Vec<u8>,
        /// Margins applied to both limits, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.9,0.85")]
        r: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// First trial seed; trial k uses seed + k.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Args)]
struct Common {
    /// Case file (text or JSON); the bundled IEEE 14-bus case if omitted.
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Margins {
    #[arg(long, default_value_t = 1.0)]
    r1: f64,
    #[arg(long, default_value_t = 1.0)]
    r2: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
}

/// Failure that maps to a specific exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Infeasible(String);

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn load_case(path: Option<&Path>) -> anyhow::Result<(NetworkCase, Option<StateVector>)> {
    match path {
        None => {
            let (case, op) = bundled_ieee14_case();
            Ok((case, Some(op.state)))
        }
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            let (case, st) =
                parse_case_with_state(&text).with_context(|| format!("reading {}", p.display()))?;
            Ok((case, st.map(|s| s.state)))
        }
    }
}

fn truth(state: Option<StateVector>) -> anyhow::Result<StateVector> {
    state.ok_or_else(|| anyhow!(Error::Validation("case file has no [state] section".into())))
}

fn load_measurements(
    case: &NetworkCase,
    path: &Path,
) -> anyhow::Result<(vscfdi::MeasurementConfig, vscfdi::MeasurementVector)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    read_measurements(case, &text).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen {
            common,
            group,
            seed,
            sigma,
        } => {
            let (case, state) = load_case(common.case.as_deref())?;
            let x = truth(state)?;
            let config = build_config(&case, group)?.with_sigma(sigma)?;
            let z = generate_measurements(&case, &config, &x, seed, 1.0);
            let path = write(
                &common.out_dir,
                "measurements.csv",
                &write_measurements(&config, &z),
            )?;
            println!(
                "{} measurements written to {}",
                config.len(),
                path.display()
            );
        }
        Command::Se {
            common,
            measurements,
            threshold,
        } => {
            let (case, _) = load_case(common.case.as_deref())?;
            let (config, z) = load_measurements(&case, &measurements)?;
            let flat = StateVector::flat(case.n_bus());
            let det = detect_and_identify(&case, &config, &z, threshold, &flat)?;
            let path = write(
                &common.out_dir,
                "estimate.csv",
                &estimation_report(&config, &z, &det.result),
            )?;
            let stop = match det.stop {
                DetectionStop::Clean => "clean".to_string(),
                DetectionStop::ObservabilityLoss { candidate } => {
                    format!(
                        "stopped before removing {} (observability)",
                        config.spec(candidate).label()
                    )
                }
                DetectionStop::NotConverged => "estimator did not converge".to_string(),
            };
            println!(
                "max rN {:.3}, removed {:?}, {stop}; report in {}",
                det.result.max_normalized_residual(),
                det.removed,
                path.display()
            );
        }
        Command::Attack {
            common,
            measurements,
            margins,
            seed,
            exact,
        } => {
            let (case, _) = load_case(common.case.as_deref())?;
            let (config, z) = load_measurements(&case, &measurements)?;
            let est = estimate(&case, &config, &z, &StateVector::flat(case.n_bus()))?;
            let mut spec = AttackSpec::new(&case, margins.r1, margins.r2);
            spec.delta = margins.delta;
            let plan = synthesize(&case, &config, &z, &est.x_hat, &spec)?;
            if !plan.feasible {
                return Err(Infeasible(format!(
                    "no feasible attack after {} candidates{}",
                    plan.candidates_examined,
                    if plan.truncated {
                        " (search capped)"
                    } else {
                        ""
                    }
                ))
                .into());
            }
            let z_a =
                forge_measurements(&case, &config, &plan, &z, mix_seed(seed, 0xa77ac), !exact);
            write(
                &common.out_dir,
                "plan.csv",
                &plan_csv(&config, &plan, &z, &z_a, &spec, seed),
            )?;
            let path = write(
                &common.out_dir,
                "attacked.csv",
                &write_measurements(&config, &z_a),
            )?;
            println!(
                "tampered {} measurements {:?}; attacked vector in {}",
                plan.cost,
                plan.tampered,
                path.display()
            );
        }
        Command::Pqchart {
            common,
            measurements,
            margins,
            resolution,
        } => {
            let (case, state) = load_case(common.case.as_deref())?;
            let (x, label) = match measurements {
                Some(p) => {
                    let (config, z) = load_measurements(&case, &p)?;
                    let est = estimate(&case, &config, &z, &StateVector::flat(case.n_bus()))?;
                    (est.x_hat, "estimate")
                }
                None => (truth(state)?, "true_point"),
            };
            let u_s = x.vmag[case.converter(Side::One).ac_bus - 1];
            let chart = chart_params(&case, Side::One, u_s)?;
            let lines = sample_chart(&chart, margins.r1, margins.r2, resolution)?;
            let pt = operating_point_from_state(&case, &x, Side::One);
            let path = write(
                &common.out_dir,
                "pq_chart.csv",
                &chart_csv(&lines, &[(label, pt)]),
            )?;
            println!(
                "operating point ({:.4}, {:.4}) at U_s = {u_s:.4}; chart in {}",
                pt.p,
                pt.q,
                path.display()
            );
        }
        Command::Mc {
            common,
            group,
            r,
            delta,
            trials,
            seed,
            sigma,
            threshold,
        } => {
            let (case, state) = load_case(common.case.as_deref())?;
            let x = truth(state)?;
            if let Some(bad) = r.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return Err(
                    Error::Validation(format!("margin must lie in (0, 1], got {bad}")).into(),
                );
            }
            let base = TrialSettings {
                delta,
                sigma,
                threshold,
                ..TrialSettings::new(group[0], r[0])
            };
            let summary = run_experiment(&case, &x, &group, &r, trials, seed, &base)?;
            emit_figures(&case, &summary, &common.out_dir)?;
            for s in &summary.settings {
                println!(
                    "group {} r {}: success {}/{} valid ({} invalid), tampered {}",
                    s.settings.group,
                    s.settings.r1,
                    s.successes,
                    s.valid,
                    s.invalid,
                    s.tampered_mode
                        .map(|c| c.to_string())
                        .unwrap_or_else(|| "-".into())
                );
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Infeasible>().is_some() {
        return 3;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InfeasibleTarget(_)) => 3,
        Some(Error::Unobservable(_)) => 4,
        Some(Error::Io { .. }) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
