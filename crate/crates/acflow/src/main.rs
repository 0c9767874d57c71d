use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acflow::config::RunConfig;
use acflow::driver;
use acflow::energy::check_dissipation;
use acflow::output;
use acflow::verify::{ScenarioKind, StudyAxis, StudyConfig};
use acflow::Error;

#[derive(Parser)]
#[command(name = "acflow", version, about = "Allen-Cahn active-fluid simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence study.
    Converge {
        /// time | space
        #[arg(long)]
        axis: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Constant-step scenario run.
    Run {
        /// spinodal | bubble_merge | bubble_shrink
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Adaptive scenario run with the minimum-dissipation controller.
    Adapt {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<(RunConfig, String), Error> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok((RunConfig::parse_str(&text)?, text))
        }
        None => Ok((RunConfig::default(), String::new())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::NonConvergence { .. } | Error::StepFailed { .. } | Error::LinearSolve(_) => 3,
                Error::Io(_) => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Converge { axis, config } => {
            let (cfg, dump) = load_config(&config)?;
            let axis = match axis.as_str() {
                "time" => StudyAxis::Time,
                "space" => StudyAxis::Space,
                other => {
                    return Err(Error::Config(format!(
                        "axis must be 'time' or 'space', got '{other}'"
                    )))
                }
            };
            let mut study = StudyConfig::desk_default(axis);
            if cfg.paper_resolution {
                match axis {
                    StudyAxis::Time => {
                        study.fixed_h = 1.0 / 64.0;
                    }
                    StudyAxis::Space => {
                        study.levels = vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
                        study.fixed_dt = 1e-5;
                        study.horizon = 1.0;
                    }
                }
            }
            if let Some(levels) = &cfg.levels {
                study.levels = levels.clone();
            }
            if let Some(t) = cfg.theta {
                study.theta = t;
            }
            if let Some(h) = cfg.horizon {
                study.horizon = h;
            }
            if let Some(h) = cfg.h {
                study.fixed_h = h;
            }
            if let Some(dt) = cfg.dt {
                study.fixed_dt = dt;
            }
            study.solver = cfg.solver_config();
            let name = match axis {
                StudyAxis::Time => "converge-time",
                StudyAxis::Space => "converge-space",
            };
            let dir = cfg.output_dir(name);
            let table = driver::convergence_run(&study, Some(&dir), &dump)?;
            print!("{}", output::convergence_table_text(&table));
            println!("outputs in {}", dir.display());
            Ok(())
        }
        Command::Run { scenario, config } => scenario_command(&scenario, &config, false),
        Command::Adapt { scenario, config } => scenario_command(&scenario, &config, true),
    }
}

fn scenario_command(
    scenario: &str,
    config: &Option<PathBuf>,
    adaptive: bool,
) -> Result<(), Error> {
    let (mut cfg, dump) = load_config(config)?;
    let kind = ScenarioKind::parse(scenario)?;
    cfg.scenario = Some(kind);
    let resolved = cfg.resolve_scenario()?;
    let name = format!(
        "{}-{}",
        if adaptive { "adapt" } else { "run" },
        resolved.scenario.name
    );
    let dir = cfg.output_dir(&name);
    let run = driver::scenario_run(&resolved, adaptive, Some(&dir), &dump)?;
    let recs = &run.result.records;
    println!(
        "{} {}: {} accepted steps to t = {:.6}",
        if adaptive { "adapt" } else { "run" },
        resolved.scenario.name,
        run.result.accepted_steps,
        run.result.state.curr.t
    );
    if resolved.params().rho >= 0.0 {
        let tol = 10.0 * resolved.solver.newton_tol_abs;
        let mut worst = f64::NEG_INFINITY;
        let mut ok = true;
        for pair in recs.windows(2) {
            let (pass, gap) = check_dissipation(pair[1].e, pair[0].e, tol);
            worst = worst.max(gap);
            ok &= pass;
        }
        println!(
            "energy dissipation: {} (max gap {:.3e}, tolerance {:.1e})",
            if ok { "monotone" } else { "VIOLATED" },
            worst,
            tol
        );
    } else {
        println!("energy dissipation: advisory only (rho < 0)");
    }
    println!("outputs in {}", dir.display());
    Ok(())
}
