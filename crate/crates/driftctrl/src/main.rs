//! Command-line interface for the simulation and learning experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftctrl::checks::{run_suite, CheckSuite};
use driftctrl::experiment::{run_regret_experiment, run_stabilization_sweep, PolicyKind, RunConfig};
use driftctrl::plot::{emit_plot, PlotKind};
use driftctrl::riccati::stability_margin;
use driftctrl::scenario::{builtin_names, load_scenario, KappaRule};
use driftctrl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "driftctrl",
    version,
    about = "Simulate linear diffusion processes and learn to control them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the built-in scenarios or export one as a config file.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Solve the regulator problem for a scenario's true parameters.
    Care {
        #[arg(long)]
        scenario: String,
    },
    /// Sweep the stabilization round length and report success rates.
    Stabilize {
        #[arg(long)]
        scenario: String,
        /// Round lengths as start:end:step, e.g. 4:20:4.
        #[arg(long, value_name = "A:B:STEP")]
        tau_grid: String,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Override the scenario's excitation scale.
        #[arg(long)]
        sigma: Option<f64>,
        /// Override the segment rule, e.g. pow1.5 or fixed64.
        #[arg(long)]
        kappa_rule: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE.csv")]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Run adaptive policies against the optimal one and report regret.
    Control {
        #[arg(long)]
        scenario: String,
        /// Comma-separated list drawn from ts, rand-est, optimal.
        #[arg(long, default_value = "ts,rand-est,optimal")]
        policy: String,
        #[arg(long, default_value_t = 600.0)]
        horizon: f64,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the first episode length.
        #[arg(long)]
        tau0: Option<f64>,
        /// Override the episode growth rate.
        #[arg(long)]
        growth: Option<f64>,
        /// Override the excitation scale of the first round.
        #[arg(long)]
        sigma: Option<f64>,
        /// Checkpoint times, comma-separated; defaults to a coarse grid.
        #[arg(long)]
        checkpoints: Option<String>,
        #[arg(long, value_name = "FILE.csv")]
        out: PathBuf,
        #[command(flatten)]
        workers: Workers,
    },
    /// Render an experiment CSV as an SVG plot.
    Plot {
        #[arg(long)]
        kind: String,
        #[arg(long = "in", value_name = "FILE.csv")]
        input: PathBuf,
        #[arg(long, value_name = "FILE.svg")]
        out: PathBuf,
    },
    /// Run a self-diagnostic suite and print pass/fail per check.
    Check {
        /// One of riccati, posterior, perturbation, sde; omit for all.
        #[arg(long)]
        suite: Option<String>,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Print the built-in scenario names and dimensions.
    List,
    /// Write a scenario's config file to stdout.
    Export {
        #[arg(long)]
        scenario: String,
    },
}

#[derive(Args)]
struct Workers {
    /// Worker threads; 0 uses one per core. The output is byte-identical
    /// for every value.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for name in builtin_names() {
                    let s = load_scenario(name)?;
                    println!(
                        "{name}: {} states, {} inputs, delta {}, tau0 {}",
                        s.truth().state_dim(),
                        s.truth().input_dim(),
                        s.delta(),
                        s.tau0()
                    );
                }
                Ok(ExitCode::SUCCESS)
            }
            ScenarioAction::Export { scenario } => {
                let s = load_scenario(&scenario)?;
                print!("{}", s.to_config_string()?);
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Care { scenario } => {
            let s = load_scenario(&scenario)?;
            let sol = s.solve_truth()?;
            println!("scenario: {}", s.name());
            print_matrix("value K", sol.value());
            print_matrix("gain G", sol.gain());
            let eigs = sol.closed_loop().complex_eigenvalues();
            println!("closed-loop eigenvalues:");
            for e in eigs.iter() {
                println!("  {:+.6} {:+.6}i", e.re, e.im);
            }
            println!("stability margin: {:.6}", sol.margin());
            println!(
                "initial gain margin: {:.6}",
                stability_margin(&(s.truth().a() + s.truth().b() * s.g_init()))
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Stabilize {
            scenario,
            tau_grid,
            reps,
            sigma,
            kappa_rule,
            seed,
            out,
            workers,
        } => {
            let kappa = kappa_rule.as_deref().map(KappaRule::parse).transpose()?;
            let s = load_scenario(&scenario)?.with_overrides(sigma, kappa, None, None)?;
            let mut config = RunConfig::new(s);
            config.tau_grid = parse_grid(&tau_grid)?;
            config.reps = reps;
            config.base_seed = seed;
            config.parallelism = workers.parallelism;
            config.out_path = Some(out.clone());
            run_stabilization_sweep(&config)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Control {
            scenario,
            policy,
            horizon,
            reps,
            seed,
            tau0,
            growth,
            sigma,
            checkpoints,
            out,
            workers,
        } => {
            let s = load_scenario(&scenario)?.with_overrides(sigma, None, tau0, growth)?;
            let mut config = RunConfig::new(s);
            config.policies = parse_policies(&policy)?;
            config.horizon = horizon;
            config.reps = reps;
            config.base_seed = seed;
            config.parallelism = workers.parallelism;
            config.out_path = Some(out.clone());
            if let Some(text) = checkpoints {
                config.checkpoints = parse_list(&text)?;
            }
            run_regret_experiment(&config)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Plot { kind, input, out } => {
            emit_plot(&input, PlotKind::parse(&kind)?, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { suite } => {
            let suites: Vec<CheckSuite> = match suite {
                Some(text) => vec![CheckSuite::parse(&text)?],
                None => CheckSuite::all().to_vec(),
            };
            let mut all_passed = true;
            for suite in suites {
                println!("suite {}", suite.label());
                for outcome in run_suite(suite) {
                    let status = if outcome.passed { "PASS" } else { "FAIL" };
                    println!("  {status} {}: {}", outcome.name, outcome.detail);
                    all_passed &= outcome.passed;
                }
            }
            Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn print_matrix(name: &str, m: &nalgebra::DMatrix<f64>) {
    println!("{name} ({}x{}):", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:+.6}", m[(i, j)])).collect();
        println!("  [{}]", row.join(", "));
    }
}

/// Parse `a:b:step` into an inclusive grid.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("expected a:b:step, got '{text}'")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{p}'"))))
        .collect::<Result<_>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0 && step.is_finite() && start.is_finite() && end >= start) {
        return Err(Error::Parse(format!("degenerate grid '{text}'")));
    }
    let mut grid = Vec::new();
    let count = ((end - start) / step).round() as usize;
    for i in 0..=count {
        let v = start + i as f64 * step;
        if v <= end + 1e-9 * step {
            grid.push(v);
        }
    }
    Ok(grid)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{p}'"))))
        .collect()
}

fn parse_policies(text: &str) -> Result<Vec<PolicyKind>> {
    text.split(',').map(|p| PolicyKind::parse(p.trim())).collect()
}
