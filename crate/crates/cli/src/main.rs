//! Command-line front end: thresholds, expectations, ladders, figure
//! CSV tables, simulation, and quartile standardization.
//!
//! Numbers are printed with 6 significant digits in human summaries and
//! 12 in CSV output. Exit codes: 0 success, 2 validation failure, 3 I/O
//! failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vise::environments::{standardize_by_quartile, DistributionSpec, Family, FamilySweep};
use vise::montecarlo::{estimate_expected_increment, run_dynamics};
use vise::numerics::{binomial_upper_tail, std_normal_quantile};
use vise::voting::{
    alpha0_curve, expectation_curve, expected_increment, ladder_curve, laplace_alpha0_derivative,
    optimal_absolute_threshold, optimal_threshold_closed_form, ThresholdMode, VotingRule,
};

#[derive(Parser)]
#[command(
    name = "vise",
    version,
    about = "Voting in a stochastic environment: thresholds, expected increments, simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal acceptance threshold and environment statistics
    Threshold(ThresholdArgs),
    /// Expected one-step utility increment under a given rule
    Expectation(ExpectationArgs),
    /// Optimal absolute threshold and its relative interval for finite n
    Ladder(LadderArgs),
    /// Figure-ready CSV tables (--fig 1..10)
    Curve(CurveArgs),
    /// Monte Carlo estimate side by side with the analytic value
    Simulate(SimulateArgs),
    /// Quartile-matched scale relative to a unit normal
    Standardize(StandardizeArgs),
}

/// Distribution selection, shared by most subcommands. Give it either
/// as flags (--family with parameters, unset ones defaulting to a=1,
/// b=1, mu=0, sigma=1, k=8, lambda=1), as a one-line --spec string, or
/// as a JSON --config file.
#[derive(Args)]
struct SpecArgs {
    /// uniform | normal | pareto | laplace
    #[arg(long)]
    family: Option<String>,
    /// Uniform: distance from the lower support edge to zero
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Uniform: upper support edge
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    /// Mean (normal, pareto, laplace)
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Standard deviation (normal, pareto)
    #[arg(long)]
    sigma: Option<f64>,
    /// Pareto shape, must exceed 2
    #[arg(long)]
    k: Option<f64>,
    /// Laplace rate
    #[arg(long)]
    lambda: Option<f64>,
    /// One-line form, e.g. "family=normal mu=0.5 sigma=1.0"
    #[arg(long)]
    spec: Option<String>,
    /// JSON file with the same fields
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Also report the optimal absolute threshold for this society size
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Args)]
struct ExpectationArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    n: u64,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
}

#[derive(Args)]
struct LadderArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    n: u64,
}

#[derive(Args)]
struct CurveArgs {
    /// Figure preset 1..10
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    fig: u8,
    /// Override the preset family (figures 1-6 only)
    #[arg(long)]
    family: Option<String>,
    /// Sweep scale for normal/pareto overrides
    #[arg(long)]
    sigma: Option<f64>,
    /// Pareto shape for overrides
    #[arg(long)]
    k: Option<f64>,
    /// Laplace rate for overrides
    #[arg(long)]
    lambda: Option<f64>,
    /// Uniform support width for overrides
    #[arg(long)]
    width: Option<f64>,
    /// Society size override
    #[arg(long)]
    n: Option<u64>,
    /// Relative threshold override (figures 1 and 8)
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Grid override as lo:hi:step
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long)]
    n: u64,
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    /// Replications for the estimate (at least 2)
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the utility dynamics for this many votes
    #[arg(long)]
    steps: Option<u64>,
    /// CSV path for the dynamics trajectory
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct StandardizeArgs {
    /// uniform | normal | pareto | laplace
    #[arg(long)]
    family: String,
    /// Pareto shape
    #[arg(long, default_value_t = 8.0)]
    k: f64,
}

enum AppError {
    Validation(String),
    Io(String),
}

impl<E: std::error::Error> From<E> for AppError {
    fn from(err: E) -> Self {
        AppError::Validation(err.to_string())
    }
}

// 6 significant digits for humans
fn human(x: f64) -> String {
    format!("{x:.5e}")
}

// 12 significant digits for CSV
fn csv(x: f64) -> String {
    format!("{x:.11e}")
}

fn resolve_spec(args: &SpecArgs) -> Result<DistributionSpec, AppError> {
    let given = usize::from(args.spec.is_some())
        + usize::from(args.config.is_some())
        + usize::from(args.family.is_some());
    if given > 1 {
        return Err(AppError::Validation(
            "give the distribution once: --family flags, --spec, or --config".into(),
        ));
    }
    if let Some(text) = &args.spec {
        return Ok(text.parse::<DistributionSpec>()?);
    }
    if let Some(path) = &args.config {
        let body = fs::read_to_string(path)
            .map_err(|e| AppError::Io(format!("cannot read {}: {e}", path.display())))?;
        let spec: DistributionSpec = serde_json::from_str(&body)
            .map_err(|e| AppError::Validation(format!("config {}: {e}", path.display())))?;
        spec.validate()?;
        return Ok(spec);
    }
    let family = args.family.as_deref().ok_or_else(|| {
        AppError::Validation("no distribution given; use --family, --spec, or --config".into())
    })?;
    let spec = match family {
        "uniform" => DistributionSpec::Uniform {
            a: args.a.unwrap_or(1.0),
            b: args.b.unwrap_or(1.0),
        },
        "normal" => DistributionSpec::Normal {
            mu: args.mu.unwrap_or(0.0),
            sigma: args.sigma.unwrap_or(1.0),
        },
        "pareto" => DistributionSpec::SymmetrizedPareto {
            k: args.k.unwrap_or(8.0),
            mu: args.mu.unwrap_or(0.0),
            sigma: args.sigma.unwrap_or(1.0),
        },
        "laplace" => DistributionSpec::Laplace {
            mu: args.mu.unwrap_or(0.0),
            lambda: args.lambda.unwrap_or(1.0),
        },
        other => {
            return Err(AppError::Validation(format!(
                "unknown family {other}; expected uniform, normal, pareto, or laplace"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_family(name: &str, k: f64) -> Result<Family, AppError> {
    match name {
        "uniform" => Ok(Family::Uniform),
        "normal" => Ok(Family::Normal),
        "pareto" => Ok(Family::SymmetrizedPareto { k }),
        "laplace" => Ok(Family::Laplace),
        other => Err(AppError::Validation(format!(
            "unknown family {other}; expected uniform, normal, pareto, or laplace"
        ))),
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, AppError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(AppError::Validation(format!(
            "grid must be lo:hi:step, got {text}"
        )));
    };
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| AppError::Validation(format!("grid component {s} is not a number")))
    };
    let (lo, hi, step) = (parse(lo)?, parse(hi)?, parse(step)?);
    build_grid(lo, hi, step)
}

fn build_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, AppError> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(AppError::Validation(format!(
            "grid needs finite lo <= hi and step > 0, got {lo}:{hi}:{step}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(AppError::Validation(format!(
            "grid has {count} points; keep it at or below 1000000"
        )));
    }
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), AppError> {
    match path {
        Some(path) => fs::write(path, content)
            .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_threshold(args: &ThresholdArgs) -> Result<(), AppError> {
    let spec = resolve_spec(&args.spec)?;
    let stats = spec.stats()?;
    let alpha0 = optimal_threshold_closed_form(&spec)?;
    let ratio = stats
        .win_loss_ratio()
        .ok_or_else(|| AppError::Validation("conditional loss is zero".into()))?;
    println!("alpha0 = {}", human(alpha0));
    println!("R = {}", human(ratio));
    println!("e_plus = {}", human(stats.e_plus));
    println!("e_minus = {}", human(stats.e_minus));
    println!("p = {}", human(stats.p));
    println!("q = {}", human(stats.q));
    if let Some(n) = args.n {
        let ladder = optimal_absolute_threshold(&stats, n)?;
        println!("n0_star = {}", ladder.n0_star);
        println!(
            "interval = [{}, {})",
            human(ladder.interval_lo),
            human(ladder.interval_hi)
        );
        println!("center = {}", human(ladder.center));
    }
    Ok(())
}

fn cmd_expectation(args: &ExpectationArgs) -> Result<(), AppError> {
    let spec = resolve_spec(&args.spec)?;
    let stats = spec.stats()?;
    let rule = VotingRule::new(args.n, args.alpha)?;
    let value = expected_increment(&stats, args.n, rule.n0)?;
    println!("e_eta = {}", human(value));
    println!("p = {}", human(stats.p));
    println!("n0 = {}", rule.n0);
    Ok(())
}

fn cmd_ladder(args: &LadderArgs) -> Result<(), AppError> {
    let spec = resolve_spec(&args.spec)?;
    let stats = spec.stats()?;
    let alpha0 = optimal_threshold_closed_form(&spec)?;
    let ladder = optimal_absolute_threshold(&stats, args.n)?;
    println!("alpha0 = {}", human(alpha0));
    println!("n0_star = {}", ladder.n0_star);
    println!(
        "interval = [{}, {})",
        human(ladder.interval_lo),
        human(ladder.interval_hi)
    );
    println!("center = {}", human(ladder.center));
    Ok(())
}

// Quartile-standardized sweeps in figure column order, all matching a
// unit normal's first quartile.
fn standardized_sweeps() -> Result<[(FamilySweep, &'static str); 4], AppError> {
    let offset = std_normal_quantile(0.25)?;
    let sigma_u = standardize_by_quartile(Family::Uniform, offset)?.stats()?.sigma;
    let sigma_p = standardize_by_quartile(Family::SymmetrizedPareto { k: 8.0 }, offset)?
        .stats()?
        .sigma;
    let sigma_l = standardize_by_quartile(Family::Laplace, offset)?.stats()?.sigma;
    Ok([
        (
            FamilySweep::Uniform {
                width: 2.0 * 3f64.sqrt() * sigma_u,
            },
            "uniform",
        ),
        (FamilySweep::Normal { sigma: 1.0 }, "normal"),
        (
            FamilySweep::SymmetrizedPareto {
                k: 8.0,
                sigma: sigma_p,
            },
            "pareto8",
        ),
        (
            FamilySweep::Laplace {
                lambda: std::f64::consts::SQRT_2 / sigma_l,
            },
            "laplace",
        ),
    ])
}

fn sweep_override(args: &CurveArgs) -> Result<Option<FamilySweep>, AppError> {
    let Some(name) = args.family.as_deref() else {
        if args.sigma.is_some() || args.k.is_some() || args.lambda.is_some() || args.width.is_some()
        {
            return Err(AppError::Validation(
                "sweep parameters need --family as well".into(),
            ));
        }
        return Ok(None);
    };
    let sweep = match name {
        "uniform" => FamilySweep::Uniform {
            width: args.width.unwrap_or(2.0),
        },
        "normal" => FamilySweep::Normal {
            sigma: args.sigma.unwrap_or(1.0),
        },
        "pareto" => FamilySweep::SymmetrizedPareto {
            k: args.k.unwrap_or(8.0),
            sigma: args.sigma.unwrap_or(1.0),
        },
        "laplace" => FamilySweep::Laplace {
            lambda: args.lambda.unwrap_or(1.0),
        },
        other => {
            return Err(AppError::Validation(format!(
                "unknown family {other}; expected uniform, normal, pareto, or laplace"
            )))
        }
    };
    sweep.validate()?;
    Ok(Some(sweep))
}

fn reject_flag(given: bool, flag: &str, fig: u8) -> Result<(), AppError> {
    if given {
        return Err(AppError::Validation(format!(
            "{flag} does not apply to fig {fig}"
        )));
    }
    Ok(())
}

fn optional_csv(value: Option<f64>) -> String {
    value.map(csv).unwrap_or_default()
}

fn cmd_curve(args: &CurveArgs) -> Result<(), AppError> {
    let fig = args.fig;
    let custom_sweep = sweep_override(args)?;
    if fig >= 7 {
        reject_flag(custom_sweep.is_some(), "--family", fig)?;
    }
    let grid = |lo: f64, hi: f64| -> Result<Vec<f64>, AppError> {
        match &args.grid {
            Some(text) => parse_grid(text),
            None => build_grid(lo, hi, 0.01),
        }
    };
    let mut table = String::new();
    match fig {
        // expected increment of an agent across environment favorability,
        // fixed simple-majority rule
        1 => {
            let sweep = custom_sweep.unwrap_or(FamilySweep::Normal { sigma: 1.0 });
            let n = args.n.unwrap_or(21);
            let alpha = args.alpha.unwrap_or(0.5);
            let mu_grid = grid(-1.3, 1.3)?;
            let rows = expectation_curve(sweep, n, ThresholdMode::Fixed(alpha), &mu_grid)?;
            table.push_str("mu,rho,e_eta\n");
            for (mu, value) in rows {
                let rho = mu / sweep.sigma();
                writeln!(table, "{},{},{}", csv(mu), csv(rho), optional_csv(value)).unwrap();
            }
        }
        // optimal threshold and its finite-n ladder
        2..=6 => {
            reject_flag(args.alpha.is_some(), "--alpha", fig)?;
            let (preset, preset_n, lo, hi) = match fig {
                2 => (FamilySweep::Uniform { width: 2.0 }, 5, -2.0, 2.0),
                3 => (FamilySweep::Normal { sigma: 1.0 }, 21, -2.5, 2.5),
                4 => (
                    FamilySweep::SymmetrizedPareto { k: 8.0, sigma: 1.0 },
                    131,
                    -2.5,
                    2.5,
                ),
                5 => (
                    FamilySweep::SymmetrizedPareto { k: 8.0, sigma: 1.0 },
                    130,
                    -2.5,
                    2.5,
                ),
                _ => (FamilySweep::Laplace { lambda: 1.0 }, 11, -2.5, 2.5),
            };
            let sweep = custom_sweep.unwrap_or(preset);
            let n = args.n.unwrap_or(preset_n);
            let rho_grid = grid(lo, hi)?;
            let closed = alpha0_curve(sweep, &rho_grid)?;
            let ladder = ladder_curve(sweep, n, &rho_grid)?;
            table.push_str("rho,alpha0_closed,ladder_center\n");
            for ((rho, alpha0), (_, center)) in closed.into_iter().zip(ladder) {
                writeln!(table, "{},{},{}", csv(rho), csv(alpha0), optional_csv(center)).unwrap();
            }
        }
        // rate of change of the optimal threshold, Laplace environments
        7 => {
            reject_flag(args.n.is_some(), "--n", fig)?;
            reject_flag(args.alpha.is_some(), "--alpha", fig)?;
            table.push_str("rho,dalpha0_drho\n");
            for rho in grid(-3.0, 3.0)? {
                writeln!(table, "{},{}", csv(rho), csv(laplace_alpha0_derivative(rho))).unwrap();
            }
        }
        // expected increment across the mean, quartile-standardized
        // families, fixed or optimal threshold
        8 | 9 => {
            if fig == 9 {
                reject_flag(args.alpha.is_some(), "--alpha", fig)?;
            }
            let n = args.n.unwrap_or(21);
            let mode = if fig == 8 {
                ThresholdMode::Fixed(args.alpha.unwrap_or(11.0 / 21.0))
            } else {
                ThresholdMode::Optimal
            };
            let mu_grid = grid(-1.3, 1.3)?;
            table.push_str("mu,rho,e_eta,family\n");
            for (sweep, name) in standardized_sweeps()? {
                for (mu, value) in expectation_curve(sweep, n, mode, &mu_grid)? {
                    let rho = mu / sweep.sigma();
                    writeln!(
                        table,
                        "{},{},{},{name}",
                        csv(mu),
                        csv(rho),
                        optional_csv(value)
                    )
                    .unwrap();
                }
            }
        }
        // optimal threshold across the mean for the standardized families
        _ => {
            reject_flag(args.n.is_some(), "--n", fig)?;
            reject_flag(args.alpha.is_some(), "--alpha", fig)?;
            let sweeps = standardized_sweeps()?;
            table.push_str("mu,alpha0_uniform,alpha0_normal,alpha0_pareto8,alpha0_laplace\n");
            for mu in grid(-1.3, 1.3)? {
                write!(table, "{}", csv(mu)).unwrap();
                for (sweep, _) in &sweeps {
                    let alpha0 = match sweep.spec_at_mu(mu) {
                        Some(spec) => Some(optimal_threshold_closed_form(&spec)?),
                        None => None,
                    };
                    write!(table, ",{}", optional_csv(alpha0)).unwrap();
                }
                table.push('\n');
            }
        }
    }
    write_output(args.out.as_deref(), &table)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), AppError> {
    if args.steps.is_some() != args.trajectory.is_some() {
        return Err(AppError::Validation(
            "--steps and --trajectory go together".into(),
        ));
    }
    let spec = resolve_spec(&args.spec)?;
    let stats = spec.stats()?;
    let rule = VotingRule::new(args.n, args.alpha)?;
    let analytic = expected_increment(&stats, args.n, rule.n0)?;
    let tail = binomial_upper_tail(args.n, stats.p, rule.n0)?;
    let report = estimate_expected_increment(&spec, args.n, args.alpha, args.reps, args.seed)?;
    let difference = report.mean_increment - analytic;
    let z = if difference == 0.0 {
        0.0
    } else {
        difference / report.std_error
    };
    println!("analytic = {}", human(analytic));
    println!("estimate = {}", human(report.mean_increment));
    println!("std_error = {}", human(report.std_error));
    println!("z = {}", human(z));
    println!("acceptance_analytic = {}", human(tail));
    println!("acceptance_empirical = {}", human(report.acceptance_rate));
    let json = format!("{}\n", report.to_json());
    match &args.out {
        Some(path) => write_output(Some(path), &json)?,
        None => print!("{json}"),
    }
    if let (Some(steps), Some(path)) = (args.steps, &args.trajectory) {
        let trajectory = run_dynamics(&spec, args.n, args.alpha, steps, args.seed)?;
        write_output(Some(path), &trajectory.to_csv())?;
    }
    Ok(())
}

fn cmd_standardize(args: &StandardizeArgs) -> Result<(), AppError> {
    let family = parse_family(&args.family, args.k)?;
    let offset = std_normal_quantile(0.25)?;
    let spec = standardize_by_quartile(family, offset)?;
    let sigma = spec.stats()?.sigma;
    println!("family = {}", args.family);
    println!("sigma = {}", human(sigma));
    Ok(())
}

fn run(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Threshold(args) => cmd_threshold(args),
        Command::Expectation(args) => cmd_expectation(args),
        Command::Ladder(args) => cmd_ladder(args),
        Command::Curve(args) => cmd_curve(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Standardize(args) => cmd_standardize(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Validation(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(AppError::Io(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}
