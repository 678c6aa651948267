//! `ofl`: evaluate, verify and stress-test obnoxious facility location
//! mechanisms.
//!
//! Exit codes: 0 success, 1 witness or falsification found, 2 configuration
//! error, 3 numeric failure, 4 budget exceeded.

mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ofl_core::adversary::{self, ObjectiveFamily, SearchConfig};
use ofl_core::objective::eval_distribution;
use ofl_core::optima::{self, OptResult};
use ofl_core::table::{self, Status};
use ofl_core::truthfulness::{self, DeviationWitness};
use ofl_core::{witnesses, Convention, MechanismSpec, ObjectiveSpec, Profile};
use serde_json::json;

use output::{emit, num, table_csv, to_csv, to_json, Format};

const DEFAULT_BUDGET: u64 = 2_000_000_000;

#[derive(Parser)]
#[command(name = "ofl", version, about = "Strategyproof obnoxious facility location experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mechanism value, optimum and approximation ratio on one profile.
    Evaluate(EvaluateArgs),
    /// Optimal facility location for one profile.
    Optimize(OptimizeArgs),
    /// Grid search for a profitable single-agent misreport.
    VerifySp(VerifyArgs),
    /// Grid search for a profitable coalition misreport.
    VerifyGsp(VerifyGspArgs),
    /// Worst approximation ratio over a profile search.
    SearchRatio(SearchRatioArgs),
    /// One ratio search per exponent of an objective family.
    BoundCurve(BoundCurveArgs),
    /// Check every cell of the bound summary table.
    ReproduceTable(TableArgs),
    /// Run every lower-bound construction.
    Witnesses(OutputArgs),
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Comma-separated agent locations.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    profile: Option<Vec<f64>>,
    /// One-column CSV of agent locations.
    #[arg(long)]
    profile_file: Option<PathBuf>,
}

impl ProfileArgs {
    fn load(&self) -> Result<Profile> {
        input::load_profile(self.profile.as_deref(), self.profile_file.as_deref())
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    mechanism: MechanismSpec,
    #[arg(long)]
    objective: ObjectiveSpec,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Override the objective's default randomized convention.
    #[arg(long)]
    convention: Option<Convention>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptMethodArg {
    Auto,
    Convex,
    Piecewise,
    Grid,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    objective: ObjectiveSpec,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long, value_enum, default_value = "auto")]
    method: OptMethodArg,
    /// Grid spacing for `--method grid`.
    #[arg(long, default_value_t = 1e-4)]
    grid_step: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    mechanism: MechanismSpec,
    #[arg(long, short)]
    n: usize,
    /// Must be 1/k for an integer k <= 200.
    #[arg(long, default_value_t = 0.02)]
    grid_step: f64,
    /// Cap on mechanism evaluations.
    #[arg(long, env = "OFL_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyGspArgs {
    #[command(flatten)]
    base: VerifyArgs,
    #[arg(long, default_value_t = 2)]
    max_coalition: usize,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    #[arg(long, default_value_t = 1e-3)]
    grid_step: f64,
    /// Random starting profiles per agent count.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    /// Cap on ratio evaluations.
    #[arg(long, env = "OFL_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            n_min: self.n_min,
            n_max: self.n_max,
            grid_step: self.grid_step,
            restarts: self.restarts,
            seed: self.seed,
            budget: self.budget,
        }
    }
}

#[derive(Args)]
struct SearchRatioArgs {
    #[arg(long)]
    mechanism: MechanismSpec,
    #[arg(long)]
    objective: ObjectiveSpec,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct BoundCurveArgs {
    #[arg(long)]
    mechanism: MechanismSpec,
    /// `su` or `sc`.
    #[arg(long)]
    family: ObjectiveFamily,
    /// Comma-separated exponents; `inf` selects the max objective.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    #[arg(long, default_value_t = 1e-3)]
    grid_step: f64,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, env = "OFL_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Clean,
    Found,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Found) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<ofl_core::Error>() {
        Some(ofl_core::Error::BudgetExceeded { .. }) => 4,
        Some(err) if err.is_numeric() => 3,
        _ => 2,
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Evaluate(a) => evaluate(a),
        Command::Optimize(a) => optimize(a),
        Command::VerifySp(a) => verify(a, 1, "sp"),
        Command::VerifyGsp(a) => verify(a.base, a.max_coalition, "gsp"),
        Command::SearchRatio(a) => search_ratio(a),
        Command::BoundCurve(a) => bound_curve(a),
        Command::ReproduceTable(a) => reproduce_table(a),
        Command::Witnesses(a) => run_witnesses(a),
    }
}

fn p_value(spec: &ObjectiveSpec) -> serde_json::Value {
    match spec.exponent() {
        Some(p) => num(p),
        None => json!(spec.p_label()),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<Outcome> {
    let x = a.profile.load()?;
    let dist = a.mechanism.run(&x)?;
    let convention = a.convention.unwrap_or(a.objective.default_convention());
    let alg = eval_distribution(&a.objective, &x, &dist, convention)?.value;
    let opt = optima::optimum(&a.objective, &x);
    let ratio = adversary::ratio_value(a.objective.sense(), alg, opt.value);
    let body = match a.out.format {
        Format::Json => to_json(&json!({
            "mechanism": a.mechanism.to_string(),
            "objective": a.objective.to_string(),
            "p": p_value(&a.objective),
            "profile": x.locations(),
            "alg": num(alg),
            "opt": num(opt.value),
            "opt_location": num(opt.location),
            "ratio": num(ratio),
            "convention": convention.to_string(),
        }))?,
        Format::Csv => {
            let g = ofl_core::fmt::g12;
            let profile: Vec<String> = x.locations().iter().map(|&v| g(v)).collect();
            to_csv(
                &["mechanism", "objective", "p", "profile", "alg", "opt", "opt_location", "ratio", "convention"],
                [[
                    a.mechanism.to_string(),
                    a.objective.to_string(),
                    a.objective.p_label(),
                    profile.join(";"),
                    g(alg),
                    g(opt.value),
                    g(opt.location),
                    g(ratio),
                    convention.to_string(),
                ]],
            )?
        }
    };
    emit(a.out.output.as_deref(), &body)?;
    Ok(Outcome::Clean)
}

fn optimize(a: OptimizeArgs) -> Result<Outcome> {
    let x = a.profile.load()?;
    let r: OptResult = match a.method {
        OptMethodArg::Auto => optima::optimum(&a.objective, &x),
        OptMethodArg::Convex => optima::opt_convex_candidates(&a.objective, &x)?,
        OptMethodArg::Piecewise => optima::opt_piecewise(&a.objective, &x),
        OptMethodArg::Grid => optima::opt_grid(&a.objective, &x, a.grid_step)?,
    };
    let body = match a.out.format {
        Format::Json => to_json(&json!({
            "objective": a.objective.to_string(),
            "profile": x.locations(),
            "value": num(r.value),
            "location": num(r.location),
            "method": r.method,
        }))?,
        Format::Csv => {
            let g = ofl_core::fmt::g12;
            to_csv(
                &["objective", "value", "location", "method"],
                [[
                    a.objective.to_string(),
                    g(r.value),
                    g(r.location),
                    serde_json::to_value(r.method)?.as_str().unwrap_or_default().to_string(),
                ]],
            )?
        }
    };
    emit(a.out.output.as_deref(), &body)?;
    Ok(Outcome::Clean)
}

fn verify(a: VerifyArgs, max_coalition: usize, mode: &str) -> Result<Outcome> {
    let found: Option<DeviationWitness> = if mode == "sp" {
        truthfulness::check_sp(&a.mechanism, a.n, a.grid_step, a.budget)?
    } else {
        truthfulness::check_gsp(&a.mechanism, a.n, a.grid_step, max_coalition, a.budget)?
    };
    let body = match a.out.format {
        Format::Json => to_json(&json!({
            "mechanism": a.mechanism.to_string(),
            "mode": mode,
            "n": a.n,
            "grid_step": a.grid_step,
            "max_coalition": max_coalition,
            "result": if found.is_some() { "witness" } else { "no witness" },
            "witness": found,
        }))?,
        Format::Csv => {
            let g = |v: &[f64]| v.iter().map(|&f| ofl_core::fmt::g12(f)).collect::<Vec<_>>().join(";");
            let mut row = vec![a.mechanism.to_string(), mode.to_string(), a.n.to_string()];
            match &found {
                Some(w) => row.extend([
                    "witness".to_string(),
                    g(w.profile.locations()),
                    w.agents.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
                    g(&w.misreports),
                    g(&w.gains),
                ]),
                None => row.extend(["no witness".to_string(), String::new(), String::new(), String::new(), String::new()]),
            }
            to_csv(
                &["mechanism", "mode", "n", "result", "profile", "agents", "misreports", "gains"],
                [row],
            )?
        }
    };
    emit(a.out.output.as_deref(), &body)?;
    Ok(if found.is_some() { Outcome::Found } else { Outcome::Clean })
}

fn search_ratio(a: SearchRatioArgs) -> Result<Outcome> {
    let report = adversary::search_worst_ratio(&a.mechanism, &a.objective, &a.search.config())?;
    let body = match a.out.format {
        Format::Json => to_json(&report)?,
        Format::Csv => table_csv(&[output::report_row(&report)])?,
    };
    emit(a.out.output.as_deref(), &body)?;
    Ok(if report.falsified { Outcome::Found } else { Outcome::Clean })
}

fn parse_p(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => match other.parse() {
            Ok(p) => Ok(p),
            Err(_) => bail!(ofl_core::Error::InvalidObjective(format!("bad exponent `{other}`"))),
        },
    }
}

fn bound_curve(a: BoundCurveArgs) -> Result<Outcome> {
    let ps = a.p.iter().map(|s| parse_p(s)).collect::<Result<Vec<_>>>()?;
    let reports = adversary::bound_curve(&a.mechanism, a.family, &ps, &a.search.config())?;
    let body = match a.out.format {
        Format::Json => to_json(&reports)?,
        Format::Csv => table_csv(&reports.iter().map(output::report_row).collect::<Vec<_>>())?,
    };
    emit(a.out.output.as_deref(), &body)?;
    Ok(if reports.iter().any(|r| r.falsified) { Outcome::Found } else { Outcome::Clean })
}

fn reproduce_table(a: TableArgs) -> Result<Outcome> {
    let cfg = SearchConfig {
        n_min: a.n_min,
        n_max: a.n_max,
        grid_step: a.grid_step,
        restarts: a.restarts,
        seed: a.seed,
        budget: a.budget,
    };
    let rows = table::reproduce_table(&cfg)?;
    let body = match a.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => table_csv(&rows)?,
    };
    emit(a.output.as_deref(), &body)?;
    let falsified = rows.iter().any(|r| r.status == Status::Falsification);
    Ok(if falsified { Outcome::Found } else { Outcome::Clean })
}

fn run_witnesses(a: OutputArgs) -> Result<Outcome> {
    let checks = witnesses::run_suite()?;
    let body = match a.format {
        Format::Json => to_json(&checks)?,
        Format::Csv => {
            let g = ofl_core::fmt::g12;
            to_csv(
                &["name", "expected", "found", "tolerance", "passed"],
                checks.iter().map(|c| {
                    [c.name.clone(), g(c.expected), g(c.found), g(c.tolerance), c.passed.to_string()]
                }),
            )?
        }
    };
    emit(a.output.as_deref(), &body)?;
    Ok(if checks.iter().all(|c| c.passed) { Outcome::Clean } else { Outcome::Found })
}
