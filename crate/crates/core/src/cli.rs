//! Command-line front end.
//!
//! Exit codes: 0 all requirements satisfied (or command succeeded), 1 input
//! error, 2 some requirement violated (or a demo assertion failed),
//! 3 inconclusive, 4 synthesis precondition violated.

pub mod demo;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::measures::FiniteMixtureMeasure;
use crate::requirements::{check_set, CheckPolicy, Overall, RequirementSet, SetReport};
use crate::scenarios::{self, AggregationMethod, PhiMap, ScenarioSet};
use crate::seed::derive_seed;
use crate::synthesis::{self, ShiftingParams, ShiftingSynthesisParams};
use crate::valuation::{self, CapitalDistribution, ValuationFunction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "quadrisk", version, about = "Quadrant requirements and scenario aggregation")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RunConfig {
    /// Root seed; every stage derives its own seed from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count per sampled component (at least 1000).
    #[arg(long, global = true, default_value_t = 1_000_000, value_parser = parse_budget)]
    pub budget: usize,
    /// Confidence multiplier for Monte Carlo verdicts.
    #[arg(long, global = true, default_value_t = 3.0, value_parser = parse_z)]
    pub z: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: 1_000_000,
            z: 3.0,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn policy(&self, label: &str) -> CheckPolicy {
        CheckPolicy {
            z: self.z,
            budget: self.budget,
            seed: derive_seed(self.seed, label),
        }
    }
}

fn parse_budget(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 1000 {
        return Err("budget must be at least 1000".into());
    }
    Ok(n)
}

fn parse_z(s: &str) -> Result<f64, String> {
    let z: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(z > 0.0 && z.is_finite()) {
        return Err("z must be positive".into());
    }
    Ok(z)
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a measure against a requirement set.
    Check { measure: PathBuf, requirements: PathBuf },
    /// Aggregate scenario sets into a measure.
    Aggregate {
        measure: PathBuf,
        /// One scenario file, or several for `successive`.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, value_enum)]
        method: AggregateMethod,
        /// JSON array of maps, one per scenario (`phi` only).
        #[arg(long)]
        maps: Option<PathBuf>,
        /// Per-step operator for `successive`.
        #[arg(long, value_enum, default_value_t = StepMethod::Pointmass)]
        step: StepMethod,
    },
    /// Build a scenario set from a requirement set and verify it.
    Synthesize {
        requirements: PathBuf,
        /// Base measure; required for `shifting`, defaults to N(0, I) for `pointmass`.
        measure: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: SynthesisMethod,
        /// Explicit ε for `shifting` (needs --radius too).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Explicit ball radius for `shifting` (needs --epsilon too).
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Recover the base measure from a point-mass aggregate.
    Recover { measure: PathBuf, scenarios: PathBuf },
    /// Push a measure through a valuation and report VaR or ES.
    Riskmeasure {
        measure: PathBuf,
        valuation: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "measure", value_enum, default_value_t = RiskKind::Var)]
        risk: RiskKind,
        /// Scenario set to aggregate before measuring.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RiskAggregation::Shifting)]
        method: RiskAggregation,
        #[arg(long)]
        maps: Option<PathBuf>,
    },
    /// Run a named demonstration.
    Demo {
        #[arg(value_enum)]
        name: demo::DemoName,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMethod {
    Pointmass,
    Shifting,
    Phi,
    Successive,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    Pointmass,
    Shifting,
}

impl From<StepMethod> for AggregationMethod {
    fn from(m: StepMethod) -> Self {
        match m {
            StepMethod::Pointmass => AggregationMethod::PointMass,
            StepMethod::Shifting => AggregationMethod::Shifting,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMethod {
    Pointmass,
    Shifting,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    Var,
    Es,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskAggregation {
    Pointmass,
    Shifting,
    Phi,
    Sst,
}

/// A command failure with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::TwoSidedConstrainedQuadrant { .. }
            | Error::TotalProbabilityOne(_)
            | Error::BallPlacementFailed { .. } => EXIT_PRECONDITION,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// What a command produced: a JSON report, optional human-readable text
/// and the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub json: Value,
    pub text: Option<String>,
    pub code: i32,
}

impl Outcome {
    fn json(json: Value, code: i32) -> Self {
        Self { json, text: None, code }
    }
}

pub fn exit_code(overall: Overall) -> i32 {
    match overall {
        Overall::AllSatisfied => EXIT_OK,
        Overall::SomeViolated => EXIT_VIOLATED,
        Overall::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Parses `args` (including the program name), runs the command, writes
/// its output and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match execute(&cli.command, &cli.config) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    match emit(&outcome, cli.config.output.as_deref()) {
        Ok(()) => outcome.code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn emit(outcome: &Outcome, output: Option<&Path>) -> Result<(), Failure> {
    let body = serde_json::to_string_pretty(&outcome.json).expect("reports serialize") + "\n";
    if let Some(text) = &outcome.text {
        print!("{text}");
    }
    match output {
        Some(path) => fs::write(path, body).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn set_report_json(report: &SetReport, config: &RunConfig) -> Value {
    let mut v = to_value(report);
    v["config"] = to_value(config);
    v
}

pub fn execute(command: &Command, config: &RunConfig) -> Result<Outcome, Failure> {
    match command {
        Command::Check { measure, requirements } => {
            let p: FiniteMixtureMeasure = read_json(measure)?;
            let rs: RequirementSet = read_json(requirements)?;
            let report = check_set(&p, &rs, &config.policy("check"))?;
            Ok(Outcome::json(set_report_json(&report, config), exit_code(report.overall)))
        }
        Command::Aggregate {
            measure,
            scenarios,
            method,
            maps,
            step,
        } => {
            let p: FiniteMixtureMeasure = read_json(measure)?;
            if *method != AggregateMethod::Successive && scenarios.len() != 1 {
                return Err(Failure::input("exactly one scenario file is needed unless --method successive"));
            }
            if maps.is_some() != (*method == AggregateMethod::Phi) {
                return Err(Failure::input("--maps is required for, and only allowed with, --method phi"));
            }
            let sets = scenarios.iter().map(|s| read_json::<ScenarioSet>(s)).collect::<Result<Vec<_>, _>>()?;
            let out = match method {
                AggregateMethod::Pointmass => scenarios::aggregate_point_mass(&p, &sets[0])?,
                AggregateMethod::Shifting => scenarios::aggregate_shifting(&p, &sets[0])?,
                AggregateMethod::Phi => {
                    let maps: Vec<PhiMap> = read_json(maps.as_deref().expect("checked above"))?;
                    scenarios::aggregate_phi(&p, &sets[0], &maps)?
                }
                AggregateMethod::Successive => scenarios::aggregate_successive(&p, &sets, (*step).into())?,
            };
            Ok(Outcome::json(to_value(&out), EXIT_OK))
        }
        Command::Synthesize {
            requirements,
            measure,
            method,
            epsilon,
            radius,
        } => synthesize(requirements, measure.as_deref(), *method, *epsilon, *radius, config),
        Command::Recover { measure, scenarios } => {
            let q: FiniteMixtureMeasure = read_json(measure)?;
            let m: ScenarioSet = read_json(scenarios)?;
            Ok(Outcome::json(to_value(&synthesis::recover_base_measure(&q, &m)?), EXIT_OK))
        }
        Command::Riskmeasure {
            measure,
            valuation,
            alpha,
            risk,
            scenarios,
            method,
            maps,
        } => {
            let p: FiniteMixtureMeasure = read_json(measure)?;
            let v: ValuationFunction = read_json(valuation)?;
            let m = scenarios.as_deref().map(read_json::<ScenarioSet>).transpose()?;
            let maps = maps.as_deref().map(read_json::<Vec<PhiMap>>).transpose()?;
            riskmeasure(&p, &v, *alpha, *risk, m.as_ref(), *method, maps.as_deref(), config)
        }
        Command::Demo { name } => {
            let (text, json, passed) = demo::run(*name, config)?;
            Ok(Outcome {
                json,
                text: Some(text),
                code: if passed { EXIT_OK } else { EXIT_VIOLATED },
            })
        }
    }
}

fn synthesize(
    requirements: &Path,
    measure: Option<&Path>,
    method: SynthesisMethod,
    epsilon: Option<f64>,
    radius: Option<f64>,
    config: &RunConfig,
) -> Result<Outcome, Failure> {
    let rs: RequirementSet = read_json(requirements)?;
    let base = measure.map(read_json::<FiniteMixtureMeasure>).transpose()?;
    let policy = config.policy("verify");
    match method {
        SynthesisMethod::Pointmass => {
            if epsilon.is_some() || radius.is_some() {
                return Err(Failure::input("--epsilon and --radius only apply to --method shifting"));
            }
            let m = synthesis::scenarios_from_requirements_pointmass(&rs);
            let (p, base_name) = match base {
                Some(p) => (p, "file"),
                None => (FiniteMixtureMeasure::standard_normal(rs.dim().unwrap_or(1)), "standard_normal"),
            };
            let report = check_set(&scenarios::aggregate_point_mass(&p, &m)?, &rs, &policy)?;
            let json = json!({
                "method": "pointmass",
                "scenarios": to_value(&m),
                "verification_base": base_name,
                "verification": set_report_json(&report, config),
            });
            Ok(Outcome::json(json, exit_code(report.overall)))
        }
        SynthesisMethod::Shifting => {
            let p = base.ok_or_else(|| Failure::input("--method shifting needs a measure file"))?;
            let params = match (epsilon, radius) {
                (None, None) => ShiftingParams::Auto,
                (Some(epsilon), Some(radius)) => ShiftingParams::Explicit(ShiftingSynthesisParams { epsilon, radius }),
                _ => return Err(Failure::input("--epsilon and --radius must be given together")),
            };
            let out = synthesis::scenarios_from_requirements_shifting(&p, &rs, params)?;
            let report = check_set(&scenarios::aggregate_shifting(&p, &out.scenarios)?, &rs, &policy)?;
            let json = json!({
                "method": "shifting",
                "parameters": if params == ShiftingParams::Auto { "auto" } else { "explicit" },
                "epsilon": out.epsilon,
                "radius": out.radius,
                "tail_bound": out.tail_bound,
                "center": to_value(&out.center),
                "scenarios": to_value(&out.scenarios),
                "verification": set_report_json(&report, config),
            });
            Ok(Outcome::json(json, exit_code(report.overall)))
        }
    }
}

fn risk_figure(d: &CapitalDistribution, alpha: f64, risk: RiskKind) -> Result<Value, Failure> {
    let value = match risk {
        RiskKind::Var => d.value_at_risk(alpha)?,
        RiskKind::Es => d.expected_shortfall(alpha)?,
    };
    Ok(json!({
        "value": value,
        "quantile": d.quantile(alpha)?,
        "capital_mean": d.mean(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn riskmeasure(
    p: &FiniteMixtureMeasure,
    v: &ValuationFunction,
    alpha: f64,
    risk: RiskKind,
    m: Option<&ScenarioSet>,
    method: RiskAggregation,
    maps: Option<&[PhiMap]>,
    config: &RunConfig,
) -> Result<Outcome, Failure> {
    if maps.is_some() != (m.is_some() && method == RiskAggregation::Phi) {
        return Err(Failure::input("--maps is required for, and only allowed with, --scenarios and --method phi"));
    }
    let before = valuation::pushforward_capital(v, p, config.budget, derive_seed(config.seed, "pushforward"))?;
    let mut json = json!({
        "alpha": alpha,
        "measure": risk,
        "convention": "capital requirement: negated lower quantile (var) or lower tail mean (es) of available capital",
        "config": to_value(config),
        "before": risk_figure(&before, alpha, risk)?,
    });
    if let Some(m) = m {
        let after = match method {
            RiskAggregation::Sst => valuation::sst_aggregate_capital(&before, &v.impacts(m)?)?,
            _ => {
                let agg = match method {
                    RiskAggregation::Pointmass => scenarios::aggregate_point_mass(p, m)?,
                    RiskAggregation::Shifting => scenarios::aggregate_shifting(p, m)?,
                    _ => scenarios::aggregate_phi(p, m, maps.expect("checked above"))?,
                };
                valuation::pushforward_capital(v, &agg, config.budget, derive_seed(config.seed, "pushforward-aggregated"))?
            }
        };
        json["aggregation"] = to_value(&method);
        json["after"] = risk_figure(&after, alpha, risk)?;
    }
    Ok(Outcome::json(json, EXIT_OK))
}
