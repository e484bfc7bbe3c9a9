//! The `nlgame` command line: argument parsing, command execution and
//! report rendering.

use std::path::Path;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlgame_core::audit::{
    audit_repeated_with, constants, ns_optimal_product, repetition_bound, round_to_sns, sns_optimal_product,
};
use nlgame_core::game::{builtin, tensor_power, Game};
use nlgame_core::gamefile::{format_rational, game_digest, GameFile};
use nlgame_core::strategy::{is_nonsignalling, is_sub_nonsignalling};
use nlgame_core::tensor::{Channel, ChannelKind, JointTable, Normalization};
use nlgame_core::values::{
    classical_value_with, eta_lower_search_with, eta_upper_bound_from, ns_value_with, sns_value_with,
    threshold_value, EtaOptions, Limits, SolveOptions, StrategyClass, ValueResult, Witness,
};
use nlgame_core::Error;
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const BUDGET_ENV: &str = "NLGAME_BUDGET_CELLS";

pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const SOLVER: i32 = 4;
    pub const AUDIT: i32 = 5;
}

#[derive(Parser, Debug)]
#[command(name = "nlgame", version, about = "Values of multiprover nonlocal games and the repetition audit")]
pub struct Cli {
    /// Worker threads for independent solves (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Solve value LPs in exact rational arithmetic.
    #[arg(long, global = true)]
    pub exact: bool,
    /// Membership tolerance for strategy files.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Output::Json)]
    pub output: Output,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassArg {
    Classical,
    Ns,
    Sns,
}

impl From<ClassArg> for StrategyClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Classical => StrategyClass::Classical,
            ClassArg::Ns => StrategyClass::Ns,
            ClassArg::Sns => StrategyClass::Sns,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxedClass {
    Ns,
    Sns,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Value of a game under one strategy class.
    Value(ValueArgs),
    /// Threshold value of the n-fold repetition.
    Repeat(RepeatArgs),
    /// The exponential repetition bound with its constants.
    Bound(BoundArgs),
    /// Audit the repetition argument on a strategy for the n-fold game.
    Audit(AuditArgs),
    /// Round a target joint to the closest sub-nonsignalling strategy.
    Round(RoundArgs),
    /// Lower and upper bounds on the approximate nonsignalling value.
    Eta(EtaArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ValueArgs {
    /// `builtin:NAME` or a game file.
    pub game: String,
    #[arg(long, value_enum)]
    pub class: ClassArg,
}

#[derive(Args, Debug, Serialize)]
pub struct RepeatArgs {
    pub game: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum)]
    pub class: RelaxedClass,
}

#[derive(Args, Debug, Serialize)]
pub struct BoundArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub nu: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct AuditArgs {
    pub game: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub delta: f64,
    /// `ns-opt`, `sns-opt`, or a strategy file over the n-fold game.
    #[arg(long)]
    pub strategy: String,
}

#[derive(Args, Debug, Serialize)]
pub struct RoundArgs {
    pub game: String,
    /// `ns-opt`, `sns-opt`, or a joint file over the game's axes.
    #[arg(long, default_value = "ns-opt")]
    pub target: String,
    /// Mass added to one cell of the target before renormalizing.
    #[arg(long, default_value_t = 0.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0)]
    pub cell: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct EtaArgs {
    pub game: String,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
}

/// Failure of a command, with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Report to print despite the failure (failed audits).
    pub report: Option<Value>,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Budget { .. } => exit::BUDGET,
            Error::Lp(_) | Error::LpStatus { .. } => exit::SOLVER,
            Error::Precondition { .. } | Error::ZeroProbabilityEvent => exit::AUDIT,
            _ => exit::PARSE,
        };
        Failure { code, message: e.to_string(), report: None }
    }
}

fn parse_failure(message: impl Into<String>) -> Failure {
    Failure { code: exit::PARSE, message: message.into(), report: None }
}

fn limits() -> Result<Limits, Failure> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Limits::from_cells)
            .map_err(|_| parse_failure(format!("{BUDGET_ENV}={v:?} is not a cell count"))),
        Err(_) => Ok(Limits::default()),
    }
}

/// Loads `builtin:NAME` or a game file, with the digest of its canonical form.
pub fn load_game(arg: &str) -> Result<(Game, String), Failure> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        let game = builtin(name)?;
        let digest = game_digest(&game)?;
        return Ok((game, digest));
    }
    let text = std::fs::read_to_string(Path::new(arg)).map_err(|e| parse_failure(format!("{arg}: {e}")))?;
    let file = GameFile::from_json(&text)?;
    let game = file.to_game()?;
    Ok((game, file.digest()?))
}

fn read_mass(path: &str) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| parse_failure(format!("{path}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| parse_failure(format!("{path}: {e}")))?;
    let cells = match &value {
        Value::Array(a) => a,
        Value::Object(o) => match o.get("mass") {
            Some(Value::Array(a)) => a,
            _ => return Err(parse_failure(format!("{path}: expected a \"mass\" array"))),
        },
        _ => return Err(parse_failure(format!("{path}: expected an array or an object with \"mass\""))),
    };
    cells
        .iter()
        .map(|c| c.as_f64().ok_or_else(|| parse_failure(format!("{path}: {c} is not a number"))))
        .collect()
}

fn witness_summary(game: &Game, w: &Witness) -> Value {
    match w {
        Witness::Deterministic(d) => json!({
            "kind": "deterministic",
            "responses": d.responses(game).unwrap_or_default(),
        }),
        Witness::Channel(ch) => json!({
            "kind": "channel",
            "cells": ch.mass().len(),
            "signalling": is_nonsignalling(ch, 0.0).max_violation,
        }),
        Witness::SubChannel { channel, dominating } => json!({
            "kind": "subchannel",
            "cells": channel.mass().len(),
            "total_mass": channel.joint(game.query()).map(|j| j.total_mass()).unwrap_or(f64::NAN),
            "dominating_subsets": dominating.channels.iter().map(|(a, _)| a.to_string()).collect::<Vec<_>>(),
        }),
        Witness::Joint(j) => json!({ "kind": "joint", "cells": j.mass().len() }),
    }
}

fn value_fields(game: &Game, v: &ValueResult) -> Map<String, Value> {
    let mut out = Map::new();
    out.insert("value".into(), json!(v.value));
    if let Some(ex) = &v.exact {
        out.insert("value_fraction".into(), json!(format_rational(ex)));
    }
    out.insert("witness".into(), witness_summary(game, &v.witness));
    out.insert("solver".into(), serde_json::to_value(&v.meta).expect("solver metadata serializes"));
    out
}

fn opts(cli: &Cli) -> Result<SolveOptions, Failure> {
    Ok(SolveOptions { limits: limits()?, exact: cli.exact })
}

/// `ns-opt`, `sns-opt`, or a file; returns the strategy on the n-fold game.
fn load_strategy(arg: &str, rg: &nlgame_core::game::RepeatedGame) -> Result<Channel, Failure> {
    match arg {
        "ns-opt" => Ok(ns_optimal_product(rg)?),
        "sns-opt" => Ok(sns_optimal_product(rg)?),
        path => {
            let g = rg.game();
            let mass = read_mass(path)?;
            Ok(Channel::new(g.query_shape().clone(), g.response_shape().clone(), mass, ChannelKind::Subchannel)?)
        }
    }
}

fn load_target(args: &RoundArgs, game: &Game) -> Result<JointTable, Failure> {
    let base = match args.target.as_str() {
        "ns-opt" | "sns-opt" => {
            let v = if args.target == "ns-opt" {
                ns_value_with(game, &SolveOptions::default())?
            } else {
                sns_value_with(game, &SolveOptions::default())?
            };
            let ch = v.witness.channel().expect("LP witnesses are channels").clone();
            let j = ch.joint(game.query())?;
            let total = j.total_mass();
            if total <= 0.0 {
                return Err(parse_failure("target has no mass"));
            }
            j.mass().iter().map(|p| p / total).collect::<Vec<_>>()
        }
        path => read_mass(path)?,
    };
    let mut mass = base;
    if args.shift != 0.0 {
        let cell = mass
            .get_mut(args.cell)
            .ok_or_else(|| parse_failure(format!("cell {} outside the target", args.cell)))?;
        *cell += args.shift;
    }
    let j = JointTable::from_weights(game.joint_shape(), mass)?;
    Ok(JointTable::new(j.shape().clone(), j.into_mass(), Normalization::Distribution)?)
}

/// Runs a command and returns `(digest, results)`.
pub fn execute(cli: &Cli) -> Result<(Option<String>, Value), Failure> {
    match &cli.command {
        Command::Value(a) => {
            let (game, digest) = load_game(&a.game)?;
            let v = match a.class {
                ClassArg::Classical => classical_value_with(&game, &limits()?)?,
                ClassArg::Ns => ns_value_with(&game, &opts(cli)?)?,
                ClassArg::Sns => sns_value_with(&game, &opts(cli)?)?,
            };
            let mut out = Map::new();
            out.insert("game".into(), json!(game.name()));
            out.insert("class".into(), json!(StrategyClass::from(a.class).to_string()));
            out.extend(value_fields(&game, &v));
            Ok((Some(digest), Value::Object(out)))
        }
        Command::Repeat(a) => {
            let (game, digest) = load_game(&a.game)?;
            let class = match a.class {
                RelaxedClass::Ns => StrategyClass::Ns,
                RelaxedClass::Sns => StrategyClass::Sns,
            };
            let o = opts(cli)?;
            let v = threshold_value(&game, a.n, a.delta, class, &o)?;
            let rg = tensor_power(&game, a.n, o.limits.table_cells)?;
            let mut out = Map::new();
            out.insert("game".into(), json!(game.name()));
            out.insert("n".into(), json!(a.n));
            out.insert("delta".into(), json!(a.delta));
            out.insert("class".into(), json!(class.to_string()));
            out.extend(value_fields(rg.game(), &v));
            Ok((Some(digest), Value::Object(out)))
        }
        Command::Bound(a) => {
            let k = constants(a.m)?;
            let bound = repetition_bound(a.m, a.n, a.nu)?;
            Ok((None, json!({ "m": a.m, "n": a.n, "nu": a.nu, "constants": k, "bound": bound })))
        }
        Command::Audit(a) => {
            let (game, digest) = load_game(&a.game)?;
            let rg = tensor_power(&game, a.n, limits()?.table_cells)?;
            let strategy = load_strategy(&a.strategy, &rg)?;
            let report = audit_repeated_with(&rg, a.delta, &strategy, cli.tol)?;
            let mut value = serde_json::to_value(&report).expect("audit report serializes");
            if let Value::Object(o) = &mut value {
                o.insert("strategy".into(), json!(a.strategy));
            }
            if !report.pass {
                let step = report.failing_step.clone().unwrap_or_default();
                return Err(Failure {
                    code: exit::AUDIT,
                    message: format!("audit failed at step: {step}"),
                    report: Some(wrap(cli, Some(digest), value, 0.0)),
                });
            }
            Ok((Some(digest), value))
        }
        Command::Round(a) => {
            let (game, digest) = load_game(&a.game)?;
            let target = load_target(a, &game)?;
            let r = round_to_sns(&target, &game)?;
            let sns = is_sub_nonsignalling(&r.sns, cli.tol)?;
            let mut value = serde_json::to_value(&r).expect("rounding serializes");
            if let Value::Object(o) = &mut value {
                o.insert("game".into(), json!(game.name()));
                o.insert("target".into(), json!(a.target));
                o.insert("rounded_is_sub_nonsignalling".into(), json!(sns.sub_nonsignalling));
            }
            if !r.within_bound {
                return Err(Failure {
                    code: exit::AUDIT,
                    message: format!("rounding distance {} exceeds the bound {}", r.achieved, r.bound),
                    report: Some(wrap(cli, Some(digest), value, 0.0)),
                });
            }
            Ok((Some(digest), value))
        }
        Command::Eta(a) => {
            let (game, digest) = load_game(&a.game)?;
            let eo = EtaOptions { restarts: a.restarts, seed: cli.seed, ..EtaOptions::default() };
            let lower = eta_lower_search_with(&game, a.delta, &eo)?;
            let sns = sns_value_with(&game, &opts(cli)?)?.value;
            let upper = eta_upper_bound_from(sns, game.parties(), a.delta);
            let gap = match &lower.witness {
                Witness::Joint(j) => nlgame_core::info::approx_ns_check(j, &game, a.delta)?.max_gap,
                _ => f64::NAN,
            };
            Ok((
                Some(digest),
                json!({
                    "game": game.name(),
                    "delta": a.delta,
                    "restarts": a.restarts,
                    "seed": cli.seed,
                    "lower": lower.value,
                    "lower_max_gap": gap,
                    "sns_value": sns,
                    "upper": upper,
                }),
            ))
        }
    }
}

/// Rounds every float to 9 significant digits.
pub fn significant(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let v = n.as_f64().expect("checked f64");
            let r: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
            json!(r)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(significant).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, significant(v))).collect()),
        other => other,
    }
}

/// Full report around a results object.
pub fn wrap(cli: &Cli, digest: Option<String>, results: Value, wall_time: f64) -> Value {
    let mut command = serde_json::to_value(&cli.command).expect("arguments serialize");
    if let Value::Object(o) = &mut command {
        o.insert(
            "global".into(),
            json!({ "exact": cli.exact, "tol": cli.tol, "seed": cli.seed, "jobs": cli.jobs }),
        );
    }
    let mut report = Map::new();
    report.insert("command".into(), command);
    report.insert("input_digest".into(), json!(digest));
    report.insert("results".into(), significant(results));
    report.insert("versions".into(), json!({ "nlgame": env!("CARGO_PKG_VERSION") }));
    report.insert("wall_time".into(), json!(wall_time));
    Value::Object(report)
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(o) => o.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn render(report: &Value, output: Output) -> String {
    match output {
        Output::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        Output::Csv => {
            let mut rows = Vec::new();
            flatten("", report, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"]).expect("in-memory write");
            for (k, v) in rows {
                w.write_record([k, v]).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
        }
    }
}

/// Executes a parsed command line; returns the exit code and the text for
/// stdout and stderr.
pub fn run(cli: &Cli) -> (i32, String, String) {
    if let Some(jobs) = cli.jobs {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let start = Instant::now();
    match execute(cli) {
        Ok((digest, results)) => {
            let report = wrap(cli, digest, results, start.elapsed().as_secs_f64());
            (exit::OK, render(&report, cli.output), String::new())
        }
        Err(f) => {
            let stdout = f.report.map(|r| render(&r, cli.output)).unwrap_or_default();
            (f.code, stdout, format!("error: {}\n", f.message))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("nlgame").chain(args.iter().copied())).unwrap()
    }

    fn results(args: &[&str]) -> Value {
        let (code, out, err) = run(&cli(args));
        assert_eq!(code, 0, "{err}");
        serde_json::from_str::<Value>(&out).unwrap()["results"].clone()
    }

    #[test]
    fn significant_digits() {
        assert_eq!(significant(json!(2.0 / 3.0)), json!(0.666666667));
        assert_eq!(significant(json!({"a": [0.123456789123]})), json!({"a": [0.123456789]}));
        assert_eq!(significant(json!(3)), json!(3));
    }

    #[test]
    fn chsh_values() {
        assert_eq!(results(&["value", "builtin:chsh", "--class", "classical"])["value"], json!(0.75));
        assert_eq!(results(&["value", "builtin:chsh", "--class", "classical"])["value_fraction"], json!("3/4"));
        assert_eq!(results(&["value", "builtin:chsh", "--class", "ns"])["value"], json!(1.0));
    }

    #[test]
    fn anticorrelation_values() {
        assert_eq!(results(&["value", "builtin:anticorrelation", "--class", "ns"])["value"], json!(0.666666667));
        let exact = results(&["--exact", "value", "builtin:anticorrelation", "--class", "ns"]);
        assert_eq!(exact["value_fraction"], json!("2/3"));
        assert_eq!(results(&["value", "builtin:anticorrelation", "--class", "sns"])["value"], json!(1.0));
    }

    #[test]
    fn bound_command() {
        let r = results(&["bound", "--m", "3", "--n", "10000", "--nu", "0.3"]);
        assert!((r["bound"].as_f64().unwrap() - 0.4105).abs() < 1e-4);
        assert_eq!(r["constants"]["c_prime"], json!(26.0));
    }

    #[test]
    fn tiny_threshold_is_one() {
        let r = results(&["repeat", "builtin:chsh", "--n", "2", "--delta", "0.000001", "--class", "ns"]);
        assert!((r["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&cli(&["value", "builtin:nope", "--class", "ns"])).0, exit::PARSE);
        assert_eq!(run(&cli(&["value", "/nonexistent/game.json", "--class", "ns"])).0, exit::PARSE);
        assert_eq!(run(&cli(&["bound", "--m", "1", "--n", "1", "--nu", "0.5"])).0, exit::PARSE);
        assert!(Cli::try_parse_from(["nlgame", "value", "builtin:chsh", "--class", "quantum"]).is_err());
    }

    #[test]
    fn csv_rows() {
        let (_, out, _) = run(&cli(&["--output", "csv", "bound", "--m", "2", "--n", "1", "--nu", "1"]));
        assert!(out.starts_with("key,value\n"));
        assert!(out.contains("results.constants.c_prime,10.0\n"));
    }

    #[test]
    fn audit_passes_for_products() {
        let r = results(&["audit", "builtin:chsh", "--n", "2", "--delta", "1.0", "--strategy", "ns-opt"]);
        assert_eq!(r["pass"], json!(true));
        assert_eq!(r["exponent"], json!(0.0));
    }

    #[test]
    fn round_ns_target_is_free() {
        let r = results(&["round", "builtin:chsh", "--target", "ns-opt"]);
        assert!(r["achieved"].as_f64().unwrap() < 1e-8);
        assert_eq!(r["within_bound"], json!(true));
    }
}
