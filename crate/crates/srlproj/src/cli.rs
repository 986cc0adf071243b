//! Command-line front end: file I/O, JSON reporting, and `repro`
//! commands regenerating the headline numbers from bundled fixtures.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::fixtures;
use crate::lang::{check_projective, parse_model, Dialect};
use crate::learning::{check_consistency, check_unbiasedness, expected_argmax, mle, Objective};
use crate::projectivity::{q_mln, q_rbn, test_projective};
use crate::semantics::{effective_cap, query, Model, ParamVector, Query};
use crate::stats::{complete_counts, verify_lemma1};
use crate::worlds::{enumerate_worlds, World};

/// Exit codes: 0 pass, 1 semantic fail, 2 parse error, 3 cap exceeded,
/// 4 query error.
const EXIT_OK: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_PARSE: i32 = 2;
const EXIT_CAP: i32 = 3;
const EXIT_QUERY: i32 = 4;

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Syntax { .. } | Error::Stratification { .. } | Error::Arity(_) => EXIT_PARSE,
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::ZeroEvidence => EXIT_QUERY,
        _ => EXIT_FAIL,
    }
}

/// Formats a float with 12 significant digits.
fn sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

#[derive(Parser)]
#[command(name = "srlproj", version, about = "Exact projectivity and learning toolkit \
for three relational modeling dialects")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Override the dialect inferred from the file extension
    #[arg(long, value_enum)]
    dialect: Option<DialectArg>,
    /// Parameter assignment, repeatable: --param theta=0.5
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Numeric tolerance for pass/fail verdicts
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Atom-count cap (default 30, or the SRLPROJ_CAP environment variable)
    #[arg(long)]
    cap: Option<u32>,
    /// Also write the JSON report to this file
    #[arg(long = "json")]
    json_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DialectArg {
    Rbn,
    Mln,
    Problog,
}

impl From<DialectArg> for Dialect {
    fn from(d: DialectArg) -> Dialect {
        match d {
            DialectArg::Rbn => Dialect::Rbn,
            DialectArg::Mln => Dialect::Mln,
            DialectArg::Problog => Dialect::Problog,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Marginal,
    Subsample,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value
        .parse()
        .map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.to_string(), value))
}

#[derive(Subcommand)]
enum Command {
    /// Statically check whether a model is in the projective fragment
    Check {
        model: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Test projectivity empirically by exact marginalization
    Project {
        model: PathBuf,
        /// Largest domain size to test
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Answer a conditional probability query
    Query {
        model: PathBuf,
        /// Target literal, e.g. 'edge(0,1)' or '!red(2)'
        target: String,
        /// Comma-separated evidence literals
        #[arg(long, default_value = "")]
        evidence: String,
        /// Domain size
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Complete k-count statistics of a world file
    Counts {
        world: PathBuf,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Verify the subsampling identity for all size-k patterns
    Lemma1 {
        world: PathBuf,
        /// Subsample size
        #[arg(long)]
        m: usize,
        /// Pattern size
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Maximum-likelihood estimation from an observed world
    Mle {
        model: PathBuf,
        world: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Model domain size (marginal mode)
        #[arg(long)]
        n: Option<usize>,
        /// Subsample size (subsample mode)
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Regenerate a headline number from bundled fixtures
    Repro {
        #[arg(value_parser = ["mln-eq6", "rbn-noisyor", "shared-param", "two-param", "lemma1", "prop4"])]
        case: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}

fn load_model(path: &PathBuf, common: &CommonArgs) -> crate::Result<Model> {
    let text = std::fs::read_to_string(path)?;
    let dialect = match common.dialect {
        Some(d) => d.into(),
        None => Dialect::from_extension(&path.to_string_lossy()).ok_or_else(|| {
            Error::InvalidModel(format!(
                "cannot infer dialect from `{}`; pass --dialect",
                path.display()
            ))
        })?,
    };
    Model::parse(&text, dialect)
}

fn load_world(path: &PathBuf) -> crate::Result<World> {
    let text = std::fs::read_to_string(path)?;
    World::parse_text(&text, None)
}

fn theta_of(common: &CommonArgs) -> ParamVector {
    let mut theta = ParamVector::new();
    for (name, value) in &common.params {
        theta.set(name, *value);
    }
    theta
}

fn emit(report: &serde_json::Value, common: &CommonArgs) -> crate::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serialization");
    println!("{text}");
    if let Some(path) = &common.json_out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> crate::Result<i32> {
    match cli.command {
        Command::Check { model, common } => {
            let text = std::fs::read_to_string(&model)?;
            let dialect = match common.dialect {
                Some(d) => d.into(),
                None => Dialect::from_extension(&model.to_string_lossy()).ok_or_else(|| {
                    Error::InvalidModel("cannot infer dialect; pass --dialect".into())
                })?,
            };
            let spec = parse_model(&text, dialect)?;
            let report = check_projective(&spec);
            emit(&serde_json::to_value(&report).unwrap(), &common)?;
            Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Project { model, n, common } => {
            let model = load_model(&model, &common)?;
            let cap = effective_cap(common.cap);
            let report = test_projective(&model, &theta_of(&common), n, common.tol, cap)?;
            emit(&serde_json::to_value(&report).unwrap(), &common)?;
            Ok(if report.projective { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Query { model, target, evidence, n, common } => {
            let model = load_model(&model, &common)?;
            let cap = effective_cap(common.cap);
            let q = Query::parse(&target, &evidence).map_err(|e| match e {
                // malformed query text is a query error, not a model error
                Error::InvalidWorld(msg) => Error::InvalidWorld(msg),
                other => other,
            })?;
            let dist = match &model {
                Model::Spec(crate::lang::ModelSpec::Problog(spec)) => {
                    crate::semantics::problog_distribution(
                        spec,
                        model.signature()?,
                        n,
                        &theta_of(&common),
                        cap,
                        true,
                    )?
                }
                _ => model.distribution(n, &theta_of(&common), cap)?,
            };
            let p = query(&dist, &q)?;
            println!("{}", sig12(p));
            emit(&serde_json::json!({ "probability": p }), &common)?;
            Ok(EXIT_OK)
        }
        Command::Counts { world, k, common } => {
            let world = load_world(&world)?;
            let stats = complete_counts(&world, k)?;
            emit(&stats.to_json(), &common)?;
            Ok(EXIT_OK)
        }
        Command::Lemma1 { world, m, k, common } => {
            let world = load_world(&world)?;
            let sig = world.signature().clone();
            sig.check_cap(k, effective_cap(common.cap))?;
            let mut rows = Vec::new();
            let mut all_equal = true;
            for pattern in enumerate_worlds(&sig, k, effective_cap(common.cap))? {
                let check = verify_lemma1(&world, m, &pattern)?;
                all_equal = all_equal && check.holds();
                let mut row = check.to_json();
                row["pattern"] = serde_json::json!(pattern.encoding());
                rows.push(row);
            }
            emit(
                &serde_json::json!({ "m": m, "k": k, "all_equal": all_equal, "checks": rows }),
                &common,
            )?;
            Ok(if all_equal { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Mle { model, world, mode, n, m, common } => {
            let model = load_model(&model, &common)?;
            let world = load_world(&world)?;
            let cap = effective_cap(common.cap);
            let objective = match mode {
                ModeArg::Exact => Objective::Exact { world },
                ModeArg::Marginal => {
                    let n = n.ok_or_else(|| {
                        Error::Dimension("--n is required with --mode marginal".into())
                    })?;
                    Objective::Marginal { world, n }
                }
                ModeArg::Subsample => {
                    let m = m.ok_or_else(|| {
                        Error::Dimension("--m is required with --mode subsample".into())
                    })?;
                    Objective::ExpectedSubsample { source: world, m }
                }
            };
            let fit = mle(&model, &objective, cap)?;
            for (name, value) in &fit.theta {
                println!("{name} = {}", sig12(*value));
            }
            println!("loglik = {}", sig12(fit.loglik));
            emit(&serde_json::to_value(&fit).unwrap(), &common)?;
            Ok(EXIT_OK)
        }
        Command::Repro { case, common } => repro(&case, &common),
    }
}

struct ReproTable {
    rows: Vec<(String, bool)>,
}

impl ReproTable {
    fn new() -> ReproTable {
        ReproTable { rows: Vec::new() }
    }

    fn row(&mut self, label: &str, value: f64, expect: &str, ok: bool) {
        self.rows
            .push((format!("{label:<40} {:<22} expected {expect}", sig12(value)), ok));
    }

    fn finish(self) -> i32 {
        let mut all_ok = true;
        for (line, ok) in &self.rows {
            println!("{} {line}", if *ok { "ok  " } else { "FAIL" });
            all_ok = all_ok && *ok;
        }
        if all_ok {
            EXIT_OK
        } else {
            EXIT_FAIL
        }
    }
}

fn repro(case: &str, common: &CommonArgs) -> crate::Result<i32> {
    let cap = effective_cap(common.cap);
    let mut t = ReproTable::new();
    match case {
        "mln-eq6" => {
            for w in [-2.0, -1.0, 0.0, 1.0, 2.0] {
                let q = q_mln(2, w)?;
                t.row(&format!("q_mln(2, {w})"), q, "0.5", (q - 0.5).abs() <= 1e-12);
            }
            let q2 = q_mln(2, 1.2)?;
            let q3 = q_mln(3, 1.2)?;
            let q4 = q_mln(4, 1.2)?;
            t.row("q_mln(3,1.2) - q_mln(2,1.2)", q3 - q2, "> 0", q3 - q2 >= 1e-6);
            t.row("q_mln(4,1.2) - q_mln(3,1.2)", q4 - q3, "> 0", q4 - q3 >= 1e-6);
        }
        "rbn-noisyor" => {
            for theta in [0.1, 0.5, 0.9] {
                let q = q_rbn(2, theta)?;
                t.row(&format!("q_rbn(2, {theta})"), q, "0", q.abs() <= 1e-12);
            }
            let q = q_rbn(3, 0.5)?;
            t.row("q_rbn(3, 0.5)", q, "> 1e-3", q > 1e-3);
        }
        "shared-param" => {
            let model = Model::parse(fixtures::SHARED_PARAM_RBN, Dialect::Rbn)?;
            let source = World::parse_text(fixtures::HALF_RED_N4_WORLD, None)?;
            let sub = Objective::ExpectedSubsample { source: source.clone(), m: 2 };
            let fit = mle(&model, &sub, cap)?;
            t.row(
                "argmax expected-subsample loglik",
                fit.theta["theta"],
                "1/6",
                (fit.theta["theta"] - 1.0 / 6.0).abs() <= 1e-5,
            );
            let fit = mle(&model, &Objective::Exact { world: source.clone() }, cap)?;
            t.row(
                "argmax full-world loglik",
                fit.theta["theta"],
                "0.1",
                (fit.theta["theta"] - 0.1).abs() <= 1e-5,
            );
            let ea = expected_argmax(&model, &source, 2, cap)?;
            t.row(
                "mean per-subsample argmax",
                ea.0["theta"],
                "1/6",
                (ea.0["theta"] - 1.0 / 6.0).abs() <= 1e-5,
            );
        }
        "two-param" => {
            let model = Model::parse(fixtures::TWO_PARAM_RBN, Dialect::Rbn)?;
            let source = World::parse_text(fixtures::HALF_RED_N4_WORLD, None)?;
            for (label, objective) in [
                ("full-world", Objective::Exact { world: source.clone() }),
                ("expected-subsample", Objective::ExpectedSubsample { source: source.clone(), m: 2 }),
            ] {
                let fit = mle(&model, &objective, cap)?;
                t.row(
                    &format!("{label} theta_r"),
                    fit.theta["theta_r"],
                    "0.5",
                    (fit.theta["theta_r"] - 0.5).abs() <= 1e-5,
                );
                t.row(
                    &format!("{label} theta_e (boundary)"),
                    fit.theta["theta_e"],
                    "0",
                    fit.theta["theta_e"] <= 1e-6
                        && fit.boundary.contains(&"theta_e".to_string()),
                );
            }
            let eq8 = check_unbiasedness(&model, &source, 2, cap)?;
            t.row("unbiasedness distance", eq8.distance, "<= 1e-4", eq8.pass);
            let eq9 = check_consistency(&model, &source, 2, cap)?;
            t.row("consistency distance", eq9.distance, "<= 1e-4", eq9.pass);
        }
        "lemma1" => {
            let world = World::parse_text(fixtures::HALF_RED_N4_WORLD, None)?;
            let sig = world.signature().clone();
            for (m, k) in [(2, 1), (2, 2), (3, 2)] {
                let mut worst_equal = true;
                for pattern in enumerate_worlds(&sig, k, cap)? {
                    worst_equal = worst_equal && verify_lemma1(&world, m, &pattern)?.holds();
                }
                t.row(
                    &format!("all patterns exact at m={m}, k={k}"),
                    if worst_equal { 1.0 } else { 0.0 },
                    "1",
                    worst_equal,
                );
            }
        }
        "prop4" => {
            let models: Vec<(&str, Model, ParamVector)> = vec![
                (
                    "er(0.3)",
                    Model::parse("e(X,Y) <- 0.3;", Dialect::Rbn)?,
                    ParamVector::new(),
                ),
                ("clique-empty", Model::CliqueEmpty, ParamVector::new()),
                (
                    "block-rbn",
                    Model::parse(fixtures::BLOCK_RBN, Dialect::Rbn)?,
                    ParamVector::new(),
                ),
                (
                    "red-edge-problog",
                    Model::parse(fixtures::RED_EDGE_PLP, Dialect::Problog)?,
                    ParamVector::new(),
                ),
            ];
            for (label, model, theta) in &models {
                // tabulate each Q^(n) once, then compare log-marginals
                // against the direct Q^(2) world by world
                let base = model.distribution(2, theta, cap)?;
                let mut worst = 0.0f64;
                for n in [3usize, 4] {
                    let marg = model.distribution(n, theta, cap)?.marginalize(2)?;
                    for (enc, &p) in base.probs().iter().enumerate() {
                        let exact = p.ln();
                        let lm = marg.probs()[enc].ln();
                        if exact.is_finite() || lm.is_finite() {
                            worst = worst.max((lm - exact).abs());
                        }
                    }
                }
                t.row(&format!("{label} worst gap"), worst, "<= 1e-9", worst <= 1e-9);
            }
        }
        other => {
            return Err(Error::InvalidModel(format!("unknown repro case {other}")));
        }
    }
    Ok(t.finish())
}
