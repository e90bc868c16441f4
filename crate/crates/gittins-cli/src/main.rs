//! Command line front end: scenario ingestion, command dispatch, report
//! emission.
//!
//! The JSON report goes to stdout; a plain-text rendering with timing goes
//! to stderr. In rational mode the JSON omits timing so identical inputs
//! produce byte-identical output.
//!
//! Exit codes: 0 all checks pass, 1 verification failure, 2 input error,
//! 3 enumeration budget exceeded.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_traits::Zero;

use gittins::allocation::{build_sync_strategy, Bandit};
use gittins::gittins::rewards_decreasing;
use gittins::lattice::LatticeKind;
use gittins::oracle::oracle_phi;
use gittins::prob::Rv;
use gittins::report::{Report, RouteValue};
use gittins::scalar::{Approx, Exact, Scalar};
use gittins::scenario::{
    build_scenario, parse_scalar, Generator, Mode, Scenario, ScenarioFile, CENSUS_CAP,
};
use gittins::suites::run_suite;
use gittins::values::{
    bellman_solve, decreasing_value, envelope_replay_value, general_value, whittle_value,
};
use gittins::{Error, Result};

#[derive(Parser)]
#[command(name = "gittins", version, about = "Verification engine for dynamic allocation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Numeric mode; overrides the scenario file's `mode` field.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Comparison tolerance in float mode; overrides the file's `tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Enumeration budget for oracles and strategy sweeps.
    #[arg(long, global = true, default_value_t = 1 << 22)]
    budget: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a scenario file and check its structural axioms.
    Validate { path: PathBuf },
    /// Compute the allocation value by every applicable route.
    Value {
        path: PathBuf,
        /// Named starting cell from the scenario file.
        #[arg(long)]
        start: Option<String>,
        /// Retirement reward, e.g. "0", "3/2", or "1.5".
        #[arg(long, default_value = "0")]
        retirement: String,
    },
    /// Run verification suites against a scenario.
    Verify {
        path: PathBuf,
        /// Single suite to run instead of the file's `suites` list.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Generate seeded random scenarios and run their suites.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per family (single project, product, sheet).
        #[arg(default_value_t = 10)]
        count: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Rational,
    Float,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match dispatch(&cli) {
        Ok((report, float_mode)) => {
            let mut report = report;
            let ms = started.elapsed().as_millis();
            if float_mode {
                report.timing_ms = Some(ms);
            }
            print!("{}", report.to_json());
            eprint!("{}", report.render_text(ms));
            if report.pass {
                ExitCode::from(0)
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Budget(_) => ExitCode::from(3),
                Error::Invalid(_) | Error::Parse(_) => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(Report, bool)> {
    match &cli.cmd {
        Cmd::Validate { path } => with_file(cli, path, |sc, _| cmd_validate(sc), |sc, _| cmd_validate(sc)),
        Cmd::Value { path, start, retirement } => with_file(
            cli,
            path,
            |sc, budget| cmd_value(sc, start.as_deref(), retirement, budget),
            |sc, budget| cmd_value(sc, start.as_deref(), retirement, budget),
        ),
        Cmd::Verify { path, suite } => with_file(
            cli,
            path,
            |sc, budget| cmd_verify(sc, suite.as_deref(), budget),
            |sc, budget| cmd_verify(sc, suite.as_deref(), budget),
        ),
        Cmd::Random { seed, count } => {
            let mode = cli.mode.unwrap_or(ModeArg::Rational);
            match mode {
                ModeArg::Rational => {
                    Ok((cmd_random::<Exact>(*seed, *count, cli.budget, Exact::zero(), "rational")?, false))
                }
                ModeArg::Float => {
                    let tol = cli.tol.unwrap_or(1e-9);
                    Ok((cmd_random::<Approx>(*seed, *count, cli.budget, tol, "float")?, true))
                }
            }
        }
    }
}

/// Loads the file, resolves the numeric mode (flag beats file), and runs
/// the command body under the chosen scalar type.
fn with_file<FR, FF>(cli: &Cli, path: &PathBuf, exact: FR, float: FF) -> Result<(Report, bool)>
where
    FR: FnOnce(&Scenario<Exact>, u64) -> Result<Report>,
    FF: FnOnce(&Scenario<Approx>, u64) -> Result<Report>,
{
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mode = match cli.mode {
        Some(ModeArg::Rational) => Mode::Rational,
        Some(ModeArg::Float) => Mode::Float,
        None => file.mode,
    };
    match mode {
        Mode::Rational => {
            let sc = build_scenario::<Exact>(&file, Exact::zero())?;
            let mut report = exact(&sc, cli.budget)?;
            report.mode = "rational".into();
            Ok((report, false))
        }
        Mode::Float => {
            let tol = match cli.tol {
                Some(t) => t,
                None => match &file.tol {
                    Some(t) => parse_scalar::<Approx>(t)?,
                    None => 1e-9,
                },
            };
            let sc = build_scenario::<Approx>(&file, tol)?;
            let mut report = float(&sc, cli.budget)?;
            report.mode = "float".into();
            Ok((report, true))
        }
    }
}

/// Structural axioms: filtration chain, common refinement, conditional
/// independence, commuting projections, meet identity, and per-project
/// reward predictability and bounds.
fn cmd_validate<S: Scalar>(sc: &Scenario<S>) -> Result<Report> {
    let mut report = Report::new("validate", &sc.name, "");
    let lat = &sc.bandit.lattice;
    let tol = &sc.bandit.tol;
    report.push_check(&lat.check_f1());
    report.push_check(&lat.check_f2());
    report.push_check(&lat.check_f4(tol));
    report.push_check(&lat.check_commutation(tol));
    report.push_check(&lat.check_meet_identity());
    for i in 0..sc.bandit.n_projects() {
        let c = match sc.bandit.project(i).and_then(|p| p.validate()) {
            Ok(()) => gittins::report::Check::<S>::pass("rewards-predictable-and-bounded"),
            Err(e) => gittins::report::Check::fail(
                "rewards-predictable-and-bounded",
                format!("project {i}: {e}"),
            ),
        };
        report.push_check(&c);
    }
    Ok(report)
}

fn render_rv<S: Scalar>(v: &Rv<S>) -> String {
    if v.iter().all(|x| *x == v[0]) {
        format!("{}", v[0])
    } else {
        let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        format!("[{}]", parts.join(", "))
    }
}

/// One route value plus its agreement check against the reference route.
fn push_route<S: Scalar>(report: &mut Report, name: &str, v: &Rv<S>, reference: &Rv<S>, tol: &S) {
    report.push_value(RouteValue::ok(name, render_rv(v)));
    let bad = (0..v.len()).find(|&w| (v[w].clone() - reference[w].clone()).abs() > *tol);
    let check = match bad {
        None => gittins::report::Check::<S>::pass(&format!("agreement:{name}")),
        Some(w) => gittins::report::Check::fail_res(
            &format!("agreement:{name}"),
            format!("differs from backward induction at atom {w}"),
            (v[w].clone() - reference[w].clone()).abs(),
        ),
    };
    report.push_check(&check);
}

fn cmd_value<S: Scalar>(
    sc: &Scenario<S>,
    start: Option<&str>,
    retirement: &str,
    budget: u64,
) -> Result<Report> {
    let b: &Bandit<S> = &sc.bandit;
    let tol = &b.tol;
    let retire: S = parse_scalar(retirement)?;
    if retire < S::zero() {
        return Err(Error::Invalid("retirement reward must be nonnegative".into()));
    }
    let (sname, cell) = match start {
        None => &sc.starts[0],
        Some(name) => sc
            .starts
            .iter()
            .find(|(n, _)| n.as_str() == name)
            .ok_or_else(|| Error::Invalid(format!("unknown start '{name}'")))?,
    };
    let mut report = Report::new("value", &sc.name, "");
    report.note(format!("start {sname} = {cell:?}, retirement {retire}"));

    let idxs = b.project_indices()?;
    let field = bellman_solve(b, &retire);
    let reference = field[b.lattice.cell_index(cell)].clone();
    report.push_value(RouteValue::ok("backward-induction", render_rv(&reference)));

    if retire.is_zero() {
        let sync = build_sync_strategy(b, &idxs, cell);
        let (routes, checks) = general_value(b, &idxs, cell, &sync);
        push_route(&mut report, "integral", &routes.integral, &reference, tol);
        push_route(&mut report, "clock-form", &routes.clock_form, &reference, tol);
        push_route(&mut report, "strategy-replay", &routes.replay, &reference, tol);
        report.push_checks(&checks);
        let greedy = gittins::allocation::build_index_strategy(b, &idxs, cell, true);
        let clock = gittins::allocation::OperationalClock::new(b, &idxs, cell);
        let er = envelope_replay_value(b, &clock, &greedy);
        push_route(&mut report, "envelope-replay", &er, &reference, tol);
        let decreasing = (0..b.n_projects())
            .map(|i| b.project(i).map(|p| rewards_decreasing(&p)))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .all(|d| d);
        if decreasing {
            let dv = decreasing_value(b, &idxs, cell)?;
            push_route(&mut report, "fair-rate-integral", &dv.integral_form, &reference, tol);
            push_route(&mut report, "fair-rate-series", &dv.series_form, &reference, tol);
        }
    } else if b.lattice.kind() == LatticeKind::Product {
        let wv = whittle_value(b, &idxs, cell, &retire)?;
        push_route(&mut report, "product-integral", &wv, &reference, tol);
    }

    match oracle_phi(b, cell, &retire, budget) {
        Ok(v) => push_route(&mut report, "enumeration", &v, &reference, tol),
        Err(Error::Budget(why)) => {
            report.push_value(RouteValue::skipped("enumeration", why));
        }
        Err(e) => return Err(e),
    }
    Ok(report)
}

fn cmd_verify<S: Scalar>(sc: &Scenario<S>, suite: Option<&str>, budget: u64) -> Result<Report> {
    let mut report = Report::new("verify", &sc.name, "");
    let suites: Vec<String> = match suite {
        Some(s) => vec![s.to_string()],
        None if sc.suites.is_empty() => vec!["all".to_string()],
        None => sc.suites.clone(),
    };
    for s in &suites {
        let checks = run_suite(sc, s, budget)?;
        report.note(format!("suite {s}: {} checks", checks.len()));
        report.push_checks(&checks);
    }
    Ok(report)
}

/// Builds `count` instances of each family from one seed and runs each
/// instance's own suite list, reporting one aggregated verdict per
/// instance.
fn cmd_random<S: Scalar>(
    seed: u64,
    count: usize,
    budget: u64,
    tol: S,
    mode: &str,
) -> Result<Report> {
    if (budget as u128) < CENSUS_CAP {
        return Err(Error::Invalid(format!(
            "budget {budget} below the generator census cap {CENSUS_CAP}"
        )));
    }
    let mut report = Report::new("random", &format!("seed-{seed}"), mode);
    let mut gen = Generator::new(seed);
    let mut files: Vec<ScenarioFile> = Vec::with_capacity(3 * count);
    for k in 0..count {
        files.push(gen.single_project(k));
    }
    for k in 0..count {
        files.push(gen.product(k)?);
    }
    for k in 0..count {
        files.push(gen.sheet(k)?);
    }
    let mut passed = 0usize;
    for file in &files {
        let sc = build_scenario::<S>(file, tol.clone())?;
        let mut verdict = gittins::report::Check::<S>::pass(&sc.name);
        'su: for s in &sc.suites {
            for c in run_suite(&sc, s, budget)? {
                if !c.pass {
                    verdict = gittins::report::Check::fail(
                        &sc.name,
                        format!("{s}/{}: {}", c.name, c.witness.unwrap_or_default()),
                    );
                    break 'su;
                }
            }
        }
        passed += verdict.pass as usize;
        report.push_check(&verdict);
    }
    report.note(format!("{passed}/{} instances passed", files.len()));
    Ok(report)
}
