//! Acceptance battery: ten numbered criteria, one pass/fail line each.
//!
//! Everything runs in exact rational arithmetic inside a single test so the
//! wall-clock bound of the last criterion reflects a single-threaded run.
//! Run with `--nocapture` to watch the lines print; on failure the captured
//! output carries the first witness of every criterion that broke.

use std::time::{Duration, Instant};

use gittins::gittins::{
    gittins_forward_induction, gittins_index, index_grid, restart_representation, IndexSequence,
};
use gittins::allocation::Bandit;
use gittins::oracle::{oracle_phi, oracle_v_grid};
use gittins::prob::Rv;
use gittins::scenario::{
    build_scenario, f4_counterexample, parse_scalar, scenario_a, scenario_b, scenario_c,
    Generator, Scenario, ScenarioFile,
};
use gittins::stopping::{right_derivative, snell};
use gittins::suites::run_suite;
use gittins::values::{decreasing_value, whittle_value};
use gittins::Exact;
use num_traits::Zero;

const BUDGET: u64 = 1 << 22;

fn rat(text: &str) -> Exact {
    parse_scalar(text).expect("rational literal")
}

fn build(file: &ScenarioFile) -> Scenario<Exact> {
    build_scenario(file, Exact::zero()).expect("scenario builds")
}

fn indices(b: &Bandit<Exact>) -> Vec<IndexSequence<Exact>> {
    (0..b.n_projects())
        .map(|i| gittins_index(&b.project(i).expect("factor problem")))
        .collect()
}

/// Run one suite and report either its check count or the first failure.
fn suite_clean(sc: &Scenario<Exact>, suite: &str) -> Result<usize, String> {
    match run_suite(sc, suite, BUDGET) {
        Ok(checks) => match checks.iter().find(|c| !c.pass) {
            None => Ok(checks.len()),
            Some(c) => Err(format!(
                "{}/{suite}/{}: {}",
                sc.name,
                c.name,
                c.witness.clone().unwrap_or_default()
            )),
        },
        Err(e) => Err(format!("{}/{suite}: {e}", sc.name)),
    }
}

struct Line {
    n: usize,
    pass: bool,
    detail: String,
}

fn verdict(n: usize, fail: &Option<String>, ok_detail: String) -> Line {
    match fail {
        None => Line { n, pass: true, detail: ok_detail },
        Some(w) => Line { n, pass: false, detail: w.clone() },
    }
}

#[test]
fn acceptance_battery() {
    let wall = Instant::now();
    let zero = Exact::zero();
    let mut lines: Vec<Line> = Vec::new();

    let mut gen = Generator::new(2026);
    let singles: Vec<Scenario<Exact>> =
        (0..100).map(|k| build(&gen.single_project(k))).collect();
    let mut gen = Generator::new(2027);
    let products: Vec<Scenario<Exact>> =
        (0..100).map(|k| build(&gen.product(k).expect("census within budget"))).collect();
    let mut gen = Generator::new(2028);
    let sheets: Vec<Scenario<Exact>> =
        (0..50).map(|k| build(&gen.sheet(k).expect("census within budget"))).collect();

    // Criteria 1, 2, 3 and 9 share one pass over the single-project pool:
    // the envelope tables and the breakpoint grid feed all four.
    let mut c1_fail: Option<String> = None;
    let mut c2_fail: Option<String> = None;
    let mut c3_fail: Option<String> = None;
    let mut c9_fail: Option<String> = None;
    let mut c1_points = 0u64;
    let mut c1_time = Duration::ZERO;
    let mut c3_points = 0u64;
    let mut c9_points = 0u64;

    for sc in &singles {
        let prob = sc.bandit.project(0).expect("single project");
        let idx = gittins_index(&prob);
        let grid = index_grid(&idx, 0);
        let h = prob.horizon();
        let n = prob.space.len();

        let t0 = Instant::now();
        let tabs: Vec<Vec<Rv<Exact>>> = grid.iter().map(|m| snell(&prob, m)).collect();
        'c1: for t in 0..=h {
            if c1_fail.is_some() {
                break;
            }
            let orc = match oracle_v_grid(&prob, t, &grid, h, BUDGET) {
                Ok(o) => o,
                Err(e) => {
                    c1_fail = Some(format!("{}: {e}", sc.name));
                    break;
                }
            };
            for (k, tab) in tabs.iter().enumerate() {
                for w in 0..n {
                    c1_points += 1;
                    if tab[t][w] != orc[k][w] {
                        c1_fail = Some(format!(
                            "{}: V({t}; {}) differs from the enumeration oracle at atom {w}",
                            sc.name, grid[k]
                        ));
                        break 'c1;
                    }
                }
            }
        }
        c1_time += t0.elapsed();

        if c2_fail.is_none() {
            match gittins_forward_induction(&prob, BUDGET) {
                Ok(fi) => {
                    'c2: for t in 0..=h {
                        for w in 0..n {
                            if idx.values[t][w] != fi.values[t][w] {
                                c2_fail = Some(format!(
                                    "{}: M({t}) differs from forward induction at atom {w}",
                                    sc.name
                                ));
                                break 'c2;
                            }
                        }
                    }
                }
                Err(e) => c2_fail = Some(format!("{}: {e}", sc.name)),
            }
        }

        'c3: for t in 0..=h {
            if c3_fail.is_some() {
                break;
            }
            for (k, m) in grid.iter().enumerate() {
                let rr = restart_representation(&prob, &idx, t, m);
                for w in 0..n {
                    c3_points += 1;
                    if rr[w] != tabs[k][t][w] {
                        c3_fail = Some(format!(
                            "{}: restart value V({t}; {m}) differs at atom {w}",
                            sc.name
                        ));
                        break 'c3;
                    }
                }
            }
        }

        // Each consecutive grid pair lies inside one linear piece of
        // `m -> V(t; m)`. The stopping discount is evaluated at a point of
        // that piece where the rule is finite: the left endpoint when it is
        // positive, else the midpoint (at level zero the rule is the
        // symbolic never-stop and the discount is zero by convention, while
        // the finite-horizon slope is not).
        'c9: for t in 0..=h {
            if c9_fail.is_some() {
                break;
            }
            for k in 0..grid.len() - 1 {
                let gap = grid[k + 1].clone() - grid[k].clone();
                let anchor = if grid[k] > zero { &grid[k] } else { &grid[k + 1] };
                let rd = right_derivative(&prob, t, anchor);
                for w in 0..n {
                    c9_points += 1;
                    let secant =
                        (tabs[k + 1][t][w].clone() - tabs[k][t][w].clone()) / gap.clone();
                    if secant != rd[w] {
                        c9_fail = Some(format!(
                            "{}: secant slope over [{}, {}] at t={t} differs from the \
                             stopping-discount expectation at atom {w}",
                            sc.name,
                            grid[k],
                            grid[k + 1]
                        ));
                        break 'c9;
                    }
                }
            }
        }
    }
    if c1_time >= Duration::from_secs(10) && c1_fail.is_none() {
        c1_fail = Some(format!("envelope-oracle comparison took {c1_time:?} (limit 10 s)"));
    }
    lines.push(verdict(
        1,
        &c1_fail,
        format!(
            "{} instances, {} envelope values match the oracle exactly in {} ms",
            singles.len(),
            c1_points,
            c1_time.as_millis()
        ),
    ));

    // Anchors for the index dual: the one-step project surrenders at 2, the
    // two-step coin at 12/5 up front and (4, 0) after the flip.
    if c2_fail.is_none() {
        let a = build(&scenario_a());
        let ia = gittins_index(&a.bandit.project(0).expect("one project"));
        if ia.values[0] != vec![rat("2")] {
            c2_fail = Some(format!("anchor A: M(0) = {:?}, expected 2", ia.values[0]));
        }
        let b = build(&scenario_b());
        let ib = gittins_index(&b.bandit.project(0).expect("one project"));
        if ib.values[0] != vec![rat("12/5"), rat("12/5")] {
            c2_fail = Some(format!("anchor B: M(0) = {:?}, expected 12/5", ib.values[0]));
        } else if ib.values[1] != vec![rat("4"), rat("0")] {
            c2_fail = Some(format!("anchor B: M(1) = {:?}, expected (4, 0)", ib.values[1]));
        }
    }
    lines.push(verdict(
        2,
        &c2_fail,
        format!(
            "index equals its forward-induction dual on {} instances; anchors M(0)=2, \
             M(0)=12/5 and M(1)=(4, 0) hold",
            singles.len()
        ),
    ));

    lines.push(verdict(
        3,
        &c3_fail,
        format!(
            "restart representation matches the envelope at {} grid points (level 0 included)",
            c3_points
        ),
    ));

    // Criteria 4, 5, 6 walk the product pool.
    let mut c4_fail: Option<String> = None;
    let mut c5_fail: Option<String> = None;
    let mut c6_fail: Option<String> = None;
    let mut c4_starts = 0u64;
    for sc in &products {
        if c4_fail.is_none() {
            let idxs = indices(&sc.bandit);
            'c4: for (sname, cell) in &sc.starts {
                let wv = whittle_value(&sc.bandit, &idxs, cell, &zero)
                    .expect("generated lattice is a product");
                let op = match oracle_phi(&sc.bandit, cell, &zero, BUDGET) {
                    Ok(o) => o,
                    Err(e) => {
                        c4_fail = Some(format!("{}: {e}", sc.name));
                        break 'c4;
                    }
                };
                c4_starts += 1;
                for w in 0..sc.bandit.lattice.n_atoms() {
                    if wv[w] != op[w] {
                        c4_fail = Some(format!(
                            "{}: product value at start '{sname}' differs from the \
                             enumeration oracle at atom {w}",
                            sc.name
                        ));
                        break 'c4;
                    }
                }
            }
            // Retirement-grid inequalities and region identities ride on the
            // dynamic-programming suite.
            if c4_fail.is_none() {
                if let Err(w) = suite_clean(sc, "bellman") {
                    c4_fail = Some(w);
                }
            }
        }
        if c5_fail.is_none() {
            if let Err(w) = suite_clean(sc, "thm-index-properties") {
                c5_fail = Some(w);
            }
        }
        if c6_fail.is_none() {
            if let Err(w) = suite_clean(sc, "thm-decreasing") {
                c6_fail = Some(w);
            }
        }
    }
    if c4_fail.is_none() {
        let c = build(&scenario_c());
        let idxs = indices(&c.bandit);
        let wv = whittle_value(&c.bandit, &idxs, &[0, 0], &zero).expect("product");
        if wv != vec![rat("13/10")] {
            c4_fail = Some(format!("anchor C: value {:?}, expected 13/10", wv));
        }
    }
    lines.push(verdict(
        4,
        &c4_fail,
        format!(
            "product value equals the oracle at {} starts on {} instances; anchor \
             value 13/10 holds; retirement-grid inequalities clean",
            c4_starts,
            products.len()
        ),
    ));
    lines.push(verdict(
        5,
        &c5_fail,
        format!(
            "five-way strategy classification consistent over every enumerated strategy \
             of {} instances",
            products.len()
        ),
    ));
    if c6_fail.is_none() {
        let c = build(&scenario_c());
        let idxs = indices(&c.bandit);
        let dv = decreasing_value(&c.bandit, &idxs, &[0, 0]).expect("nonincreasing rewards");
        if !(dv.agree.pass
            && dv.integral_form == vec![rat("13/10")]
            && dv.series_form == vec![rat("13/10")])
        {
            c6_fail = Some(format!(
                "anchor C: closed forms {:?} / {:?}, expected 13/10 by both",
                dv.integral_form, dv.series_form
            ));
        }
    }
    lines.push(verdict(
        6,
        &c6_fail,
        format!(
            "attainment iff synchronization and matching closed forms on {} instances; \
             anchor closed forms both 13/10",
            products.len()
        ),
    ));

    // Criteria 7 and 8 take the products and the sheets together.
    let mut c7_fail: Option<String> = None;
    let mut c8_fail: Option<String> = None;
    let mut c8_sampled = 0u64;
    for sc in products.iter().chain(sheets.iter()) {
        if c7_fail.is_none() {
            if let Err(w) = suite_clean(sc, "thm-main") {
                c7_fail = Some(w);
            }
        }
        if c8_fail.is_none() {
            let ax = sc.bandit.lattice.check_f4(&zero);
            if !ax.pass {
                c8_fail = Some(format!(
                    "{}: conditional independence fails: {}",
                    sc.name,
                    ax.witness.unwrap_or_default()
                ));
            } else {
                match run_suite(sc, "f4", BUDGET) {
                    Ok(checks) => {
                        if let Some(c) = checks.iter().find(|c| !c.pass) {
                            c8_fail = Some(format!(
                                "{}/f4/{}: {}",
                                sc.name,
                                c.name,
                                c.witness.clone().unwrap_or_default()
                            ));
                        } else if checks.iter().any(|c| {
                            c.name == "optional-sampling"
                                && !c.witness.as_deref().unwrap_or("").starts_with("skipped")
                        }) {
                            c8_sampled += 1;
                        }
                    }
                    Err(e) => c8_fail = Some(format!("{}/f4: {e}", sc.name)),
                }
            }
        }
    }
    lines.push(verdict(
        7,
        &c7_fail,
        format!(
            "three value routes, oracle agreement and compensator identities on {} instances",
            products.len() + sheets.len()
        ),
    ));
    if c8_fail.is_none() {
        let cx = build(&f4_counterexample());
        let ax = cx.bandit.lattice.check_f4(&zero);
        if ax.pass {
            c8_fail = Some("correlated counterexample passed conditional independence".into());
        } else if ax.witness.as_deref().unwrap_or("").is_empty() {
            c8_fail = Some("correlated counterexample failed without a witness".into());
        }
    }
    lines.push(verdict(
        8,
        &c8_fail,
        format!(
            "conditional independence, enlargement and optional sampling clean on {} \
             instances ({} with full stopping-point sweeps); counterexample fails with \
             a witness",
            products.len() + sheets.len(),
            c8_sampled
        ),
    ));

    lines.push(verdict(
        9,
        &c9_fail,
        format!("{} secant slopes equal the stopping-discount expectations exactly", c9_points),
    ));

    let total = wall.elapsed();
    let c10_fail = if total < Duration::from_secs(120) {
        None
    } else {
        Some(format!("battery took {total:?} (limit 120 s)"))
    };
    lines.push(verdict(10, &c10_fail, format!("battery completed in {} ms", total.as_millis())));

    let mut all = true;
    for l in &lines {
        println!(
            "criterion {:>2}: {} - {}",
            l.n,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail
        );
        all &= l.pass;
    }
    assert!(all, "at least one acceptance criterion failed; see the lines above");
}
