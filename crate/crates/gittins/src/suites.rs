//! Named verification suites: each maps one family of identities onto a
//! list of check verdicts for a compiled scenario.
//!
//! Per-project checks are prefixed `p{i}:`, per-start checks with the
//! start's name, so one report line localizes a failure. Suites that rely
//! on enumeration oracles take a budget and abort with a budget error when
//! an instance is too large; everything else is closed-form.

use crate::allocation::{
    allocation_grid, build_index_strategy, build_sync_strategy, check_dual_inequality,
    check_flag_coherence, check_idle_zero_gap, classify_strategy, reward_of, validate_strategy,
    Bandit, ClassifyContext, OperationalClock,
};
use crate::gittins::{
    check_decreasing_identity, check_u_martingale, gittins_forward_induction, gittins_index,
    index_grid, restart_representation, rewards_decreasing, IndexSequence,
};
use crate::lattice::{
    check_enlargement, check_field_adapted, check_field_drift, check_optional_sampling,
    enumerate_stopping_points, Drift, LatticeKind,
};
use crate::oracle::{enumerate_strategies, oracle_phi, oracle_v_grid};
use crate::prob::{cond_expect, Rv};
use crate::report::Check;
use crate::scalar::Scalar;
use crate::scenario::{parse_scalar, Scenario};
use crate::stopping::{check_stopped_martingale, snell, StopProblem};
use crate::values::{
    bellman_apply, bellman_solve, check_bellman_residual, check_q_drift, check_q_inequalities,
    check_klw, decreasing_value, envelope_replay_value, general_value, surrogate_bandit,
    surrogate_field, value_integral, whittle_field, whittle_value,
};
use crate::{Error, Result};

/// Every runnable suite name; `all` runs the rest in this order (skipping
/// the product-form suite on non-product lattices).
pub const SUITES: &[&str] = &[
    "f4",
    "snell",
    "gittins",
    "right-inverse",
    "restart",
    "prop-ui",
    "bellman",
    "whittle",
    "thm-index-properties",
    "thm-decreasing",
    "thm-main",
    "lemma-q",
    "all",
];

pub fn run_suite<S: Scalar>(sc: &Scenario<S>, suite: &str, budget: u64) -> Result<Vec<Check<S>>> {
    match suite {
        "f4" => suite_f4(sc, budget),
        "snell" => suite_snell(sc, budget),
        "gittins" => suite_gittins(sc, budget),
        "right-inverse" => suite_right_inverse(sc),
        "restart" => suite_restart(sc),
        "prop-ui" => suite_prop_ui(sc),
        "bellman" => suite_bellman(sc),
        "whittle" => suite_whittle(sc, budget),
        "thm-index-properties" => suite_index_properties(sc, budget),
        "thm-decreasing" => suite_decreasing(sc, budget),
        "thm-main" => suite_main(sc, budget),
        "lemma-q" => suite_lemma_q(sc, budget),
        "all" => {
            let mut out = Vec::new();
            for name in SUITES.iter().filter(|n| **n != "all") {
                if *name == "whittle" && sc.bandit.lattice.kind() != LatticeKind::Product {
                    out.push(Check::pass_with(
                        "product-form-suite",
                        "skipped: not a product lattice".into(),
                    ));
                    continue;
                }
                out.extend(run_suite(sc, name, budget)?);
            }
            Ok(out)
        }
        other => Err(Error::invalid(format!(
            "unknown suite '{other}'; expected one of {SUITES:?}"
        ))),
    }
}

fn prefixed<S: Scalar>(label: &str, checks: Vec<Check<S>>) -> Vec<Check<S>> {
    checks
        .into_iter()
        .map(|mut c| {
            c.name = format!("{label}:{}", c.name);
            c
        })
        .collect()
}

/// Collapses repeated check names (one per grid point or time) to a single
/// verdict per name, keeping the first failure.
fn fold<S: Scalar>(checks: Vec<Check<S>>) -> Vec<Check<S>> {
    let mut out: Vec<Check<S>> = Vec::new();
    for c in checks {
        match out.iter_mut().find(|p| p.name == c.name) {
            None => out.push(c),
            Some(prev) => {
                if prev.pass && !c.pass {
                    *prev = c;
                }
            }
        }
    }
    out
}

fn agree_rv<S: Scalar>(name: &str, a: &Rv<S>, b: &Rv<S>, tol: &S, what: &str) -> Check<S> {
    match (0..a.len()).find(|&w| (a[w].clone() - b[w].clone()).abs() > *tol) {
        None => Check::pass(name),
        Some(w) => Check::fail_res(
            name,
            format!("{what} at atom {w}"),
            (a[w].clone() - b[w].clone()).abs(),
        ),
    }
}

fn project_pairs<S: Scalar>(b: &Bandit<S>) -> Result<Vec<(StopProblem<S>, IndexSequence<S>)>> {
    (0..b.n_projects())
        .map(|i| {
            let p = b.project(i)?;
            let idx = gittins_index(&p);
            Ok((p, idx))
        })
        .collect()
}

/// Filtration axioms, commuting projections, meet identity, and the
/// martingale machinery they support: drift forms, optional sampling over
/// enumerated stopping-point pairs, and enlargement from each axis history
/// to its large filtration.
fn suite_f4<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let lat = &sc.bandit.lattice;
    let tol = &sc.bandit.tol;
    let n = lat.n_atoms();
    let mut out = vec![
        lat.check_f1(),
        lat.check_f2(),
        lat.check_f4(tol),
        lat.check_commutation(tol),
        lat.check_meet_identity(),
    ];
    if lat.kind() == LatticeKind::Sheet {
        out.push(lat.check_not_product_witness());
    }
    if !out.iter().all(|c| c.pass) {
        // the fixtures below presuppose the axioms; report the axiom
        // failures alone rather than a cascade
        return Ok(out);
    }

    // test function separating every atom
    let xi: Rv<S> = (0..n).map(|w| S::from_ratio(w as i64 + 1, n as i64)).collect();
    let mtg: Vec<Rv<S>> = lat
        .cells()
        .iter()
        .map(|cell| cond_expect(lat.space(), lat.part(cell), &xi))
        .collect();
    let total: usize = lat.horizons().iter().sum();
    let smtg: Vec<Rv<S>> = lat
        .cells()
        .iter()
        .map(|cell| {
            let slack = S::from_i64((total - cell.iter().sum::<usize>()) as i64);
            cond_expect(lat.space(), lat.part(cell), &xi)
                .into_iter()
                .map(|x| x + slack.clone())
                .collect()
        })
        .collect();
    out.push(check_field_adapted(lat, &mtg));
    out.extend(prefixed("martingale", check_field_drift(lat, &mtg, Drift::Martingale, tol)));
    out.extend(prefixed(
        "supermartingale",
        check_field_drift(lat, &smtg, Drift::Supermartingale, tol),
    ));

    for i in 0..lat.dim() {
        let q: Vec<Rv<S>> = (0..=lat.horizons()[i])
            .map(|t| cond_expect(lat.space(), lat.axis_small(i, t), &xi))
            .collect();
        out.extend(check_enlargement(lat, i, &q, Drift::Martingale, tol));
    }

    if lat.horizons().iter().any(|&h| h + 1 > 4) {
        out.push(Check::pass_with(
            "optional-sampling",
            "skipped: an axis has more than four cells".into(),
        ));
    } else {
        let points = enumerate_stopping_points(lat, budget as usize)?;
        let mut os = Check::pass("optional-sampling");
        'os: for sp in &points {
            for tp in &points {
                if !sp.le(tp) {
                    continue;
                }
                let c = check_optional_sampling(lat, &smtg, sp, tp, Drift::Supermartingale, tol);
                if !c.pass {
                    os = c;
                    break 'os;
                }
                let c = check_optional_sampling(lat, &mtg, sp, tp, Drift::Martingale, tol);
                if !c.pass {
                    os = c;
                    break 'os;
                }
            }
        }
        out.push(Check::pass_with(
            "stopping-point-census",
            format!("{} stopping points enumerated", points.len()),
        ));
        out.push(os);
    }
    Ok(out)
}

/// Envelope recursion against the brute-force enumeration over every
/// adapted rule, plus the stopped-martingale property of the envelope,
/// for every project and every retirement level on the breakpoint grid.
fn suite_snell<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let mut out = Vec::new();
    for (i, (prob, idx)) in project_pairs(b)?.into_iter().enumerate() {
        let h = prob.horizon();
        let n = prob.space.len();
        let grid = index_grid(&idx, 0);
        let tables: Vec<Vec<Rv<S>>> = grid.iter().map(|m| snell(&prob, m)).collect();
        let mut acc = Vec::new();
        for (k, m) in grid.iter().enumerate() {
            let mut table = tables[k].clone();
            if let Some(p) = &sc.perturbation {
                if p.target == "snell" && i == 0 && p.time < table.len() && p.atom < n {
                    let amt: S = parse_scalar(&p.amount)?;
                    table[p.time][p.atom] = table[p.time][p.atom].clone() + amt;
                }
            }
            acc.push(check_stopped_martingale(&prob, 0, m, &table, tol));
        }
        let mut oracle = Check::pass("envelope-equals-enumeration");
        'or: for t in 0..=h {
            let vals = oracle_v_grid(&prob, t, &grid, h, budget)?;
            for (k, m) in grid.iter().enumerate() {
                for w in 0..n {
                    let res = (tables[k][t][w].clone() - vals[k][w].clone()).abs();
                    if res > *tol {
                        oracle = Check::fail_res(
                            "envelope-equals-enumeration",
                            format!("V({t};{m}) at atom {w}"),
                            res,
                        );
                        break 'or;
                    }
                }
            }
        }
        acc.push(oracle);
        out.extend(prefixed(&format!("p{i}"), fold(acc)));
    }
    Ok(out)
}

/// Newton-on-the-envelope index against the forward-induction dual, the
/// adaptedness of the index, and the myopic identity for nonincreasing
/// rewards.
fn suite_gittins<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let mut out = Vec::new();
    for (i, (prob, idx)) in project_pairs(b)?.into_iter().enumerate() {
        let mut acc = Vec::new();
        let fwd = gittins_forward_induction(&prob, budget)?;
        let mut dual = Check::pass("index-dual-agreement");
        'du: for t in 0..=prob.horizon() {
            for w in 0..prob.space.len() {
                let res = (idx.values[t][w].clone() - fwd.values[t][w].clone()).abs();
                if res > *tol {
                    dual = Check::fail_res(
                        "index-dual-agreement",
                        format!("M({t}) at atom {w}"),
                        res,
                    );
                    break 'du;
                }
            }
        }
        acc.push(dual);
        let adapted = (0..=prob.horizon()).all(|t| prob.part(t).measures(&idx.values[t]));
        acc.push(Check::from_bool(
            "index-adapted",
            adapted,
            "index not measurable at its own time".into(),
        ));
        acc.push(check_decreasing_identity(&prob, &idx, tol));
        out.extend(prefixed(&format!("p{i}"), acc));
    }
    Ok(out)
}

/// First-passage structure of the optimal rules below the running minimum
/// of the index, from every time.
fn suite_right_inverse<S: Scalar>(sc: &Scenario<S>) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let mut out = Vec::new();
    for (i, (prob, idx)) in project_pairs(b)?.into_iter().enumerate() {
        let mut acc = Vec::new();
        for t in 0..=prob.horizon() {
            let grid = index_grid(&idx, t);
            for mut c in crate::gittins::check_right_inverse(&prob, &idx, t, &grid) {
                if let Some(w) = c.witness.take() {
                    c.witness = Some(format!("from t={t}: {w}"));
                }
                acc.push(c);
            }
        }
        out.extend(prefixed(&format!("p{i}"), fold(acc)));
    }
    Ok(out)
}

/// The stopping value as a discounted stream of the retirement reward
/// capped below by the running minimum of the index, at every time and
/// every grid level including zero.
fn suite_restart<S: Scalar>(sc: &Scenario<S>) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let mut out = Vec::new();
    for (i, (prob, idx)) in project_pairs(b)?.into_iter().enumerate() {
        let grid = index_grid(&idx, 0);
        let mut check = Check::pass("restart-representation");
        'rs: for m in &grid {
            let table = snell(&prob, m);
            for t in 0..=prob.horizon() {
                let r = restart_representation(&prob, &idx, t, m);
                for w in 0..prob.space.len() {
                    let res = (r[w].clone() - table[t][w].clone()).abs();
                    if res > *tol {
                        check = Check::fail_res(
                            "restart-representation",
                            format!("V({t};{m}) at atom {w}"),
                            res,
                        );
                        break 'rs;
                    }
                }
            }
        }
        out.extend(prefixed(&format!("p{i}"), vec![check]));
    }
    Ok(out)
}

/// The compensated stopping-value process starts at zero and is a
/// martingale, from every time.
fn suite_prop_ui<S: Scalar>(sc: &Scenario<S>) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let mut out = Vec::new();
    for (i, (prob, idx)) in project_pairs(b)?.into_iter().enumerate() {
        let mut acc = Vec::new();
        for t in 0..=prob.horizon() {
            let mut c = check_u_martingale(&prob, &idx, t, tol);
            if let Some(w) = c.witness.take() {
                c.witness = Some(format!("from t={t}: {w}"));
            }
            acc.push(c);
        }
        out.extend(prefixed(&format!("p{i}"), fold(acc)));
    }
    Ok(out)
}

/// Retirement grid shared by the Bellman and product-form suites: zero,
/// every positive index value with midpoints, the reward scale, and a
/// point beyond it.
fn retirement_grid<S: Scalar>(b: &Bandit<S>, idxs: &[IndexSequence<S>]) -> Vec<S> {
    let mut grid = vec![S::zero(), b.bound.clone()];
    for m in allocation_grid(b, idxs, &vec![0; b.n_projects()]) {
        if !grid.contains(&m) {
            grid.push(m);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("total order on scalars"));
    grid
}

/// Backward-induction fixed point, the four structural identities of the
/// value field, adaptedness and bounds, and geometric convergence of the
/// operator iteration, across the retirement grid.
fn suite_bellman<S: Scalar>(sc: &Scenario<S>) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let n = b.lattice.n_atoms();
    let idxs = b.project_indices()?;
    let grid = retirement_grid(b, &idxs);
    let mut acc = Vec::new();
    for m in &grid {
        let mut field = bellman_solve(b, m);
        if let Some(p) = &sc.perturbation {
            if p.target == "field" {
                if p.cell.len() != b.n_projects() || p.atom >= n {
                    return Err(Error::invalid("perturbation location out of range"));
                }
                let k = b.lattice.cell_index(&p.cell);
                let amt: S = parse_scalar(&p.amount)?;
                field[k][p.atom] = field[k][p.atom].clone() + amt;
            }
        }
        acc.push(check_bellman_residual(b, m, &field, tol));
        acc.extend(check_q_inequalities(b, &idxs, &field, m, tol));
        acc.push(check_field_adapted(&b.lattice, &field));
        let mut bounds = Check::pass("value-field-bounds");
        'bd: for (k, cell) in b.lattice.cells().iter().enumerate() {
            for w in 0..n {
                let low = field[k][w].clone() + tol.clone() < *m;
                let high = field[k][w].clone() > b.bound.clone() + m.clone() + tol.clone();
                if low || high {
                    bounds = Check::fail(
                        "value-field-bounds",
                        format!("cell {cell:?}, atom {w}, retirement {m}"),
                    );
                    break 'bd;
                }
            }
        }
        acc.push(bounds);
    }
    let target = bellman_solve(b, &S::zero());
    let cells = b.lattice.cells().len();
    let mut field: Vec<Rv<S>> = vec![vec![b.bound.clone(); n]; cells];
    let mut contraction = Check::pass("bellman-contraction");
    for step in 1..=5usize {
        field = bellman_apply(b, &S::zero(), &field);
        let worst = (0..cells)
            .flat_map(|k| (0..n).map(move |w| (k, w)))
            .map(|(k, w)| (field[k][w].clone() - target[k][w].clone()).abs())
            .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
            .unwrap_or_else(S::zero);
        let allowed = b.beta.pow_u(step) * b.bound.clone() + tol.clone();
        if worst > allowed {
            contraction = Check::fail_res(
                "bellman-contraction",
                format!("iterate {step} further than beta^{step} K from the fixed point"),
                worst,
            );
            break;
        }
    }
    acc.push(contraction);
    Ok(fold(acc))
}

/// Product-form integral against the enumeration oracle at retirement zero
/// and against backward induction across the retirement grid.
fn suite_whittle<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    if b.lattice.kind() != LatticeKind::Product {
        return Err(Error::invalid("suite 'whittle' requires a product lattice"));
    }
    let idxs = b.project_indices()?;
    let grid = retirement_grid(b, &idxs);
    let mut out = Vec::new();
    let mut acc = Vec::new();
    for m in &grid {
        let wf = whittle_field(b, &idxs, m)?;
        let bs = bellman_solve(b, m);
        let mut c = Check::pass("product-integral-equals-backward-induction");
        'eq: for (k, cell) in b.lattice.cells().iter().enumerate() {
            for w in 0..b.lattice.n_atoms() {
                let res = (wf[k][w].clone() - bs[k][w].clone()).abs();
                if res > *tol {
                    c = Check::fail_res(
                        "product-integral-equals-backward-induction",
                        format!("cell {cell:?}, atom {w}, retirement {m}"),
                        res,
                    );
                    break 'eq;
                }
            }
        }
        acc.push(c);
    }
    out.extend(fold(acc));
    for (sname, start) in &sc.starts {
        let w0 = whittle_value(b, &idxs, start, &S::zero())?;
        let oracle = oracle_phi(b, start, &S::zero(), budget)?;
        out.extend(prefixed(
            sname,
            vec![agree_rv(
                "product-value-equals-enumeration",
                &w0,
                &oracle,
                tol,
                "integral route vs enumerated optimum",
            )],
        ));
    }
    Ok(out)
}

/// The five equivalent index-type characterizations over every enumerated
/// strategy, the two implication directions, the surrender-value dual
/// bound, and the constructed traversal and greedy strategies.
fn suite_index_properties<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let idxs = b.project_indices()?;
    let mut out = Vec::new();
    for (sname, start) in &sc.starts {
        let clock = OperationalClock::new(b, &idxs, start);
        let grid = allocation_grid(b, &idxs, start);
        let mut acc = Vec::new();

        let sync = build_sync_strategy(b, &idxs, start);
        acc.extend(validate_strategy(b, &sync));
        let fl = classify_strategy(b, &idxs, &clock, &sync, &grid);
        acc.push(Check::from_bool(
            "traversal-strategy-synchronizes",
            fl.sync,
            "the explicit traversal strategy is not synchronizing".into(),
        ));
        acc.extend(check_flag_coherence(&fl));
        acc.push(check_idle_zero_gap(b, &clock, &sync)?);

        let greedy = build_index_strategy(b, &idxs, start, true);
        acc.extend(validate_strategy(b, &greedy));
        let fg = classify_strategy(b, &idxs, &clock, &greedy, &grid);
        acc.push(Check::from_bool(
            "greedy-strategy-is-index-type",
            fg.index_type,
            "the greedy index strategy is not of index type".into(),
        ));
        acc.extend(check_flag_coherence(&fg));

        let mut agg: Vec<Check<S>> = vec![
            Check::pass("five-way-equivalence"),
            Check::pass("left-limit-agreement"),
            Check::pass("index-type-implies-synchronization"),
            Check::pass("synchronization-and-minimal-switching-implies-index-type"),
            Check::pass("surrender-value-dominated"),
        ];
        let ctx = ClassifyContext::new(b, &idxs, &clock, &grid);
        let mut count = 0u64;
        enumerate_strategies(b, start, None, budget, &mut |strat| {
            count += 1;
            let f = ctx.classify(strat);
            for c in check_flag_coherence::<S>(&f) {
                if !c.pass {
                    if let Some(slot) = agg.iter_mut().find(|a| a.name == c.name && a.pass) {
                        *slot = Check::fail(
                            &c.name,
                            format!("strategy {count}: {}", c.witness.unwrap_or_default()),
                        );
                    }
                }
            }
            let dc = check_dual_inequality(b, &clock, strat);
            if !dc.pass {
                if let Some(slot) = agg.iter_mut().find(|a| a.name == dc.name && a.pass) {
                    *slot = Check::fail(
                        &dc.name,
                        format!("strategy {count}: {}", dc.witness.unwrap_or_default()),
                    );
                }
            }
            Ok(())
        })?;
        acc.extend(agg);
        acc.push(Check::pass_with("strategy-census", format!("{count} strategies enumerated")));
        out.extend(prefixed(sname, fold(acc)));
    }
    Ok(out)
}

/// On the surrogate problem with nonincreasing fair-rate rewards: the
/// myopic index identity, agreement of the two closed forms, the bridge to
/// the original value, and exact attainment by precisely the synchronizing
/// strategies.
fn suite_decreasing<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let n = b.lattice.n_atoms();
    let idxs = b.project_indices()?;
    let f4 = b.lattice.check_f4(tol).pass;
    let mut out = Vec::new();
    for (sname, start) in &sc.starts {
        let b2 = surrogate_bandit(b, &idxs, start)?;
        let idxs2 = b2.project_indices()?;
        let mut acc = Vec::new();
        for i in 0..b2.n_projects() {
            let p2 = b2.project(i)?;
            acc.push(Check::from_bool(
                "surrogate-rewards-nonincreasing",
                rewards_decreasing(&p2),
                format!("project {i} surrogate rewards increase somewhere"),
            ));
            acc.push(check_decreasing_identity(&p2, &idxs2[i], tol));
        }
        let dv = decreasing_value(&b2, &idxs2, start)?;
        acc.push(dv.agree.clone());
        if f4 {
            let orig = value_integral(b, &idxs, start, &S::zero());
            acc.push(agree_rv(
                "surrogate-value-equals-original",
                &dv.integral_form,
                &orig,
                tol,
                "fair-rate value vs original integral route",
            ));
        } else {
            acc.push(Check::pass_with(
                "surrogate-value-equals-original",
                "skipped: conditional independence does not hold".into(),
            ));
        }
        let clock2 = OperationalClock::new(&b2, &idxs2, start);
        let grid2 = allocation_grid(&b2, &idxs2, start);
        let part = b.lattice.part(start);
        let ctx = ClassifyContext::new(&b2, &idxs2, &clock2, &grid2);
        let mut iff = Check::pass("attainment-iff-synchronization");
        let mut count = 0u64;
        enumerate_strategies(&b2, start, None, budget, &mut |strat| {
            count += 1;
            if !iff.pass {
                return Ok(());
            }
            let f = ctx.classify(strat);
            let val = cond_expect(b.lattice.space(), part, &reward_of(&b2, strat));
            let mut attains = true;
            for w in 0..n {
                let gap = val[w].clone() - dv.integral_form[w].clone();
                if gap > *tol {
                    iff = Check::fail_res(
                        "attainment-iff-synchronization",
                        format!("strategy {count} exceeds the optimum at atom {w}"),
                        gap,
                    );
                    return Ok(());
                }
                if gap.abs() > *tol {
                    attains = false;
                }
            }
            if attains != f.sync {
                iff = Check::fail(
                    "attainment-iff-synchronization",
                    format!(
                        "strategy {count}: attains={attains} but synchronizing={}",
                        f.sync
                    ),
                );
            }
            Ok(())
        })?;
        acc.push(iff);
        out.extend(prefixed(sname, fold(acc)));
    }
    Ok(out)
}

/// The three value routes against each other and the enumeration oracle,
/// the compensator-transform bridge processes, and the discounted envelope
/// replay along the greedy strategy.
fn suite_main<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let idxs = b.project_indices()?;
    let mut out = Vec::new();
    for (sname, start) in &sc.starts {
        let sync = build_sync_strategy(b, &idxs, start);
        let (routes, mut acc) = general_value(b, &idxs, start, &sync);
        let oracle = oracle_phi(b, start, &S::zero(), budget)?;
        acc.push(agree_rv(
            "oracle-route-agreement",
            &routes.integral,
            &oracle,
            tol,
            "integral route vs enumerated optimum",
        ));
        acc.extend(check_klw(b, &idxs, &sync));
        let greedy = build_index_strategy(b, &idxs, start, true);
        let clock = OperationalClock::new(b, &idxs, start);
        let er = envelope_replay_value(b, &clock, &greedy);
        acc.push(agree_rv(
            "envelope-replay-agreement",
            &er,
            &routes.integral,
            tol,
            "discounted envelope replay vs integral route",
        ));
        out.extend(prefixed(sname, fold(acc)));
    }
    Ok(out)
}

/// The strategy-clock value process: a supermartingale for every strategy
/// under both the true value field and the fair-rate field, a martingale
/// along the greedy index strategy.
fn suite_lemma_q<S: Scalar>(sc: &Scenario<S>, budget: u64) -> Result<Vec<Check<S>>> {
    let b = &sc.bandit;
    let tol = &b.tol;
    let idxs = b.project_indices()?;
    let f4 = b.lattice.check_f4(tol).pass;
    let field0 = bellman_solve(b, &S::zero());
    let field2 = surrogate_field(b, &idxs);
    let mut out = Vec::new();
    for (sname, start) in &sc.starts {
        let mut acc = Vec::new();
        if f4 {
            let greedy = build_index_strategy(b, &idxs, start, true);
            acc.push(check_q_drift(b, &field0, &greedy, Drift::Martingale, tol));
        } else {
            acc.push(Check::pass_with(
                "strategy-value-martingale",
                "skipped: conditional independence does not hold".into(),
            ));
        }
        let mut sup0 = Check::pass("strategy-value-supermartingale");
        let mut sup2 = Check::pass("surrogate-value-supermartingale");
        let mut count = 0u64;
        enumerate_strategies(b, start, None, budget, &mut |strat| {
            count += 1;
            if sup0.pass {
                let c = check_q_drift(b, &field0, strat, Drift::Supermartingale, tol);
                if !c.pass {
                    sup0 = Check::fail(
                        "strategy-value-supermartingale",
                        format!("strategy {count}: {}", c.witness.unwrap_or_default()),
                    );
                }
            }
            if f4 && sup2.pass {
                let c = check_q_drift(b, &field2, strat, Drift::Supermartingale, tol);
                if !c.pass {
                    sup2 = Check::fail(
                        "surrogate-value-supermartingale",
                        format!("strategy {count}: {}", c.witness.unwrap_or_default()),
                    );
                }
            }
            Ok(())
        })?;
        acc.push(sup0);
        if f4 {
            acc.push(sup2);
        } else {
            acc.push(Check::pass_with(
                "surrogate-value-supermartingale",
                "skipped: conditional independence does not hold".into(),
            ));
        }
        out.extend(prefixed(sname, acc));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use num_traits::Zero;

    use crate::scenario::{
        build_scenario, f4_counterexample, perturbed_field_fixture, perturbed_martingale_fixture,
        scenario_b, scenario_c, scenario_d, scenario_e,
    };

    const BUDGET: u64 = 1 << 20;

    fn run(file: crate::scenario::ScenarioFile, suite: &str) -> Vec<Check<Exact>> {
        let sc = build_scenario::<Exact>(&file, Exact::zero()).unwrap();
        run_suite(&sc, suite, BUDGET).unwrap()
    }

    #[test]
    fn every_suite_passes_on_the_two_project_example() {
        let checks = run(scenario_c(), "all");
        for c in &checks {
            assert!(c.pass, "{}: {:?}", c.name, c.witness);
        }
    }

    #[test]
    fn every_suite_passes_on_the_coin_example() {
        let checks = run(scenario_d(), "all");
        for c in &checks {
            assert!(c.pass, "{}: {:?}", c.name, c.witness);
        }
    }

    #[test]
    fn sheet_scenario_passes_its_suites() {
        for suite in ["f4", "thm-main", "lemma-q", "thm-decreasing", "thm-index-properties"] {
            for c in run(scenario_e(), suite) {
                assert!(c.pass, "{suite} {}: {:?}", c.name, c.witness);
            }
        }
    }

    #[test]
    fn correlated_counterexample_fails_with_witness() {
        let checks = run(f4_counterexample(), "f4");
        let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|c| c.witness.is_some()));
    }

    #[test]
    fn field_perturbation_fails_bellman_with_localized_witness() {
        let checks = run(perturbed_field_fixture(), "bellman");
        let bad: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().any(|c| c.name == "bellman-fixed-point"
            && c.witness.as_deref().unwrap_or("").contains("[1, 0]")));
    }

    #[test]
    fn snell_perturbation_fails_martingale_with_localized_witness() {
        let checks = run(perturbed_martingale_fixture(), "snell");
        let bad: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
        assert!(!bad.is_empty());
        assert!(bad.iter().any(|c| c.name.ends_with("stopped-martingale")));
        // the oracle comparison uses fresh envelopes and must stay green
        assert!(checks
            .iter()
            .filter(|c| c.name.ends_with("envelope-equals-enumeration"))
            .all(|c| c.pass));
    }

    #[test]
    fn unknown_suite_is_rejected() {
        let sc = build_scenario::<Exact>(&scenario_b(), Exact::zero()).unwrap();
        assert!(run_suite(&sc, "nope", BUDGET).is_err());
    }
}
