//! Dynamic-allocation values and theorem-level process identities.
//!
//! Three independent routes price a bandit from a starting cell:
//!
//! * the product-form integral `K - int_M^K prod_i d/dm+ V_i(s_i; m) dm`,
//!   computed exactly over the breakpoint partition of the per-project
//!   right derivatives;
//! * the operational-clock closed forms
//!   `E[int_0^inf (1 - beta^tau(m)) dm]  =  (1-beta) E[sum_t beta^t N(t)]`,
//!   the value of the surrogate problem whose rewards are the nonincreasing
//!   fair rates `(1-beta) * running-minimum index`;
//! * replaying the explicit synchronization strategy and conditioning its
//!   pathwise reward.
//!
//! The Bellman operator provides a fixed-point residual check and a second
//! backward-induction solver. The bridge between the general and surrogate
//! rewards is certified through the martingale transform of the per-project
//! compensators and its split into the reward gap and the discounted pivot
//! excess.

use crate::allocation::{
    position_table, reward_of, surrogate_reward_of, Bandit, OperationalClock, Strategy,
};
use crate::gittins::{u_process, IndexSequence};
use crate::lattice::{stopped_partition, Drift, StoppingPoint};
use crate::prob::{cond_expect, Rv};
use crate::report::Check;
use crate::scalar::{le_tol, Scalar};
use crate::stopping::{right_derivative, snell, StopProblem};
use crate::{Error, Result};

fn projects<S: Scalar>(b: &Bandit<S>) -> Vec<StopProblem<S>> {
    (0..b.n_projects())
        .map(|i| b.project(i).expect("bandit projects validated at construction"))
        .collect()
}

/// Retirement values where some per-project right derivative can jump:
/// positive running-minimum index values strictly inside `(lo, hi)`.
fn breakpoints<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    cell: &[usize],
    lo: &S,
    hi: &S,
) -> Vec<S> {
    let n = b.lattice.n_atoms();
    let mut pts = vec![lo.clone(), hi.clone()];
    for (i, idx) in idxs.iter().enumerate() {
        for row in idx.lower_from(cell[i]) {
            for w in 0..n {
                if row[w] > *lo && row[w] < *hi && !pts.contains(&row[w]) {
                    pts.push(row[w].clone());
                }
            }
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("total order on scalars"));
    pts
}

/// `K - int_M^K prod_i d/dm+ V_i(cell_i; m) dm`, atomwise and exact: the
/// integrand is a step function of `m` between consecutive breakpoints, so
/// each piece is evaluated at its midpoint. Returns `M` when `M >= K`.
pub fn value_integral<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    cell: &[usize],
    retire: &S,
) -> Rv<S> {
    let n = b.lattice.n_atoms();
    if *retire >= b.bound {
        return vec![retire.clone(); n];
    }
    let probs = projects(b);
    let two = S::from_i64(2);
    let pts = breakpoints(b, idxs, cell, retire, &b.bound);
    let mut acc = vec![S::zero(); n];
    for pair in pts.windows(2) {
        let mid = (pair[0].clone() + pair[1].clone()) / two.clone();
        let len = pair[1].clone() - pair[0].clone();
        let mut piece = vec![S::one(); n];
        for (i, prob) in probs.iter().enumerate() {
            let d = right_derivative(prob, cell[i], &mid);
            for w in 0..n {
                piece[w] = piece[w].clone() * d[w].clone();
            }
        }
        for w in 0..n {
            acc[w] = acc[w].clone() + len.clone() * piece[w].clone();
        }
    }
    (0..n).map(|w| b.bound.clone() - acc[w].clone()).collect()
}

/// Product-form value; defined only on lattices built as products of
/// independent factors.
pub fn whittle_value<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    cell: &[usize],
    retire: &S,
) -> Result<Rv<S>> {
    if b.lattice.kind() != crate::lattice::LatticeKind::Product {
        return Err(Error::invalid(
            "the product-form value requires a product lattice; use the general value",
        ));
    }
    Ok(value_integral(b, idxs, cell, retire))
}

/// Product-form value at every lattice cell, in cell-index order.
pub fn whittle_field<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    retire: &S,
) -> Result<Vec<Rv<S>>> {
    b.lattice
        .cells()
        .iter()
        .map(|cell| whittle_value(b, idxs, cell, retire))
        .collect()
}

/// Integral-form value at every cell with no retirement, on any lattice
/// whose filtration supports it.
pub fn general_field<S: Scalar>(b: &Bandit<S>, idxs: &[IndexSequence<S>]) -> Vec<Rv<S>> {
    b.lattice
        .cells()
        .iter()
        .map(|cell| value_integral(b, idxs, cell, &S::zero()))
        .collect()
}

/// One application of the Bellman operator
/// `(T F)(r) = max[M, max over live j of (step reward + beta E[F(r + e_j) | F(r)])]`.
pub fn bellman_apply<S: Scalar>(b: &Bandit<S>, retire: &S, field: &[Rv<S>]) -> Vec<Rv<S>> {
    let n = b.lattice.n_atoms();
    let hz = b.lattice.horizons().to_vec();
    let d = b.n_projects();
    b.lattice
        .cells()
        .iter()
        .map(|cell| {
            let mut best = vec![retire.clone(); n];
            for j in 0..d {
                if cell[j] >= hz[j] {
                    continue;
                }
                let mut next = cell.clone();
                next[j] += 1;
                let cont =
                    cond_expect(b.lattice.space(), b.lattice.part(cell), &field[b.lattice.cell_index(&next)]);
                for w in 0..n {
                    let cand =
                        b.rewards[j][cell[j]][w].clone() + b.beta.clone() * cont[w].clone();
                    if cand > best[w] {
                        best[w] = cand;
                    }
                }
            }
            best
        })
        .collect()
}

/// Backward induction for the value field: cells are filled in decreasing
/// total position, so every continuation is already available.
pub fn bellman_solve<S: Scalar>(b: &Bandit<S>, retire: &S) -> Vec<Rv<S>> {
    let cells = b.lattice.cells();
    let n = b.lattice.n_atoms();
    let hz = b.lattice.horizons().to_vec();
    let d = b.n_projects();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(cells[k].iter().sum::<usize>()));
    let mut field: Vec<Rv<S>> = vec![Vec::new(); cells.len()];
    for k in order {
        let cell = &cells[k];
        let mut best = vec![retire.clone(); n];
        for j in 0..d {
            if cell[j] >= hz[j] {
                continue;
            }
            let mut next = cell.clone();
            next[j] += 1;
            let cont = cond_expect(
                b.lattice.space(),
                b.lattice.part(cell),
                &field[b.lattice.cell_index(&next)],
            );
            for w in 0..n {
                let cand = b.rewards[j][cell[j]][w].clone() + b.beta.clone() * cont[w].clone();
                if cand > best[w] {
                    best[w] = cand;
                }
            }
        }
        field[k] = best;
    }
    field
}

/// Fixed-point residual of the Bellman operator on the given field,
/// reporting the worst violation and its location.
pub fn check_bellman_residual<S: Scalar>(
    b: &Bandit<S>,
    retire: &S,
    field: &[Rv<S>],
    tol: &S,
) -> Check<S> {
    let image = bellman_apply(b, retire, field);
    let mut worst: Option<(S, String)> = None;
    for (k, cell) in b.lattice.cells().iter().enumerate() {
        for w in 0..b.lattice.n_atoms() {
            let res = (field[k][w].clone() - image[k][w].clone()).abs();
            if worst.as_ref().is_none_or(|(r, _)| res > *r) {
                worst = Some((res, format!("cell {cell:?}, atom {w}")));
            }
        }
    }
    match worst {
        Some((res, at)) if res > *tol => {
            Check::fail_res("bellman-fixed-point", at, res)
        }
        Some((res, _)) => Check::pass("bellman-fixed-point").with_residual(res),
        None => Check::pass("bellman-fixed-point"),
    }
}

/// The four structural inequalities and identities of the value field:
/// it dominates retirement and every engagement; it collapses to the
/// retirement reward where no index exceeds it; and engaging any project
/// attaining the strictly larger maximal index is exactly optimal.
pub fn check_q_inequalities<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    field: &[Rv<S>],
    retire: &S,
    tol: &S,
) -> Vec<Check<S>> {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let hz = b.lattice.horizons().to_vec();
    let cells = b.lattice.cells();
    let mut dominate_retire = Check::pass("value-dominates-retirement");
    let mut dominate_engage = Check::pass("value-dominates-engagement");
    let mut retire_region = Check::pass("retirement-region-identity");
    let mut engage_region = Check::pass("engagement-region-identity");
    for (k, cell) in cells.iter().enumerate() {
        for w in 0..n {
            if field[k][w].clone() + tol.clone() < *retire {
                dominate_retire = Check::fail_res(
                    "value-dominates-retirement",
                    format!("cell {cell:?}, atom {w}"),
                    retire.clone() - field[k][w].clone(),
                );
            }
        }
        let top: Rv<S> = (0..n)
            .map(|w| {
                (0..d)
                    .map(|i| idxs[i].values[cell[i]][w].clone())
                    .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
                    .expect("at least one project")
            })
            .collect();
        for w in 0..n {
            if le_tol(&top[w], retire, tol) {
                let res = (field[k][w].clone() - retire.clone()).abs();
                if res > *tol {
                    retire_region = Check::fail_res(
                        "retirement-region-identity",
                        format!("cell {cell:?}, atom {w}"),
                        res,
                    );
                }
            }
        }
        for j in 0..d {
            if cell[j] >= hz[j] {
                continue;
            }
            let mut next = cell.clone();
            next[j] += 1;
            let cont = cond_expect(
                b.lattice.space(),
                b.lattice.part(cell),
                &field[b.lattice.cell_index(&next)],
            );
            for w in 0..n {
                let cand = b.rewards[j][cell[j]][w].clone() + b.beta.clone() * cont[w].clone();
                if field[k][w].clone() + tol.clone() < cand {
                    dominate_engage = Check::fail_res(
                        "value-dominates-engagement",
                        format!("cell {cell:?}, project {j}, atom {w}"),
                        cand.clone() - field[k][w].clone(),
                    );
                }
                let attains = idxs[j].values[cell[j]][w] == top[w];
                if attains && *retire < top[w] {
                    let res = (field[k][w].clone() - cand).abs();
                    if res > *tol {
                        engage_region = Check::fail_res(
                            "engagement-region-identity",
                            format!("cell {cell:?}, project {j}, atom {w}"),
                            res,
                        );
                    }
                }
            }
        }
    }
    vec![dominate_retire, dominate_engage, retire_region, engage_region]
}

/// Pathwise operational-clock closed forms at one atom family:
/// the layer-cake integral `int_0^inf (1 - beta^tau(m)) dm` and the
/// discounted surrender-value series `(1-beta) sum_t beta^t N(t)`.
pub fn clock_forms<S: Scalar>(clock: &OperationalClock<S>, beta: &S) -> (Rv<S>, Rv<S>) {
    let n = clock.levels.len();
    let mut integral = Vec::with_capacity(n);
    let mut series = Vec::with_capacity(n);
    for w in 0..n {
        let lv = &clock.levels[w];
        let tm = &clock.times[w];
        let mut acc = S::zero();
        for j in 0..lv.len() {
            let below = if j + 1 < lv.len() { lv[j + 1].clone() } else { S::zero() };
            // on the open interval (below, lv[j]) the passage time is the
            // left limit at lv[j], which is the next recorded time
            acc = acc + (lv[j].clone() - below) * (S::one() - beta.pow_u(tm[j + 1]));
        }
        integral.push(acc);
        let mut sum = S::zero();
        for t in 0..clock.t_last[w] {
            sum = sum + beta.pow_u(t) * clock.n_of(t, w);
        }
        series.push((S::one() - beta.clone()) * sum);
    }
    (integral, series)
}

/// Value of the allocation problem with pathwise nonincreasing rewards:
/// both clock closed forms, conditioned at the starting cell. Rejects
/// bandits whose rewards ever increase.
pub struct DecreasingValue<S: Scalar> {
    pub integral_form: Rv<S>,
    pub series_form: Rv<S>,
    pub agree: Check<S>,
}

pub fn decreasing_value<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    start: &[usize],
) -> Result<DecreasingValue<S>> {
    let n = b.lattice.n_atoms();
    for (i, seq) in b.rewards.iter().enumerate() {
        for k in 1..seq.len() {
            for w in 0..n {
                if seq[k][w] > seq[k - 1][w] {
                    return Err(Error::invalid(format!(
                        "project {i} rewards increase at step {k}, atom {w}"
                    )));
                }
            }
        }
    }
    let clock = OperationalClock::new(b, idxs, start);
    let (pi, ps) = clock_forms(&clock, &b.beta);
    let part = b.lattice.part(start);
    let integral_form = cond_expect(b.lattice.space(), part, &pi);
    let series_form = cond_expect(b.lattice.space(), part, &ps);
    let agree = match (0..n).find(|&w| pi[w] != ps[w]) {
        None => Check::pass("clock-form-agreement"),
        Some(w) => Check::fail_res(
            "clock-form-agreement",
            format!("layer-cake and series forms differ at atom {w}"),
            (pi[w].clone() - ps[w].clone()).abs(),
        ),
    };
    Ok(DecreasingValue { integral_form, series_form, agree })
}

/// Bandit on the same lattice whose rewards are the nonincreasing fair
/// rates `(1-beta) * running-minimum index from the start cell`. Positions
/// below the start are unreachable from it; they pay the flat cap
/// `K (1-beta)` so the sequence stays nonincreasing and predictable.
pub fn surrogate_bandit<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    start: &[usize],
) -> Result<Bandit<S>> {
    let n = b.lattice.n_atoms();
    let scale = S::one() - b.beta.clone();
    let cap = b.bound.clone() * scale.clone();
    let rewards = (0..b.n_projects())
        .map(|i| {
            let env = idxs[i].lower_from(start[i]);
            (0..b.lattice.horizons()[i])
                .map(|k| {
                    if k < start[i] {
                        vec![cap.clone(); n]
                    } else {
                        (0..n).map(|w| scale.clone() * env[k - start[i]][w].clone()).collect()
                    }
                })
                .collect()
        })
        .collect();
    Bandit::new(b.lattice.clone(), rewards, b.beta.clone(), b.bound.clone(), b.tol.clone())
}

/// Surrogate value at every cell: conditional expectation of the pathwise
/// clock closed form, valid on any lattice with the two basic filtration
/// axioms (no independence needed).
pub fn surrogate_field<S: Scalar>(b: &Bandit<S>, idxs: &[IndexSequence<S>]) -> Vec<Rv<S>> {
    b.lattice
        .cells()
        .iter()
        .map(|cell| {
            let clock = OperationalClock::new(b, idxs, cell);
            let (pi, _) = clock_forms(&clock, &b.beta);
            cond_expect(b.lattice.space(), b.lattice.part(cell), &pi)
        })
        .collect()
}

/// The three routes to the general allocation value from one cell.
pub struct RouteValues<S: Scalar> {
    pub integral: Rv<S>,
    pub clock_form: Rv<S>,
    pub replay: Rv<S>,
}

/// Computes the integral route, the surrogate clock route, and the
/// synchronization-strategy replay route, with agreement checks.
pub fn general_value<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    start: &[usize],
    strat: &Strategy,
) -> (RouteValues<S>, Vec<Check<S>>) {
    let n = b.lattice.n_atoms();
    let part = b.lattice.part(start);
    let integral = value_integral(b, idxs, start, &S::zero());
    let clock = OperationalClock::new(b, idxs, start);
    let (pi, ps) = clock_forms(&clock, &b.beta);
    let clock_form = cond_expect(b.lattice.space(), part, &pi);
    let series = cond_expect(b.lattice.space(), part, &ps);
    let replay = cond_expect(b.lattice.space(), part, &reward_of(b, strat));
    let mut checks = Vec::new();
    let mut route_check = |name: &str, a: &Rv<S>, c: &Rv<S>| {
        match (0..n).find(|&w| (a[w].clone() - c[w].clone()).abs() > b.tol) {
            None => checks.push(Check::pass(name)),
            Some(w) => checks.push(Check::fail_res(
                name,
                format!("atom {w}"),
                (a[w].clone() - c[w].clone()).abs(),
            )),
        }
    };
    route_check("clock-form-agreement", &clock_form, &series);
    route_check("integral-equals-clock-route", &integral, &clock_form);
    route_check("integral-equals-replay-route", &integral, &replay);
    (RouteValues { integral, clock_form, replay }, checks)
}

/// Discounted envelope replay: `(1-beta) sum_t beta^t max_i` running
/// minimum at the strategy's positions, conditioned at the start. For an
/// index-type strategy this reprices the whole problem.
pub fn envelope_replay_value<S: Scalar>(
    b: &Bandit<S>,
    clock: &OperationalClock<S>,
    strat: &Strategy,
) -> Rv<S> {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let pos = position_table(b, strat);
    let scale = S::one() - b.beta.clone();
    let path: Rv<S> = (0..n)
        .map(|w| {
            let mut acc = S::zero();
            // positions stay exhausted beyond the last step and every later
            // envelope term is zero, so the series truncates exactly
            for t in 0..=clock.t_exh {
                let top = (0..d)
                    .map(|i| clock.env_at(i, pos[w][t][i], w))
                    .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
                    .expect("at least one project");
                acc = acc + b.beta.pow_u(t) * top;
            }
            scale.clone() * acc
        })
        .collect();
    cond_expect(b.lattice.space(), b.lattice.part(&strat.start), &path)
}

/// `Q(t) = beta^t field(T(t)) + running discounted reward`, along a
/// strategy, per atom.
pub fn q_process<S: Scalar>(b: &Bandit<S>, field: &[Rv<S>], strat: &Strategy) -> Vec<Rv<S>> {
    let n = b.lattice.n_atoms();
    let pos = position_table(b, strat);
    let steps = strat.steps();
    let mut out = Vec::with_capacity(steps + 1);
    let mut run = vec![S::zero(); n];
    for t in 0..=steps {
        let row: Rv<S> = (0..n)
            .map(|w| {
                let k = b.lattice.cell_index(&pos[w][t]);
                run[w].clone() + b.beta.pow_u(t) * field[k][w].clone()
            })
            .collect();
        out.push(row);
        if t < steps {
            for w in 0..n {
                let j = strat.paths[w][t];
                run[w] = run[w].clone()
                    + b.beta.pow_u(t) * b.rewards[j][pos[w][t][j]][w].clone();
            }
        }
    }
    out
}

/// One-step drift of the strategy-clock process against the stopped
/// information: supermartingale for every strategy; martingale when the
/// strategy is of index type and the field is the no-retirement value.
pub fn check_q_drift<S: Scalar>(
    b: &Bandit<S>,
    field: &[Rv<S>],
    strat: &Strategy,
    drift: Drift,
    tol: &S,
) -> Check<S> {
    let name = match drift {
        Drift::Martingale => "strategy-value-martingale",
        Drift::Supermartingale => "strategy-value-supermartingale",
    };
    let q = q_process(b, field, strat);
    let pos = position_table(b, strat);
    let n = b.lattice.n_atoms();
    for t in 0..strat.steps() {
        let sp = StoppingPoint { cells: (0..n).map(|w| pos[w][t].clone()).collect() };
        let part = stopped_partition(&b.lattice, &sp);
        let e = cond_expect(b.lattice.space(), &part, &q[t + 1]);
        for w in 0..n {
            let gain = e[w].clone() - q[t][w].clone();
            let bad = match drift {
                Drift::Martingale => gain.abs() > *tol,
                Drift::Supermartingale => gain > *tol,
            };
            if bad {
                return Check::fail_res(
                    name,
                    format!("one-step drift at step {t}, atom {w}"),
                    gain.abs(),
                );
            }
        }
    }
    Check::pass(name)
}

/// The martingale transform of the per-project compensators along a
/// strategy, its split into the reward gap and the discounted pivot
/// excess, and the verdicts tying them together.
pub struct Klw<S: Scalar> {
    pub k: Vec<Rv<S>>,
    pub lambda: Vec<Rv<S>>,
    pub w: Vec<Rv<S>>,
}

pub fn klw_processes<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    strat: &Strategy,
) -> Klw<S> {
    let n = b.lattice.n_atoms();
    let s = &strat.start;
    let pos = position_table(b, strat);
    let steps = strat.steps();
    let probs = projects(b);
    let comp: Vec<Vec<Rv<S>>> =
        (0..b.n_projects()).map(|i| u_process(&probs[i], &idxs[i], s[i])).collect();
    let clock = OperationalClock::new(b, idxs, s);
    let scale = S::one() - b.beta.clone();
    let mut k = vec![vec![S::zero(); n]];
    let mut lambda = vec![vec![S::zero(); n]];
    for t in 0..steps {
        let mut krow = k[t].clone();
        let mut lrow = lambda[t].clone();
        for w in 0..n {
            let j = strat.paths[w][t];
            let p = pos[w][t][j];
            let du = comp[j][p + 1 - s[j]][w].clone() - comp[j][p - s[j]][w].clone();
            krow[w] = krow[w].clone() + b.beta.pow_u(t) / b.beta.pow_u(p) * du;
            let gap = b.rewards[j][p][w].clone() - scale.clone() * clock.env_at(j, p, w);
            lrow[w] = lrow[w].clone() + b.beta.pow_u(t) * gap;
        }
        k.push(krow);
        lambda.push(lrow);
    }
    let w = (0..=steps)
        .map(|t| (0..n).map(|a| k[t][a].clone() - lambda[t][a].clone()).collect())
        .collect();
    Klw { k, lambda, w }
}

/// All bridge verdicts for the synchronization strategy: the transform is
/// a martingale of the stopped information; the excess telescopes to the
/// discounted pivot gap while the surrender value is positive and vanishes
/// after; the terminal excess is zero; the terminal gap equals the
/// difference of the two pathwise rewards; and the two rewards agree in
/// conditional expectation at the start.
pub fn check_klw<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    strat: &Strategy,
) -> Vec<Check<S>> {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let s = &strat.start;
    let tol = &b.tol;
    let pos = position_table(b, strat);
    let steps = strat.steps();
    let probs = projects(b);
    let clock = OperationalClock::new(b, idxs, s);
    let klw = klw_processes(b, idxs, strat);
    let mut checks = Vec::new();

    let mut drift = Check::pass("compensator-transform-martingale");
    'mg: for t in 0..steps {
        let sp = StoppingPoint { cells: (0..n).map(|w| pos[w][t].clone()).collect() };
        let part = stopped_partition(&b.lattice, &sp);
        let e = cond_expect(b.lattice.space(), &part, &klw.k[t + 1]);
        for w in 0..n {
            let res = (e[w].clone() - klw.k[t][w].clone()).abs();
            if res > *tol {
                drift = Check::fail_res(
                    "compensator-transform-martingale",
                    format!("one-step residual at step {t}, atom {w}"),
                    res,
                );
                break 'mg;
            }
        }
    }
    checks.push(drift);

    // pivot excess: W(t) = beta^t * (stopping value gap of the traversing
    // project) while N(t) > 0, and zero afterwards
    let mut tables: Vec<((usize, S), Vec<Rv<S>>)> = Vec::new();
    let mut gap_at = |i: usize, p: usize, w: usize, level: &S| -> S {
        let key = (i, level.clone());
        if !tables.iter().any(|(k, _)| *k == key) {
            let tab = snell(&probs[i], level);
            tables.push((key.clone(), tab));
        }
        let tab = &tables.iter().find(|(k, _)| *k == key).unwrap().1;
        tab[p][w].clone() - level.clone()
    };
    let mut tele = Check::pass("pivot-excess-telescoping");
    'tl: for w in 0..n {
        for t in 0..=steps {
            let expect = if t < clock.t_last[w] {
                let m = clock.n_of(t, w);
                let sig: Vec<usize> = (0..d).map(|i| clock.passage(i, &m, w)).collect();
                let sigm: Vec<usize> = (0..d).map(|i| clock.passage_minus(i, &m, w)).collect();
                let mut y = vec![sig.iter().zip(s).map(|(a, b)| a - b).sum::<usize>()];
                for i in 0..d {
                    y.push(y[i] + sigm[i] - sig[i]);
                }
                let k = (1..=d)
                    .find(|&k| y[k - 1] <= t && t < y[k])
                    .expect("the time lies in exactly one traversal window");
                let p = pos[w][t][k - 1];
                let level = clock.env_at(k - 1, p, w);
                b.beta.pow_u(t) * gap_at(k - 1, p, w, &level)
            } else {
                S::zero()
            };
            let res = (klw.w[t][w].clone() - expect).abs();
            if res > *tol {
                tele = Check::fail_res(
                    "pivot-excess-telescoping",
                    format!("step {t}, atom {w}"),
                    res,
                );
                break 'tl;
            }
        }
    }
    checks.push(tele);

    let terminal = &klw.w[steps];
    checks.push(match (0..n).find(|&w| terminal[w].abs() > *tol) {
        None => Check::pass("terminal-excess-zero"),
        Some(w) => Check::fail_res(
            "terminal-excess-zero",
            format!("atom {w}"),
            terminal[w].abs(),
        ),
    });

    let plain = reward_of(b, strat);
    let surrogate = surrogate_reward_of(b, &clock, strat);
    let mut bridge = Check::pass("terminal-gap-is-reward-difference");
    for w in 0..n {
        let res =
            (klw.lambda[steps][w].clone() - (plain[w].clone() - surrogate[w].clone())).abs();
        if res > *tol {
            bridge = Check::fail_res(
                "terminal-gap-is-reward-difference",
                format!("atom {w}"),
                res,
            );
            break;
        }
    }
    checks.push(bridge);

    let part = b.lattice.part(s);
    let diff: Rv<S> =
        (0..n).map(|w| plain[w].clone() - surrogate[w].clone()).collect();
    let e = cond_expect(b.lattice.space(), part, &diff);
    checks.push(match (0..n).find(|&w| e[w].abs() > *tol) {
        None => Check::pass("reward-bridge-expectation"),
        Some(w) => {
            Check::fail_res("reward-bridge-expectation", format!("atom {w}"), e[w].abs())
        }
    });

    checks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{allocation_grid, build_sync_strategy, classify_strategy};
    use crate::lattice::{build_product, Factor};
    use crate::prob::{FiniteSpace, Partition};
    use crate::scalar::Exact;
    use num_traits::{One, Zero};

    fn r(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    fn det_factor(rewards: Vec<Exact>) -> Factor<Exact> {
        let h = rewards.len();
        Factor {
            space: FiniteSpace::new(vec![Exact::one()], &Exact::zero()).unwrap(),
            filt: vec![Partition::trivial(1); h + 1],
            rewards: rewards.into_iter().map(|x| vec![x]).collect(),
        }
    }

    fn coin_factor() -> Factor<Exact> {
        Factor {
            space: FiniteSpace::new(vec![r(1, 2), r(1, 2)], &Exact::zero()).unwrap(),
            filt: vec![Partition::trivial(2), Partition::discrete(2), Partition::discrete(2)],
            rewards: vec![vec![Exact::one(), Exact::one()], vec![Exact::from_i64(2), Exact::zero()]],
        }
    }

    fn two_deterministic() -> Bandit<Exact> {
        let pb = build_product(
            &[det_factor(vec![Exact::one()]), det_factor(vec![r(3, 5)])],
            &Exact::zero(),
        )
        .unwrap();
        Bandit::new(pb.lattice, pb.rewards, r(1, 2), Exact::from_i64(2), Exact::zero()).unwrap()
    }

    fn coin_times_det() -> Bandit<Exact> {
        let pb =
            build_product(&[coin_factor(), det_factor(vec![r(3, 5)])], &Exact::zero()).unwrap();
        Bandit::new(pb.lattice, pb.rewards, r(1, 2), Exact::from_i64(4), Exact::zero()).unwrap()
    }

    #[test]
    fn product_value_on_two_deterministic_projects() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        assert_eq!(
            whittle_value(&b, &idxs, &[0, 0], &Exact::zero()).unwrap(),
            vec![r(13, 10)]
        );
        assert_eq!(
            whittle_value(&b, &idxs, &[0, 0], &Exact::one()).unwrap(),
            vec![r(31, 20)]
        );
        assert_eq!(
            whittle_value(&b, &idxs, &[0, 0], &Exact::from_i64(3)).unwrap(),
            vec![Exact::from_i64(3)]
        );
    }

    #[test]
    fn product_value_matches_backward_induction() {
        let b = coin_times_det();
        let idxs = b.project_indices().unwrap();
        for m in [Exact::zero(), Exact::one(), r(5, 2), Exact::from_i64(4), Exact::from_i64(5)] {
            let field = whittle_field(&b, &idxs, &m).unwrap();
            let solved = bellman_solve(&b, &m);
            assert_eq!(field, solved, "retirement {m}");
            assert!(check_bellman_residual(&b, &m, &field, &Exact::zero()).pass);
            for c in check_q_inequalities(&b, &idxs, &field, &m, &Exact::zero()) {
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn field_is_measurable_and_perturbation_is_localized() {
        let b = coin_times_det();
        let idxs = b.project_indices().unwrap();
        let mut field = whittle_field(&b, &idxs, &Exact::one()).unwrap();
        for (k, cell) in b.lattice.cells().iter().enumerate() {
            assert!(b.lattice.part(cell).measures(&field[k]), "cell {cell:?}");
        }
        let k0 = b.lattice.cell_index(&[1, 0]);
        field[k0][0] = field[k0][0].clone() + r(1, 100);
        let check = check_bellman_residual(&b, &Exact::one(), &field, &Exact::zero());
        assert!(!check.pass);
        assert!(check.witness.as_deref().unwrap().contains("[1, 0]"));
    }

    #[test]
    fn bellman_iteration_contracts_from_constant_field() {
        let b = coin_times_det();
        let idxs = b.project_indices().unwrap();
        let target = whittle_field(&b, &idxs, &Exact::one()).unwrap();
        let cells = b.lattice.cells().len();
        let mut field: Vec<Rv<Exact>> = vec![vec![b.bound.clone(); 2]; cells];
        for step in 1..=4 {
            field = bellman_apply(&b, &Exact::one(), &field);
            let worst = (0..cells)
                .flat_map(|k| (0..2).map(move |w| (k, w)))
                .map(|(k, w)| (field[k][w].clone() - target[k][w].clone()).abs())
                .max()
                .unwrap();
            assert!(
                worst <= r(1, 2).pow_u(step) * b.bound.clone(),
                "step {step}: residual {worst}"
            );
        }
    }

    #[test]
    fn decreasing_value_closed_forms_agree() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        let dv = decreasing_value(&b, &idxs, &[0, 0]).unwrap();
        assert!(dv.agree.pass);
        assert_eq!(dv.integral_form, vec![r(13, 10)]);
        assert_eq!(dv.series_form, vec![r(13, 10)]);
    }

    #[test]
    fn general_routes_coincide() {
        for b in [two_deterministic(), coin_times_det()] {
            let idxs = b.project_indices().unwrap();
            let strat = build_sync_strategy(&b, &idxs, &[0, 0]);
            let (routes, checks) = general_value(&b, &idxs, &[0, 0], &strat);
            for c in &checks {
                assert!(c.pass, "{c:?}");
            }
            assert_eq!(routes.integral, routes.clock_form);
            assert_eq!(routes.integral, routes.replay);
            let clock = OperationalClock::new(&b, &idxs, &[0, 0]);
            assert_eq!(envelope_replay_value(&b, &clock, &strat), routes.integral);
        }
    }

    #[test]
    fn strategy_value_process_drift() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        let field = whittle_field(&b, &idxs, &Exact::zero()).unwrap();
        let sync = build_sync_strategy(&b, &idxs, &[0, 0]);
        let grid = allocation_grid(&b, &idxs, &[0, 0]);
        let clock = OperationalClock::new(&b, &idxs, &[0, 0]);
        assert!(classify_strategy(&b, &idxs, &clock, &sync, &grid).index_type);
        let q = q_process(&b, &field, &sync);
        assert_eq!(q[0], vec![r(13, 10)]);
        assert!(check_q_drift(&b, &field, &sync, Drift::Martingale, &Exact::zero()).pass);
        let wrong = Strategy { start: vec![0, 0], paths: vec![vec![1, 0]] };
        assert!(check_q_drift(&b, &field, &wrong, Drift::Supermartingale, &Exact::zero()).pass);
        assert!(!check_q_drift(&b, &field, &wrong, Drift::Martingale, &Exact::zero()).pass);
    }

    #[test]
    fn bridge_processes_vanish_on_matched_rewards() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        let strat = build_sync_strategy(&b, &idxs, &[0, 0]);
        let klw = klw_processes(&b, &idxs, &strat);
        for t in 0..=strat.steps() {
            assert_eq!(klw.k[t], vec![Exact::zero()]);
            assert_eq!(klw.lambda[t], vec![Exact::zero()]);
            assert_eq!(klw.w[t], vec![Exact::zero()]);
        }
        for c in check_klw(&b, &idxs, &strat) {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn bridge_checks_pass_on_random_information() {
        let b = coin_times_det();
        let idxs = b.project_indices().unwrap();
        let strat = build_sync_strategy(&b, &idxs, &[0, 0]);
        for c in check_klw(&b, &idxs, &strat) {
            assert!(c.pass, "{c:?}");
        }
    }
}
