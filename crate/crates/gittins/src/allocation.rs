//! Allocation strategies for several projects on a shared lattice.
//!
//! A bandit couples `d` reward sequences to one multi-parameter lattice.
//! Each project `i` is viewed through its own one-parameter filtration
//! (the lattice partitions along axis `i`), so per-project indices and
//! stopping times are computed on the joint space.
//!
//! A strategy engages one live project per step until every project is
//! exhausted. Decisions must be adapted: atoms sharing a position and an
//! information block must make the same choice. The operational clock pairs
//! the total passage time `tau(m)` (sum of per-project first passages of
//! the running-minimum index below `m`) with its right-inverse `N(t)`, the
//! equitable surrender value. The classifier evaluates the synchronization
//! identity and its four equivalent forms, plus the index-type and
//! minimal-switching refinements, literally and atomwise.

use crate::gittins::{gittins_index, IndexSequence};
use crate::lattice::{stopped_partition, validate_stopping_point, Lattice, StoppingPoint};
use crate::prob::{Partition, Rv};
use crate::report::Check;
use crate::scalar::{close, le_tol, Scalar};
use crate::stopping::{snell, SigTime, StopProblem};
use crate::{Error, Result};

/// Several projects on one lattice. `rewards[i][k]` is the payoff for
/// project `i`'s step `k -> k+1`, as a random variable on the joint space,
/// known once project `i` has reached position `k`.
#[derive(Debug, Clone)]
pub struct Bandit<S: Scalar> {
    pub lattice: Lattice<S>,
    pub rewards: Vec<Vec<Rv<S>>>,
    pub beta: S,
    pub bound: S,
    pub tol: S,
}

impl<S: Scalar> Bandit<S> {
    pub fn new(
        lattice: Lattice<S>,
        rewards: Vec<Vec<Rv<S>>>,
        beta: S,
        bound: S,
        tol: S,
    ) -> Result<Self> {
        if rewards.len() != lattice.dim() {
            return Err(Error::invalid("one reward sequence per project is required"));
        }
        let b = Bandit { lattice, rewards, beta, bound, tol };
        let f1 = b.lattice.check_f1();
        if !f1.pass {
            return Err(Error::invalid(format!(
                "lattice partitions must refine along edges: {}",
                f1.witness.unwrap_or_default()
            )));
        }
        for i in 0..b.n_projects() {
            b.project(i)?;
        }
        Ok(b)
    }

    pub fn n_projects(&self) -> usize {
        self.rewards.len()
    }

    /// Project `i` as a stopping problem on the joint space, filtered by
    /// the axis-`i` partitions.
    pub fn project(&self, i: usize) -> Result<StopProblem<S>> {
        let h = self.lattice.horizons()[i];
        StopProblem::new(
            self.lattice.space().clone(),
            (0..=h).map(|t| self.lattice.axis_small(i, t).clone()).collect(),
            self.rewards[i].clone(),
            self.beta.clone(),
            self.bound.clone(),
            self.tol.clone(),
        )
        .map_err(|e| Error::invalid(format!("project {i}: {e}")))
    }

    pub fn project_indices(&self) -> Result<Vec<IndexSequence<S>>> {
        (0..self.n_projects())
            .map(|i| Ok(gittins_index(&self.project(i)?)))
            .collect()
    }

    /// Steps until every project is exhausted from `start`.
    pub fn exhaust_steps(&self, start: &[usize]) -> usize {
        self.lattice
            .horizons()
            .iter()
            .zip(start)
            .map(|(h, s)| h - s)
            .sum()
    }
}

/// Engagement plan: `paths[w][t]` is the project engaged at step `t` on
/// atom `w`. Every path runs from `start` to full exhaustion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    pub start: Vec<usize>,
    pub paths: Vec<Vec<usize>>,
}

impl Strategy {
    pub fn steps(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }
}

/// `positions[w][t]` = lattice cell occupied on atom `w` after `t` steps.
pub fn position_table<S: Scalar>(b: &Bandit<S>, strat: &Strategy) -> Vec<Vec<Vec<usize>>> {
    (0..b.lattice.n_atoms())
        .map(|w| {
            let mut cur = strat.start.clone();
            let mut rows = vec![cur.clone()];
            for &j in &strat.paths[w] {
                cur[j] += 1;
                rows.push(cur.clone());
            }
            rows
        })
        .collect()
}

fn group_by_block(part: &Partition, atoms: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for &w in atoms {
        let b = part.block_index(w);
        match out.iter_mut().find(|(k, _)| *k == b) {
            Some((_, v)) => v.push(w),
            None => out.push((b, vec![w])),
        }
    }
    out.into_iter().map(|(_, v)| v).collect()
}

/// Certifies the strategy structure: unit steps of live projects ending in
/// simultaneous exhaustion, adapted decisions, each time slice a valid
/// stopping point, the stopped partitions forming a filtration, and each
/// per-project count a stopping time of that project's large filtration.
pub fn validate_strategy<S: Scalar>(b: &Bandit<S>, strat: &Strategy) -> Vec<Check<S>> {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let hz = b.lattice.horizons().to_vec();
    let mut checks = Vec::new();

    if strat.start.len() != d || strat.start.iter().zip(&hz).any(|(s, h)| s > h) {
        checks.push(Check::fail("strategy-steps", "start lies outside the lattice".into()));
        return checks;
    }
    let t_exh = b.exhaust_steps(&strat.start);
    if strat.paths.len() != n {
        checks.push(Check::fail("strategy-steps", "one path per atom is required".into()));
        return checks;
    }
    for (w, path) in strat.paths.iter().enumerate() {
        if path.len() != t_exh {
            checks.push(Check::fail(
                "strategy-steps",
                format!("atom {w} has {} steps, exhaustion needs {t_exh}", path.len()),
            ));
            return checks;
        }
        let mut cur = strat.start.clone();
        for (t, &j) in path.iter().enumerate() {
            if j >= d || cur[j] >= hz[j] {
                checks.push(Check::fail(
                    "strategy-steps",
                    format!("atom {w} engages an unavailable project {j} at step {t}"),
                ));
                return checks;
            }
            cur[j] += 1;
        }
    }
    checks.push(Check::pass("strategy-steps"));
    let pos = position_table(b, strat);

    let mut adapted = None;
    'ad: for t in 0..t_exh {
        for v in 0..n {
            for w in (v + 1)..n {
                if pos[v][t] != pos[w][t] {
                    continue;
                }
                let part = b.lattice.part(&pos[v][t]);
                if part.block_index(v) == part.block_index(w)
                    && strat.paths[v][t] != strat.paths[w][t]
                {
                    adapted = Some(format!(
                        "atoms {v} and {w} share a block at step {t} but engage different projects"
                    ));
                    break 'ad;
                }
            }
        }
    }
    checks.push(match adapted {
        None => Check::pass("strategy-adapted"),
        Some(wit) => Check::fail("strategy-adapted", wit),
    });

    let mut stop_fail = None;
    let mut filt_fail = None;
    let mut prev: Option<Partition> = None;
    for t in 0..=t_exh {
        let sp = StoppingPoint { cells: (0..n).map(|w| pos[w][t].clone()).collect() };
        if let Err(e) = validate_stopping_point(&b.lattice, &sp) {
            stop_fail.get_or_insert(format!("step {t}: {e}"));
            break;
        }
        let stopped = stopped_partition(&b.lattice, &sp);
        if let Some(p) = &prev {
            if !stopped.refines(p) && filt_fail.is_none() {
                filt_fail = Some(format!("information lost from step {} to {t}", t - 1));
            }
        }
        prev = Some(stopped);
    }
    checks.push(match stop_fail {
        None => Check::pass("strategy-stopped-points"),
        Some(wit) => Check::fail("strategy-stopped-points", wit),
    });
    checks.push(match filt_fail {
        None => Check::pass("strategy-stopped-filtration"),
        Some(wit) => Check::fail("strategy-stopped-filtration", wit),
    });

    let mut axis_fail = None;
    'ax: for i in 0..d {
        for t in 0..=t_exh {
            for lvl in strat.start[i]..=hz[i] {
                let set: Vec<usize> = (0..n).filter(|&w| pos[w][t][i] == lvl).collect();
                if !set.is_empty() && !b.lattice.axis_large(i, lvl).saturates(&set) {
                    axis_fail = Some(format!(
                        "project {i} count at step {t} is not resolved at its own level {lvl}"
                    ));
                    break 'ax;
                }
            }
        }
    }
    checks.push(match axis_fail {
        None => Check::pass("strategy-axis-stopping-times"),
        Some(wit) => Check::fail("strategy-axis-stopping-times", wit),
    });

    checks
}

/// Total passage time `tau(m)`, its right-inverse surrender value `N(t)`,
/// and the per-atom jump structure: strictly decreasing positive levels
/// `m_1 > ... > m_q` with times `t_0 = 0 < ... < t_q` such that `N` holds
/// level `m_{j+1}` on `[t_j, t_{j+1})` and vanishes from `t_q` on.
#[derive(Debug, Clone)]
pub struct OperationalClock<S: Scalar> {
    pub start: Vec<usize>,
    pub t_exh: usize,
    /// `env[i][p - start[i]][w]` = running-minimum index of project `i` at
    /// position `p`, from `start[i]`.
    env: Vec<Vec<Rv<S>>>,
    pub levels: Vec<Vec<S>>,
    pub times: Vec<Vec<usize>>,
    pub t_last: Vec<usize>,
}

impl<S: Scalar> OperationalClock<S> {
    pub fn new(b: &Bandit<S>, idxs: &[IndexSequence<S>], start: &[usize]) -> Self {
        let n = b.lattice.n_atoms();
        let d = b.n_projects();
        let env: Vec<Vec<Rv<S>>> = (0..d).map(|i| idxs[i].lower_from(start[i])).collect();
        let t_exh = b.exhaust_steps(start);
        let mut levels = Vec::with_capacity(n);
        let mut times = Vec::with_capacity(n);
        let mut t_last = Vec::with_capacity(n);
        for w in 0..n {
            let mut lv: Vec<S> = Vec::new();
            for rows in &env {
                for row in rows {
                    if row[w] > S::zero() && !lv.contains(&row[w]) {
                        lv.push(row[w].clone());
                    }
                }
            }
            lv.sort_by(|a, b| b.partial_cmp(a).expect("total order on scalars"));
            let passage = |m: &S| -> usize {
                (0..d)
                    .map(|i| {
                        env[i]
                            .iter()
                            .position(|row| row[w] <= *m)
                            .expect("the running minimum reaches zero")
                    })
                    .sum()
            };
            let last: usize = (0..d)
                .map(|i| {
                    env[i]
                        .iter()
                        .position(|row| row[w].is_zero())
                        .expect("the running minimum reaches zero")
                })
                .sum();
            let mut tm = Vec::with_capacity(lv.len() + 1);
            for m in &lv {
                tm.push(passage(m));
            }
            tm.push(last);
            // jump-structure invariants: passage starts at zero, each level
            // is a genuine jump, and the step function right-inverts passage
            assert!(tm.first().is_none_or(|&t0| t0 == 0), "first passage level reached at once");
            assert!(tm.windows(2).all(|p| p[0] < p[1]), "every level is a genuine jump");
            for t in 0..=t_exh {
                let step = match tm.iter().rposition(|&tj| tj <= t) {
                    Some(j) if j < lv.len() => lv[j].clone(),
                    _ => S::zero(),
                };
                let inf = lv
                    .iter()
                    .rev()
                    .find(|m| passage(m) <= t)
                    .cloned()
                    .unwrap_or_else(S::zero);
                let inf = if t >= last { S::zero() } else { inf };
                assert!(step == inf, "surrender value right-inverts the passage time");
            }
            levels.push(lv);
            times.push(tm);
            t_last.push(last);
        }
        OperationalClock { start: start.to_vec(), t_exh, env, levels, times, t_last }
    }

    /// Running-minimum index of project `i` at absolute position `pos`.
    pub fn env_at(&self, i: usize, pos: usize, w: usize) -> S {
        self.env[i][pos - self.start[i]][w].clone()
    }

    /// Borrowed variant of [`env_at`](Self::env_at) for hot loops.
    pub fn env_ref(&self, i: usize, pos: usize, w: usize) -> &S {
        &self.env[i][pos - self.start[i]][w]
    }

    /// First position of project `i` whose running minimum is at or below
    /// `m > 0` (absolute).
    pub fn passage(&self, i: usize, m: &S, w: usize) -> usize {
        self.start[i]
            + self.env[i]
                .iter()
                .position(|row| row[w] <= *m)
                .expect("the running minimum reaches zero")
    }

    /// Left limit: first position strictly below `m > 0` (absolute).
    pub fn passage_minus(&self, i: usize, m: &S, w: usize) -> usize {
        self.start[i]
            + self.env[i]
                .iter()
                .position(|row| row[w] < *m)
                .expect("the running minimum reaches zero")
    }

    /// Total operational passage time; never finite at `m = 0`.
    pub fn tau(&self, m: &S, w: usize) -> SigTime {
        if m.is_zero() {
            return SigTime::Inf;
        }
        SigTime::Fin((0..self.env.len()).map(|i| self.passage(i, m, w) - self.start[i]).sum())
    }

    /// Left limit of the passage time at `m > 0`.
    pub fn tau_minus(&self, m: &S, w: usize) -> usize {
        (0..self.env.len()).map(|i| self.passage_minus(i, m, w) - self.start[i]).sum()
    }

    /// Surrender value `N(t)`: the smallest reward for which immediate
    /// retirement is already optimal after `t` steps.
    pub fn n_of(&self, t: usize, w: usize) -> S {
        match self.times[w].iter().rposition(|&tj| tj <= t) {
            Some(j) if j < self.levels[w].len() => self.levels[w][j].clone(),
            _ => S::zero(),
        }
    }
}

/// Grid of engagement charges that resolves every statement quantified over
/// `m > 0`: all positive per-atom index values across projects, their
/// consecutive midpoints, a point below the least positive value, and one
/// past the reward bound. Both sides of each checked identity are step
/// functions of `m` with breakpoints among index values, so the grid is
/// exhaustive.
pub fn allocation_grid<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    start: &[usize],
) -> Vec<S> {
    let n = b.lattice.n_atoms();
    let mut vals: Vec<S> = Vec::new();
    for (i, idx) in idxs.iter().enumerate() {
        for theta in start[i]..=idx.horizon() {
            for w in 0..n {
                let v = idx.values[theta][w].clone();
                if v > S::zero() && !vals.contains(&v) {
                    vals.push(v);
                }
            }
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("total order on scalars"));
    let two = S::from_i64(2);
    let mut grid = Vec::new();
    if let Some(first) = vals.first() {
        grid.push(first.clone() / two.clone());
    }
    for (k, v) in vals.iter().enumerate() {
        grid.push(v.clone());
        if let Some(next) = vals.get(k + 1) {
            grid.push((v.clone() + next.clone()) / two.clone());
        }
    }
    grid.push(b.bound.clone() + S::one());
    grid
}

/// The strategy-class predicates, evaluated literally and atomwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyFlags {
    /// Synchronization identity: engaged time splits as
    /// `sum_i min(T_i(t)-s_i, passage_i(m)-s_i) = min(t, tau(m))`.
    pub sync: bool,
    /// Same identity with left limits in `m`.
    pub sync_left: bool,
    /// At `t = tau(m)` every project sits exactly at its passage position.
    pub per_m_split: bool,
    /// `passage_i(N(t)) <= T_i(t) <= passage_i(N(t)-)`, read through the
    /// running minimum so the `N(t) = 0` tail stays meaningful.
    pub bracket: bool,
    /// `max_i` running minimum at the current positions equals `N(t)`.
    pub dual_opt: bool,
    /// The engaged project attains the maximal running minimum.
    pub lower_index: bool,
    /// The engaged project attains the maximal current index.
    pub index_type: bool,
    /// Stay on the engaged project while it still attains the maximal
    /// running minimum after the step.
    pub minimal_switching: bool,
}

pub fn classify_strategy<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    clock: &OperationalClock<S>,
    strat: &Strategy,
    grid: &[S],
) -> StrategyFlags {
    ClassifyContext::new(b, idxs, clock, grid).classify(strat)
}

/// Strategy-independent data for classifying many strategies against one
/// clock and grid: first-passage positions and times per (level, atom),
/// and the surrender value per (time, atom). Build once per sweep.
pub struct ClassifyContext<'a, S: Scalar> {
    b: &'a Bandit<S>,
    idxs: &'a [IndexSequence<S>],
    clock: &'a OperationalClock<S>,
    /// `sig[g][w]` / `sigm[g][w]`: two-sided passage positions for the
    /// `g`-th positive grid level.
    sig: Vec<Vec<Vec<usize>>>,
    sigm: Vec<Vec<Vec<usize>>>,
    nlev: Vec<Vec<S>>,
}

impl<'a, S: Scalar> ClassifyContext<'a, S> {
    pub fn new(
        b: &'a Bandit<S>,
        idxs: &'a [IndexSequence<S>],
        clock: &'a OperationalClock<S>,
        grid: &'a [S],
    ) -> Self {
        let n = b.lattice.n_atoms();
        let d = b.n_projects();
        let positive: Vec<&S> = grid.iter().filter(|m| **m > S::zero()).collect();
        let sig: Vec<Vec<Vec<usize>>> = positive
            .iter()
            .map(|m| {
                (0..n).map(|w| (0..d).map(|i| clock.passage(i, m, w)).collect()).collect()
            })
            .collect();
        let sigm: Vec<Vec<Vec<usize>>> = positive
            .iter()
            .map(|m| {
                (0..n)
                    .map(|w| (0..d).map(|i| clock.passage_minus(i, m, w)).collect())
                    .collect()
            })
            .collect();
        let nlev: Vec<Vec<S>> =
            (0..=clock.t_exh).map(|t| (0..n).map(|w| clock.n_of(t, w)).collect()).collect();
        ClassifyContext { b, idxs, clock, sig, sigm, nlev }
    }

    pub fn classify(&self, strat: &Strategy) -> StrategyFlags {
        let b = self.b;
        let clock = self.clock;
        let n = b.lattice.n_atoms();
        let d = b.n_projects();
        let s = &strat.start;
        let t_exh = clock.t_exh;
        let pos = position_table(b, strat);
        let tol = &b.tol;

        let mut f = StrategyFlags {
            sync: true,
            sync_left: true,
            per_m_split: true,
            bracket: true,
            dual_opt: true,
            lower_index: true,
            index_type: true,
            minimal_switching: true,
        };

        for w in 0..n {
            for g in 0..self.sig.len() {
                let sig = &self.sig[g][w];
                let sigm = &self.sigm[g][w];
                let tau: usize = sig.iter().zip(s).map(|(a, b)| a - b).sum();
                let taum: usize = sigm.iter().zip(s).map(|(a, b)| a - b).sum();
                for t in 0..=t_exh {
                    let lhs: usize =
                        (0..d).map(|i| (pos[w][t][i] - s[i]).min(sig[i] - s[i])).sum();
                    if lhs != t.min(tau) {
                        f.sync = false;
                    }
                    let lhsm: usize =
                        (0..d).map(|i| (pos[w][t][i] - s[i]).min(sigm[i] - s[i])).sum();
                    if lhsm != t.min(taum) {
                        f.sync_left = false;
                    }
                }
                if (0..d).any(|i| pos[w][tau][i] != sig[i]) {
                    f.per_m_split = false;
                }
            }

            for t in 0..=t_exh {
                let m = &self.nlev[t][w];
                let mut top: Option<&S> = None;
                for i in 0..d {
                    let p = pos[w][t][i];
                    let lo = clock.env_ref(i, p, w);
                    if !le_tol(lo, m, tol) || (p > s[i] && *clock.env_ref(i, p - 1, w) < *m) {
                        f.bracket = false;
                    }
                    if top.is_none_or(|b| *lo > *b) {
                        top = Some(lo);
                    }
                }
                if !close(top.expect("at least one project"), m, tol) {
                    f.dual_opt = false;
                }
            }

            for t in 0..t_exh {
                let j = strat.paths[w][t];
                let cur_max = (0..d)
                    .map(|i| clock.env_ref(i, pos[w][t][i], w))
                    .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
                    .expect("at least one project");
                if !close(clock.env_ref(j, pos[w][t][j], w), cur_max, tol) {
                    f.lower_index = false;
                }
                let idx_max = (0..d)
                    .map(|i| &self.idxs[i].values[pos[w][t][i]][w])
                    .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
                    .expect("at least one project");
                if !close(&self.idxs[j].values[pos[w][t][j]][w], idx_max, tol) {
                    f.index_type = false;
                }
                if t + 1 < t_exh && pos[w][t + 1][j] < b.lattice.horizons()[j] {
                    let next_max = (0..d)
                        .map(|i| clock.env_ref(i, pos[w][t + 1][i], w))
                        .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
                        .expect("at least one project");
                    if close(clock.env_ref(j, pos[w][t + 1][j], w), next_max, tol)
                        && strat.paths[w][t + 1] != j
                    {
                        f.minimal_switching = false;
                    }
                }
            }
        }
        f
    }
}

pub fn satisfies_synchronization<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    clock: &OperationalClock<S>,
    strat: &Strategy,
    grid: &[S],
) -> bool {
    classify_strategy(b, idxs, clock, strat, grid).sync
}

/// The proven implications between the strategy classes, as checks on one
/// classified strategy: the five synchronization forms agree with each
/// other and with their left-limit variant; index type forces them; and
/// synchronization plus minimal switching forces index type.
pub fn check_flag_coherence<S: Scalar>(f: &StrategyFlags) -> Vec<Check<S>> {
    let five = [f.sync, f.per_m_split, f.bracket, f.dual_opt, f.lower_index];
    let mut checks = Vec::new();
    checks.push(if five.iter().all(|&x| x == five[0]) {
        Check::pass("five-way-equivalence")
    } else {
        Check::fail(
            "five-way-equivalence",
            format!(
                "sync={} split={} bracket={} dual={} lower={}",
                five[0], five[1], five[2], five[3], five[4]
            ),
        )
    });
    checks.push(if f.sync == f.sync_left {
        Check::pass("left-limit-agreement")
    } else {
        Check::fail(
            "left-limit-agreement",
            format!("sync={} but left-limit form={}", f.sync, f.sync_left),
        )
    });
    checks.push(if !f.index_type || f.sync {
        Check::pass("index-type-implies-synchronization")
    } else {
        Check::fail(
            "index-type-implies-synchronization",
            "index type without synchronization".into(),
        )
    });
    checks.push(if !(f.sync && f.minimal_switching) || f.index_type {
        Check::pass("synchronization-and-minimal-switching-implies-index-type")
    } else {
        Check::fail(
            "synchronization-and-minimal-switching-implies-index-type",
            "synchronized minimal-switching strategy is not of index type".into(),
        )
    });
    checks
}

/// For every valid strategy the maximal running minimum dominates the
/// surrender value; equality characterizes synchronization.
pub fn check_dual_inequality<S: Scalar>(
    b: &Bandit<S>,
    clock: &OperationalClock<S>,
    strat: &Strategy,
) -> Check<S> {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let pos = position_table(b, strat);
    for w in 0..n {
        for t in 0..=clock.t_exh {
            let top = (0..d)
                .map(|i| clock.env_at(i, pos[w][t][i], w))
                .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
                .expect("at least one project");
            let m = clock.n_of(t, w);
            if !le_tol(&m, &top, &b.tol) {
                return Check::fail_res(
                    "surrender-value-dominated",
                    format!("running-minimum maximum falls below the surrender value at step {t}, atom {w}"),
                    m - top,
                );
            }
        }
    }
    Check::pass("surrender-value-dominated")
}

/// Explicit synchronization-type strategy. While the surrender value is
/// positive, positions follow the passage times of the level `N(t)`:
/// projects below the pivot sit at their left-limit passage, the pivot
/// traverses its jump one step at a time (projects in numeric order), and
/// the rest wait at the right passage. Once every index has hit zero the
/// lowest-numbered live project is engaged; any choice keeps the
/// synchronization identity there.
pub fn build_sync_strategy<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    start: &[usize],
) -> Strategy {
    let clock = OperationalClock::new(b, idxs, start);
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let hz = b.lattice.horizons().to_vec();
    let t_exh = clock.t_exh;
    let mut paths: Vec<Vec<usize>> = vec![Vec::with_capacity(t_exh); n];
    for w in 0..n {
        let mut prev: Vec<usize> = start.to_vec();
        for t in 1..=t_exh {
            let m = clock.n_of(t, w);
            // positions at or below the level, in traversal windows; at
            // level zero the left-limit passage is exhaustion
            let sig: Vec<usize> = (0..d).map(|i| clock.passage(i, &m, w)).collect();
            let sigm: Vec<usize> = if m.is_zero() {
                hz.clone()
            } else {
                (0..d).map(|i| clock.passage_minus(i, &m, w)).collect()
            };
            let mut y = vec![sig.iter().zip(start).map(|(a, b)| a - b).sum::<usize>()];
            for i in 0..d {
                y.push(y[i] + sigm[i] - sig[i]);
            }
            let cur: Vec<usize> = if t >= y[d] {
                sigm.clone()
            } else {
                let k = (1..=d)
                    .find(|&k| y[k - 1] <= t && t < y[k])
                    .expect("the time lies in exactly one traversal window");
                (0..d)
                    .map(|i| {
                        if i + 1 < k {
                            sigm[i]
                        } else if i + 1 == k {
                            sig[i] + (t - y[k - 1])
                        } else {
                            sig[i]
                        }
                    })
                    .collect()
            };
            let j = (0..d)
                .find(|&j| cur[j] == prev[j] + 1)
                .expect("positions advance by one unit step");
            assert!(
                (0..d).all(|i| cur[i] == prev[i] + usize::from(i == j)),
                "positions advance by one unit step"
            );
            paths[w].push(j);
            prev = cur;
        }
    }
    Strategy { start: start.to_vec(), paths }
}

/// Greedy index strategy: at each decision node engage a live project with
/// maximal current index. Ties go to the lowest project number; with
/// `sticky` the previously engaged project wins ties it still attains.
pub fn build_index_strategy<S: Scalar>(
    b: &Bandit<S>,
    idxs: &[IndexSequence<S>],
    start: &[usize],
    sticky: bool,
) -> Strategy {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let hz = b.lattice.horizons().to_vec();
    let t_exh = b.exhaust_steps(start);
    let mut paths: Vec<Vec<usize>> = vec![vec![0; t_exh]; n];
    let all: Vec<usize> = (0..n).collect();
    let mut stack: Vec<(Vec<usize>, Vec<usize>, usize, Option<usize>)> =
        group_by_block(b.lattice.part(start), &all)
            .into_iter()
            .map(|atoms| (start.to_vec(), atoms, 0, None))
            .collect();
    while let Some((cell, atoms, t, prev)) = stack.pop() {
        if t == t_exh {
            continue;
        }
        let w0 = atoms[0];
        let live: Vec<usize> = (0..d).filter(|&j| cell[j] < hz[j]).collect();
        let best = live
            .iter()
            .map(|&j| idxs[j].values[cell[j]][w0].clone())
            .max_by(|a, b| a.partial_cmp(b).expect("total order on scalars"))
            .expect("some project is live");
        let tied: Vec<usize> =
            live.into_iter().filter(|&j| idxs[j].values[cell[j]][w0] == best).collect();
        let j = match prev {
            Some(p) if sticky && tied.contains(&p) => p,
            _ => tied[0],
        };
        for &w in &atoms {
            paths[w][t] = j;
        }
        let mut nc = cell;
        nc[j] += 1;
        for child in group_by_block(b.lattice.part(&nc), &atoms) {
            stack.push((nc.clone(), child, t + 1, Some(j)));
        }
    }
    Strategy { start: start.to_vec(), paths }
}

/// Pathwise discounted reward of running the strategy to exhaustion;
/// engaging project `j` at calendar `t` from position `p` pays
/// `beta^t * rewards[j][p]`.
pub fn reward_of<S: Scalar>(b: &Bandit<S>, strat: &Strategy) -> Rv<S> {
    let pos = position_table(b, strat);
    (0..b.lattice.n_atoms())
        .map(|w| {
            let mut acc = S::zero();
            let mut disc = S::one();
            for (t, &j) in strat.paths[w].iter().enumerate() {
                acc = acc + disc.clone() * b.rewards[j][pos[w][t][j]][w].clone();
                if t + 1 < strat.paths[w].len() {
                    disc = disc * b.beta.clone();
                }
            }
            acc
        })
        .collect()
}

/// Pathwise reward after replacing each project's payoffs by the
/// nonincreasing fair-rate sequence: engaging project `j` at calendar `t`
/// pays `beta^t * (1 - beta) * lower_j(start_j, T_j(t))`.
pub fn surrogate_reward_of<S: Scalar>(
    b: &Bandit<S>,
    clock: &OperationalClock<S>,
    strat: &Strategy,
) -> Rv<S> {
    let pos = position_table(b, strat);
    let scale = S::one() - b.beta.clone();
    (0..b.lattice.n_atoms())
        .map(|w| {
            let mut acc = S::zero();
            let mut disc = S::one();
            for (t, &j) in strat.paths[w].iter().enumerate() {
                acc = acc + disc.clone() * scale.clone() * clock.env_at(j, pos[w][t][j], w);
                if t + 1 < strat.paths[w].len() {
                    disc = disc * b.beta.clone();
                }
            }
            acc
        })
        .collect()
}

/// For the synchronization strategy, a project parked outside its own
/// traversal window carries no excess value: the project's stopping value
/// at retirement level equal to its running minimum is the level itself.
/// Checked on every window of every constancy interval of the surrender
/// value.
pub fn check_idle_zero_gap<S: Scalar>(
    b: &Bandit<S>,
    clock: &OperationalClock<S>,
    strat: &Strategy,
) -> Result<Check<S>> {
    let n = b.lattice.n_atoms();
    let d = b.n_projects();
    let s = &strat.start;
    let pos = position_table(b, strat);
    let mut tables: Vec<((usize, S), Vec<Rv<S>>)> = Vec::new();
    let mut projects: Vec<StopProblem<S>> = Vec::new();
    for i in 0..d {
        projects.push(b.project(i)?);
    }
    for w in 0..n {
        for u in 0..clock.t_last[w] {
            let m = clock.n_of(u, w);
            let sig: Vec<usize> = (0..d).map(|i| clock.passage(i, &m, w)).collect();
            let sigm: Vec<usize> = (0..d).map(|i| clock.passage_minus(i, &m, w)).collect();
            let mut y = vec![sig.iter().zip(s).map(|(a, b)| a - b).sum::<usize>()];
            for i in 0..d {
                y.push(y[i] + sigm[i] - sig[i]);
            }
            for i in 0..d {
                let in_window =
                    |t: usize| (y[0] <= t && t <= y[i]) || (y[i + 1] <= t && t <= *y.last().unwrap());
                for t in (0..=clock.t_exh).filter(|&t| in_window(t)) {
                    let p = pos[w][t][i];
                    let level = clock.env_at(i, p, w);
                    let key = (i, level.clone());
                    let table = match tables.iter().find(|(k, _)| *k == key) {
                        Some((_, tab)) => tab,
                        None => {
                            let tab = snell(&projects[i], &level);
                            tables.push((key.clone(), tab));
                            &tables.last().unwrap().1
                        }
                    };
                    let gap = table[p][w].clone() - level;
                    if gap.abs() > b.tol {
                        return Ok(Check::fail_res(
                            "idle-project-zero-gap",
                            format!("project {i} holds excess value at step {t}, atom {w}"),
                            gap.abs(),
                        ));
                    }
                }
            }
        }
    }
    Ok(Check::pass("idle-project-zero-gap"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_product, Factor};
    use crate::prob::FiniteSpace;
    use crate::report::Check;
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
        let pb = build_product(&[coin_factor(), det_factor(vec![r(3, 5)])], &Exact::zero())
            .unwrap();
        Bandit::new(pb.lattice, pb.rewards, r(1, 2), Exact::from_i64(4), Exact::zero()).unwrap()
    }

    fn all_pass(checks: &[Check<Exact>]) -> bool {
        checks.iter().all(|c| c.pass)
    }

    #[test]
    fn clock_on_two_deterministic_projects() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        assert_eq!(idxs[0].values[0], vec![Exact::from_i64(2)]);
        assert_eq!(idxs[1].values[0], vec![r(6, 5)]);
        let clock = OperationalClock::new(&b, &idxs, &[0, 0]);
        assert_eq!(clock.levels[0], vec![Exact::from_i64(2), r(6, 5)]);
        assert_eq!(clock.times[0], vec![0, 1, 2]);
        assert_eq!(clock.t_last[0], 2);
        assert_eq!(clock.tau(&Exact::one(), 0), SigTime::Fin(2));
        assert_eq!(clock.tau(&r(3, 2), 0), SigTime::Fin(1));
        assert_eq!(clock.tau(&Exact::from_i64(2), 0), SigTime::Fin(0));
        assert_eq!(clock.tau(&Exact::zero(), 0), SigTime::Inf);
        assert_eq!(clock.n_of(0, 0), Exact::from_i64(2));
        assert_eq!(clock.n_of(1, 0), r(6, 5));
        assert_eq!(clock.n_of(2, 0), Exact::zero());
        assert_eq!(clock.n_of(7, 0), Exact::zero());
    }

    #[test]
    fn sync_strategy_engages_higher_index_first() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        let strat = build_sync_strategy(&b, &idxs, &[0, 0]);
        assert_eq!(strat.paths, vec![vec![0, 1]]);
        assert!(all_pass(&validate_strategy(&b, &strat)));
        assert_eq!(reward_of(&b, &strat), vec![r(13, 10)]);
        let clock = OperationalClock::new(&b, &idxs, &[0, 0]);
        let grid = allocation_grid(&b, &idxs, &[0, 0]);
        let flags = classify_strategy(&b, &idxs, &clock, &strat, &grid);
        assert!(flags.sync && flags.per_m_split && flags.bracket);
        assert!(flags.dual_opt && flags.lower_index);
        assert!(flags.index_type && flags.minimal_switching);
        assert!(all_pass(&check_flag_coherence::<Exact>(&flags)));
        assert!(check_dual_inequality(&b, &clock, &strat).pass);
        assert!(check_idle_zero_gap(&b, &clock, &strat).unwrap().pass);
    }

    #[test]
    fn wrong_order_strategy_fails_all_five_forms() {
        let b = two_deterministic();
        let idxs = b.project_indices().unwrap();
        let strat = Strategy { start: vec![0, 0], paths: vec![vec![1, 0]] };
        assert!(all_pass(&validate_strategy(&b, &strat)));
        assert_eq!(reward_of(&b, &strat), vec![r(11, 10)]);
        let clock = OperationalClock::new(&b, &idxs, &[0, 0]);
        let grid = allocation_grid(&b, &idxs, &[0, 0]);
        let flags = classify_strategy(&b, &idxs, &clock, &strat, &grid);
        assert!(!flags.sync && !flags.per_m_split && !flags.bracket);
        assert!(!flags.dual_opt && !flags.lower_index && !flags.index_type);
        assert!(all_pass(&check_flag_coherence::<Exact>(&flags)));
        assert!(check_dual_inequality(&b, &clock, &strat).pass);
    }

    #[test]
    fn single_project_clock_reduces_to_envelope() {
        let pb = build_product(&[coin_factor()], &Exact::zero()).unwrap();
        let b =
            Bandit::new(pb.lattice, pb.rewards, r(1, 2), Exact::from_i64(4), Exact::zero()).unwrap();
        let idxs = b.project_indices().unwrap();
        let clock = OperationalClock::new(&b, &idxs, &[0]);
        let lower = idxs[0].lower_from(0);
        for w in 0..2 {
            for t in 0..=2 {
                assert_eq!(clock.n_of(t, w), lower[t][w], "t={t} w={w}");
            }
        }
        let strat = Strategy { start: vec![0], paths: vec![vec![0, 0], vec![0, 0]] };
        let grid = allocation_grid(&b, &idxs, &[0]);
        let flags = classify_strategy(&b, &idxs, &clock, &strat, &grid);
        assert!(flags.sync && flags.index_type);
        assert!(all_pass(&check_flag_coherence::<Exact>(&flags)));
    }

    #[test]
    fn unadapted_decision_is_rejected() {
        let b = coin_times_det();
        let strat = Strategy {
            start: vec![0, 0],
            paths: vec![vec![0, 0, 1], vec![1, 0, 0]],
        };
        let checks = validate_strategy(&b, &strat);
        let adapted = checks.iter().find(|c| c.name == "strategy-adapted").unwrap();
        assert!(!adapted.pass);
        assert!(adapted.witness.as_deref().unwrap().contains("step 0"));
    }

    #[test]
    fn identical_projects_traverse_in_numeric_order() {
        let pb = build_product(
            &[det_factor(vec![Exact::one()]), det_factor(vec![Exact::one()])],
            &Exact::zero(),
        )
        .unwrap();
        let b =
            Bandit::new(pb.lattice, pb.rewards, r(1, 2), Exact::from_i64(2), Exact::zero()).unwrap();
        let idxs = b.project_indices().unwrap();
        let strat = build_sync_strategy(&b, &idxs, &[0, 0]);
        assert_eq!(strat.paths, vec![vec![0, 1]]);
    }

    #[test]
    fn index_and_sync_strategies_agree_on_coin_product() {
        let b = coin_times_det();
        let idxs = b.project_indices().unwrap();
        let sync = build_sync_strategy(&b, &idxs, &[0, 0]);
        let greedy = build_index_strategy(&b, &idxs, &[0, 0], false);
        assert_eq!(sync.paths, vec![vec![0, 0, 1], vec![0, 1, 0]]);
        assert_eq!(greedy.paths, sync.paths);
        assert!(all_pass(&validate_strategy(&b, &sync)));
        let clock = OperationalClock::new(&b, &idxs, &[0, 0]);
        let grid = allocation_grid(&b, &idxs, &[0, 0]);
        let flags = classify_strategy(&b, &idxs, &clock, &sync, &grid);
        assert!(flags.sync && flags.index_type && flags.minimal_switching);
        assert!(all_pass(&check_flag_coherence::<Exact>(&flags)));
        assert!(check_idle_zero_gap(&b, &clock, &sync).unwrap().pass);
    }
}
