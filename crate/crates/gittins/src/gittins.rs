//! Dynamic allocation indices for a single project.
//!
//! The index at time `t` is the smallest retirement reward whose value is
//! the reward itself: `M(t) = sup { m : V(t; m) > m }`, computed per block
//! of the time-`t` sigma-algebra. Two independent computations are provided.
//!
//! `gittins_index` solves `V(t; m) = m` on each block. In exact arithmetic
//! it iterates `m <- m + phi / (1 - D)` from `m = 0`, where
//! `phi = V(t; m) - m` and `D` is the conditional expected discount to the
//! tie-stopping time. Since `phi` is convex, piecewise linear and decreasing
//! in `m` with right slope `D - 1`, each step lands on the root of the
//! current linear piece, so the iteration reaches the exact root from below
//! in at most one step per piece. In floating point the root is bisected to
//! a fixed absolute width instead.
//!
//! `gittins_forward_induction` maximizes the fair charge per unit of
//! discounted time over every stopping rule starting strictly after `t`:
//! `(1 - beta) M(t)` equals the largest ratio of expected discounted reward
//! to expected discounted time. It enumerates rules by brute force and
//! shares no code with the recursion above.

use crate::oracle::enumerate_stopping_rules;
use crate::prob::{cond_expect, Rv};
use crate::report::Check;
use crate::scalar::{close, Scalar};
use crate::stopping::{sigma_tie, snell, snell_value, sigma_opt, SigTime, StopProblem};
use crate::Result;

/// Index values `M(t)` atomwise for `t = 0..=horizon`; `M(horizon) = 0` and
/// the index is measurable at its own time.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSequence<S: Scalar> {
    pub values: Vec<Rv<S>>,
}

impl<S: Scalar> IndexSequence<S> {
    /// `M(t)`, zero at and beyond the horizon boundary stored in the table.
    pub fn at(&self, t: usize) -> Rv<S> {
        if t < self.values.len() {
            self.values[t].clone()
        } else {
            vec![S::zero(); self.values[0].len()]
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    /// Running minimum `min_{t <= u <= theta} M(u)` for `theta = t..=H`,
    /// indexed `[theta - t]`.
    pub fn lower_from(&self, t: usize) -> Vec<Rv<S>> {
        let h = self.horizon();
        let n = self.values[0].len();
        let mut out = Vec::with_capacity(h - t + 1);
        let mut run = self.values[t.min(h)].clone();
        for theta in t..=h {
            for w in 0..n {
                if self.values[theta][w] < run[w] {
                    run[w] = self.values[theta][w].clone();
                }
            }
            out.push(run.clone());
        }
        out
    }
}

/// Exact (or bisected) index from the stopping recursion, blockwise.
pub fn gittins_index<S: Scalar>(prob: &StopProblem<S>) -> IndexSequence<S> {
    let h = prob.horizon();
    let n = prob.space.len();
    let mut values = Vec::with_capacity(h + 1);
    for t in 0..=h {
        let mut row = vec![S::zero(); n];
        if t < h {
            for block in prob.part(t).blocks() {
                let m = if S::EXACT {
                    newton_root(prob, t, block)
                } else {
                    bisect_root(prob, t, block)
                };
                for &w in block {
                    row[w] = m.clone();
                }
            }
        }
        values.push(row);
    }
    IndexSequence { values }
}

/// Newton iteration on the piecewise-linear excess `phi(m) = V(t;m) - m`
/// from below: each step uses the exact piece slope `-(1 - E[beta^sigma])`,
/// so from inside the final piece one step lands on the root exactly.
fn newton_root<S: Scalar>(prob: &StopProblem<S>, t: usize, block: &[usize]) -> S {
    let w0 = block[0];
    let mut m = S::zero();
    // one step per linear piece of phi, plus slack
    let cap = 16 + 4 * (prob.horizon() + 1) * prob.space.len();
    for _ in 0..cap {
        let table = snell(prob, &m);
        let phi = table[t][w0].clone() - m.clone();
        if phi <= S::zero() || close(&table[t][w0], &m, &prob.tol) {
            return m;
        }
        let sig = sigma_tie(prob, &table, t, &m);
        let disc: Rv<S> = sig.iter().map(|&s| prob.beta.pow_u(s - t)).collect();
        let d = cond_expect(&prob.space, prob.part(t), &disc)[w0].clone();
        if d >= S::one() {
            return m;
        }
        m = m + phi / (S::one() - d);
    }
    unreachable!("index iteration exceeded the piece bound");
}

/// Float-mode root: bisection on `m` to width `1e-12 (1 + K)`. The excess
/// `V(t;m) - m` is exactly zero at and above the root (the recursion
/// returns the retirement branch), so the sign of the excess is a sound
/// bracket predicate without any tolerance cushion.
fn bisect_root<S: Scalar>(prob: &StopProblem<S>, t: usize, block: &[usize]) -> S {
    let w0 = block[0];
    let two = S::from_i64(2);
    let phi_at = |m: &S| snell_value(prob, t, m)[w0].clone() - m.clone();
    if phi_at(&S::zero()) <= S::zero() {
        return S::zero();
    }
    let mut lo = S::zero();
    let mut hi = prob.bound.clone();
    let eps = S::from_ratio(1, 1_000_000_000_000) * (S::one() + prob.bound.clone());
    for _ in 0..200 {
        if hi.clone() - lo.clone() <= eps {
            break;
        }
        let mid = (lo.clone() + hi.clone()) / two.clone();
        if phi_at(&mid) > S::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}

/// Fair-charge index by brute-force rule enumeration, blockwise:
/// `(1 - beta) M(t) = max over rules tau >= t+1` of
/// `E[sum_{u=t}^{tau-1} beta^(u-t) h(u+1) | F(t)] / E[sum_{u=t}^{tau-1} beta^(u-t) | F(t)]`.
pub fn gittins_forward_induction<S: Scalar>(
    prob: &StopProblem<S>,
    budget: u64,
) -> Result<IndexSequence<S>> {
    let h = prob.horizon();
    let n = prob.space.len();
    let one_minus_beta = S::one() - prob.beta.clone();
    let mut values = Vec::with_capacity(h + 1);
    for t in 0..=h {
        if t == h {
            values.push(vec![S::zero(); n]);
            break;
        }
        let mut best: Option<Rv<S>> = None;
        enumerate_stopping_rules(prob, t + 1, h, budget, &mut |tau| {
            let mut num = vec![S::zero(); n];
            let mut den = vec![S::zero(); n];
            for w in 0..n {
                let stop = match tau[w] {
                    SigTime::Fin(theta) => theta,
                    SigTime::Inf => usize::MAX,
                };
                for u in t..stop.min(h) {
                    num[w] = num[w].clone() + prob.beta.pow_u(u - t) * prob.rewards[u][w].clone();
                }
                den[w] = match tau[w] {
                    SigTime::Fin(theta) => {
                        (S::one() - prob.beta.pow_u(theta - t)) / one_minus_beta.clone()
                    }
                    SigTime::Inf => S::one() / one_minus_beta.clone(),
                };
            }
            let enum_ = cond_expect(&prob.space, prob.part(t), &num);
            let eden = cond_expect(&prob.space, prob.part(t), &den);
            let lam: Rv<S> = (0..n).map(|w| enum_[w].clone() / eden[w].clone()).collect();
            match &mut best {
                None => best = Some(lam),
                Some(b) => {
                    for w in 0..n {
                        if lam[w] > b[w] {
                            b[w] = lam[w].clone();
                        }
                    }
                }
            }
        })?;
        let lam = best.expect("at least one rule");
        values.push(lam.into_iter().map(|l| l / one_minus_beta.clone()).collect());
    }
    Ok(IndexSequence { values })
}

/// First `theta >= t` with `M(theta) <= m`, atomwise; never for `m = 0`.
pub fn sigma_right_inverse<S: Scalar>(idx: &IndexSequence<S>, t: usize, m: &S) -> Vec<SigTime> {
    let h = idx.horizon();
    let n = idx.values[0].len();
    if m.is_zero() {
        return vec![SigTime::Inf; n];
    }
    (0..n)
        .map(|w| {
            SigTime::Fin(
                (t..=h)
                    .find(|&theta| idx.values[theta][w] <= *m)
                    .expect("the index vanishes at the horizon"),
            )
        })
        .collect()
}

/// Left limit `sigma(t; m-)`: first `theta >= t` with `M(theta) < m`
/// strictly; never when `m = 0`.
pub fn sigma_minus<S: Scalar>(idx: &IndexSequence<S>, t: usize, m: &S) -> Vec<SigTime> {
    let h = idx.horizon();
    let n = idx.values[0].len();
    (0..n)
        .map(|w| {
            match (t..=h).find(|&theta| idx.values[theta][w] < *m) {
                Some(theta) => SigTime::Fin(theta),
                None => SigTime::Inf,
            }
        })
        .collect()
}

/// First `theta >= t` with `M(theta) = 0`: the limit of the optimal
/// stopping times as the retirement reward vanishes. At most the horizon.
pub fn sigma_plus<S: Scalar>(idx: &IndexSequence<S>, t: usize) -> Vec<usize> {
    let h = idx.horizon();
    let n = idx.values[0].len();
    (0..n)
        .map(|w| {
            (t..=h)
                .find(|&theta| idx.values[theta][w].is_zero())
                .expect("the index vanishes at the horizon")
        })
        .collect()
}

/// Grid of retirement rewards that resolves every linear piece of
/// `m -> V(t; m)`: all index values from `t` on (including zero), midpoints
/// of consecutive distinct values, and one point past the maximum.
pub fn index_grid<S: Scalar>(idx: &IndexSequence<S>, t: usize) -> Vec<S> {
    let h = idx.horizon();
    let mut vals: Vec<S> = vec![S::zero()];
    for theta in t..=h {
        for v in &idx.values[theta] {
            if !vals.contains(v) {
                vals.push(v.clone());
            }
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).expect("total order on scalars"));
    let two = S::from_i64(2);
    let mut grid = Vec::with_capacity(2 * vals.len() + 1);
    for (k, v) in vals.iter().enumerate() {
        grid.push(v.clone());
        if let Some(next) = vals.get(k + 1) {
            grid.push((v.clone() + next.clone()) / two.clone());
        }
    }
    grid.push(vals.last().unwrap().clone() + S::one());
    grid
}

/// The index right-inverts the optimal stopping time. Checks, on the given
/// grid and atomwise: the stopping-recursion rule equals the first passage
/// of the index below `m` (positive `m`); staying strictly above `theta`
/// matches `m` below the running minimum; the running minimum's level
/// brackets `theta` between the two one-sided passage times; and the
/// running minimum is constant at that level across the bracket.
pub fn check_right_inverse<S: Scalar>(
    prob: &StopProblem<S>,
    idx: &IndexSequence<S>,
    t: usize,
    grid: &[S],
) -> Vec<Check<S>> {
    let h = prob.horizon();
    let n = prob.space.len();
    let lower = idx.lower_from(t);
    let mut checks = Vec::new();

    let mut fail = None;
    'ri: for m in grid.iter().filter(|m| **m > S::zero()) {
        let from_snell = sigma_opt(prob, t, m);
        let from_index = sigma_right_inverse(idx, t, m);
        for w in 0..n {
            if from_snell[w] != from_index[w] {
                fail = Some(format!(
                    "stopping rule {} vs index passage {} at m={m}, atom {w}",
                    from_snell[w], from_index[w]
                ));
                break 'ri;
            }
        }
    }
    checks.push(match fail {
        None => Check::pass("right-inverse"),
        Some(wit) => Check::fail("right-inverse", wit),
    });

    let mut fail = None;
    'sa: for m in grid.iter().filter(|m| **m > S::zero()) {
        let sig = sigma_opt(prob, t, m);
        for theta in t..=h {
            for w in 0..n {
                let later = match sig[w] {
                    SigTime::Fin(s) => s > theta,
                    SigTime::Inf => true,
                };
                let below = *m < lower[theta - t][w];
                if later != below {
                    fail = Some(format!(
                        "sigma > {theta} is {later} but m < running minimum is {below} at m={m}, atom {w}"
                    ));
                    break 'sa;
                }
            }
        }
    }
    checks.push(match fail {
        None => Check::pass("stay-above-equivalence"),
        Some(wit) => Check::fail("stay-above-equivalence", wit),
    });

    let mut fail = None;
    'br: for theta in t..=h {
        for w in 0..n {
            let level = lower[theta - t][w].clone();
            if level.is_zero() {
                continue;
            }
            let at = sigma_opt(prob, t, &level);
            let ok_left = matches!(at[w], SigTime::Fin(s) if s <= theta);
            let ok_right = match sigma_minus(idx, t, &level)[w] {
                SigTime::Fin(s) => s > theta,
                SigTime::Inf => true,
            };
            if !ok_left || !ok_right {
                fail = Some(format!(
                    "passage times at the running-minimum level fail to bracket theta={theta}, atom {w}"
                ));
                break 'br;
            }
        }
    }
    checks.push(match fail {
        None => Check::pass("jump-bracket"),
        Some(wit) => Check::fail("jump-bracket", wit),
    });

    let mut fail = None;
    'jc: for w in 0..n {
        let mut levels: Vec<S> = Vec::new();
        for theta in t..=h {
            let v = lower[theta - t][w].clone();
            if v > S::zero() && !levels.contains(&v) {
                levels.push(v);
            }
        }
        for level in levels {
            let a = match sigma_opt(prob, t, &level)[w] {
                SigTime::Fin(s) => s,
                SigTime::Inf => continue,
            };
            let b = match sigma_minus(idx, t, &level)[w] {
                SigTime::Fin(s) => s,
                SigTime::Inf => h + 1,
            };
            for theta in a..b {
                if !close(&lower[theta - t][w], &level, &prob.tol) {
                    fail = Some(format!(
                        "running minimum leaves level {level} inside the jump interval at theta={theta}, atom {w}"
                    ));
                    break 'jc;
                }
            }
        }
    }
    checks.push(match fail {
        None => Check::pass("jump-constancy"),
        Some(wit) => Check::fail("jump-constancy", wit),
    });

    checks
}

/// Value via the restart representation:
/// `V(t; m) = (1-beta) sum_{theta=t}^{H-1} beta^(theta-t) E[max(m, lower(t,theta)) | F(t)] + beta^(H-t) m`.
/// The tail beyond the horizon is closed in analytic form: the running
/// minimum is zero there, so every tail term is `m` and the tail sums to
/// `beta^(H-t) m`.
pub fn restart_representation<S: Scalar>(
    prob: &StopProblem<S>,
    idx: &IndexSequence<S>,
    t: usize,
    m: &S,
) -> Rv<S> {
    let h = prob.horizon();
    let n = prob.space.len();
    let lower = idx.lower_from(t.min(h));
    let mut acc = vec![S::zero(); n];
    for theta in t..h {
        let capped: Rv<S> = (0..n)
            .map(|w| {
                let l = &lower[theta - t][w];
                if *l > *m {
                    l.clone()
                } else {
                    m.clone()
                }
            })
            .collect();
        let e = cond_expect(&prob.space, prob.part(t), &capped);
        let pow = prob.beta.pow_u(theta - t);
        for w in 0..n {
            acc[w] = acc[w].clone() + pow.clone() * e[w].clone();
        }
    }
    let scale = S::one() - prob.beta.clone();
    let tail = if h > t { prob.beta.pow_u(h - t) } else { S::one() };
    (0..n)
        .map(|w| scale.clone() * acc[w].clone() + tail.clone() * m.clone())
        .collect()
}

/// The compensated value process along the running minimum:
/// `U(theta) = beta^theta [V(theta; lower(t,theta)) - lower(t,theta)]
///           + sum_{u=t}^{theta-1} beta^u [h(u+1) - (1-beta) lower(t,u)]`
/// for `theta = t..=H`. It starts at zero and is a martingale.
pub fn u_process<S: Scalar>(
    prob: &StopProblem<S>,
    idx: &IndexSequence<S>,
    t: usize,
) -> Vec<Rv<S>> {
    let h = prob.horizon();
    let n = prob.space.len();
    let lower = idx.lower_from(t);
    // one stopping-value table per distinct running-minimum level
    let mut tables: Vec<(S, Vec<Rv<S>>)> = Vec::new();
    let mut value_at = |theta: usize, w: usize, level: &S| -> S {
        if let Some((_, tab)) = tables.iter().find(|(l, _)| l == level) {
            return tab[theta][w].clone();
        }
        let tab = snell(prob, level);
        let v = tab[theta][w].clone();
        tables.push((level.clone(), tab));
        v
    };
    let scale = S::one() - prob.beta.clone();
    let mut run = vec![S::zero(); n];
    let mut out = Vec::with_capacity(h - t + 1);
    for theta in t..=h {
        let pow = prob.beta.pow_u(theta);
        let row: Rv<S> = (0..n)
            .map(|w| {
                let level = lower[theta - t][w].clone();
                let gap = value_at(theta, w, &level) - level;
                run[w].clone() + pow.clone() * gap
            })
            .collect();
        out.push(row);
        if theta < h {
            for w in 0..n {
                let charge = prob.rewards[theta][w].clone()
                    - scale.clone() * lower[theta - t][w].clone();
                run[w] = run[w].clone() + pow.clone() * charge;
            }
        }
    }
    out
}

/// `U(t) = 0` and one-step martingale residuals vanish.
pub fn check_u_martingale<S: Scalar>(
    prob: &StopProblem<S>,
    idx: &IndexSequence<S>,
    t: usize,
    tol: &S,
) -> Check<S> {
    let u = u_process(prob, idx, t);
    let n = prob.space.len();
    for w in 0..n {
        if u[0][w].abs() > *tol {
            return Check::fail_res(
                "index-compensator-martingale",
                format!("nonzero start at atom {w}"),
                u[0][w].abs(),
            );
        }
    }
    for (k, pair) in u.windows(2).enumerate() {
        let theta = t + k;
        let e = cond_expect(&prob.space, prob.part(theta), &pair[1]);
        for w in 0..n {
            let res = (e[w].clone() - pair[0][w].clone()).abs();
            if res > *tol {
                return Check::fail_res(
                    "index-compensator-martingale",
                    format!("one-step residual at theta={theta}, atom {w}"),
                    res,
                );
            }
        }
    }
    Check::pass("index-compensator-martingale")
}

/// Whether the reward sequence is pathwise nonincreasing over time
/// (including the drop to zero past the horizon).
pub fn rewards_decreasing<S: Scalar>(prob: &StopProblem<S>) -> bool {
    let n = prob.space.len();
    for k in 0..prob.horizon() {
        let next = prob.reward(k + 1);
        for w in 0..n {
            if next[w] > prob.rewards[k][w] {
                return false;
            }
        }
    }
    true
}

/// For pathwise nonincreasing predictable rewards the index is myopic:
/// `(1 - beta) M(t) = h(t+1)`, hence the running minimum from `t` equals
/// the per-step reward rate at each later time.
pub fn check_decreasing_identity<S: Scalar>(
    prob: &StopProblem<S>,
    idx: &IndexSequence<S>,
    tol: &S,
) -> Check<S> {
    if !rewards_decreasing(prob) {
        return Check::pass_with(
            "decreasing-myopic-index",
            "rewards not nonincreasing; identity not applicable".into(),
        );
    }
    let scale = S::one() - prob.beta.clone();
    for t in 0..prob.horizon() {
        for w in 0..prob.space.len() {
            let lhs = scale.clone() * idx.values[t][w].clone();
            if !close(&lhs, &prob.rewards[t][w], tol) {
                return Check::fail(
                    "decreasing-myopic-index",
                    format!("(1-beta) M({t}) != step reward at atom {w}"),
                );
            }
        }
    }
    Check::pass("decreasing-myopic-index")
}
