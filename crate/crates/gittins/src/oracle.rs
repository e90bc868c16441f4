//! Brute-force enumeration oracles.
//!
//! Everything here evaluates objectives by exhaustively enumerating
//! explicitly represented stopping rules and allocation strategies; nothing
//! calls the dynamic programs and closed forms it is used to certify. This
//! module is the trust anchor, so there is no pruning that could exclude an
//! optimal rule, only a priori census caps that refuse oversized inputs.
//!
//! A stopping rule is enumerated as a per-atom time: each alive block of the
//! current sigma-algebra independently stops now or continues, and a block
//! still alive at the enumeration horizon either stops there or never stops.
//! The census obeys `C(theta, b) = 1 + prod_children C(theta+1, b')` below
//! the horizon and `C = 2` at it.
//!
//! A strategy is enumerated as a per-atom engagement path: each decision
//! node (a position `r` and a block of `Partition(r)`) independently picks a
//! feasible project; the node then splits into the blocks of the partition
//! one step up. Atoms sharing a node share their whole history, so the
//! enumeration never produces a non-adapted path.

use crate::allocation::{Bandit, Strategy};
use crate::prob::{cond_expect, Partition, Rv};
use crate::scalar::Scalar;
use crate::stopping::{SigTime, StopProblem};
use crate::{Error, Result};
use std::collections::HashMap;

/// Group `atoms` by their block of `part`, in order of first occurrence.
fn split(part: &Partition, atoms: &[usize]) -> Vec<Vec<usize>> {
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

fn max_rv<S: Scalar>(acc: &mut Option<Rv<S>>, v: Rv<S>) {
    *acc = Some(match acc.take() {
        None => v,
        Some(prev) => prev
            .into_iter()
            .zip(v)
            .map(|(a, b)| if b > a { b } else { a })
            .collect(),
    });
}

/// Number of stopping rules from `t` with explicit stops up to `horizon`,
/// saturating at `u128::MAX`.
pub fn census_rules<S: Scalar>(prob: &StopProblem<S>, t: usize, horizon: usize) -> u128 {
    fn count<S: Scalar>(
        prob: &StopProblem<S>,
        theta: usize,
        horizon: usize,
        block: &[usize],
    ) -> u128 {
        if theta >= horizon {
            return 2;
        }
        let mut prod: u128 = 1;
        for child in split(prob.part(theta + 1), block) {
            prod = prod.saturating_mul(count(prob, theta + 1, horizon, &child));
        }
        prod.saturating_add(1)
    }
    let all: Vec<usize> = (0..prob.space.len()).collect();
    let mut total: u128 = 1;
    for b in split(prob.part(t), &all) {
        total = total.saturating_mul(count(prob, t, horizon, &b));
    }
    total
}

struct RuleEnum<'a, S: Scalar, F: FnMut(&[SigTime])> {
    prob: &'a StopProblem<S>,
    horizon: usize,
    tau: Vec<SigTime>,
    count: u64,
    f: &'a mut F,
}

impl<'a, S: Scalar, F: FnMut(&[SigTime])> RuleEnum<'a, S, F> {
    fn at_time(&mut self, theta: usize, alive: &[usize]) {
        if alive.is_empty() {
            self.count += 1;
            (self.f)(&self.tau);
            return;
        }
        let blocks = split(self.prob.part(theta), alive);
        self.per_block(theta, &blocks, 0, Vec::new());
    }

    fn per_block(&mut self, theta: usize, blocks: &[Vec<usize>], i: usize, carry: Vec<usize>) {
        if i == blocks.len() {
            self.at_time(theta + 1, &carry);
            return;
        }
        // stop this block now (emitted before the continuation branch)
        for &w in &blocks[i] {
            self.tau[w] = SigTime::Fin(theta);
        }
        self.per_block(theta, blocks, i + 1, carry.clone());
        if theta < self.horizon {
            let mut more = carry;
            more.extend_from_slice(&blocks[i]);
            self.per_block(theta, blocks, i + 1, more);
        } else {
            // at the horizon the alternative to stopping is never stopping
            for &w in &blocks[i] {
                self.tau[w] = SigTime::Inf;
            }
            self.per_block(theta, blocks, i + 1, carry);
        }
    }
}

/// Enumerate every stopping rule from `t` (explicit stops up to `horizon`,
/// never-stop beyond), calling `f` with the per-atom stopping time. Refuses
/// upfront when the census exceeds `budget`. Returns the number of rules.
pub fn enumerate_stopping_rules<S: Scalar, F: FnMut(&[SigTime])>(
    prob: &StopProblem<S>,
    t: usize,
    horizon: usize,
    budget: u64,
    f: &mut F,
) -> Result<u64> {
    let census = census_rules(prob, t, horizon);
    if census > budget as u128 {
        return Err(Error::Budget(format!(
            "{census} stopping rules exceed budget {budget}"
        )));
    }
    let n = prob.space.len();
    let mut e = RuleEnum { prob, horizon, tau: vec![SigTime::Inf; n], count: 0, f };
    let all: Vec<usize> = (0..n).collect();
    e.at_time(t, &all);
    Ok(e.count)
}

/// Optimal stopping values by sheer enumeration, for a whole grid of
/// retirement rewards at once: the atomwise maximum over all rules of the
/// conditional expected payoff given the time-`t` sigma-algebra, discounted
/// to `t`. A rule's payoff is linear in the retirement reward, so one
/// enumeration prices every grid point. Blocks stop independently, so the
/// atomwise maximum is attained by an admissible rule.
pub fn oracle_v_grid<S: Scalar>(
    prob: &StopProblem<S>,
    t: usize,
    ms: &[S],
    horizon: usize,
    budget: u64,
) -> Result<Vec<Rv<S>>> {
    let n = prob.space.len();
    let h = prob.horizon();
    let mut best: Vec<Option<Rv<S>>> = vec![None; ms.len()];
    enumerate_stopping_rules(prob, t, horizon, budget, &mut |tau| {
        let pay: Rv<S> = (0..n)
            .map(|w| {
                let stop = match tau[w] {
                    SigTime::Fin(theta) => theta,
                    SigTime::Inf => h,
                };
                let mut acc = S::zero();
                for u in t..stop.min(h) {
                    acc = acc + prob.beta.pow_u(u - t) * prob.rewards[u][w].clone();
                }
                acc
            })
            .collect();
        let disc: Rv<S> = (0..n).map(|w| tau[w].discount(&prob.beta, t)).collect();
        let epay = cond_expect(&prob.space, prob.part(t), &pay);
        let edisc = cond_expect(&prob.space, prob.part(t), &disc);
        for (k, m) in ms.iter().enumerate() {
            let cand: Rv<S> = (0..n)
                .map(|w| epay[w].clone() + m.clone() * edisc[w].clone())
                .collect();
            max_rv(&mut best[k], cand);
        }
    })?;
    Ok(best.into_iter().map(|b| b.expect("at least one rule")).collect())
}

/// Single-point variant of `oracle_v_grid`.
pub fn oracle_v<S: Scalar>(
    prob: &StopProblem<S>,
    t: usize,
    m: &S,
    horizon: usize,
    budget: u64,
) -> Result<Rv<S>> {
    Ok(oracle_v_grid(prob, t, std::slice::from_ref(m), horizon, budget)?.pop().unwrap())
}

/// Number of full allocation strategies from `start`, saturating.
pub fn strategy_census<S: Scalar>(b: &Bandit<S>, start: &[usize]) -> u128 {
    fn go<S: Scalar>(
        b: &Bandit<S>,
        cell: &[usize],
        block: Vec<usize>,
        memo: &mut HashMap<(usize, usize), u128>,
    ) -> u128 {
        let key = (b.lattice.cell_index(cell), block[0]);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let feas: Vec<usize> = (0..b.n_projects())
            .filter(|&j| cell[j] < b.lattice.horizons()[j])
            .collect();
        let v = if feas.is_empty() {
            1
        } else {
            let mut sum: u128 = 0;
            for j in feas {
                let mut nc = cell.to_vec();
                nc[j] += 1;
                let mut prod: u128 = 1;
                for child in split(b.lattice.part(&nc), &block) {
                    prod = prod.saturating_mul(go(b, &nc, child, memo));
                }
                sum = sum.saturating_add(prod);
            }
            sum
        };
        memo.insert(key, v);
        v
    }
    let mut memo = HashMap::new();
    let all: Vec<usize> = (0..b.lattice.n_atoms()).collect();
    let mut total: u128 = 1;
    for blk in split(b.lattice.part(start), &all) {
        total = total.saturating_mul(go(b, start, blk, &mut memo));
    }
    total
}

struct StratEnum<'a, S: Scalar, F: FnMut(&Strategy) -> Result<()>> {
    b: &'a Bandit<S>,
    start: &'a [usize],
    cap: usize,
    paths: Vec<Vec<usize>>,
    count: u64,
    f: &'a mut F,
}

impl<'a, S: Scalar, F: FnMut(&Strategy) -> Result<()>> StratEnum<'a, S, F> {
    fn step(&mut self, t: usize, groups: &[(Vec<usize>, Vec<usize>)]) -> Result<()> {
        if t == self.cap {
            self.count += 1;
            let s = Strategy { start: self.start.to_vec(), paths: self.paths.clone() };
            return (self.f)(&s);
        }
        self.choose(t, groups, 0, Vec::new())
    }

    fn choose(
        &mut self,
        t: usize,
        groups: &[(Vec<usize>, Vec<usize>)],
        gi: usize,
        acc: Vec<(Vec<usize>, Vec<usize>)>,
    ) -> Result<()> {
        if gi == groups.len() {
            return self.step(t + 1, &acc);
        }
        let (cell, atoms) = &groups[gi];
        let feas: Vec<usize> = (0..self.b.n_projects())
            .filter(|&j| cell[j] < self.b.lattice.horizons()[j])
            .collect();
        debug_assert!(!feas.is_empty(), "every atom exhausts at the same calendar time");
        for j in feas {
            let mut nc = cell.clone();
            nc[j] += 1;
            for &w in atoms {
                self.paths[w][t] = j;
            }
            let mut acc2 = acc.clone();
            for child in split(self.b.lattice.part(&nc), atoms) {
                acc2.push((nc.clone(), child));
            }
            self.choose(t, groups, gi + 1, acc2)?;
        }
        Ok(())
    }
}

/// Enumerate allocation strategies from `start`. With `prefix = None` the
/// paths run to exhaustion of every project; `prefix = Some(c)` enumerates
/// distinct prefixes of calendar length `c` (capped at exhaustion). The
/// full-strategy census guards the budget upfront; distinct prefixes are
/// never more numerous than full strategies.
pub fn enumerate_strategies<S: Scalar, F: FnMut(&Strategy) -> Result<()>>(
    b: &Bandit<S>,
    start: &[usize],
    prefix: Option<usize>,
    budget: u64,
    f: &mut F,
) -> Result<u64> {
    if start.len() != b.n_projects() {
        return Err(Error::invalid("start has wrong dimension"));
    }
    if start
        .iter()
        .zip(b.lattice.horizons())
        .any(|(&s, &h)| s > h)
    {
        return Err(Error::invalid("start beyond a project horizon"));
    }
    let census = strategy_census(b, start);
    if census > budget as u128 {
        return Err(Error::Budget(format!(
            "{census} strategies exceed budget {budget}"
        )));
    }
    let t_exh: usize = b
        .lattice
        .horizons()
        .iter()
        .zip(start)
        .map(|(&h, &s)| h - s)
        .sum();
    let cap = prefix.unwrap_or(t_exh).min(t_exh);
    let n = b.lattice.n_atoms();
    let mut e = StratEnum {
        b,
        start,
        cap,
        paths: vec![vec![0usize; cap]; n],
        count: 0,
        f,
    };
    let all: Vec<usize> = (0..n).collect();
    let groups: Vec<(Vec<usize>, Vec<usize>)> = split(b.lattice.part(start), &all)
        .into_iter()
        .map(|blk| (start.to_vec(), blk))
        .collect();
    e.step(0, &groups)?;
    Ok(e.count)
}

/// The one-parameter stopping problem a strategy induces on calendar time:
/// sigma-algebras are generated by the decision nodes, the reward at step
/// `t` is the engaged step's reward. Used to price retirement on top of a
/// fixed strategy.
pub fn induced_problem<S: Scalar>(b: &Bandit<S>, strat: &Strategy) -> Result<StopProblem<S>> {
    let n = b.lattice.n_atoms();
    let steps = strat.steps();
    let mut counts: Vec<Vec<usize>> = vec![strat.start.clone(); n];
    let mut filt = Vec::with_capacity(steps + 1);
    let mut rewards = Vec::with_capacity(steps);
    for t in 0..=steps {
        let labels: Vec<(usize, usize)> = (0..n)
            .map(|w| {
                let cell = &counts[w];
                (b.lattice.cell_index(cell), b.lattice.part(cell).block_index(w))
            })
            .collect();
        filt.push(Partition::from_labels(&labels));
        if t < steps {
            let r: Rv<S> = (0..n)
                .map(|w| {
                    let j = strat.paths[w][t];
                    b.rewards[j][counts[w][j]][w].clone()
                })
                .collect();
            rewards.push(r);
            for w in 0..n {
                let j = strat.paths[w][t];
                counts[w][j] += 1;
            }
        }
    }
    StopProblem::new(
        b.lattice.space().clone(),
        filt,
        rewards,
        b.beta.clone(),
        b.bound.clone(),
        b.tol.clone(),
    )
}

/// Dynamic-allocation value by sheer enumeration: the atomwise maximum over
/// all strategies (and, for a positive retirement reward, over all stopping
/// rules of the induced calendar problem) of the conditional expected payoff
/// given the starting sigma-algebra. At retirement zero no rule is priced:
/// rewards are nonnegative, so never retiring dominates every policy
/// pathwise and the strategy's full discounted reward is the payoff.
pub fn oracle_phi<S: Scalar>(
    b: &Bandit<S>,
    start: &[usize],
    retire: &S,
    budget: u64,
) -> Result<Rv<S>> {
    let n = b.lattice.n_atoms();
    let mut best: Option<Rv<S>> = None;
    enumerate_strategies(b, start, None, budget, &mut |strat: &Strategy| {
        let val = if retire.is_zero() {
            let payoff: Rv<S> = (0..n)
                .map(|w| {
                    let mut counts = start.to_vec();
                    let mut acc = S::zero();
                    for t in 0..strat.steps() {
                        let j = strat.paths[w][t];
                        acc = acc + b.beta.pow_u(t) * b.rewards[j][counts[j]][w].clone();
                        counts[j] += 1;
                    }
                    acc
                })
                .collect();
            cond_expect(b.lattice.space(), b.lattice.part(start), &payoff)
        } else {
            let induced = induced_problem(b, strat)?;
            let horizon = induced.horizon();
            oracle_v(&induced, 0, retire, horizon, budget)?
        };
        max_rv(&mut best, val);
        Ok(())
    })?;
    Ok(best.expect("at least one strategy"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::FiniteSpace;
    use crate::scalar::Exact;
    use num_traits::{One, Zero};

    fn r(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    fn coin() -> StopProblem<Exact> {
        StopProblem::new(
            FiniteSpace::new(vec![r(1, 2), r(1, 2)], &Exact::zero()).unwrap(),
            vec![Partition::trivial(2), Partition::discrete(2), Partition::discrete(2)],
            vec![
                vec![Exact::one(), Exact::one()],
                vec![Exact::from_i64(2), Exact::zero()],
            ],
            r(1, 2),
            Exact::from_i64(4),
            Exact::zero(),
        )
        .unwrap()
    }

    #[test]
    fn rule_census_matches_closed_form() {
        let p = coin();
        assert_eq!(census_rules(&p, 0, 1), 5);
        assert_eq!(census_rules(&p, 0, 2), 10);
        let mut seen = 0u64;
        let n = enumerate_stopping_rules(&p, 0, 2, 100, &mut |_| seen += 1).unwrap();
        assert_eq!((n, seen), (10, 10));
        assert!(enumerate_stopping_rules(&p, 0, 2, 9, &mut |_| {}).is_err());
    }

    #[test]
    fn oracle_value_on_coin() {
        let p = coin();
        assert_eq!(
            oracle_v(&p, 0, &Exact::one(), 2, 1000).unwrap(),
            vec![r(15, 8), r(15, 8)]
        );
        assert_eq!(
            oracle_v(&p, 0, &Exact::zero(), 2, 1000).unwrap(),
            vec![r(3, 2), r(3, 2)]
        );
        // retiring immediately once the reward is high enough
        let five = Exact::from_i64(4);
        assert_eq!(oracle_v(&p, 0, &five, 2, 1000).unwrap(), vec![five.clone(), five]);
    }

    #[test]
    fn first_emitted_rule_stops_immediately() {
        let p = coin();
        let mut first: Option<Vec<SigTime>> = None;
        enumerate_stopping_rules(&p, 0, 2, 100, &mut |tau| {
            if first.is_none() {
                first = Some(tau.to_vec());
            }
        })
        .unwrap();
        assert_eq!(first.unwrap(), vec![SigTime::Fin(0), SigTime::Fin(0)]);
    }
}
