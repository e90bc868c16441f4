//! Single-project optimal stopping with a retirement reward.
//!
//! The project pays `rewards[k]` on the step from time `k` to `k+1`; that
//! payment is known at time `k` (predictability). Rewards vanish beyond the
//! horizon. Retiring at time `theta` collects `m`, discounted by
//! `beta^theta`. The value satisfies the backward recursion
//!
//! `V(theta; m) = max(m, h(theta+1) + beta E[V(theta+1; m) | F(theta)])`
//!
//! with `V(theta; m) = m` at and beyond the horizon. The optimal rule stops
//! at the first time the value equals the retirement reward, stopping on
//! ties. At `m = 0` the public optimal time is reported as never: retiring
//! for nothing is pointless, and every finite tie-stop is merely one of many
//! optimal rules there. The convention `beta^infinity = 0` makes the
//! derivative and discount formulas below consistent with that choice.

use crate::prob::{cond_expect, FiniteSpace, Partition, Rv};
use crate::report::Check;
use crate::scalar::{close, Scalar};
use crate::{Error, Result};

/// One project: finite space, filtration, predictable bounded rewards.
#[derive(Debug, Clone)]
pub struct StopProblem<S: Scalar> {
    pub space: FiniteSpace<S>,
    /// `filt[t]` for `t = 0..=horizon`; constant beyond the horizon.
    pub filt: Vec<Partition>,
    /// `rewards[k]` pays on the step `k -> k+1`, measurable w.r.t. `filt[k]`.
    pub rewards: Vec<Rv<S>>,
    pub beta: S,
    /// Shared scale `K`; rewards obey `0 <= h <= K (1 - beta)`.
    pub bound: S,
    /// Comparison tolerance; zero in exact mode.
    pub tol: S,
}

impl<S: Scalar> StopProblem<S> {
    pub fn new(
        space: FiniteSpace<S>,
        filt: Vec<Partition>,
        rewards: Vec<Rv<S>>,
        beta: S,
        bound: S,
        tol: S,
    ) -> Result<Self> {
        let p = StopProblem { space, filt, rewards, beta, bound, tol };
        p.validate()?;
        Ok(p)
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.space.len();
        if self.beta <= S::zero() || self.beta >= S::one() {
            return Err(Error::invalid("discount factor must lie strictly in (0,1)"));
        }
        if self.bound < S::zero() {
            return Err(Error::invalid("reward scale must be nonnegative"));
        }
        if self.filt.len() != self.rewards.len() + 1 {
            return Err(Error::invalid(
                "need one sigma-algebra per time 0..=horizon",
            ));
        }
        for (t, p) in self.filt.iter().enumerate() {
            if p.n_atoms() != n {
                return Err(Error::invalid(format!("sigma-algebra at {t} has wrong atom count")));
            }
            if t > 0 && !p.refines(&self.filt[t - 1]) {
                return Err(Error::invalid(format!("filtration not increasing at time {t}")));
            }
        }
        let cap = self.bound.clone() * (S::one() - self.beta.clone());
        for (k, h) in self.rewards.iter().enumerate() {
            if h.len() != n {
                return Err(Error::invalid(format!("reward {} has wrong atom count", k + 1)));
            }
            if !self.filt[k].measures(h) {
                return Err(Error::invalid(format!(
                    "reward paid on step {} -> {} must be known at time {}",
                    k,
                    k + 1,
                    k
                )));
            }
            for (w, v) in h.iter().enumerate() {
                if *v < S::zero() || *v > cap {
                    return Err(Error::invalid(format!(
                        "reward at step {} atom {w} outside [0, K(1-beta)]",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sigma-algebra at time `t`, constant beyond the horizon.
    pub fn part(&self, t: usize) -> &Partition {
        let h = self.horizon();
        &self.filt[t.min(h)]
    }

    /// Reward paid on the step `t -> t+1`; zero beyond the horizon.
    pub fn reward(&self, t: usize) -> Rv<S> {
        if t < self.horizon() {
            self.rewards[t].clone()
        } else {
            vec![S::zero(); self.space.len()]
        }
    }
}

/// A stopping time value: a finite time or never.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigTime {
    Fin(usize),
    Inf,
}

impl SigTime {
    pub fn is_fin(&self) -> bool {
        matches!(self, SigTime::Fin(_))
    }

    /// `beta^(sig - t)`, with `beta^infinity = 0`.
    pub fn discount<S: Scalar>(&self, beta: &S, t: usize) -> S {
        match self {
            SigTime::Fin(theta) => beta.pow_u(theta - t),
            SigTime::Inf => S::zero(),
        }
    }
}

impl std::fmt::Display for SigTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SigTime::Fin(t) => write!(f, "{t}"),
            SigTime::Inf => write!(f, "inf"),
        }
    }
}

/// Value table `V(theta; m)` for `theta = 0..=horizon`, atomwise.
pub fn snell<S: Scalar>(prob: &StopProblem<S>, m: &S) -> Vec<Rv<S>> {
    let h = prob.horizon();
    let n = prob.space.len();
    let mut table = vec![vec![S::zero(); n]; h + 1];
    table[h] = vec![m.clone(); n];
    for theta in (0..h).rev() {
        let cont = cond_expect(&prob.space, prob.part(theta), &table[theta + 1]);
        table[theta] = (0..n)
            .map(|w| {
                let c = prob.rewards[theta][w].clone() + prob.beta.clone() * cont[w].clone();
                if c > *m {
                    c
                } else {
                    m.clone()
                }
            })
            .collect();
    }
    table
}

/// `V(t; m)` atomwise.
pub fn snell_value<S: Scalar>(prob: &StopProblem<S>, t: usize, m: &S) -> Rv<S> {
    if t >= prob.horizon() {
        return vec![m.clone(); prob.space.len()];
    }
    snell(prob, m)[t].clone()
}

/// First time `theta >= t` with `V(theta; m) = m`, stopping on ties. Always
/// finite (the table ends at the retirement value). This is the rule the
/// derivative and martingale identities quantify over once `m > 0`.
pub fn sigma_tie<S: Scalar>(prob: &StopProblem<S>, table: &[Rv<S>], t: usize, m: &S) -> Vec<usize> {
    let h = prob.horizon();
    (0..prob.space.len())
        .map(|w| {
            if t >= h {
                return t;
            }
            (t..=h)
                .find(|&theta| close(&table[theta][w], m, &prob.tol))
                .expect("table ends at the retirement value")
        })
        .collect()
}

/// Optimal stopping time from `t` at retirement reward `m`, atomwise.
/// At `m = 0` this is never, by convention; for `m > 0` it is the tie-stop
/// rule and is at most the horizon.
pub fn sigma_opt<S: Scalar>(prob: &StopProblem<S>, t: usize, m: &S) -> Vec<SigTime> {
    if close(m, &S::zero(), &prob.tol) {
        return vec![SigTime::Inf; prob.space.len()];
    }
    let table = snell(prob, m);
    sigma_tie(prob, &table, t, m).into_iter().map(SigTime::Fin).collect()
}

/// Right derivative of `m -> V(t; m)`: `E[beta^(sigma(t;m) - t) | F(t)]`,
/// which is zero at `m = 0` (never stop) and one for `m` at or above the
/// current index (stop immediately).
pub fn right_derivative<S: Scalar>(prob: &StopProblem<S>, t: usize, m: &S) -> Rv<S> {
    let discounts: Rv<S> = sigma_opt(prob, t, m)
        .iter()
        .map(|s| s.discount(&prob.beta, t))
        .collect();
    cond_expect(&prob.space, prob.part(t), &discounts)
}

/// Running reward plus discounted value, `Z(theta; m)` for `theta = 0..=H`,
/// discounted to time zero: `sum_{u<theta} beta^u h(u+1) + beta^theta V(theta)`.
pub fn z_table<S: Scalar>(prob: &StopProblem<S>, table: &[Rv<S>]) -> Vec<Rv<S>> {
    let h = prob.horizon();
    let n = prob.space.len();
    let mut out = Vec::with_capacity(h + 1);
    let mut run = vec![S::zero(); n];
    for theta in 0..=h {
        let pow = prob.beta.pow_u(theta);
        out.push(
            (0..n)
                .map(|w| run[w].clone() + pow.clone() * table[theta][w].clone())
                .collect::<Vec<_>>(),
        );
        if theta < h {
            for w in 0..n {
                run[w] = run[w].clone() + pow.clone() * prob.rewards[theta][w].clone();
            }
        }
    }
    out
}

/// Martingale property of the value process stopped at the optimal time:
/// with `A(theta) = Z(theta ^ sigma; m)`, checks
/// `E[A(theta+1) | F(theta)] = A(theta)` for `theta = t..H`. The table is a
/// parameter so a deliberately corrupted value table can be fed in; the
/// stopping rule is recomputed from the table that is checked.
pub fn check_stopped_martingale<S: Scalar>(
    prob: &StopProblem<S>,
    t: usize,
    m: &S,
    table: &[Rv<S>],
    tol: &S,
) -> Check<S> {
    let h = prob.horizon();
    let n = prob.space.len();
    let sigma = sigma_tie(prob, table, t, m);
    let z = z_table(prob, table);
    let at = |theta: usize, w: usize| -> S { z[theta.min(sigma[w])][w].clone() };
    let mut worst: Option<(S, String)> = None;
    for theta in t..h {
        let next: Rv<S> = (0..n).map(|w| at(theta + 1, w)).collect();
        let e = cond_expect(&prob.space, prob.part(theta), &next);
        for w in 0..n {
            let res = (e[w].clone() - at(theta, w)).abs();
            if res > *tol {
                let better = match &worst {
                    Some((r, _)) => res > *r,
                    None => true,
                };
                if better {
                    worst = Some((res.clone(), format!("time {theta}, atom {w}")));
                }
            }
        }
    }
    match worst {
        None => Check::pass("stopped-martingale"),
        Some((r, wit)) => Check::fail_res("stopped-martingale", wit, r),
    }
}

/// Expected total discounted reward of an explicit stopping rule, given per
/// atom, conditioned on `F(t)` and discounted to `t`. Used by tests.
pub fn rule_value<S: Scalar>(
    prob: &StopProblem<S>,
    t: usize,
    m: &S,
    rule: &[SigTime],
) -> Rv<S> {
    let n = prob.space.len();
    let h = prob.horizon();
    let payoff: Rv<S> = (0..n)
        .map(|w| {
            let stop = match rule[w] {
                SigTime::Fin(theta) => theta,
                SigTime::Inf => h,
            };
            let mut acc = S::zero();
            for u in t..stop.min(h) {
                acc = acc + prob.beta.pow_u(u - t) * prob.rewards[u][w].clone();
            }
            acc + m.clone() * rule[w].discount(&prob.beta, t)
        })
        .collect();
    cond_expect(&prob.space, prob.part(t), &payoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use num_traits::{One, Zero};

    fn r(n: i64, d: i64) -> Exact {
        Exact::from_ratio(n, d)
    }

    /// Fair coin never revealed; one unit reward on the single step.
    fn flat() -> StopProblem<Exact> {
        StopProblem::new(
            FiniteSpace::new(vec![r(1, 2), r(1, 2)], &Exact::zero()).unwrap(),
            vec![Partition::trivial(2), Partition::trivial(2)],
            vec![vec![Exact::one(), Exact::one()]],
            r(1, 2),
            Exact::from_i64(2),
            Exact::zero(),
        )
        .unwrap()
    }

    /// Fair coin revealed after one step; second-step reward 2 on heads,
    /// 0 on tails.
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
    fn flat_values() {
        let p = flat();
        assert_eq!(snell_value(&p, 0, &Exact::zero()), vec![Exact::one(), Exact::one()]);
        let three = Exact::from_i64(3);
        assert_eq!(snell_value(&p, 0, &three), vec![three.clone(), three]);
    }

    #[test]
    fn coin_value_and_rule() {
        let p = coin();
        assert_eq!(snell_value(&p, 0, &Exact::one()), vec![r(15, 8), r(15, 8)]);
        assert_eq!(
            sigma_opt(&p, 0, &Exact::one()),
            vec![SigTime::Fin(2), SigTime::Fin(1)]
        );
        assert_eq!(sigma_opt(&p, 0, &Exact::zero()), vec![SigTime::Inf, SigTime::Inf]);
        assert_eq!(right_derivative(&p, 0, &Exact::one()), vec![r(3, 8), r(3, 8)]);
        assert_eq!(
            right_derivative(&p, 0, &Exact::zero()),
            vec![Exact::zero(), Exact::zero()]
        );
        // retiring at or above the value of never needing to stop
        assert_eq!(
            right_derivative(&p, 0, &Exact::from_i64(4)),
            vec![Exact::one(), Exact::one()]
        );
    }

    #[test]
    fn coin_value_is_convex_and_rule_monotone() {
        let p = coin();
        let grid: Vec<Exact> = (0..=16).map(|k| r(k, 4)).collect();
        let vals: Vec<Exact> = grid.iter().map(|m| snell_value(&p, 0, m)[0].clone()).collect();
        for w in vals.windows(3).zip(grid.windows(3)) {
            let (v, g) = w;
            // equal spacing: convexity is v0 + v2 >= 2 v1
            assert_eq!(g[1].clone() - g[0].clone(), g[2].clone() - g[1].clone());
            assert!(v[0].clone() + v[2].clone() >= v[1].clone() + v[1].clone());
        }
        let mut last = vec![usize::MAX; 2];
        for m in grid.iter().skip(1) {
            let table = snell(&p, m);
            let s = sigma_tie(&p, &table, 0, m);
            for w in 0..2 {
                assert!(s[w] <= last[w]);
                last[w] = s[w];
            }
        }
    }

    #[test]
    fn stopped_martingale_and_perturbation() {
        let p = coin();
        let m = Exact::one();
        let table = snell(&p, &m);
        assert!(check_stopped_martingale(&p, 0, &m, &table, &Exact::zero()).pass);
        let z = Exact::zero();
        let t0 = snell(&p, &z);
        assert!(check_stopped_martingale(&p, 0, &z, &t0, &Exact::zero()).pass);

        let mut bad = table.clone();
        bad[1][0] = bad[1][0].clone() + r(1, 10);
        let c = check_stopped_martingale(&p, 0, &m, &bad, &Exact::zero());
        assert!(!c.pass);
        assert_eq!(c.residual, Some(r(1, 20)));
        assert_eq!(c.witness.as_deref(), Some("time 1, atom 0"));
    }

    #[test]
    fn rejects_unpredictable_reward() {
        let err = StopProblem::new(
            FiniteSpace::new(vec![r(1, 2), r(1, 2)], &Exact::zero()).unwrap(),
            vec![Partition::trivial(2), Partition::discrete(2)],
            vec![vec![Exact::one(), Exact::zero()]],
            r(1, 2),
            Exact::from_i64(2),
            Exact::zero(),
        );
        assert!(err.is_err());
    }
}
