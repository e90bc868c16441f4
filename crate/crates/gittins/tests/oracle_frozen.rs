//! Frozen anchor values for the enumeration oracles.
//!
//! Every constant below was derived by hand from the worked examples before
//! any engine code ran, so these tests certify the oracles themselves. The
//! engine routes are compared against the oracles elsewhere; nothing here
//! touches an engine shortcut.

use gittins::oracle::{census_rules, oracle_phi, oracle_v, strategy_census};
use gittins::scalar::Exact;
use gittins::scenario::{
    build_scenario, scenario_a, scenario_b, scenario_c, scenario_d, scenario_e, Scenario,
};
use num_traits::Zero;

const BUDGET: u64 = 1 << 20;

fn exact(file: gittins::scenario::ScenarioFile) -> Scenario<Exact> {
    build_scenario::<Exact>(&file, Exact::zero()).unwrap()
}

fn q(n: i64, d: i64) -> Exact {
    Exact::from_ratio(n, d)
}

use gittins::scalar::Scalar;

/// One project paying 1 once, discount 1/2: stop now for `m`, or take
/// `1 + m/2`. The two candidates cross at `m = 2`.
#[test]
fn deterministic_project_stopping_values() {
    let sc = exact(scenario_a());
    let p = sc.bandit.project(0).unwrap();
    let h = p.horizon();
    assert_eq!(h, 1);
    assert_eq!(oracle_v(&p, 0, &Exact::zero(), h, BUDGET).unwrap(), vec![q(1, 1)]);
    assert_eq!(oracle_v(&p, 0, &q(3, 1), h, BUDGET).unwrap(), vec![q(3, 1)]);
    assert_eq!(oracle_v(&p, 0, &q(2, 1), h, BUDGET).unwrap(), vec![q(2, 1)]);
    // stop now, stop after the reward, never stop
    assert_eq!(census_rules(&p, 0, h), 3);
}

/// Coin project: pays 1, then 2 or 0 with equal odds. With exit reward 1
/// the best rule continues, banking `1 + (1/2) * (5/2 + 1)/2 = 15/8`.
#[test]
fn coin_project_stopping_values() {
    let sc = exact(scenario_b());
    let p = sc.bandit.project(0).unwrap();
    let h = p.horizon();
    assert_eq!(h, 2);
    let one = q(1, 1);
    assert_eq!(oracle_v(&p, 0, &one, h, BUDGET).unwrap(), vec![q(15, 8), q(15, 8)]);
    assert_eq!(oracle_v(&p, 0, &Exact::zero(), h, BUDGET).unwrap(), vec![q(3, 2), q(3, 2)]);
    // rules on the first step only: stop now, or one of {1, inf} per branch
    assert_eq!(census_rules(&p, 0, 1), 5);
    // full horizon: stop now, or one of {1, 2, inf} per branch
    assert_eq!(census_rules(&p, 0, 2), 10);
}

/// Two deterministic projects paying 1 and 3/5: take them in that order,
/// `1 + (1/2) * 3/5 = 13/10`.
#[test]
fn two_project_allocation_value() {
    let sc = exact(scenario_c());
    let v = oracle_phi(&sc.bandit, &[0, 0], &Exact::zero(), BUDGET).unwrap();
    assert_eq!(v, vec![q(13, 10)]);
    // two single-step projects: engage them in one of two orders
    assert_eq!(strategy_census(&sc.bandit, &[0, 0]), 2);
}

/// Coin crossed with the 3/5 project. On the winning branch ride the coin:
/// `1 + 1 + (1/4) * 3/5 = 43/20`; on the losing branch switch after one
/// step: `1 + (3/5)/2 = 13/10`. The mean is 69/40.
#[test]
fn coin_product_allocation_value() {
    let sc = exact(scenario_d());
    let v = oracle_phi(&sc.bandit, &[0, 0], &Exact::zero(), BUDGET).unwrap();
    assert_eq!(v, vec![q(69, 40), q(69, 40)]);
}

/// The sheet twin of the two-project example carries the same rewards on a
/// shared-site filtration, so the optimum is again 13/10.
#[test]
fn sheet_allocation_value() {
    let sc = exact(scenario_e());
    let v = oracle_phi(&sc.bandit, &[0, 0], &Exact::zero(), BUDGET).unwrap();
    assert_eq!(v, vec![q(13, 10), q(13, 10)]);
}

/// Retirement beyond the reward scale dominates every strategy outright.
#[test]
fn retirement_beyond_the_scale_wins() {
    let sc = exact(scenario_c());
    let five = q(5, 1);
    let v = oracle_phi(&sc.bandit, &[0, 0], &five, BUDGET).unwrap();
    assert_eq!(v, vec![five]);
}
