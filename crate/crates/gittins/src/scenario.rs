//! Scenario files: the JSON instance format, the bundled worked examples,
//! and seeded random instance generators.
//!
//! A scenario describes one allocation problem: a finite probability space
//! with a multi-parameter filtration (given as a product of independent
//! factors, a sheet of shared increments, or explicit per-axis label
//! chains), per-project reward sequences, the discount factor, the reward
//! scale, named starting cells, and the verification suites to run.
//! Scalars are written as strings (`"3"`, `"-1/2"`, `"0.25"`) so the same
//! file parses exactly in rational mode and approximately in float mode.

use crate::allocation::Bandit;
use crate::lattice::{build_product, build_sheet, Factor, Lattice, LatticeKind};
use crate::oracle::strategy_census;
use crate::prob::{FiniteSpace, Partition};
use crate::scalar::Scalar;
use crate::{Error, Result};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Float,
}

fn default_mode() -> Mode {
    Mode::Rational
}

/// On-disk scenario description. See the bundled files under `scenarios/`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Comparison tolerance for float mode; ignored in rational mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<String>,
    pub beta: String,
    /// Shared reward scale `K`; every reward must lie in `[0, K(1-beta)]`.
    pub reward_bound: String,
    pub space: SpaceSpec,
    /// Named starting cells; defaults to `origin = (0,..,0)` when empty.
    #[serde(default)]
    pub starts: BTreeMap<String, Vec<usize>>,
    /// Default verification suites for `verify` runs without `--suite`.
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpaceSpec {
    /// Independent factors; the joint space, filtration lattice, and lifted
    /// rewards are assembled from the per-factor data.
    Product { factors: Vec<FactorSpec> },
    /// Shared `+1`-probability increments on the site box given by `dims`;
    /// rewards are given on joint atoms (bit `k` of an atom is site `k`).
    Sheet { dims: Vec<usize>, site_probs: Vec<String>, projects: Vec<ProjectSpec> },
    /// Fully explicit joint space with one label chain per axis.
    Explicit { probs: Vec<String>, axes: Vec<AxisSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub probs: Vec<String>,
    /// `filtration[t]` labels each factor atom by its block after `t`
    /// engagements; one row per `t = 0..=H`, later rows refining earlier.
    pub filtration: Vec<Vec<usize>>,
    /// `rewards[k][atom]` pays on the step from count `k` to `k+1` and must
    /// be measurable with respect to `filtration[k]`.
    pub rewards: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSpec {
    /// `rewards[k][atom]` on joint atoms; must be measurable with respect to
    /// the project's own history after `k` engagements.
    pub rewards: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    /// `filtration[t]` labels each joint atom after `t` engagements of this
    /// project; one row per `t = 0..=H`, later rows refining earlier.
    pub filtration: Vec<Vec<usize>>,
    /// `rewards[k][atom]` on joint atoms, measurable w.r.t. `filtration[k]`.
    pub rewards: Vec<Vec<String>>,
}

/// Deliberate defect injected before a suite runs, to exercise failure
/// reporting: `target` is `"field"` (bump one value-field entry) or
/// `"snell"` (bump one envelope entry of project 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub target: String,
    /// Value-field cell for `target = "field"`.
    #[serde(default)]
    pub cell: Vec<usize>,
    /// Envelope time row for `target = "snell"`.
    #[serde(default)]
    pub time: usize,
    #[serde(default)]
    pub atom: usize,
    pub amount: String,
}

/// Parses `"n"`, `"n/d"`, or a finite decimal such as `"0.25"`.
pub fn parse_scalar<S: Scalar>(text: &str) -> Result<S> {
    let t = text.trim();
    let bad = |_| Error::Parse(format!("not a number: '{text}'"));
    if let Some((n, d)) = t.split_once('/') {
        let num: i64 = n.trim().parse().map_err(bad)?;
        let den: i64 = d.trim().parse().map_err(bad)?;
        if den == 0 {
            return Err(Error::Parse(format!("zero denominator: '{text}'")));
        }
        Ok(S::from_ratio(num, den))
    } else if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("not a number: '{text}'")));
        }
        let negative = whole.starts_with('-');
        let w: i64 = if whole == "-" || whole.is_empty() { 0 } else { whole.parse().map_err(bad)? };
        let f: i64 = frac.parse().map_err(bad)?;
        let den = 10_i64.pow(frac.len() as u32);
        let num = w.abs() * den + f;
        Ok(S::from_ratio(if negative { -num } else { num }, den))
    } else {
        Ok(S::from_i64(t.parse().map_err(bad)?))
    }
}

fn parse_rv<S: Scalar>(xs: &[String]) -> Result<Vec<S>> {
    xs.iter().map(|x| parse_scalar(x)).collect()
}

/// A scenario compiled to engine objects at a resolved tolerance.
pub struct Scenario<S: Scalar> {
    pub name: String,
    pub bandit: Bandit<S>,
    pub starts: Vec<(String, Vec<usize>)>,
    pub suites: Vec<String>,
    pub perturbation: Option<Perturbation>,
}

fn chain_partitions(rows: &[Vec<usize>], n: usize, what: &str) -> Result<Vec<Partition>> {
    let mut parts = Vec::with_capacity(rows.len());
    for (t, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid(format!("{what}: filtration row {t} needs {n} labels")));
        }
        parts.push(Partition::from_labels(row));
    }
    for t in 1..parts.len() {
        if !parts[t].refines(&parts[t - 1]) {
            return Err(Error::invalid(format!(
                "{what}: filtration row {t} does not refine row {}",
                t - 1
            )));
        }
    }
    Ok(parts)
}

fn build_space<S: Scalar>(
    spec: &SpaceSpec,
    tol: &S,
) -> Result<(Lattice<S>, Vec<Vec<Vec<S>>>)> {
    match spec {
        SpaceSpec::Product { factors } => {
            let mut built = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let probs = parse_rv::<S>(&f.probs)?;
                let n = probs.len();
                let space = FiniteSpace::new(probs, tol)?;
                let filt = chain_partitions(&f.filtration, n, &format!("factor {i}"))?;
                let rewards: Vec<Vec<S>> =
                    f.rewards.iter().map(|row| parse_rv(row)).collect::<Result<_>>()?;
                built.push(Factor { space, filt, rewards });
            }
            let pb = build_product(&built, tol)?;
            Ok((pb.lattice, pb.rewards))
        }
        SpaceSpec::Sheet { dims, site_probs, projects } => {
            let probs = parse_rv::<S>(site_probs)?;
            let lat = build_sheet(dims, &probs, tol)?;
            if projects.len() != dims.len() {
                return Err(Error::invalid("sheet needs one project per dimension"));
            }
            let n = lat.n_atoms();
            let mut rewards = Vec::with_capacity(projects.len());
            for (i, p) in projects.iter().enumerate() {
                if p.rewards.len() != dims[i] {
                    return Err(Error::invalid(format!(
                        "project {i}: expected {} reward steps",
                        dims[i]
                    )));
                }
                let seq: Vec<Vec<S>> =
                    p.rewards.iter().map(|row| parse_rv(row)).collect::<Result<_>>()?;
                if seq.iter().any(|row| row.len() != n) {
                    return Err(Error::invalid(format!("project {i}: reward rows need {n} atoms")));
                }
                rewards.push(seq);
            }
            Ok((lat, rewards))
        }
        SpaceSpec::Explicit { probs, axes } => {
            let probs = parse_rv::<S>(probs)?;
            let n = probs.len();
            let space = FiniteSpace::new(probs, tol)?;
            if axes.is_empty() {
                return Err(Error::invalid("explicit space needs at least one axis"));
            }
            let mut chains = Vec::with_capacity(axes.len());
            let mut horizons = Vec::with_capacity(axes.len());
            let mut rewards = Vec::with_capacity(axes.len());
            for (i, ax) in axes.iter().enumerate() {
                let h = ax.rewards.len();
                if ax.filtration.len() != h + 1 {
                    return Err(Error::invalid(format!(
                        "axis {i}: needs {} filtration rows for horizon {h}",
                        h + 1
                    )));
                }
                chains.push(chain_partitions(&ax.filtration, n, &format!("axis {i}"))?);
                horizons.push(h);
                let seq: Vec<Vec<S>> =
                    ax.rewards.iter().map(|row| parse_rv(row)).collect::<Result<_>>()?;
                if seq.iter().any(|row| row.len() != n) {
                    return Err(Error::invalid(format!("axis {i}: reward rows need {n} atoms")));
                }
                rewards.push(seq);
            }
            // cells in row-major order, first axis slowest, matching the
            // lattice's own indexing
            let mut cells = vec![vec![]];
            for &h in &horizons {
                let mut next = Vec::new();
                for prefix in &cells {
                    for c in 0..=h {
                        let mut p = prefix.clone();
                        p.push(c);
                        next.push(p);
                    }
                }
                cells = next;
            }
            let parts = cells
                .iter()
                .map(|cell| {
                    let mut acc = chains[0][cell[0]].clone();
                    for i in 1..chains.len() {
                        acc = acc.common_refinement(&chains[i][cell[i]]);
                    }
                    acc
                })
                .collect();
            let lat = Lattice::new_explicit(space, horizons, parts, LatticeKind::Explicit)?;
            Ok((lat, rewards))
        }
    }
}

/// Compiles a scenario file at the given resolved tolerance (zero for the
/// rational mode), validating every constituent object.
pub fn build_scenario<S: Scalar>(file: &ScenarioFile, tol: S) -> Result<Scenario<S>> {
    let beta: S = parse_scalar(&file.beta)?;
    let bound: S = parse_scalar(&file.reward_bound)?;
    let (lattice, rewards) = build_space(&file.space, &tol)?;
    let bandit = Bandit::new(lattice, rewards, beta, bound, tol)?;
    let d = bandit.n_projects();
    let mut starts: Vec<(String, Vec<usize>)> =
        file.starts.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    if starts.is_empty() {
        starts.push(("origin".into(), vec![0; d]));
    }
    for (name, cell) in &starts {
        if cell.len() != d {
            return Err(Error::invalid(format!("start '{name}' needs {d} coordinates")));
        }
        for i in 0..d {
            if cell[i] > bandit.lattice.horizons()[i] {
                return Err(Error::invalid(format!(
                    "start '{name}' exceeds the horizon on project {i}"
                )));
            }
        }
    }
    Ok(Scenario {
        name: file.name.clone(),
        bandit,
        starts,
        suites: file.suites.clone(),
        perturbation: file.perturbation.clone(),
    })
}

fn origin(d: usize) -> BTreeMap<String, Vec<usize>> {
    BTreeMap::from([("origin".to_string(), vec![0; d])])
}

fn det_factor_spec(rewards: &[&str]) -> FactorSpec {
    FactorSpec {
        probs: vec!["1".into()],
        filtration: vec![vec![0]; rewards.len() + 1],
        rewards: rewards.iter().map(|r| vec![r.to_string()]).collect(),
    }
}

/// Single deterministic project paying 1 once; index 2 at scale `K = 2`.
pub fn scenario_a() -> ScenarioFile {
    ScenarioFile {
        name: "scenario_a".into(),
        mode: Mode::Rational,
        tol: None,
        beta: "1/2".into(),
        reward_bound: "2".into(),
        space: SpaceSpec::Product { factors: vec![det_factor_spec(&["1"])] },
        starts: origin(1),
        suites: vec![
            "snell".into(),
            "gittins".into(),
            "right-inverse".into(),
            "restart".into(),
            "prop-ui".into(),
        ],
        perturbation: None,
    }
}

/// Single two-step project: a fair coin revealed after the first step pays
/// 2 or 0 on the second.
pub fn scenario_b() -> ScenarioFile {
    ScenarioFile {
        name: "scenario_b".into(),
        mode: Mode::Rational,
        tol: None,
        beta: "1/2".into(),
        reward_bound: "4".into(),
        space: SpaceSpec::Product {
            factors: vec![FactorSpec {
                probs: vec!["1/2".into(), "1/2".into()],
                filtration: vec![vec![0, 0], vec![0, 1], vec![0, 1]],
                rewards: vec![
                    vec!["1".into(), "1".into()],
                    vec!["2".into(), "0".into()],
                ],
            }],
        },
        starts: origin(1),
        suites: vec![
            "snell".into(),
            "gittins".into(),
            "right-inverse".into(),
            "restart".into(),
            "prop-ui".into(),
        ],
        perturbation: None,
    }
}

/// Two deterministic single-step projects paying 1 and 3/5; the allocation
/// value from the origin is 13/10.
pub fn scenario_c() -> ScenarioFile {
    ScenarioFile {
        name: "scenario_c".into(),
        mode: Mode::Rational,
        tol: None,
        beta: "1/2".into(),
        reward_bound: "2".into(),
        space: SpaceSpec::Product {
            factors: vec![det_factor_spec(&["1"]), det_factor_spec(&["3/5"])],
        },
        starts: origin(2),
        suites: vec!["all".into()],
        perturbation: None,
    }
}

/// The coin project of scenario B next to a deterministic project.
pub fn scenario_d() -> ScenarioFile {
    let coin = match scenario_b().space {
        SpaceSpec::Product { mut factors } => factors.remove(0),
        _ => unreachable!(),
    };
    ScenarioFile {
        name: "scenario_d".into(),
        mode: Mode::Rational,
        tol: None,
        beta: "1/2".into(),
        reward_bound: "4".into(),
        space: SpaceSpec::Product { factors: vec![coin, det_factor_spec(&["3/5"])] },
        starts: origin(2),
        suites: vec!["all".into()],
        perturbation: None,
    }
}

/// Two single-step projects watching one shared increment: the same values
/// as scenario C, but on a sheet rather than a product, so the axis
/// histories are correlated through the common site.
pub fn scenario_e() -> ScenarioFile {
    ScenarioFile {
        name: "scenario_e".into(),
        mode: Mode::Rational,
        tol: None,
        beta: "1/2".into(),
        reward_bound: "2".into(),
        space: SpaceSpec::Sheet {
            dims: vec![1, 1],
            site_probs: vec!["1/2".into()],
            projects: vec![
                ProjectSpec { rewards: vec![vec!["1".into(), "1".into()]] },
                ProjectSpec { rewards: vec![vec!["3/5".into(), "3/5".into()]] },
            ],
        },
        starts: origin(2),
        suites: vec!["f4".into(), "thm-main".into()],
        perturbation: None,
    }
}

/// Two axes that both reveal the same coin after one engagement: the axis
/// histories are maximally correlated, so conditional independence given
/// the meet fails and the intersection property fails with it.
pub fn f4_counterexample() -> ScenarioFile {
    let axis = AxisSpec {
        filtration: vec![vec![0, 0], vec![0, 1]],
        rewards: vec![vec!["1/2".into(), "1/2".into()]],
    };
    ScenarioFile {
        name: "f4_counterexample".into(),
        mode: Mode::Rational,
        tol: None,
        beta: "1/2".into(),
        reward_bound: "1".into(),
        space: SpaceSpec::Explicit {
            probs: vec!["1/2".into(), "1/2".into()],
            axes: vec![axis.clone(), axis],
        },
        starts: origin(2),
        suites: vec!["f4".into()],
        perturbation: None,
    }
}

/// Scenario C with one value-field entry bumped, so the Bellman residual
/// check fails with a localized witness.
pub fn perturbed_field_fixture() -> ScenarioFile {
    let mut file = scenario_c();
    file.name = "perturbed_field".into();
    file.suites = vec!["bellman".into()];
    file.perturbation = Some(Perturbation {
        target: "field".into(),
        cell: vec![1, 0],
        time: 0,
        atom: 0,
        amount: "1/100".into(),
    });
    file
}

/// Scenario B with one envelope entry bumped, so the stopped-martingale
/// check fails with a localized witness.
pub fn perturbed_martingale_fixture() -> ScenarioFile {
    let mut file = scenario_b();
    file.name = "perturbed_martingale".into();
    file.suites = vec!["snell".into()];
    file.perturbation = Some(Perturbation {
        target: "snell".into(),
        cell: vec![],
        time: 1,
        atom: 0,
        amount: "1/100".into(),
    });
    file
}

/// Every bundled scenario in a fixed order.
pub fn bundled() -> Vec<ScenarioFile> {
    vec![
        scenario_a(),
        scenario_b(),
        scenario_c(),
        scenario_d(),
        scenario_e(),
        f4_counterexample(),
        perturbed_field_fixture(),
        perturbed_martingale_fixture(),
    ]
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

fn frac(num: i64, den: i64) -> String {
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    if den == 1 {
        format!("{num}")
    } else {
        format!("{num}/{den}")
    }
}

/// Seeded random instance generator. The same seed and call order produce
/// byte-identical scenario files.
pub struct Generator {
    rng: ChaCha8Rng,
}

const BETAS: [(i64, i64); 3] = [(1, 4), (1, 2), (9, 10)];
const BOUNDS: [i64; 3] = [1, 2, 4];

/// Largest stopping-rule or strategy census a generated instance may have;
/// keeps every oracle run at desk scale.
pub const CENSUS_CAP: u128 = 2000;

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Refining label chain on `atoms` atoms over `depth` steps; each block
    /// splits into at most two parts per step, so block counts stay small.
    fn chain(&mut self, atoms: usize, depth: usize) -> Vec<Vec<usize>> {
        let mut rows = vec![vec![0usize; atoms]];
        let mut next_label = 1usize;
        for _ in 0..depth {
            let prev = rows.last().unwrap().clone();
            let mut row = prev.clone();
            let mut labels: Vec<usize> = prev.clone();
            labels.sort_unstable();
            labels.dedup();
            for lab in labels {
                let members: Vec<usize> = (0..atoms).filter(|&w| prev[w] == lab).collect();
                if members.len() < 2 || !self.rng.gen_bool(0.5) {
                    continue;
                }
                let mut sides: Vec<bool> =
                    members.iter().map(|_| self.rng.gen_bool(0.5)).collect();
                if sides.iter().all(|&s| s) {
                    sides[0] = false;
                }
                if sides.iter().all(|&s| !s) {
                    sides[0] = true;
                }
                for (k, &w) in members.iter().enumerate() {
                    if sides[k] {
                        row[w] = next_label;
                    }
                }
                next_label += 1;
            }
            rows.push(row);
        }
        rows
    }

    fn weights(&mut self, atoms: usize) -> Vec<String> {
        let ws: Vec<i64> = (0..atoms).map(|_| self.rng.gen_range(1..=4)).collect();
        let total: i64 = ws.iter().sum();
        ws.iter().map(|&w| frac(w, total)).collect()
    }

    /// Rewards per step, constant on each block of the chain row at that
    /// step and bounded by `K (1 - beta)`.
    fn block_rewards(
        &mut self,
        chain: &[Vec<usize>],
        depth: usize,
        bound: i64,
        beta: (i64, i64),
    ) -> Vec<Vec<String>> {
        let (bn, bd) = beta;
        (0..depth)
            .map(|k| {
                let row = &chain[k];
                let max_label = row.iter().copied().max().unwrap_or(0);
                let lot: Vec<i64> =
                    (0..=max_label).map(|_| self.rng.gen_range(0..=4)).collect();
                row.iter().map(|&lab| frac(bound * (bd - bn) * lot[lab], bd * 4)).collect()
            })
            .collect()
    }

    fn factor_spec(&mut self, max_atoms: usize, max_h: usize, bound: i64, beta: (i64, i64)) -> FactorSpec {
        let atoms = self.rng.gen_range(1..=max_atoms);
        let h = self.rng.gen_range(1..=max_h);
        let probs = self.weights(atoms);
        let filtration = self.chain(atoms, h);
        let rewards = self.block_rewards(&filtration, h, bound, beta);
        FactorSpec { probs, filtration, rewards }
    }

    /// Random single-project instance: at most 8 atoms, horizon at most 3.
    pub fn single_project(&mut self, label: usize) -> ScenarioFile {
        let beta = BETAS[self.rng.gen_range(0..BETAS.len())];
        let bound = BOUNDS[self.rng.gen_range(0..BOUNDS.len())];
        let factor = self.factor_spec(8, 3, bound, beta);
        ScenarioFile {
            name: format!("rand-single-{label}"),
            mode: Mode::Rational,
            tol: None,
            beta: frac(beta.0, beta.1),
            reward_bound: frac(bound, 1),
            space: SpaceSpec::Product { factors: vec![factor] },
            starts: origin(1),
            suites: vec![
                "snell".into(),
                "gittins".into(),
                "right-inverse".into(),
                "restart".into(),
                "prop-ui".into(),
            ],
            perturbation: None,
        }
    }

    /// Random product instance: up to two projects, at most 4 atoms and
    /// horizon 2 per factor, strategy census within [`CENSUS_CAP`].
    pub fn product(&mut self, label: usize) -> Result<ScenarioFile> {
        for _ in 0..64 {
            let d = if self.rng.gen_range(0..5) == 0 { 1 } else { 2 };
            let beta = BETAS[self.rng.gen_range(0..BETAS.len())];
            let bound = BOUNDS[self.rng.gen_range(0..BOUNDS.len())];
            let factors: Vec<FactorSpec> =
                (0..d).map(|_| self.factor_spec(4, 2, bound, beta)).collect();
            let mut starts = origin(d);
            let shifted: Vec<usize> = factors
                .iter()
                .map(|f| self.rng.gen_range(0..f.rewards.len()))
                .collect();
            if shifted.iter().any(|&c| c > 0) {
                starts.insert("shifted".into(), shifted);
            }
            let file = ScenarioFile {
                name: format!("rand-product-{label}"),
                mode: Mode::Rational,
                tol: None,
                beta: frac(beta.0, beta.1),
                reward_bound: frac(bound, 1),
                space: SpaceSpec::Product { factors },
                starts,
                suites: vec!["all".into()],
                perturbation: None,
            };
            let sc = build_scenario::<crate::Exact>(&file, crate::Exact::zero())?;
            if strategy_census(&sc.bandit, &vec![0; d]) <= CENSUS_CAP {
                return Ok(file);
            }
        }
        Err(Error::Budget("product generator exceeded its census budget".into()))
    }

    /// Random sheet instance: two projects, at most four shared sites,
    /// rewards constant on the blocks of each project's own history.
    pub fn sheet(&mut self, label: usize) -> Result<ScenarioFile> {
        const DIMS: [(usize, usize); 8] =
            [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (1, 4), (4, 1)];
        for _ in 0..64 {
            let dims = DIMS[self.rng.gen_range(0..DIMS.len())];
            let dims = vec![dims.0, dims.1];
            let beta = BETAS[self.rng.gen_range(0..BETAS.len())];
            let bound = BOUNDS[self.rng.gen_range(0..BOUNDS.len())];
            let n_sites = dims[0] * dims[1];
            let site_probs: Vec<String> = (0..n_sites)
                .map(|_| frac(self.rng.gen_range(1..=3), 4))
                .collect();
            let probs: Vec<crate::Exact> =
                site_probs.iter().map(|p| parse_scalar(p).unwrap()).collect();
            let lat = build_sheet::<crate::Exact>(&dims, &probs, &crate::Exact::zero())?;
            let n = lat.n_atoms();
            let (bn, bd) = beta;
            let projects: Vec<ProjectSpec> = (0..2)
                .map(|i| {
                    let rewards = (0..dims[i])
                        .map(|k| {
                            let part = lat.axis_small(i, k);
                            let lot: Vec<i64> = (0..part.blocks().len())
                                .map(|_| self.rng.gen_range(0..=4))
                                .collect();
                            (0..n)
                                .map(|w| {
                                    frac(bound * (bd - bn) * lot[part.block_index(w)], bd * 4)
                                })
                                .collect()
                        })
                        .collect();
                    ProjectSpec { rewards }
                })
                .collect();
            let file = ScenarioFile {
                name: format!("rand-sheet-{label}"),
                mode: Mode::Rational,
                tol: None,
                beta: frac(bn, bd),
                reward_bound: frac(bound, 1),
                space: SpaceSpec::Sheet { dims, site_probs, projects },
                starts: origin(2),
                suites: vec!["f4".into(), "thm-main".into()],
                perturbation: None,
            };
            let sc = build_scenario::<crate::Exact>(&file, crate::Exact::zero())?;
            if strategy_census(&sc.bandit, &[0, 0]) <= CENSUS_CAP {
                return Ok(file);
            }
        }
        Err(Error::Budget("sheet generator exceeded its census budget".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use crate::values::whittle_value;
    use num_traits::Zero;

    #[test]
    fn scalar_parsing() {
        assert_eq!(parse_scalar::<Exact>("3").unwrap(), Exact::from_i64(3));
        assert_eq!(parse_scalar::<Exact>("-1/2").unwrap(), Exact::from_ratio(-1, 2));
        assert_eq!(parse_scalar::<Exact>("0.25").unwrap(), Exact::from_ratio(1, 4));
        assert_eq!(parse_scalar::<Exact>("-0.5").unwrap(), Exact::from_ratio(-1, 2));
        assert!(parse_scalar::<Exact>("1/0").is_err());
        assert!(parse_scalar::<Exact>("abc").is_err());
        assert!(parse_scalar::<Exact>("1.x").is_err());
    }

    #[test]
    fn bundled_scenarios_build() {
        for file in bundled() {
            let sc = build_scenario::<Exact>(&file, Exact::zero()).unwrap();
            assert!(!sc.starts.is_empty(), "{}", file.name);
        }
    }

    #[test]
    fn bundled_scenarios_roundtrip_through_json() {
        for file in bundled() {
            let text = serde_json::to_string_pretty(&file).unwrap();
            let back: ScenarioFile = serde_json::from_str(&text).unwrap();
            assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text, "{}", file.name);
        }
    }

    #[test]
    fn worked_example_value_survives_the_file_format() {
        let sc = build_scenario::<Exact>(&scenario_c(), Exact::zero()).unwrap();
        let idxs = sc.bandit.project_indices().unwrap();
        assert_eq!(
            whittle_value(&sc.bandit, &idxs, &[0, 0], &Exact::zero()).unwrap(),
            vec![Exact::from_ratio(13, 10)]
        );
    }

    #[test]
    fn correlated_axes_fail_conditional_independence() {
        let sc = build_scenario::<Exact>(&f4_counterexample(), Exact::zero()).unwrap();
        let check = sc.bandit.lattice.check_f4(&Exact::zero());
        assert!(!check.pass);
        assert!(check.witness.is_some());
        assert!(sc.bandit.lattice.check_f1().pass);
    }

    #[test]
    fn sheet_scenario_matches_its_product_twin() {
        let e = build_scenario::<Exact>(&scenario_e(), Exact::zero()).unwrap();
        let idxs = e.bandit.project_indices().unwrap();
        assert!(e.bandit.lattice.check_f4(&Exact::zero()).pass);
        let v = crate::values::value_integral(&e.bandit, &idxs, &[0, 0], &Exact::zero());
        assert!(v.iter().all(|x| *x == Exact::from_ratio(13, 10)));
    }

    #[test]
    fn generators_are_deterministic_and_within_budget() {
        let mut g1 = Generator::new(7);
        let mut g2 = Generator::new(7);
        let a1 = g1.single_project(0);
        let a2 = g2.single_project(0);
        assert_eq!(
            serde_json::to_string(&a1).unwrap(),
            serde_json::to_string(&a2).unwrap()
        );
        let p1 = g1.product(0).unwrap();
        let p2 = g2.product(0).unwrap();
        assert_eq!(
            serde_json::to_string(&p1).unwrap(),
            serde_json::to_string(&p2).unwrap()
        );
        let s1 = g1.sheet(0).unwrap();
        let s2 = g2.sheet(0).unwrap();
        assert_eq!(
            serde_json::to_string(&s1).unwrap(),
            serde_json::to_string(&s2).unwrap()
        );
        for k in 0..5 {
            let f = g1.single_project(k);
            build_scenario::<Exact>(&f, Exact::zero()).unwrap();
            let f = g1.product(k).unwrap();
            let sc = build_scenario::<Exact>(&f, Exact::zero()).unwrap();
            let d = sc.bandit.n_projects();
            assert!(strategy_census(&sc.bandit, &vec![0; d]) <= CENSUS_CAP);
            let f = g1.sheet(k).unwrap();
            build_scenario::<Exact>(&f, Exact::zero()).unwrap();
        }
    }
}
