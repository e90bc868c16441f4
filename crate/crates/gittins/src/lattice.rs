//! Multi-parameter filtration lattices and the (F4) machinery.
//!
//! A lattice assigns a partition `Partition(r)` to every cell `r` of the box
//! `[0,H_1] x .. x [0,H_d]`. Condition (F1) is refinement along every edge,
//! (F2) is vacuous here (all atoms strictly positive), and (F4) is pairwise
//! conditional independence given the meet:
//! `P(A n B | F(s^r)) = P(A | F(s^r)) P(B | F(s^r))`
//! for all blocks `A` of `Partition(s)` and `B` of `Partition(r)`.
//!
//! Two constructions are built in. The product lattice joins independent
//! per-project filtrations on the product space. The sheet lattice assigns
//! i.i.d. `+/-1` increments to the sites of the box `[1,H_1] x .. x [1,H_d]`;
//! `Partition(r)` is generated by the increments inside the rectangle at `r`,
//! a rectangle with a zero side generating the trivial partition. The sheet
//! satisfies (F4) but is not a join of independent one-parameter filtrations.

use crate::prob::{cond_expect, cond_prob, FiniteSpace, Partition, Rv};
use crate::report::Check;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Componentwise minimum of two cells.
pub fn meet_cell(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().zip(b).map(|(&x, &y)| x.min(y)).collect()
}

/// Componentwise order on cells.
pub fn cell_le(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| x <= y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    Product,
    Sheet,
    Explicit,
}

#[derive(Debug, Clone)]
pub struct Lattice<S: Scalar> {
    space: FiniteSpace<S>,
    horizons: Vec<usize>,
    strides: Vec<usize>,
    parts: Vec<Partition>,
    kind: LatticeKind,
}

/// Row-major strides for the cell box.
fn strides_of(horizons: &[usize]) -> (Vec<usize>, usize) {
    let mut strides = vec![0usize; horizons.len()];
    let mut acc = 1usize;
    for i in (0..horizons.len()).rev() {
        strides[i] = acc;
        acc *= horizons[i] + 1;
    }
    (strides, acc)
}

impl<S: Scalar> Lattice<S> {
    pub fn new_explicit(
        space: FiniteSpace<S>,
        horizons: Vec<usize>,
        parts: Vec<Partition>,
        kind: LatticeKind,
    ) -> Result<Self> {
        if horizons.is_empty() {
            return Err(Error::invalid("lattice needs at least one axis"));
        }
        let (strides, n_cells) = strides_of(&horizons);
        if parts.len() != n_cells {
            return Err(Error::invalid(format!(
                "expected {n_cells} partitions, got {}",
                parts.len()
            )));
        }
        if parts.iter().any(|p| p.n_atoms() != space.len()) {
            return Err(Error::invalid("partition atom count mismatch"));
        }
        Ok(Lattice { space, horizons, strides, parts, kind })
    }

    pub fn space(&self) -> &FiniteSpace<S> {
        &self.space
    }

    pub fn horizons(&self) -> &[usize] {
        &self.horizons
    }

    pub fn dim(&self) -> usize {
        self.horizons.len()
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn n_atoms(&self) -> usize {
        self.space.len()
    }

    pub fn cell_index(&self, r: &[usize]) -> usize {
        debug_assert_eq!(r.len(), self.horizons.len());
        r.iter().zip(&self.strides).map(|(&c, &s)| c * s).sum()
    }

    pub fn part(&self, r: &[usize]) -> &Partition {
        &self.parts[self.cell_index(r)]
    }

    /// All cells of the box in row-major order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &h in &self.horizons {
            let mut next = Vec::with_capacity(out.len() * (h + 1));
            for prefix in &out {
                for c in 0..=h {
                    let mut p = prefix.clone();
                    p.push(c);
                    next.push(p);
                }
            }
            out = next;
        }
        out
    }

    /// `F_i(t)`: the history of axis `i` in isolation, `Partition(t e_i)`.
    pub fn axis_small(&self, i: usize, t: usize) -> &Partition {
        let mut r = vec![0usize; self.dim()];
        r[i] = t;
        &self.parts[self.cell_index(&r)]
    }

    /// `F^i(t)`: axis `i` up to `t` with all other axes complete,
    /// `Partition(H_1, .., t, .., H_d)`.
    pub fn axis_large(&self, i: usize, t: usize) -> &Partition {
        let mut r = self.horizons.clone();
        r[i] = t;
        &self.parts[self.cell_index(&r)]
    }

    /// (F1): refinement along every lattice edge.
    pub fn check_f1(&self) -> Check<S> {
        for cell in self.cells() {
            for i in 0..self.dim() {
                if cell[i] < self.horizons[i] {
                    let mut up = cell.clone();
                    up[i] += 1;
                    if !self.part(&up).refines(self.part(&cell)) {
                        return Check::fail(
                            "f1-refinement",
                            format!("Partition{up:?} does not refine Partition{cell:?}"),
                        );
                    }
                }
            }
        }
        Check::pass("f1-refinement")
    }

    /// (F2) is automatic for strictly positive atoms; assert positivity.
    pub fn check_f2(&self) -> Check<S> {
        if self.space.probs().iter().all(|p| *p > S::zero()) {
            Check::pass("f2-positive-atoms")
        } else {
            Check::fail("f2-positive-atoms", "atom with nonpositive probability".into())
        }
    }

    /// (F4): pairwise conditional independence given the meet, checked on
    /// every pair of blocks, plus the intersection consequence
    /// `F(s) n F(r) = F(s ^ r)` via the finest common coarsening.
    pub fn check_f4(&self, tol: &S) -> Check<S> {
        let cells = self.cells();
        for s in &cells {
            for r in &cells {
                let m = meet_cell(s, r);
                let ps = self.part(s);
                let pr = self.part(r);
                let pm = self.part(&m);
                if ps.common_coarsening(pr) != *pm {
                    return Check::fail(
                        "f4-conditional-independence",
                        format!("F{s:?} n F{r:?} != F{m:?} (intersection mismatch)"),
                    );
                }
                for a in ps.blocks() {
                    for b in pr.blocks() {
                        let both: Vec<usize> =
                            a.iter().copied().filter(|x| b.contains(x)).collect();
                        let lhs = cond_prob(&self.space, pm, &both);
                        let pa = cond_prob(&self.space, pm, a);
                        let pb = cond_prob(&self.space, pm, b);
                        for w in 0..self.n_atoms() {
                            let rhs = pa[w].clone() * pb[w].clone();
                            if (lhs[w].clone() - rhs).abs() > *tol {
                                return Check::fail(
                                    "f4-conditional-independence",
                                    format!(
                                        "P(AnB|F{m:?}) != P(A|.)P(B|.) at atom {w}, A={a:?} in F{s:?}, B={b:?} in F{r:?}"
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }
        Check::pass("f4-conditional-independence")
    }

    /// Commuting conditional expectations on atom indicators:
    /// `E[E[xi|F(s)]|F(r)] = E[E[xi|F(r)]|F(s)] = E[xi|F(s^r)]`.
    pub fn check_commutation(&self, tol: &S) -> Check<S> {
        let cells = self.cells();
        let n = self.n_atoms();
        for s in &cells {
            for r in &cells {
                let m = meet_cell(s, r);
                for w in 0..n {
                    let mut ind = vec![S::zero(); n];
                    ind[w] = S::one();
                    let sr = cond_expect(&self.space, self.part(r), &cond_expect(&self.space, self.part(s), &ind));
                    let rs = cond_expect(&self.space, self.part(s), &cond_expect(&self.space, self.part(r), &ind));
                    let mm = cond_expect(&self.space, self.part(&m), &ind);
                    for x in 0..n {
                        if (sr[x].clone() - mm[x].clone()).abs() > *tol
                            || (rs[x].clone() - mm[x].clone()).abs() > *tol
                        {
                            return Check::fail(
                                "f4-commutation",
                                format!("commutation fails for indicator of atom {w} at cells {s:?}, {r:?}"),
                            );
                        }
                    }
                }
            }
        }
        Check::pass("f4-commutation")
    }

    /// Meet identity `F(s) = /\_i F^i(s_i)` (finest common coarsening of the
    /// large axis filtrations).
    pub fn check_meet_identity(&self) -> Check<S> {
        for cell in self.cells() {
            let mut acc = self.axis_large(0, cell[0]).clone();
            for i in 1..self.dim() {
                acc = acc.common_coarsening(self.axis_large(i, cell[i]));
            }
            if acc != *self.part(&cell) {
                return Check::fail(
                    "meet-identity",
                    format!("/\\_i F^i(s_i) != F(s) at s={cell:?}"),
                );
            }
        }
        Check::pass("meet-identity")
    }

    /// For a sheet with every dimension positive, the join of the small axis
    /// filtrations is strictly coarser than `Partition(s)` somewhere: the
    /// lattice is not a product of independent one-parameter filtrations.
    /// Passing means a witness cell was found.
    pub fn check_not_product_witness(&self) -> Check<S> {
        for cell in self.cells() {
            let mut acc = self.axis_small(0, cell[0]).clone();
            for i in 1..self.dim() {
                acc = acc.common_refinement(self.axis_small(i, cell[i]));
            }
            let p = self.part(&cell);
            if p.refines(&acc) && *p != acc {
                return Check::pass_with(
                    "sheet-not-product",
                    format!("join of axis histories strictly coarser than F{cell:?}"),
                );
            }
        }
        Check::fail("sheet-not-product", "no witness cell found".into())
    }
}

/// One project's own space, filtration, and rewards, before embedding.
#[derive(Debug, Clone)]
pub struct Factor<S: Scalar> {
    pub space: FiniteSpace<S>,
    /// `filt[t]` is the project's sigma-algebra after `t` engagements,
    /// `t = 0..=horizon`.
    pub filt: Vec<Partition>,
    /// `rewards[k]` pays on the step from count `k` to `k+1` and must be
    /// measurable with respect to `filt[k]` (predictability).
    pub rewards: Vec<Rv<S>>,
}

impl<S: Scalar> Factor<S> {
    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.filt.len() != self.rewards.len() + 1 {
            return Err(Error::invalid("factor needs one partition per count 0..=H"));
        }
        for t in 0..self.rewards.len() {
            if self.rewards[t].len() != self.space.len() {
                return Err(Error::invalid("factor reward length mismatch"));
            }
            if !self.filt[t].measures(&self.rewards[t]) {
                return Err(Error::invalid(format!(
                    "reward {} not measurable w.r.t. the sigma-algebra at count {} (predictability)",
                    t + 1,
                    t
                )));
            }
        }
        for t in 0..self.rewards.len() {
            if !self.filt[t + 1].refines(&self.filt[t]) {
                return Err(Error::invalid(format!("factor filtration not increasing at {t}")));
            }
        }
        Ok(())
    }
}

/// Product lattice over independent factors, plus the pulled-back rewards on
/// the joint space. Joint atom index is row-major over factor atoms.
pub struct ProductBuild<S: Scalar> {
    pub lattice: Lattice<S>,
    /// `factor_atom[i][w]` is the factor-`i` atom under joint atom `w`.
    pub factor_atom: Vec<Vec<usize>>,
    /// Rewards pulled back to the joint space, per project per step.
    pub rewards: Vec<Vec<Rv<S>>>,
}

pub fn build_product<S: Scalar>(factors: &[Factor<S>], sum_tol: &S) -> Result<ProductBuild<S>> {
    if factors.is_empty() {
        return Err(Error::invalid("product needs at least one factor"));
    }
    for f in factors {
        f.validate()?;
    }
    let mut space = factors[0].space.clone();
    for f in &factors[1..] {
        space = space.product(&f.space);
    }
    let n = space.len();
    let space = FiniteSpace::new(space.probs().to_vec(), sum_tol)?;

    // joint atom -> per-factor atom, row-major with the first factor slowest
    let sizes: Vec<usize> = factors.iter().map(|f| f.space.len()).collect();
    let mut factor_atom = vec![vec![0usize; n]; factors.len()];
    for w in 0..n {
        let mut rest = w;
        for i in (0..factors.len()).rev() {
            factor_atom[i][w] = rest % sizes[i];
            rest /= sizes[i];
        }
    }

    let horizons: Vec<usize> = factors.iter().map(|f| f.horizon()).collect();
    let (_, n_cells) = strides_of(&horizons);
    let mut parts = Vec::with_capacity(n_cells);
    // Partition(r) labels each joint atom by its per-factor block at r_i.
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
    for cell in &cells {
        let labels: Vec<Vec<usize>> = (0..n)
            .map(|w| {
                (0..factors.len())
                    .map(|i| factors[i].filt[cell[i]].block_index(factor_atom[i][w]))
                    .collect()
            })
            .collect();
        parts.push(Partition::from_labels(&labels));
    }

    let rewards: Vec<Vec<Rv<S>>> = factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.rewards
                .iter()
                .map(|rv| (0..n).map(|w| rv[factor_atom[i][w]].clone()).collect())
                .collect()
        })
        .collect();

    let lattice = Lattice::new_explicit(space, horizons, parts, LatticeKind::Product)?;
    Ok(ProductBuild { lattice, factor_atom, rewards })
}

/// Sheet lattice: i.i.d. `+/-1` site increments on the box
/// `[1,H_1] x .. x [1,H_d]`; `Partition(r)` is generated by the increments in
/// the rectangle at `r`. `site_probs[k]` is the probability of `+1` at site
/// `k` (sites in row-major order); atoms are bit masks, bit `k` set meaning
/// `+1` at site `k`.
pub fn build_sheet<S: Scalar>(
    dims: &[usize],
    site_probs: &[S],
    sum_tol: &S,
) -> Result<Lattice<S>> {
    if dims.is_empty() {
        return Err(Error::invalid("sheet needs at least one dimension"));
    }
    // sites: multi-indices with every coordinate >= 1
    let mut sites = vec![vec![]];
    for &h in dims {
        let mut next = Vec::new();
        for prefix in &sites {
            for c in 1..=h {
                let mut p = prefix.clone();
                p.push(c);
                next.push(p);
            }
        }
        sites = next;
    }
    let k = sites.len();
    if k > 20 {
        return Err(Error::invalid("sheet too large"));
    }
    if site_probs.len() != k {
        return Err(Error::invalid(format!("expected {k} site probabilities")));
    }
    if site_probs.iter().any(|p| *p <= S::zero() || *p >= S::one()) {
        return Err(Error::invalid("site probabilities must lie strictly in (0,1)"));
    }
    let n = 1usize << k;
    let probs: Vec<S> = (0..n)
        .map(|w| {
            let mut p = S::one();
            for (bit, sp) in site_probs.iter().enumerate() {
                p = p * if w >> bit & 1 == 1 { sp.clone() } else { S::one() - sp.clone() };
            }
            p
        })
        .collect();
    let space = FiniteSpace::new(probs, sum_tol)?;

    let mut cells = vec![vec![]];
    for &h in dims {
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
    let mut parts = Vec::with_capacity(cells.len());
    for cell in &cells {
        // mask of sites inside the rectangle at `cell`
        let mut mask = 0usize;
        for (bit, site) in sites.iter().enumerate() {
            if site.iter().zip(cell).all(|(&a, &r)| a <= r) {
                mask |= 1 << bit;
            }
        }
        let labels: Vec<usize> = (0..n).map(|w| w & mask).collect();
        parts.push(Partition::from_labels(&labels));
    }
    Lattice::new_explicit(space, dims.to_vec(), parts, LatticeKind::Sheet)
}

/// Lattice-valued random point `nu` with `{nu = r} in F(r)` for every cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingPoint {
    /// Per atom, the assigned cell.
    pub cells: Vec<Vec<usize>>,
}

impl StoppingPoint {
    pub fn le(&self, other: &StoppingPoint) -> bool {
        self.cells
            .iter()
            .zip(&other.cells)
            .all(|(a, b)| cell_le(a, b))
    }
}

pub fn validate_stopping_point<S: Scalar>(lat: &Lattice<S>, sp: &StoppingPoint) -> Result<()> {
    if sp.cells.len() != lat.n_atoms() {
        return Err(Error::invalid("stopping point atom count mismatch"));
    }
    let mut by_cell: std::collections::HashMap<&[usize], Vec<usize>> = Default::default();
    for (w, c) in sp.cells.iter().enumerate() {
        by_cell.entry(c.as_slice()).or_default().push(w);
    }
    for (cell, atoms) in by_cell {
        if !lat.part(cell).saturates(&atoms) {
            return Err(Error::invalid(format!(
                "{{nu = {cell:?}}} is not a union of Partition{cell:?} blocks"
            )));
        }
    }
    Ok(())
}

/// Sigma-algebra generated by a stopping point, as a partition: atoms are
/// equivalent when they share the cell and the block inside that cell.
pub fn stopped_partition<S: Scalar>(lat: &Lattice<S>, sp: &StoppingPoint) -> Partition {
    let labels: Vec<(usize, usize)> = (0..lat.n_atoms())
        .map(|w| {
            let cell = &sp.cells[w];
            (lat.cell_index(cell), lat.part(cell).block_index(w))
        })
        .collect();
    Partition::from_labels(&labels)
}

/// Enumerate every stopping point of the lattice.
///
/// DFS over atoms in increasing order: assigning cell `r` to an atom forces
/// the whole `Partition(r)`-block of that atom to `r` (the event `{nu = r}`
/// must be a union of blocks). `budget` caps the number of points produced.
pub fn enumerate_stopping_points<S: Scalar>(
    lat: &Lattice<S>,
    budget: usize,
) -> Result<Vec<StoppingPoint>> {
    let n = lat.n_atoms();
    let cells = lat.cells();
    let mut out = Vec::new();
    let mut assign: Vec<Option<usize>> = vec![None; n]; // cell index per atom
    fn dfs<S: Scalar>(
        lat: &Lattice<S>,
        cells: &[Vec<usize>],
        assign: &mut Vec<Option<usize>>,
        out: &mut Vec<StoppingPoint>,
        budget: usize,
    ) -> Result<()> {
        let w = match assign.iter().position(|a| a.is_none()) {
            None => {
                if out.len() >= budget {
                    return Err(Error::Budget(format!(
                        "more than {budget} stopping points"
                    )));
                }
                out.push(StoppingPoint {
                    cells: assign
                        .iter()
                        .map(|a| cells[a.unwrap()].clone())
                        .collect(),
                });
                return Ok(());
            }
            Some(w) => w,
        };
        for (ci, cell) in cells.iter().enumerate() {
            let block = lat.part(cell).block_of(w);
            if block.iter().any(|&x| assign[x].is_some()) {
                continue; // block member already pinned to another cell
            }
            for &x in block {
                assign[x] = Some(ci);
            }
            dfs(lat, cells, assign, out, budget)?;
            for &x in block {
                assign[x] = None;
            }
        }
        Ok(())
    }
    dfs(lat, &cells, &mut assign, &mut out, budget)?;
    Ok(out)
}

/// A random field: one random variable per lattice cell, row-major.
pub type Field<S> = Vec<Rv<S>>;

pub fn field_at<'a, S: Scalar>(lat: &Lattice<S>, field: &'a Field<S>, r: &[usize]) -> &'a Rv<S> {
    &field[lat.cell_index(r)]
}

/// Adaptedness: `X(r)` measurable with respect to `Partition(r)`.
pub fn check_field_adapted<S: Scalar>(lat: &Lattice<S>, field: &Field<S>) -> Check<S> {
    for cell in lat.cells() {
        if !lat.part(&cell).measures(field_at(lat, field, &cell)) {
            return Check::fail("field-adapted", format!("X{cell:?} not F{cell:?}-measurable"));
        }
    }
    Check::pass("field-adapted")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drift {
    Supermartingale,
    Martingale,
}

/// The three equivalent supermartingale characterizations of a field:
/// (a) `E[X(r)|F(s)] <= X(s)` for `s <= r`;
/// (b) `E[X(r)|F(s)] <= X(s ^ r)` for all pairs;
/// (c) each axis process is a one-parameter supermartingale for the large
/// axis filtration `F^i`.
/// Returns one check per form; on an (F4) lattice the verdicts must agree.
pub fn check_field_drift<S: Scalar>(
    lat: &Lattice<S>,
    field: &Field<S>,
    drift: Drift,
    tol: &S,
) -> Vec<Check<S>> {
    let cells = lat.cells();
    let ok = |gap: &S| match drift {
        Drift::Supermartingale => *gap <= *tol,
        Drift::Martingale => gap.abs() <= *tol,
    };
    let mut checks = Vec::new();

    let mut fail_a = None;
    'a: for s in &cells {
        for r in &cells {
            if !cell_le(s, r) {
                continue;
            }
            let e = cond_expect(lat.space(), lat.part(s), field_at(lat, field, r));
            let xs = field_at(lat, field, s);
            for w in 0..lat.n_atoms() {
                let gap = e[w].clone() - xs[w].clone();
                if !ok(&gap) {
                    fail_a = Some(format!("E[X{r:?}|F{s:?}] vs X{s:?} at atom {w}"));
                    break 'a;
                }
            }
        }
    }
    checks.push(match fail_a {
        None => Check::pass("drift-ordered-pairs"),
        Some(wit) => Check::fail("drift-ordered-pairs", wit),
    });

    let mut fail_b = None;
    'b: for s in &cells {
        for r in &cells {
            let m = meet_cell(s, r);
            let e = cond_expect(lat.space(), lat.part(s), field_at(lat, field, r));
            let xm = field_at(lat, field, &m);
            for w in 0..lat.n_atoms() {
                let gap = e[w].clone() - xm[w].clone();
                if !ok(&gap) {
                    fail_b = Some(format!("E[X{r:?}|F{s:?}] vs X{m:?} at atom {w}"));
                    break 'b;
                }
            }
        }
    }
    checks.push(match fail_b {
        None => Check::pass("drift-all-pairs-meet"),
        Some(wit) => Check::fail("drift-all-pairs-meet", wit),
    });

    let mut fail_c = None;
    'c: for cell in &cells {
        for i in 0..lat.dim() {
            if cell[i] < lat.horizons()[i] {
                let mut up = cell.clone();
                up[i] += 1;
                let e = cond_expect(lat.space(), lat.axis_large(i, cell[i]), field_at(lat, field, &up));
                let xs = field_at(lat, field, cell);
                for w in 0..lat.n_atoms() {
                    let gap = e[w].clone() - xs[w].clone();
                    if !ok(&gap) {
                        fail_c = Some(format!(
                            "axis {i} step at {cell:?}, atom {w} (large filtration)"
                        ));
                        break 'c;
                    }
                }
            }
        }
    }
    checks.push(match fail_c {
        None => Check::pass("drift-axis-large"),
        Some(wit) => Check::fail("drift-axis-large", wit),
    });

    checks
}

/// Optional sampling: for a supermartingale field and stopping points
/// `sigma <= tau`, `E[X(tau) | F(sigma)] <= X(sigma)` atomwise.
pub fn check_optional_sampling<S: Scalar>(
    lat: &Lattice<S>,
    field: &Field<S>,
    sigma: &StoppingPoint,
    tau: &StoppingPoint,
    drift: Drift,
    tol: &S,
) -> Check<S> {
    debug_assert!(sigma.le(tau));
    let n = lat.n_atoms();
    let x_tau: Rv<S> = (0..n)
        .map(|w| field_at(lat, field, &tau.cells[w])[w].clone())
        .collect();
    let x_sigma: Rv<S> = (0..n)
        .map(|w| field_at(lat, field, &sigma.cells[w])[w].clone())
        .collect();
    let stopped = stopped_partition(lat, sigma);
    let e = cond_expect(lat.space(), &stopped, &x_tau);
    for w in 0..n {
        let gap = e[w].clone() - x_sigma[w].clone();
        let bad = match drift {
            Drift::Supermartingale => gap > *tol,
            Drift::Martingale => gap.abs() > *tol,
        };
        if bad {
            return Check::fail(
                "optional-sampling",
                format!("E[X(tau)|F(sigma)] vs X(sigma) at atom {w}, sigma cell {:?}", sigma.cells[w]),
            );
        }
    }
    Check::pass("optional-sampling")
}

/// Enlargement: a one-parameter process adapted to the small axis filtration
/// `F_i` that is an `F_i`-(super)martingale must also be one for the large
/// filtration `F^i`. `q[t]` is given for `t = 0..=H_i`; both one-step checks
/// run and both verdicts are reported.
pub fn check_enlargement<S: Scalar>(
    lat: &Lattice<S>,
    i: usize,
    q: &[Rv<S>],
    drift: Drift,
    tol: &S,
) -> Vec<Check<S>> {
    let h = lat.horizons()[i];
    debug_assert_eq!(q.len(), h + 1);
    let mut out = Vec::new();
    for (label, large) in [("small", false), ("large", true)] {
        let mut failure = None;
        't: for t in 0..h {
            let part = if large { lat.axis_large(i, t) } else { lat.axis_small(i, t) };
            if !large && !part.measures(&q[t]) {
                failure = Some(format!("Q({t}) not adapted to the small axis filtration"));
                break 't;
            }
            let e = cond_expect(lat.space(), part, &q[t + 1]);
            for w in 0..lat.n_atoms() {
                let gap = e[w].clone() - q[t][w].clone();
                let bad = match drift {
                    Drift::Supermartingale => gap > *tol,
                    Drift::Martingale => gap.abs() > *tol,
                };
                if bad {
                    failure = Some(format!("one-step drift at t={t}, atom {w}"));
                    break 't;
                }
            }
        }
        let name = format!("enlargement-axis{i}-{label}");
        out.push(match failure {
            None => Check::pass(&name),
            Some(wit) => Check::fail(&name, wit),
        });
    }
    out
}

/// Supermartingale one-step residuals for a one-parameter process against an
/// arbitrary partition sequence; used by tests and fixtures.
pub fn one_param_drift_ok<S: Scalar>(
    space: &FiniteSpace<S>,
    parts: &[Partition],
    q: &[Rv<S>],
    drift: Drift,
    tol: &S,
) -> bool {
    for t in 0..q.len().saturating_sub(1) {
        let e = cond_expect(space, &parts[t], &q[t + 1]);
        for w in 0..space.len() {
            let gap = e[w].clone() - q[t][w].clone();
            let bad = match drift {
                Drift::Supermartingale => gap > *tol,
                Drift::Martingale => gap.abs() > *tol,
            };
            if bad {
                return false;
            }
        }
    }
    true
}
