//! Finite probability spaces, partitions, and conditional expectation.
//!
//! A sigma-algebra on a finite space with strictly positive atoms is exactly
//! a partition of the atom set, so filtrations are sequences of partitions
//! ordered by refinement and conditional expectation is a per-block average.
//! Partitions are canonicalized on construction (atoms sorted inside blocks,
//! blocks sorted by least atom), which makes equality syntactic.

use crate::scalar::{total, Scalar};
use crate::{Error, Result};

/// Finite probability space. Atom `i` has probability `probs[i] > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace<S: Scalar> {
    probs: Vec<S>,
}

impl<S: Scalar> FiniteSpace<S> {
    /// Probabilities must be strictly positive and sum to one (exactly in
    /// rational mode, within `sum_tol` otherwise).
    pub fn new(probs: Vec<S>, sum_tol: &S) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("space needs at least one atom"));
        }
        if probs.iter().any(|p| *p <= S::zero()) {
            return Err(Error::invalid("atom probabilities must be strictly positive"));
        }
        let s = total(probs.iter().cloned());
        if (s - S::one()).abs() > *sum_tol {
            return Err(Error::invalid("atom probabilities must sum to 1"));
        }
        Ok(FiniteSpace { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, atom: usize) -> &S {
        &self.probs[atom]
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    /// Unconditional expectation of an atomwise variable.
    pub fn expect(&self, x: &[S]) -> S {
        total((0..self.len()).map(|i| self.probs[i].clone() * x[i].clone()))
    }

    /// Product space: atom `(i, j)` gets probability `p_i * q_j`, with the
    /// left factor's index varying slowest.
    pub fn product(&self, other: &Self) -> Self {
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for p in &self.probs {
            for q in &other.probs {
                probs.push(p.clone() * q.clone());
            }
        }
        FiniteSpace { probs }
    }
}

/// A partition of `{0, .., n-1}` in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::invalid("empty partition block"));
            }
            b.sort_unstable();
            for &a in b.iter() {
                if a >= n {
                    return Err(Error::invalid(format!("atom {a} out of range (n={n})")));
                }
                if seen[a] {
                    return Err(Error::invalid(format!("atom {a} appears in two blocks")));
                }
                seen[a] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("partition does not cover all atoms"));
        }
        blocks.sort_by_key(|b| b[0]);
        let mut block_of = vec![0usize; n];
        for (bi, b) in blocks.iter().enumerate() {
            for &a in b {
                block_of[a] = bi;
            }
        }
        Ok(Partition { n, blocks, block_of })
    }

    /// One block containing every atom.
    pub fn trivial(n: usize) -> Self {
        Partition::new(n, vec![(0..n).collect()]).expect("trivial partition")
    }

    /// Every atom its own block.
    pub fn discrete(n: usize) -> Self {
        Partition::new(n, (0..n).map(|a| vec![a]).collect()).expect("discrete partition")
    }

    /// Blocks are the level sets of `labels`.
    pub fn from_labels<L: Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut map: std::collections::HashMap<&L, Vec<usize>> = Default::default();
        for (a, l) in labels.iter().enumerate() {
            map.entry(l).or_default().push(a);
        }
        Partition::new(labels.len(), map.into_values().collect()).expect("label partition")
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_index(&self, atom: usize) -> usize {
        self.block_of[atom]
    }

    pub fn block_of(&self, atom: usize) -> &[usize] {
        &self.blocks[self.block_of[atom]]
    }

    /// True when every block of `self` is contained in a block of `coarser`,
    /// i.e. the sigma-algebra of `self` contains that of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        debug_assert_eq!(self.n, coarser.n);
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&a| coarser.block_of[a] == coarser.block_of[b[0]]))
    }

    /// Common refinement: blockwise intersections. Corresponds to the join
    /// of the two sigma-algebras.
    pub fn common_refinement(&self, other: &Partition) -> Partition {
        let labels: Vec<(usize, usize)> = (0..self.n)
            .map(|a| (self.block_of[a], other.block_of[a]))
            .collect();
        Partition::from_labels(&labels)
    }

    /// Finest common coarsening, via connected components of the block
    /// overlap graph. Corresponds to the intersection of the two
    /// sigma-algebras.
    pub fn common_coarsening(&self, other: &Partition) -> Partition {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
            let (ra, rb) = (find(parent, a), find(parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        };
        for b in self.blocks.iter().chain(other.blocks.iter()) {
            for w in b.windows(2) {
                union(&mut parent, w[0], w[1]);
            }
        }
        let labels: Vec<usize> = (0..self.n).map(|a| find(&mut parent, a)).collect();
        Partition::from_labels(&labels)
    }

    /// True when `set` is a union of blocks.
    pub fn saturates(&self, set: &[usize]) -> bool {
        let inset = {
            let mut v = vec![false; self.n];
            for &a in set {
                v[a] = true;
            }
            v
        };
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&a| inset[a]) || b.iter().all(|&a| !inset[a]))
    }

    /// True when `x` is constant on every block.
    pub fn measures<S: Scalar>(&self, x: &[S]) -> bool {
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&a| x[a] == x[b[0]]))
    }
}

/// Atomwise random variable.
pub type Rv<S> = Vec<S>;

/// Conditional expectation of `x` given the sigma-algebra of `part`:
/// on each block, the probability-weighted average.
pub fn cond_expect<S: Scalar>(space: &FiniteSpace<S>, part: &Partition, x: &[S]) -> Rv<S> {
    debug_assert_eq!(space.len(), part.n_atoms());
    debug_assert_eq!(space.len(), x.len());
    let mut out = vec![S::zero(); x.len()];
    for b in part.blocks() {
        let mass = total(b.iter().map(|&a| space.prob(a).clone()));
        let num = total(b.iter().map(|&a| space.prob(a).clone() * x[a].clone()));
        let avg = num / mass;
        for &a in b {
            out[a] = avg.clone();
        }
    }
    out
}

/// Conditional probability of a set of atoms given `part`.
pub fn cond_prob<S: Scalar>(space: &FiniteSpace<S>, part: &Partition, set: &[usize]) -> Rv<S> {
    let mut ind = vec![S::zero(); space.len()];
    for &a in set {
        ind[a] = S::one();
    }
    cond_expect(space, part, &ind)
}
