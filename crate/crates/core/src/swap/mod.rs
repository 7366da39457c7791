//! Swappability: read/write approximations, strong swappability, the
//! swap relation of a block, trace equivalence and brute-force oracles.

mod mazurkiewicz;
mod oracle;
mod rwset;

use std::fmt;

pub use mazurkiewicz::{trace_class, trace_equivalent};
pub use oracle::{
    check_safe_approx, swap_oracle, ApproxMode, ApproxVerdict, StateSpace, SwapVerdict,
    DEFAULT_PAIR_BOUND,
};
pub use rwset::{Access, AccessSet, Analysis, RwAnalysis, RwSets};

use crate::par;

/// Bernstein-style disjointness: neither transaction writes what the other
/// reads or writes.
pub fn strong_swap(a: &RwSets, b: &RwSets) -> bool {
    !a.reads.union(&a.writes).overlaps(&b.writes) && !b.reads.union(&b.writes).overlaps(&a.writes)
}

/// Symmetric, irreflexive independence relation over block positions
/// (0-based internally; displayed 1-based).
#[derive(Clone, PartialEq, Eq)]
pub struct SwapRelation {
    n: usize,
    bits: Vec<bool>,
}

impl SwapRelation {
    pub fn empty(n: usize) -> Self {
        SwapRelation {
            n,
            bits: vec![false; n * n],
        }
    }

    /// Build from a predicate evaluated on `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut r = SwapRelation::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                if f(i, j) {
                    r.set(i, j, true);
                }
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.bits[i * self.n + j]
    }

    /// Sets both `(i,j)` and `(j,i)`; the diagonal stays false.
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i < self.n && j < self.n, "position out of range");
        if i == j {
            return;
        }
        self.bits[i * self.n + j] = v;
        self.bits[j * self.n + i] = v;
    }

    /// Independent pairs `(i, j)` with `i < j`, 0-based.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j))
            .collect()
    }

    pub fn is_symmetric_irreflexive(&self) -> bool {
        (0..self.n).all(|i| !self.get(i, i) && (0..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

impl fmt::Debug for SwapRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_based: Vec<_> = self.pairs().into_iter().map(|(i, j)| (i + 1, j + 1)).collect();
        write!(f, "SwapRelation({one_based:?})")
    }
}

/// Per-transaction analyses plus the relation they induce.
#[derive(Clone, Debug)]
pub struct BlockAnalysis {
    pub analyses: Vec<Analysis>,
    pub relation: SwapRelation,
}

impl BlockAnalysis {
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.analyses.len())
            .filter(|&i| self.analyses[i].flagged)
            .collect()
    }
}

/// Analyse every transaction (in parallel) and relate the strongly
/// swappable pairs. Flagged transactions are dependent on everything.
pub fn build_swap_relation<Tx: Sync>(block: &[Tx], analysis: &dyn RwAnalysis<Tx>) -> BlockAnalysis {
    let analyses = par::map(block, |tx| analysis.analyze(tx));
    let relation = SwapRelation::from_fn(block.len(), |i, j| {
        !analyses[i].flagged
            && !analyses[j].flagged
            && strong_swap(&analyses[i].sets, &analyses[j].sets)
    });
    BlockAnalysis { analyses, relation }
}
