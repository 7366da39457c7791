//! Petri nets with step semantics, and the occurrence net of a block.
//!
//! Transitions are identified by their 0-based index, which for nets built
//! from a block is the position of the transaction minus one.

mod dot;

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::swap::SwapRelation;

pub use dot::export_dot;

/// Default cap on the number of transactions turned into a net.
pub const DEFAULT_MAX_BLOCK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Place {
    /// `(*, t)`: initially marked input of `t`.
    Start(usize),
    /// `(t, *)`: output of `t`.
    End(usize),
    /// `(t, t')`: `t` must fire before `t'`.
    Between(usize, usize),
    /// A place of a hand-built net.
    Named(String),
}

impl Place {
    pub fn label(&self, transitions: &[Transition]) -> String {
        let t = |i: &usize| {
            transitions
                .get(*i)
                .map_or_else(|| format!("t{}", i + 1), |t| format!("t{}", t.position))
        };
        match self {
            Place::Start(i) => format!("(*,{})", t(i)),
            Place::End(i) => format!("({},*)", t(i)),
            Place::Between(i, j) => format!("({},{})", t(i), t(j)),
            Place::Named(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub label: String,
    /// 1-based position in the block.
    pub position: usize,
}

/// A marking: tokens per place index.
pub type Marking = Vec<u32>;

/// A step: a finite set of transition indices.
pub type Step = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    /// Per transition: `(place, weight)` consumed and produced.
    pre: Vec<Vec<(usize, u32)>>,
    post: Vec<Vec<(usize, u32)>>,
    initial: Marking,
}

/// Incremental construction of arbitrary nets.
#[derive(Default)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    pre: Vec<Vec<(usize, u32)>>,
    post: Vec<Vec<(usize, u32)>>,
    initial: Marking,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, p: Place, tokens: u32) -> usize {
        self.places.push(p);
        self.initial.push(tokens);
        self.places.len() - 1
    }

    pub fn transition(&mut self, label: impl Into<String>) -> usize {
        self.transitions.push(Transition {
            label: label.into(),
            position: self.transitions.len() + 1,
        });
        self.pre.push(Vec::new());
        self.post.push(Vec::new());
        self.transitions.len() - 1
    }

    /// Arc from place `p` into transition `t`; repeated arcs add weight.
    pub fn input(&mut self, p: usize, t: usize) -> &mut Self {
        add_arc(&mut self.pre[t], p);
        self
    }

    /// Arc from transition `t` into place `p`.
    pub fn output(&mut self, t: usize, p: usize) -> &mut Self {
        add_arc(&mut self.post[t], p);
        self
    }

    pub fn build(self) -> PetriNet {
        PetriNet {
            places: self.places,
            transitions: self.transitions,
            pre: self.pre,
            post: self.post,
            initial: self.initial,
        }
    }
}

fn add_arc(arcs: &mut Vec<(usize, u32)>, p: usize) {
    match arcs.iter_mut().find(|(q, _)| *q == p) {
        Some((_, w)) => *w += 1,
        None => arcs.push((p, 1)),
    }
}

/// Occurrence-net conditions violated by a net.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NonBooleanArc { place: usize, transition: usize },
    SharedConsumer { place: usize, consumers: usize },
    /// A place is initially marked iff it has no producer; this one is not.
    Marking { place: usize, producers: usize, tokens: u32 },
    Cycle { transition: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonBooleanArc { place, transition } => {
                write!(f, "arc between place {place} and transition {transition} has weight > 1")
            }
            Violation::SharedConsumer { place, consumers } => {
                write!(f, "place {place} has {consumers} consumers")
            }
            Violation::Marking {
                place,
                producers,
                tokens,
            } => write!(f, "place {place} has {producers} producers and {tokens} initial tokens"),
            Violation::Cycle { transition } => write!(f, "transition {transition} lies on a cycle"),
        }
    }
}

impl PetriNet {
    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn pre(&self, t: usize) -> &[(usize, u32)] {
        &self.pre[t]
    }

    pub fn post(&self, t: usize) -> &[(usize, u32)] {
        &self.post[t]
    }

    pub fn place_index(&self, p: &Place) -> Option<usize> {
        self.places.iter().position(|q| q == p)
    }

    /// Places `(t, t')` between distinct transitions, as index pairs.
    pub fn between_places(&self) -> Vec<(usize, usize)> {
        self.places
            .iter()
            .filter_map(|p| match p {
                Place::Between(i, j) => Some((*i, *j)),
                _ => None,
            })
            .collect()
    }

    fn producers(&self, p: usize) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&t| self.post[t].iter().any(|(q, _)| *q == p))
            .collect()
    }

    fn consumers(&self, p: usize) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&t| self.pre[t].iter().any(|(q, _)| *q == p))
            .collect()
    }

    /// Check the occurrence-net conditions and list every violation.
    pub fn check_occurrence(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for t in 0..self.transitions.len() {
            for &(place, w) in self.pre[t].iter().chain(&self.post[t]) {
                if w > 1 {
                    out.push(Violation::NonBooleanArc { place, transition: t });
                }
            }
        }
        for p in 0..self.places.len() {
            let consumers = self.consumers(p).len();
            if consumers > 1 {
                out.push(Violation::SharedConsumer { place: p, consumers });
            }
            let producers = self.producers(p).len();
            let tokens = self.initial[p];
            let ok = (producers == 0 && tokens == 1) || (producers == 1 && tokens == 0);
            if !ok {
                out.push(Violation::Marking {
                    place: p,
                    producers,
                    tokens,
                });
            }
        }
        // Kahn's algorithm over the transition graph t -> p -> t'
        let n = self.transitions.len();
        let succ: Vec<BTreeSet<usize>> = (0..n)
            .map(|t| {
                self.post[t]
                    .iter()
                    .flat_map(|&(p, _)| self.consumers(p))
                    .collect()
            })
            .collect();
        let mut indeg = vec![0usize; n];
        for s in &succ {
            for &u in s {
                indeg[u] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&t| indeg[t] == 0).collect();
        let mut done = vec![false; n];
        while let Some(t) = ready.pop() {
            done[t] = true;
            for &u in &succ[t] {
                indeg[u] -= 1;
                if indeg[u] == 0 {
                    ready.push(u);
                }
            }
        }
        out.extend((0..n).filter(|&t| !done[t]).map(|transition| Violation::Cycle { transition }));
        out
    }

    pub fn is_occurrence_net(&self) -> bool {
        self.check_occurrence().is_empty()
    }

    fn check_step(&self, step: &Step) -> Result<()> {
        match step.iter().find(|&&t| t >= self.transitions.len()) {
            Some(&t) => Err(Error::UnknownTransition(t)),
            None => Ok(()),
        }
    }

    /// `pre(U) <= M`, with `pre(U)` the multiset sum over the step.
    pub fn enabled(&self, m: &Marking, step: &Step) -> bool {
        if self.check_step(step).is_err() {
            return false;
        }
        let mut need = vec![0u32; self.places.len()];
        for &t in step {
            for &(p, w) in &self.pre[t] {
                need[p] += w;
            }
        }
        need.iter().zip(m).all(|(n, have)| n <= have)
    }

    /// `M - pre(U) + post(U)`; an error if the step is not enabled.
    pub fn fire(&self, m: &Marking, step: &Step) -> Result<Marking> {
        self.check_step(step)?;
        if !self.enabled(m, step) {
            return Err(Error::NotEnabled {
                step: step.iter().copied().collect(),
            });
        }
        let mut next = m.clone();
        for &t in step {
            for &(p, w) in &self.pre[t] {
                next[p] -= w;
            }
        }
        for &t in step {
            for &(p, w) in &self.post[t] {
                next[p] += w;
            }
        }
        Ok(next)
    }

    /// Transitions individually enabled at `m`, in index order.
    pub fn enabled_transitions(&self, m: &Marking) -> Vec<usize> {
        (0..self.transitions.len())
            .filter(|&t| self.enabled(m, &Step::from([t])))
            .collect()
    }

    /// The marking reached by firing `seq` from the initial marking.
    pub fn run(&self, seq: &[Step]) -> Result<Marking> {
        seq.iter().try_fold(self.initial.clone(), |m, u| self.fire(&m, u))
    }

    pub fn is_step_firing_sequence(&self, seq: &[Step]) -> bool {
        self.run(seq).is_ok()
    }

    /// A valid sequence that fires every transition exactly once.
    pub fn is_maximal(&self, seq: &[Step]) -> bool {
        if !self.is_step_firing_sequence(seq) {
            return false;
        }
        let fired: Vec<usize> = seq.iter().flatten().copied().collect();
        let distinct: BTreeSet<usize> = fired.iter().copied().collect();
        fired.len() == distinct.len() && distinct.len() == self.transitions.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let place_labels: Vec<String> = self.places.iter().map(|p| p.label(&self.transitions)).collect();
        let arcs = |v: &Vec<(usize, u32)>| {
            let mut v = v.clone();
            v.sort();
            v.into_iter()
                .map(|(p, w)| serde_json::json!({ "place": p, "weight": w }))
                .collect::<Vec<_>>()
        };
        serde_json::json!({
            "places": place_labels,
            "transitions": self.transitions,
            "flow": (0..self.transitions.len())
                .map(|t| serde_json::json!({ "transition": t, "pre": arcs(&self.pre[t]), "post": arcs(&self.post[t]) }))
                .collect::<Vec<_>>(),
            "marking": self.initial,
        })
    }
}

/// Occurrence net of a block of `labels.len()` transactions under the
/// independence relation `rel`: `t_i < t_j` iff `i < j` and `(i, j)` are not
/// related.
pub fn build_net(labels: &[String], rel: &SwapRelation, max_block: usize) -> Result<PetriNet> {
    let n = labels.len();
    if n > max_block {
        return Err(Error::BlockTooLarge {
            len: n,
            limit: max_block,
        });
    }
    assert_eq!(rel.len(), n, "relation size must match the block");
    let mut b = NetBuilder::new();
    for l in labels {
        b.transition(l.clone());
    }
    for t in 0..n {
        let p = b.place(Place::Start(t), 1);
        b.input(p, t);
    }
    for t in 0..n {
        let p = b.place(Place::End(t), 0);
        b.output(t, p);
    }
    for i in 0..n {
        for j in i + 1..n {
            if !rel.get(i, j) {
                let p = b.place(Place::Between(i, j), 0);
                b.output(i, p);
                b.input(p, j);
            }
        }
    }
    Ok(b.build())
}

/// All sequentializations of a step sequence: each step's members in every
/// order, step order preserved. Refuses steps larger than `max_step`.
pub fn linearizations(
    seq: &[Step],
    max_step: usize,
) -> Result<impl Iterator<Item = Vec<usize>>> {
    if let Some(u) = seq.iter().find(|u| u.len() > max_step) {
        return Err(Error::StepTooLarge {
            size: u.len(),
            limit: max_step,
        });
    }
    let per_step: Vec<Vec<Vec<usize>>> = seq
        .iter()
        .map(|u| {
            let k = u.len();
            u.iter().copied().permutations(k).collect()
        })
        .collect();
    let iter: Box<dyn Iterator<Item = Vec<usize>>> = if per_step.is_empty() {
        Box::new(std::iter::once(Vec::new()))
    } else {
        Box::new(
            per_step
                .into_iter()
                .map(|v| v.into_iter())
                .multi_cartesian_product()
                .map(|parts| parts.concat()),
        )
    };
    Ok(iter)
}
