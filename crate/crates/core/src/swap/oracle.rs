//! Brute-force oracles over explicitly enumerated state spaces.
//!
//! Swappability and safety quantify over all (reachable) states; here they
//! are checked on a supplied sample, which is exhaustive when the sample is
//! the full state space of a tiny fixture.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::model::{BlockchainState, Observable, Platform, Value};
use crate::par;

use super::AccessSet;

/// Upper bound on the state pairs examined by a read-safety check.
pub const DEFAULT_PAIR_BOUND: usize = 4_000_000;

/// A finite sample of blockchain states, in deterministic order.
#[derive(Clone, Debug, Default)]
pub struct StateSpace {
    states: Vec<BlockchainState>,
}

impl StateSpace {
    pub fn from_states(states: Vec<BlockchainState>) -> Self {
        StateSpace { states }
    }

    /// Every combination of the given per-observable choices on top of
    /// `base`; `None` leaves the observable unbound.
    pub fn grid(
        base: &BlockchainState,
        dims: &[(Observable, Vec<Option<Value>>)],
        limit: usize,
    ) -> Result<Self> {
        let size = dims
            .iter()
            .try_fold(1usize, |acc, (_, vs)| acc.checked_mul(vs.len()))
            .unwrap_or(usize::MAX);
        if size > limit {
            return Err(Error::StateSpaceTooLarge { size, limit });
        }
        let mut states = vec![base.clone()];
        for (obs, choices) in dims {
            states = states
                .iter()
                .flat_map(|s| {
                    choices.iter().map(move |c| match c {
                        Some(v) => s.with(obs.clone(), v.clone()),
                        None => s.without(obs),
                    })
                })
                .collect();
        }
        Ok(StateSpace { states })
    }

    /// States reachable from `initial` by applying `txs` in any order and
    /// with repetitions, explored breadth-first.
    pub fn reachable<P: Platform>(
        platform: &P,
        initial: &[BlockchainState],
        txs: &[P::Tx],
        limit: usize,
    ) -> Result<Self> {
        let mut seen: HashSet<BlockchainState> = HashSet::new();
        let mut states = Vec::new();
        let mut queue = VecDeque::new();
        for s in initial {
            if seen.insert(s.clone()) {
                states.push(s.clone());
                queue.push_back(s.clone());
            }
        }
        while let Some(s) = queue.pop_front() {
            for tx in txs {
                let next = platform.apply(&s, tx);
                if seen.insert(next.clone()) {
                    if states.len() >= limit {
                        return Err(Error::StateSpaceTooLarge {
                            size: states.len() + 1,
                            limit,
                        });
                    }
                    states.push(next.clone());
                    queue.push_back(next);
                }
            }
        }
        Ok(StateSpace { states })
    }

    pub fn states(&self) -> &[BlockchainState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn union(mut self, other: StateSpace) -> Self {
        let mut seen: HashSet<_> = self.states.iter().cloned().collect();
        for s in other.states {
            if seen.insert(s.clone()) {
                self.states.push(s);
            }
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SwapVerdict {
    /// Both orders agree on every sampled state.
    SwappableOnSample,
    /// The two orders disagree when started from `witness`.
    NotSwappable { witness: BlockchainState },
}

impl SwapVerdict {
    pub fn is_swappable(&self) -> bool {
        matches!(self, SwapVerdict::SwappableOnSample)
    }
}

/// Run `t1 t2` and `t2 t1` from every sampled state.
pub fn swap_oracle<P: Platform>(
    t1: &P::Tx,
    t2: &P::Tx,
    space: &StateSpace,
    platform: &P,
) -> SwapVerdict {
    let witness = par::find_map_first(space.states(), |s| {
        let a = platform.apply(&platform.apply(s, t1), t2);
        let b = platform.apply(&platform.apply(s, t2), t1);
        (a != b).then(|| s.clone())
    });
    match witness {
        Some(witness) => SwapVerdict::NotSwappable { witness },
        None => SwapVerdict::SwappableOnSample,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproxMode {
    Read,
    Write,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ApproxVerdict {
    Safe,
    /// Write mode: `states` has one state whose observable changes although
    /// it is not covered. Read mode: two states agreeing on the set and on
    /// `observable` whose successors disagree on `observable`.
    Violation {
        states: Vec<BlockchainState>,
        observable: Observable,
    },
}

impl ApproxVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, ApproxVerdict::Safe)
    }
}

fn domains<'a>(states: &[&'a BlockchainState]) -> BTreeSet<&'a Observable> {
    states.iter().flat_map(|s| s.domain()).collect()
}

/// Check that `q` safely approximates the observables written or read by
/// `tx` on the sampled states.
///
/// Quantifying over every set `Q` disjoint from `q` reduces to checking
/// each observable on its own, since agreement on a set is agreement on
/// each of its members.
pub fn check_safe_approx<P: Platform>(
    q: &AccessSet,
    tx: &P::Tx,
    mode: ApproxMode,
    space: &StateSpace,
    platform: &P,
    pair_bound: usize,
) -> Result<ApproxVerdict> {
    let after: Vec<BlockchainState> = par::map(space.states(), |s| platform.apply(s, tx));
    let violation = match mode {
        ApproxMode::Write => {
            let idx: Vec<usize> = (0..space.len()).collect();
            par::find_map_first(&idx, |&i| {
                let (s, t) = (&space.states()[i], &after[i]);
                domains(&[s, t])
                    .into_iter()
                    .find(|b| !q.covers(b) && s.get(b) != t.get(b))
                    .map(|b| (vec![s.clone()], b.clone()))
            })
        }
        ApproxMode::Read => {
            let universe: BTreeSet<&Observable> =
                space.states().iter().flat_map(|s| s.domain()).collect();
            let keyed: Vec<&Observable> = universe.into_iter().filter(|o| q.covers(o)).collect();
            let mut buckets: BTreeMap<Vec<Option<&Value>>, Vec<usize>> = BTreeMap::new();
            for (i, s) in space.states().iter().enumerate() {
                let key = keyed.iter().map(|o| s.get(o)).collect();
                buckets.entry(key).or_default().push(i);
            }
            let pairs: usize = buckets.values().map(|b| b.len() * b.len().saturating_sub(1) / 2).sum();
            if pairs > pair_bound {
                return Err(Error::StateSpaceTooLarge {
                    size: pairs,
                    limit: pair_bound,
                });
            }
            let pairs: Vec<(usize, usize)> = buckets
                .values()
                .flat_map(|b| {
                    b.iter()
                        .enumerate()
                        .flat_map(move |(k, &i)| b[k + 1..].iter().map(move |&j| (i, j)))
                })
                .collect();
            par::find_map_first(&pairs, |&(i, j)| {
                let (s1, s2) = (&space.states()[i], &space.states()[j]);
                let (t1, t2) = (&after[i], &after[j]);
                domains(&[s1, s2, t1, t2])
                    .into_iter()
                    .find(|b| s1.get(b) == s2.get(b) && t1.get(b) != t2.get(b))
                    .map(|b| (vec![s1.clone(), s2.clone()], b.clone()))
            })
        }
    };
    Ok(match violation {
        Some((states, observable)) => ApproxVerdict::Violation { states, observable },
        None => ApproxVerdict::Safe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{addr, Key};
    use crate::swap::Access;

    fn bal(a: &str) -> Observable {
        Observable::balance_of(addr(a))
    }

    #[test]
    fn grid_enumerates_product() {
        let x = Observable::account(addr("c"), Key::plain("x"));
        let dims = vec![
            (x.clone(), vec![None, Some(Value::Int(0)), Some(Value::Int(1))]),
            (bal("A"), vec![Some(Value::Int(0)), Some(Value::Int(1))]),
        ];
        let g = StateSpace::grid(&BlockchainState::new(), &dims, 100).unwrap();
        assert_eq!(g.len(), 6);
        assert!(g.states().iter().any(|s| !s.is_bound(&x)));
        assert!(StateSpace::grid(&BlockchainState::new(), &dims, 5).is_err());
    }

    #[test]
    fn th_sem_oracle_verdicts() {
        let fx = fixtures::th_sem();
        let p = fx.platform();
        let space = fixtures::th_sem_space();
        let [t0, t1, t2] = [&fx.block[0], &fx.block[1], &fx.block[2]];
        assert!(space.states().iter().any(|s| s.get(&bal("A")) == Some(&Value::Int(0))));
        assert!(swap_oracle(t0, t2, &space, &p).is_swappable());
        match swap_oracle(t0, t1, &space, &p) {
            SwapVerdict::NotSwappable { witness } => {
                // the witness must really separate the two orders
                let a = p.apply(&p.apply(&witness, t0), t1);
                let b = p.apply(&p.apply(&witness, t1), t0);
                assert_ne!(a, b);
            }
            v => panic!("expected a witness, got {v:?}"),
        }
    }

    #[test]
    fn th_sem_send_approximations() {
        let fx = fixtures::th_sem();
        let p = fx.platform();
        let space = fixtures::th_sem_space();
        let t2 = &fx.block[2];
        let w: AccessSet = [bal("A"), bal("B")].into_iter().collect();
        let v = check_safe_approx(&w, t2, ApproxMode::Write, &space, &p, DEFAULT_PAIR_BOUND).unwrap();
        assert!(v.is_safe());
        let r: AccessSet = [bal("A")].into_iter().collect();
        let v = check_safe_approx(&r, t2, ApproxMode::Read, &space, &p, DEFAULT_PAIR_BOUND).unwrap();
        assert!(v.is_safe());
        let none = AccessSet::new();
        let v = check_safe_approx(&none, t2, ApproxMode::Write, &space, &p, DEFAULT_PAIR_BOUND).unwrap();
        assert!(!v.is_safe());
        assert!(check_safe_approx(&none, t2, ApproxMode::Read, &space, &p, 1).is_err());
    }

    #[test]
    fn read_sets_do_not_intersect() {
        let fx = fixtures::read_not_cap();
        let p = fx.platform();
        let space = fixtures::read_not_cap_space();
        let g = fx.block.iter().find(|t| t.function == "g").unwrap();
        let k = |name: &str| Access::Obs(Observable::account(addr("cA"), Key::plain(name)));
        let check = |q: AccessSet| {
            check_safe_approx(&q, g, ApproxMode::Read, &space, &p, DEFAULT_PAIR_BOUND)
                .unwrap()
                .is_safe()
        };
        assert!(check([k("k")].into_iter().collect()));
        assert!(check([k("k2")].into_iter().collect()));
        assert!(!check(AccessSet::new()));
    }
}
