//! Step semantics and the parallel block executor.
//!
//! A step runs each of its transactions against the same snapshot, merges
//! the resulting updates and applies them once. The executor analyses the
//! block, builds its occurrence net, schedules maximal steps greedily and
//! spreads each step over a fixed pool of workers.

mod amplify;

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{apply_update, BlockchainState, Platform, StateUpdate};
use crate::net::{build_net, PetriNet, Step, DEFAULT_MAX_BLOCK};
use crate::swap::{build_swap_relation, BlockAnalysis, RwAnalysis};

pub use amplify::{busy_work, Amplified};

/// Produces, for a state and a transaction, an update whose application
/// reproduces the transaction's semantics.
pub trait UpdateCollector<P: Platform>: Sync {
    fn collect(&self, platform: &P, state: &BlockchainState, tx: &P::Tx) -> StateUpdate;
}

/// The least collector: exactly the observables whose value changes.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeastCollector;

impl<P: Platform> UpdateCollector<P> for LeastCollector {
    fn collect(&self, platform: &P, state: &BlockchainState, tx: &P::Tx) -> StateUpdate {
        least_collector(state, tx, platform)
    }
}

/// `apply(σ, T) − σ`, computed by dropping the bindings of the effect that
/// do not change anything.
pub fn least_collector<P: Platform>(state: &BlockchainState, tx: &P::Tx, platform: &P) -> StateUpdate {
    platform
        .effect(state, tx)
        .into_map()
        .into_iter()
        .filter(|(o, v)| state.get(o) != Some(v))
        .collect()
}

/// Union of updates with pairwise disjoint domains.
pub fn merge_updates<'a>(updates: impl IntoIterator<Item = &'a StateUpdate>) -> Result<StateUpdate> {
    let mut merged = StateUpdate::new();
    for u in updates {
        for (o, v) in u.iter() {
            if merged.contains(o) {
                return Err(Error::Conflict(o.clone()));
            }
            merged.bind(o.clone(), v.clone());
        }
    }
    Ok(merged)
}

/// `σ ⊕_{t ∈ U} collect(σ, T_t)`; `step` holds 0-based block positions.
pub fn exec_step<P: Platform>(
    state: &BlockchainState,
    block: &[P::Tx],
    step: &Step,
    collector: &dyn UpdateCollector<P>,
    platform: &P,
) -> Result<BlockchainState> {
    let updates: Vec<StateUpdate> = step
        .iter()
        .map(|&t| collector.collect(platform, state, &block[t]))
        .collect();
    Ok(apply_update(state, &merge_updates(&updates)?))
}

/// Left fold of [`exec_step`].
pub fn exec_step_sequence<P: Platform>(
    state: &BlockchainState,
    block: &[P::Tx],
    seq: &[Step],
    collector: &dyn UpdateCollector<P>,
    platform: &P,
) -> Result<BlockchainState> {
    seq.iter().try_fold(state.clone(), |s, u| {
        exec_step(&s, block, u, collector, platform)
    })
}

/// Fire every enabled transition at once until nothing is enabled.
///
/// On an occurrence net all individually enabled transitions are enabled
/// together; on other nets a transition joins the step only if the step
/// stays enabled, in index order.
pub fn schedule_greedy(net: &PetriNet) -> Vec<Step> {
    let mut m = net.initial_marking().clone();
    let mut out = Vec::new();
    loop {
        let mut step = Step::new();
        for t in net.enabled_transitions(&m) {
            step.insert(t);
            if !net.enabled(&m, &step) {
                step.remove(&t);
            }
        }
        if step.is_empty() {
            return out;
        }
        m = net.fire(&m, &step).expect("greedy step is enabled");
        out.push(step);
    }
}

/// The update produced by one transaction of a step.
#[derive(Clone, Debug, Serialize)]
pub struct TxRecord {
    /// 1-based block position.
    pub position: usize,
    pub worker: usize,
    pub update: StateUpdate,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    /// 1-based block positions.
    pub transactions: Vec<usize>,
    pub updates: Vec<TxRecord>,
}

/// Schedule and per-transaction updates of a parallel run.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Trace {
    pub workers: usize,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, Default)]
pub struct Timings {
    pub analysis: Duration,
    pub net: Duration,
    pub execution: Duration,
    /// Wall time of each step of the schedule.
    pub per_step: Vec<Duration>,
    /// Collection time of each transaction, by 0-based position.
    pub per_tx: Vec<Duration>,
}

#[derive(Clone, Debug)]
pub struct ParallelRun {
    pub state: BlockchainState,
    pub analysis: BlockAnalysis,
    pub net: PetriNet,
    pub schedule: Vec<Step>,
    pub trace: Trace,
    pub timings: Timings,
}

/// Result of [`ParallelExecutor::run_schedule`].
#[derive(Clone, Debug)]
pub struct ScheduleRun {
    pub state: BlockchainState,
    pub trace: Trace,
    pub per_step: Vec<Duration>,
    pub per_tx: Vec<Duration>,
}

/// A conflicting merge inside a step, which means the analysis was unsound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictReport {
    /// 0-based index of the step in the schedule.
    pub step: usize,
    pub observable: crate::model::Observable,
    /// 1-based positions of the transactions that wrote it.
    pub positions: Vec<usize>,
}

impl std::fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "merge conflict in step {} on {} (written by transactions {:?})",
            self.step + 1,
            self.observable,
            self.positions
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("{0}")]
    Conflict(ConflictReport),
    #[error(transparent)]
    Other(#[from] Error),
}

/// Runs steps on a fixed number of workers. Transactions of a step are dealt
/// to workers round-robin in position order; updates are merged by the
/// caller's thread in position order.
pub struct ParallelExecutor {
    workers: usize,
    max_block: usize,
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for ParallelExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelExecutor")
            .field("workers", &self.workers)
            .finish()
    }
}

impl ParallelExecutor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::NoWorkers);
        }
        Ok(ParallelExecutor {
            workers,
            max_block: DEFAULT_MAX_BLOCK,
            #[cfg(feature = "parallel")]
            pool: rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("txpar-worker-{i}"))
                .build()
                .expect("failed to start worker threads"),
        })
    }

    pub fn with_max_block(mut self, max_block: usize) -> Self {
        self.max_block = max_block;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn deal(&self, step: &Step) -> Vec<Vec<usize>> {
        let mut buckets = vec![Vec::new(); self.workers.min(step.len())];
        let n = buckets.len();
        for (k, &t) in step.iter().enumerate() {
            buckets[k % n].push(t);
        }
        buckets
    }

    fn collect_step<P: Platform>(
        &self,
        state: &BlockchainState,
        block: &[P::Tx],
        step: &Step,
        collector: &dyn UpdateCollector<P>,
        platform: &P,
    ) -> Vec<(usize, usize, StateUpdate, Duration)> {
        let buckets = self.deal(step);
        let work = |(w, bucket): (usize, &Vec<usize>)| {
            bucket
                .iter()
                .map(|&t| {
                    let start = Instant::now();
                    let u = collector.collect(platform, state, &block[t]);
                    (t, w, u, start.elapsed())
                })
                .collect::<Vec<_>>()
        };
        #[cfg(feature = "parallel")]
        let results: Vec<Vec<_>> = {
            use rayon::prelude::*;
            self.pool
                .install(|| buckets.par_iter().enumerate().map(work).collect())
        };
        #[cfg(not(feature = "parallel"))]
        let results: Vec<Vec<_>> = buckets.iter().enumerate().map(work).collect();
        let mut flat: Vec<_> = results.into_iter().flatten().collect();
        flat.sort_by_key(|r| r.0);
        flat
    }

    /// Execute a given step sequence, recording the trace.
    pub fn run_schedule<P: Platform>(
        &self,
        block: &[P::Tx],
        schedule: &[Step],
        state: &BlockchainState,
        collector: &dyn UpdateCollector<P>,
        platform: &P,
    ) -> Result<ScheduleRun, ExecError> {
        let mut per_tx = vec![Duration::ZERO; block.len()];
        let mut per_step = Vec::with_capacity(schedule.len());
        let mut trace = Trace {
            workers: self.workers,
            steps: Vec::with_capacity(schedule.len()),
        };
        let mut current = state.clone();
        for (k, step) in schedule.iter().enumerate() {
            let start = Instant::now();
            let results = self.collect_step(&current, block, step, collector, platform);
            let merged = merge_updates(results.iter().map(|r| &r.2)).map_err(|e| match e {
                Error::Conflict(observable) => ExecError::Conflict(ConflictReport {
                    step: k,
                    positions: results
                        .iter()
                        .filter(|r| r.2.contains(&observable))
                        .map(|r| r.0 + 1)
                        .collect(),
                    observable,
                }),
                e => ExecError::Other(e),
            })?;
            current = apply_update(&current, &merged);
            per_step.push(start.elapsed());
            for r in &results {
                per_tx[r.0] = r.3;
            }
            trace.steps.push(StepRecord {
                transactions: step.iter().map(|t| t + 1).collect(),
                updates: results
                    .into_iter()
                    .map(|(t, worker, update, _)| TxRecord {
                        position: t + 1,
                        worker,
                        update,
                    })
                    .collect(),
            });
        }
        Ok(ScheduleRun {
            state: current,
            trace,
            per_step,
            per_tx,
        })
    }

    /// Analyse, build the net, schedule greedily and execute.
    pub fn run<P: Platform>(
        &self,
        block: &[P::Tx],
        labels: &[String],
        state: &BlockchainState,
        platform: &P,
        analysis: &dyn RwAnalysis<P::Tx>,
    ) -> Result<ParallelRun, ExecError> {
        let start = Instant::now();
        let block_analysis = build_swap_relation(block, analysis);
        let t_analysis = start.elapsed();

        let start = Instant::now();
        let net = build_net(labels, &block_analysis.relation, self.max_block)?;
        let schedule = schedule_greedy(&net);
        let t_net = start.elapsed();

        let start = Instant::now();
        let run = self.run_schedule(block, &schedule, state, &LeastCollector, platform)?;
        let t_exec = start.elapsed();

        Ok(ParallelRun {
            state: run.state,
            analysis: block_analysis,
            net,
            schedule,
            trace: run.trace,
            timings: Timings {
                analysis: t_analysis,
                net: t_net,
                execution: t_exec,
                per_step: run.per_step,
                per_tx: run.per_tx,
            },
        })
    }
}

/// Default transaction labels `t1 .. tn`.
pub fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("t{i}")).collect()
}

/// One-shot parallel execution with `workers` workers.
pub fn exec_parallel<P: Platform>(
    block: &[P::Tx],
    state: &BlockchainState,
    platform: &P,
    analysis: &dyn RwAnalysis<P::Tx>,
    workers: usize,
) -> Result<ParallelRun, ExecError> {
    ParallelExecutor::new(workers)?.run(block, &default_labels(block.len()), state, platform, analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{addr, exec_serial, state_diff, Key, Observable, Value};
    use crate::swap::RwAnalysis;
    use crate::net::build_net;
    use crate::swap::SwapRelation;

    fn cvar(k: &str) -> Observable {
        Observable::account(addr("cA"), Key::plain(k))
    }

    fn step(ts: &[usize]) -> Step {
        ts.iter().copied().collect()
    }

    #[test]
    fn least_updates_of_f_g_h() {
        let fx = fixtures::petri1();
        let p = fx.platform();
        let s = p.initial_state();
        let [f, h, g] = [&fx.block[0], &fx.block[1], &fx.block[2]];
        assert_eq!(least_collector(&s, f, &p), StateUpdate::new().with(cvar("y"), Value::Int(1)));
        assert_eq!(least_collector(&s, g, &p), StateUpdate::new().with(cvar("x"), Value::Int(1)));
        assert_eq!(least_collector(&s, h, &p), StateUpdate::new().with(cvar("z"), Value::Int(1)));
        for tx in &fx.block {
            assert_eq!(least_collector(&s, tx, &p), state_diff(&p.apply(&s, tx), &s));
        }
        // G after F throws: empty update
        let after_f = p.apply(&s, f);
        assert!(least_collector(&after_f, g, &p).is_empty());
    }

    #[test]
    fn merge_cases() {
        let y = StateUpdate::new().with(cvar("y"), Value::Int(1));
        let z = StateUpdate::new().with(cvar("z"), Value::Int(1));
        assert_eq!(merge_updates([&y, &z]).unwrap(), y.clone().with(cvar("z"), Value::Int(1)));
        assert_eq!(merge_updates([&y, &StateUpdate::new()]).unwrap(), y);
        let x1 = StateUpdate::new().with(cvar("x"), Value::Int(1));
        let x2 = StateUpdate::new().with(cvar("x"), Value::Int(2));
        assert_eq!(merge_updates([&x1, &x2]), Err(Error::Conflict(cvar("x"))));
    }

    #[test]
    fn steps_of_f_h_g() {
        let fx = fixtures::petri1();
        let p = fx.platform();
        let s = p.initial_state();
        let b = &fx.block;
        let fh = exec_step(&s, b, &step(&[0, 1]), &LeastCollector, &p).unwrap();
        assert_eq!(fh, s.with(cvar("y"), Value::Int(1)).with(cvar("z"), Value::Int(1)));
        let fg = exec_step(&s, b, &step(&[0, 2]), &LeastCollector, &p).unwrap();
        assert_eq!(fg, s.with(cvar("y"), Value::Int(1)).with(cvar("x"), Value::Int(1)));
        assert_ne!(fg, exec_serial(&[b[0].clone(), b[2].clone()], &s, &p));
        assert_ne!(fg, exec_serial(&[b[2].clone(), b[0].clone()], &s, &p));
        for t in 0..3 {
            assert_eq!(
                exec_step(&s, b, &step(&[t]), &LeastCollector, &p).unwrap(),
                p.apply(&s, &b[t])
            );
        }
        let seq = [step(&[0, 1]), step(&[2])];
        assert_eq!(
            exec_step_sequence(&s, b, &seq, &LeastCollector, &p).unwrap(),
            exec_serial(b, &s, &p)
        );
        assert_eq!(exec_step_sequence(&s, b, &[], &LeastCollector, &p).unwrap(), s);
    }

    #[test]
    fn greedy_schedules() {
        let rel = SwapRelation::from_fn(3, |i, j| (i, j) != (0, 2));
        let n = build_net(&default_labels(3), &rel, 8).unwrap();
        assert_eq!(schedule_greedy(&n), vec![step(&[0, 1]), step(&[2])]);

        let fx = fixtures::erc721();
        let run = exec_parallel(&fx.block, &fx.platform().initial_state(), &fx.platform(), &fx.platform(), 2).unwrap();
        assert_eq!(run.schedule, vec![step(&[0, 1]), step(&[2, 3])]);

        let fx = fixtures::lottery();
        let p = fx.platform();
        let run = exec_parallel(&fx.block, &p.initial_state(), &p, &p, 2).unwrap();
        assert_eq!(
            run.schedule,
            vec![step(&[0]), step(&[1, 2]), step(&[3, 4]), step(&[5, 6]), step(&[7])]
        );
    }

    #[test]
    fn parallel_matches_serial_on_fixtures() {
        for workers in [1, 2, 3, 8] {
            let fx = fixtures::erc721();
            let p = fx.platform();
            let s = p.initial_state();
            let run = exec_parallel(&fx.block, &s, &p, &p, workers).unwrap();
            assert_eq!(run.state, exec_serial(&fx.block, &s, &p));
            assert_eq!(run.trace.steps.len(), run.schedule.len());
        }
    }

    #[test]
    fn unsound_analysis_is_reported() {
        use crate::swap::{Analysis, RwSets};
        let fx = fixtures::petri1();
        let p = fx.platform();
        let liar = |_: &crate::account::AccountTransaction| Analysis::exact(RwSets::default());
        // two copies of H both write z: the empty sets claim they commute
        let block = vec![fx.block[1].clone(), fx.block[1].clone()];
        let err = exec_parallel(&block, &p.initial_state(), &p, &liar, 2);
        match err {
            Err(ExecError::Conflict(r)) => {
                assert_eq!(r.observable, cvar("z"));
                assert_eq!(r.positions, vec![1, 2]);
            }
            other => panic!("expected a conflict, got {other:?}"),
        }
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(ParallelExecutor::new(0).is_err());
    }

    mod laws {
        use super::*;
        use crate::format::BlockFile;
        use crate::gen;
        use crate::swap::strong_swap;
        use crate::testutil::{arb_state, arb_update, disjoint_updates};
        use itertools::Itertools;
        use proptest::prelude::*;

        fn collector_law<P: Platform>(p: &P, block: &[P::Tx]) -> std::result::Result<(), TestCaseError> {
            let mut s = p.initial_state();
            for tx in block {
                let u = least_collector(&s, tx, p);
                let next = p.apply(&s, tx);
                prop_assert_eq!(apply_update(&s, &u), next.clone());
                prop_assert_eq!(u, state_diff(&next, &s));
                s = next;
            }
            Ok(())
        }

        /// Every ordering of a pairwise strongly swappable subset executes
        /// like the merged step.
        fn union_law<P: Platform + RwAnalysis<P::Tx>>(
            p: &P,
            block: &[P::Tx],
        ) -> std::result::Result<(), TestCaseError> {
            let sets: Vec<_> = block.iter().map(|t| p.analyze(t).sets).collect();
            let s = p.initial_state();
            let mut chosen: Vec<usize> = Vec::new();
            for i in 0..block.len().min(5) {
                if chosen.iter().all(|&j| strong_swap(&sets[i], &sets[j])) {
                    chosen.push(i);
                }
            }
            let step: Step = chosen.iter().copied().collect();
            let merged = exec_step(&s, block, &step, &LeastCollector, p).expect("strongly swappable updates are disjoint");
            for perm in chosen.iter().permutations(chosen.len()) {
                let seq: Vec<P::Tx> = perm.iter().map(|&&i| block[i].clone()).collect();
                prop_assert_eq!(&exec_serial(&seq, &s, p), &merged);
            }
            Ok(())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn merge_is_commutative_and_associative(p in disjoint_updates(3)) {
                let (a, b, c) = (&p[0], &p[1], &p[2]);
                prop_assert_eq!(merge_updates([a, b]).unwrap(), merge_updates([b, a]).unwrap());
                let ab = merge_updates([a, b]).unwrap();
                let bc = merge_updates([b, c]).unwrap();
                prop_assert_eq!(merge_updates([&ab, c]).unwrap(), merge_updates([a, &bc]).unwrap());
                prop_assert_eq!(merge_updates([a, &StateUpdate::new()]).unwrap(), a.clone());
            }

            #[test]
            fn merge_is_sequential_application(s in arb_state(), p in disjoint_updates(2)) {
                let m = merge_updates(&p).unwrap();
                let seq = apply_update(&apply_update(&s, &p[0]), &p[1]);
                let rev = apply_update(&apply_update(&s, &p[1]), &p[0]);
                prop_assert_eq!(apply_update(&s, &m), seq.clone());
                prop_assert_eq!(rev, seq);
            }

            #[test]
            fn merge_detects_overlap(a in arb_update(), b in arb_update()) {
                let overlap = a.domain().any(|o| b.contains(o));
                prop_assert_eq!(merge_updates([&a, &b]).is_err(), overlap);
            }

            #[test]
            fn least_collector_law(seed in any::<u64>()) {
                match gen::account_block(seed, 8) {
                    BlockFile::Account(b) => collector_law(&b.platform(), &b.block)?,
                    _ => unreachable!(),
                }
                match gen::utxo_block(seed, 8) {
                    BlockFile::Utxo(b) => collector_law(&b.platform(), &b.block)?,
                    _ => unreachable!(),
                }
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn swappable_sets_execute_in_any_order(seed in any::<u64>()) {
                match gen::account_block(seed, 10) {
                    BlockFile::Account(b) => union_law(&b.platform(), &b.block)?,
                    _ => unreachable!(),
                }
                match gen::utxo_block(seed, 10) {
                    BlockFile::Utxo(b) => union_law(&b.platform(), &b.block)?,
                    _ => unreachable!(),
                }
            }
        }
    }
}
