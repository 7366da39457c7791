use std::hint::black_box;

use crate::model::{BlockchainState, Platform, StateUpdate};
use crate::swap::{Analysis, RwAnalysis};

/// Spin for `cycles` rounds of an xorshift step; the result is opaque to the
/// optimiser.
pub fn busy_work(cycles: u64) -> u64 {
    let mut x = black_box(0x9e37_79b9_7f4a_7c15u64);
    for _ in 0..cycles {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x = black_box(x);
    }
    x
}

/// Wraps a platform so that every transition first burns `cycles` rounds of
/// busy work. The semantics are those of the inner platform.
#[derive(Clone, Debug)]
pub struct Amplified<P> {
    pub inner: P,
    pub cycles: u64,
}

impl<P> Amplified<P> {
    pub fn new(inner: P, cycles: u64) -> Self {
        Amplified { inner, cycles }
    }
}

impl<P: Platform> Platform for Amplified<P> {
    type Tx = P::Tx;

    fn effect(&self, state: &BlockchainState, tx: &Self::Tx) -> StateUpdate {
        busy_work(self.cycles);
        self.inner.effect(state, tx)
    }

    fn initial_state(&self) -> BlockchainState {
        self.inner.initial_state()
    }
}

impl<P: Platform + RwAnalysis<P::Tx>> RwAnalysis<P::Tx> for Amplified<P> {
    fn analyze(&self, tx: &P::Tx) -> Analysis {
        self.inner.analyze(tx)
    }
}
