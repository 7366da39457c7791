//! Shared proptest strategies.

use proptest::prelude::*;

use crate::model::{addr, BlockchainState, Key, Observable, StateUpdate, Value};

/// One of a dozen observables, so that random maps overlap often.
pub fn arb_observable() -> impl Strategy<Value = Observable> {
    prop_oneof![
        (0..3u8, 0..3i64).prop_map(|(a, k)| Observable::account(
            addr(&format!("c{a}")),
            Key::indexed("m", vec![Value::Int(k)])
        )),
        (0..3u8).prop_map(|a| Observable::balance_of(addr(&format!("c{a}")))),
        (1..4u32).prop_map(|i| Observable::output(crate::model::txid("T"), i)),
    ]
}

pub fn arb_value() -> impl Strategy<Value = Value> {
    prop_oneof![(-2..3i64).prop_map(Value::Int), any::<bool>().prop_map(Value::Bool)]
}

pub fn arb_state() -> impl Strategy<Value = BlockchainState> {
    prop::collection::btree_map(arb_observable(), arb_value(), 0..8)
        .prop_map(|m| m.into_iter().collect())
}

pub fn arb_update() -> impl Strategy<Value = StateUpdate> {
    prop::collection::btree_map(arb_observable(), arb_value(), 0..6)
        .prop_map(|m| m.into_iter().collect())
}

/// `k` updates with pairwise disjoint domains.
pub fn disjoint_updates(k: usize) -> impl Strategy<Value = Vec<StateUpdate>> {
    prop::collection::btree_map(arb_observable(), (0..k, arb_value()), 0..10).prop_map(move |m| {
        let mut parts = vec![StateUpdate::new(); k];
        for (o, (i, v)) in m {
            parts[i].bind(o, v);
        }
        parts
    })
}
