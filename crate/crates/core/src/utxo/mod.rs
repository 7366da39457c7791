//! UTXO platform: output scripts, transaction validity and the transition
//! function over the set of unspent outputs.
//!
//! A state binds output references to `1` (unspent) or `0` (spent); outputs
//! never created are unbound.

mod script;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use script::{byte_sum_hash, eval_script, Hasher, Script, ScriptOp, ScriptValue};

use crate::model::{BlockchainState, Observable, Platform, StateUpdate, TxId, Value};
use crate::swap::{AccessSet, Analysis, RwAnalysis, RwSets};

/// Reference to output `index` (1-based) of transaction `tx`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutRef {
    pub tx: TxId,
    pub index: u32,
}

impl OutRef {
    pub fn new(tx: TxId, index: u32) -> Self {
        OutRef { tx, index }
    }

    pub fn observable(&self) -> Observable {
        Observable::output(self.tx.clone(), self.index)
    }
}

impl fmt::Debug for OutRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tx, self.index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Output {
    pub script: Script,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UtxoTransaction {
    pub id: TxId,
    pub inputs: Vec<OutRef>,
    /// One witness sequence per input.
    pub witnesses: Vec<Vec<ScriptValue>>,
    pub outputs: Vec<Output>,
}

impl UtxoTransaction {
    pub fn is_coinbase(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Observables `(id,1) .. (id,n)` of the outputs.
    pub fn output_refs(&self) -> impl Iterator<Item = Observable> + '_ {
        (1..=self.outputs.len() as u32).map(|i| Observable::output(self.id.clone(), i))
    }

    pub fn input_refs(&self) -> impl Iterator<Item = Observable> + '_ {
        self.inputs.iter().map(OutRef::observable)
    }
}

/// The UTXO platform over a fixed ledger of known transactions, from which
/// input references are resolved to scripts and values.
#[derive(Clone)]
pub struct UtxoPlatform {
    ledger: BTreeMap<TxId, UtxoTransaction>,
    genesis: Vec<TxId>,
    hasher: Hasher,
}

impl fmt::Debug for UtxoPlatform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UtxoPlatform")
            .field("ledger", &self.ledger.keys().collect::<Vec<_>>())
            .field("genesis", &self.genesis)
            .finish()
    }
}

impl UtxoPlatform {
    /// `genesis` transactions have all their outputs unspent in the initial
    /// state; `block` transactions only contribute to the ledger.
    pub fn new(genesis: &[UtxoTransaction], block: &[UtxoTransaction]) -> Self {
        let ledger = genesis
            .iter()
            .chain(block)
            .map(|t| (t.id.clone(), t.clone()))
            .collect();
        UtxoPlatform {
            ledger,
            genesis: genesis.iter().map(|t| t.id.clone()).collect(),
            hasher: byte_sum_hash,
        }
    }

    pub fn with_hasher(mut self, hasher: Hasher) -> Self {
        self.hasher = hasher;
        self
    }

    pub fn lookup(&self, r: &OutRef) -> Option<&Output> {
        self.ledger
            .get(&r.tx)
            .and_then(|t| t.outputs.get((r.index as usize).checked_sub(1)?))
    }

    /// Validity ignoring whether the inputs are unspent: witnesses match,
    /// inputs are distinct and resolvable, scripts succeed and values balance.
    fn valid_static(&self, tx: &UtxoTransaction) -> bool {
        if tx.witnesses.len() != tx.inputs.len() {
            return false;
        }
        let distinct: BTreeSet<_> = tx.inputs.iter().collect();
        if distinct.len() != tx.inputs.len() {
            return false;
        }
        let mut total_in: u64 = 0;
        for (i, r) in tx.inputs.iter().enumerate() {
            let Some(out) = self.lookup(r) else {
                return false;
            };
            if !eval_script(&out.script, tx, i, self.hasher).is_true() {
                return false;
            }
            let Some(t) = total_in.checked_add(out.value) else {
                return false;
            };
            total_in = t;
        }
        let total_out = tx
            .outputs
            .iter()
            .try_fold(0u64, |acc, o| acc.checked_add(o.value));
        matches!(total_out, Some(out) if out <= total_in)
    }

    pub fn validate(&self, state: &BlockchainState, tx: &UtxoTransaction) -> bool {
        tx.input_refs()
            .all(|o| state.get(&o) == Some(&Value::Int(1)))
            && self.valid_static(tx)
    }

    /// The state binding exactly the inputs of `tx` as unspent.
    pub fn synthetic_state(tx: &UtxoTransaction) -> BlockchainState {
        tx.input_refs().map(|o| (o, Value::Int(1))).collect()
    }

    /// Whether `tx` validates in some candidate state.
    pub fn consistency(&self, tx: &UtxoTransaction, candidates: &[BlockchainState]) -> bool {
        candidates.iter().any(|s| self.validate(s, tx))
    }

    /// Consistency decided on the synthetic state. Scripts only inspect the
    /// redeeming transaction, so validity depends on the state only through
    /// the inputs being unspent and this check is exact.
    pub fn is_consistent(&self, tx: &UtxoTransaction) -> bool {
        self.validate(&Self::synthetic_state(tx), tx)
    }

    /// `state` validates `tx` and the sequence `tx2 tx`.
    pub fn contextual_pswap(
        &self,
        tx: &UtxoTransaction,
        tx2: &UtxoTransaction,
        state: &BlockchainState,
    ) -> bool {
        tx.id != tx2.id
            && self.validate(state, tx)
            && self.validate(state, tx2)
            && self.validate(&self.apply(state, tx2), tx)
    }

    pub fn rw_sets(&self, tx: &UtxoTransaction) -> RwSets {
        btc_rw_sets(tx, self.is_consistent(tx))
    }
}

/// Least safe approximations: `R = in`, `W = in ∪ out` for consistent
/// transactions, and empty sets for inconsistent ones.
pub fn btc_rw_sets(tx: &UtxoTransaction, consistent: bool) -> RwSets {
    if !consistent {
        return RwSets::default();
    }
    let reads: AccessSet = tx.input_refs().collect();
    let writes: AccessSet = tx.input_refs().chain(tx.output_refs()).collect();
    RwSets::new(reads, writes)
}

impl Platform for UtxoPlatform {
    type Tx = UtxoTransaction;

    fn effect(&self, state: &BlockchainState, tx: &UtxoTransaction) -> StateUpdate {
        if !self.validate(state, tx) {
            return StateUpdate::new();
        }
        let mut u = StateUpdate::new();
        for o in tx.input_refs() {
            u.bind(o, Value::Int(0));
        }
        for o in tx.output_refs() {
            u.bind(o, Value::Int(1));
        }
        u
    }

    fn initial_state(&self) -> BlockchainState {
        self.genesis
            .iter()
            .flat_map(|id| self.ledger[id].output_refs())
            .map(|o| (o, Value::Int(1)))
            .collect()
    }
}

impl RwAnalysis<UtxoTransaction> for UtxoPlatform {
    fn analyze(&self, tx: &UtxoTransaction) -> Analysis {
        Analysis::exact(self.rw_sets(tx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exec_serial, txid};

    fn out(key: &str, value: u64) -> Output {
        Output {
            script: Script::versig_wit(key),
            value,
        }
    }

    /// Transactions T0, T1, T2 of the two-party transfer example.
    fn example() -> (UtxoTransaction, UtxoTransaction, UtxoTransaction) {
        let t0 = UtxoTransaction {
            id: txid("T0"),
            inputs: vec![],
            witnesses: vec![],
            outputs: vec![out("A", 80), out("B", 20)],
        };
        let t1 = UtxoTransaction {
            id: txid("T1"),
            inputs: vec![OutRef::new(txid("T0"), 1)],
            witnesses: vec![vec![ScriptValue::sig("A", txid("T1"))]],
            outputs: vec![out("A", 70), out("B", 10)],
        };
        let t2 = UtxoTransaction {
            id: txid("T2"),
            inputs: vec![OutRef::new(txid("T0"), 2), OutRef::new(txid("T1"), 2)],
            witnesses: vec![
                vec![ScriptValue::sig("B", txid("T2"))],
                vec![ScriptValue::sig("B", txid("T2"))],
            ],
            outputs: vec![Output {
                script: Script::hash_lock(51),
                value: 30,
            }],
        };
        (t0, t1, t2)
    }

    fn utxo(refs: &[(&str, u32)]) -> BTreeSet<Observable> {
        refs.iter().map(|(t, i)| Observable::output(txid(t), *i)).collect()
    }

    fn unspent(s: &BlockchainState) -> BTreeSet<Observable> {
        s.iter()
            .filter(|(_, v)| **v == Value::Int(1))
            .map(|(o, _)| o.clone())
            .collect()
    }

    #[test]
    fn serial_execution_of_example_block() {
        let (t0, t1, t2) = example();
        let p = UtxoPlatform::new(&[t0], &[t1.clone(), t2.clone()]);
        let s0 = p.initial_state();
        assert_eq!(unspent(&s0), utxo(&[("T0", 1), ("T0", 2)]));
        assert!(p.validate(&s0, &t1));
        let s1 = p.apply(&s0, &t1);
        assert_eq!(unspent(&s1), utxo(&[("T0", 2), ("T1", 1), ("T1", 2)]));
        let s2 = exec_serial(&[t1, t2], &s0, &p);
        assert_eq!(unspent(&s2), utxo(&[("T1", 1), ("T2", 1)]));
    }

    #[test]
    fn invalid_transactions_are_identities() {
        let (t0, t1, t2) = example();
        let p = UtxoPlatform::new(&[t0], &[t1.clone(), t2.clone()]);
        let s0 = p.initial_state();
        // T2 needs (T1,2), which does not exist yet
        assert!(!p.validate(&s0, &t2));
        assert_eq!(p.apply(&s0, &t2), s0);
        // double spend
        let s1 = p.apply(&s0, &t1);
        assert_eq!(p.apply(&s1, &t1), s1);
    }

    #[test]
    fn value_conservation_and_duplicates() {
        let (t0, mut t1, _) = example();
        t1.outputs[0].value = 71;
        let p = UtxoPlatform::new(std::slice::from_ref(&t0), std::slice::from_ref(&t1));
        assert!(!p.validate(&p.initial_state(), &t1));

        let (_, mut t1, _) = example();
        t1.inputs.push(t1.inputs[0].clone());
        t1.witnesses.push(t1.witnesses[0].clone());
        let p = UtxoPlatform::new(&[t0], &[t1.clone()]);
        assert!(!p.validate(&p.initial_state(), &t1));
    }

    #[test]
    fn dangling_reference_is_invalid() {
        let (t0, _, _) = example();
        let t = UtxoTransaction {
            id: txid("X"),
            inputs: vec![OutRef::new(txid("T0"), 3)],
            witnesses: vec![vec![]],
            outputs: vec![],
        };
        let p = UtxoPlatform::new(&[t0], std::slice::from_ref(&t));
        let s = p.initial_state().with(Observable::output(txid("T0"), 3), Value::Int(1));
        assert!(!p.validate(&s, &t));
    }

    #[test]
    fn rw_sets_follow_inputs_and_outputs() {
        let (t0, t1, _) = example();
        let p = UtxoPlatform::new(std::slice::from_ref(&t0), std::slice::from_ref(&t1));
        let rw = p.rw_sets(&t1);
        assert_eq!(rw.reads, utxo(&[("T0", 1)]).into_iter().collect());
        assert_eq!(
            rw.writes,
            utxo(&[("T0", 1), ("T1", 1), ("T1", 2)]).into_iter().collect()
        );
        // coinbase: no reads, writes its outputs
        let cb = btc_rw_sets(&t0, true);
        assert!(cb.reads.is_empty());
        assert_eq!(cb.writes, utxo(&[("T0", 1), ("T0", 2)]).into_iter().collect());
        assert_eq!(btc_rw_sets(&t1, false), RwSets::default());
    }

    #[test]
    fn consistency_uses_the_synthetic_state() {
        let (t0, t1, _) = example();
        let mut unsigned = t1.clone();
        unsigned.id = txid("U");
        unsigned.witnesses = vec![vec![ScriptValue::sig("B", txid("U"))]];
        let mut greedy = t1.clone();
        greedy.id = txid("G");
        greedy.witnesses = vec![vec![ScriptValue::sig("A", txid("G"))]];
        greedy.outputs[0].value = 100;
        let p = UtxoPlatform::new(&[t0], &[t1.clone(), unsigned.clone(), greedy.clone()]);
        assert!(p.is_consistent(&t1));
        assert!(p.consistency(&t1, &[UtxoPlatform::synthetic_state(&t1)]));
        assert!(!p.is_consistent(&unsigned));
        assert!(!p.is_consistent(&greedy));
    }

    #[test]
    fn contextual_pswap_cases() {
        let (t0, t1, _) = example();
        // a second spender of (T0,2), disjoint from T1
        let t2 = UtxoTransaction {
            id: txid("T2b"),
            inputs: vec![OutRef::new(txid("T0"), 2)],
            witnesses: vec![vec![ScriptValue::sig("B", txid("T2b"))]],
            outputs: vec![out("B", 20)],
        };
        let p = UtxoPlatform::new(&[t0], &[t1.clone(), t2.clone()]);
        let s0 = p.initial_state();
        assert!(p.contextual_pswap(&t1, &t2, &s0));
        assert!(p.contextual_pswap(&t2, &t1, &s0));
        assert!(!p.contextual_pswap(&t1, &t1, &s0));
    }
}
