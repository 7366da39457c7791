//! Account platform: contracts over a key-value store, value transfers and
//! a per-transaction read/write analysis.
//!
//! Every known address binds `balance`. Addresses that are not contracts are
//! users, whose only function is [`SKIP`].

mod analysis;
mod eval;
mod lang;

use std::collections::BTreeMap;

pub use analysis::analyze_rw;
pub use eval::{eval_stmt, Env, Failure};
pub use lang::{AccountTransaction, BinOp, Contract, Expr, Function, KeyExpr, Stmt, SKIP};

use crate::model::{Address, BlockchainState, Observable, Platform, StateUpdate, Value};
use crate::swap::{Analysis, RwAnalysis};

use eval::{run_stmt, Overlay};

static SKIP_FUNCTION: Function = Function {
    params: Vec::new(),
    body: Stmt::Skip,
};

#[derive(Clone, Debug)]
pub struct AccountPlatform {
    contracts: BTreeMap<Address, Contract>,
    genesis: BlockchainState,
}

impl AccountPlatform {
    /// Contracts whose balance is unbound in `genesis` start with balance 0.
    pub fn new(contracts: Vec<Contract>, genesis: BlockchainState) -> Self {
        let mut genesis = genesis;
        for c in &contracts {
            let b = Observable::balance_of(c.address().clone());
            if !genesis.is_bound(&b) {
                genesis = genesis.with(b, Value::Int(0));
            }
        }
        AccountPlatform {
            contracts: contracts
                .into_iter()
                .map(|c| (c.address().clone(), c))
                .collect(),
            genesis,
        }
    }

    pub fn contract(&self, a: &Address) -> Option<&Contract> {
        self.contracts.get(a)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &Contract> {
        self.contracts.values()
    }

    pub fn is_contract(&self, a: &Address) -> bool {
        self.contracts.contains_key(a)
    }

    /// The function a call resolves to, if the call is well-formed: the
    /// sender is a user, the function exists and the arity matches.
    pub fn resolve(&self, tx: &AccountTransaction) -> Option<&Function> {
        if self.is_contract(&tx.sender) || tx.value < 0 {
            return None;
        }
        let f = match self.contracts.get(&tx.target) {
            Some(c) => c.function(&tx.function)?,
            None if tx.function == SKIP => &SKIP_FUNCTION,
            None => return None,
        };
        (f.params.len() == tx.args.len()).then_some(f)
    }

    fn env(tx: &AccountTransaction, f: &Function) -> Env {
        let mut env: Env = f
            .params
            .iter()
            .cloned()
            .zip(tx.args.iter().cloned())
            .collect();
        env.insert("sender".into(), Value::Addr(tx.sender.clone()));
        env.insert("value".into(), Value::Int(tx.value));
        env
    }

    /// Run `tx`, returning its writes, or `Failure` when it is invalid.
    fn run(&self, state: &BlockchainState, tx: &AccountTransaction) -> Result<StateUpdate, Failure> {
        let f = self.resolve(tx).ok_or(Failure)?;
        let mut ov = Overlay::new(state);
        // zero-value calls move nothing and need no balance check
        if tx.value > 0 {
            ov.transfer(&tx.sender, &tx.target, tx.value)?;
        }
        run_stmt(&f.body, &mut ov, &Self::env(tx, f), &tx.target)?;
        Ok(ov.into_update())
    }

    pub fn validate(&self, state: &BlockchainState, tx: &AccountTransaction) -> bool {
        self.run(state, tx).is_ok()
    }
}

impl Platform for AccountPlatform {
    type Tx = AccountTransaction;

    fn effect(&self, state: &BlockchainState, tx: &AccountTransaction) -> StateUpdate {
        self.run(state, tx).unwrap_or_default()
    }

    fn initial_state(&self) -> BlockchainState {
        self.genesis.clone()
    }
}

impl RwAnalysis<AccountTransaction> for AccountPlatform {
    fn analyze(&self, tx: &AccountTransaction) -> Analysis {
        analyze_rw(self, tx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{addr, exec_serial, Key};

    fn bal(a: &str) -> Observable {
        Observable::balance_of(addr(a))
    }

    fn x(k: &str) -> Observable {
        Observable::account(addr("cA"), Key::plain(k))
    }

    #[test]
    fn th_sem_transactions_one_by_one() {
        let fx = fixtures::th_sem();
        let p = fx.platform();
        let s0 = p.initial_state();
        assert_eq!(s0.get(&bal("A")), Some(&Value::Int(2)));
        let [t0, t1, t2] = [&fx.block[0], &fx.block[1], &fx.block[2]];

        let s1 = p.apply(&s0, t0);
        assert_eq!(s1, s0.with(x("x"), Value::Int(1)));
        // x = 1, so f1 only receives the unit
        let s2 = p.apply(&s1, t1);
        assert_eq!(s2, s1.with(bal("A"), Value::Int(1)).with(bal("cA"), Value::Int(1)));
        let s3 = p.apply(&s2, t2);
        assert_eq!(s3, s2.with(bal("A"), Value::Int(0)).with(bal("B"), Value::Int(1)));
        assert_eq!(exec_serial(&fx.block, &s0, &p), s3);
        // σ0{x↦1} − A:2 + B:1 + cA:1
        let expected = s0
            .with(x("x"), Value::Int(1))
            .with(bal("A"), Value::Int(0))
            .with(bal("B"), Value::Int(1))
            .with(bal("cA"), Value::Int(1));
        assert_eq!(s3, expected);
    }

    #[test]
    fn validity_conditions() {
        let fx = fixtures::th_sem();
        let p = fx.platform();
        let s0 = p.initial_state();
        assert!(p.validate(&s0, &fx.block[0]));
        let poor = s0.with(bal("A"), Value::Int(0));
        assert!(!p.validate(&poor, &fx.block[1]));
        assert_eq!(p.apply(&poor, &fx.block[1]), poor);

        let mut unknown = fx.block[0].clone();
        unknown.function = "nope".into();
        assert!(!p.validate(&s0, &unknown));
        let mut arity = fx.block[2].clone();
        arity.args.clear();
        assert!(!p.validate(&s0, &arity));
        let mut from_contract = fx.block[0].clone();
        from_contract.sender = addr("cA");
        assert!(!p.validate(&s0, &from_contract));

        // plain transfer to a user
        let pay = AccountTransaction::call(addr("A"), addr("B"), SKIP, 2, vec![]);
        assert_eq!(
            p.apply(&s0, &pay),
            s0.with(bal("A"), Value::Int(0)).with(bal("B"), Value::Int(2))
        );
    }

    #[test]
    fn erc721_block_transfers_both_tokens() {
        let fx = fixtures::erc721();
        let p = fx.platform();
        let s = exec_serial(&fx.block, &p.initial_state(), &p);
        let owner = |id| {
            s.get(&Observable::account(
                addr("Token"),
                Key::indexed("owner", vec![Value::Int(id)]),
            ))
            .cloned()
        };
        assert_eq!(owner(1), Some(Value::Addr(addr("B"))));
        assert_eq!(owner(2), Some(Value::Addr(addr("Q"))));
    }

    #[test]
    fn lottery_commit_before_join_is_invalid() {
        let fx = fixtures::lottery();
        let p = fx.platform();
        let s0 = p.initial_state();
        let init = &fx.block[0];
        let commit0 = fx
            .block
            .iter()
            .find(|t| t.function == "commit")
            .unwrap();
        let opened = p.apply(&s0, init);
        assert!(!p.validate(&opened, commit0));
        let s = exec_serial(&fx.block, &s0, &p);
        assert_ne!(s, s0);
    }
}
