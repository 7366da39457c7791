//! Bundled example blocks and the small state spaces used to check them
//! exhaustively.

use crate::account::AccountTransaction;
use crate::format::{AccountBlock, BlockFile, UtxoBlock};
use crate::model::{addr, txid, BlockchainState, Key, Observable, Platform, Value};
use crate::swap::StateSpace;
use crate::utxo::{OutRef, Output, Script, UtxoTransaction};

macro_rules! fixture {
    ($name:literal) => {
        ($name, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/", $name, ".json")))
    };
}

/// `(name, JSON text)` of every bundled block file.
pub const ALL: [(&str, &str); 7] = [
    fixture!("erc721"),
    fixture!("th_sem"),
    fixture!("petri1"),
    fixture!("lottery"),
    fixture!("read_not_cap"),
    fixture!("btc_example"),
    fixture!("btc_cex"),
];

/// Parse a bundled block file by name.
pub fn by_name(name: &str) -> Option<BlockFile> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| BlockFile::parse(text).unwrap_or_else(|e| panic!("fixture {n}: {e}")))
}

fn account(name: &str) -> AccountBlock {
    match by_name(name) {
        Some(BlockFile::Account(b)) => b,
        _ => panic!("{name} is not an account fixture"),
    }
}

fn utxo(name: &str) -> UtxoBlock {
    match by_name(name) {
        Some(BlockFile::Utxo(b)) => b,
        _ => panic!("{name} is not a UTXO fixture"),
    }
}

/// Token transfers and an operator approval on a minimal ERC-721 contract.
pub fn erc721() -> AccountBlock {
    account("erc721")
}

/// Contract `cA` with `f0`, `f1`, `f2` and three calls from `A`.
pub fn th_sem() -> AccountBlock {
    account("th_sem")
}

/// `x` unbound/0/1 and the balances of `A`, `B`, `cA` in `0..=3`.
pub fn th_sem_space() -> StateSpace {
    let fx = th_sem();
    let base = fx.platform().initial_state();
    let x = Observable::account(addr("cA"), Key::plain("x"));
    let mut dims = vec![(x, vec![None, Some(Value::Int(0)), Some(Value::Int(1))])];
    for a in ["A", "B", "cA"] {
        dims.push((
            Observable::balance_of(addr(a)),
            (0..=3).map(|n| Some(Value::Int(n))).collect(),
        ));
    }
    StateSpace::grid(&base, &dims, 1 << 12).expect("small grid")
}

/// Transactions `F`, `H`, `G` where `F` and `G` disable each other.
pub fn petri1() -> AccountBlock {
    account("petri1")
}

/// One complete two-player lottery game.
pub fn lottery() -> AccountBlock {
    account("lottery")
}

/// `games` independent lotteries on contracts `L0 ..`, played one after the
/// other (8 transactions each).
pub fn lottery_replay(games: usize) -> AccountBlock {
    let one = lottery();
    let template = &one.contracts[0];
    let old = template.address().clone();
    let mut contracts = Vec::new();
    let mut genesis = BlockchainState::new();
    for (o, v) in one.genesis.iter() {
        if !matches!(o, Observable::Account { address, .. } if *address == old) {
            genesis = genesis.with(o.clone(), v.clone());
        }
    }
    let mut block = Vec::new();
    let mut labels = Vec::new();
    let base_labels = one.labels();
    for g in 0..games {
        let a = addr(&format!("L{g}"));
        let functions = template.functions().map(|(n, f)| (n.clone(), f.clone())).collect();
        contracts.push(crate::account::Contract::new(a.clone(), functions).expect("valid template"));
        for (o, v) in one.genesis.iter() {
            if let Observable::Account { address, key } = o {
                if *address == old {
                    genesis = genesis.with(Observable::account(a.clone(), key.clone()), v.clone());
                }
            }
        }
        for (t, l) in one.block.iter().zip(&base_labels) {
            block.push(AccountTransaction { target: a.clone(), ..t.clone() });
            labels.push(format!("{l}.{g}"));
        }
    }
    AccountBlock {
        contracts,
        genesis,
        block,
        labels: Some(labels),
    }
}

/// `k` and `k2` always hold the same value, so each alone is a safe read
/// approximation of `g` while their intersection is not.
pub fn read_not_cap() -> AccountBlock {
    account("read_not_cap")
}

/// States reachable from the genesis of [`read_not_cap`] under its block.
pub fn read_not_cap_space() -> StateSpace {
    let fx = read_not_cap();
    let p = fx.platform();
    StateSpace::reachable(&p, &[p.initial_state()], &fx.block, 1 << 12).expect("small closure")
}

/// A two-party transfer: `T1` spends `(T0,1)`, `T2` spends `(T0,2)` and `(T1,2)`.
pub fn btc_example() -> UtxoBlock {
    utxo("btc_example")
}

/// Every output of `fx` (genesis and block) unbound, spent or unspent.
pub fn utxo_grid(fx: &UtxoBlock) -> StateSpace {
    let dims: Vec<_> = fx
        .genesis
        .iter()
        .chain(&fx.block)
        .flat_map(|t| t.output_refs())
        .map(|o| (o, vec![None, Some(Value::Int(0)), Some(Value::Int(1))]))
        .collect();
    StateSpace::grid(&BlockchainState::new(), &dims, 1 << 16).expect("small grid")
}

pub fn btc_example_space() -> StateSpace {
    utxo_grid(&btc_example())
}

/// `T1` and `T3` are swappable on reachable states although `T3` spends an
/// output of `T1`.
pub fn btc_cex() -> UtxoBlock {
    utxo("btc_cex")
}

/// States reachable from the genesis of [`btc_cex`].
pub fn btc_cex_space() -> StateSpace {
    let fx = btc_cex();
    let p = fx.platform();
    StateSpace::reachable(&p, &[p.initial_state()], &fx.block, 1 << 12).expect("small closure")
}

/// `n` transactions, each spending its own output of a single coinbase.
pub fn utxo_disjoint(n: usize) -> UtxoBlock {
    let coinbase = UtxoTransaction {
        id: txid("G"),
        inputs: vec![],
        witnesses: vec![],
        outputs: (0..n).map(|_| Output { script: Script::int(1), value: 1 }).collect(),
    };
    let block = (1..=n)
        .map(|i| UtxoTransaction {
            id: txid(&format!("D{i}")),
            inputs: vec![OutRef::new(txid("G"), i as u32)],
            witnesses: vec![vec![]],
            outputs: vec![Output { script: Script::int(1), value: 1 }],
        })
        .collect();
    UtxoBlock {
        genesis: vec![coinbase],
        block,
        labels: None,
    }
}
