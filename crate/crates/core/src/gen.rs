//! Seeded random blocks for both platforms.
//!
//! Blocks are small and deliberately messy: double spends, bad signatures,
//! overdrafts, unknown functions and state-dependent keys all occur, so
//! invalid transactions and widened analyses are exercised as well.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::account::{AccountTransaction, BinOp, Contract, Expr, Function, KeyExpr, Stmt, SKIP};
use crate::format::{AccountBlock, BlockFile, UtxoBlock};
use crate::model::{addr, txid, Address, BlockchainState, Key, Observable, Value};
use crate::utxo::{OutRef, Output, Script, ScriptValue, UtxoTransaction};

const KEYS: [&str; 3] = ["A", "B", "C"];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A UTXO block of at most `max_len` transactions.
pub fn utxo_block(seed: u64, max_len: usize) -> BlockFile {
    BlockFile::Utxo(gen_utxo(&mut rng(seed), max_len))
}

/// An account block of at most `max_len` transactions.
pub fn account_block(seed: u64, max_len: usize) -> BlockFile {
    BlockFile::Account(gen_account(&mut rng(seed), max_len))
}

fn gen_script(r: &mut ChaCha8Rng) -> Script {
    match r.gen_range(0..4) {
        0 => Script::int(1),
        1 => Script::hash_lock(51),
        _ => Script::versig_wit(KEYS.choose(r).unwrap()),
    }
}

/// A witness that usually satisfies `script` when redeemed by `tx`.
fn gen_witness(r: &mut ChaCha8Rng, script: &Script, tx: &str) -> Vec<ScriptValue> {
    let honest = r.gen_bool(0.9);
    match script {
        Script::Versig(k, _) => {
            let key = match (**k).clone() {
                Script::Const(ScriptValue::Bytes(b)) if honest => String::from_utf8(b).unwrap(),
                _ => KEYS.choose(r).unwrap().to_string(),
            };
            vec![ScriptValue::sig(&key, txid(tx))]
        }
        // byte 51 is a preimage of 51 under the byte-sum hash
        Script::Bin(..) if honest => vec![ScriptValue::Bytes(vec![51])],
        Script::Bin(..) => vec![ScriptValue::Int(r.gen_range(0..100))],
        _ => vec![],
    }
}

fn gen_utxo(r: &mut ChaCha8Rng, max_len: usize) -> UtxoBlock {
    let mut known: BTreeMap<OutRef, Output> = BTreeMap::new();
    let mut genesis = Vec::new();
    for g in 0..r.gen_range(1..=2) {
        let t = UtxoTransaction {
            id: txid(&format!("G{g}")),
            inputs: vec![],
            witnesses: vec![],
            outputs: (0..r.gen_range(1..=4))
                .map(|_| Output { script: gen_script(r), value: r.gen_range(10..=100) })
                .collect(),
        };
        for (i, o) in t.outputs.iter().enumerate() {
            known.insert(OutRef::new(t.id.clone(), i as u32 + 1), o.clone());
        }
        genesis.push(t);
    }
    let n = r.gen_range(0..=max_len);
    let mut block = Vec::with_capacity(n);
    for k in 1..=n {
        let id = format!("T{k}");
        let pool: Vec<_> = known.keys().cloned().collect();
        let inputs: Vec<OutRef> = (0..r.gen_range(1..=2))
            .map(|_| pool.choose(r).unwrap().clone())
            .collect();
        let witnesses = inputs
            .iter()
            .map(|i| gen_witness(r, &known[i].script, &id))
            .collect();
        let total: u64 = inputs.iter().map(|i| known[i].value).sum();
        let outs = r.gen_range(1..=3u64);
        let budget = if r.gen_bool(0.05) { total + 1 } else { total };
        let outputs: Vec<Output> = (0..outs)
            .map(|_| Output { script: gen_script(r), value: budget / outs })
            .collect();
        let t = UtxoTransaction { id: txid(&id), inputs, witnesses, outputs };
        for (i, o) in t.outputs.iter().enumerate() {
            known.insert(OutRef::new(t.id.clone(), i as u32 + 1), o.clone());
        }
        block.push(t);
    }
    UtxoBlock { genesis, block, labels: None }
}

fn get_at(name: &str, ix: Expr) -> Expr {
    Expr::get_at(name, vec![ix])
}

fn key_at(name: &str, ix: Expr) -> KeyExpr {
    KeyExpr::indexed(name, vec![ix])
}

fn f(params: &[&str], body: Stmt) -> Function {
    Function {
        params: params.iter().map(|p| p.to_string()).collect(),
        body,
    }
}

/// Function templates; each contract gets a random subset.
fn templates() -> Vec<(&'static str, Function)> {
    use BinOp::*;
    let k = || Expr::name("k");
    vec![
        ("inc", f(&["k"], Stmt::assign(key_at("n", k()), Expr::bin(Add, get_at("n", k()), Expr::int(1))))),
        ("set", f(&["k", "v"], Stmt::assign(key_at("m", k()), Expr::name("v")))),
        (
            "guard",
            f(
                &["k"],
                Stmt::if_else(
                    Expr::bin(Eq, get_at("m", k()), Expr::int(0)),
                    Stmt::assign(key_at("n", k()), Expr::int(1)),
                    Stmt::Throw,
                ),
            ),
        ),
        ("forward", f(&["to"], Stmt::Send(Expr::name("value"), Expr::name("to")))),
        (
            "payout",
            f(
                &["to"],
                Stmt::Seq(vec![
                    Stmt::Require(Expr::bin(Lt, Expr::int(0), Expr::get("pot"))),
                    Stmt::assign(KeyExpr::plain("pot"), Expr::bin(Sub, Expr::get("pot"), Expr::int(1))),
                    Stmt::Send(Expr::int(1), Expr::name("to")),
                ]),
            ),
        ),
        ("fund", f(&[], Stmt::assign(KeyExpr::plain("pot"), Expr::bin(Add, Expr::get("pot"), Expr::name("value"))))),
        ("point", f(&["k"], Stmt::assign(KeyExpr::plain("ptr"), Expr::name("k")))),
        ("poke", f(&[], Stmt::assign(key_at("n", Expr::get("ptr")), Expr::int(7)))),
        ("elect", f(&[], Stmt::assign(KeyExpr::plain("winner"), Expr::name("sender")))),
        (
            "reward",
            f(
                &[],
                Stmt::if_then(
                    Expr::bin(Lt, Expr::int(0), Expr::get("balance")),
                    Stmt::Send(Expr::int(1), Expr::get("winner")),
                ),
            ),
        ),
        (
            "swap",
            f(
                &["a", "b"],
                Stmt::Seq(vec![
                    Stmt::assign(KeyExpr::plain("tmp"), get_at("m", Expr::name("a"))),
                    Stmt::assign(key_at("m", Expr::name("a")), get_at("m", Expr::name("b"))),
                    Stmt::assign(key_at("m", Expr::name("b")), Expr::get("tmp")),
                ]),
            ),
        ),
        ("noop", f(&[], Stmt::Skip)),
    ]
}

fn gen_arg(r: &mut ChaCha8Rng, users: &[Address], contracts: &[Address]) -> Value {
    match r.gen_range(0..10) {
        0..=5 => Value::Int(r.gen_range(0..3)),
        6..=8 => Value::Addr(users.choose(r).unwrap().clone()),
        _ => Value::Addr(contracts.choose(r).unwrap().clone()),
    }
}

fn gen_account(r: &mut ChaCha8Rng, max_len: usize) -> AccountBlock {
    let users: Vec<Address> = (0..r.gen_range(2..=4)).map(|i| addr(&format!("U{i}"))).collect();
    let names: Vec<Address> = (0..r.gen_range(1..=2)).map(|i| addr(&format!("C{i}"))).collect();
    let all = templates();
    let mut contracts = Vec::new();
    for a in &names {
        let mut fs: BTreeMap<String, Function> = BTreeMap::new();
        for (n, f) in &all {
            if r.gen_bool(0.6) {
                fs.insert(n.to_string(), f.clone());
            }
        }
        fs.entry("inc".into()).or_insert_with(|| all[0].1.clone());
        contracts.push(Contract::new(a.clone(), fs).expect("templates are valid"));
    }
    let mut genesis = BlockchainState::new();
    for u in &users {
        genesis = genesis.with(Observable::balance_of(u.clone()), Value::Int(r.gen_range(0..=5)));
    }
    for c in &names {
        genesis = genesis.with(Observable::balance_of(c.clone()), Value::Int(r.gen_range(0..=3)));
        if r.gen_bool(0.5) {
            genesis = genesis.with(Observable::account(c.clone(), Key::plain("pot")), Value::Int(r.gen_range(0..=2)));
        }
        if r.gen_bool(0.5) {
            let w = users.choose(r).unwrap().clone();
            genesis = genesis.with(Observable::account(c.clone(), Key::plain("winner")), Value::Addr(w));
        }
    }
    let n = r.gen_range(0..=max_len);
    let block = (0..n)
        .map(|_| {
            let sender = users.choose(r).unwrap().clone();
            let value = if r.gen_bool(0.6) { 0 } else { r.gen_range(1..=2) };
            if r.gen_bool(0.1) {
                let to = users.choose(r).unwrap().clone();
                return AccountTransaction::call(sender, to, SKIP, value, vec![]);
            }
            let c = contracts.choose(r).unwrap();
            let fnames: Vec<&String> = c.functions().map(|(n, _)| n).collect();
            let (name, mut arity) = if r.gen_bool(0.03) {
                ("missing".to_string(), 0)
            } else {
                let n = (*fnames.choose(r).unwrap()).clone();
                let a = c.function(&n).unwrap().params.len();
                (n, a)
            };
            if r.gen_bool(0.03) {
                arity += 1;
            }
            let args = (0..arity).map(|_| gen_arg(r, &users, &names)).collect();
            AccountTransaction::call(sender, c.address().clone(), &name, value, args)
        })
        .collect();
    AccountBlock {
        contracts,
        genesis,
        block,
        labels: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exec_serial, Platform};

    #[test]
    fn generation_is_deterministic() {
        for seed in 0..20 {
            assert_eq!(utxo_block(seed, 16), utxo_block(seed, 16));
            assert_eq!(account_block(seed, 16), account_block(seed, 16));
            assert!(utxo_block(seed, 16).len() <= 16);
        }
    }

    #[test]
    fn blocks_mix_valid_and_invalid_transactions() {
        let (mut valid, mut invalid) = (0, 0);
        for seed in 0..50 {
            if let BlockFile::Account(b) = account_block(seed, 16) {
                let p = b.platform();
                let mut s = p.initial_state();
                for t in &b.block {
                    if p.validate(&s, t) {
                        valid += 1;
                    } else {
                        invalid += 1;
                    }
                    s = p.apply(&s, t);
                }
                assert_eq!(s, exec_serial(&b.block, &p.initial_state(), &p));
            }
            if let BlockFile::Utxo(b) = utxo_block(seed, 16) {
                let p = b.platform();
                let mut s = p.initial_state();
                for t in &b.block {
                    if p.validate(&s, t) {
                        valid += 1;
                    } else {
                        invalid += 1;
                    }
                    s = p.apply(&s, t);
                }
            }
        }
        assert!(valid > 100 && invalid > 20, "valid {valid}, invalid {invalid}");
    }
}
