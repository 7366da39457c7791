//! The `txpar-block/1` JSON block file format and the canonical JSON dump
//! of states and updates.
//!
//! Expressions, statements and scripts are operator-first JSON arrays:
//!
//! | construct | encoding |
//! |---|---|
//! | integer / boolean constant | `3`, `true` |
//! | address / string constant | `{"addr": "A"}`, `{"str": "s"}` |
//! | `sender`, `value`, parameter | `"sender"` |
//! | key lookup `owner[id]` | `["get", "owner", "id"]` |
//! | binary operator | `["+", a, b]` (`+ - = != < and or`) |
//! | negation | `["not", e]` |
//! | statements | `"skip"`, `"throw"`, `["assign", key, e]`, `["seq", s..]`, `["if", c, s]`, `["if", c, s, s]`, `["require", e]`, `["send", amount, to]` |
//! | assigned key | `"x"` or `["owner", e..]` |
//!
//! Scripts use `"wit"`, integers, witness values as objects, `["+" | "-" | "=" | "<", a, b]`,
//! `["if", c, a, b]`, `["at", e, n]`, `["size", e]`, `["hash", e]` and
//! `["versig", key, sig]`. Witness values are integers, `{"text": s}`,
//! `{"hex": h}`, `{"sig": key, "tx": id}` or arrays of witness values.
//!
//! Errors carry a JSONPath-like position such as `$.transactions[2].args[0]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value as J};

use crate::account::{AccountPlatform, AccountTransaction, BinOp, Contract, Expr, Function, KeyExpr, Stmt};
use crate::error::{Error, Result};
use crate::exec::default_labels;
use crate::model::{Address, BlockchainState, Key, Observable, StateUpdate, TxId, Value};
use crate::utxo::{OutRef, Output, Script, ScriptOp, ScriptValue, UtxoPlatform, UtxoTransaction};

pub const FORMAT: &str = "txpar-block/1";

type Obj = Map<String, J>;

fn err<T>(path: &str, msg: impl Into<String>) -> Result<T> {
    Err(Error::schema(path, msg))
}

fn kind(v: &J) -> &'static str {
    match v {
        J::Null => "null",
        J::Bool(_) => "a boolean",
        J::Number(_) => "a number",
        J::String(_) => "a string",
        J::Array(_) => "an array",
        J::Object(_) => "an object",
    }
}

fn as_obj<'a>(v: &'a J, path: &str) -> Result<&'a Obj> {
    v.as_object()
        .map_or_else(|| err(path, format!("expected an object, found {}", kind(v))), Ok)
}

fn as_arr<'a>(v: &'a J, path: &str) -> Result<&'a Vec<J>> {
    v.as_array()
        .map_or_else(|| err(path, format!("expected an array, found {}", kind(v))), Ok)
}

fn as_str<'a>(v: &'a J, path: &str) -> Result<&'a str> {
    v.as_str()
        .map_or_else(|| err(path, format!("expected a string, found {}", kind(v))), Ok)
}

fn as_i64(v: &J, path: &str) -> Result<i64> {
    v.as_i64()
        .map_or_else(|| err(path, format!("expected a 64-bit integer, found {v}")), Ok)
}

fn as_u64(v: &J, path: &str) -> Result<u64> {
    v.as_u64()
        .map_or_else(|| err(path, format!("expected a non-negative integer, found {v}")), Ok)
}

fn field<'a>(o: &'a Obj, path: &str, k: &str) -> Result<&'a J> {
    o.get(k)
        .map_or_else(|| err(path, format!("missing field {k:?}")), Ok)
}

fn only(o: &Obj, path: &str, allowed: &[&str]) -> Result<()> {
    match o.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => err(path, format!("unknown field {k:?}")),
        None => Ok(()),
    }
}

fn ident<T>(v: &J, path: &str, mk: impl FnOnce(String) -> Result<T>) -> Result<T> {
    mk(as_str(v, path)?.to_string()).map_err(|e| Error::schema(path, e.to_string()))
}

fn address(v: &J, path: &str) -> Result<Address> {
    ident(v, path, Address::new)
}

fn tx_id(v: &J, path: &str) -> Result<TxId> {
    ident(v, path, TxId::new)
}

/// `[a, b, ..]` with exactly `n` elements after the operator.
fn args<'a>(a: &'a [J], path: &str, op: &str, n: usize) -> Result<&'a [J]> {
    if a.len() != n + 1 {
        return err(path, format!("{op:?} takes {n} operand(s), found {}", a.len() - 1));
    }
    Ok(&a[1..])
}

// ---- values, keys, observables -------------------------------------------

pub fn value_to_json(v: &Value) -> J {
    match v {
        Value::Int(n) => json!(n),
        Value::Bool(b) => json!(b),
        Value::Addr(a) => json!({ "addr": a.as_str() }),
        Value::Str(s) => json!(s),
    }
}

pub fn value_from_json(v: &J, path: &str) -> Result<Value> {
    match v {
        J::Number(_) => Ok(Value::Int(as_i64(v, path)?)),
        J::Bool(b) => Ok(Value::Bool(*b)),
        J::String(s) => Ok(Value::Str(s.clone())),
        J::Object(o) => {
            only(o, path, &["addr"])?;
            Ok(Value::Addr(address(field(o, path, "addr")?, &format!("{path}.addr"))?))
        }
        _ => err(path, format!("expected a value, found {}", kind(v))),
    }
}

fn key_to_json(k: &Key) -> J {
    if k.indices.is_empty() {
        json!(k.name)
    } else {
        let mut a = vec![json!(k.name)];
        a.extend(k.indices.iter().map(value_to_json));
        J::Array(a)
    }
}

fn key_from_json(v: &J, path: &str) -> Result<Key> {
    match v {
        J::String(s) => Ok(Key::plain(s.clone())),
        J::Array(a) if !a.is_empty() => {
            let name = as_str(&a[0], &format!("{path}[0]"))?;
            let indices = a[1..]
                .iter()
                .enumerate()
                .map(|(i, x)| value_from_json(x, &format!("{path}[{}]", i + 1)))
                .collect::<Result<_>>()?;
            Ok(Key::indexed(name, indices))
        }
        _ => err(path, "expected a key name or [name, index..]"),
    }
}

pub fn observable_to_json(o: &Observable) -> J {
    match o {
        Observable::Output { tx, index } => json!({ "tx": tx.as_str(), "index": index }),
        Observable::Account { address, key } => {
            let mut m = Obj::new();
            m.insert("address".into(), json!(address.as_str()));
            m.insert("key".into(), json!(key.name));
            if !key.indices.is_empty() {
                m.insert("indices".into(), key.indices.iter().map(value_to_json).collect());
            }
            J::Object(m)
        }
    }
}

fn bindings_to_json<'a>(it: impl Iterator<Item = (&'a Observable, &'a Value)>) -> J {
    it.map(|(o, v)| json!({ "observable": observable_to_json(o), "value": value_to_json(v) }))
        .collect()
}

/// Canonical dump: bindings sorted by observable.
pub fn state_to_json(s: &BlockchainState) -> J {
    bindings_to_json(s.iter())
}

pub fn update_to_json(u: &StateUpdate) -> J {
    bindings_to_json(u.iter())
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        value_to_json(self).serialize(s)
    }
}

impl Serialize for Observable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        observable_to_json(self).serialize(s)
    }
}

impl Serialize for StateUpdate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        update_to_json(self).serialize(s)
    }
}

impl Serialize for BlockchainState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        state_to_json(self).serialize(s)
    }
}

// ---- contract language ------------------------------------------------------

pub fn expr_to_json(e: &Expr) -> J {
    match e {
        Expr::Const(Value::Str(s)) => json!({ "str": s }),
        Expr::Const(v) => value_to_json(v),
        Expr::Name(n) => json!(n),
        Expr::Get(k) => {
            let mut a = vec![json!("get"), json!(k.name)];
            a.extend(k.indices.iter().map(expr_to_json));
            J::Array(a)
        }
        Expr::Bin(op, a, b) => json!([op.symbol(), expr_to_json(a), expr_to_json(b)]),
        Expr::Not(a) => json!(["not", expr_to_json(a)]),
    }
}

fn exprs(items: &[J], path: &str, offset: usize) -> Result<Vec<Expr>> {
    items
        .iter()
        .enumerate()
        .map(|(i, x)| expr_from_json(x, &format!("{path}[{}]", i + offset)))
        .collect()
}

pub fn expr_from_json(v: &J, path: &str) -> Result<Expr> {
    match v {
        J::Number(_) | J::Bool(_) => Ok(Expr::Const(value_from_json(v, path)?)),
        J::String(s) => Ok(Expr::Name(s.clone())),
        J::Object(o) if o.contains_key("str") => {
            only(o, path, &["str"])?;
            Ok(Expr::Const(Value::Str(as_str(&o["str"], &format!("{path}.str"))?.to_string())))
        }
        J::Object(_) => Ok(Expr::Const(value_from_json(v, path)?)),
        J::Array(a) => {
            let Some(head) = a.first() else {
                return err(path, "empty expression");
            };
            let op = as_str(head, &format!("{path}[0]"))?;
            match op {
                "get" => {
                    if a.len() < 2 {
                        return err(path, "\"get\" needs a key name");
                    }
                    let name = as_str(&a[1], &format!("{path}[1]"))?;
                    Ok(Expr::Get(KeyExpr::indexed(name, exprs(&a[2..], path, 2)?)))
                }
                "not" => {
                    let x = args(a, path, op, 1)?;
                    Ok(Expr::negate(expr_from_json(&x[0], &format!("{path}[1]"))?))
                }
                "const" => {
                    let x = args(a, path, op, 1)?;
                    Ok(Expr::Const(value_from_json(&x[0], &format!("{path}[1]"))?))
                }
                _ => match BinOp::from_symbol(op) {
                    Some(b) => {
                        let x = exprs(args(a, path, op, 2)?, path, 1)?;
                        let [l, r]: [Expr; 2] = x.try_into().expect("two operands");
                        Ok(Expr::bin(b, l, r))
                    }
                    None => err(&format!("{path}[0]"), format!("unknown operator {op:?}")),
                },
            }
        }
        J::Null => err(path, "expected an expression, found null"),
    }
}

fn key_expr_to_json(k: &KeyExpr) -> J {
    if k.indices.is_empty() {
        json!(k.name)
    } else {
        let mut a = vec![json!(k.name)];
        a.extend(k.indices.iter().map(expr_to_json));
        J::Array(a)
    }
}

fn key_expr_from_json(v: &J, path: &str) -> Result<KeyExpr> {
    match v {
        J::String(s) => Ok(KeyExpr::plain(s)),
        J::Array(a) if !a.is_empty() => {
            let name = as_str(&a[0], &format!("{path}[0]"))?;
            Ok(KeyExpr::indexed(name, exprs(&a[1..], path, 1)?))
        }
        _ => err(path, "expected a key name or [name, index..]"),
    }
}

pub fn stmt_to_json(s: &Stmt) -> J {
    match s {
        Stmt::Skip => json!("skip"),
        Stmt::Throw => json!("throw"),
        Stmt::Assign(k, e) => json!(["assign", key_expr_to_json(k), expr_to_json(e)]),
        Stmt::Seq(v) => {
            let mut a = vec![json!("seq")];
            a.extend(v.iter().map(stmt_to_json));
            J::Array(a)
        }
        Stmt::If(c, t, e) if **e == Stmt::Skip => json!(["if", expr_to_json(c), stmt_to_json(t)]),
        Stmt::If(c, t, e) => json!(["if", expr_to_json(c), stmt_to_json(t), stmt_to_json(e)]),
        Stmt::Require(e) => json!(["require", expr_to_json(e)]),
        Stmt::Send(n, to) => json!(["send", expr_to_json(n), expr_to_json(to)]),
    }
}

pub fn stmt_from_json(v: &J, path: &str) -> Result<Stmt> {
    let sub = |i: usize| format!("{path}[{i}]");
    let (op, a): (&str, &[J]) = match v {
        J::String(s) => (s.as_str(), std::slice::from_ref(v)),
        J::Array(a) if !a.is_empty() => (as_str(&a[0], &sub(0))?, a.as_slice()),
        _ => return err(path, "expected a statement"),
    };
    match op {
        "skip" => args(a, path, op, 0).map(|_| Stmt::Skip),
        "throw" => args(a, path, op, 0).map(|_| Stmt::Throw),
        "assign" => {
            let x = args(a, path, op, 2)?;
            Ok(Stmt::assign(key_expr_from_json(&x[0], &sub(1))?, expr_from_json(&x[1], &sub(2))?))
        }
        "seq" => Ok(Stmt::Seq(
            a[1..]
                .iter()
                .enumerate()
                .map(|(i, s)| stmt_from_json(s, &sub(i + 1)))
                .collect::<Result<_>>()?,
        )),
        "if" => {
            let c = || expr_from_json(&a[1], &sub(1));
            let t = || stmt_from_json(&a[2], &sub(2));
            match a.len() {
                3 => Ok(Stmt::if_then(c()?, t()?)),
                4 => Ok(Stmt::if_else(c()?, t()?, stmt_from_json(&a[3], &sub(3))?)),
                n => err(path, format!("\"if\" takes 2 or 3 operands, found {}", n - 1)),
            }
        }
        "require" => {
            let x = args(a, path, op, 1)?;
            Ok(Stmt::Require(expr_from_json(&x[0], &sub(1))?))
        }
        "send" => {
            let x = args(a, path, op, 2)?;
            Ok(Stmt::Send(expr_from_json(&x[0], &sub(1))?, expr_from_json(&x[1], &sub(2))?))
        }
        _ => err(&sub(0), format!("unknown statement {op:?}")),
    }
}

pub fn contract_to_json(c: &Contract) -> J {
    let functions: Obj = c
        .functions()
        .map(|(name, f)| {
            (
                name.clone(),
                json!({ "params": f.params, "body": stmt_to_json(&f.body) }),
            )
        })
        .collect();
    json!({ "address": c.address().as_str(), "functions": functions })
}

pub fn contract_from_json(v: &J, path: &str) -> Result<Contract> {
    let o = as_obj(v, path)?;
    only(o, path, &["address", "functions"])?;
    let address = address(field(o, path, "address")?, &format!("{path}.address"))?;
    let fpath = format!("{path}.functions");
    let mut functions = BTreeMap::new();
    for (name, f) in as_obj(field(o, path, "functions")?, &fpath)? {
        let p = format!("{fpath}.{name}");
        let fo = as_obj(f, &p)?;
        only(fo, &p, &["params", "body"])?;
        let params = match fo.get("params") {
            None => Vec::new(),
            Some(ps) => as_arr(ps, &format!("{p}.params"))?
                .iter()
                .enumerate()
                .map(|(i, x)| as_str(x, &format!("{p}.params[{i}]")).map(str::to_string))
                .collect::<Result<_>>()?,
        };
        let body = stmt_from_json(field(fo, &p, "body")?, &format!("{p}.body"))?;
        functions.insert(name.clone(), Function { params, body });
    }
    Contract::new(address, functions).map_err(|e| Error::schema(path, e.to_string()))
}

pub fn account_tx_to_json(t: &AccountTransaction) -> J {
    json!({
        "sender": t.sender.as_str(),
        "target": t.target.as_str(),
        "function": t.function,
        "value": t.value,
        "args": t.args.iter().map(value_to_json).collect::<Vec<_>>(),
    })
}

pub fn account_tx_from_json(v: &J, path: &str) -> Result<AccountTransaction> {
    let o = as_obj(v, path)?;
    only(o, path, &["sender", "target", "function", "value", "args"])?;
    let sub = |k: &str| format!("{path}.{k}");
    Ok(AccountTransaction {
        sender: address(field(o, path, "sender")?, &sub("sender"))?,
        target: address(field(o, path, "target")?, &sub("target"))?,
        function: as_str(field(o, path, "function")?, &sub("function"))?.to_string(),
        value: o.get("value").map_or(Ok(0), |x| as_i64(x, &sub("value")))?,
        args: match o.get("args") {
            None => Vec::new(),
            Some(a) => as_arr(a, &sub("args"))?
                .iter()
                .enumerate()
                .map(|(i, x)| value_from_json(x, &format!("{path}.args[{i}]")))
                .collect::<Result<_>>()?,
        },
    })
}

/// Genesis of an account block: `{"balances": {..}, "storage": [..]}`.
pub fn account_genesis_to_json(s: &BlockchainState) -> J {
    let mut balances = Obj::new();
    let mut storage = Vec::new();
    for (o, v) in s.iter() {
        match (o, v) {
            (Observable::Account { address, key }, Value::Int(n)) if key.is_balance() => {
                balances.insert(address.to_string(), json!(n));
            }
            (Observable::Account { address, key }, v) => storage.push(json!({
                "address": address.as_str(),
                "key": key_to_json(key),
                "value": value_to_json(v),
            })),
            (Observable::Output { .. }, _) => {}
        }
    }
    json!({ "balances": balances, "storage": storage })
}

pub fn account_genesis_from_json(v: &J, path: &str) -> Result<BlockchainState> {
    let o = as_obj(v, path)?;
    only(o, path, &["balances", "storage"])?;
    let mut bindings = BTreeMap::new();
    if let Some(b) = o.get("balances") {
        let bp = format!("{path}.balances");
        for (a, n) in as_obj(b, &bp)? {
            let p = format!("{bp}.{a}");
            let a = address(&json!(a), &p)?;
            bindings.insert(Observable::balance_of(a), Value::Int(as_i64(n, &p)?));
        }
    }
    if let Some(st) = o.get("storage") {
        let sp = format!("{path}.storage");
        for (i, e) in as_arr(st, &sp)?.iter().enumerate() {
            let p = format!("{sp}[{i}]");
            let eo = as_obj(e, &p)?;
            only(eo, &p, &["address", "key", "value"])?;
            let a = address(field(eo, &p, "address")?, &format!("{p}.address"))?;
            let k = key_from_json(field(eo, &p, "key")?, &format!("{p}.key"))?;
            let val = value_from_json(field(eo, &p, "value")?, &format!("{p}.value"))?;
            let obs = Observable::account(a, k);
            if bindings.insert(obs.clone(), val).is_some() {
                return err(&p, format!("{obs} is bound twice"));
            }
        }
    }
    Ok(bindings.into_iter().collect())
}

// ---- scripts ----------------------------------------------------------------

pub fn script_value_to_json(v: &ScriptValue) -> J {
    match v {
        ScriptValue::Int(n) => json!(n),
        ScriptValue::Bytes(b) => match std::str::from_utf8(b) {
            Ok(s) => json!({ "text": s }),
            Err(_) => json!({ "hex": hex::encode(b) }),
        },
        ScriptValue::Sig { key, tx } => json!({ "sig": key, "tx": tx.as_str() }),
        ScriptValue::Seq(v) => v.iter().map(script_value_to_json).collect(),
    }
}

pub fn script_value_from_json(v: &J, path: &str) -> Result<ScriptValue> {
    match v {
        J::Number(_) => Ok(ScriptValue::Int(as_i64(v, path)?)),
        J::Array(a) => Ok(ScriptValue::Seq(
            a.iter()
                .enumerate()
                .map(|(i, x)| script_value_from_json(x, &format!("{path}[{i}]")))
                .collect::<Result<_>>()?,
        )),
        J::Object(o) if o.contains_key("text") => {
            only(o, path, &["text"])?;
            Ok(ScriptValue::text(as_str(&o["text"], &format!("{path}.text"))?))
        }
        J::Object(o) if o.contains_key("hex") => {
            only(o, path, &["hex"])?;
            let p = format!("{path}.hex");
            hex::decode(as_str(&o["hex"], &p)?)
                .map(ScriptValue::Bytes)
                .map_err(|e| Error::schema(p, e.to_string()))
        }
        J::Object(o) if o.contains_key("sig") => {
            only(o, path, &["sig", "tx"])?;
            Ok(ScriptValue::Sig {
                key: as_str(&o["sig"], &format!("{path}.sig"))?.to_string(),
                tx: tx_id(field(o, path, "tx")?, &format!("{path}.tx"))?,
            })
        }
        _ => err(path, "expected an integer, {\"text\"}, {\"hex\"}, {\"sig\", \"tx\"} or an array"),
    }
}

fn script_op(s: &str) -> Option<ScriptOp> {
    [ScriptOp::Add, ScriptOp::Sub, ScriptOp::Eq, ScriptOp::Lt]
        .into_iter()
        .find(|op| op.symbol() == s)
}

pub fn script_to_json(s: &Script) -> J {
    match s {
        Script::Const(ScriptValue::Int(n)) => json!(n),
        Script::Const(v @ ScriptValue::Seq(_)) => json!(["const", script_value_to_json(v)]),
        Script::Const(v) => script_value_to_json(v),
        Script::Wit => json!("wit"),
        Script::Bin(op, a, b) => json!([op.symbol(), script_to_json(a), script_to_json(b)]),
        Script::If(c, a, b) => json!(["if", script_to_json(c), script_to_json(a), script_to_json(b)]),
        Script::At(e, n) => json!(["at", script_to_json(e), n]),
        Script::Size(e) => json!(["size", script_to_json(e)]),
        Script::Hash(e) => json!(["hash", script_to_json(e)]),
        Script::Versig(k, s) => json!(["versig", script_to_json(k), script_to_json(s)]),
    }
}

pub fn script_from_json(v: &J, path: &str) -> Result<Script> {
    let sub = |i: usize| format!("{path}[{i}]");
    match v {
        J::Number(_) => Ok(Script::int(as_i64(v, path)?)),
        J::String(s) if s == "wit" => Ok(Script::Wit),
        J::Object(_) => Ok(Script::Const(script_value_from_json(v, path)?)),
        J::Array(a) if !a.is_empty() => {
            let op = as_str(&a[0], &sub(0))?;
            let s = |i: usize| script_from_json(&a[i], &sub(i)).map(Box::new);
            match op {
                "const" => {
                    args(a, path, op, 1)?;
                    Ok(Script::Const(script_value_from_json(&a[1], &sub(1))?))
                }
                "if" => {
                    args(a, path, op, 3)?;
                    Ok(Script::If(s(1)?, s(2)?, s(3)?))
                }
                "at" => {
                    args(a, path, op, 2)?;
                    let n = as_u64(&a[2], &sub(2))?;
                    if n == 0 {
                        return err(&sub(2), "positions are 1-based");
                    }
                    Ok(Script::At(s(1)?, n as usize))
                }
                "size" => args(a, path, op, 1).and_then(|_| Ok(Script::Size(s(1)?))),
                "hash" => args(a, path, op, 1).and_then(|_| Ok(Script::Hash(s(1)?))),
                "versig" => args(a, path, op, 2).and_then(|_| Ok(Script::Versig(s(1)?, s(2)?))),
                _ => match script_op(op) {
                    Some(b) => {
                        args(a, path, op, 2)?;
                        Ok(Script::Bin(b, s(1)?, s(2)?))
                    }
                    None => err(&sub(0), format!("unknown script operator {op:?}")),
                },
            }
        }
        _ => err(path, "expected a script"),
    }
}

pub fn utxo_tx_to_json(t: &UtxoTransaction) -> J {
    json!({
        "id": t.id.as_str(),
        "inputs": t.inputs.iter().map(|r| json!({ "tx": r.tx.as_str(), "index": r.index })).collect::<Vec<_>>(),
        "witnesses": t.witnesses.iter().map(|w| w.iter().map(script_value_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "outputs": t.outputs.iter().map(|o| json!({ "script": script_to_json(&o.script), "value": o.value })).collect::<Vec<_>>(),
    })
}

pub fn utxo_tx_from_json(v: &J, path: &str) -> Result<UtxoTransaction> {
    let o = as_obj(v, path)?;
    only(o, path, &["id", "inputs", "witnesses", "outputs"])?;
    let list = |k: &str| -> Result<&[J]> {
        match o.get(k) {
            None => Ok(&[]),
            Some(x) => Ok(as_arr(x, &format!("{path}.{k}"))?.as_slice()),
        }
    };
    let inputs = list("inputs")?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{path}.inputs[{i}]");
            let r = as_obj(x, &p)?;
            only(r, &p, &["tx", "index"])?;
            let index = as_u64(field(r, &p, "index")?, &format!("{p}.index"))?;
            if index == 0 || index > u32::MAX as u64 {
                return err(&format!("{p}.index"), "output indices are 1-based 32-bit integers");
            }
            Ok(OutRef::new(tx_id(field(r, &p, "tx")?, &format!("{p}.tx"))?, index as u32))
        })
        .collect::<Result<_>>()?;
    let witnesses = list("witnesses")?
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let p = format!("{path}.witnesses[{i}]");
            as_arr(w, &p)?
                .iter()
                .enumerate()
                .map(|(j, x)| script_value_from_json(x, &format!("{p}[{j}]")))
                .collect()
        })
        .collect::<Result<_>>()?;
    let outputs = list("outputs")?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let p = format!("{path}.outputs[{i}]");
            let r = as_obj(x, &p)?;
            only(r, &p, &["script", "value"])?;
            Ok(Output {
                script: script_from_json(field(r, &p, "script")?, &format!("{p}.script"))?,
                value: as_u64(field(r, &p, "value")?, &format!("{p}.value"))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(UtxoTransaction {
        id: tx_id(field(o, path, "id")?, &format!("{path}.id"))?,
        inputs,
        witnesses,
        outputs,
    })
}

// ---- block files ----------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtxoBlock {
    /// Transactions whose outputs are unspent initially.
    pub genesis: Vec<UtxoTransaction>,
    pub block: Vec<UtxoTransaction>,
    pub labels: Option<Vec<String>>,
}

impl UtxoBlock {
    pub fn platform(&self) -> UtxoPlatform {
        UtxoPlatform::new(&self.genesis, &self.block)
    }

    /// Explicit labels, or the transaction ids.
    pub fn labels(&self) -> Vec<String> {
        self.labels
            .clone()
            .unwrap_or_else(|| self.block.iter().map(|t| t.id.to_string()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccountBlock {
    pub contracts: Vec<Contract>,
    pub genesis: BlockchainState,
    pub block: Vec<AccountTransaction>,
    pub labels: Option<Vec<String>>,
}

impl AccountBlock {
    pub fn platform(&self) -> AccountPlatform {
        AccountPlatform::new(self.contracts.clone(), self.genesis.clone())
    }

    /// Explicit labels, or `t1 .. tn`.
    pub fn labels(&self) -> Vec<String> {
        self.labels
            .clone()
            .unwrap_or_else(|| default_labels(self.block.len()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockFile {
    Utxo(UtxoBlock),
    Account(AccountBlock),
}

fn labels_from_json(o: &Obj, n: usize) -> Result<Option<Vec<String>>> {
    let Some(l) = o.get("labels") else {
        return Ok(None);
    };
    let a = as_arr(l, "$.labels")?;
    if a.len() != n {
        return err("$.labels", format!("{} labels for {n} transactions", a.len()));
    }
    let labels: Vec<String> = a
        .iter()
        .enumerate()
        .map(|(i, x)| as_str(x, &format!("$.labels[{i}]")).map(str::to_string))
        .collect::<Result<_>>()?;
    Ok(Some(labels))
}

fn list<'a, T>(
    o: &'a Obj,
    k: &str,
    required: bool,
    f: impl Fn(&'a J, &str) -> Result<T>,
) -> Result<Vec<T>> {
    let path = format!("$.{k}");
    match o.get(k) {
        None if required => err("$", format!("missing field {k:?}")),
        None => Ok(Vec::new()),
        Some(x) => as_arr(x, &path)?
            .iter()
            .enumerate()
            .map(|(i, e)| f(e, &format!("{path}[{i}]")))
            .collect(),
    }
}

impl BlockFile {
    pub fn parse(text: &str) -> Result<Self> {
        let v: J = serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn from_json(v: &J) -> Result<Self> {
        let o = as_obj(v, "$")?;
        let format = as_str(field(o, "$", "format")?, "$.format")?;
        if format != FORMAT {
            return err("$.format", format!("unsupported format {format:?}, expected {FORMAT:?}"));
        }
        match as_str(field(o, "$", "platform")?, "$.platform")? {
            "utxo" => {
                only(o, "$", &["format", "platform", "genesis", "transactions", "labels"])?;
                let genesis = list(o, "genesis", false, utxo_tx_from_json)?;
                let block = list(o, "transactions", true, utxo_tx_from_json)?;
                let mut seen = BTreeSet::new();
                for (k, t) in genesis.iter().map(|t| ("genesis", t)).chain(block.iter().map(|t| ("transactions", t))) {
                    if !seen.insert(&t.id) {
                        return err(&format!("$.{k}"), format!("duplicate transaction id {}", t.id));
                    }
                }
                let labels = labels_from_json(o, block.len())?;
                Ok(BlockFile::Utxo(UtxoBlock { genesis, block, labels }))
            }
            "account" => {
                only(o, "$", &["format", "platform", "contracts", "genesis", "transactions", "labels"])?;
                let contracts = list(o, "contracts", false, contract_from_json)?;
                let mut seen = BTreeSet::new();
                for (i, c) in contracts.iter().enumerate() {
                    if !seen.insert(c.address()) {
                        return err(&format!("$.contracts[{i}]"), format!("duplicate contract {}", c.address()));
                    }
                }
                let genesis = match o.get("genesis") {
                    Some(g) => account_genesis_from_json(g, "$.genesis")?,
                    None => BlockchainState::new(),
                };
                let block = list(o, "transactions", true, account_tx_from_json)?;
                let labels = labels_from_json(o, block.len())?;
                Ok(BlockFile::Account(AccountBlock { contracts, genesis, block, labels }))
            }
            p => err("$.platform", format!("unknown platform {p:?}, expected \"utxo\" or \"account\"")),
        }
    }

    pub fn to_json(&self) -> J {
        let mut m = Obj::new();
        m.insert("format".into(), json!(FORMAT));
        let labels = match self {
            BlockFile::Utxo(b) => {
                m.insert("platform".into(), json!("utxo"));
                m.insert("genesis".into(), b.genesis.iter().map(utxo_tx_to_json).collect());
                m.insert("transactions".into(), b.block.iter().map(utxo_tx_to_json).collect());
                &b.labels
            }
            BlockFile::Account(b) => {
                m.insert("platform".into(), json!("account"));
                m.insert("contracts".into(), b.contracts.iter().map(contract_to_json).collect());
                m.insert("genesis".into(), account_genesis_to_json(&b.genesis));
                m.insert("transactions".into(), b.block.iter().map(account_tx_to_json).collect());
                &b.labels
            }
        };
        if let Some(l) = labels {
            m.insert("labels".into(), json!(l));
        }
        J::Object(m)
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("JSON values always serialize")
    }

    pub fn len(&self) -> usize {
        match self {
            BlockFile::Utxo(b) => b.block.len(),
            BlockFile::Account(b) => b.block.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            BlockFile::Utxo(b) => b.labels(),
            BlockFile::Account(b) => b.labels(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::addr;
    use proptest::prelude::*;

    fn schema_path(r: Result<BlockFile>) -> String {
        match r {
            Err(Error::Schema { path, .. }) => path,
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn fixtures_round_trip() {
        for text in fixtures::ALL {
            let b = BlockFile::parse(text.1).unwrap();
            let again = BlockFile::parse(&b.to_string_pretty()).unwrap();
            assert_eq!(b, again, "{}", text.0);
        }
    }

    #[test]
    fn positional_errors() {
        let bad = r#"{"format":"txpar-block/1","platform":"account","transactions":[
            {"sender":"A","target":"B","function":"skip"},
            {"sender":"A","target":"B","function":"skip","args":[null]}]}"#;
        assert_eq!(schema_path(BlockFile::parse(bad)), "$.transactions[1].args[0]");
        let bad = r#"{"format":"txpar-block/1","platform":"account","contracts":[
            {"address":"c","functions":{"f":{"body":["seq","skip",["frob"]]}}}],"transactions":[]}"#;
        assert_eq!(schema_path(BlockFile::parse(bad)), "$.contracts[0].functions.f.body[2][0]");
        let bad = r#"{"format":"txpar-block/2","platform":"utxo","transactions":[]}"#;
        assert_eq!(schema_path(BlockFile::parse(bad)), "$.format");
        let bad = r#"{"format":"txpar-block/1","platform":"utxo","transactions":[{"id":"T 1"}]}"#;
        assert_eq!(schema_path(BlockFile::parse(bad)), "$.transactions[0].id");
        assert_eq!(schema_path(BlockFile::parse("{")), "$");
        let bad = r#"{"format":"txpar-block/1","platform":"utxo","transactions":[],"labels":["x"]}"#;
        assert_eq!(schema_path(BlockFile::parse(bad)), "$.labels");
    }

    #[test]
    fn empty_block() {
        let b = BlockFile::parse(r#"{"format":"txpar-block/1","platform":"account","transactions":[]}"#).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn state_dump_is_sorted() {
        let s: BlockchainState = [
            (Observable::balance_of(addr("B")), Value::Int(1)),
            (Observable::balance_of(addr("A")), Value::Addr(addr("C"))),
        ]
        .into_iter()
        .collect();
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"[{"observable":{"address":"A","key":"balance"},"value":{"addr":"C"}},{"observable":{"address":"B","key":"balance"},"value":1}]"#
        );
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            any::<bool>().prop_map(Value::Bool),
            "[A-Z][a-z0-9]{0,3}".prop_map(|s| Value::Addr(addr(&s))),
            "[a-z ]{0,4}".prop_map(Value::Str),
        ]
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            arb_value().prop_map(Expr::Const),
            "[a-z]{1,3}".prop_map(Expr::Name),
        ];
        leaf.prop_recursive(3, 16, 3, |e| {
            prop_oneof![
                (0..7usize, e.clone(), e.clone()).prop_map(|(i, a, b)| Expr::bin(BinOp::ALL[i], a, b)),
                e.clone().prop_map(Expr::negate),
                ("[a-z]{1,3}", prop::collection::vec(e, 0..3))
                    .prop_map(|(n, ix)| Expr::Get(KeyExpr::indexed(&n, ix))),
            ]
        })
    }

    fn arb_stmt() -> impl Strategy<Value = Stmt> {
        let leaf = prop_oneof![
            Just(Stmt::Skip),
            Just(Stmt::Throw),
            ("[a-z]{1,3}", arb_expr()).prop_map(|(k, e)| Stmt::assign(KeyExpr::plain(&k), e)),
            arb_expr().prop_map(Stmt::Require),
            (arb_expr(), arb_expr()).prop_map(|(a, b)| Stmt::Send(a, b)),
        ];
        leaf.prop_recursive(3, 16, 3, |s| {
            prop_oneof![
                prop::collection::vec(s.clone(), 0..3).prop_map(Stmt::Seq),
                (arb_expr(), s.clone(), s).prop_map(|(c, t, e)| Stmt::if_else(c, t, e)),
            ]
        })
    }

    fn arb_script() -> impl Strategy<Value = Script> {
        let sv = prop_oneof![
            any::<i64>().prop_map(ScriptValue::Int),
            prop::collection::vec(any::<u8>(), 0..4).prop_map(ScriptValue::Bytes),
            "[A-Z]{1,2}".prop_map(|k| ScriptValue::sig(&k, crate::model::txid("T1"))),
        ];
        let leaf = prop_oneof![
            Just(Script::Wit),
            sv.clone().prop_map(Script::Const),
            prop::collection::vec(sv, 0..3).prop_map(|v| Script::Const(ScriptValue::Seq(v))),
        ];
        leaf.prop_recursive(3, 16, 3, |s| {
            let b = |x: Script| Box::new(x);
            prop_oneof![
                (0..4usize, s.clone(), s.clone()).prop_map(|(i, a, c)| {
                    Script::bin([ScriptOp::Add, ScriptOp::Sub, ScriptOp::Eq, ScriptOp::Lt][i], a, c)
                }),
                (s.clone(), s.clone(), s.clone()).prop_map(move |(c, x, y)| Script::If(b(c), b(x), b(y))),
                (s.clone(), 1..4usize).prop_map(|(e, n)| Script::At(Box::new(e), n)),
                s.clone().prop_map(|e| Script::Hash(Box::new(e))),
                (s.clone(), s).prop_map(|(k, e)| Script::Versig(Box::new(k), Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn expr_round_trip(e in arb_expr()) {
            prop_assert_eq!(expr_from_json(&expr_to_json(&e), "$").unwrap(), e);
        }

        #[test]
        fn stmt_round_trip(s in arb_stmt()) {
            prop_assert_eq!(stmt_from_json(&stmt_to_json(&s), "$").unwrap(), s);
        }

        #[test]
        fn script_round_trip(s in arb_script()) {
            prop_assert_eq!(script_from_json(&script_to_json(&s), "$").unwrap(), s);
        }

        #[test]
        fn generated_blocks_round_trip(seed in any::<u64>()) {
            for b in [crate::gen::utxo_block(seed, 12), crate::gen::account_block(seed, 12)] {
                let text = b.to_string_pretty();
                prop_assert_eq!(BlockFile::parse(&text).unwrap(), b);
            }
        }
    }
}
