use std::collections::BTreeMap;

use crate::model::{apply_update, Address, BlockchainState, Key, Observable, StateUpdate, Value};

use super::lang::{BinOp, Expr, KeyExpr, Stmt};

/// Abnormal termination: throw, failed require, overflow, type error or an
/// impossible transfer. Callers treat it as transaction invalidity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Failure;

pub type Env = BTreeMap<String, Value>;

/// A state seen through the writes performed so far.
pub(crate) struct Overlay<'a> {
    base: &'a BlockchainState,
    writes: BTreeMap<Observable, Value>,
}

impl<'a> Overlay<'a> {
    pub(crate) fn new(base: &'a BlockchainState) -> Self {
        Overlay {
            base,
            writes: BTreeMap::new(),
        }
    }

    pub(crate) fn get(&self, o: &Observable) -> Option<&Value> {
        self.writes.get(o).or_else(|| self.base.get(o))
    }

    pub(crate) fn set(&mut self, o: Observable, v: Value) {
        self.writes.insert(o, v);
    }

    pub(crate) fn into_update(self) -> StateUpdate {
        self.writes.into_iter().collect()
    }

    fn balance(&self, a: &Address) -> Option<i64> {
        match self.get(&Observable::balance_of(a.clone())) {
            Some(Value::Int(n)) => Some(*n),
            _ => None,
        }
    }

    /// Move `amount` from `from` to `to`; both balances must be bound.
    pub(crate) fn transfer(&mut self, from: &Address, to: &Address, amount: i64) -> Result<(), Failure> {
        if amount < 0 {
            return Err(Failure);
        }
        let have = self.balance(from).ok_or(Failure)?;
        self.balance(to).ok_or(Failure)?;
        if have < amount {
            return Err(Failure);
        }
        self.set(Observable::balance_of(from.clone()), Value::Int(have - amount));
        let after = self.balance(to).ok_or(Failure)?;
        let credited = after.checked_add(amount).ok_or(Failure)?;
        self.set(Observable::balance_of(to.clone()), Value::Int(credited));
        Ok(())
    }
}

pub(crate) fn truthy(v: &Value) -> Result<bool, Failure> {
    match v {
        Value::Int(n) => Ok(*n != 0),
        Value::Bool(b) => Ok(*b),
        _ => Err(Failure),
    }
}

/// Structural equality, except that booleans compare equal to 0/1.
pub(crate) fn loose_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Bool(x), Value::Int(n)) | (Value::Int(n), Value::Bool(x)) => i64::from(*x) == *n,
        _ => a == b,
    }
}

pub(crate) fn apply_binop(op: BinOp, a: &Value, b: &Value) -> Result<Value, Failure> {
    let ints = || match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok((*x, *y)),
        _ => Err(Failure),
    };
    Ok(match op {
        BinOp::Add => {
            let (x, y) = ints()?;
            Value::Int(x.checked_add(y).ok_or(Failure)?)
        }
        BinOp::Sub => {
            let (x, y) = ints()?;
            Value::Int(x.checked_sub(y).ok_or(Failure)?)
        }
        BinOp::Lt => {
            let (x, y) = ints()?;
            Value::Bool(x < y)
        }
        BinOp::Eq => Value::Bool(loose_eq(a, b)),
        BinOp::Ne => Value::Bool(!loose_eq(a, b)),
        BinOp::And => Value::Bool(truthy(a)? & truthy(b)?),
        BinOp::Or => Value::Bool(truthy(a)? | truthy(b)?),
    })
}

struct Frame<'e> {
    env: &'e Env,
    this: &'e Address,
}

impl Frame<'_> {
    fn key(&self, ov: &Overlay, k: &KeyExpr) -> Result<Observable, Failure> {
        let indices = k
            .indices
            .iter()
            .map(|e| self.expr(ov, e))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Observable::account(
            self.this.clone(),
            Key::indexed(k.name.clone(), indices),
        ))
    }

    fn expr(&self, ov: &Overlay, e: &Expr) -> Result<Value, Failure> {
        match e {
            Expr::Const(v) => Ok(v.clone()),
            Expr::Name(n) => self.env.get(n).cloned().ok_or(Failure),
            // unbound keys read as zero, like mapping defaults
            Expr::Get(k) => Ok(ov.get(&self.key(ov, k)?).cloned().unwrap_or(Value::Int(0))),
            // both operands are always evaluated
            Expr::Bin(op, a, b) => {
                let a = self.expr(ov, a)?;
                let b = self.expr(ov, b)?;
                apply_binop(*op, &a, &b)
            }
            Expr::Not(a) => Ok(Value::Bool(!truthy(&self.expr(ov, a)?)?)),
        }
    }

    fn stmt(&self, ov: &mut Overlay, s: &Stmt) -> Result<(), Failure> {
        match s {
            Stmt::Skip => Ok(()),
            Stmt::Assign(k, e) => {
                let o = self.key(ov, k)?;
                let v = self.expr(ov, e)?;
                ov.set(o, v);
                Ok(())
            }
            Stmt::Seq(v) => v.iter().try_for_each(|s| self.stmt(ov, s)),
            Stmt::If(c, t, e) => {
                if truthy(&self.expr(ov, c)?)? {
                    self.stmt(ov, t)
                } else {
                    self.stmt(ov, e)
                }
            }
            Stmt::Require(c) => {
                if truthy(&self.expr(ov, c)?)? {
                    Ok(())
                } else {
                    Err(Failure)
                }
            }
            Stmt::Throw => Err(Failure),
            Stmt::Send(amount, to) => {
                let Value::Int(n) = self.expr(ov, amount)? else {
                    return Err(Failure);
                };
                let Value::Addr(to) = self.expr(ov, to)? else {
                    return Err(Failure);
                };
                ov.transfer(self.this, &to, n)
            }
        }
    }
}

pub(crate) fn run_stmt(stmt: &Stmt, ov: &mut Overlay, env: &Env, this: &Address) -> Result<(), Failure> {
    Frame { env, this }.stmt(ov, stmt)
}

/// Execute `stmt` as contract `this` in `state` under `env`.
pub fn eval_stmt(
    stmt: &Stmt,
    state: &BlockchainState,
    env: &Env,
    this: &Address,
) -> Result<BlockchainState, Failure> {
    let mut ov = Overlay::new(state);
    run_stmt(stmt, &mut ov, env, this)?;
    Ok(apply_update(state, &ov.into_update()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::addr;

    fn bal(a: &str) -> Observable {
        Observable::balance_of(addr(a))
    }

    fn env(pairs: &[(&str, Value)]) -> Env {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn s0() -> BlockchainState {
        [
            (bal("A"), Value::Int(2)),
            (bal("B"), Value::Int(0)),
            (bal("cA"), Value::Int(0)),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn assignment_sets_key() {
        let x = Observable::account(addr("cA"), Key::plain("x"));
        let r = eval_stmt(
            &Stmt::assign(KeyExpr::plain("x"), Expr::int(1)),
            &s0(),
            &env(&[("sender", Value::Addr(addr("A"))), ("value", Value::Int(0))]),
            &addr("cA"),
        )
        .unwrap();
        assert_eq!(r, s0().with(x, Value::Int(1)));
    }

    #[test]
    fn throw_fails() {
        assert_eq!(eval_stmt(&Stmt::Throw, &s0(), &Env::new(), &addr("cA")), Err(Failure));
    }

    #[test]
    fn send_moves_balance() {
        // state after A paid 1 to cA
        let s = s0().with(bal("A"), Value::Int(1)).with(bal("cA"), Value::Int(1));
        let r = eval_stmt(
            &Stmt::Send(Expr::name("value"), Expr::name("y")),
            &s,
            &env(&[
                ("y", Value::Addr(addr("B"))),
                ("sender", Value::Addr(addr("A"))),
                ("value", Value::Int(1)),
            ]),
            &addr("cA"),
        )
        .unwrap();
        let expected = s0().with(bal("A"), Value::Int(1)).with(bal("B"), Value::Int(1));
        assert_eq!(r, expected);
    }

    #[test]
    fn send_failures() {
        let e = env(&[("y", Value::Addr(addr("Nobody")))]);
        let too_much = Stmt::Send(Expr::int(1), Expr::Const(Value::Addr(addr("B"))));
        assert_eq!(eval_stmt(&too_much, &s0(), &e, &addr("cA")), Err(Failure));
        let s = s0().with(bal("cA"), Value::Int(5));
        let unknown = Stmt::Send(Expr::int(1), Expr::name("y"));
        assert_eq!(eval_stmt(&unknown, &s, &e, &addr("cA")), Err(Failure));
        let negative = Stmt::Send(Expr::int(-1), Expr::Const(Value::Addr(addr("B"))));
        assert_eq!(eval_stmt(&negative, &s, &e, &addr("cA")), Err(Failure));
        let to_self = Stmt::Send(Expr::int(2), Expr::Const(Value::Addr(addr("cA"))));
        assert_eq!(eval_stmt(&to_self, &s, &e, &addr("cA")), Ok(s));
    }

    #[test]
    fn expression_semantics() {
        let ov_state = s0();
        let ov = Overlay::new(&ov_state);
        let e = Env::new();
        let this = addr("cA");
        let f = Frame { env: &e, this: &this };
        let ev = |x: Expr| f.expr(&ov, &x);
        assert_eq!(ev(Expr::get("missing")), Ok(Value::Int(0)));
        assert_eq!(
            ev(Expr::bin(BinOp::Eq, Expr::Const(Value::Bool(true)), Expr::int(1))),
            Ok(Value::Bool(true))
        );
        assert_eq!(ev(Expr::bin(BinOp::Add, Expr::int(i64::MAX), Expr::int(1))), Err(Failure));
        assert_eq!(
            ev(Expr::bin(BinOp::Add, Expr::int(1), Expr::Const(Value::Bool(true)))),
            Err(Failure)
        );
        assert_eq!(
            ev(Expr::bin(BinOp::Ne, Expr::get("k"), Expr::Const(Value::Addr(addr("A"))))),
            Ok(Value::Bool(true))
        );
        assert_eq!(ev(Expr::negate(Expr::int(0))), Ok(Value::Bool(true)));
        assert_eq!(ev(Expr::name("nope")), Err(Failure));
    }
}
