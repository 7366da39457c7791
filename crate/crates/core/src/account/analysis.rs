//! Read/write analysis by abstract interpretation of the called function
//! with the concrete arguments of the transaction.
//!
//! Expressions built from constants, `sender`, `value` and parameters are
//! folded; key lookups have unknown results. Both branches of a conditional
//! and both operands of every operator are visited. An index that does not
//! fold widens the access to the whole mapping.

use crate::model::{Address, Key, Observable, Value};
use crate::swap::{Access, AccessSet, Analysis, RwSets};

use super::eval::{apply_binop, truthy, Env};
use super::lang::{Expr, KeyExpr, Stmt};
use super::{AccountPlatform, AccountTransaction};

struct Collector<'a> {
    env: &'a Env,
    this: &'a Address,
    reads: AccessSet,
    writes: AccessSet,
}

impl Collector<'_> {
    fn key(&mut self, k: &KeyExpr) -> Access {
        let indices: Option<Vec<Value>> = k.indices.iter().map(|e| self.expr(e)).collect();
        match indices {
            Some(ix) => Access::Obs(Observable::account(
                self.this.clone(),
                Key::indexed(k.name.clone(), ix),
            )),
            None => Access::AnyIndex {
                address: self.this.clone(),
                name: k.name.clone(),
            },
        }
    }

    /// The folded value, or `None` when it depends on the state.
    fn expr(&mut self, e: &Expr) -> Option<Value> {
        match e {
            Expr::Const(v) => Some(v.clone()),
            Expr::Name(n) => self.env.get(n).cloned(),
            Expr::Get(k) => {
                let a = self.key(k);
                self.reads.insert(a);
                None
            }
            Expr::Bin(op, a, b) => {
                let a = self.expr(a);
                let b = self.expr(b);
                apply_binop(*op, &a?, &b?).ok()
            }
            Expr::Not(a) => Some(Value::Bool(!truthy(&self.expr(a)?).ok()?)),
        }
    }

    fn balance(&mut self, a: Access) {
        self.reads.insert(a.clone());
        self.writes.insert(a);
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Skip | Stmt::Throw => {}
            Stmt::Assign(k, e) => {
                let a = self.key(k);
                self.expr(e);
                self.writes.insert(a);
            }
            Stmt::Seq(v) => v.iter().for_each(|s| self.stmt(s)),
            Stmt::If(c, t, e) => {
                self.expr(c);
                self.stmt(t);
                self.stmt(e);
            }
            Stmt::Require(c) => {
                self.expr(c);
            }
            Stmt::Send(amount, to) => {
                self.expr(amount);
                let to = self.expr(to);
                self.balance(Access::Obs(Observable::balance_of(self.this.clone())));
                match to {
                    Some(Value::Addr(a)) => self.balance(Access::Obs(Observable::balance_of(a))),
                    // a non-address recipient always fails; nothing more to add
                    Some(_) => {}
                    None => self.balance(Access::AnyBalance),
                }
            }
        }
    }
}

/// Safe read/write approximations of `tx`. Calls that cannot resolve to a
/// function fall back to the flagged trivial pair.
pub fn analyze_rw(platform: &AccountPlatform, tx: &AccountTransaction) -> Analysis {
    let Some(f) = platform.resolve(tx) else {
        return Analysis::fallback();
    };
    let env = AccountPlatform::env(tx, f);
    let mut c = Collector {
        env: &env,
        this: &tx.target,
        reads: AccessSet::new(),
        writes: AccessSet::new(),
    };
    if tx.value > 0 {
        c.balance(Access::Obs(Observable::balance_of(tx.sender.clone())));
        c.balance(Access::Obs(Observable::balance_of(tx.target.clone())));
    }
    c.stmt(&f.body);
    Analysis::exact(RwSets::new(c.reads, c.writes))
}
