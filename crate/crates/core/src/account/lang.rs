use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Address, Value, BALANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 7] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.symbol() == s)
    }
}

/// A key expression `name[e1]..[en]` in the store of the executing contract.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeyExpr {
    pub name: String,
    pub indices: Vec<Expr>,
}

impl KeyExpr {
    pub fn plain(name: &str) -> Self {
        KeyExpr {
            name: name.to_string(),
            indices: vec![],
        }
    }

    pub fn indexed(name: &str, indices: Vec<Expr>) -> Self {
        KeyExpr {
            name: name.to_string(),
            indices,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Value),
    /// `sender`, `value` or a formal parameter.
    Name(String),
    Get(KeyExpr),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Self {
        Expr::Const(Value::Int(n))
    }

    pub fn name(n: &str) -> Self {
        Expr::Name(n.to_string())
    }

    pub fn get(name: &str) -> Self {
        Expr::Get(KeyExpr::plain(name))
    }

    pub fn get_at(name: &str, indices: Vec<Expr>) -> Self {
        Expr::Get(KeyExpr::indexed(name, indices))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn negate(e: Expr) -> Self {
        Expr::Not(Box::new(e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Skip,
    Assign(KeyExpr, Expr),
    Seq(Vec<Stmt>),
    If(Expr, Box<Stmt>, Box<Stmt>),
    Require(Expr),
    Throw,
    /// `send(amount, recipient)` from the executing contract.
    Send(Expr, Expr),
}

impl Stmt {
    pub fn assign(k: KeyExpr, e: Expr) -> Self {
        Stmt::Assign(k, e)
    }

    pub fn if_then(c: Expr, t: Stmt) -> Self {
        Stmt::If(c, Box::new(t), Box::new(Stmt::Skip))
    }

    pub fn if_else(c: Expr, t: Stmt, e: Stmt) -> Self {
        Stmt::If(c, Box::new(t), Box::new(e))
    }

    fn assigns_balance(&self) -> bool {
        match self {
            Stmt::Assign(k, _) => k.name == BALANCE && k.indices.is_empty(),
            Stmt::Seq(v) => v.iter().any(Stmt::assigns_balance),
            Stmt::If(_, t, e) => t.assigns_balance() || e.assigns_balance(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub params: Vec<String>,
    pub body: Stmt,
}

/// Name of the single function of user addresses.
pub const SKIP: &str = "skip";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contract {
    address: Address,
    functions: BTreeMap<String, Function>,
}

impl Contract {
    /// Rejects duplicate parameter names, parameters shadowing `sender` or
    /// `value`, and direct assignments to the ether balance (which only
    /// changes through transfers).
    pub fn new(address: Address, functions: BTreeMap<String, Function>) -> Result<Self> {
        let err = |message: String| Error::InvalidContract {
            contract: address.to_string(),
            message,
        };
        for (name, f) in &functions {
            let mut seen = std::collections::BTreeSet::new();
            for p in &f.params {
                if p == "sender" || p == "value" {
                    return Err(err(format!("function {name}: parameter {p:?} shadows a builtin")));
                }
                if !seen.insert(p) {
                    return Err(err(format!("function {name}: duplicate parameter {p:?}")));
                }
            }
            if f.body.assigns_balance() {
                return Err(err(format!(
                    "function {name}: assigning {BALANCE:?} directly is not allowed"
                )));
            }
        }
        Ok(Contract { address, functions })
    }

    pub fn address(&self) -> &Address {
        &self.address
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.get(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = (&String, &Function)> {
        self.functions.iter()
    }
}

/// A call `sender -value-> target.function(args)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AccountTransaction {
    pub sender: Address,
    pub target: Address,
    pub function: String,
    pub value: i64,
    pub args: Vec<Value>,
}

impl AccountTransaction {
    pub fn call(sender: Address, target: Address, function: &str, value: i64, args: Vec<Value>) -> Self {
        AccountTransaction {
            sender,
            target,
            function: function.to_string(),
            value,
            args,
        }
    }
}

impl fmt::Debug for AccountTransaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}.{}(", self.sender, self.value, self.target, self.function)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}
