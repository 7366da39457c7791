use std::fmt;

use crate::model::TxId;

use super::UtxoTransaction;

/// Values manipulated by scripts and carried by witnesses.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScriptValue {
    Int(i64),
    Bytes(Vec<u8>),
    /// Symbolic signature of `key` over transaction `tx` (witnesses excluded).
    Sig { key: String, tx: TxId },
    Seq(Vec<ScriptValue>),
}

impl ScriptValue {
    pub fn text(s: &str) -> Self {
        ScriptValue::Bytes(s.as_bytes().to_vec())
    }

    pub fn sig(key: &str, tx: TxId) -> Self {
        ScriptValue::Sig {
            key: key.to_string(),
            tx,
        }
    }

    /// A one-element sequence behaves as its element.
    fn scalar(self) -> ScriptValue {
        match self {
            ScriptValue::Seq(mut v) if v.len() == 1 => v.pop().unwrap().scalar(),
            v => v,
        }
    }

    pub fn is_true(&self) -> bool {
        *self != ScriptValue::Int(0)
    }

    /// Byte encoding fed to the hash function.
    pub fn encode(&self) -> Vec<u8> {
        match self {
            ScriptValue::Int(n) => n.to_string().into_bytes(),
            ScriptValue::Bytes(b) => b.clone(),
            ScriptValue::Sig { key, tx } => format!("sig({key},{tx})").into_bytes(),
            ScriptValue::Seq(v) => v.iter().flat_map(|x| x.encode()).collect(),
        }
    }
}

impl fmt::Debug for ScriptValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptValue::Int(n) => write!(f, "{n}"),
            ScriptValue::Bytes(b) => match std::str::from_utf8(b) {
                Ok(s) => write!(f, "{s:?}"),
                Err(_) => write!(f, "0x{}", hex::encode(b)),
            },
            ScriptValue::Sig { key, tx } => write!(f, "sig({key},{tx})"),
            ScriptValue::Seq(v) => f.debug_list().entries(v).finish(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScriptOp {
    Add,
    Sub,
    Eq,
    Lt,
}

impl ScriptOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ScriptOp::Add => "+",
            ScriptOp::Sub => "-",
            ScriptOp::Eq => "=",
            ScriptOp::Lt => "<",
        }
    }
}

/// Output scripts. The grammar has no loops, so evaluation always terminates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Script {
    Const(ScriptValue),
    /// `rtx.wit`: the witness of the redeeming input.
    Wit,
    Bin(ScriptOp, Box<Script>, Box<Script>),
    If(Box<Script>, Box<Script>, Box<Script>),
    /// `e at n`, 1-based.
    At(Box<Script>, usize),
    Size(Box<Script>),
    Hash(Box<Script>),
    /// `versig(key, sig)`.
    Versig(Box<Script>, Box<Script>),
}

impl Script {
    pub fn int(n: i64) -> Self {
        Script::Const(ScriptValue::Int(n))
    }

    pub fn bin(op: ScriptOp, a: Script, b: Script) -> Self {
        Script::Bin(op, Box::new(a), Box::new(b))
    }

    /// `versig(key, rtx.wit)`.
    pub fn versig_wit(key: &str) -> Self {
        Script::Versig(
            Box::new(Script::Const(ScriptValue::text(key))),
            Box::new(Script::Wit),
        )
    }

    /// `hash(rtx.wit) = n`.
    pub fn hash_lock(n: i64) -> Self {
        Script::bin(
            ScriptOp::Eq,
            Script::Hash(Box::new(Script::Wit)),
            Script::int(n),
        )
    }
}

/// Hash function used by `hash(e)`.
pub type Hasher = fn(&[u8]) -> i64;

/// Default hash: the sum of the bytes. Preimages of small numbers are easy
/// to find, e.g. the single byte `51` (`"3"`) hashes to 51.
pub fn byte_sum_hash(bytes: &[u8]) -> i64 {
    bytes.iter().map(|&b| i64::from(b)).sum()
}

const FALSE: ScriptValue = ScriptValue::Int(0);

fn flag(b: bool) -> ScriptValue {
    ScriptValue::Int(i64::from(b))
}

/// Evaluate `script` for input `index` (0-based) of the redeeming transaction
/// `rtx`. Type mismatches, overflow and out-of-range accesses produce 0.
pub fn eval_script(script: &Script, rtx: &UtxoTransaction, index: usize, hasher: Hasher) -> ScriptValue {
    let ev = |s: &Script| eval_script(s, rtx, index, hasher);
    match script {
        Script::Const(v) => v.clone().scalar(),
        Script::Wit => match rtx.witnesses.get(index) {
            Some(w) => ScriptValue::Seq(w.clone()).scalar(),
            None => FALSE,
        },
        Script::Bin(op, a, b) => {
            let (a, b) = (ev(a), ev(b));
            match (op, &a, &b) {
                (ScriptOp::Eq, _, _) => flag(a == b),
                (ScriptOp::Add, ScriptValue::Int(x), ScriptValue::Int(y)) => {
                    x.checked_add(*y).map_or(FALSE, ScriptValue::Int)
                }
                (ScriptOp::Sub, ScriptValue::Int(x), ScriptValue::Int(y)) => {
                    x.checked_sub(*y).map_or(FALSE, ScriptValue::Int)
                }
                (ScriptOp::Lt, ScriptValue::Int(x), ScriptValue::Int(y)) => flag(x < y),
                _ => FALSE,
            }
        }
        Script::If(c, t, e) => {
            if ev(c).is_true() {
                ev(t)
            } else {
                ev(e)
            }
        }
        Script::At(e, n) => match ev(e) {
            ScriptValue::Seq(v) if *n >= 1 => v.get(n - 1).cloned().map_or(FALSE, |x| x.scalar()),
            // a scalar is a one-element sequence
            v if *n == 1 && !matches!(v, ScriptValue::Seq(_)) => v,
            _ => FALSE,
        },
        Script::Size(e) => match ev(e) {
            ScriptValue::Bytes(b) => ScriptValue::Int(b.len() as i64),
            ScriptValue::Seq(v) => ScriptValue::Int(v.len() as i64),
            _ => FALSE,
        },
        Script::Hash(e) => ScriptValue::Int(hasher(&ev(e).encode())),
        Script::Versig(k, s) => match (ev(k), ev(s)) {
            (ScriptValue::Bytes(key), ScriptValue::Sig { key: signer, tx }) => {
                flag(key == signer.as_bytes() && tx == rtx.id)
            }
            _ => FALSE,
        },
    }
}
