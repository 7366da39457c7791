//! Platform-agnostic blockchain states, state updates and serial execution.
//!
//! A blockchain state is a finite partial map from observables to values. It
//! is stored behind an [`Arc`] so snapshots handed to parallel workers are
//! cheap; every operation returns a new state and leaves its inputs alone.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Error;

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

macro_rules! ident_newtype {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            /// Identifiers are non-empty and use `[A-Za-z0-9_-]` only.
            pub fn new(s: impl Into<String>) -> Result<Self, Error> {
                let s = s.into();
                if valid_ident(&s) {
                    Ok(Self(s))
                } else {
                    Err(Error::InvalidIdent { kind: $what, value: s })
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(s: String) -> Result<Self, Error> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(v: $name) -> String {
                v.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

ident_newtype!(
    /// User or contract address.
    Address,
    "address"
);
ident_newtype!(
    /// Opaque transaction identifier (UTXO platform).
    TxId,
    "transaction id"
);

/// Shorthand used throughout tests and fixtures. Panics on a malformed name.
pub fn addr(s: &str) -> Address {
    Address::new(s).expect("malformed address literal")
}

/// Shorthand for a transaction id literal. Panics on a malformed name.
pub fn txid(s: &str) -> TxId {
    TxId::new(s).expect("malformed transaction id literal")
}

/// Values stored in blockchain states.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Addr(Address),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Addr(a) => write!(f, "@{a}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Address> for Value {
    fn from(a: Address) -> Self {
        Value::Addr(a)
    }
}

/// A key of an account's key-value store: a base name plus zero or more
/// index values, e.g. `operatorApprovals[@A][@B]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key {
    pub name: String,
    pub indices: Vec<Value>,
}

/// Name of the ether balance key every address carries.
pub const BALANCE: &str = "balance";

impl Key {
    pub fn plain(name: impl Into<String>) -> Self {
        Key {
            name: name.into(),
            indices: Vec::new(),
        }
    }

    pub fn indexed(name: impl Into<String>, indices: Vec<Value>) -> Self {
        Key {
            name: name.into(),
            indices,
        }
    }

    pub fn balance() -> Self {
        Key::plain(BALANCE)
    }

    pub fn is_balance(&self) -> bool {
        self.name == BALANCE && self.indices.is_empty()
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for ix in &self.indices {
            write!(f, "[{ix}]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// An atomically readable/writable unit of state.
///
/// The derived order compares the platform tag first, then address or
/// transaction id, then key or output index.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Observable {
    /// Output `index` (1-based) of transaction `tx`.
    Output { tx: TxId, index: u32 },
    /// Key `key` in the store of `address`.
    Account { address: Address, key: Key },
}

impl Observable {
    pub fn output(tx: TxId, index: u32) -> Self {
        Observable::Output { tx, index }
    }

    pub fn account(address: Address, key: Key) -> Self {
        Observable::Account { address, key }
    }

    pub fn balance_of(address: Address) -> Self {
        Observable::Account {
            address,
            key: Key::balance(),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Output { tx, index } => write!(f, "({tx},{index})"),
            Observable::Account { address, key } => write!(f, "{address}.{key}"),
        }
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A finite partial map from observables to new values.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct StateUpdate {
    bindings: BTreeMap<Observable, Value>,
}

impl StateUpdate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, obs: Observable, value: Value) {
        self.bindings.insert(obs, value);
    }

    pub fn with(mut self, obs: Observable, value: Value) -> Self {
        self.bind(obs, value);
        self
    }

    pub fn get(&self, obs: &Observable) -> Option<&Value> {
        self.bindings.get(obs)
    }

    pub fn contains(&self, obs: &Observable) -> bool {
        self.bindings.contains_key(obs)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    /// Bindings in canonical observable order.
    pub fn iter(&self) -> impl Iterator<Item = (&Observable, &Value)> {
        self.bindings.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Observable> {
        self.bindings.keys()
    }

    pub(crate) fn into_map(self) -> BTreeMap<Observable, Value> {
        self.bindings
    }
}

impl FromIterator<(Observable, Value)> for StateUpdate {
    fn from_iter<I: IntoIterator<Item = (Observable, Value)>>(iter: I) -> Self {
        StateUpdate {
            bindings: iter.into_iter().collect(),
        }
    }
}

impl fmt::Debug for StateUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.bindings.iter()).finish()
    }
}

/// A blockchain state: a finite partial map from observables to values.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BlockchainState {
    bindings: Arc<BTreeMap<Observable, Value>>,
}

impl BlockchainState {
    pub fn new() -> Self {
        Self::default()
    }

    /// `None` is the distinguished "unbound" result.
    pub fn get(&self, obs: &Observable) -> Option<&Value> {
        self.bindings.get(obs)
    }

    pub fn is_bound(&self, obs: &Observable) -> bool {
        self.bindings.contains_key(obs)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    /// Bindings in canonical observable order.
    pub fn iter(&self) -> impl Iterator<Item = (&Observable, &Value)> {
        self.bindings.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Observable> {
        self.bindings.keys()
    }

    /// Returns a copy with one extra binding.
    pub fn with(&self, obs: Observable, value: Value) -> Self {
        let mut map = (*self.bindings).clone();
        map.insert(obs, value);
        BlockchainState {
            bindings: Arc::new(map),
        }
    }

    /// Returns a copy without a binding for `obs`.
    pub fn without(&self, obs: &Observable) -> Self {
        if !self.is_bound(obs) {
            return self.clone();
        }
        let mut map = (*self.bindings).clone();
        map.remove(obs);
        BlockchainState {
            bindings: Arc::new(map),
        }
    }
}

impl FromIterator<(Observable, Value)> for BlockchainState {
    fn from_iter<I: IntoIterator<Item = (Observable, Value)>>(iter: I) -> Self {
        BlockchainState {
            bindings: Arc::new(iter.into_iter().collect()),
        }
    }
}

impl fmt::Debug for BlockchainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.bindings.iter()).finish()
    }
}

/// A block: an ordered, possibly empty, sequence of transactions.
pub type Blockchain<T> = Vec<T>;

/// The state transition function of a blockchain platform.
///
/// `effect` returns an update whose application yields the successor state;
/// it may bind observables to their current value. Invalid transactions
/// produce an empty effect, which makes `apply` total.
pub trait Platform: Sync {
    type Tx: Clone + Send + Sync + fmt::Debug;

    fn effect(&self, state: &BlockchainState, tx: &Self::Tx) -> StateUpdate;

    fn initial_state(&self) -> BlockchainState;

    fn apply(&self, state: &BlockchainState, tx: &Self::Tx) -> BlockchainState {
        apply_update(state, &self.effect(state, tx))
    }
}

impl<P: Platform + ?Sized> Platform for &P {
    type Tx = P::Tx;

    fn effect(&self, state: &BlockchainState, tx: &Self::Tx) -> StateUpdate {
        (**self).effect(state, tx)
    }

    fn initial_state(&self) -> BlockchainState {
        (**self).initial_state()
    }

    fn apply(&self, state: &BlockchainState, tx: &Self::Tx) -> BlockchainState {
        (**self).apply(state, tx)
    }
}

/// Override `state` with the bindings of `update`.
pub fn apply_update(state: &BlockchainState, update: &StateUpdate) -> BlockchainState {
    if update.is_empty() {
        return state.clone();
    }
    let mut map = (*state.bindings).clone();
    for (obs, v) in update.iter() {
        map.insert(obs.clone(), v.clone());
    }
    BlockchainState {
        bindings: Arc::new(map),
    }
}

/// Left fold of the platform transition function over `block`.
pub fn exec_serial<P: Platform>(
    block: &[P::Tx],
    state: &BlockchainState,
    platform: &P,
) -> BlockchainState {
    block
        .iter()
        .fold(state.clone(), |st, tx| platform.apply(&st, tx))
}

/// `s1 ~_q s2`: both states agree on every observable of `q`. Unbound is
/// equal only to unbound.
pub fn obs_equiv<'a>(
    s1: &BlockchainState,
    s2: &BlockchainState,
    q: impl IntoIterator<Item = &'a Observable>,
) -> bool {
    q.into_iter().all(|a| s1.get(a) == s2.get(a))
}

/// The update binding exactly the observables whose value differs between
/// `before` and `after`, to their value in `after`.
///
/// Observables bound in `before` but unbound in `after` cannot be expressed
/// by an update and are skipped; no platform transition unbinds anything.
pub fn state_diff(after: &BlockchainState, before: &BlockchainState) -> StateUpdate {
    after
        .iter()
        .filter(|(a, v)| before.get(a) != Some(*v))
        .map(|(a, v)| (a.clone(), v.clone()))
        .collect()
}
