use std::collections::BTreeSet;
use std::fmt;

use crate::model::{Address, Observable};

/// One element of a read or write approximation.
///
/// Besides concrete observables, an analysis may emit symbolic elements that
/// stand for a whole family of observables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Access {
    Obs(Observable),
    /// Every indexed key `name[..]` of `address`.
    AnyIndex { address: Address, name: String },
    /// The balance of every address.
    AnyBalance,
    /// Every observable.
    All,
}

impl Access {
    /// Whether the families denoted by `self` and `other` intersect.
    pub fn overlaps(&self, other: &Access) -> bool {
        use Access::*;
        match (self, other) {
            (All, _) | (_, All) => true,
            (Obs(a), Obs(b)) => a == b,
            (AnyBalance, AnyBalance) => true,
            (AnyBalance, Obs(o)) | (Obs(o), AnyBalance) => is_balance(o),
            (AnyBalance, AnyIndex { .. }) | (AnyIndex { .. }, AnyBalance) => false,
            (
                AnyIndex { address, name },
                AnyIndex {
                    address: a2,
                    name: n2,
                },
            ) => address == a2 && name == n2,
            (AnyIndex { address, name }, Obs(o)) | (Obs(o), AnyIndex { address, name }) => {
                in_mapping(o, address, name)
            }
        }
    }

    /// Whether the concrete observable `obs` belongs to this element.
    pub fn covers(&self, obs: &Observable) -> bool {
        match self {
            Access::Obs(o) => o == obs,
            Access::AnyIndex { address, name } => in_mapping(obs, address, name),
            Access::AnyBalance => is_balance(obs),
            Access::All => true,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        !matches!(self, Access::Obs(_))
    }
}

fn is_balance(o: &Observable) -> bool {
    matches!(o, Observable::Account { key, .. } if key.is_balance())
}

fn in_mapping(o: &Observable, address: &Address, name: &str) -> bool {
    matches!(o, Observable::Account { address: a, key }
        if a == address && key.name == name && !key.indices.is_empty())
}

impl fmt::Display for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Access::Obs(o) => write!(f, "{o}"),
            Access::AnyIndex { address, name } => write!(f, "{address}.{name}[*]"),
            Access::AnyBalance => f.write_str("*.balance"),
            Access::All => f.write_str("*"),
        }
    }
}

impl fmt::Debug for Access {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<Observable> for Access {
    fn from(o: Observable) -> Self {
        Access::Obs(o)
    }
}

/// A finite set of [`Access`] elements in canonical order.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct AccessSet(BTreeSet<Access>);

impl AccessSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        [Access::All].into_iter().collect()
    }

    pub fn insert(&mut self, a: impl Into<Access>) {
        self.0.insert(a.into());
    }

    pub fn remove(&mut self, a: &Access) -> bool {
        self.0.remove(a)
    }

    pub fn contains(&self, a: &Access) -> bool {
        self.0.contains(a)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Access> {
        self.0.iter()
    }

    pub fn extend(&mut self, other: &AccessSet) {
        self.0.extend(other.0.iter().cloned());
    }

    pub fn union(&self, other: &AccessSet) -> AccessSet {
        let mut u = self.clone();
        u.extend(other);
        u
    }

    /// Intersection test that honours symbolic elements.
    pub fn overlaps(&self, other: &AccessSet) -> bool {
        self.0.iter().any(|a| other.0.iter().any(|b| a.overlaps(b)))
    }

    pub fn covers(&self, obs: &Observable) -> bool {
        self.0.iter().any(|a| a.covers(obs))
    }

    /// The concrete observables of the set, if it has no symbolic element.
    pub fn concrete(&self) -> Option<BTreeSet<Observable>> {
        self.0
            .iter()
            .map(|a| match a {
                Access::Obs(o) => Some(o.clone()),
                _ => None,
            })
            .collect()
    }
}

impl<A: Into<Access>> FromIterator<A> for AccessSet {
    fn from_iter<I: IntoIterator<Item = A>>(iter: I) -> Self {
        AccessSet(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for AccessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for AccessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Read and write approximations of one transaction.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct RwSets {
    pub reads: AccessSet,
    pub writes: AccessSet,
}

impl RwSets {
    pub fn new(reads: AccessSet, writes: AccessSet) -> Self {
        RwSets { reads, writes }
    }

    /// The trivially safe pair.
    pub fn top() -> Self {
        RwSets::new(AccessSet::all(), AccessSet::all())
    }
}

/// Result of analysing one transaction. `flagged` marks a fallback to the
/// trivially safe pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    pub sets: RwSets,
    pub flagged: bool,
}

impl Analysis {
    pub fn exact(sets: RwSets) -> Self {
        Analysis {
            sets,
            flagged: false,
        }
    }

    pub fn fallback() -> Self {
        Analysis {
            sets: RwSets::top(),
            flagged: true,
        }
    }
}

/// Per-transaction read/write analysis provider.
pub trait RwAnalysis<Tx>: Sync {
    fn analyze(&self, tx: &Tx) -> Analysis;
}

impl<Tx, F> RwAnalysis<Tx> for F
where
    F: Fn(&Tx) -> Analysis + Sync,
{
    fn analyze(&self, tx: &Tx) -> Analysis {
        self(tx)
    }
}
