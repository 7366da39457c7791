//! Static swappability analysis and deterministic parallel execution of
//! transaction blocks.
//!
//! A block is analysed for read/write sets, turned into a strong
//! swappability relation, compiled into an occurrence net and executed one
//! maximal step at a time. Every step runs its transactions against the same
//! snapshot and merges their least updates; the final state always equals
//! the serial execution of the block.
//!
//! Two platforms are provided: a UTXO model with a small script language
//! ([`utxo`]) and an account model with contracts written in a statement
//! mini-language ([`account`]).

pub mod account;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod format;
pub mod gen;
pub mod model;
pub mod net;
mod par;
#[cfg(test)]
mod testutil;
pub mod swap;
pub mod utxo;

pub use error::{Error, Result};
pub use model::{
    addr, apply_update, exec_serial, obs_equiv, state_diff, txid, Address, BlockchainState, Key,
    Observable, Platform, StateUpdate, TxId, Value,
};
