//! Reference predecessor set: a plain sorted vector with binary search.
//!
//! Deliberately the dumbest correct implementation, used as the ground truth
//! when replaying workloads against the engine. It shares no code with the
//! engine or with the tree-based fallback sets.

use thiserror::Error;

use crate::Key;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("key {0} is already present")]
    Duplicate(Key),
    #[error("key {0} is absent")]
    Absent(Key),
}

/// Sorted-vector set over `u64` keys.
#[derive(Debug, Clone, Default)]
pub struct OracleSet {
    keys: Vec<Key>,
}

impl OracleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from keys that are already sorted and distinct.
    pub fn from_sorted(keys: Vec<Key>) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] < w[1]));
        Self { keys }
    }

    pub fn insert(&mut self, key: Key) -> Result<(), OracleError> {
        match self.keys.binary_search(&key) {
            Ok(_) => Err(OracleError::Duplicate(key)),
            Err(pos) => {
                self.keys.insert(pos, key);
                Ok(())
            }
        }
    }

    pub fn delete(&mut self, key: Key) -> Result<(), OracleError> {
        match self.keys.binary_search(&key) {
            Ok(pos) => {
                self.keys.remove(pos);
                Ok(())
            }
            Err(_) => Err(OracleError::Absent(key)),
        }
    }

    pub fn member(&self, key: Key) -> bool {
        self.keys.binary_search(&key).is_ok()
    }

    /// Largest stored key `<= key`.
    pub fn pred(&self, key: Key) -> Option<Key> {
        let upto = self.keys.partition_point(|&k| k <= key);
        upto.checked_sub(1).map(|i| self.keys[i])
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    /// Key at `rank` in sorted order.
    pub fn key_at(&self, rank: usize) -> Option<Key> {
        self.keys.get(rank).copied()
    }
}
