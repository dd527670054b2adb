//! Fixed-capacity sorted buckets.
//!
//! Each bucket owns a half-open key interval and stores at most `capacity`
//! keys in a sorted vector. Capacity is logarithmic in the calibration size,
//! so linear shifting inside the vector is cheap and cache-friendly. Keys
//! beyond capacity are the engine's problem (they go to the spill set); the
//! bucket itself simply reports `Full`.

use thiserror::Error;

use crate::Key;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BucketError {
    #[error("key {0} is already present in its bucket")]
    Duplicate(Key),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// Bucket already holds `capacity` keys; nothing was stored.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteOutcome {
    Removed,
    Absent,
}

/// Sorted keys within the half-open interval `[lo, hi)`.
#[derive(Debug, Clone)]
pub struct Bucket {
    lo: Key,
    hi: Key,
    capacity: usize,
    keys: Vec<Key>,
}

impl Bucket {
    /// `lo < hi` and `capacity >= 1`; both are routing-table facts the engine
    /// fixes at calibration time, so violations are programming errors.
    pub fn new(lo: Key, hi: Key, capacity: usize) -> Self {
        assert!(lo < hi, "empty bucket interval [{lo}, {hi})");
        assert!(capacity >= 1, "bucket capacity must be positive");
        Self { lo, hi, capacity, keys: Vec::new() }
    }

    /// Inserts `key`, or reports `Full` without storing it. The engine routes
    /// keys by interval, so an out-of-interval key here is a routing bug.
    pub fn insert(&mut self, key: Key) -> Result<InsertOutcome, BucketError> {
        assert!(self.in_interval(key), "key {key} routed to bucket [{}, {})", self.lo, self.hi);
        match self.keys.binary_search(&key) {
            Ok(_) => Err(BucketError::Duplicate(key)),
            Err(_) if self.keys.len() >= self.capacity => Ok(InsertOutcome::Full),
            Err(pos) => {
                self.keys.insert(pos, key);
                Ok(InsertOutcome::Inserted)
            }
        }
    }

    pub fn delete(&mut self, key: Key) -> DeleteOutcome {
        match self.keys.binary_search(&key) {
            Ok(pos) => {
                self.keys.remove(pos);
                DeleteOutcome::Removed
            }
            Err(_) => DeleteOutcome::Absent,
        }
    }

    pub fn contains(&self, key: Key) -> bool {
        self.keys.binary_search(&key).is_ok()
    }

    /// Largest stored key `<= key` (callers may pass any key, not only keys
    /// inside the interval).
    pub fn pred(&self, key: Key) -> Option<Key> {
        let upto = self.keys.partition_point(|&k| k <= key);
        upto.checked_sub(1).map(|i| self.keys[i])
    }

    pub fn min(&self) -> Option<Key> {
        self.keys.first().copied()
    }

    pub fn max(&self) -> Option<Key> {
        self.keys.last().copied()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.keys.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn interval(&self) -> (Key, Key) {
        (self.lo, self.hi)
    }

    pub fn in_interval(&self, key: Key) -> bool {
        (self.lo..self.hi).contains(&key)
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }
}
