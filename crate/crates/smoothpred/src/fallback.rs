//! Dynamic ordered-set fallbacks.
//!
//! The engine keeps two of these: one over bucket indices that currently hold
//! at least one key, one over keys that spilled out of a full bucket. Both
//! stay small under smooth inputs, so a balanced-tree set with logarithmic
//! worst-case operations is plenty; the trait keeps the engine decoupled from
//! that choice.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetError {
    #[error("element {0} is already present")]
    Duplicate(u64),
    #[error("element {0} is absent")]
    Absent(u64),
}

/// Ordered dynamic set over `u64` with predecessor queries.
pub trait DynPredSet {
    fn insert(&mut self, x: u64) -> Result<(), SetError>;
    fn delete(&mut self, x: u64) -> Result<(), SetError>;
    fn member(&self, x: u64) -> bool;
    /// Largest stored element `<= x`.
    fn pred(&self, x: u64) -> Option<u64>;
    /// Largest stored element in `lo..=x`.
    fn pred_at_least(&self, x: u64, lo: u64) -> Option<u64>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Balanced ordered set; logarithmic worst case for every operation.
#[derive(Debug, Clone, Default)]
pub struct TreeSet {
    inner: BTreeSet<u64>,
}

impl TreeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stored keys in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.inner.iter().copied()
    }

    /// Stored keys in `[lo, hi]`, ascending.
    pub fn range_inclusive(&self, lo: u64, hi: u64) -> impl Iterator<Item = u64> + '_ {
        self.inner.range(lo..=hi).copied()
    }
}

impl DynPredSet for TreeSet {
    fn insert(&mut self, x: u64) -> Result<(), SetError> {
        if self.inner.insert(x) {
            Ok(())
        } else {
            Err(SetError::Duplicate(x))
        }
    }

    fn delete(&mut self, x: u64) -> Result<(), SetError> {
        if self.inner.remove(&x) {
            Ok(())
        } else {
            Err(SetError::Absent(x))
        }
    }

    fn member(&self, x: u64) -> bool {
        self.inner.contains(&x)
    }

    fn pred(&self, x: u64) -> Option<u64> {
        self.inner.range(..=x).next_back().copied()
    }

    fn pred_at_least(&self, x: u64, lo: u64) -> Option<u64> {
        if lo > x {
            return None;
        }
        self.inner.range(lo..=x).next_back().copied()
    }

    fn len(&self) -> usize {
        self.inner.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::OracleSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bucket_index_set_usage() {
        // The shape the engine uses for non-empty bucket tracking.
        let mut b1 = TreeSet::new();
        for i in [0u64, 3, 7, 20] {
            b1.insert(i).unwrap();
        }
        assert_eq!(b1.pred(7), Some(7));
        assert_eq!(b1.pred(6), Some(3));
        assert_eq!(b1.pred(19), Some(7));
        assert_eq!(b1.pred(u64::MAX), Some(20));
        b1.delete(0).unwrap();
        assert_eq!(b1.pred(2), None);
    }

    #[test]
    fn duplicate_and_absent_errors() {
        let mut s = TreeSet::new();
        s.insert(9).unwrap();
        assert_eq!(s.insert(9).unwrap_err(), SetError::Duplicate(9));
        assert_eq!(s.delete(8).unwrap_err(), SetError::Absent(8));
        s.delete(9).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn pred_at_least_respects_floor() {
        let mut s = TreeSet::new();
        for x in [10u64, 20, 30] {
            s.insert(x).unwrap();
        }
        assert_eq!(s.pred_at_least(25, 15), Some(20));
        assert_eq!(s.pred_at_least(25, 21), None);
        assert_eq!(s.pred_at_least(10, 10), Some(10));
        assert_eq!(s.pred_at_least(9, 10), None);
        assert_eq!(s.pred_at_least(5, 20), None); // lo > x
    }

    #[test]
    fn matches_oracle_on_100k_random_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut tree = TreeSet::new();
        let mut oracle = OracleSet::new();
        for step in 0..100_000u32 {
            let x = rng.gen_range(0u64..2048);
            match rng.gen_range(0u8..5) {
                0 | 1 => {
                    assert_eq!(
                        tree.insert(x).is_ok(),
                        oracle.insert(x).is_ok(),
                        "insert {x} at step {step}"
                    );
                }
                2 => {
                    assert_eq!(tree.delete(x).is_ok(), oracle.delete(x).is_ok());
                }
                3 => {
                    assert_eq!(tree.member(x), oracle.member(x));
                }
                _ => {
                    assert_eq!(tree.pred(x), oracle.pred(x));
                    let lo = rng.gen_range(0u64..2048);
                    let want = oracle.pred(x).filter(|&p| p >= lo);
                    assert_eq!(tree.pred_at_least(x, lo), want);
                }
            }
            assert_eq!(tree.len(), oracle.len());
        }
    }
}
