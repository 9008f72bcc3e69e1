use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// How a full scan over the stored vectors is executed.
/// Defaults to `Parallel` when the `parallel` feature is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// A scored id. `a > b` means `a` ranks ahead of `b`: higher score first,
/// then lower id.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub score: f64,
    pub id: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Bounded collector keeping the `k` best candidates.
#[derive(Debug, Clone)]
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Reverse<Candidate>>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k.min(1024) + 1),
        }
    }

    pub fn push(&mut self, candidate: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(candidate));
        } else if let Some(Reverse(worst)) = self.heap.peek() {
            if candidate > *worst {
                self.heap.pop();
                self.heap.push(Reverse(candidate));
            }
        }
    }

    #[cfg(any(feature = "parallel", test))]
    pub fn merge(mut self, other: TopK) -> TopK {
        for Reverse(c) in other.heap {
            self.push(c);
        }
        self
    }

    /// Best first.
    pub fn into_sorted(self) -> Vec<Candidate> {
        // `Reverse` flips the order, so ascending on `Reverse` is best first.
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }
}

/// Dot product of a unit query (f64) with a stored unit vector (f32),
/// accumulated in f64.
#[inline]
pub(crate) fn dot(query: &[f64], stored: &[f32]) -> f64 {
    query
        .iter()
        .zip(stored)
        .map(|(q, &s)| q * f64::from(s))
        .sum()
}

#[inline]
pub(crate) fn dot_stored(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}
