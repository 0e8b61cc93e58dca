//! Fixed-capacity experience replay with uniform sampling.

use rand::RngCore;
use thiserror::Error;

use crate::space::HybridAction;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot sample from an empty replay buffer")]
    Empty,
}

/// One stored interaction. Actions carry the executed head and the full
/// parameter vector exactly as executed; `next_mask` is the availability
/// mask that applied when `next_state` was observed.
#[derive(Clone, Debug)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: HybridAction,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub next_mask: Vec<bool>,
}

/// Ring buffer over arbitrary transition types. Once full, each push
/// overwrites the oldest entry.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    cursor: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity),
            capacity,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniformly samples `batch` item references: without replacement when
    /// the buffer holds at least `batch` items, with replacement otherwise.
    pub fn sample<'a, R: RngCore>(
        &'a self,
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<&'a T>, ReplayError> {
        if self.items.is_empty() {
            return Err(ReplayError::Empty);
        }
        let n = self.items.len();
        if n >= batch {
            Ok(rand::seq::index::sample(rng, n, batch)
                .into_iter()
                .map(|i| &self.items[i])
                .collect())
        } else {
            use rand::Rng;
            Ok((0..batch)
                .map(|_| &self.items[rng.random_range(0..n)])
                .collect())
        }
    }

    /// Stored items oldest first; used by tests to check ring semantics.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() == self.capacity {
            self.cursor
        } else {
            0
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }
}
