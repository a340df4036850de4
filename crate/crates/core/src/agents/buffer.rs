//! Bounded FIFO replay memory with uniform sampling.

use rand::Rng as _;

use crate::env::Transition;
use crate::error::{Error, Result};
use crate::net::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    /// Slot the next push overwrites once the buffer is full.
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            storage: Vec::new(),
            next: 0,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Total pushes since creation, including evicted transitions.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, transition: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(transition);
        } else {
            self.storage[self.next] = transition;
            self.next = (self.next + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.next);
        older.iter().chain(newer.iter())
    }

    pub fn rewarded_count(&self) -> usize {
        self.storage.iter().filter(|t| t.rewarded()).count()
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Batch> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let len = self.storage.len();
        Ok((0..n)
            .map(|_| self.storage[rng.random_range(0..len)])
            .collect())
    }
}

/// A minibatch in structure-of-arrays form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub terminal: Vec<bool>,
    pub s_next: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        self.s.push(t.s);
        self.a.push(t.a);
        self.r.push(t.r);
        self.terminal.push(t.terminal);
        self.s_next.push(t.s_next);
    }

    pub fn rewarded_count(&self) -> usize {
        self.r.iter().filter(|&&r| r > 0.0).count()
    }

    /// Row-major `(s, a)` pairs, the critic's input layout.
    pub fn state_actions(&self) -> Vec<f64> {
        interleave(&self.s, &self.a)
    }
}

impl FromIterator<Transition> for Batch {
    fn from_iter<I: IntoIterator<Item = Transition>>(iter: I) -> Self {
        let mut batch = Batch::default();
        for t in iter {
            batch.push(t);
        }
        batch
    }
}

pub(crate) fn interleave(s: &[f64], a: &[f64]) -> Vec<f64> {
    s.iter().zip(a).flat_map(|(&s, &a)| [s, a]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{step, EnvKind};
    use crate::net::{SeedStreams, Stream};

    fn tr(s: f64) -> Transition {
        step(EnvKind::OneDToy, s, 0.1).unwrap()
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        for s in [0.1, 0.2, 0.3] {
            buf.push(tr(s));
        }
        let held: Vec<f64> = buf.iter().map(|t| t.s).collect();
        assert_eq!(held, vec![0.2, 0.3]);
        assert_eq!(buf.inserted(), 3);
        buf.push(tr(0.4));
        let held: Vec<f64> = buf.iter().map(|t| t.s).collect();
        assert_eq!(held, vec![0.3, 0.4]);
    }

    #[test]
    fn single_element_sampling() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        buf.push(tr(0.5));
        let mut rng = SeedStreams::new(0).stream(Stream::Minibatch);
        let b = buf.sample(5, &mut rng).unwrap();
        assert_eq!(b.s, vec![0.5; 5]);
    }

    #[test]
    fn empty_rejected() {
        let buf = ReplayBuffer::new(4).unwrap();
        let mut rng = SeedStreams::new(0).stream(Stream::Minibatch);
        assert_eq!(buf.sample(1, &mut rng), Err(Error::EmptyBuffer));
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn rewarded_fraction_matches_binomial() {
        // 1% rewarded transitions; 1e5 draws give a binomial std of ~0.03%.
        let mut buf = ReplayBuffer::new(1000).unwrap();
        for i in 0..1000 {
            let t = if i % 100 == 0 {
                step(EnvKind::OneDToy, 0.0, -0.1).unwrap()
            } else {
                tr(0.5)
            };
            buf.push(t);
        }
        assert_eq!(buf.rewarded_count(), 10);
        let mut rng = SeedStreams::new(3).stream(Stream::Minibatch);
        let b = buf.sample(100_000, &mut rng).unwrap();
        let frac = b.rewarded_count() as f64 / 1e5;
        assert!((frac - 0.01).abs() <= 0.002, "{frac}");
    }
}
