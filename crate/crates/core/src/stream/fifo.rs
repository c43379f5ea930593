//! Bounded FIFO that never drops silently.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushStatus {
    Accepted,
    /// The queue was full; the item was counted in `dropped` and discarded.
    Overflow,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FifoStats {
    pub depth: usize,
    pub occupancy: usize,
    pub high_water: usize,
    pub pushed: u64,
    pub popped: u64,
    pub dropped: u64,
}

impl FifoStats {
    /// `pushed = popped + occupancy + dropped`.
    pub fn conserved(&self) -> bool {
        self.pushed == self.popped + self.occupancy as u64 + self.dropped
    }
}

#[derive(Clone, Debug)]
pub struct Fifo<T> {
    depth: usize,
    items: VecDeque<T>,
    high_water: usize,
    pushed: u64,
    popped: u64,
    dropped: u64,
}

impl<T> Fifo<T> {
    pub fn new(depth: usize) -> Self {
        Self {
            depth,
            items: VecDeque::with_capacity(depth),
            high_water: 0,
            pushed: 0,
            popped: 0,
            dropped: 0,
        }
    }

    pub fn push(&mut self, item: T) -> PushStatus {
        self.pushed += 1;
        if self.items.len() >= self.depth {
            self.dropped += 1;
            return PushStatus::Overflow;
        }
        self.items.push_back(item);
        self.high_water = self.high_water.max(self.items.len());
        PushStatus::Accepted
    }

    pub fn pop(&mut self) -> Option<T> {
        let item = self.items.pop_front()?;
        self.popped += 1;
        Some(item)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.depth
    }

    pub fn overflowed(&self) -> bool {
        self.dropped > 0
    }

    pub fn clear(&mut self) {
        self.items.clear();
        self.high_water = 0;
        self.pushed = 0;
        self.popped = 0;
        self.dropped = 0;
    }

    pub fn stats(&self) -> FifoStats {
        FifoStats {
            depth: self.depth,
            occupancy: self.items.len(),
            high_water: self.high_water,
            pushed: self.pushed,
            popped: self.popped,
            dropped: self.dropped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_is_counted() {
        let mut f = Fifo::new(4);
        for i in 0..4 {
            assert_eq!(f.push(i), PushStatus::Accepted);
        }
        assert_eq!(f.push(4), PushStatus::Overflow);
        let s = f.stats();
        assert_eq!((s.occupancy, s.dropped, s.high_water), (4, 1, 4));
        assert!(f.overflowed());
        assert!(s.conserved());
    }

    #[test]
    fn pop_on_empty() {
        let mut f: Fifo<u8> = Fifo::new(2);
        assert_eq!(f.pop(), None);
        assert_eq!(f.stats().popped, 0);
    }

    #[test]
    fn balanced_traffic_stays_within_burst() {
        let mut f = Fifo::new(16);
        for _ in 0..100 {
            for i in 0..3 {
                f.push(i);
            }
            for _ in 0..3 {
                f.pop();
            }
        }
        assert_eq!(f.stats().high_water, 3);
        assert!(f.stats().conserved());
    }
}
