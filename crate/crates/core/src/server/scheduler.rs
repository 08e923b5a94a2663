//! Round-robin service over per-connection queues.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

/// A ring of keys in arrival order, each with a FIFO queue. `next` serves at
/// most one item per key per turn and skips keys with empty queues.
#[derive(Debug, Clone)]
pub struct RoundRobin<K, T> {
    ring: Vec<K>,
    queues: HashMap<K, VecDeque<T>>,
    cursor: usize,
}

impl<K: Copy + Eq + Hash, T> Default for RoundRobin<K, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Copy + Eq + Hash, T> RoundRobin<K, T> {
    pub fn new() -> Self {
        Self { ring: Vec::new(), queues: HashMap::new(), cursor: 0 }
    }

    /// Appends `key` to the ring if absent.
    pub fn add(&mut self, key: K) {
        if !self.queues.contains_key(&key) {
            self.ring.push(key);
            self.queues.insert(key, VecDeque::new());
        }
    }

    /// Drops `key` and anything still queued for it.
    pub fn remove(&mut self, key: K) -> Option<VecDeque<T>> {
        let pos = self.ring.iter().position(|k| *k == key)?;
        self.ring.remove(pos);
        if pos < self.cursor {
            self.cursor -= 1;
        }
        if self.cursor >= self.ring.len() {
            self.cursor = 0;
        }
        self.queues.remove(&key)
    }

    pub fn push(&mut self, key: K, item: T) {
        self.add(key);
        self.queues.get_mut(&key).expect("added above").push_back(item);
    }

    pub fn pop_next(&mut self) -> Option<(K, T)> {
        let n = self.ring.len();
        for step in 0..n {
            let idx = (self.cursor + step) % n;
            let key = self.ring[idx];
            if let Some(item) = self.queues.get_mut(&key).and_then(VecDeque::pop_front) {
                self.cursor = (idx + 1) % n;
                return Some((key, item));
            }
        }
        None
    }

    pub fn contains(&self, key: K) -> bool {
        self.queues.contains_key(&key)
    }

    pub fn ring(&self) -> &[K] {
        &self.ring
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn queue_len(&self, key: K) -> usize {
        self.queues.get(&key).map_or(0, VecDeque::len)
    }

    pub fn total_queued(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    /// Keys with pending items, in ring order.
    pub fn backlogged(&self) -> Vec<K> {
        self.ring.iter().copied().filter(|k| self.queue_len(*k) > 0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(rr: &mut RoundRobin<u32, u32>) -> Vec<u32> {
        std::iter::from_fn(|| rr.pop_next().map(|(k, _)| k)).collect()
    }

    #[test]
    fn serves_in_ring_order() {
        let mut rr = RoundRobin::new();
        for k in [1, 2, 3] {
            rr.push(k, 0);
        }
        assert_eq!(drain(&mut rr), vec![1, 2, 3]);
    }

    #[test]
    fn skips_empty_queues() {
        let mut rr = RoundRobin::new();
        rr.add(1);
        rr.add(2);
        rr.add(3);
        for i in 0..3 {
            rr.push(1, i);
            rr.push(3, i);
        }
        assert_eq!(drain(&mut rr), vec![1, 3, 1, 3, 1, 3]);
        rr.push(2, 9);
        rr.push(1, 9);
        assert_eq!(drain(&mut rr), vec![1, 2]);
    }

    #[test]
    fn equal_backlogs_alternate() {
        let mut rr = RoundRobin::new();
        for i in 0..10 {
            rr.push(1, i);
        }
        for i in 0..10 {
            rr.push(2, i);
        }
        let order = drain(&mut rr);
        assert_eq!(order.len(), 20);
        assert!(order.iter().enumerate().all(|(i, k)| *k == if i % 2 == 0 { 1 } else { 2 }));
    }

    #[test]
    fn items_stay_fifo_per_key() {
        let mut rr = RoundRobin::new();
        for i in 0..5 {
            rr.push(7u32, i);
        }
        let items: Vec<u32> = std::iter::from_fn(|| rr.pop_next().map(|(_, v)| v)).collect();
        assert_eq!(items, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn removal_keeps_cursor_on_a_live_key() {
        let mut rr = RoundRobin::new();
        for k in [1, 2, 3] {
            rr.push(k, 0);
            rr.push(k, 1);
        }
        assert_eq!(rr.pop_next().map(|(k, _)| k), Some(1));
        assert_eq!(rr.pop_next().map(|(k, _)| k), Some(2));
        rr.remove(3);
        assert!(rr.cursor() < rr.ring().len());
        assert_eq!(drain(&mut rr), vec![1, 2]);
        rr.remove(1);
        rr.remove(2);
        assert_eq!(rr.cursor(), 0);
        assert!(rr.pop_next().is_none());
    }
}
