use std::collections::HashMap;
use std::sync::Arc;

use geosieve::BitMask;

pub const DEFAULT_CAPACITY: usize = 32;

/// Least-recently-used mask store. Capacity is small, so eviction scans.
#[derive(Debug)]
pub struct MaskCache {
    capacity: usize,
    tick: u64,
    entries: HashMap<String, (u64, Arc<BitMask>)>,
}

impl MaskCache {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        MaskCache {
            capacity,
            tick: 0,
            entries: HashMap::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&mut self, key: &str) -> Option<Arc<BitMask>> {
        self.tick += 1;
        let tick = self.tick;
        self.entries.get_mut(key).map(|(used, m)| {
            *used = tick;
            m.clone()
        })
    }

    pub fn insert(&mut self, key: String, mask: Arc<BitMask>) {
        self.tick += 1;
        if !self.entries.contains_key(&key) && self.entries.len() >= self.capacity {
            let oldest = self
                .entries
                .iter()
                .min_by_key(|(_, (used, _))| *used)
                .map(|(k, _)| k.clone())
                .expect("cache is full, so not empty");
            self.entries.remove(&oldest);
        }
        self.entries.insert(key, (self.tick, mask));
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

impl Default for MaskCache {
    fn default() -> Self {
        MaskCache::new(DEFAULT_CAPACITY)
    }
}
