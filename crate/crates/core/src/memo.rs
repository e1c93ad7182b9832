//! Memo tables shared by the recursive engines.
//!
//! Each table is split into slots (one per `(n, k)` for the avoider, one per
//! `(n, budget)` for the general engine). Two backends exist: a `RefCell`
//! one for reproducible single-threaded runs and a `DashMap` one for the
//! parallel mode. Both charge an approximate byte cost per entry against a
//! cap and refuse inserts past it.

use std::cell::{Cell, RefCell};
use std::hash::Hash;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use dashmap::DashMap;
use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::error::{Error, Result};

/// Default memory cap for memo tables: 4 GiB.
pub const DEFAULT_MEMORY_CAP: usize = 4 << 30;

/// Counters for a memoized run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    /// Calls answered from the memo table.
    pub hits: u64,
    /// Calls that had to be evaluated, base cases included.
    pub misses: u64,
    /// Live memo entries.
    pub entries: u64,
    /// Approximate peak bytes held by the memo table.
    pub peak_bytes: u64,
}

impl CacheStats {
    /// Counter growth from `earlier` to `self`; `peak_bytes` is kept as is.
    pub fn since(&self, earlier: &CacheStats) -> CacheStats {
        CacheStats {
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
            entries: self.entries - earlier.entries,
            peak_bytes: self.peak_bytes,
        }
    }

    pub fn calls(&self) -> u64 {
        self.hits + self.misses
    }
}

/// Bytes per bucket of a swiss table: the pair plus one control byte.
fn bucket_bytes<K, V>() -> usize {
    std::mem::size_of::<K>() + std::mem::size_of::<V>() + 1
}

/// Allocation behind a table that can hold `capacity` items.
fn table_bytes<K, V>(capacity: usize) -> usize {
    if capacity == 0 {
        return 0;
    }
    let buckets = if capacity < 4 {
        4
    } else if capacity < 8 {
        8
    } else {
        (capacity * 8 / 7).next_power_of_two()
    };
    buckets * bucket_bytes::<K, V>()
}

/// Per-entry charge when table capacities are not observable: buckets run
/// between 44% and 87.5% full, and a resize briefly holds two tables.
fn shared_entry_cost<K, V>(heap: usize) -> usize {
    bucket_bytes::<K, V>() * 5 / 2 + heap
}

fn over_cap(cap: usize) -> Error {
    Error::resource(format!("memo table exceeded the memory cap of {cap} bytes"))
}

pub(crate) trait MemoStore<K, V> {
    /// Runs `f` on the cached value, if any, counting a hit.
    fn with_cached<R>(&self, slot: usize, key: &K, f: impl FnOnce(&V) -> R) -> Option<R>;
    fn note_miss(&self);
    /// Inserts a freshly evaluated value; `heap` is its out-of-line size.
    fn insert(&self, slot: usize, key: K, value: V, heap: usize) -> Result<()>;
    fn stats(&self) -> CacheStats;
}

/// Single-threaded backend.
pub(crate) struct LocalMemo<K, V> {
    slots: RefCell<Vec<FxHashMap<K, V>>>,
    hits: Cell<u64>,
    misses: Cell<u64>,
    entries: Cell<u64>,
    /// Current allocation of all tables.
    tables: Cell<usize>,
    /// Out-of-line bytes owned by stored values.
    heap: Cell<usize>,
    peak: Cell<usize>,
    cap: usize,
    enabled: bool,
}

impl<K: Hash + Eq, V> LocalMemo<K, V> {
    pub fn new(cap: usize, enabled: bool) -> Self {
        LocalMemo {
            slots: RefCell::new(Vec::new()),
            hits: Cell::new(0),
            misses: Cell::new(0),
            entries: Cell::new(0),
            tables: Cell::new(0),
            heap: Cell::new(0),
            peak: Cell::new(0),
            cap,
            enabled,
        }
    }
}

impl<K: Hash + Eq, V> MemoStore<K, V> for LocalMemo<K, V> {
    #[inline]
    fn with_cached<R>(&self, slot: usize, key: &K, f: impl FnOnce(&V) -> R) -> Option<R> {
        if !self.enabled {
            return None;
        }
        let slots = self.slots.borrow();
        let value = slots.get(slot)?.get(key)?;
        self.hits.set(self.hits.get() + 1);
        Some(f(value))
    }

    #[inline]
    fn note_miss(&self) {
        self.misses.set(self.misses.get() + 1);
    }

    fn insert(&self, slot: usize, key: K, value: V, heap: usize) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        let mut slots = self.slots.borrow_mut();
        if slots.len() <= slot {
            slots.resize_with(slot + 1, FxHashMap::default);
        }
        let map = &mut slots[slot];
        let before = table_bytes::<K, V>(map.capacity());
        // a growing table holds the old and the new allocation at once
        let transient = if map.len() == map.capacity() {
            before + table_bytes::<K, V>(map.capacity() + 1)
        } else {
            before
        };
        let heap_total = self.heap.get() + heap;
        let projected = self.tables.get() - before + transient + heap_total;
        if projected > self.cap {
            return Err(over_cap(self.cap));
        }
        if map.insert(key, value).is_none() {
            self.entries.set(self.entries.get() + 1);
            self.heap.set(heap_total);
        }
        let after = table_bytes::<K, V>(map.capacity());
        self.tables.set(self.tables.get() - before + after);
        self.peak.set(self.peak.get().max(projected));
        Ok(())
    }

    fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.get(),
            misses: self.misses.get(),
            entries: self.entries.get(),
            peak_bytes: self.peak.get() as u64,
        }
    }
}

/// Concurrent backend. Two threads may evaluate the same state at once; the
/// second insert is dropped, which is harmless since both computed the same
/// value.
pub(crate) struct SharedMemo<K: Hash + Eq, V> {
    map: DashMap<(u32, K), V, FxBuildHasher>,
    hits: AtomicU64,
    misses: AtomicU64,
    entries: AtomicU64,
    bytes: AtomicUsize,
    cap: usize,
}

impl<K: Hash + Eq, V> SharedMemo<K, V> {
    pub fn new(cap: usize) -> Self {
        SharedMemo {
            map: DashMap::with_hasher(FxBuildHasher),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            entries: AtomicU64::new(0),
            bytes: AtomicUsize::new(0),
            cap,
        }
    }
}

impl<K: Hash + Eq + Clone + Send + Sync, V: Send + Sync> MemoStore<K, V> for SharedMemo<K, V> {
    fn with_cached<R>(&self, slot: usize, key: &K, f: impl FnOnce(&V) -> R) -> Option<R> {
        // DashMap needs an owned tuple key for lookup.
        let probe = (slot as u32, key.clone());
        let value = self.map.get(&probe)?;
        self.hits.fetch_add(1, Ordering::Relaxed);
        Some(f(&value))
    }

    fn note_miss(&self) {
        self.misses.fetch_add(1, Ordering::Relaxed);
    }

    fn insert(&self, slot: usize, key: K, value: V, heap: usize) -> Result<()> {
        let cost = shared_entry_cost::<(u32, K), V>(heap);
        let before = self.bytes.fetch_add(cost, Ordering::Relaxed);
        if before + cost > self.cap {
            self.bytes.fetch_sub(cost, Ordering::Relaxed);
            return Err(over_cap(self.cap));
        }
        if self.map.insert((slot as u32, key), value).is_none() {
            self.entries.fetch_add(1, Ordering::Relaxed);
        } else {
            self.bytes.fetch_sub(cost, Ordering::Relaxed);
        }
        Ok(())
    }

    fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.entries.load(Ordering::Relaxed),
            peak_bytes: self.bytes.load(Ordering::Relaxed) as u64,
        }
    }
}
