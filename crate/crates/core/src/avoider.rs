//! The specialized counter for 1324-avoiders.
//!
//! A state `(n, k, b)` stands for the 0-1 exponent matrix whose row `j` is
//! zero before column `b_j` and one from there on (`b_j = n + 1` is an
//! all-zero row), together with an exponent vector made of `k` zeros
//! followed by ones. `G(n, k, b)` sums over the branches `i` whose row has
//! no 1 before column `n`; every other branch carries a positive power of
//! `t` and cannot contribute to the avoider count.
//!
//! States are memoized in one table per `(n, k)`, keyed by `b` packed into a
//! fixed-width byte array.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::memo::{CacheStats, LocalMemo, MemoStore, SharedMemo, DEFAULT_MEMORY_CAP};
use crate::tally::Tally;

/// Width of a packed `b` vector, and so the largest supported `n`.
pub const KEY_WIDTH: usize = 32;

/// Largest `n` for which [`count_calls_uncached`] answers.
pub const UNCACHED_CALLS_MAX_N: usize = 15;

/// `b_1 .. b_n` (one-indexed values), zero-padded.
pub(crate) type Key = [u8; KEY_WIDTH];

/// A state of the avoider recursion. `b` holds one-indexed leftmost-1
/// columns with sentinel `n + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AvoiderState {
    n: usize,
    k: usize,
    b: Vec<u8>,
}

impl AvoiderState {
    pub fn new(n: usize, k: usize, b: Vec<u8>) -> Result<Self> {
        if n > KEY_WIDTH {
            return Err(Error::invalid(format!(
                "n = {n} exceeds key width {KEY_WIDTH}"
            )));
        }
        if k > n || b.len() != n {
            return Err(Error::invalid(format!(
                "bad state shape n={n} k={k} |b|={}",
                b.len()
            )));
        }
        for (j, &bj) in b.iter().enumerate() {
            let j = j + 1;
            if (bj as usize) < j || bj as usize > n + 1 {
                return Err(Error::invalid(format!(
                    "b_{j} = {bj} outside {j}..={}",
                    n + 1
                )));
            }
        }
        Ok(AvoiderState { n, k, b })
    }

    /// The state for the all-zero matrix: `k = n`, every `b_j = n + 1`.
    pub fn root(n: usize) -> Result<Self> {
        AvoiderState::new(n, n, vec![n as u8 + 1; n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn b(&self) -> &[u8] {
        &self.b
    }

    pub fn into_parts(self) -> (usize, usize, Vec<u8>) {
        (self.n, self.k, self.b)
    }

    fn key(&self) -> Key {
        let mut key = [0u8; KEY_WIDTH];
        key[..self.n].copy_from_slice(&self.b);
        key
    }

    /// Branches `i` (one-indexed) with `b_i >= n`.
    pub fn admissible_branches(&self) -> Vec<usize> {
        admissible(self.n, &self.key()).collect()
    }

    pub fn transition(&self, i: usize) -> Result<AvoiderState> {
        if i == 0 || i > self.n || (self.b[i - 1] as usize) < self.n {
            return Err(Error::invalid(format!("branch {i} is not admissible")));
        }
        let (k, key) = step(self.n, self.k, &self.key(), i);
        let n = self.n - 1;
        Ok(AvoiderState {
            n,
            k,
            b: key[..n].to_vec(),
        })
    }
}

#[inline]
fn admissible(n: usize, b: &Key) -> impl Iterator<Item = usize> + '_ {
    (1..=n).filter(move |&i| b[i - 1] as usize >= n)
}

/// One step of the recursion on packed state: removes row `i`, merges
/// columns `i - 1` and `i`, and merges the exponent vector at `i`.
#[inline]
fn step(n: usize, k: usize, b: &Key, i: usize) -> (usize, Key) {
    let mut out = [0u8; KEY_WIDTH];
    let i8 = i as u8;
    for j in 1..i {
        let bj = b[j - 1];
        out[j - 1] = if i == 1 {
            unreachable!()
        } else if bj + 2 <= i8 {
            bj
        } else if bj <= i8 {
            i8 - 1
        } else if j > k {
            // partial sums of the exponent vector are positive from row k+1
            i8 - 1
        } else {
            bj - 1
        };
    }
    for j in i + 1..=n {
        out[j - 2] = b[j - 1] - 1;
    }
    debug_assert!(
        (1..n).all(|j| out[j - 1] as usize >= j),
        "triangularity broken"
    );
    (k.min(i - 1), out)
}

/// A 1 in the last column never matters, so `b_j = n` and the sentinel
/// `n + 1` are merged into `n` before a state is looked up. Likewise `k`
/// only matters up to `n - 1`.
#[inline]
fn fold(n: usize, k: usize, b: &mut Key) -> usize {
    for x in &mut b[..n] {
        *x = (*x).min(n as u8);
    }
    k.min(n.saturating_sub(1))
}

#[inline]
fn slot(n: usize, k: usize) -> usize {
    n * (KEY_WIDTH + 1) + k
}

/// Extra power of `q` attached to branch `i` at size `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchWeight {
    /// Plain counting.
    None,
    /// `q^(i-1)`: tracks inversions.
    Inversions,
    /// `q^(n-i)`: tracks non-inversions.
    NonInversions,
}

impl BranchWeight {
    #[inline]
    pub fn shift(self, n: usize, i: usize) -> usize {
        match self {
            BranchWeight::None => 0,
            BranchWeight::Inversions => i - 1,
            BranchWeight::NonInversions => n - i,
        }
    }
}

/// Knobs shared by the avoider-style engines.
#[derive(Clone, Debug)]
pub struct AvoiderConfig {
    pub memory_cap: usize,
    /// 1 selects the reproducible single-threaded mode.
    pub threads: usize,
    pub memoize: bool,
    /// Levels of the recursion (from the root) evaluated in parallel when
    /// `threads > 1`.
    pub parallel_depth: usize,
}

impl Default for AvoiderConfig {
    fn default() -> Self {
        AvoiderConfig {
            memory_cap: DEFAULT_MEMORY_CAP,
            threads: 1,
            memoize: true,
            parallel_depth: 4,
        }
    }
}

enum Store<V: Tally> {
    Local(LocalMemo<Key, V>),
    Shared(SharedMemo<Key, V>),
}

struct Walk<'a, S> {
    store: &'a S,
    weight: BranchWeight,
    degree_cap: Option<usize>,
}

impl<S> Walk<'_, S> {
    /// Adds `q^shift * G(n, k, b)` into `acc`.
    fn call<V: Tally>(&self, n: usize, k: usize, b: &Key, acc: &mut V, shift: usize) -> Result<()>
    where
        S: MemoStore<Key, V>,
    {
        if n <= 1 {
            self.store.note_miss();
            return acc.add_shifted(&V::one(), shift, self.degree_cap);
        }
        let slot = slot(n, k);
        if let Some(done) = self
            .store
            .with_cached(slot, b, |v| acc.add_shifted(v, shift, self.degree_cap))
        {
            return done;
        }
        self.store.note_miss();
        let mut value = V::zero();
        for i in admissible(n, b) {
            let (k2, mut b2) = step(n, k, b, i);
            let k2 = fold(n - 1, k2, &mut b2);
            self.call(n - 1, k2, &b2, &mut value, self.weight.shift(n, i))?;
        }
        acc.add_shifted(&value, shift, self.degree_cap)?;
        let heap = value.heap_bytes();
        self.store.insert(slot, *b, value, heap)
    }

    /// Same as [`Walk::call`], but fans the first `depth` levels out over
    /// the rayon pool.
    fn call_par<V: Tally>(
        &self,
        n: usize,
        k: usize,
        b: &Key,
        acc: &mut V,
        shift: usize,
        depth: usize,
    ) -> Result<()>
    where
        S: MemoStore<Key, V> + Sync,
    {
        if depth == 0 || n <= 2 {
            return self.call(n, k, b, acc, shift);
        }
        let slot = slot(n, k);
        if let Some(done) = self
            .store
            .with_cached(slot, b, |v| acc.add_shifted(v, shift, self.degree_cap))
        {
            return done;
        }
        self.store.note_miss();
        let branches: Vec<usize> = admissible(n, b).collect();
        let parts: Vec<Result<V>> = branches
            .par_iter()
            .map(|&i| {
                let (k2, mut b2) = step(n, k, b, i);
                let k2 = fold(n - 1, k2, &mut b2);
                let mut part = V::zero();
                self.call_par(n - 1, k2, &b2, &mut part, 0, depth - 1)?;
                Ok(part)
            })
            .collect();
        let mut value = V::zero();
        for (&i, part) in branches.iter().zip(parts) {
            value.add_shifted(&part?, self.weight.shift(n, i), self.degree_cap)?;
        }
        acc.add_shifted(&value, shift, self.degree_cap)?;
        let heap = value.heap_bytes();
        self.store.insert(slot, *b, value, heap)
    }
}

/// Memoized evaluator of `G` with a value type `V`. The memo table persists
/// across calls, so consecutive sizes reuse earlier work.
pub struct AvoiderEngine<V: Tally> {
    store: Store<V>,
    pool: Option<rayon::ThreadPool>,
    parallel_depth: usize,
    weight: BranchWeight,
    degree_cap: Option<usize>,
}

impl<V: Tally> AvoiderEngine<V> {
    pub fn new(
        cfg: &AvoiderConfig,
        weight: BranchWeight,
        degree_cap: Option<usize>,
    ) -> Result<Self> {
        if cfg.threads == 0 {
            return Err(Error::invalid("threads must be at least 1"));
        }
        let (store, pool) = if cfg.threads == 1 || !cfg.memoize {
            (
                Store::Local(LocalMemo::new(cfg.memory_cap, cfg.memoize)),
                None,
            )
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::resource(format!("thread pool: {e}")))?;
            (Store::Shared(SharedMemo::new(cfg.memory_cap)), Some(pool))
        };
        Ok(AvoiderEngine {
            store,
            pool,
            parallel_depth: cfg.parallel_depth,
            weight,
            degree_cap,
        })
    }

    /// `G` at the root state of size `n`.
    pub fn evaluate(&mut self, n: usize) -> Result<V> {
        let root = AvoiderState::root(n)?;
        self.evaluate_state(&root)
    }

    pub fn evaluate_state(&mut self, state: &AvoiderState) -> Result<V> {
        let mut key = state.key();
        let k = fold(state.n, state.k, &mut key);
        let mut acc = V::zero();
        match &self.store {
            Store::Local(memo) => {
                let walk = Walk {
                    store: memo,
                    weight: self.weight,
                    degree_cap: self.degree_cap,
                };
                walk.call(state.n, k, &key, &mut acc, 0)?;
            }
            Store::Shared(memo) => {
                let walk = Walk {
                    store: memo,
                    weight: self.weight,
                    degree_cap: self.degree_cap,
                };
                let depth = self.parallel_depth;
                let pool = self.pool.as_ref().expect("shared store implies a pool");
                pool.install(|| walk.call_par(state.n, k, &key, &mut acc, 0, depth))?;
            }
        }
        Ok(acc)
    }

    pub fn stats(&self) -> CacheStats {
        match &self.store {
            Store::Local(m) => m.stats(),
            Store::Shared(m) => m.stats(),
        }
    }

    /// Hit/miss counts are reproducible only in single-threaded mode.
    pub fn is_reproducible(&self) -> bool {
        matches!(self.store, Store::Local(_))
    }
}

/// Runs `fixed` and, if it overflows, `arbitrary` instead.
pub(crate) fn with_fallback<T>(
    fixed: impl FnOnce() -> Result<T>,
    arbitrary: impl FnOnce() -> Result<T>,
) -> Result<T> {
    match fixed() {
        Err(Error::Overflow) => arbitrary(),
        other => other,
    }
}

/// Arbitrary-precision avoider count.
pub type BigCounter = BigUint;

/// Counter width policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    /// 128-bit counters; on overflow the run restarts with arbitrary precision.
    #[default]
    Auto,
    /// 128-bit counters only; overflow is an error.
    Fixed128,
    /// Arbitrary precision throughout.
    Arbitrary,
}

enum Active {
    Fixed(AvoiderEngine<u128>),
    Big(AvoiderEngine<BigUint>),
}

/// One finished size in a consecutive run.
#[derive(Clone, Debug)]
pub struct SizeRecord {
    pub n: usize,
    pub count: BigCounter,
    pub elapsed: Duration,
    /// Cumulative statistics after this size.
    pub stats: CacheStats,
    /// Statistics accrued while computing this size alone.
    pub delta: CacheStats,
}

/// Result of [`AvoiderCounter::count_upto`]: the completed prefix, plus the
/// error that stopped the run early, if any.
#[derive(Clone, Debug)]
pub struct UptoRun {
    pub records: Vec<SizeRecord>,
    pub aborted: Option<Error>,
}

impl UptoRun {
    pub fn values(&self) -> Vec<BigCounter> {
        self.records.iter().map(|r| r.count.clone()).collect()
    }
}

/// Counts 1324-avoiders, keeping its memo table between calls.
pub struct AvoiderCounter {
    cfg: AvoiderConfig,
    precision: Precision,
    active: Active,
}

impl AvoiderCounter {
    pub fn new(cfg: AvoiderConfig, precision: Precision) -> Result<Self> {
        let active = match precision {
            Precision::Arbitrary => {
                Active::Big(AvoiderEngine::new(&cfg, BranchWeight::None, None)?)
            }
            _ => Active::Fixed(AvoiderEngine::new(&cfg, BranchWeight::None, None)?),
        };
        Ok(AvoiderCounter {
            cfg,
            precision,
            active,
        })
    }

    pub fn count(&mut self, n: usize) -> Result<BigCounter> {
        if let Active::Fixed(engine) = &mut self.active {
            match engine.evaluate(n) {
                Ok(v) => return Ok(BigUint::from(v)),
                Err(Error::Overflow) if self.precision == Precision::Auto => {
                    self.active =
                        Active::Big(AvoiderEngine::new(&self.cfg, BranchWeight::None, None)?);
                }
                Err(e) => return Err(e),
            }
        }
        match &mut self.active {
            Active::Big(engine) => engine.evaluate(n),
            Active::Fixed(_) => unreachable!(),
        }
    }

    /// `a_1 ..= a_nmax` in one run with a shared cache. Stops at the first
    /// error and reports what finished before it.
    pub fn count_upto(&mut self, nmax: usize, mut progress: impl FnMut(&SizeRecord)) -> UptoRun {
        let mut records = Vec::new();
        if nmax > KEY_WIDTH {
            return UptoRun {
                records,
                aborted: Some(Error::invalid(format!(
                    "n = {nmax} exceeds key width {KEY_WIDTH}"
                ))),
            };
        }
        for n in 1..=nmax {
            let before = self.cache_report();
            let start = Instant::now();
            match self.count(n) {
                Ok(count) => {
                    let stats = self.cache_report();
                    let record = SizeRecord {
                        n,
                        count,
                        elapsed: start.elapsed(),
                        stats,
                        delta: stats.since(&before),
                    };
                    progress(&record);
                    records.push(record);
                }
                Err(e) => {
                    return UptoRun {
                        records,
                        aborted: Some(e),
                    }
                }
            }
        }
        UptoRun {
            records,
            aborted: None,
        }
    }

    pub fn cache_report(&self) -> CacheStats {
        match &self.active {
            Active::Fixed(e) => e.stats(),
            Active::Big(e) => e.stats(),
        }
    }

    pub fn is_reproducible(&self) -> bool {
        match &self.active {
            Active::Fixed(e) => e.is_reproducible(),
            Active::Big(e) => e.is_reproducible(),
        }
    }
}

/// `a_n`, the number of 1324-avoiders of length `n`.
pub fn count_avoiders(n: usize) -> Result<BigCounter> {
    AvoiderCounter::new(AvoiderConfig::default(), Precision::Auto)?.count(n)
}

/// `[a_1, ..., a_nmax]` computed consecutively.
pub fn count_avoiders_upto(nmax: usize) -> Result<Vec<BigCounter>> {
    if nmax == 0 {
        return Err(Error::invalid("nmax must be at least 1"));
    }
    let mut counter = AvoiderCounter::new(AvoiderConfig::default(), Precision::Auto)?;
    let run = counter.count_upto(nmax, |_| {});
    match run.aborted {
        Some(e) => Err(e),
        None => Ok(run.values()),
    }
}

/// Number of calls to `G` that a run with memoization disabled makes when
/// computing `a_1, ..., a_n` one after another (root calls included,
/// inadmissible branches not called, `n <= 1` is the leaf).
///
/// The total is obtained by memoizing the call counts themselves, which
/// gives the same number as the literal uncached run without its cost.
pub fn count_calls_uncached(n: usize) -> Result<u128> {
    if n > UNCACHED_CALLS_MAX_N {
        return Err(Error::resource(format!(
            "uncached call counts are limited to n <= {UNCACHED_CALLS_MAX_N}"
        )));
    }
    let mut memo: FxHashMap<(usize, usize, Key), u128> = FxHashMap::default();
    fn calls(n: usize, k: usize, b: &Key, memo: &mut FxHashMap<(usize, usize, Key), u128>) -> u128 {
        if n <= 1 {
            return 1;
        }
        if let Some(&c) = memo.get(&(n, k, *b)) {
            return c;
        }
        let mut total = 1;
        for i in admissible(n, b) {
            let (k2, b2) = step(n, k, b, i);
            total += calls(n - 1, k2, &b2, memo);
        }
        memo.insert((n, k, *b), total);
        total
    }
    let mut total = 0;
    for m in 1..=n {
        let root = AvoiderState::root(m)?;
        total += calls(m, m, &root.key(), &mut memo);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(n: usize, k: usize, b: &[u8]) -> AvoiderState {
        AvoiderState::new(n, k, b.to_vec()).unwrap()
    }

    #[test]
    fn admissible_examples() {
        assert_eq!(st(3, 3, &[4, 4, 4]).admissible_branches(), vec![1, 2, 3]);
        assert_eq!(st(3, 3, &[1, 4, 4]).admissible_branches(), vec![2, 3]);
        assert_eq!(st(3, 3, &[3, 3, 4]).admissible_branches(), vec![1, 2, 3]);
    }

    #[test]
    fn transition_examples() {
        assert_eq!(
            st(3, 3, &[4, 4, 4]).transition(1).unwrap(),
            st(2, 0, &[3, 3])
        );
        // The zero matrix stays zero when the last row is removed, so both
        // surviving rows keep the sentinel (n-1)+1 = 3.
        assert_eq!(
            st(3, 3, &[4, 4, 4]).transition(3).unwrap(),
            st(2, 2, &[3, 3])
        );
        assert_eq!(st(2, 0, &[3, 3]).transition(2).unwrap(), st(1, 0, &[1]));
    }

    #[test]
    fn inadmissible_transition_is_rejected() {
        assert!(st(3, 3, &[1, 4, 4]).transition(1).is_err());
        assert!(st(3, 3, &[4, 4, 4]).transition(4).is_err());
        assert!(st(3, 3, &[4, 4, 4]).transition(0).is_err());
    }

    #[test]
    fn state_validation() {
        assert!(AvoiderState::new(3, 4, vec![4, 4, 4]).is_err());
        assert!(AvoiderState::new(3, 1, vec![4, 1, 4]).is_err());
        assert!(AvoiderState::new(3, 1, vec![4, 4, 5]).is_err());
        assert!(AvoiderState::new(KEY_WIDTH + 1, 0, vec![]).is_err());
    }

    #[test]
    fn small_counts() {
        let expected = [1u64, 1, 2, 6, 23, 103, 513, 2762, 15793];
        for (n, &want) in expected.iter().enumerate() {
            assert_eq!(count_avoiders(n).unwrap(), BigUint::from(want), "n = {n}");
        }
    }

    #[test]
    fn upto_matches_individual_counts() {
        let all = count_avoiders_upto(9).unwrap();
        for (idx, v) in all.iter().enumerate() {
            assert_eq!(*v, count_avoiders(idx + 1).unwrap());
        }
        assert_eq!(count_avoiders_upto(1).unwrap(), vec![BigUint::from(1u8)]);
        assert!(count_avoiders_upto(0).is_err());
    }

    #[test]
    fn precisions_agree() {
        for p in [Precision::Auto, Precision::Fixed128, Precision::Arbitrary] {
            let mut c = AvoiderCounter::new(AvoiderConfig::default(), p).unwrap();
            assert_eq!(c.count(12).unwrap(), BigUint::from(25431452u64));
        }
    }

    #[test]
    fn stats_first_rows() {
        let mut c = AvoiderCounter::new(AvoiderConfig::default(), Precision::Auto).unwrap();
        c.count(1).unwrap();
        let s = c.cache_report();
        assert_eq!((s.hits, s.misses), (0, 1));
        c.count(2).unwrap();
        let s = c.cache_report();
        assert_eq!(s.hits, 0);
        assert!(s.entries <= s.misses);
    }

    #[test]
    fn literal_uncached_calls_match_memoized_count() {
        for n in 1..=9 {
            let cfg = AvoiderConfig {
                memoize: false,
                ..Default::default()
            };
            let mut c = AvoiderCounter::new(cfg, Precision::Fixed128).unwrap();
            for m in 1..=n {
                c.count(m).unwrap();
            }
            let s = c.cache_report();
            assert_eq!(s.hits, 0);
            assert_eq!(s.entries, 0);
            assert_eq!(
                s.misses as u128,
                count_calls_uncached(n).unwrap(),
                "n = {n}"
            );
        }
    }

    #[test]
    fn memory_cap_aborts_with_prefix() {
        let cfg = AvoiderConfig {
            memory_cap: 64 << 10,
            ..Default::default()
        };
        let mut c = AvoiderCounter::new(cfg, Precision::Auto).unwrap();
        let run = c.count_upto(20, |_| {});
        assert!(matches!(run.aborted, Some(Error::ResourceLimit(_))));
        assert!(!run.records.is_empty());
        assert_eq!(run.records[3].count, BigUint::from(23u8));
    }

    #[test]
    fn parallel_mode_matches() {
        let cfg = AvoiderConfig {
            threads: 3,
            parallel_depth: 3,
            ..Default::default()
        };
        let mut c = AvoiderCounter::new(cfg, Precision::Auto).unwrap();
        assert!(!c.is_reproducible());
        assert_eq!(c.count(13).unwrap(), BigUint::from(173453058u64));
    }
}
