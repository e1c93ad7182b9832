//! The general engine: `s_n(1324, j)` for all `j <= r` from the exponent-form
//! recurrence.
//!
//! `H_n(U; v)` sums over branches `i = 1..n`. Branch `i` carries the factor
//! `t^{e_i}` with `e_i = sum_{j=i}^{n-1} (n-j) u_{i,j}` and recurses on the
//! state produced by [`ExponentState::step`]. The answer is `H_n` at the zero
//! state; `H_0 = 1`.
//!
//! The memoized walk keeps a remaining budget `B` of `t`-degrees. A branch with
//! `e_i > B` is dropped, and every exponent is saturated at `B + 1`. The
//! exponent vector is stored as capped prefix sums, the last column of `U` is
//! cleared (its multiplier is always zero), and so is everything below the
//! diagonal. Two states that agree after this are interchangeable.

use num_bigint::BigUint;

use crate::avoider::BranchWeight;
use crate::error::{Error, Result};
use crate::memo::{CacheStats, LocalMemo, MemoStore, DEFAULT_MEMORY_CAP};
use crate::perms::{brute_force_distribution, Permutation};
use crate::tally::{Coefficient, Tally};

/// Largest `n` the engine accepts; `34! < 2^128` keeps 128-bit counters exact.
pub const MAX_SERIES_N: usize = 34;

/// An exponent state `(U, v)` with exponents saturated at `r + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentState {
    r: usize,
    u: Vec<Vec<u32>>,
    v: Vec<u32>,
}

impl ExponentState {
    pub fn new(u: Vec<Vec<u32>>, v: Vec<u32>, r: usize) -> Result<Self> {
        let n = v.len();
        if u.len() != n || u.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(format!("matrix must be {n}x{n}")));
        }
        let cap = r as u32 + 1;
        let u = u
            .into_iter()
            .map(|row| row.into_iter().map(|x| x.min(cap)).collect())
            .collect();
        let v = v.into_iter().map(|x| x.min(cap)).collect();
        Ok(ExponentState { r, u, v })
    }

    pub fn zero(n: usize, r: usize) -> Self {
        ExponentState {
            r,
            u: vec![vec![0; n]; n],
            v: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn u(&self) -> &[Vec<u32>] {
        &self.u
    }

    pub fn v(&self) -> &[u32] {
        &self.v
    }

    fn cap(&self) -> u32 {
        self.r as u32 + 1
    }

    fn check_branch(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n() {
            return Err(Error::invalid(format!(
                "branch {i} outside 1..={}",
                self.n()
            )));
        }
        Ok(())
    }

    /// `e_i`, the power of `t` attached to branch `i`.
    pub fn branch_exponent(&self, i: usize) -> Result<u64> {
        self.check_branch(i)?;
        let n = self.n();
        Ok((i..n)
            .map(|j| (n - j) as u64 * self.u[i - 1][j - 1] as u64)
            .sum())
    }

    /// The matrix part of the branch-`i` step: row `i` goes, and columns
    /// `i - 1` and `i` merge, picking up the partial sums of `v`.
    pub fn r2prime(&self, i: usize) -> Result<Vec<Vec<u32>>> {
        self.check_branch(i)?;
        let n = self.n();
        let cap = self.cap();
        let mut out = vec![vec![0; n - 1]; n - 1];
        if i == 1 {
            for a in 1..n {
                out[a - 1].copy_from_slice(&self.u[a][1..]);
            }
            return Ok(out);
        }
        let mut partial = 0u32;
        for (a, row) in out.iter_mut().enumerate() {
            let old = if a + 1 < i { a } else { a + 1 };
            if a + 1 < i {
                partial = (partial + self.v[a]).min(cap);
            }
            for (l, cell) in row.iter_mut().enumerate() {
                let col = l + 1;
                *cell = if col < i - 1 {
                    self.u[old][l]
                } else if col == i - 1 {
                    if a + 1 < i {
                        (partial + self.u[a][i - 2] + self.u[a][i - 1]).min(cap)
                    } else {
                        0
                    }
                } else {
                    self.u[old][l + 1]
                };
            }
        }
        Ok(out)
    }

    /// Full branch-`i` step: [`ExponentState::r2prime`] and [`v_update`].
    pub fn step(&self, i: usize) -> Result<ExponentState> {
        Ok(ExponentState {
            r: self.r,
            u: self.r2prime(i)?,
            v: v_update(&self.v, i, self.r)?,
        })
    }
}

/// Merges `v_i` and `v_{i+1}` into `v_i + v_{i+1} + 1` (saturated at
/// `r + 1`), or drops the last entry when `i = n`.
pub fn v_update(v: &[u32], i: usize, r: usize) -> Result<Vec<u32>> {
    let n = v.len();
    if i == 0 || i > n {
        return Err(Error::invalid(format!("branch {i} outside 1..={n}")));
    }
    let cap = r as u32 + 1;
    let mut out: Vec<u32> = v[..n - 1].to_vec();
    if i < n {
        out[i - 1] = (v[i - 1] + v[i] + 1).min(cap);
        out[i..].copy_from_slice(&v[i + 1..]);
    }
    Ok(out)
}

/// `[s_n(1324, 0), ..., s_n(1324, r)]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedCounterSeries {
    coeffs: Vec<BigUint>,
}

impl TruncatedCounterSeries {
    pub fn new(coeffs: Vec<BigUint>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid(
                "a truncated series needs at least one coefficient",
            ));
        }
        Ok(TruncatedCounterSeries { coeffs })
    }

    pub fn r(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    pub fn truncate(&self, r: usize) -> TruncatedCounterSeries {
        TruncatedCounterSeries {
            coeffs: self.coeffs[..=r.min(self.r())].to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeriesConfig {
    pub memory_cap: usize,
    pub memoize: bool,
    /// Drop branches whose `t`-power already exceeds the remaining budget.
    /// Turning this off keeps every branch (slow; for testing).
    pub discard_branches: bool,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            memory_cap: DEFAULT_MEMORY_CAP,
            memoize: true,
            discard_branches: true,
        }
    }
}

/// Packed `(U upper triangle without its last column, prefix sums of v)`.
type StateKey = Box<[u64]>;

/// Working form of a state: `u` is `n x n` row-major, `p` holds capped
/// prefix sums of `v`.
struct Work {
    n: usize,
    u: Vec<u8>,
    p: Vec<u8>,
}

impl Work {
    fn zero(n: usize) -> Self {
        Work {
            n,
            u: vec![0; n * n],
            p: vec![0; n],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> u8 {
        self.u[(i - 1) * self.n + (j - 1)]
    }

    fn exponent(&self, i: usize) -> usize {
        let n = self.n;
        (i..n).map(|j| (n - j) * self.at(i, j) as usize).sum()
    }

    /// Child after branch `i`, saturated at `cap`.
    fn child(&self, i: usize, cap: u8) -> Work {
        let n = self.n;
        let m = n - 1;
        let mut u = vec![0u8; m * m];
        for a in 1..=m {
            let old = if a < i { a } else { a + 1 };
            // last column and below-diagonal stay zero
            for col in a..m {
                let x = if i == 1 {
                    self.at(a + 1, col + 1)
                } else if col + 1 < i {
                    self.at(old, col)
                } else if col + 1 == i {
                    if a < i {
                        self.p[a - 1]
                            .saturating_add(self.at(a, i - 1))
                            .saturating_add(self.at(a, i))
                    } else {
                        0
                    }
                } else {
                    self.at(old, col + 1)
                };
                u[(a - 1) * m + (col - 1)] = x.min(cap);
            }
        }
        let mut p = Vec::with_capacity(m);
        for k in 1..=m {
            let x = if k < i {
                self.p[k - 1]
            } else {
                self.p[k].saturating_add(1)
            };
            p.push(x.min(cap));
        }
        Work { n: m, u, p }
    }

    fn key(&self, cap: u8) -> StateKey {
        let bits = (u8::BITS - cap.leading_zeros()) as usize;
        let n = self.n;
        let count = n.saturating_sub(1) * n / 2 + n;
        let mut words = vec![0u64; (count * bits).div_ceil(64).max(1)];
        let mut pos = 0;
        let mut push = |x: u8| {
            let (w, off) = (pos / 64, pos % 64);
            words[w] |= (x as u64) << off;
            if off + bits > 64 {
                words[w + 1] |= (x as u64) >> (64 - off);
            }
            pos += bits;
        };
        for i in 1..n {
            for j in i..n {
                push(self.at(i, j));
            }
        }
        for &x in &self.p {
            push(x);
        }
        words.into_boxed_slice()
    }
}

/// Memoized evaluator for `H_n`. Values are truncated series whose
/// coefficients are a [`Tally`]: plain counts, or polynomials in `q` when a
/// branch weight is set.
pub struct SeriesEngine<V: Tally> {
    r: usize,
    cfg: SeriesConfig,
    weight: BranchWeight,
    degree_cap: Option<usize>,
    memo: LocalMemo<StateKey, Vec<V>>,
}

impl<V: Tally> SeriesEngine<V> {
    pub fn new(r: usize, cfg: SeriesConfig) -> Result<Self> {
        Self::weighted(r, cfg, BranchWeight::None, None)
    }

    pub fn weighted(
        r: usize,
        cfg: SeriesConfig,
        weight: BranchWeight,
        degree_cap: Option<usize>,
    ) -> Result<Self> {
        if r >= u8::MAX as usize / 2 {
            return Err(Error::invalid(format!("r = {r} is too large")));
        }
        let memo = LocalMemo::new(cfg.memory_cap, cfg.memoize);
        Ok(SeriesEngine {
            r,
            cfg,
            weight,
            degree_cap,
            memo,
        })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn stats(&self) -> CacheStats {
        self.memo.stats()
    }

    /// Coefficients of `t^0 .. t^r` in `H_n` at the zero state.
    pub fn evaluate(&mut self, n: usize) -> Result<Vec<V>> {
        if n > MAX_SERIES_N {
            return Err(Error::invalid(format!("n = {n} exceeds {MAX_SERIES_N}")));
        }
        let mut acc = vec![V::zero(); self.r + 1];
        self.call(&Work::zero(n), self.r, &mut acc, 0, 0)?;
        Ok(acc)
    }

    #[inline]
    fn slot(&self, n: usize, budget: usize) -> usize {
        n * (self.r + 1) + budget
    }

    /// Adds `t^tshift q^qshift H(state)` into `acc`, where the state's own
    /// budget is `budget`.
    fn call(
        &self,
        state: &Work,
        budget: usize,
        acc: &mut [V],
        tshift: usize,
        qshift: usize,
    ) -> Result<()> {
        let n = state.n;
        if n == 0 {
            self.memo.note_miss();
            if tshift < acc.len() {
                acc[tshift].add_shifted(&V::one(), qshift, self.degree_cap)?;
            }
            return Ok(());
        }
        let cap = budget as u8 + 1;
        let key = state.key(cap);
        let slot = self.slot(n, budget);
        let add = |acc: &mut [V], value: &[V]| -> Result<()> {
            let from = tshift.min(acc.len());
            for (dst, src) in acc[from..].iter_mut().zip(value) {
                dst.add_shifted(src, qshift, self.degree_cap)?;
            }
            Ok(())
        };
        if let Some(done) = self.memo.with_cached(slot, &key, |value| add(acc, value)) {
            return done;
        }
        self.memo.note_miss();
        let mut value = vec![V::zero(); budget + 1];
        for i in 1..=n {
            let e = state.exponent(i);
            let child_budget = if self.cfg.discard_branches {
                if e > budget {
                    continue;
                }
                budget - e
            } else {
                budget
            };
            let child = state.child(i, child_budget as u8 + 1);
            self.call(&child, child_budget, &mut value, e, self.weight.shift(n, i))?;
        }
        add(acc, &value)?;
        let heap = value.capacity() * std::mem::size_of::<V>()
            + value.iter().map(Tally::heap_bytes).sum::<usize>()
            + key.len() * 8;
        self.memo.insert(slot, key, value, heap)
    }
}

fn to_series<C: Coefficient>(coeffs: Vec<C>) -> TruncatedCounterSeries {
    TruncatedCounterSeries {
        coeffs: coeffs.iter().map(Coefficient::to_biguint).collect(),
    }
}

/// `s_n(1324, j)` for `j = 0..=r`.
pub fn series_counts(n: usize, r: usize) -> Result<TruncatedCounterSeries> {
    series_counts_with(n, r, SeriesConfig::default())
}

pub fn series_counts_with(n: usize, r: usize, cfg: SeriesConfig) -> Result<TruncatedCounterSeries> {
    let mut engine = SeriesEngine::<u128>::new(r, cfg)?;
    engine.evaluate(n).map(to_series)
}

/// [`series_counts`] cross-checked against exhaustive enumeration.
pub fn series_counts_checked(n: usize, r: usize) -> Result<TruncatedCounterSeries> {
    let series = series_counts(n, r)?;
    let oracle = brute_force_distribution(n, &Permutation::pattern_1324())?;
    for (j, got) in series.coeffs().iter().enumerate() {
        let want = oracle.get(&(j as u64)).copied().unwrap_or(0);
        if *got != BigUint::from(want) {
            return Err(Error::Inconsistent(format!(
                "s_{n}(1324, {j}): engine {got}, oracle {want}"
            )));
        }
    }
    Ok(series)
}

/// Unmemoized evaluation on full matrices through [`ExponentState::step`],
/// with no canonicalization and no branch discarding. Exponential; for
/// cross-checking at small `n`.
pub fn series_counts_reference(n: usize, r: usize) -> Result<TruncatedCounterSeries> {
    fn walk(state: &ExponentState, shift: u64, acc: &mut [u128]) -> Result<()> {
        if state.n() == 0 {
            if let Some(slot) = acc.get_mut(shift as usize) {
                *slot += 1;
            }
            return Ok(());
        }
        for i in 1..=state.n() {
            let e = state.branch_exponent(i)?;
            walk(&state.step(i)?, shift + e, acc)?;
        }
        Ok(())
    }
    if n > 9 {
        return Err(Error::resource(
            "the reference evaluation is limited to n <= 9",
        ));
    }
    let mut acc = vec![0u128; r + 1];
    walk(&ExponentState::zero(n, r), 0, &mut acc)?;
    Ok(to_series(acc))
}
