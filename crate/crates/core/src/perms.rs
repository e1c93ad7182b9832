//! Ground-truth permutation machinery.
//!
//! Everything here is deliberately simple: these routines are the oracle the
//! fast engines are checked against, so they follow the definitions directly
//! rather than trying to be clever.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest `n` the exhaustive oracle accepts unless configured otherwise.
pub const DEFAULT_ORACLE_CAP: usize = 10;

/// A permutation of `1..=n`, stored with one-indexed values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    entries: Vec<u32>,
}

impl Permutation {
    /// Builds a permutation, checking that `entries` is a rearrangement of `1..=n`.
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        let n = entries.len();
        let mut seen = vec![false; n + 1];
        for &e in &entries {
            let e = e as usize;
            if e == 0 || e > n {
                return Err(Error::invalid(format!("value {e} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::invalid(format!("value {e} repeated")));
            }
        }
        Ok(Permutation { entries })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            entries: (1..=n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.entries
    }

    pub fn reversed(&self) -> Self {
        let mut entries = self.entries.clone();
        entries.reverse();
        Permutation { entries }
    }

    /// The pattern 1324.
    pub fn pattern_1324() -> Self {
        Permutation {
            entries: vec![1, 3, 2, 4],
        }
    }

    /// Steps to the lexicographically next permutation in place. Returns
    /// `false` (leaving the entries sorted descending) once exhausted.
    fn advance(&mut self) -> bool {
        next_permutation(&mut self.entries)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let compact = self.entries.len() < 10;
        for (idx, e) in self.entries.iter().enumerate() {
            if idx > 0 && !compact {
                f.write_str(" ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Accepts either a run of digits (`"1324"`, only for n < 10) or values
    /// separated by whitespace or commas (`"1 3 2 4"`, `"10,2,..."`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let entries: Vec<u32> = if s.contains(|c: char| c.is_whitespace() || c == ',') {
            s.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| Error::invalid(format!("bad entry {t:?}")))
                })
                .collect::<Result<_>>()?
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .ok_or_else(|| Error::invalid(format!("bad digit {c:?}")))
                })
                .collect::<Result<_>>()?
        };
        Permutation::new(entries)
    }
}

fn next_permutation(v: &mut [u32]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// The permutation order-isomorphic to `seq`.
pub fn reduce(seq: &[i64]) -> Result<Permutation> {
    let mut order: Vec<usize> = (0..seq.len()).collect();
    order.sort_by_key(|&idx| seq[idx]);
    if order.windows(2).any(|w| seq[w[0]] == seq[w[1]]) {
        return Err(Error::invalid("sequence has duplicate entries"));
    }
    let mut entries = vec![0u32; seq.len()];
    for (rank, idx) in order.into_iter().enumerate() {
        entries[idx] = rank as u32 + 1;
    }
    Ok(Permutation { entries })
}

/// Number of index subsequences of `pi` order-isomorphic to `tau`.
pub fn count_occurrences(pi: &Permutation, tau: &Permutation) -> u64 {
    let k = tau.len();
    if k == 0 || k > pi.len() {
        return 0;
    }
    let mut chosen = Vec::with_capacity(k);
    extend_occurrence(pi.as_slice(), tau.as_slice(), 0, &mut chosen)
}

/// Backtracking over increasing index tuples; a partial tuple survives only
/// while its values are ordered exactly like the matching prefix of `tau`.
fn extend_occurrence(pi: &[u32], tau: &[u32], start: usize, chosen: &mut Vec<u32>) -> u64 {
    let depth = chosen.len();
    if depth == tau.len() {
        return 1;
    }
    let remaining = tau.len() - depth;
    let mut total = 0;
    for pos in start..=pi.len() - remaining {
        let value = pi[pos];
        let consistent = chosen
            .iter()
            .zip(tau)
            .all(|(&prev, &t)| (prev < value) == (t < tau[depth]));
        if consistent {
            chosen.push(value);
            total += extend_occurrence(pi, tau, pos + 1, chosen);
            chosen.pop();
        }
    }
    total
}

pub fn inversions(pi: &Permutation) -> u64 {
    let v = pi.as_slice();
    let mut count = 0;
    for a in 0..v.len() {
        for b in a + 1..v.len() {
            if v[a] > v[b] {
                count += 1;
            }
        }
    }
    count
}

/// Exhaustive enumeration of `S_n`, bounded by a cap on `n`.
#[derive(Clone, Copy, Debug)]
pub struct Oracle {
    cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl Oracle {
    pub fn with_cap(cap: usize) -> Self {
        Oracle { cap }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.cap {
            return Err(Error::resource(format!(
                "brute force over S_{n} exceeds the oracle cap of {}",
                self.cap
            )));
        }
        Ok(())
    }

    /// Calls `visit` on every permutation of length `n`. The work is split by
    /// first entry; each block is visited in lexicographic order.
    fn fold<T, F, M>(&self, n: usize, init: fn() -> T, visit: F, merge: M) -> Result<T>
    where
        T: Send,
        F: Fn(&mut T, &Permutation) + Sync,
        M: Fn(T, T) -> T + Sync + Send,
    {
        self.check(n)?;
        if n == 0 {
            let mut acc = init();
            visit(&mut acc, &Permutation::identity(0));
            return Ok(acc);
        }
        let blocks: Vec<T> = (1..=n as u32)
            .into_par_iter()
            .map(|first| {
                let mut acc = init();
                let rest: Vec<u32> = (1..=n as u32).filter(|&v| v != first).collect();
                let mut perm = Permutation {
                    entries: std::iter::once(first).chain(rest).collect(),
                };
                loop {
                    visit(&mut acc, &perm);
                    // only permute the tail so the first entry stays fixed
                    if !next_permutation(&mut perm.entries[1..]) {
                        break;
                    }
                }
                acc
            })
            .collect();
        Ok(blocks.into_iter().fold(init(), merge))
    }

    /// `m[r]` = number of permutations of length `n` with exactly `r`
    /// occurrences of `tau`. Only classes that occur are present.
    pub fn distribution(&self, n: usize, tau: &Permutation) -> Result<BTreeMap<u64, u64>> {
        self.fold(
            n,
            BTreeMap::new,
            |acc, pi| *acc.entry(count_occurrences(pi, tau)).or_insert(0) += 1,
            merge_counts,
        )
    }

    /// `m[(r, k)]` = number of permutations with `r` occurrences of `tau` and
    /// `k` inversions.
    pub fn joint(&self, n: usize, tau: &Permutation) -> Result<BTreeMap<(u64, u64), u64>> {
        self.fold(
            n,
            BTreeMap::new,
            |acc, pi| {
                *acc.entry((count_occurrences(pi, tau), inversions(pi)))
                    .or_insert(0) += 1
            },
            merge_counts,
        )
    }

    /// Runs `check` over all of `S_n`, returning the first permutation (in
    /// block order) for which it fails.
    pub fn find_counterexample<F>(&self, n: usize, check: F) -> Result<Option<Permutation>>
    where
        F: Fn(&Permutation) -> bool + Sync,
    {
        self.fold(
            n,
            || None,
            |acc: &mut Option<Permutation>, pi| {
                if acc.is_none() && !check(pi) {
                    *acc = Some(pi.clone());
                }
            },
            |a, b| a.or(b),
        )
    }
}

fn merge_counts<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

pub fn brute_force_distribution(n: usize, tau: &Permutation) -> Result<BTreeMap<u64, u64>> {
    Oracle::default().distribution(n, tau)
}

pub fn brute_force_joint(n: usize, tau: &Permutation) -> Result<BTreeMap<(u64, u64), u64>> {
    Oracle::default().joint(n, tau)
}

/// Exponents of the monomial `weight(pi)`: the power of `t` and of each
/// catalytic variable `x_{i,j}` (i <= j) and `y_{i,j}` (j <= i). Zero
/// exponents are omitted from the maps.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightExponents {
    pub t_exp: u64,
    pub x_exp: BTreeMap<(usize, usize), u64>,
    pub y_exp: BTreeMap<(usize, usize), u64>,
}

impl WeightExponents {
    fn bump_x(&mut self, key: (usize, usize), by: u64) {
        debug_assert!(key.0 <= key.1);
        if by > 0 {
            *self.x_exp.entry(key).or_insert(0) += by;
        }
    }

    fn bump_y(&mut self, key: (usize, usize), by: u64) {
        debug_assert!(key.1 <= key.0);
        if by > 0 {
            *self.y_exp.entry(key).or_insert(0) += by;
        }
    }
}

/// `x_{i,j}` counts pairs `a < b` with `pi_a = i < pi_b` and `pi_b > j`;
/// `y_{i,j}` counts triples `a < b < c` with `pi_b < pi_a = i < pi_c` and
/// `pi_b >= j`; `t` counts occurrences of 1324.
pub fn weight_exponents(pi: &Permutation) -> WeightExponents {
    let v: Vec<usize> = pi.as_slice().iter().map(|&e| e as usize).collect();
    let n = v.len();
    let mut w = WeightExponents {
        t_exp: count_occurrences(pi, &Permutation::pattern_1324()),
        ..Default::default()
    };
    for a in 0..n {
        for b in a + 1..n {
            if v[a] < v[b] {
                for j in v[a]..v[b] {
                    w.bump_x((v[a], j), 1);
                }
            }
            if v[b] < v[a] {
                let above = (b + 1..n).filter(|&c| v[c] > v[a]).count() as u64;
                for j in 1..=v[b] {
                    w.bump_y((v[a], j), above);
                }
            }
        }
    }
    w
}

/// Checks the first-entry decomposition of `weight(pi)`: with `i = pi_1`,
/// the weight equals `x_{i,i}^{n-i} ... x_{i,n-1}^1` times the weight of
/// `red(pi_2 ... pi_n)` after the substitution set is applied. Works on
/// exponent maps only.
pub fn weight_identity_check(pi: &Permutation) -> bool {
    let n = pi.len();
    if n == 0 {
        return true;
    }
    let i = pi.as_slice()[0] as usize;
    let tail: Vec<i64> = pi.as_slice()[1..].iter().map(|&e| e as i64).collect();
    let reduced = reduce(&tail).expect("tail of a permutation has distinct entries");
    let inner = weight_exponents(&reduced);

    let mut rhs = WeightExponents {
        t_exp: inner.t_exp,
        ..Default::default()
    };
    for c in i..n {
        rhs.bump_x((i, c), (n - c) as u64);
    }
    for (&(b, c), &e) in &inner.x_exp {
        if b >= i {
            rhs.bump_x((b + 1, c + 1), e);
        } else if c >= i {
            rhs.bump_x((b, c + 1), e);
        } else if c + 1 == i {
            for l in 1..=b {
                rhs.bump_y((i, l), e);
            }
            rhs.bump_x((b, c), e);
            rhs.bump_x((b, c + 1), e);
        } else {
            rhs.bump_x((b, c), e);
        }
    }
    for (&(b, c), &e) in &inner.y_exp {
        if b < i {
            rhs.bump_y((b, c), e);
        } else if c < i {
            rhs.bump_y((b + 1, c), e);
        } else if c > i {
            rhs.bump_y((b + 1, c + 1), e);
        } else {
            rhs.t_exp += e;
            rhs.bump_y((b + 1, c), e);
            rhs.bump_y((b + 1, c + 1), e);
        }
    }
    rhs == weight_exponents(pi)
}

/// All permutations of length `n` in lexicographic order. Intended for small
/// `n` in tests and verification.
pub fn all_permutations(n: usize) -> impl Iterator<Item = Permutation> {
    let mut current = Some(Permutation::identity(n));
    std::iter::from_fn(move || {
        let out = current.take()?;
        let mut next = out.clone();
        if next.advance() {
            current = Some(next);
        }
        Some(out)
    })
}
