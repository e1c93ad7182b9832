//! Avoider and occurrence counts refined by the number of inversions.
//!
//! Both engines already attach a branch index to every step; choosing
//! branch `i` at size `n` puts `i - 1` smaller entries after the first one,
//! so weighting it by `q^(i-1)` tracks inversions and `q^(n-i)` tracks
//! non-inversions.

use num_bigint::BigUint;

use crate::avoider::{with_fallback, AvoiderConfig, AvoiderEngine, BranchWeight, KEY_WIDTH};
use crate::error::{Error, Result};
use crate::fe_engine::{SeriesConfig, SeriesEngine};
use crate::tally::{Coefficient, QPoly};

/// Counts indexed by inversion number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InversionPolynomial {
    coeffs: Vec<BigUint>,
}

impl InversionPolynomial {
    pub fn new(coeffs: Vec<BigUint>) -> Self {
        InversionPolynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[BigUint] {
        &self.coeffs
    }

    /// Coefficient of `q^k`, zero past the end.
    pub fn get(&self, k: usize) -> BigUint {
        self.coeffs.get(k).cloned().unwrap_or_default()
    }

    pub fn total(&self) -> BigUint {
        self.coeffs.iter().sum()
    }

    pub fn reversed(&self) -> Self {
        InversionPolynomial {
            coeffs: self.coeffs.iter().rev().cloned().collect(),
        }
    }

    fn from_qpoly<C: Coefficient>(poly: QPoly<C>, len: usize) -> Self {
        let mut coeffs: Vec<BigUint> = poly.coeffs().iter().map(Coefficient::to_biguint).collect();
        coeffs.resize(len, BigUint::default());
        InversionPolynomial { coeffs }
    }
}

fn max_inversions(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn row_len(n: usize, kmax: Option<usize>) -> usize {
    match kmax {
        Some(k) => k.min(max_inversions(n)) + 1,
        None => max_inversions(n) + 1,
    }
}

/// `T(n, k)` for `n = 1..=nmax`, possibly truncated at degree `kmax`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InversionTable {
    rows: Vec<InversionPolynomial>,
    kmax: Option<usize>,
}

impl InversionTable {
    pub fn nmax(&self) -> usize {
        self.rows.len()
    }

    pub fn kmax(&self) -> Option<usize> {
        self.kmax
    }

    /// The polynomial for length `n` (1-indexed).
    pub fn row(&self, n: usize) -> &InversionPolynomial {
        &self.rows[n - 1]
    }

    pub fn get(&self, n: usize, k: usize) -> BigUint {
        self.row(n).get(k)
    }

    /// `(n, k, T(n, k))` in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &BigUint)> {
        self.rows.iter().enumerate().flat_map(|(idx, row)| {
            row.coeffs()
                .iter()
                .enumerate()
                .map(move |(k, c)| (idx + 1, k, c))
        })
    }
}

fn avoider_rows<C: Coefficient>(
    cfg: &AvoiderConfig,
    weight: BranchWeight,
    sizes: std::ops::RangeInclusive<usize>,
    kmax: Option<usize>,
) -> Result<Vec<InversionPolynomial>> {
    let mut engine = AvoiderEngine::<QPoly<C>>::new(cfg, weight, kmax)?;
    sizes
        .map(|n| {
            let poly = engine.evaluate(n)?;
            Ok(InversionPolynomial::from_qpoly(poly, row_len(n, kmax)))
        })
        .collect()
}

fn rows_with_fallback(
    cfg: &AvoiderConfig,
    weight: BranchWeight,
    sizes: std::ops::RangeInclusive<usize>,
    kmax: Option<usize>,
) -> Result<Vec<InversionPolynomial>> {
    with_fallback(
        || avoider_rows::<u128>(cfg, weight, sizes.clone(), kmax),
        || avoider_rows::<BigUint>(cfg, weight, sizes.clone(), kmax),
    )
}

fn single(n: usize, weight: BranchWeight) -> Result<InversionPolynomial> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut rows = rows_with_fallback(&AvoiderConfig::default(), weight, n..=n, None)?;
    Ok(rows.remove(0))
}

/// Number of 1324-avoiders of length `n` with each inversion count.
pub fn avoiders_by_inversions(n: usize) -> Result<InversionPolynomial> {
    single(n, BranchWeight::Inversions)
}

/// Number of 1324-avoiders of length `n` with each non-inversion count.
pub fn avoiders_by_noninversions(n: usize) -> Result<InversionPolynomial> {
    single(n, BranchWeight::NonInversions)
}

/// Rows `1..=nmax` of `T(n, k)`, computed with one shared cache. With
/// `kmax`, every polynomial is truncated above `q^kmax` during the
/// recursion.
pub fn inversion_table(
    nmax: usize,
    kmax: Option<usize>,
    cfg: &AvoiderConfig,
) -> Result<InversionTable> {
    if nmax == 0 {
        return Err(Error::invalid("nmax must be at least 1"));
    }
    if nmax > KEY_WIDTH {
        return Err(Error::invalid(format!(
            "n = {nmax} exceeds key width {KEY_WIDTH}"
        )));
    }
    let rows = rows_with_fallback(cfg, BranchWeight::Inversions, 1..=nmax, kmax)?;
    Ok(InversionTable { rows, kmax })
}

/// Element `j` counts permutations with exactly `j` occurrences of 1324 by
/// inversion number, for `j = 0..=r`.
pub fn occurrences_by_inversions(n: usize, r: usize) -> Result<Vec<InversionPolynomial>> {
    occurrences_by_inversions_with(n, r, SeriesConfig::default())
}

pub fn occurrences_by_inversions_with(
    n: usize,
    r: usize,
    cfg: SeriesConfig,
) -> Result<Vec<InversionPolynomial>> {
    fn run<C: Coefficient>(
        n: usize,
        r: usize,
        cfg: SeriesConfig,
    ) -> Result<Vec<InversionPolynomial>> {
        let mut engine =
            SeriesEngine::<QPoly<C>>::weighted(r, cfg, BranchWeight::Inversions, None)?;
        let len = row_len(n, None);
        Ok(engine
            .evaluate(n)?
            .into_iter()
            .map(|p| InversionPolynomial::from_qpoly(p, len))
            .collect())
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    with_fallback(
        || run::<u128>(n, r, cfg.clone()),
        || run::<BigUint>(n, r, cfg.clone()),
    )
}

/// A place where `T(n, k) > T(n + 1, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub n: usize,
    pub k: usize,
    pub at_n: BigUint,
    pub at_next: BigUint,
}

/// Every `(n, k)` with `k <= kmax`, `n < nmax` where the table decreases
/// from `n` to `n + 1`.
pub fn monotonicity_violations(table: &InversionTable, kmax: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for n in 1..table.nmax() {
        for k in 0..=kmax {
            let (here, next) = (table.get(n, k), table.get(n + 1, k));
            if here > next {
                out.push(Violation {
                    n,
                    k,
                    at_n: here,
                    at_next: next,
                });
            }
        }
    }
    out
}

/// Checks that the number of avoiders with `k` inversions never decreases
/// in `n`, over `n <= nmax` and `k <= kmax`. Returns the violations.
pub fn check_monotonicity(nmax: usize, kmax: usize) -> Result<Vec<Violation>> {
    check_monotonicity_with(nmax, kmax, &AvoiderConfig::default())
}

pub fn check_monotonicity_with(
    nmax: usize,
    kmax: usize,
    cfg: &AvoiderConfig,
) -> Result<Vec<Violation>> {
    if nmax < 2 {
        return Err(Error::invalid("nmax must be at least 2"));
    }
    let table = inversion_table(nmax, Some(kmax), cfg)?;
    Ok(monotonicity_violations(&table, kmax))
}
