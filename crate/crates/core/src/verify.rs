//! Cross-validation of the engines against exhaustive enumeration and
//! against each other.
//!
//! The engines under test are passed in as closures so a deliberately broken
//! one can be substituted to check that the harness notices.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use num_bigint::BigUint;

use crate::avoider::{count_avoiders, AvoiderState};
use crate::error::{Error, Result};
use crate::fe_engine::{series_counts, ExponentState, TruncatedCounterSeries};
use crate::inversions::{
    avoiders_by_inversions, avoiders_by_noninversions, occurrences_by_inversions,
    InversionPolynomial,
};
use crate::perms::{all_permutations, weight_identity_check, Oracle, Permutation};

type SeriesFn = Box<dyn Fn(usize, usize) -> Result<TruncatedCounterSeries>>;
type CountFn = Box<dyn Fn(usize) -> Result<BigUint>>;
type PolyFn = Box<dyn Fn(usize) -> Result<InversionPolynomial>>;
type PolySeriesFn = Box<dyn Fn(usize, usize) -> Result<Vec<InversionPolynomial>>>;
type TransitionFn = Box<dyn Fn(&AvoiderState, usize) -> Result<AvoiderState>>;

/// The implementations being checked.
pub struct Engines {
    pub series: SeriesFn,
    pub avoiders: CountFn,
    pub by_inversions: PolyFn,
    pub by_noninversions: PolyFn,
    pub occurrences_by_inversions: PolySeriesFn,
    pub transition: TransitionFn,
}

impl Default for Engines {
    fn default() -> Self {
        Engines {
            series: Box::new(series_counts),
            avoiders: Box::new(count_avoiders),
            by_inversions: Box::new(avoiders_by_inversions),
            by_noninversions: Box::new(avoiders_by_noninversions),
            occurrences_by_inversions: Box::new(occurrences_by_inversions),
            transition: Box::new(|s, i| s.transition(i)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub nmax: usize,
    /// Largest number of occurrences compared against the oracle.
    pub rmax: usize,
    /// Largest `n` for the exhaustive weight identity check.
    pub identity_nmax: usize,
}

impl VerifyOptions {
    pub fn new(nmax: usize) -> Self {
        VerifyOptions {
            nmax,
            rmax: 3,
            identity_nmax: nmax.min(7),
        }
    }
}

/// Outcome of one group of checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: u64,
    /// The first mismatch, if any.
    pub counterexample: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "PASS {} ({} checks)", self.name, self.checks),
            Some(c) => write!(f, "FAIL {}: {c}", self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

struct Suite {
    report: SuiteReport,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite {
            report: SuiteReport {
                name,
                checks: 0,
                counterexample: None,
            },
        }
    }

    /// Records one comparison; only the first failure is kept.
    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.report.checks += 1;
        if !ok && self.report.counterexample.is_none() {
            self.report.counterexample = Some(describe());
        }
    }

    fn failed(&self) -> bool {
        self.report.counterexample.is_some()
    }

    /// Engine errors other than resource limits count as failures.
    fn attempt<T>(&mut self, value: Result<T>) -> Result<Option<T>> {
        match value {
            Ok(v) => Ok(Some(v)),
            Err(e @ Error::ResourceLimit(_)) => Err(e),
            Err(e) => {
                self.check(false, || format!("engine error: {e}"));
                Ok(None)
            }
        }
    }
}

fn as_big(x: u64) -> BigUint {
    BigUint::from(x)
}

/// Runs every suite for sizes up to `opts.nmax`.
pub fn verify(opts: &VerifyOptions, engines: &Engines) -> Result<VerifyReport> {
    let oracle = Oracle::default();
    if opts.nmax == 0 {
        return Err(Error::invalid("nmax must be at least 1"));
    }
    if opts.nmax > oracle.cap() {
        return Err(Error::resource(format!(
            "verification needs the exhaustive oracle, which stops at n = {}",
            oracle.cap()
        )));
    }
    let tau = Permutation::pattern_1324();
    let suites = vec![
        oracle_vs_series(opts, engines, &oracle, &tau)?,
        series_vs_avoiders(opts, engines)?,
        refined_vs_joint(opts, engines, &oracle, &tau)?,
        reversal_duality(opts, engines)?,
        weight_identity(opts),
        transition_soundness(opts, engines)?,
    ];
    Ok(VerifyReport { suites })
}

fn oracle_vs_series(
    opts: &VerifyOptions,
    engines: &Engines,
    oracle: &Oracle,
    tau: &Permutation,
) -> Result<SuiteReport> {
    let mut suite = Suite::new("oracle vs general engine");
    for n in 0..=opts.nmax {
        let dist = oracle.distribution(n, tau)?;
        for r in 0..=opts.rmax {
            let Some(series) = suite.attempt((engines.series)(n, r))? else {
                continue;
            };
            for j in 0..=r {
                let want = as_big(dist.get(&(j as u64)).copied().unwrap_or(0));
                let got = series.coeffs().get(j).cloned().unwrap_or_default();
                suite.check(got == want, || {
                    format!("s_{n}(1324, {j}) with r = {r}: engine {got}, oracle {want}")
                });
            }
        }
        if suite.failed() {
            break;
        }
    }
    Ok(suite.report)
}

fn series_vs_avoiders(opts: &VerifyOptions, engines: &Engines) -> Result<SuiteReport> {
    let mut suite = Suite::new("general engine vs avoider counter");
    for n in 1..=opts.nmax {
        let (Some(series), Some(fast)) = (
            suite.attempt((engines.series)(n, 0))?,
            suite.attempt((engines.avoiders)(n))?,
        ) else {
            continue;
        };
        let slow = series.coeffs()[0].clone();
        suite.check(slow == fast, || {
            format!("a_{n}: general engine {slow}, avoider counter {fast}")
        });
    }
    Ok(suite.report)
}

fn refined_vs_joint(
    opts: &VerifyOptions,
    engines: &Engines,
    oracle: &Oracle,
    tau: &Permutation,
) -> Result<SuiteReport> {
    let mut suite = Suite::new("inversion-refined counts vs oracle");
    for n in 1..=opts.nmax {
        let joint = oracle.joint(n, tau)?;
        let cell =
            |r: usize, k: usize| as_big(joint.get(&(r as u64, k as u64)).copied().unwrap_or(0));
        let max_inv = n * (n - 1) / 2;
        if let Some(poly) = suite.attempt((engines.by_inversions)(n))? {
            for k in 0..=max_inv.max(poly.coeffs().len().saturating_sub(1)) {
                let (got, want) = (poly.get(k), cell(0, k));
                suite.check(got == want, || {
                    format!(
                        "avoiders of length {n} with {k} inversions: engine {got}, oracle {want}"
                    )
                });
            }
        }
        if let Some(polys) = suite.attempt((engines.occurrences_by_inversions)(n, opts.rmax))? {
            for r in 0..=opts.rmax {
                let poly = polys
                    .get(r)
                    .cloned()
                    .unwrap_or(InversionPolynomial::new(Vec::new()));
                for k in 0..=max_inv {
                    let (got, want) = (poly.get(k), cell(r, k));
                    suite.check(got == want, || {
                        format!(
                            "length {n}, {r} occurrences, {k} inversions: engine {got}, oracle {want}"
                        )
                    });
                }
            }
        }
        if suite.failed() {
            break;
        }
    }
    Ok(suite.report)
}

fn reversal_duality(opts: &VerifyOptions, engines: &Engines) -> Result<SuiteReport> {
    let mut suite = Suite::new("inversion/non-inversion duality");
    for n in 1..=opts.nmax {
        let (Some(inv), Some(non)) = (
            suite.attempt((engines.by_inversions)(n))?,
            suite.attempt((engines.by_noninversions)(n))?,
        ) else {
            continue;
        };
        suite.check(non == inv.reversed(), || {
            format!(
                "length {n}: non-inversion row {:?} is not the reversed inversion row {:?}",
                non.coeffs(),
                inv.coeffs()
            )
        });
    }
    Ok(suite.report)
}

fn weight_identity(opts: &VerifyOptions) -> SuiteReport {
    let mut suite = Suite::new("weight substitution identity");
    for n in 1..=opts.identity_nmax {
        for pi in all_permutations(n) {
            let ok = weight_identity_check(&pi);
            suite.check(ok, || format!("identity fails for {pi}"));
            if !ok {
                return suite.report;
            }
        }
    }
    suite.report
}

/// What the full-matrix step does to the 0-1 matrix encoded by `state`,
/// read back as leftmost-1 columns and the number of leading zeros of `v`.
fn reference_transition(state: &AvoiderState, i: usize) -> Result<(usize, Vec<u8>, u64)> {
    let n = state.n();
    let u = state
        .b()
        .iter()
        .map(|&bj| (1..=n).map(|col| u32::from(col >= bj as usize)).collect())
        .collect();
    let v = (0..n).map(|j| u32::from(j >= state.k())).collect();
    let full = ExponentState::new(u, v, 0)?;
    let exponent = full.branch_exponent(i)?;
    let next = full.step(i)?;
    let m = n - 1;
    let k = next.v().iter().take_while(|&&x| x == 0).count();
    let b = next
        .u()
        .iter()
        .map(|row| row.iter().position(|&x| x > 0).map_or(m + 1, |p| p + 1) as u8)
        .collect();
    Ok((k, b, exponent))
}

fn transition_soundness(opts: &VerifyOptions, engines: &Engines) -> Result<SuiteReport> {
    let mut suite = Suite::new("avoider transitions vs full-matrix step");
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for n in 1..=opts.nmax {
        let root = AvoiderState::root(n)?;
        if seen.insert(root.clone().into_parts()) {
            queue.push_back(root);
        }
    }
    while let Some(state) = queue.pop_front() {
        let admissible = state.admissible_branches();
        for i in 1..=state.n() {
            let (k, b, exponent) = reference_transition(&state, i)?;
            let allowed = admissible.contains(&i);
            suite.check(allowed == (exponent == 0), || {
                format!("{state:?}: branch {i} admissibility disagrees with e_i = {exponent}")
            });
            if !allowed {
                continue;
            }
            let Some(next) = suite.attempt((engines.transition)(&state, i))? else {
                continue;
            };
            suite.check(next.k() == k && next.b() == b.as_slice(), || {
                format!(
                    "{state:?}, branch {i}: transition gives k = {}, b = {:?}; full matrix gives k = {k}, b = {b:?}",
                    next.k(),
                    next.b()
                )
            });
            let triangular = next.b().iter().enumerate().all(|(j, &x)| x as usize > j);
            suite.check(triangular, || {
                format!("{next:?} has a 1 below the diagonal")
            });
            if next.n() >= 2 && seen.insert(next.clone().into_parts()) {
                queue.push_back(next);
            }
        }
        if suite.failed() {
            break;
        }
    }
    Ok(suite.report)
}
