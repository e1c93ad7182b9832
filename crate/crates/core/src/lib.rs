//! Enumeration of permutations by the number of occurrences of the pattern
//! 1324.
//!
//! - [`perms`]: permutations and the exhaustive oracle.
//! - [`fe_engine`]: counts with up to `r` occurrences from the exponent-form
//!   recurrence.
//! - [`avoider`]: the memoized counter for avoiders (`r = 0`).
//! - [`inversions`]: the same counts refined by inversion number.
//! - [`asymptotics`]: empirical `mu^n n^theta` fits.
//! - [`verify`]: cross-validation of all of the above.

pub mod asymptotics;
pub mod avoider;
pub mod error;
pub mod fe_engine;
pub mod fixtures;
pub mod inversions;
mod memo;
pub mod perms;
pub mod tally;
pub mod verify;

pub use num_bigint::BigUint;

pub use asymptotics::{fit_least_squares, fit_profile, fit_three_term, FitMethod, FitResult, Real};
pub use avoider::{
    count_avoiders, count_avoiders_upto, count_calls_uncached, AvoiderConfig, AvoiderCounter,
    AvoiderState, BigCounter, Precision, SizeRecord, UptoRun,
};
pub use error::{Error, Result};
pub use fe_engine::{
    series_counts, series_counts_checked, ExponentState, SeriesConfig, SeriesEngine,
    TruncatedCounterSeries,
};
pub use fixtures::{bundled_a1324, load_sequence, parse_sequence};
pub use inversions::{
    avoiders_by_inversions, avoiders_by_noninversions, check_monotonicity, inversion_table,
    monotonicity_violations, occurrences_by_inversions, InversionPolynomial, InversionTable,
    Violation,
};
pub use memo::{CacheStats, DEFAULT_MEMORY_CAP};
pub use perms::{
    brute_force_distribution, brute_force_joint, count_occurrences, inversions, reduce, Permutation,
};
pub use verify::{verify, Engines, SuiteReport, VerifyOptions, VerifyReport};
