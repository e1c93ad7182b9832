//! Command-line front end. [`run`] parses arguments, writes data to `out`
//! and diagnostics to `err`, and returns the process exit code.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use perm1324::asymptotics::{format_sig10, to_reals};
use perm1324::{
    count_calls_uncached, fit_least_squares, fit_profile, inversion_table, load_sequence,
    monotonicity_violations, parse_sequence, verify, AvoiderConfig, AvoiderCounter, BigUint,
    CacheStats, Engines, Error, FitResult, Precision, SeriesConfig, SeriesEngine, VerifyOptions,
    DEFAULT_MEMORY_CAP,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_RESOURCE_CAP: i32 = 3;

/// Environment variable holding the default memory cap.
pub const MEMORY_CAP_ENV: &str = "PERM1324_MEMORY_CAP";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    ThreeTerm,
    LeastSquares,
}

#[derive(Debug, Parser)]
#[command(
    name = "perm1324",
    version,
    about = "Count permutations by occurrences of the pattern 1324"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Memo table budget, e.g. 4G, 512M or a byte count.
    #[arg(long, global = true, env = MEMORY_CAP_ENV, value_parser = parse_bytes)]
    pub memory_cap: Option<usize>,

    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Sequence file for `fit` ("-" reads standard input).
    #[arg(long, global = true)]
    pub fixture: Option<PathBuf>,

    /// Per-n progress and peak memory on stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    /// Cache statistics on stderr after the run.
    #[arg(long, global = true)]
    pub verbose_cache: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// a_n, the number of 1324-avoiders, for n = 1..=nmax.
    Avoid {
        #[arg(long)]
        nmax: usize,
    },
    /// Permutations with exactly j occurrences, for j <= r and n = 1..=nmax.
    Occur {
        #[arg(long)]
        nmax: usize,
        #[arg(long, default_value_t = 0)]
        r: usize,
    },
    /// Avoiders by inversion number, T(n, k).
    Invtable {
        #[arg(long)]
        nmax: usize,
        #[arg(long)]
        kmax: Option<usize>,
        /// Check that T(n, k) never decreases in n.
        #[arg(long)]
        check_monotone: bool,
    },
    /// Empirical mu and theta estimates from a sequence file.
    Fit {
        #[arg(long)]
        nmin: Option<usize>,
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long, value_enum, default_value_t = FitKind::ThreeTerm)]
        method: FitKind,
        /// Terms per least-squares window.
        #[arg(long, default_value_t = 8)]
        window: usize,
    },
    /// Cross-check every engine against exhaustive enumeration.
    Verify {
        #[arg(long)]
        nmax: usize,
    },
    /// Avoider counts with cache statistics per n.
    Stats {
        #[arg(long)]
        nmax: usize,
    },
}

/// Parses `123`, `64K`, `512M`, `4G` (binary multiples).
pub fn parse_bytes(s: &str) -> Result<usize, String> {
    let s = s.trim();
    let (digits, shift) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 10),
        Some('M') => (&s[..s.len() - 1], 20),
        Some('G') => (&s[..s.len() - 1], 30),
        Some('T') => (&s[..s.len() - 1], 40),
        _ => (s, 0),
    };
    let value: usize = digits
        .parse()
        .map_err(|_| format!("not a byte count: {s:?}"))?;
    let bytes = value
        .checked_mul(1usize << shift)
        .ok_or_else(|| format!("byte count too large: {s:?}"))?;
    if bytes == 0 {
        return Err("the memory cap must be positive".into());
    }
    Ok(bytes)
}

/// Standard streams, swappable in tests.
pub struct Io<'a> {
    pub input: &'a mut dyn Read,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// A value in an output table.
#[derive(Clone, Debug)]
enum Cell {
    /// Small index, emitted as a JSON number.
    Index(usize),
    /// Count of any size, emitted as a JSON string.
    Count(String),
    /// Real estimate, printed with 10 significant digits.
    Real(f64),
    Empty,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Index(x) => x.to_string(),
            Cell::Count(s) => s.clone(),
            Cell::Real(x) => format_sig10(*x),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Index(x) => json!(x),
            Cell::Count(s) => json!(s),
            Cell::Real(x) => format_sig10(*x)
                .parse::<f64>()
                .map_or(Value::Null, |v| json!(v)),
            Cell::Empty => Value::Null,
        }
    }
}

fn count(x: impl ToString) -> Cell {
    Cell::Count(x.to_string())
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }

    /// CSV has no header line; plain text is a header plus right-aligned
    /// columns.
    fn write_text(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        let texts: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::text).collect())
            .collect();
        match format {
            Format::Csv => {
                for row in &texts {
                    writeln!(out, "{}", row.join(","))?;
                }
            }
            Format::Plain | Format::Json => {
                let widths: Vec<usize> = (0..self.columns.len())
                    .map(|c| {
                        texts
                            .iter()
                            .map(|r| r[c].len())
                            .chain([self.columns[c].len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: Vec<&str>| {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(s, w)| format!("{s:>w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                };
                writeln!(out, "{}", line(self.columns.clone()))?;
                for row in &texts {
                    writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
                }
            }
        }
        Ok(())
    }
}

/// What a subcommand produced.
struct Outcome {
    table: Table,
    /// Extra top-level JSON fields.
    json_extra: Vec<(&'static str, Value)>,
    /// Lines appended after the table in text formats.
    trailer: Vec<String>,
    /// Error that cut the run short, after `table` was filled with what
    /// finished.
    aborted: Option<Error>,
    verify_failed: bool,
}

impl Outcome {
    fn complete(table: Table) -> Self {
        Outcome {
            table,
            json_extra: Vec::new(),
            trailer: Vec::new(),
            aborted: None,
            verify_failed: false,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } => EXIT_INVALID_INPUT,
        Error::ResourceLimit(_) | Error::Overflow => EXIT_RESOURCE_CAP,
        Error::Inconsistent(_) => EXIT_VERIFY_FAILED,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => execute(&cfg, io, &Engines::default()),
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID_INPUT
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            let target: &mut dyn Write = if e.use_stderr() { io.err } else { io.out };
            let _ = target.write_all(rendered.as_bytes());
            code
        }
    }
}

/// Runs a parsed configuration. `engines` is what `verify` checks.
pub fn execute(cfg: &RunConfig, io: Io<'_>, engines: &Engines) -> i32 {
    let start = Instant::now();
    let result = dispatch(cfg, io.input, io.err, engines);
    let code = match result {
        Ok(outcome) => match emit(cfg.format, &outcome, io.out) {
            Ok(()) => {
                if let Some(e) = &outcome.aborted {
                    let _ = writeln!(io.err, "error: {e}");
                    exit_code(e)
                } else if outcome.verify_failed {
                    EXIT_VERIFY_FAILED
                } else {
                    EXIT_OK
                }
            }
            Err(e) => {
                let _ = writeln!(io.err, "error: cannot write output: {e}");
                EXIT_VERIFY_FAILED
            }
        },
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            exit_code(&e)
        }
    };
    if cfg.verbose {
        let _ = write!(io.err, "elapsed_ms={}", start.elapsed().as_millis());
        if let Some(kib) = peak_rss_kib() {
            let _ = write!(io.err, " peak_rss_kib={kib}");
        }
        let _ = writeln!(io.err);
    }
    code
}

/// Peak resident set size of this process, where the OS reports it.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn emit(format: Format, outcome: &Outcome, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("rows".into(), outcome.table.json_rows());
            for (k, v) in &outcome.json_extra {
                obj.insert(k.to_string(), v.clone());
            }
            if let Some(e) = &outcome.aborted {
                obj.insert("aborted".into(), json!(e.to_string()));
            }
            writeln!(out, "{}", Value::Object(obj))
        }
        _ => {
            outcome.table.write_text(format, out)?;
            for line in &outcome.trailer {
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
    }
}

fn positive(name: &str, value: usize) -> Result<(), Error> {
    if value == 0 {
        return Err(Error::InvalidInput(format!("--{name} must be at least 1")));
    }
    Ok(())
}

fn avoider_config(cfg: &RunConfig) -> Result<AvoiderConfig, Error> {
    positive("threads", cfg.threads)?;
    Ok(AvoiderConfig {
        memory_cap: cfg.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP),
        threads: cfg.threads,
        ..AvoiderConfig::default()
    })
}

fn dispatch(
    cfg: &RunConfig,
    input: &mut dyn Read,
    err: &mut dyn Write,
    engines: &Engines,
) -> Result<Outcome, Error> {
    match &cfg.command {
        Command::Avoid { nmax } => run_avoid(cfg, *nmax, err, false),
        Command::Stats { nmax } => run_avoid(cfg, *nmax, err, true),
        Command::Occur { nmax, r } => run_occur(cfg, *nmax, *r, err),
        Command::Invtable {
            nmax,
            kmax,
            check_monotone,
        } => run_invtable(cfg, *nmax, *kmax, *check_monotone),
        Command::Fit {
            nmin,
            nmax,
            method,
            window,
        } => run_fit(cfg, *nmin, *nmax, *method, *window, input),
        Command::Verify { nmax } => run_verify(*nmax, engines),
    }
}

fn stats_line(label: &str, s: &CacheStats) -> String {
    format!(
        "{label} hits={} misses={} entries={} peak_bytes={}",
        s.hits, s.misses, s.entries, s.peak_bytes
    )
}

fn run_avoid(
    cfg: &RunConfig,
    nmax: usize,
    err: &mut dyn Write,
    with_stats: bool,
) -> Result<Outcome, Error> {
    positive("nmax", nmax)?;
    let mut counter = AvoiderCounter::new(avoider_config(cfg)?, Precision::Auto)?;
    let verbose = cfg.verbose;
    let run = counter.count_upto(nmax, |rec| {
        if verbose {
            let _ = writeln!(
                err,
                "n={} a_n={} elapsed_ms={:.3} entries={}",
                rec.n,
                rec.count,
                rec.elapsed.as_secs_f64() * 1e3,
                rec.stats.entries
            );
        }
    });
    let reproducible = counter.is_reproducible();
    if cfg.verbose_cache || with_stats {
        let label = if reproducible {
            ""
        } else {
            " (multi-threaded, not reproducible)"
        };
        let _ = writeln!(
            err,
            "{}",
            stats_line(&format!("cache per-run{label}:"), &counter.cache_report())
        );
        if cfg.verbose_cache {
            for rec in &run.records {
                let _ = writeln!(
                    err,
                    "{}",
                    stats_line(&format!("cache n={}:", rec.n), &rec.delta)
                );
            }
        }
    }
    let mut table = if with_stats {
        Table::new(vec![
            "n",
            "a_n",
            "hits",
            "misses",
            "entries",
            "peak_bytes",
            "delta_hits",
            "delta_misses",
            "calls_uncached",
        ])
    } else {
        Table::new(vec!["n", "a_n"])
    };
    for rec in &run.records {
        let mut row = vec![Cell::Index(rec.n), count(&rec.count)];
        if with_stats {
            let calls = if rec.n <= perm1324::avoider::UNCACHED_CALLS_MAX_N {
                count(count_calls_uncached(rec.n)?)
            } else {
                Cell::Empty
            };
            row.extend([
                count(rec.stats.hits),
                count(rec.stats.misses),
                count(rec.stats.entries),
                count(rec.stats.peak_bytes),
                count(rec.delta.hits),
                count(rec.delta.misses),
                calls,
            ]);
        }
        table.rows.push(row);
    }
    let mut outcome = Outcome::complete(table);
    if with_stats {
        outcome
            .json_extra
            .push(("reproducible", json!(reproducible)));
    }
    outcome.aborted = run.aborted;
    Ok(outcome)
}

fn run_occur(
    cfg: &RunConfig,
    nmax: usize,
    r: usize,
    err: &mut dyn Write,
) -> Result<Outcome, Error> {
    positive("nmax", nmax)?;
    if nmax > perm1324::fe_engine::MAX_SERIES_N {
        return Err(Error::InvalidInput(format!(
            "--nmax {nmax} exceeds {}",
            perm1324::fe_engine::MAX_SERIES_N
        )));
    }
    let series_cfg = SeriesConfig {
        memory_cap: cfg.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP),
        ..SeriesConfig::default()
    };
    let mut engine = SeriesEngine::<u128>::new(r, series_cfg)?;
    let mut outcome = Outcome::complete(Table::new(vec!["n", "j", "count"]));
    for n in 1..=nmax {
        let before = engine.stats();
        let started = Instant::now();
        match engine.evaluate(n) {
            Ok(coeffs) => {
                for (j, c) in coeffs.iter().enumerate() {
                    outcome
                        .table
                        .rows
                        .push(vec![Cell::Index(n), Cell::Index(j), count(c)]);
                }
                if cfg.verbose {
                    let _ = writeln!(
                        err,
                        "n={n} elapsed_ms={:.3} entries={}",
                        started.elapsed().as_secs_f64() * 1e3,
                        engine.stats().entries
                    );
                }
                if cfg.verbose_cache {
                    let delta = engine.stats().since(&before);
                    let _ = writeln!(err, "{}", stats_line(&format!("cache n={n}:"), &delta));
                }
            }
            Err(e @ Error::ResourceLimit(_)) => {
                outcome.aborted = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if cfg.verbose_cache {
        let _ = writeln!(err, "{}", stats_line("cache per-run:", &engine.stats()));
    }
    Ok(outcome)
}

fn run_invtable(
    cfg: &RunConfig,
    nmax: usize,
    kmax: Option<usize>,
    check: bool,
) -> Result<Outcome, Error> {
    positive("nmax", nmax)?;
    if check && nmax < 2 {
        return Err(Error::InvalidInput(
            "--check-monotone needs --nmax of at least 2".into(),
        ));
    }
    let table = inversion_table(nmax, kmax, &avoider_config(cfg)?)?;
    let mut out = Table::new(vec!["n", "k", "count"]);
    for (n, k, c) in table.entries() {
        out.rows
            .push(vec![Cell::Index(n), Cell::Index(k), count(c)]);
    }
    let mut outcome = Outcome::complete(out);
    if check {
        let k_limit = kmax.unwrap_or(nmax * (nmax - 1) / 2);
        let violations = monotonicity_violations(&table, k_limit);
        let status = if violations.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        outcome.trailer.push(status.to_string());
        let mut listed = Vec::new();
        for v in &violations {
            outcome.trailer.push(format!(
                "violation,{},{},{},{}",
                v.n, v.k, v.at_n, v.at_next
            ));
            listed.push(json!({"n": v.n, "k": v.k, "at_n": v.at_n.to_string(), "at_next": v.at_next.to_string()}));
        }
        outcome.json_extra.push(("monotone", json!(status)));
        outcome
            .json_extra
            .push(("violations", Value::Array(listed)));
        outcome.verify_failed = !violations.is_empty();
    }
    Ok(outcome)
}

fn read_fixture(cfg: &RunConfig, input: &mut dyn Read) -> Result<Vec<BigUint>, Error> {
    match &cfg.fixture {
        None => Ok(perm1324::bundled_a1324()),
        Some(path) if path.as_os_str() == "-" => {
            let mut text = String::new();
            input
                .read_to_string(&mut text)
                .map_err(|e| Error::InvalidInput(format!("cannot read standard input: {e}")))?;
            parse_sequence(&text)
        }
        Some(path) => load_sequence(path),
    }
}

fn run_fit(
    cfg: &RunConfig,
    nmin: Option<usize>,
    nmax: Option<usize>,
    method: FitKind,
    window: usize,
    input: &mut dyn Read,
) -> Result<Outcome, Error> {
    let seq = read_fixture(cfg, input)?;
    let a = to_reals(&seq);
    let nmax = nmax.unwrap_or(a.len());
    if nmax > a.len() {
        return Err(Error::InvalidInput(format!(
            "--nmax {nmax} exceeds the {} terms available",
            a.len()
        )));
    }
    let fits: Vec<FitResult> = match method {
        FitKind::ThreeTerm => fit_profile(&a, nmin.unwrap_or(3), nmax)?,
        FitKind::LeastSquares => {
            let nmin = nmin.unwrap_or(window);
            if nmin > nmax {
                return Err(Error::InvalidInput(format!(
                    "bad fit range {nmin}..={nmax}"
                )));
            }
            (nmin..=nmax)
                .map(|n| fit_least_squares(&a, n, window))
                .collect::<Result<_, _>>()?
        }
    };
    let mut table = Table::new(vec!["n", "theta", "mu"]);
    for f in &fits {
        table.rows.push(vec![
            Cell::Index(f.n),
            Cell::Real(f.theta),
            Cell::Real(f.mu),
        ]);
    }
    let label = fits
        .first()
        .map_or("three-term".to_string(), |f| f.method.to_string());
    let mut outcome = Outcome::complete(table);
    outcome.json_extra.push(("method", json!(label)));
    outcome.json_extra.push(("estimates", json!("empirical")));
    if cfg.format == Format::Plain {
        outcome
            .trailer
            .push(format!("# empirical estimates, {label} fit"));
    }
    Ok(outcome)
}

fn run_verify(nmax: usize, engines: &Engines) -> Result<Outcome, Error> {
    positive("nmax", nmax)?;
    let report = verify(&VerifyOptions::new(nmax), engines)?;
    let mut table = Table::new(vec!["suite", "checks", "result"]);
    let mut suites = Vec::new();
    for s in &report.suites {
        table.rows.push(vec![
            Cell::Count(s.name.to_string()),
            Cell::Index(s.checks as usize),
            Cell::Count(if s.passed() {
                "PASS".into()
            } else {
                "FAIL".into()
            }),
        ]);
        suites.push(json!({
            "suite": s.name,
            "checks": s.checks,
            "passed": s.passed(),
            "counterexample": s.counterexample,
        }));
    }
    let mut outcome = Outcome::complete(table);
    for s in &report.suites {
        if let Some(c) = &s.counterexample {
            outcome
                .trailer
                .push(format!("counterexample ({}): {c}", s.name));
        }
    }
    let status = if report.passed() { "PASS" } else { "FAIL" };
    outcome.trailer.push(status.to_string());
    outcome.json_extra.push(("suites", Value::Array(suites)));
    outcome.json_extra.push(("result", json!(status)));
    outcome.verify_failed = !report.passed();
    Ok(outcome)
}
