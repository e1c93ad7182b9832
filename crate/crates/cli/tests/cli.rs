use std::io::Write as _;
use std::process::Command as Process;

use clap::Parser;
use perm1324::{series_counts, Engines, TruncatedCounterSeries};
use perm1324_cli::{
    execute, parse_bytes, run, Io, RunConfig, EXIT_INVALID_INPUT, EXIT_OK, EXIT_RESOURCE_CAP,
    EXIT_VERIFY_FAILED,
};
use serde_json::Value;

struct Captured {
    code: i32,
    out: String,
    err: String,
}

fn cli_with_stdin(args: &[&str], stdin: &str) -> Captured {
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("perm1324").chain(args.iter().copied());
    let code = run(
        argv,
        Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        },
    );
    Captured {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn cli(args: &[&str]) -> Captured {
    cli_with_stdin(args, "")
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn avoid_csv_matches_known_values() {
    let r = cli(&["avoid", "--nmax", "10", "--format", "csv"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.lines().last().unwrap().ends_with("10,591950"));
    assert_eq!(r.out.lines().count(), 10);

    let r = cli(&["avoid", "--nmax", "1"]);
    assert_eq!(r.out, "1,1\n");
}

#[test]
fn occur_examples() {
    let r = cli(&["occur", "--r", "1", "--nmax", "12"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.lines().any(|l| l == "12,1,8776255"));

    let r = cli(&["occur", "--r", "0", "--nmax", "4"]);
    assert!(r.out.lines().any(|l| l == "4,0,23"));

    let r = cli(&["occur", "--r", "3", "--nmax", "3"]);
    for row in csv_rows(&r.out) {
        if row[1] != "0" {
            assert_eq!(row[2], "0", "{row:?}");
        }
    }
}

#[test]
fn invtable_examples() {
    let r = cli(&["invtable", "--nmax", "3"]);
    let n3: Vec<&str> = r.out.lines().filter(|l| l.starts_with("3,")).collect();
    assert_eq!(n3, ["3,0,1", "3,1,2", "3,2,2", "3,3,1"]);

    let r = cli(&["invtable", "--nmax", "9"]);
    for row in csv_rows(&r.out) {
        if row[1] == "0" {
            assert_eq!(row[2], "1");
        }
    }

    let r = cli(&["invtable", "--nmax", "9", "--kmax", "9", "--check-monotone"]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(r.out.lines().last(), Some("PASS"));
}

#[test]
fn invtable_monotone_check_needs_two_rows() {
    let r = cli(&["invtable", "--nmax", "1", "--check-monotone"]);
    assert_eq!(r.code, EXIT_INVALID_INPUT);
}

#[test]
fn json_round_trips_counts_as_strings() {
    let csv = cli(&["avoid", "--nmax", "20"]);
    let json = cli(&["avoid", "--nmax", "20", "--format", "json"]);
    let doc: Value = serde_json::from_str(&json.out).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 20);
    for (row, line) in rows.iter().zip(csv_rows(&csv.out)) {
        let a = row["a_n"].as_str().expect("count serialized as a string");
        assert_eq!(row["n"].as_u64().unwrap().to_string(), line[0]);
        assert_eq!(a, line[1]);
    }
    assert_eq!(rows[19]["a_n"], "198244731603623");
}

#[test]
fn occur_json_matches_csv() {
    let csv = cli(&["occur", "--nmax", "8", "--r", "2"]);
    let json = cli(&["occur", "--nmax", "8", "--r", "2", "--format", "json"]);
    let doc: Value = serde_json::from_str(&json.out).unwrap();
    let back: Vec<Vec<String>> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            vec![
                r["n"].to_string(),
                r["j"].to_string(),
                r["count"].as_str().unwrap().to_string(),
            ]
        })
        .collect();
    assert_eq!(back, csv_rows(&csv.out));
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["avoid", "--nmax", "14"][..],
        &["occur", "--nmax", "9", "--r", "2"],
        &["invtable", "--nmax", "8", "--format", "json"],
        &["stats", "--nmax", "10", "--format", "plain"],
        &["fit"],
    ] {
        assert_eq!(cli(args).out, cli(args).out, "{args:?}");
    }
}

#[test]
fn threads_do_not_change_output() {
    let one = cli(&["avoid", "--nmax", "15"]);
    let four = cli(&["avoid", "--nmax", "15", "--threads", "4"]);
    assert_eq!(one.out, four.out);
    let one = cli(&["invtable", "--nmax", "9"]);
    let four = cli(&["invtable", "--nmax", "9", "--threads", "3"]);
    assert_eq!(one.out, four.out);
}

#[test]
fn invalid_arguments_exit_2() {
    for args in [
        &["avoid", "--nmax", "0"][..],
        &["avoid", "--nmax", "5", "--threads", "0"],
        &["avoid", "--nmax", "5", "--memory-cap", "0"],
        &["avoid", "--nmax", "many"],
        &["avoid"],
        &["frobnicate"],
        &["avoid", "--nmax", "5", "--format", "xml"],
        &["avoid", "--nmax", "40"],
        &["occur", "--nmax", "40"],
        &["invtable", "--nmax", "40"],
        &["verify", "--nmax", "0"],
        &["fit", "--nmax", "99"],
    ] {
        let r = cli(args);
        assert_eq!(r.code, EXIT_INVALID_INPUT, "{args:?}: {}", r.err);
        assert!(!r.err.is_empty());
    }
}

#[test]
fn help_exits_0() {
    let r = cli(&["--help"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("invtable"));
}

#[test]
fn memory_cap_keeps_completed_prefix() {
    let r = cli(&["avoid", "--nmax", "16", "--memory-cap", "64K"]);
    assert_eq!(r.code, EXIT_RESOURCE_CAP);
    let rows = csv_rows(&r.out);
    assert!(!rows.is_empty() && rows.len() < 16);
    assert_eq!(rows[0], ["1", "1"]);
    assert!(r.err.contains("memory cap"));

    let r = cli(&["occur", "--nmax", "12", "--r", "1", "--memory-cap", "16K"]);
    assert_eq!(r.code, EXIT_RESOURCE_CAP);
    assert!(r.out.starts_with("1,0,1\n"));
}

#[test]
fn memory_cap_suffixes() {
    assert_eq!(parse_bytes("123"), Ok(123));
    assert_eq!(parse_bytes("2k"), Ok(2048));
    assert_eq!(parse_bytes("3M"), Ok(3 << 20));
    assert_eq!(parse_bytes("1G"), Ok(1 << 30));
    assert!(parse_bytes("0").is_err());
    assert!(parse_bytes("G").is_err());
    assert!(parse_bytes("-4M").is_err());
}

#[test]
fn fit_recovers_pure_exponential() {
    let text: String = (1..=24).map(|n| format!("{}\n", 1u64 << n)).collect();
    let r = cli_with_stdin(&["fit", "--fixture", "-", "--nmin", "20"], &text);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    for row in csv_rows(&r.out) {
        let theta: f64 = row[1].parse().unwrap();
        let mu: f64 = row[2].parse().unwrap();
        assert!(theta.abs() < 1e-9 && (mu - 2.0).abs() < 1e-9, "{row:?}");
    }
}

#[test]
fn fit_bundled_fixture_is_labelled_empirical() {
    let r = cli(&["fit", "--nmin", "29", "--format", "json"]);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["estimates"], "empirical");
    assert_eq!(doc["method"], "three-term");
    let ns: Vec<u64> = doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["n"].as_u64().unwrap())
        .collect();
    assert_eq!(ns, [29, 30, 31]);

    let plain = cli(&["fit", "--nmin", "29", "--format", "plain"]);
    assert!(plain.out.contains("empirical"));

    let csv = cli(&["fit", "--nmin", "30"]);
    for row in csv_rows(&csv.out) {
        assert_eq!(row.len(), 3);
        let digits = row[2].chars().filter(char::is_ascii_digit).count();
        assert_eq!(digits, 10, "{row:?}");
    }

    let ls = cli(&[
        "fit",
        "--method",
        "least-squares",
        "--window",
        "6",
        "--nmin",
        "30",
        "--format",
        "json",
    ]);
    let doc: Value = serde_json::from_str(&ls.out).unwrap();
    assert_eq!(doc["method"], "least-squares(window=6)");
}

#[test]
fn fit_parse_errors_name_the_line() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "# header\n1\n2\n6\n23\n0\n513").unwrap();
    let path = file.path().to_str().unwrap();
    let r = cli(&["fit", "--fixture", path]);
    assert_eq!(r.code, EXIT_INVALID_INPUT);
    assert!(r.err.contains("line 6"), "{}", r.err);

    let r = cli_with_stdin(&["fit", "--fixture", "-"], "1\n2\nsix\n");
    assert_eq!(r.code, EXIT_INVALID_INPUT);
    assert!(r.err.contains("line 3"), "{}", r.err);

    let r = cli(&["fit", "--fixture", "/nonexistent/sequence.txt"]);
    assert_eq!(r.code, EXIT_INVALID_INPUT);
}

#[test]
fn verify_passes() {
    let r = cli(&["verify", "--nmax", "3"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.out);
    assert_eq!(r.out.lines().last(), Some("PASS"));
    let r = cli(&["verify", "--nmax", "6", "--format", "json"]);
    let doc: Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["result"], "PASS");
    assert_eq!(doc["suites"].as_array().unwrap().len(), 6);
}

#[test]
fn verify_reports_injected_fault() {
    let engines = Engines {
        series: Box::new(|n, r| {
            let mut coeffs = series_counts(n, r)?.coeffs().to_vec();
            if n == 4 && coeffs.len() > 1 {
                coeffs[1] += 1u8;
            }
            TruncatedCounterSeries::new(coeffs)
        }),
        ..Engines::default()
    };
    let cfg = RunConfig::try_parse_from(["perm1324", "verify", "--nmax", "5"]).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = execute(
        &cfg,
        Io {
            input: &mut std::io::empty(),
            out: &mut out,
            err: &mut err,
        },
        &engines,
    );
    let out = String::from_utf8(out).unwrap();
    assert_eq!(code, EXIT_VERIFY_FAILED);
    assert!(out.contains("counterexample"), "{out}");
    assert_eq!(out.lines().last(), Some("FAIL"));
}

#[test]
fn stats_reports_uncached_calls() {
    let r = cli(&["stats", "--nmax", "10"]);
    assert_eq!(r.code, EXIT_OK);
    let calls: Vec<String> = csv_rows(&r.out).into_iter().map(|r| r[8].clone()).collect();
    assert_eq!(
        calls,
        ["1", "4", "14", "54", "239", "1187", "6417", "36936", "223190", "1402845"]
    );
    assert!(r.err.contains("per-run"));

    let r = cli(&["avoid", "--nmax", "6", "--verbose-cache"]);
    assert!(r.err.contains("per-run") && r.err.contains("n=6"));
}

#[test]
fn verbose_progress_goes_to_stderr() {
    let quiet = cli(&["avoid", "--nmax", "8"]);
    let loud = cli(&["avoid", "--nmax", "8", "--verbose"]);
    assert_eq!(quiet.out, loud.out);
    assert!(quiet.err.is_empty());
    assert!(loud.err.contains("n=8 a_n=15793"));
    assert!(loud.err.contains("elapsed_ms"));
}

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_perm1324"))
}

#[test]
fn binary_exit_codes_and_streams() {
    let out = binary().args(["avoid", "--nmax", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "1,1\n2,2\n3,6\n4,23\n5,103\n"
    );
    assert!(out.stderr.is_empty());

    let out = binary().args(["avoid", "--nmax", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INVALID_INPUT));
}

#[test]
fn memory_cap_flag_overrides_environment() {
    let out = binary()
        .args(["avoid", "--nmax", "14"])
        .env("PERM1324_MEMORY_CAP", "16K")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_RESOURCE_CAP));

    let out = binary()
        .args(["avoid", "--nmax", "14", "--memory-cap", "1G"])
        .env("PERM1324_MEMORY_CAP", "16K")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
}
