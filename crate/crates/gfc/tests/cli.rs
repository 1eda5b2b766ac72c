use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn gfc(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gfc")).args(args).output().expect("gfc runs");
    (
        out.status.code().expect("gfc exits normally"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

// Paths differ between checkouts, so goldens store them relative to the
// data directory.
fn portable(text: &str) -> String {
    text.replace(&data(""), "DATA/")
}

// Set GFC_BLESS=1 to rewrite the goldens after an intended change.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let actual = portable(actual);
    if std::env::var_os("GFC_BLESS").is_some() {
        fs::write(&path, &actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden {name} differs");
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn check_reports_the_doubled_ring() {
    let (tri, hex) = (data("tri.net"), data("hex.net"));
    let (code, out, _) = gfc(&["check", "--family", "files", "--member", &tri, "--member", &hex, "--fn", "size"]);
    assert_eq!(code, 3);
    assert!(out.contains("counterexample tri:1 f=3 ~ hex:1 f=6"), "{out}");
    golden("check_pair.txt", &out);
}

#[test]
fn check_ring_family_is_unsolvable_for_size() {
    let args = ["check", "--family", "uni-rings", "--max-n", "6", "--inputs", "a,b,c", "--weights", "1", "--fn", "size"];
    let (code, out, _) = gfc(&args);
    assert_eq!(code, 3);
    assert!(out.contains("solvable no"));
    golden("check_uni6.txt", &out);
}

#[test]
fn check_solvable_family_lists_witnesses() {
    let args = ["check", "--family", "random", "--max-n", "5", "--count", "6", "--family-seed", "9", "--fn", "max_input"];
    let (code, out, _) = gfc(&args);
    assert_eq!(code, 0);
    assert!(out.contains("family_seed=9"));
    golden("check_random.txt", &out);
    let (code, tsv, _) = gfc(&[&args[..], &["--format", "tsv"]].concat());
    assert_eq!(code, 0);
    golden("check_random.tsv", &tsv);
}

#[test]
fn bisim_dump() {
    let (tri, hex) = (data("tri.net"), data("hex.net"));
    let (code, out, _) = gfc(&["bisim", "--family", "files", "--member", &tri, "--member", &hex, "--k", "2"]);
    assert_eq!(code, 0);
    golden("bisim_pair.txt", &out);
}

#[test]
fn simulate_pg_gc_learns_everywhere() {
    let net = data("ring3.net");
    let (code, out, _) = gfc(&["simulate", "--net", &net, "--protocol", "pg_gc", "--fn", "multiset_inputs", "--sync"]);
    assert_eq!(code, 0);
    let learns = out.lines().filter(|l| l.contains(" LEARN ")).count();
    assert_eq!(learns, 3);
    assert!(out.trim_end().ends_with("msgs=3"));
    golden("simulate_ring3.txt", &out);
}

#[test]
fn simulate_pg_gc_in_a_family() {
    let net = data("ring3.net");
    let args = [
        "simulate", "--net", &net, "--protocol", "pg_gc", "--fn", "multiset_inputs", "--family", "uni-rings",
        "--max-n", "3", "--inputs", "a,b,c",
    ];
    let (code, out, _) = gfc(&args);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.contains("f={a,b,c}")).count(), 3);
    golden("simulate_ring3_family.txt", &out);
}

#[test]
fn async_traces_are_reproducible() {
    let net = data("ids5.net");
    let args = ["simulate", "--net", &net, "--protocol", "p2_prime", "--async", "--seed", "7"];
    let (code, first, _) = gfc(&args);
    assert_eq!(code, 0);
    assert!(first.lines().next().unwrap().contains("seed=7"));
    let (_, second, _) = gfc(&args);
    assert_eq!(first, second);
    golden("simulate_p2_prime_seed7.txt", &first);
    let (_, other, _) = gfc(&["simulate", "--net", &net, "--protocol", "p2_prime", "--async", "--seed", "8"]);
    assert_ne!(first, other);
}

#[test]
fn trace_file_matches_stdout() {
    let net = data("ids5.net");
    let file = tmp("trace").join("flood.trace");
    let base = ["simulate", "--net", &net, "--protocol", "flooding"];
    let (_, shown, _) = gfc(&base);
    let (code, summary, _) = gfc(&[&base[..], &["--out", file.to_str().unwrap()]].concat());
    assert_eq!(code, 0);
    assert!(summary.contains("wrote"));
    assert_eq!(fs::read_to_string(&file).unwrap(), shown);
    golden("simulate_flooding.txt", &shown);
}

#[test]
fn too_small_budget_fails() {
    let net = data("ids5.net");
    let (code, out, _) = gfc(&["simulate", "--net", &net, "--protocol", "p2", "--budget", "2"]);
    assert_eq!(code, 1);
    assert!(out.contains("exhausted"));
}

#[test]
fn ring_protocols_need_rings() {
    let (code, _, err) = gfc(&["simulate", "--net", &data("ids5.net"), "--protocol", "lcr"]);
    assert_eq!(code, 1);
    assert!(err.contains("not a unidirectional ring"));
    let (code, _, err) = gfc(&["simulate", "--net", &data("ring3.net"), "--protocol", "lcr"]);
    assert_eq!(code, 1);
    assert!(err.contains("not a positive integer id"));
}

#[test]
fn verify_lcr_prime_is_ok() {
    let (code, out, _) = gfc(&["verify", "--protocol", "lcr_prime", "--max-n", "4"]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().starts_with("OK states="));
    golden("verify_lcr_prime4.txt", &out);
}

#[test]
fn verify_lcr_reports_mismatches() {
    let (code, out, _) = gfc(&["verify", "--protocol", "lcr", "--max-n", "3"]);
    assert_eq!(code, 4);
    assert!(out.contains("MISMATCH net=uni[1,2]"));
    golden("verify_lcr3.txt", &out);
    let (code, tsv, _) = gfc(&["verify", "--protocol", "lcr", "--max-n", "3", "--format", "tsv"]);
    assert_eq!(code, 4);
    golden("verify_lcr3.tsv", &tsv);
}

#[test]
fn jobs_do_not_change_reports() {
    let base = ["verify", "--protocol", "p2_prime", "--max-n", "3", "--seeds", "1,2"];
    let (_, one, _) = gfc(&[&base[..], &["--jobs", "1"]].concat());
    let (_, four, _) = gfc(&[&base[..], &["--jobs", "4"]].concat());
    assert_eq!(one, four);
    assert!(one.contains("seeds={1,2}"));
}

#[test]
fn bench_tables() {
    let (code, out, _) = gfc(&["bench", "--min-n", "3", "--max-n", "6", "--seed", "1"]);
    assert_eq!(code, 0);
    golden("bench.txt", &out);
    let (code, tsv, _) = gfc(&["bench", "--min-n", "3", "--max-n", "6", "--seed", "1", "--format", "tsv", "--jobs", "2"]);
    assert_eq!(code, 0);
    golden("bench.tsv", &tsv);
    let saved: Vec<&str> = tsv.lines().filter(|l| l.starts_with("lcr\tlcr_prime")).collect();
    assert_eq!(saved.len(), 4);
    assert!(saved.iter().all(|l| l.ends_with("\t1")));
}

#[test]
fn gen_writes_parseable_files() {
    let dir = tmp("gen");
    let args = ["gen", "--family", "bi-rings", "--max-n", "3", "--inputs", "a,b", "--out", dir.to_str().unwrap()];
    let (code, out, _) = gfc(&args);
    assert_eq!(code, 0);
    let listed: Vec<&str> = out.lines().skip(1).collect();
    assert!(out.starts_with("# gfc gen family=\"bi-rings n<=3 inputs=a,b weights=1\" members=7"), "{out}");
    assert_eq!(listed.len(), 7);
    for path in listed {
        let text = fs::read_to_string(path).unwrap();
        gfc::parse_network(&text).unwrap();
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gfc(&[]).0, 2);
    assert_eq!(gfc(&["frobnicate"]).0, 2);
    let net = data("ring3.net");
    // Asynchronous runs must name their seed.
    let (code, _, err) = gfc(&["simulate", "--net", &net, "--protocol", "full_info", "--async"]);
    assert_eq!(code, 2);
    assert!(err.contains("--seed"));
    assert_eq!(gfc(&["simulate", "--net", &net, "--protocol", "full_info", "--sync", "--async", "--seed", "1"]).0, 2);
    assert_eq!(gfc(&["check", "--family", "uni-rings", "--fn", "nope"]).0, 2);
    assert_eq!(gfc(&["simulate", "--net", &net, "--protocol", "pg_gc"]).0, 2);
    assert_eq!(gfc(&["verify", "--protocol", "pg_gc", "--max-n", "3"]).0, 2);
}

#[test]
fn missing_files_exit_one() {
    let (code, _, err) = gfc(&["simulate", "--net", "/nonexistent.net", "--protocol", "full_info"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent.net"));
}
