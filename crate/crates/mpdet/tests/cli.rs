mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::p;
use mpdet::scalar::agree_digits;
use mpdet::{FloatScalar, PrecReal};
use rug::Rational;
use tempfile::TempDir;

fn mpdet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpdet")).args(args).output().expect("spawn mpdet")
}

fn ok(args: &[&str]) -> Output {
    let out = mpdet(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(args: &[&str]) -> i32 {
    mpdet(args).status.code().expect("exited normally")
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn zeros_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/zeta_zeros_256.txt")
}

/// Every file of `a` exists in `b` with the same bytes, and vice versa.
fn assert_same_dir(a: &Path, b: &Path) {
    let names = |d: &Path| {
        let mut v: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names(a), names(b), "{} vs {}", a.display(), b.display());
    for name in names(a) {
        assert!(fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap(), "{name:?} differs");
    }
}

#[test]
fn generation_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let path = |name: &str| tmp.path().join(name);
    for name in ["a", "b"] {
        ok(&["gen", "random_uniform", "--n", "10", "--seed", "5", "-o", s(&path(name))]);
    }
    ok(&["gen", "random_uniform", "--n", "10", "--seed", "6", "-o", s(&path("c"))]);
    let a = fs::read(path("a")).unwrap();
    assert!(a.starts_with(b"MPMAT 1 real 10 256\n"));
    assert_eq!(a, fs::read(path("b")).unwrap());
    assert_ne!(a, fs::read(path("c")).unwrap());

    let zeros = zeros_file();
    let power = |name: &str| ok(&["gen", "power", "--m", "3", "--t", "2.5", "--zeros", s(&zeros), "-o", s(&path(name))]);
    power("p1");
    power("p2");
    assert_eq!(fs::read(path("p1")).unwrap(), fs::read(path("p2")).unwrap());
    assert!(fs::read_to_string(path("p1")).unwrap().starts_with("MPMAT 1 complex 7 256\n"));
}

#[test]
fn hilbert_determinant_series() {
    let tmp = TempDir::new().unwrap();
    let h = tmp.path().join("h.mpmat");
    ok(&["gen", "hilbert", "--n", "6", "--prec-bits", "512", "-o", s(&h)]);
    let out = ok(&["det", s(&h), "--series", "--oracle"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().nth(3).unwrap();
    let value = line.strip_prefix("4 ").unwrap();
    let got = PrecReal::parse_decimal(value, p(512)).unwrap();
    let want = PrecReal::from_rational(&Rational::from((1, 6_048_000)), p(512));
    assert!(agree_digits(&got, &want) >= 140, "{line}");
    assert_eq!(text.lines().count(), 6);
    assert!(String::from_utf8(out.stderr).unwrap().contains("oracle n=6"));
}

#[test]
fn engines_write_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("a.mpmat");
    ok(&["gen", "random_uniform", "--n", "24", "--seed", "3", "-o", s(&input)]);
    let dir = |name: &str| tmp.path().join(name);
    ok(&["minors", s(&input), "-o", s(&dir("serial"))]);
    ok(&["minors", s(&input), "--workers", "4", "-o", s(&dir("threads"))]);
    ok(&["minors", s(&input), "--workers", "3", "--transport", "process", "-o", s(&dir("procs"))]);
    let pages = dir("pages");
    ok(&["minors", s(&input), "--block-size", "8", "--paging-dir", s(&pages), "-o", s(&dir("paged"))]);
    for other in ["threads", "procs", "paged"] {
        assert_same_dir(&dir("serial"), &dir(other));
    }
    let det = |extra: &[&str]| {
        let mut args = vec!["det", s(&input)];
        args.extend_from_slice(extra);
        ok(&args).stdout
    };
    let serial = det(&[]);
    assert_eq!(serial, det(&["--workers", "4"]));
    assert_eq!(serial, det(&["--block-size", "6", "--paging-dir", s(&dir("pages6"))]));
}

#[test]
fn identity_reports_undefined_normalization() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("id.mpmat");
    fs::write(&input, "MPMAT 1 real 3 64\n1\n0\n0\n0\n1\n0\n0\n0\n1\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = ok(&["minors", s(&input), "-o", s(&out_dir)]);
    assert!(String::from_utf8(out.stderr).unwrap().contains("undefined"));
    let rows = fs::read_to_string(out_dir.join("minors_3.txt")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.lines().all(|l| l.ends_with(" undefined")));
    assert!(fs::read_to_string(out_dir.join("meta.txt")).unwrap().starts_with("MPMINORS 1 real 3 64 "));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let path = |name: &str| tmp.path().join(name);
    let write = |name: &str, text: &str| {
        fs::write(path(name), text).unwrap();
        path(name)
    };
    let good = path("good.mpmat");
    ok(&["gen", "random_uniform", "--n", "6", "-o", s(&good)]);
    let bad = write("bad.mpmat", "MPMAT 1 real 2 64\n1\n2\nx\n4\n");
    let singular = write("sing.mpmat", "MPMAT 1 real 3 64\n1\n2\n3\n2\n4\n6\n1\n1\n1\n");
    let zeros = zeros_file();

    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["det"]), 2);
    assert_eq!(code(&["det", s(&bad)]), 3);
    assert_eq!(code(&["det", s(&singular)]), 4);
    assert_eq!(code(&["gen", "power", "--m", "5000", "--zeros", s(&zeros)]), 5);
    assert_eq!(code(&["verify", s(&good), "--min-digits", "100000"]), 6);
    assert_eq!(code(&["det", s(&path("missing.mpmat"))]), 8);
    assert_eq!(code(&["study", s(&good), "--lo-bits", "64", "--hi-bits", "256"]), 11);
    assert_eq!(code(&["minors", s(&good), "--pivot", "partial", "-o", s(&path("x"))]), 12);
    assert_eq!(code(&["det", s(&good), "--workers", "0"]), 12);

    let other = path("other.mpmat");
    ok(&["gen", "random_uniform", "--n", "6", "--seed", "1", "-o", s(&other)]);
    ok(&["minors", s(&good), "-o", s(&path("m1"))]);
    ok(&["minors", s(&other), "-o", s(&path("m2"))]);
    assert_eq!(code(&["study", "--compare", s(&path("m1")), s(&path("m2"))]), 7);

    let swap = write("swap.mpmat", "MPMAT 1 real 2 64\n0\n1\n1\n0\n");
    assert_eq!(code(&["det", s(&swap)]), 4);
    assert_eq!(code(&["det", s(&singular), "--pivot", "partial"]), 4);
    let out = ok(&["det", s(&swap), "--pivot", "partial", "--digits", "5"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "2 -1.0000e0");
}

fn wait_for(path: &Path, limit: Duration) {
    let start = Instant::now();
    while !path.exists() {
        assert!(start.elapsed() < limit, "{} never appeared", path.display());
        std::thread::sleep(Duration::from_millis(5));
    }
}

#[test]
fn killed_run_resumes_from_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("a.mpmat");
    ok(&["gen", "random_uniform", "--n", "120", "--prec-bits", "2048", "--seed", "2", "-o", s(&input)]);
    let reference = tmp.path().join("ref");
    ok(&["minors", s(&input), "-o", s(&reference)]);

    let out = tmp.path().join("out");
    let ckpt = tmp.path().join("run.ckpt");
    let args = ["minors", s(&input), "-o", s(&out), "--checkpoint", s(&ckpt), "--checkpoint-every", "10"];
    let mut child = Command::new(env!("CARGO_BIN_EXE_mpdet")).args(args).stderr(Stdio::null()).spawn().unwrap();
    wait_for(&ckpt, Duration::from_secs(60));
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(!out.join("dets.txt").exists(), "run finished before it was killed");

    ok(&args);
    assert!(!ckpt.exists());
    assert_same_dir(&reference, &out);
}

#[cfg(unix)]
#[test]
fn interrupt_exits_ten_and_resumes() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("a.mpmat");
    ok(&["gen", "random_illcond", "--n", "120", "--prec-bits", "2048", "-o", s(&input)]);
    let reference = tmp.path().join("ref");
    ok(&["minors", s(&input), "-o", s(&reference)]);

    let out = tmp.path().join("out");
    let ckpt = tmp.path().join("run.ckpt");
    let args = ["minors", s(&input), "-o", s(&out), "--checkpoint", s(&ckpt)];
    let mut child = Command::new(env!("CARGO_BIN_EXE_mpdet")).args(args).stderr(Stdio::null()).spawn().unwrap();
    wait_for(&out.join("minors_5.txt"), Duration::from_secs(60));
    let sent = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(sent.success());
    assert_eq!(child.wait().unwrap().code(), Some(10));
    assert!(ckpt.exists());

    ok(&args);
    assert_same_dir(&reference, &out);
}
