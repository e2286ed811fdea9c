use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn pcgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcgeo")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pcgeo(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    pcgeo(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// A 7-bit corpus, a small config and a model trained on them.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Self { dir };
        ok(&["synth", "--kind", "corpus", "--bit-depth", "7", "--count", "6", "--seed", "3", "--out", s(&f.path("corpus"))]);
        fs::write(f.path("small.toml"), "codebook_sizes = [16, 4, 2, 1]\n").unwrap();
        ok(&["train", "--input", s(&f.path("corpus")), "--config", s(&f.path("small.toml")), "--out", s(&f.path("m.gicm"))]);
        ok(&["synth", "--kind", "scene", "--bit-depth", "7", "--seed", "21", "--out", s(&f.path("a.ply"))]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn bpp_of(encode_stdout: &str) -> f64 {
    let field = encode_stdout.split(", ").find(|f| f.ends_with(" bpp")).expect("bpp in output");
    field.trim_end_matches(" bpp").parse().unwrap()
}

#[test]
fn training_is_reproducible_and_reports_errors() {
    let f = Fixture::new();
    let out = ok(&["train", "--input", s(&f.path("corpus")), "--config", s(&f.path("small.toml")), "--out", s(&f.path("m2.gicm"))]);
    assert!(out.contains("parameters"));
    assert_eq!(fs::read(f.path("m.gicm")).unwrap(), fs::read(f.path("m2.gicm")).unwrap());

    fs::create_dir(f.path("empty")).unwrap();
    let out = pcgeo(&["train", "--input", s(&f.path("empty")), "--out", s(&f.path("x.gicm"))]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no training data"));

    fs::write(f.path("one.toml"), "codebook_sizes = [1, 1, 1, 1]\n").unwrap();
    ok(&["train", "--input", s(&f.path("corpus")), "--config", s(&f.path("one.toml")), "--out", s(&f.path("one.gicm"))]);
    ok(&["encode", "--input", s(&f.path("a.ply")), "--model", s(&f.path("one.gicm")), "--lambda", "1", "--out", s(&f.path("one.gpcg"))]);

    fs::write(f.path("bad.toml"), "coarsest_side = 31\n").unwrap();
    assert_eq!(code(&["train", "--input", s(&f.path("corpus")), "--config", s(&f.path("bad.toml")), "--out", s(&f.path("x.gicm"))]), 3);
}

#[test]
fn encode_decode_eval_agree() {
    let f = Fixture::new();
    let (a, m, st, rec) = (f.path("a.ply"), f.path("m.gicm"), f.path("a.gpcg"), f.path("rec.ply"));
    let enc = ok(&["encode", "--input", s(&a), "--model", s(&m), "--lambda", "0.5", "--out", s(&st)]);
    ok(&["decode", "--input", s(&st), "--model", s(&m), "--out", s(&rec)]);
    let first = fs::read(&rec).unwrap();
    ok(&["decode", "--input", s(&st), "--model", s(&m), "--out", s(&rec)]);
    assert_eq!(first, fs::read(&rec).unwrap());

    let csv = ok(&["eval", "--ref", s(&a), "--rec", s(&rec), "--stream", s(&st)]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "name,d1_mse,d1_psnr,d2_mse,d2_psnr,bpp,points_in,points_out");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "rec");
    assert_eq!(row[5].parse::<f64>().unwrap(), bpp_of(&enc));

    let same = ok(&["eval", "--ref", s(&a), "--rec", s(&a), "--stream", s(&st)]);
    let row: Vec<&str> = same.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[1], row[2], row[4]), ("0", "inf", "inf"));
}

#[test]
fn larger_lambda_spends_fewer_bits() {
    let f = Fixture::new();
    let (a, m) = (f.path("a.ply"), f.path("m.gicm"));
    let lo = ok(&["encode", "--input", s(&a), "--model", s(&m), "--lambda", "0.1", "--out", s(&f.path("lo.gpcg"))]);
    let hi = ok(&["encode", "--input", s(&a), "--model", s(&m), "--lambda", "10", "--out", s(&f.path("hi.gpcg"))]);
    assert!(bpp_of(&lo) >= bpp_of(&hi));
}

#[test]
fn thread_count_does_not_change_output() {
    let f = Fixture::new();
    let (a, m) = (f.path("a.ply"), f.path("m.gicm"));
    ok(&["--threads", "1", "encode", "--input", s(&a), "--model", s(&m), "--lambda", "1", "--out", s(&f.path("t1.gpcg"))]);
    ok(&["encode", "--threads", "4", "--input", s(&a), "--model", s(&m), "--lambda", "1", "--out", s(&f.path("t4.gpcg"))]);
    assert_eq!(fs::read(f.path("t1.gpcg")).unwrap(), fs::read(f.path("t4.gpcg")).unwrap());
}

#[test]
fn sweep_dedups_and_sorts_by_rate() {
    let f = Fixture::new();
    let (a, m, out) = (f.path("a.ply"), f.path("m.gicm"), f.path("curve.csv"));
    ok(&["sweep", "--input", s(&a), "--model", s(&m), "--lambdas", "10,0.05,1,0.05,100,10", "--out", s(&out)]);
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "lambda,bpp,d1_psnr,d2_psnr,encode_seconds,decode_seconds");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));
    let mut by_lambda = rows.clone();
    by_lambda.sort_by(|x, y| y.0.total_cmp(&x.0));
    assert!(by_lambda.windows(2).all(|w| w[0].1 <= w[1].1), "{by_lambda:?}");

    ok(&["sweep", "--input", s(&a), "--model", s(&m), "--lambdas", "2", "--out", s(&out)]);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 2);
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let (a, m, st) = (f.path("a.ply"), f.path("m.gicm"), f.path("a.gpcg"));
    assert_eq!(code(&["encode", "--input", s(&a), "--model", s(&m), "--lambda", "-1", "--out", s(&st)]), 2);
    assert_eq!(code(&["--threads", "0", "synth", "--kind", "shell", "--out", s(&f.path("x.ply"))]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    ok(&["encode", "--input", s(&a), "--model", s(&m), "--lambda", "1", "--out", s(&st)]);

    fs::write(f.path("other.toml"), "codebook_sizes = [8, 4, 2, 1]\n").unwrap();
    ok(&["train", "--input", s(&f.path("corpus")), "--config", s(&f.path("other.toml")), "--out", s(&f.path("other.gicm"))]);
    let out = pcgeo(&["decode", "--input", s(&st), "--model", s(&f.path("other.gicm")), "--out", s(&f.path("r.ply"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));

    let mut bytes = fs::read(&st).unwrap();
    bytes.truncate(bytes.len() - 1);
    fs::write(f.path("cut.gpcg"), &bytes).unwrap();
    assert_eq!(code(&["decode", "--input", s(&f.path("cut.gpcg")), "--model", s(&m), "--out", s(&f.path("r.ply"))]), 3);
    fs::write(f.path("junk.ply"), "ply\nformat nonsense 1.0\nend_header\n").unwrap();
    assert_eq!(code(&["encode", "--input", s(&f.path("junk.ply")), "--model", s(&m), "--lambda", "1", "--out", s(&st)]), 3);
    assert_eq!(code(&["decode", "--input", s(&st), "--model", s(&a), "--out", s(&f.path("r.ply"))]), 3);
}

#[test]
fn empty_cloud_round_trips_to_empty_ply() {
    let f = Fixture::new();
    fs::write(f.path("empty.ply"), "ply\nformat ascii 1.0\nelement vertex 0\nproperty int x\nproperty int y\nproperty int z\nend_header\n").unwrap();
    ok(&["encode", "--input", s(&f.path("empty.ply")), "--model", s(&f.path("m.gicm")), "--lambda", "1", "--out", s(&f.path("e.gpcg"))]);
    let out = ok(&["decode", "--input", s(&f.path("e.gpcg")), "--model", s(&f.path("m.gicm")), "--out", s(&f.path("e.ply")), "--ascii"]);
    assert!(out.starts_with("0 points"));
    assert!(fs::read_to_string(f.path("e.ply")).unwrap().contains("element vertex 0"));
}

#[test]
fn plane_trained_model_codes_its_plane_losslessly() {
    let f = Fixture::new();
    fs::create_dir(f.path("planes")).unwrap();
    ok(&["synth", "--kind", "plane", "--bit-depth", "7", "--out", s(&f.path("planes/p.ply"))]);
    ok(&["train", "--input", s(&f.path("planes")), "--config", s(&f.path("small.toml")), "--out", s(&f.path("p.gicm"))]);
    ok(&["encode", "--input", s(&f.path("planes/p.ply")), "--model", s(&f.path("p.gicm")), "--lambda", "0.01", "--out", s(&f.path("p.gpcg"))]);
    ok(&["decode", "--input", s(&f.path("p.gpcg")), "--model", s(&f.path("p.gicm")), "--out", s(&f.path("p_rec.ply"))]);
    let csv = ok(&["eval", "--ref", s(&f.path("planes/p.ply")), "--rec", s(&f.path("p_rec.ply")), "--stream", s(&f.path("p.gpcg"))]);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "0");
    assert_eq!(row[6], row[7]);
}
