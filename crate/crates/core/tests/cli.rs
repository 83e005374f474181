use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const TINY: &str = "\
# small enough for a test run
model.image_size = 8
model.levels = 2
model.latent_channels = 4,8
model.hidden_widths = 4,6
teacher.components = 2
teacher.n_traj = 24
teacher.n_grid = 5
teacher.steps_per_grid = 8
train.batch_size = 8
train.epochs = 2
train.log_interval = 1
analysis.sheet_cols = 4
";

fn hkd(args: &[&str]) -> Output {
    hkd_env(args, &[])
}

fn hkd_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hkd"));
    cmd.args(args).env_remove("HKD_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hkd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("tiny.cfg"), TINY).unwrap();
        Self { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    fn trained(&self) -> String {
        ok(&["gen-data", "--config", &self.p("tiny.cfg"), "--out", &self.p("d.hkdt"), "--seed", "3"]);
        ok(&["train", "--config", &self.p("tiny.cfg"), "--data", &self.p("d.hkdt"), "--out", &self.p("m.hkdc")]);
        self.p("m.hkdc")
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let f = Fixture::new();
    let ckpt = f.trained();
    let d1 = digest(Path::new(&f.p("d.hkdt")));
    ok(&["gen-data", "--config", &f.p("tiny.cfg"), "--out", &f.p("d2.hkdt"), "--seed", "3"]);
    assert_eq!(d1, digest(Path::new(&f.p("d2.hkdt"))));

    let c1 = digest(Path::new(&ckpt));
    ok(&["train", "--config", &f.p("tiny.cfg"), "--data", &f.p("d.hkdt"), "--out", &f.p("m2.hkdc")]);
    assert_eq!(c1, digest(Path::new(&f.p("m2.hkdc"))));

    for run in ["a", "b"] {
        let out = f.p(run);
        ok(&["sample", "--ckpt", &ckpt, "--out", &out, "--n", "6", "--seed", "4"]);
        ok(&["edit", "--ckpt", &ckpt, "--out", &out, "--n", "6", "--seed", "4", "--ratio", "0.6"]);
    }
    for name in ["samples.png", "edit.png"] {
        assert_eq!(digest(&f.root.join("a").join(name)), digest(&f.root.join("b").join(name)), "{name}");
    }

    // ratio 0 leaves the sampler output untouched
    let c = f.p("c");
    ok(&["edit", "--ckpt", &ckpt, "--out", &c, "--n", "6", "--seed", "4", "--ratio", "0", "--region", "full"]);
    assert_eq!(digest(&f.root.join("c/edit.png")), digest(&f.root.join("a/samples.png")));
}

#[test]
fn thread_count_does_not_change_results() {
    let f = Fixture::new();
    let cfg = f.p("tiny.cfg");
    let one = hkd_env(&["gen-data", "--config", &cfg, "--out", &f.p("x1.hkdt")], &[("HKD_THREADS", "1")]);
    let two = hkd_env(&["gen-data", "--config", &cfg, "--out", &f.p("x2.hkdt")], &[("HKD_THREADS", "2")]);
    assert!(one.status.success() && two.status.success());
    assert_eq!(digest(&f.root.join("x1.hkdt")), digest(&f.root.join("x2.hkdt")));
    let bad = hkd_env(&["gen-data", "--config", &cfg, "--out", &f.p("x3.hkdt")], &[("HKD_THREADS", "zero")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn every_subcommand_writes_its_outputs() {
    let f = Fixture::new();
    let ckpt = f.trained();
    let metrics = std::fs::read_to_string(f.p("m.hkdc.metrics.csv")).unwrap();
    assert!(metrics.starts_with("iter,epoch,lambda1,"));
    assert_eq!(metrics.lines().count(), 1 + 6);
    let o = f.p("o");
    ok(&["analyze-spectrum", "--ckpt", &ckpt, "--out", &o]);
    ok(&["band-decode", "--ckpt", &ckpt, "--out", &o, "--n", "3", "--bands", "2"]);
    ok(&["ce", "--ckpt", &ckpt, "--out", &o, "--n", "3", "--points", "4"]);
    ok(&["consistency", "--ckpt", &ckpt, "--out", &o, "--data", &f.p("d.hkdt"), "--count", "2"]);
    let eval = ok(&["eval", "--ckpt", &ckpt, "--out", &o, "--n", "64", "--self-noise"]);
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("fd_lite") && stdout.contains("teacher_self"), "{stdout}");
    for name in ["spectra.csv", "full.png", "band_0.png", "band_1.png", "ce.csv", "consistency.png", "consistency.csv", "eval.csv"] {
        assert!(f.root.join("o").join(name).is_file(), "{name}");
    }
    let spectra = std::fs::read_to_string(f.root.join("o/spectra.csv")).unwrap();
    assert_eq!(spectra.lines().count(), 1 + 2 * 64 + 4 * 16);
    let ce = std::fs::read_to_string(f.root.join("o/ce.csv")).unwrap();
    // three bands requested; level 1 has only two blocks
    assert_eq!(ce.lines().count(), 1 + 4 * (2 + 3));
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(hkd(&[]).status.code(), Some(2));
    assert_eq!(hkd(&["--help"]).status.code(), Some(0));
    assert_eq!(hkd(&["sample", "--bogus"]).status.code(), Some(2));

    std::fs::write(f.root.join("bad.cfg"), "teacher.foo = 1\n").unwrap();
    let out = hkd(&["gen-data", "--config", &f.p("bad.cfg"), "--out", &f.p("z.hkdt")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("teacher.foo"));

    let missing = hkd(&["sample", "--ckpt", &f.p("nope.hkdc"), "--out", &f.p("o")]);
    assert_eq!(missing.status.code(), Some(3));
    std::fs::write(f.root.join("junk.hkdc"), b"XXXXjunk").unwrap();
    assert_eq!(hkd(&["sample", "--ckpt", &f.p("junk.hkdc"), "--out", &f.p("o")]).status.code(), Some(3));

    let ckpt = f.trained();
    let bad_ratio = hkd(&["edit", "--ckpt", &ckpt, "--out", &f.p("o"), "--ratio", "2"]);
    assert_eq!(bad_ratio.status.code(), Some(2));
    let bad_time = hkd(&["edit", "--ckpt", &ckpt, "--out", &f.p("o"), "--t-edit", "7"]);
    assert_eq!(bad_time.status.code(), Some(2));
}

#[test]
fn mask_file_regions() {
    let f = Fixture::new();
    let ckpt = f.trained();
    let rows: String = (0..8).map(|r| format!("{}\n", if r < 4 { "11110000" } else { "00000000" })).collect();
    std::fs::write(f.root.join("mask.txt"), rows).unwrap();
    ok(&["edit", "--ckpt", &ckpt, "--out", &f.p("m"), "--n", "2", "--region", &f.p("mask.txt"), "--band", "all"]);
    std::fs::write(f.root.join("short.txt"), "1111\n").unwrap();
    let out = hkd(&["edit", "--ckpt", &ckpt, "--out", &f.p("m"), "--region", &f.p("short.txt")]);
    assert_eq!(out.status.code(), Some(2));
}
