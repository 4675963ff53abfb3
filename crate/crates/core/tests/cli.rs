//! End-to-end runs of the command-line front end.

use std::path::{Path, PathBuf};
use std::process::Command;

use crosswise::cli::{dict_path, run};

const ERA0: &str = "天地 人\n山水 天地\n\n人 山水\n天地\n";
const ERA1: &str = "天 地 人\n山 水 人\n天 地\n";

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str], stdin: &str) -> Run {
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["crosswise"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut input, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("era0.txt"), ERA0).unwrap();
        std::fs::write(root.join("era1.txt"), ERA1).unwrap();
        std::fs::write(
            root.join("small.conf"),
            "# toy settings\neras=2\nd_e=4\nd_a=8\nepochs=2\nngram_min_count=1\nbatch=2\n",
        )
        .unwrap();
        Fixture { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn corpus_args(&self) -> Vec<String> {
        vec![
            "--corpus".into(),
            self.p("era0.txt"),
            "--era".into(),
            "0".into(),
            "--corpus".into(),
            self.p("era1.txt"),
            "--era".into(),
            "1".into(),
        ]
    }

    fn build_dicts(&self) -> Run {
        let mut a = vec!["build-dict".to_string()];
        a.extend(self.corpus_args());
        a.extend([
            "--config".into(),
            self.p("small.conf"),
            "--out".into(),
            self.p("dicts"),
        ]);
        cli(&a.iter().map(String::as_str).collect::<Vec<_>>(), "")
    }

    fn train(&self, out: &str, extra: &[&str]) -> Run {
        let mut a = vec!["train".to_string()];
        a.extend(self.corpus_args());
        a.extend([
            "--dev".into(),
            self.p("era0.txt"),
            "--dev-era".into(),
            "0".into(),
            "--config".into(),
            self.p("small.conf"),
            "--dict-dir".into(),
            self.p("dicts"),
            "--out".into(),
            self.p(out),
        ]);
        a.extend(extra.iter().map(|s| s.to_string()));
        cli(&a.iter().map(String::as_str).collect::<Vec<_>>(), "")
    }

    fn ready(&self) -> &Self {
        assert_eq!(self.build_dicts().code, 0);
        let r = self.train("model.xwsm", &[]);
        assert_eq!(r.code, 0, "{}", r.err);
        self
    }
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn build_dict_writes_one_file_per_era_and_is_idempotent() {
    let f = Fixture::new();
    let r = f.build_dicts();
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.is_empty(), "stdout must stay clean: {}", r.out);
    let dicts = f.root.join("dicts");
    let first: Vec<Vec<u8>> = (0..2).map(|e| read(&dict_path(&dicts, e))).collect();
    let words0 = String::from_utf8(first[0].clone()).unwrap();
    assert!(words0.lines().any(|w| w == "天地"));
    assert_eq!(f.build_dicts().code, 0);
    let second: Vec<Vec<u8>> = (0..2).map(|e| read(&dict_path(&dicts, e))).collect();
    assert_eq!(first, second);
}

#[test]
fn missing_corpus_is_a_data_error() {
    let f = Fixture::new();
    let r = cli(
        &[
            "build-dict",
            "--corpus",
            &f.p("nope.txt"),
            "--era",
            "0",
            "--out",
            &f.p("d"),
        ],
        "",
    );
    assert_eq!(r.code, 2);
    assert!(r.err.contains("nope.txt"), "{}", r.err);
}

#[test]
fn usage_and_config_errors_exit_one() {
    let f = Fixture::new();
    assert_eq!(cli(&["frobnicate"], "").code, 1);
    assert_eq!(
        cli(
            &[
                "build-dict",
                "--corpus",
                "x",
                "--era",
                "0",
                "--era",
                "1",
                "--out",
                "d"
            ],
            ""
        )
        .code,
        1
    );
    assert_eq!(f.build_dicts().code, 0);
    let r = f.train("bad.xwsm", &["--alpha", "1.5"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("alpha"), "{}", r.err);
    let r = f.train("bad.xwsm", &["--set", "colour=blue"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("unknown key"), "{}", r.err);
    let r = f.train("bad.xwsm", &["--mode", "hard"]);
    assert_eq!(r.code, 1);
    assert_eq!(cli(&["--help"], "").code, 0);
}

#[test]
fn train_logs_config_and_is_seed_deterministic() {
    let f = Fixture::new();
    assert_eq!(f.build_dicts().code, 0);
    let a = f.train("a.xwsm", &["--seed", "9", "--mode", "soft+sum"]);
    let b = f.train("b.xwsm", &["--seed", "9", "--mode", "soft+sum"]);
    assert_eq!(a.code, 0, "{}", a.err);
    assert!(a.err.contains("config alpha=0.7"));
    assert!(a.err.contains("config switch_mode=soft"));
    assert!(a.err.contains("config seed=9"));
    assert_eq!(a.out.lines().count(), 2);
    assert!(a.out.starts_with("epoch=1 loss="));
    assert_eq!(a.out, b.out);
    assert_eq!(read(&f.root.join("a.xwsm")), read(&f.root.join("b.xwsm")));
    let c = f.train("c.xwsm", &["--seed", "10", "--mode", "soft+sum"]);
    assert_ne!(read(&f.root.join("a.xwsm")), read(&f.root.join("c.xwsm")));
    assert_eq!(c.code, 0);
}

#[test]
fn segment_format_and_empty_lines() {
    let f = Fixture::new();
    f.ready();
    std::fs::write(f.root.join("in.txt"), "天地人\n\n山水 2021\n").unwrap();
    let args = [
        "segment",
        "--checkpoint",
        &f.p("model.xwsm"),
        "--dict-dir",
        &f.p("dicts"),
    ];
    let mut with_file = args.to_vec();
    let input = f.p("in.txt");
    with_file.push(&input);
    let r = cli(&with_file, "");
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.split('\n').collect();
    assert_eq!(lines.len(), 4, "{:?}", r.out);
    assert_eq!(lines[1], "");
    for l in [lines[0], lines[2]] {
        let (words, era) = l.split_once('\t').unwrap();
        assert!(era == "era=0" || era == "era=1", "{l}");
        assert!(!words.is_empty());
    }
    let (words, _) = lines[2].split_once('\t').unwrap();
    assert_eq!(words.replace(' ', ""), "山水2021");

    let from_stdin = cli(&args, "天地人\n\n山水 2021\n");
    assert_eq!(from_stdin.out, r.out);
    let again = cli(&with_file, "");
    assert_eq!(again.out, r.out);
}

#[test]
fn segment_reports_bad_utf8_line() {
    let f = Fixture::new();
    f.ready();
    std::fs::write(f.root.join("bad.txt"), b"\xe5\xa4\xa9\n\xff\xfe\n").unwrap();
    let r = cli(
        &[
            "segment",
            "--checkpoint",
            &f.p("model.xwsm"),
            "--dict-dir",
            &f.p("dicts"),
            &f.p("bad.txt"),
        ],
        "",
    );
    assert_eq!(r.code, 2);
    assert!(r.err.contains(":2:"), "{}", r.err);
}

#[test]
fn eval_prints_per_era_and_pooled_rows() {
    let f = Fixture::new();
    f.ready();
    let mut a = vec![
        "eval".to_string(),
        "--checkpoint".into(),
        f.p("model.xwsm"),
        "--dict-dir".into(),
        f.p("dicts"),
    ];
    a.extend(f.corpus_args());
    a.extend([
        "--train-corpus".into(),
        f.p("era0.txt"),
        "--train-era".into(),
        "0".into(),
    ]);
    let r = cli(&a.iter().map(String::as_str).collect::<Vec<_>>(), "");
    assert_eq!(r.code, 0, "{}", r.err);
    let machine: Vec<&str> = r.out.lines().filter(|l| l.starts_with("era=")).collect();
    assert_eq!(machine.len(), 3);
    assert!(machine[0].starts_with("era=0 f1="));
    assert!(machine[1].starts_with("era=1 f1="));
    assert!(machine[2].starts_with("era=all f1="));
    // era 1 words never occur in the era 1 training set given, so every
    // era 1 token is out of vocabulary
    assert!(!machine[1].ends_with("roov=NA"));
}

#[test]
fn sweep_tables_have_one_row_per_setting() {
    let f = Fixture::new();
    assert_eq!(f.build_dicts().code, 0);
    let mut base = vec!["sweep".to_string()];
    base.extend(f.corpus_args());
    base.extend([
        "--dev".into(),
        f.p("era1.txt"),
        "--dev-era".into(),
        "1".into(),
        "--config".into(),
        f.p("small.conf"),
        "--set".into(),
        "epochs=1".into(),
        "--dict-dir".into(),
        f.p("dicts"),
        "--grid".into(),
    ]);
    let mut modes = base.clone();
    modes.push("modes".into());
    let r = cli(&modes.iter().map(String::as_str).collect::<Vec<_>>(), "");
    assert_eq!(r.code, 0, "{}", r.err);
    let rows: Vec<&str> = r.out.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("mode=hard+sum\t"));
    assert!(rows[3].starts_with("mode=soft+concat\t"));
    let again = cli(&modes.iter().map(String::as_str).collect::<Vec<_>>(), "");
    assert_eq!(again.out, r.out);

    let mut alpha = base;
    alpha.push("alpha".into());
    let r = cli(&alpha.iter().map(String::as_str).collect::<Vec<_>>(), "");
    assert_eq!(r.code, 0, "{}", r.err);
    let rows: Vec<&str> = r.out.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("alpha=0.0\t") && rows[10].starts_with("alpha=1.0\t"));
}

#[test]
fn binary_separates_streams_and_sets_exit_code() {
    let f = Fixture::new();
    f.ready();
    let bin = env!("CARGO_BIN_EXE_crosswise");
    let ok = Command::new(bin)
        .args([
            "segment",
            "--checkpoint",
            &f.p("model.xwsm"),
            "--dict-dir",
            &f.p("dicts"),
            &f.p("era1.txt"),
        ])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(String::from_utf8(ok.stderr).unwrap().contains("config "));
    let bad = Command::new(bin)
        .args([
            "segment",
            "--checkpoint",
            &f.p("missing.xwsm"),
            "--dict-dir",
            &f.p("dicts"),
        ])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(bad.stdout.is_empty());
}
