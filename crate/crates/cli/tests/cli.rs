use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpa")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kpa(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(kpa(&["--help"]).status.code(), Some(0));
    assert_eq!(kpa(&["--version"]).status.code(), Some(0));
    assert_eq!(kpa(&["eval", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(kpa(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(kpa(&["build-codebook"]).status.code(), Some(2));
    assert_eq!(kpa(&["make-fixtures", "--out", "x", "--grid", "0x3"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpa(&["build-codebook", "--corpus", s(&dir.path().join("nope")), "--out", s(&dir.path().join("cb"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

/// Runs every stage in `root` and returns the files whose bytes must repeat.
fn pipeline(root: &Path, seed: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let fx = root.join("fx");
    let p = |name: &str| root.join(name);
    ok(&["--seed", seed, "make-fixtures", "--out", s(&fx), "--pairs", "10", "--pristine", "12", "--pristine-size", "96"]);
    ok(&[
        "build-vocab",
        "--reports", s(&fx.join("reports.jsonl")),
        "--lexicon", s(&fx.join("lexicon.tsv")),
        "--top-k", "30",
        "--anatomy-seeds", s(&fx.join("anatomy_seeds.txt")),
        "--pathology-seeds", s(&fx.join("pathology_seeds.txt")),
        "--exclusions", s(&fx.join("exclusions.txt")),
        "--out", s(&p("vocab.json")),
        "--freq-out", s(&p("freq.tsv")),
    ]);
    ok(&["--seed", seed, "gen-prompts", "--vocab", s(&p("vocab.json")), "--count", "3", "--out", s(&p("prompts.jsonl"))]);
    ok(&["build-codebook", "--corpus", s(&fx), "--kappa1", "10", "--kappa2", "4", "--out", s(&p("cb"))]);
    let enc = fx.join("word_embeddings.emb1");
    ok(&["retrieve", "--codebook", s(&p("cb")), "--prompts", s(&p("prompts.jsonl")), "--encoder", s(&enc), "--out", s(&p("ret.jsonl"))]);
    ok(&[
        "--seed", seed, "synthesize",
        "--codebook", s(&p("cb")),
        "--vq", s(&fx.join("vq")),
        "--prompts", s(&p("prompts.jsonl")),
        "--encoder", s(&enc),
        "--grid", "12x12",
        "--out", s(&p("synth")),
    ]);
    ok(&["eval", "features", "--images", s(&p("synth")), "--out", s(&p("synth.emb1"))]);
    ok(&["eval", "features", "--images", s(&fx.join("pristine")), "--out", s(&p("real.emb1"))]);
    let fid = ok(&["eval", "fid", "--real", s(&p("real.emb1")), "--synth", s(&p("synth.emb1"))]);
    ok(&["eval", "niqe-fit", "--pristine", s(&fx.join("pristine")), "--out", s(&p("niqe.json")), "--patch-size", "32"]);
    let niqe = ok(&["eval", "niqe", "--model", s(&p("niqe.json")), "--images", s(&fx.join("pristine"))]);
    fs::write(p("metrics.tsv"), format!("{fid}{niqe}")).unwrap();

    let mut files: Vec<PathBuf> = fs::read_dir(p("synth")).unwrap().map(|e| e.unwrap().path()).collect();
    files.extend(["vocab.json", "freq.tsv", "prompts.jsonl", "ret.jsonl", "metrics.tsv", "niqe.json"].map(p));
    files.sort();
    files.into_iter().map(|f| (f.strip_prefix(root).unwrap().to_path_buf(), fs::read(&f).unwrap())).collect()
}

#[test]
fn pipeline_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = pipeline(a.path(), "7");
    let second = pipeline(b.path(), "7");
    assert_eq!(first.iter().filter(|(f, _)| f.extension().is_some_and(|e| e == "pgm")).count(), 3);
    assert_eq!(first.iter().filter(|(f, _)| f.to_string_lossy().ends_with(".provenance.json")).count(), 3);
    assert_eq!(first.len(), second.len());
    for ((fa, ba), (fb, bb)) in first.iter().zip(&second) {
        assert_eq!(fa, fb);
        assert!(ba == bb, "{} differs between runs", fa.display());
    }
    let metrics = String::from_utf8(first.iter().find(|(f, _)| f.ends_with("metrics.tsv")).unwrap().1.clone()).unwrap();
    assert!(metrics.starts_with("metric\treal_n\tsynth_n\tdim\tvalue\nFID\t12\t3\t32\t"));
    assert!(metrics.contains("\nmean\t"));
}

#[test]
fn seeds_change_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |seed: &str| {
        let out = dir.path().join(seed);
        ok(&["--seed", seed, "make-fixtures", "--out", s(&out), "--pristine", "0"]);
        fs::read(out.join("word_embeddings.emb1")).unwrap()
    };
    assert_ne!(gen("1"), gen("2"));
}
