use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use socialclust::cluster::ElbowCurve;
use socialclust::ingest::CorpusSummary;
use socialclust::protocol::KSelectionReport;

fn socialclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socialclust")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = socialclust(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

const THREE_COMMENTS: &str = "comment_id,author_id,parent_id,week,step,timestamp,likes
1,alice,,1,1,2019-01-01T00:00:00Z,0
2,bob,1,1,1,2019-01-01T00:05:00Z,2
3,carol,,1,2,2019-01-01T00:09:00Z,0
";

fn synth_log(dir: &Path, students: usize, seed: u64) -> String {
    let spec = socialclust::synth::PAPER_MIMIC_SPEC.replace("n_students = 2302", &format!("n_students = {students}"));
    let spec_path = dir.join("spec.txt");
    fs::write(&spec_path, spec).unwrap();
    let log = dir.join("log.csv");
    ok(&["synth", "--spec", spec_path.to_str().unwrap(), "--output", log.to_str().unwrap(), "--seed", &seed.to_string()]);
    log.to_str().unwrap().to_string()
}

#[test]
fn missing_input_fails() {
    let out = socialclust(&["summarize", "--input", "/nonexistent/log.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    assert!(!socialclust(&["cluster", "--input", "/nonexistent/log.csv"]).status.success());
    assert!(!socialclust(&["no-such-command"]).status.success());
}

#[test]
fn summarize_three_comments() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    fs::write(&path, THREE_COMMENTS).unwrap();
    let text = String::from_utf8(ok(&["summarize", "--input", path.to_str().unwrap()])).unwrap();
    assert_eq!(text.matches("33.33%").count(), 3, "{text}");
    let json = ok(&["summarize", "--input", path.to_str().unwrap(), "--format", "json"]);
    let summary: CorpusSummary = serde_json::from_slice(&json).unwrap();
    assert_eq!(summary.total, 3);
    assert_eq!(summary.ice_breaking.count, 1);
}

#[test]
fn strict_flag_rejects_dangling_replies() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    fs::write(&path, format!("{THREE_COMMENTS}4,dan,99,1,1,2019-01-01T00:10:00Z,0\n")).unwrap();
    let lenient = socialclust(&["summarize", "--input", path.to_str().unwrap()]);
    assert!(lenient.status.success());
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("warning"));
    assert!(!socialclust(&["summarize", "--input", path.to_str().unwrap(), "--strict"]).status.success());
}

#[test]
fn features_writes_table_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth_log(dir.path(), 300, 5);
    let out_dir = dir.path().join("features");
    ok(&["features", "--input", &log, "--output-dir", out_dir.to_str().unwrap()]);
    let table = fs::read_to_string(out_dir.join("features.csv")).unwrap();
    assert!(table.starts_with("student_id,n_ice,n_resp,n_solo\n"));
    assert_eq!(table.lines().count(), 301);
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("feature-stats.json")).unwrap()).unwrap();
    assert_eq!(stats["kurtosis_kind"], "excess");
}

#[test]
fn single_k_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth_log(dir.path(), 400, 2);
    let json = ok(&["select-k", "--input", &log, "--k-min", "3", "--k-max", "3", "--format", "json"]);
    let report: KSelectionReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(report.candidates.len(), 1);
    assert_eq!(report.candidates[0].k, 3);
    assert!(report.profiles.is_empty());
    assert!(!socialclust(&["select-k", "--input", &log, "--k-min", "4", "--k-max", "3"]).status.success());
}

#[test]
fn cluster_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth_log(dir.path(), 500, 9);
    let run = |threads: Option<&str>, out: &str| {
        let out_dir = dir.path().join(out);
        let mut args = Vec::new();
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        args.extend(["cluster", "--input", &log, "--seed", "4", "--output-dir", out_dir.to_str().unwrap()]);
        let stdout = ok(&args);
        let files: Vec<Vec<u8>> = ["report.json", "report.txt", "wcss.tsv", "clusters.tsv"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).unwrap())
            .collect();
        (stdout, files)
    };
    let reference = run(None, "a");
    assert_eq!(run(None, "b"), reference);
    assert_eq!(run(Some("1"), "c"), reference);
    assert_eq!(run(Some("3"), "d"), reference);
    let text = String::from_utf8(reference.0).unwrap();
    assert!(text.contains("optimal k"), "{text}");
    assert!(!socialclust(&["--threads", "0", "cluster", "--input", &log]).status.success());
}

#[test]
fn synth_seed_overrides_spec() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        let mut args = vec!["synth", "--output", path.to_str().unwrap()];
        if !seed.is_empty() {
            args.extend(["--seed", seed]);
        }
        ok(&args);
        fs::read(path).unwrap()
    };
    let default = run("", "default.csv");
    let same = run("20190801", "same.csv");
    let other = run("1", "other.csv");
    assert_eq!(default, same);
    assert_ne!(default, other);

    let labels = dir.path().join("labels.tsv");
    let log = dir.path().join("labelled.csv");
    ok(&["synth", "--output", log.to_str().unwrap(), "--labels", labels.to_str().unwrap()]);
    let labels = fs::read_to_string(labels).unwrap();
    assert_eq!(labels.lines().filter(|l| l.ends_with("\tIntrovert")).count(), 2081);
}

#[test]
fn invalid_spec_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    fs::write(&spec, "n_students = 10\n[persona a]\nproportion = 1\nn_ice = zipf 2\n").unwrap();
    let out = socialclust(&["synth", "--spec", spec.to_str().unwrap(), "--output", dir.path().join("x").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn elbow_command() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth_log(dir.path(), 300, 1);
    let json = ok(&["elbow", "--input", &log, "--k-max", "5", "--format", "json"]);
    let curve: ElbowCurve = serde_json::from_slice(&json).unwrap();
    assert_eq!(curve.points.iter().map(|p| p.k).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    let text = String::from_utf8(ok(&["elbow", "--input", &log, "--k-max", "5"])).unwrap();
    assert!(text.starts_with("# k\twcss\n"));
    assert!(!socialclust(&["elbow", "--input", &log, "--k-min", "0"]).status.success());
}

#[test]
fn feature_table_input() {
    let dir = tempfile::tempdir().unwrap();
    let spec = socialclust::synth::PAPER_MIMIC_SPEC
        .replace("emit = comment-log", "emit = feature-table")
        .replace("n_students = 2302", "n_students = 400");
    let spec_path = dir.path().join("spec.txt");
    fs::write(&spec_path, spec).unwrap();
    let table = dir.path().join("table.csv");
    ok(&["synth", "--spec", spec_path.to_str().unwrap(), "--output", table.to_str().unwrap()]);
    let json = ok(&["cluster", "--input", table.to_str().unwrap(), "--table", "--format", "json"]);
    let report: KSelectionReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(report.students, 400);
}
