use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

const GROUPS: [&str; 5] = ["Discussion", "Documentation", "FalsePositive", "Functional", "Refactoring"];
const WORDS: [&str; 5] = ["why not", "typo in docstring", "never mind", "crashes on None", "extract helper"];

fn revclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revclass")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = revclass(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Labels, comments and inline pairs for 30 comments, six per group.
fn write_inputs(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let mut labels = String::from("comment_id,group\n");
    let mut comments = String::new();
    let mut pairs = String::new();
    for (g, group) in GROUPS.iter().enumerate() {
        for k in 0..6 {
            let id = format!("c{g}{k}");
            labels.push_str(&format!("{id},{group}\n"));
            let c = json!({
                "comment_id": id, "change_id": format!("{}", 100 + k), "patchset_number": 1,
                "file_path": "pkg/mod.py", "line": 2, "author_id": format!("rev{}", k % 3),
                "text": format!("{} {k}", WORDS[g]),
            });
            comments.push_str(&format!("{c}\n"));
            let source = format!("def f{k}(a):\n    x = a + {k}\n    return x\n");
            let destination = if g == 3 { source.replace("return x", "if x:\n        return x\n    return None") } else { source.clone() };
            let pair = json!({"comment_id": id, "file_path": "pkg/mod.py", "source": source, "destination": destination});
            pairs.push_str(&format!("{pair}\n"));
        }
    }
    let paths = (dir.join("labels.csv"), dir.join("comments.jsonl"), dir.join("pairs.jsonl"));
    fs::write(&paths.0, labels).unwrap();
    fs::write(&paths.1, comments).unwrap();
    fs::write(&paths.2, pairs).unwrap();
    paths
}

#[test]
fn end_to_end_on_a_tiny_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let (labels, comments, pairs) = write_inputs(dir);
    let dataset = dir.join("dataset");

    let stdout = ok(&["import-dataset", "--labels", p(&labels), "--comments", p(&comments), "--pairs", p(&pairs), "--out", p(&dataset)]);
    assert!(stdout.contains("30"), "{stdout}");

    let sample = ok(&["sample", "--n", "5", "--seed", "3", "--dataset", p(&dataset)]);
    assert_eq!(sample.lines().count(), 5);
    assert_eq!(sample, ok(&["sample", "--n", "5", "--seed", "3", "--dataset", p(&dataset)]));

    let attrs = dir.join("attributes.csv");
    ok(&["extract", "--dataset", p(&dataset), "--out", p(&attrs)]);
    let text = fs::read_to_string(&attrs).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.lines().next().unwrap().contains("cyclomatic"));

    let config = dir.join("model.conf");
    fs::write(&config, "max_epochs = 2\nencoder.stub_dim = 8\nmax_length = 32\n").unwrap();
    let model = dir.join("model.json");
    ok(&["train", "--dataset", p(&dataset), "--config", p(&config), "--out", p(&model)]);
    assert!(model.exists());

    let predictions = dir.join("predictions.csv");
    ok(&["classify", "--model", p(&model), "--in", p(&comments), "--pairs", p(&pairs), "--out", p(&predictions)]);
    let rows = fs::read_to_string(&predictions).unwrap();
    assert_eq!(rows.lines().count(), 31);
    assert!(rows.starts_with("comment_id,p_discussion"));

    let report = dir.join("eval.json");
    ok(&["evaluate", "--dataset", p(&dataset), "--config", p(&config), "--folds", "3", "--out", p(&report), "--csv", p(&dir.join("eval.csv"))]);
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(parsed.is_object());
    assert!(dir.join("eval.csv").exists());

    let rf = dir.join("rf.json");
    ok(&["baseline", "--dataset", p(&dataset), "--folds", "3", "--n-trees", "10", "--attribute-set", "table2_27", "--out", p(&rf)]);
    assert!(rf.exists());

    let reviewers = dir.join("reviewers");
    fs::create_dir(&reviewers).unwrap();
    ok(&["report", "reviewers", "--predictions", p(&predictions), "--comments", p(&comments), "--out", p(&reviewers)]);
    let csv = fs::read_to_string(reviewers.join("reviewers.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(fs::read_to_string(reviewers.join("reviewers.svg")).unwrap().contains("<svg"));

    let ranked = dir.join("ranked.csv");
    ok(&["report", "prioritize", "--predictions", p(&predictions), "--out", p(&ranked)]);
    assert_eq!(fs::read_to_string(&ranked).unwrap().lines().count(), 31);

    let ratios = dir.join("ratios");
    fs::create_dir(&ratios).unwrap();
    ok(&["report", "ratios", "--predictions", p(&predictions), "--out", p(&ratios), "--no-chart"]);
    assert_eq!(fs::read_to_string(ratios.join("ratios.csv")).unwrap().lines().count(), 6);
    assert!(!ratios.join("ratios.svg").exists());
}

#[test]
fn bad_input_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = revclass(&["report", "ratios", "--predictions", p(&missing), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad = tmp.path().join("bad.conf");
    fs::write(&bad, "max_epochs = lots\n").unwrap();
    let out = revclass(&["train", "--dataset", p(tmp.path()), "--config", p(&bad), "--out", p(&tmp.path().join("m.json"))]);
    assert!(!out.status.success());

    let out = revclass(&["mine", "--endpoint", "http://x", "--since", "2020-13-01", "--until", "2020-01-01", "--out", "o"]);
    assert!(!out.status.success());
}
