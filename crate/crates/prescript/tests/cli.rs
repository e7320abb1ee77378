//! End-to-end runs of the binary: the full pipeline, byte-determinism of
//! everything it writes, the exit-code contract (0 ok, 1 runtime failure,
//! 2 usage), and the rules path.

use std::path::Path;
use std::process::{Command, Output};

fn prescript(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prescript"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = prescript(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn pipeline_gen_train_extract_verify_eval_partitions() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = ok(
        &["gen", "--dataset", "1", "--seed", "7", "--out", "data", "--n-train", "400",
          "--n-test", "120"],
        d,
    );
    assert!(out.contains("400 train"), "{out}");
    for f in ["train.csv", "test.csv", "train_oracle.csv", "test_oracle.csv"] {
        assert!(d.join("data").join(f).is_file(), "missing {f}");
    }

    std::fs::write(d.join("train.cfg"), "epochs=4\nbatch_size=64\nlr=0.005\n").unwrap();
    let out = ok(
        &["train", "--data", "data/train.csv", "--out", "model.json", "--config", "train.cfg",
          "--hidden", "4", "--oracle", "data/train_oracle.csv", "--report", "train_report.json"],
        d,
    );
    assert!(out.contains("oracle accuracy"), "{out}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("train_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["epochs"], 4);
    assert_eq!(report["n_train"], 400);
    assert_eq!(report["epoch_losses"].as_array().unwrap().len(), 4);

    let out = ok(
        &["extract-tree", "--model", "model.json", "--out", "tree.json", "--mode", "exact",
          "--dot", "tree.dot"],
        d,
    );
    assert!(out.contains("splits"), "{out}");
    assert!(std::fs::read_to_string(d.join("tree.dot")).unwrap().starts_with("digraph"));

    let out = ok(
        &["verify", "--model", "model.json", "--tree", "tree.json", "--n", "3000", "--seed", "1",
          "--lo=-2", "--hi=2"],
        d,
    );
    assert!(out.contains(" 0 mismatches"), "{out}");

    let out = ok(
        &["eval", "--model", "model.json", "--data", "data/test.csv", "--oracle",
          "data/test_oracle.csv", "--rc-train", "data/train.csv", "--report", "eval.json"],
        d,
    );
    assert!(out.contains("policy") && out.contains("network") && out.contains("rc-ols"), "{out}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 2);

    ok(
        &["extract-tree", "--model", "model.json", "--out", "tree_dd.json", "--mode",
          "data-driven", "--data", "data/train.csv"],
        d,
    );
    let out = ok(
        &["eval", "--tree", "tree_dd.json", "--data", "data/test.csv", "--oracle",
          "data/test_oracle.csv"],
        d,
    );
    assert!(out.contains("tree"), "{out}");

    let out = ok(
        &["partitions", "--model", "model.json", "--data", "data/test.csv", "--out",
          "regions.json"],
        d,
    );
    assert!(out.contains("linear regions"), "{out}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("regions.json")).unwrap()).unwrap();
    assert_eq!(report["n_points"], 120);
    assert!(report["n_regions"].as_u64().unwrap() >= 1);
}

#[test]
fn reruns_write_byte_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for dir in ["a", "b"] {
        ok(
            &["gen", "--dataset", "2", "--seed", "3", "--out", dir, "--n-train", "200",
              "--n-test", "40"],
            d,
        );
    }
    for f in ["train.csv", "test.csv", "train_oracle.csv", "test_oracle.csv"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }

    for out in ["m1.json", "m2.json"] {
        ok(
            &["train", "--data", "a/train.csv", "--out", out, "--hidden", "5", "--seed", "9"],
            d,
        );
    }
    let m1 = std::fs::read(d.join("m1.json")).unwrap();
    assert_eq!(m1, std::fs::read(d.join("m2.json")).unwrap());

    ok(
        &["train", "--data", "a/train.csv", "--out", "m3.json", "--hidden", "5", "--seed", "10"],
        d,
    );
    assert_ne!(m1, std::fs::read(d.join("m3.json")).unwrap(), "seed must matter");
}

#[test]
fn exit_codes_distinguish_usage_from_runtime_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = prescript(&["gen", "--dataset", "1"], d);
    assert_eq!(out.status.code(), Some(2), "missing required flag is a usage error");
    let out = prescript(
        &["eval", "--model", "m.json", "--tree", "t.json", "--data", "x.csv", "--oracle", "y.csv"],
        d,
    );
    assert_eq!(out.status.code(), Some(2), "--model conflicts with --tree");
    let out = prescript(&["no-such-command"], d);
    assert_eq!(out.status.code(), Some(2));

    let out = prescript(&["train", "--data", "missing.csv", "--out", "m.json"], d);
    assert_eq!(out.status.code(), Some(1), "missing input is a runtime error");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn verify_flags_a_tree_that_contradicts_its_network() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["gen", "--dataset", "1", "--seed", "5", "--out", "data", "--n-train", "150",
         "--n-test", "10"], d);
    ok(&["train", "--data", "data/train.csv", "--out", "model.json", "--hidden", "3"], d);
    ok(&["extract-tree", "--model", "model.json", "--out", "tree.json"], d);

    // Swap every leaf's arm; the tree then disagrees almost everywhere.
    let tree = std::fs::read_to_string(d.join("tree.json")).unwrap();
    let flipped = tree
        .replace("\"treatment\":0", "\"treatment\":X")
        .replace("\"treatment\":1", "\"treatment\":0")
        .replace("\"treatment\":X", "\"treatment\":1");
    std::fs::write(d.join("flipped.json"), flipped).unwrap();

    let out = prescript(
        &["verify", "--model", "model.json", "--tree", "flipped.json", "--n", "500",
          "--lo=-2", "--hi=2"],
        d,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mismatches"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn rules_flow_filters_trains_extracts_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["gen", "--dataset", "1", "--seed", "11", "--out", "data", "--n-train", "300",
         "--n-test", "50"], d);

    // One derived column (x1 squared, so width 21) and one rule on raw x1:
    // arm 1 is forbidden where x1 > 1.
    let mut row = vec![0.0; 21];
    row[0] = 1.0;
    let rules = serde_json::json!({
        "rules": [{"a": [row], "b": [1.0], "allowed": [0]}],
        "transforms": [{"name": "x1sq", "op": "square", "args": [1]}],
    });
    std::fs::write(d.join("rules.json"), serde_json::to_string(&rules).unwrap()).unwrap();

    let out = ok(
        &["train", "--data", "data/train.csv", "--out", "model.json", "--hidden", "3",
          "--rules", "rules.json", "--oracle", "data/train_oracle.csv"],
        d,
    );
    assert!(out.contains("filtered"), "some observed arms must violate the rule: {out}");
    let model = std::fs::read_to_string(d.join("model.json")).unwrap();
    assert!(model.contains("\"rules\"") && model.contains("\"transforms\""));

    ok(&["extract-tree", "--model", "model.json", "--out", "tree.json", "--mode", "exact"], d);
    let out = ok(
        &["verify", "--model", "model.json", "--tree", "tree.json", "--n", "1500",
          "--lo=-2", "--hi=2"],
        d,
    );
    assert!(out.contains(" 0 mismatches"), "{out}");

    let out = prescript(
        &["partitions", "--model", "model.json", "--data", "data/test.csv", "--out",
          "regions.json"],
        d,
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"), "rule warning expected");
}
