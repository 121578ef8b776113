use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skipnas_core::analysis::architecture_depth;
use skipnas_core::supernet::Architecture;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn skipnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skipnas"))
        .args(args)
        .env_remove("SKIPNAS_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "2:8,4:8";

fn search_small(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "search",
        "--synthetic",
        SMALL,
        "--variant",
        "full",
        "--b",
        "3",
        "--hidden",
        "8",
        "--epochs",
        "2",
        "--batch-size",
        "8",
        "--folds",
        "4",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    skipnas(&args)
}

#[test]
fn wl_pair_from_fixtures() {
    let o = skipnas(&[
        "analyze",
        "wl",
        "--pair",
        fixture("triangle.tu").to_str().unwrap(),
        fixture("path3.tu").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "k=1");
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let o = skipnas(&["search", "--dataset", "NO_SUCH_SET", "--data-dir", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"), "{}", stderr(&o));

    let o = skipnas(&["search"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no dataset"), "{}", stderr(&o));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(skipnas(&["search", "--variant", "wide"]).status.code(), Some(2));
    assert_eq!(skipnas(&["train", "--synthetic", SMALL]).status.code(), Some(2));
}

#[test]
fn search_writes_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = search_small(&run, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.toml", "summary.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    for k in 0..4 {
        let arch = Architecture::load(run.join(format!("fold{k}.arch"))).unwrap();
        assert_eq!((arch.b, arch.c), (3, 1));
        let csv = std::fs::read_to_string(run.join(format!("fold{k}.metrics.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("epoch,train_loss,val_loss,temperature"));

        let d = skipnas(&["analyze", "depth", "--arch", run.join(format!("fold{k}.arch")).to_str().unwrap()]);
        assert!(d.status.success());
        assert_eq!(stdout(&d).trim().parse::<usize>().unwrap(), architecture_depth(&arch));
    }
}

#[test]
fn replaying_the_persisted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    assert!(search_small(&first, &["--fold", "1"]).status.success());
    let second = dir.path().join("b");
    let o = skipnas(&[
        "search",
        "--config",
        first.join("config.toml").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["fold1.arch", "fold1.metrics.csv"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
    assert!(!second.join("fold0.arch").exists());
}

#[test]
fn parallel_folds_match_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    let par = dir.path().join("par");
    assert!(search_small(&seq, &["--fold", "0,2"]).status.success());
    assert!(search_small(&par, &["--fold", "0,2", "--parallel-folds", "2"]).status.success());
    for f in ["fold0.arch", "fold2.arch", "fold0.metrics.csv", "fold2.metrics.csv"] {
        assert_eq!(std::fs::read(seq.join(f)).unwrap(), std::fs::read(par.join(f)).unwrap(), "{f}");
    }
}

fn train_preset(out: &Path) -> Output {
    skipnas(&[
        "train",
        "--preset",
        "GCN_stack(4)",
        "--synthetic",
        SMALL,
        "--folds",
        "4",
        "--fold",
        "0,1",
        "--trials",
        "1",
        "--epochs",
        "2",
        "--hidden",
        "8",
        "--batch-size",
        "8",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn train_prints_accuracy_with_depth_tag() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_preset(&dir.path().join("a"));
    assert!(a.status.success(), "{}", stderr(&a));
    let last = stdout(&a).lines().last().unwrap().to_string();
    assert!(last.ends_with("[L4]"), "{last}");
    let (acc, _) = last.split_once('(').unwrap();
    assert!((0.0..=100.0).contains(&acc.parse::<f64>().unwrap()));

    let trials = std::fs::read_to_string(dir.path().join("a/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3);

    let b = train_preset(&dir.path().join("b"));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn train_from_a_search_run() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(search_small(&run, &["--fold", "0"]).status.success());
    let o = skipnas(&[
        "train",
        "--arch",
        run.to_str().unwrap(),
        "--synthetic",
        SMALL,
        "--folds",
        "4",
        "--fold",
        "0",
        "--trials",
        "2",
        "--epochs",
        "1",
        "--batch-size",
        "8",
        "--hidden",
        "8",
        "--out",
        dir.path().join("t").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let depth = architecture_depth(&Architecture::load(run.join("fold0.arch")).unwrap());
    assert!(stdout(&o).trim_end().ends_with(&format!("[L{depth}]")));
}

#[test]
fn malformed_architecture_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.arch");
    std::fs::write(&path, "{\n  \"variant\": \"full\",\n  \"B\": oops\n}\n").unwrap();
    let o = skipnas(&["train", "--arch", path.to_str().unwrap(), "--synthetic", SMALL]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert_eq!(skipnas(&["analyze", "depth", "--arch", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn diameter_histogram_of_synthetic_trees() {
    let o = skipnas(&["analyze", "diameter", "--synthetic", "3:4,6:4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("3,4\n") && text.contains("6,4\n"), "{text}");
    assert!(text.trim_end().ends_with("average 4.50"), "{text}");
}

#[test]
fn smooth_table_has_one_row_per_depth() {
    let o = skipnas(&[
        "analyze",
        "smooth",
        "--synthetic",
        SMALL,
        "--folds",
        "4",
        "--depths",
        "1,3",
        "--epochs",
        "1",
        "--hidden",
        "8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "layers,distance,train_acc,test_acc");
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("3,"));
}
