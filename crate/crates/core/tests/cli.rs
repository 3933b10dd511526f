use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chebdea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chebdea")).args(args).output().unwrap()
}

const HEADER: &str = "id,name,expenditures_2016,expenditures_2017,employees_2017,collection_2016,collection_2017,registrations_2017,circulation_2017,event_attendance_2017,population,density,town_distance";

fn write_hand_panel(path: &Path) {
    fs::write(
        path,
        format!("{HEADER}\nA,Alpha,1,0,0,0,0,2,0,0,100,1,5\nB,Beta,2,0,0,0,0,1,0,0,300,1,20\n"),
    )
    .unwrap();
}

#[test]
fn scores_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("hand.csv");
    write_hand_panel(&input);
    let out = chebdea(&["scores", "--input", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,delta,score,efficient"));
    let a: Vec<&str> = lines.next().unwrap().split(',').collect();
    let b: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((a[0], a[2], a[3]), ("A", "2", "true"));
    assert!((b[2].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn synth_then_pipeline_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let syn = format!("{d}/syn");
    let out = chebdea(&["synth", "--units", "150", "--seed", "4", "--out", &syn]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.csv", "truth.csv", "planted.csv"] {
        assert!(Path::new(&syn).join(f).exists(), "{f}");
    }

    let rep = format!("{d}/rep");
    let records = format!("{syn}/records.csv");
    let out = chebdea(&[
        "pipeline", "--mode", "both", "--input", &records, "--out", &rep, "--min-bucket", "10", "--leaves", "4",
        "--threads", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(format!("{rep}/summary.txt")).unwrap();
    assert!(summary.contains("Categories (tree)") && summary.contains("Categories (expert)"));
    assert!(Path::new(&rep).join("tree.txt").exists());

    let out = chebdea(&["compare", "--input", &format!("{rep}/scores.csv")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("score_set,preliminary,tree,expert\n"), "{text}");
    assert_eq!(
        text,
        fs::read_to_string(format!("{rep}/correlations.csv")).unwrap()
    );
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, HEADER.replace(",population", "") + "\n").unwrap();
    let out = chebdea(&["second-stage", "--input", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("population"));

    assert_eq!(chebdea(&["scores"]).status.code(), Some(1));
    assert_eq!(chebdea(&["scores", "--rts", "drs"]).status.code(), Some(1));
    let missing = dir.path().join("nope.csv");
    assert_eq!(chebdea(&["scores", "--input", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(chebdea(&["--help"]).status.code(), Some(0));
}

#[test]
fn warnings_go_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gappy.csv");
    fs::write(
        &input,
        format!("{HEADER}\nA,Alpha,1,0,0,0,0,2,0,0,100,1,5\nB,Beta,2,0,0,0,0,1,x,0,300,1,20\n"),
    )
    .unwrap();
    let out = chebdea(&["scores", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("circulation_2017"), "{err}");
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
}
