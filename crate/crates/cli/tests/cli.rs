use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rpens"))
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic.csv")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn rpens")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data rows of a CSV written by the CLI, without the comment header.
fn body(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

const SMALL_SIM: &[&str] = &[
    "simulate", "--model", "2", "--p", "8", "--n", "50", "--n-test", "200", "--d", "2",
    "--base", "lda", "--B1", "8", "--B2", "5", "--seed", "3",
];

#[test]
fn single_repetition_has_zero_standard_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let mut args = SMALL_SIM.to_vec();
    args.extend(["--reps", "1", "--out", p(&out)]);
    ok(&args);
    let records = body(&out.join("records.csv"));
    let error: f64 = records[1].split(',').nth(2).unwrap().parse().unwrap();
    let summary = body(&out.join("summary.csv"));
    let fields: Vec<&str> = summary[1].split(',').collect();
    assert!((fields[1].parse::<f64>().unwrap() - 100.0 * error).abs() < 1e-4);
    assert_eq!(fields[2], "0.0000");
    assert_eq!(fields[3], "1");
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(name);
        let mut args = SMALL_SIM.to_vec();
        args.extend(["--reps", "3", "--compare", "knn", "--threads", threads]);
        let shown = ok(&args);
        // The output path is echoed in the header, so reuse one name.
        let fixed = dir.path().join("out");
        let _ = fs::remove_dir_all(&fixed);
        args.extend(["--out", p(&fixed)]);
        ok(&args);
        fs::rename(&fixed, &out).unwrap();
        outputs.push((
            shown,
            fs::read(out.join("records.csv")).unwrap(),
            fs::read(out.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(text.starts_with("# rpens "));
    assert!(text.contains("# seed: 3"));
    assert!(!text.contains("threads"));
}

#[test]
fn fit_then_predict_interpolates_with_one_neighbour() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let data = fixture();
    ok(&[
        "fit", "--train", p(&data), "--d", "3", "--base", "knn", "--k", "1", "--B1", "1",
        "--B2", "4", "--model-out", p(&model),
    ]);
    let preds = dir.path().join("pred.csv");
    ok(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&preds)]);
    let predicted: Vec<String> = body(&preds)[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect();
    let truth: Vec<String> = body(&data)[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(predicted, truth);
}

#[test]
fn saved_models_predict_identically() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let data = fixture();
    ok(&[
        "fit", "--train", p(&data), "--d", "2", "--base", "qda", "--B1", "12", "--B2", "6",
        "--seed", "5", "--model-out", p(&model), "--plots", p(dir.path()),
    ]);
    let first = ok(&["predict", "--model", p(&model), "--data", p(&data)]);
    let second = ok(&["predict", "--model", p(&model), "--data", p(&data)]);
    assert_eq!(first, second);
    assert!(first.lines().filter(|l| !l.starts_with('#')).count() == 81);

    // Refitting with the same flags writes the same file.
    let again = dir.path().join("m2.json");
    ok(&[
        "fit", "--train", p(&data), "--d", "2", "--base", "qda", "--B1", "12", "--B2", "6",
        "--seed", "5", "--model-out", p(&again),
    ]);
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());

    let curves = body(&dir.path().join("g_curves.csv"));
    assert_eq!(curves[0], "t,g1,g2,objective");
    assert_eq!(curves.len(), 202);
    let ecdf = body(&dir.path().join("winner_ecdf.csv"));
    assert_eq!(ecdf.last().unwrap().split(',').nth(1).unwrap(), "1.0");
}

#[test]
fn dimension_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    ok(&[
        "fit", "--train", p(&fixture()), "--d", "2", "--base", "lda", "--B1", "3", "--B2", "3",
        "--model-out", p(&model),
    ]);
    let narrow = dir.path().join("narrow.csv");
    fs::write(&narrow, "label,x1,x2\n1,0.5,0.1\n2,-0.3,0.2\n").unwrap();
    let out = run(&["predict", "--model", p(&model), "--data", p(&narrow)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected 6 columns"));
}

#[test]
fn schema_errors_name_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "label,x1,x2\n1,0.5,0.1\n3,0.1,0.2\n2,abc,0.2\n").unwrap();
    let model = dir.path().join("m.json");
    let out = run(&["fit", "--train", p(&bad), "--d", "1", "--model-out", p(&model)]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("line 4"), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["simulate", "--model", "1", "--n", "20", "--d", "2", "--bogus", "1"],
        vec!["simulate", "--model", "7", "--n", "20", "--d", "2"],
        vec!["simulate", "--model", "1", "--n", "20", "--d", "2", "--alpha", "1.0"],
        vec!["simulate", "--model", "1", "--p", "5", "--n", "20", "--d", "9"],
        vec!["bayes-risk", "--model", "1", "--threads", "0"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# bayes risk settings\nmodel = 2\np = 5\nmc-n = 2000\nseed = 1\n").unwrap();
    let from_file = ok(&["bayes-risk", "--config", p(&conf)]);
    let explicit = ok(&["bayes-risk", "--model", "2", "--p", "5", "--mc-n", "2000", "--seed", "1"]);
    assert_eq!(from_file, explicit);
    let overridden = ok(&["bayes-risk", "--config", p(&conf), "--mc-n", "300"]);
    let explicit2 = ok(&["bayes-risk", "--model", "2", "--p", "5", "--mc-n", "300", "--seed", "1"]);
    assert_eq!(overridden, explicit2);
    assert!(overridden.contains("300 draws"));

    fs::write(&conf, "model = 2\nbogus = 1\n").unwrap();
    assert_eq!(code(&run(&["bayes-risk", "--config", p(&conf)])), 2);
}

#[test]
fn bayes_risk_prints_estimate_and_error() {
    let out = ok(&["bayes-risk", "--model", "2", "--p", "50", "--mc-n", "200000", "--seed", "4"]);
    let (mean, rest) = out.split_once(" ± ").unwrap();
    let mean: f64 = mean.parse().unwrap();
    let se: f64 = rest.split_whitespace().next().unwrap().parse().unwrap();
    // Published value 10.0 for this model.
    assert!((mean - 10.0).abs() < 3.0 * se + 0.05, "{out}");
}

#[test]
fn select_d_and_diagnostics_run() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("d.csv");
    let shown = ok(&[
        "select-d", "--train", p(&fixture()), "--candidates", "1,2,3", "--base", "lda", "--B1",
        "6", "--B2", "6", "--out", p(&scores),
    ]);
    assert!(shown.contains("chosen d = "));
    assert_eq!(body(&scores).len(), 4);

    let rate = dir.path().join("rate.csv");
    let shown = ok(&[
        "diagnose", "rate", "--model", "1", "--p", "5", "--n", "40", "--n-test", "100", "--d",
        "2", "--base", "lda", "--B2", "3", "--alpha", "0.5", "--grid", "1,2,4,8",
        "--replicates", "2", "--out", p(&rate),
    ]);
    assert!(shown.contains("B1_max = 32"));
    assert_eq!(body(&rate).len(), 5);

    let out = run(&[
        "diagnose", "rate", "--model", "1", "--p", "5", "--n", "40", "--d", "2", "--grid",
        "1,2,4,8", "--replicates", "2",
    ]);
    assert_eq!(code(&out), 2, "data-driven alpha is rejected");

    let shown = ok(&[
        "diagnose", "bound", "--model", "2", "--p", "5", "--n", "60", "--d", "2", "--base",
        "lda", "--B1", "10", "--B2", "5", "--alpha", "0.5", "--mc-n", "2000",
    ]);
    assert!(shown.contains("bound "));
}
