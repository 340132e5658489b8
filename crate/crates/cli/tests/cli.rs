use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn socrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_socrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn toy(file: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/toy")
        .join(file)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Noiseless rank-1 ratings `u_a * v_b` over every pair, written as a ratings file.
fn rank_one_file(dir: &Path) -> (PathBuf, Vec<(String, String, f64)>) {
    let u = [1.0, 1.2, 1.5, 1.8, 2.0];
    let v = [1.0, 1.5, 2.0, 2.5];
    let mut rows = Vec::new();
    for (a, ua) in u.iter().enumerate() {
        for (b, vb) in v.iter().enumerate() {
            rows.push((format!("user{a}"), format!("item{b}"), ua * vb));
        }
    }
    let text: String = rows.iter().map(|(a, b, r)| format!("{a}\t{b}\t{r}\n")).collect();
    let path = dir.join("rank1.tsv");
    fs::write(&path, text).unwrap();
    (path, rows)
}

#[test]
fn train_writes_model_ids_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("out/model.txt");
    let out = socrec(&[
        "train",
        "--method",
        "mf",
        "--ratings",
        &toy("ratings.tsv"),
        "--k",
        "10",
        "--model",
        path_str(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(fs::read_to_string(&model)
        .unwrap()
        .starts_with("SOCREC-MODEL v1 10 20 15"));
    assert!(dir.path().join("out/model.txt.ids").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/model.txt.report.json")).unwrap())
            .unwrap();
    let epochs = report["epochs_run"].as_u64().unwrap() as usize;
    assert_eq!(report["objective_per_epoch"].as_array().unwrap().len(), epochs);
    assert_eq!(report["method"], "BasicMF");
}

#[test]
fn social_training_without_trust_is_a_usage_error() {
    let out = socrec(&["train", "--method", "social", "--ratings", &toy("ratings.tsv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("trust"));
}

#[test]
fn training_twice_gives_identical_model_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a.txt", "b.txt"] {
        let model = dir.path().join(name);
        let out = socrec(&[
            "train",
            "--method",
            "social",
            "--ratings",
            &toy("ratings.tsv"),
            "--trust",
            &toy("trust.tsv"),
            "--seed",
            "4",
            "--model",
            path_str(&model),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(fs::read(&model).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn predict_recovers_a_rank_one_rating() {
    let dir = tempfile::tempdir().unwrap();
    let (ratings, rows) = rank_one_file(dir.path());
    let model = dir.path().join("m.txt");
    let out = socrec(&[
        "train",
        "--ratings",
        path_str(&ratings),
        "--k",
        "1",
        "--lambda",
        "0",
        "--learning-rate",
        "0.01",
        "--max-epochs",
        "20000",
        "--tolerance",
        "1e-14",
        "--init-scale",
        "1",
        "--model",
        path_str(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for (user, item, truth) in rows.iter().step_by(3) {
        let out = socrec(&[
            "predict",
            "--model",
            path_str(&model),
            "--user",
            user,
            "--item",
            item,
        ]);
        assert!(out.status.success());
        let text = stdout(&out);
        assert_eq!(text.lines().count(), 1);
        let got: f64 = text.trim().parse().unwrap();
        assert!((got - truth).abs() <= 0.05, "{user} {item}: {got} vs {truth}");
    }
}

#[test]
fn unknown_user_gets_the_global_mean_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    assert!(socrec(&[
        "train",
        "--ratings",
        &toy("ratings.tsv"),
        "--model",
        path_str(&model)
    ])
    .status
    .success());
    let out = socrec(&[
        "predict",
        "--model",
        path_str(&model),
        "--user",
        "nobody",
        "--item",
        "i01",
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    // global mean of the toy ratings file
    let text = fs::read_to_string(toy("ratings.tsv")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let got: f64 = stdout(&out).trim().parse().unwrap();
    assert!((got - mean).abs() < 1e-4, "{got} vs {mean}");
}

#[test]
fn corrupt_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    assert!(socrec(&[
        "train",
        "--ratings",
        &toy("ratings.tsv"),
        "--model",
        path_str(&model)
    ])
    .status
    .success());
    let text = fs::read_to_string(&model).unwrap();
    fs::write(
        &model,
        text.replacen("SOCREC-MODEL v1 10", "SOCREC-MODEL v1 x", 1),
    )
    .unwrap();
    let out = socrec(&[
        "predict",
        "--model",
        path_str(&model),
        "--user",
        "u01",
        "--item",
        "i01",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_distinguish_usage_data_and_divergence() {
    let ratings = toy("ratings.tsv");
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    let model = path_str(&model);
    let usage = socrec(&["train", "--ratings", &ratings, "--lambda", "-1", "--model", model]);
    assert_eq!(usage.status.code(), Some(1));
    assert!(stderr(&usage).contains("lambda"));
    assert_eq!(socrec(&["train", "--bogus"]).status.code(), Some(1));
    let missing = socrec(&["train", "--ratings", "/nonexistent/r.tsv", "--model", model]);
    assert_eq!(missing.status.code(), Some(2));
    let diverged = socrec(&[
        "train",
        "--ratings",
        &ratings,
        "--learning-rate",
        "100",
        "--model",
        model,
    ]);
    assert_eq!(diverged.status.code(), Some(3));
}

#[test]
fn bad_rating_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("r.tsv");
    fs::write(&ratings, "a x 4\nb y seven\n").unwrap();
    let out = socrec(&[
        "train",
        "--ratings",
        path_str(&ratings),
        "--model",
        path_str(&dir.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));
}

fn experiment(which: &str, dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "experiment",
        which,
        "--ratings",
        "",
        "--trust",
        "",
        "--output-dir",
        path_str(dir),
        "--k",
        "3",
        "--lambda",
        "0.5",
        "--learning-rate",
        "0.01",
        "--max-epochs",
        "200",
        "--seeds",
        "1,2",
        "--fractions",
        "0.8",
    ];
    let (r, t) = (toy("ratings.tsv"), toy("trust.tsv"));
    args[3] = &r;
    args[5] = &t;
    args.extend_from_slice(extra);
    socrec(&args)
}

#[test]
fn compare_writes_four_methods_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment("compare", dir.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4 * 2);
    for method in ["UserMean", "ItemMean", "BasicMF", "SocialMF"] {
        assert_eq!(
            rows.iter()
                .filter(|r| r.split(',').nth(1) == Some(method))
                .count(),
            2
        );
    }
    let summary = fs::read_to_string(dir.path().join("compare-summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(stdout(&out).contains("SocialMF"));
}

#[test]
fn alpha_sweep_has_one_row_per_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment("alpha-sweep", dir.path(), &["--alphas", "0,0.01,0.1,1,10"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for file in ["alpha-sweep.csv", "alpha-sweep-mae.csv", "alpha-sweep-rmse.csv"] {
        let csv = fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(csv.lines().count(), 1 + 5, "{file}");
    }
    let mae = fs::read_to_string(dir.path().join("alpha-sweep-mae.csv")).unwrap();
    assert!(mae.starts_with("alpha,mae\n0,"));
}

#[test]
fn sim_study_on_toy_data_is_fully_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment("sim-study", dir.path(), &["--min-out-degree", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("sim-study-summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "4");
    assert_eq!(row[3].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn ablation_and_cold_start_run_on_toy_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment("ablation", dir.path(), &["--similarities", "pcc,vss,random:3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    assert!(csv.contains("Sim=random:3"));
    let out = experiment("cold-start", dir.path(), &["--cold-start-threshold", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("cold-start.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(
        &conf,
        format!(
            "# toy run\nratings = {}\nk = 2\nmax_epochs = 5\n",
            toy("ratings.tsv")
        ),
    )
    .unwrap();
    let model = dir.path().join("m.txt");
    let out = socrec(&[
        "train",
        "--config",
        path_str(&conf),
        "--k",
        "4",
        "--model",
        path_str(&model),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(fs::read_to_string(&model)
        .unwrap()
        .starts_with("SOCREC-MODEL v1 4 "));
    let report = fs::read_to_string(dir.path().join("m.txt.report.json")).unwrap();
    assert!(report.contains("\"max_epochs\": 5"));

    fs::write(&conf, "k = many\n").unwrap();
    let out = socrec(&[
        "train",
        "--config",
        path_str(&conf),
        "--ratings",
        &toy("ratings.tsv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("k:"));
}
