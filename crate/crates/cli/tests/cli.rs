use std::path::Path;
use std::process::{Command, Output};

use missom::bench::{run_method, Algorithm, MethodConfig};
use missom::io;
use missom::{GridSpec, Topology};
use missom_cli::{run_pipeline, RunConfig, ScheduleArgs};

fn missom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_missom"))
        .current_dir(dir)
        .args(args)
        .env_clear()
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = missom(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn prepare(dir: &Path, n: &str, rate: &str) {
    ok(dir, &["datagen", "--n", n, "--seed", "9", "--out", "x.csv", "--labels", "labels.csv"]);
    ok(dir, &["ampute", "--input", "x.csv", "--rate", rate, "--mechanism", "mcar", "--seed", "2", "--out", "a.csv", "--truth", "truth.csv"]);
}

const SMALL: [&str; 6] = ["--rows", "4", "--cols", "5", "--epochs", "15"];

#[test]
fn complete_data_som_has_no_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["datagen", "--n", "120", "--out", "x.csv"]);
    let mut args = vec!["train", "--input", "x.csv", "--algorithm", "som", "--codebook", "cb.csv", "--report", "r.json"];
    args.extend(SMALL);
    let stdout = ok(d, &args);
    let cb = std::fs::read_to_string(d.join("cb.csv")).unwrap();
    let lines: Vec<&str> = cb.lines().collect();
    assert_eq!(lines[0], "neuron,row,col,x1,x2,x3,x4,x5");
    assert_eq!(lines.len(), 1 + 20);
    let report = json(&std::fs::read_to_string(d.join("r.json")).unwrap());
    assert_eq!(report, json(&stdout));
    assert!(report.get("imputation_rmse").is_none());
    assert!(report.get("quantization").is_some() && report.get("topographic").is_some());
    assert_eq!(report["algorithm"], "som");
    assert_eq!(report["seed"], 0);
}

#[test]
fn full_pipeline_reports_every_metric() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "150", "0.2");
    let mut args = vec![
        "train", "--input", "a.csv", "--truth", "truth.csv", "--labels", "labels.csv", "--seed", "4", "--svg", "map.svg",
        "--lambda0", "auto",
    ];
    args.extend(SMALL);
    let report = json(&ok(d, &args));
    for key in ["quantization", "topographic", "imputation_rmse", "ari", "wall_time_s"] {
        assert!(report[key].is_number(), "missing {key}");
    }
    assert_eq!(report["seed"], 4);
    let svg = std::fs::read_to_string(d.join("map.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 20);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "100", "0.2");
    for algorithm in ["misssom", "misssom-basic", "cottrell", "knn"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let cb = format!("cb{run}.csv");
            let comp = format!("c{run}.csv");
            let mut args = vec!["train", "--input", "a.csv", "--algorithm", algorithm, "--outer-iters", "2", "--codebook", &cb, "--completed", &comp];
            args.extend(SMALL);
            ok(d, &args);
            outputs.push((std::fs::read(d.join(&cb)).unwrap(), std::fs::read(d.join(&comp)).unwrap()));
        }
        assert_eq!(outputs[0], outputs[1], "{algorithm}");
    }
}

#[test]
fn artifacts_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "90", "0.2");
    let grid = GridSpec::hexagonal(4, 5).unwrap();
    let mut config = RunConfig::new(Algorithm::MissSom, grid, d.join("a.csv"));
    config.schedule = ScheduleArgs {
        epochs: Some(12),
        ..Default::default()
    };
    config.seed = 8;
    config.codebook_out = Some(d.join("cb.csv"));
    config.completed_out = Some(d.join("c.csv"));
    run_pipeline(&config).unwrap();

    let table = missom_cli::load_table(&d.join("a.csv"), None).unwrap();
    let method = MethodConfig {
        schedule: config.schedule.build(&grid, 8).unwrap(),
        ..MethodConfig::new(grid)
    };
    let direct = run_method(Algorithm::MissSom, &table.data, &method, 8).unwrap();
    let (_, cb) = io::read_codebook(std::fs::File::open(d.join("cb.csv")).unwrap(), Topology::Hexagonal).unwrap();
    assert_eq!(Some(cb), direct.codebook);
    let (_, completed) = io::read_matrix(std::fs::File::open(d.join("c.csv")).unwrap()).unwrap();
    assert_eq!(completed, direct.completed);

    let eval = json(&ok(d, &["evaluate", "--input", "a.csv", "--codebook", "cb.csv", "--completed", "c.csv", "--truth", "truth.csv"]));
    assert!(eval["imputation_rmse"].is_number());
}

#[test]
fn deletion_breaks_down_on_small_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d, "178", "0.2");
    let out = missom(d, &["train", "--input", "a.csv", "--algorithm", "deletion", "--rows", "9", "--cols", "7", "--epochs", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient complete observations"));
    for algorithm in ["misssom", "cottrell"] {
        ok(d, &["train", "--input", "a.csv", "--algorithm", algorithm, "--rows", "9", "--cols", "7", "--epochs", "5"]);
    }
}

#[test]
fn bad_inputs_fail_with_locations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "a,b\n1,2\n3,oops\n").unwrap();
    let out = missom(d, &["train", "--input", "bad.csv", "--rows", "2", "--cols", "2"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3, column 2"), "{err}");

    std::fs::write(d.join("hole.csv"), "a,b\n1,NA\nNA,NA\n").unwrap();
    let out = missom(d, &["train", "--input", "hole.csv", "--rows", "2", "--cols", "2"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1 has no observed entry"));

    let out = missom(d, &["train", "--input", "bad.csv", "--truth", "nowhere.csv"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    let out = missom(d, &["train", "--input", "bad.csv", "--lambda0", "big"]);
    assert!(!out.status.success());
}

#[test]
fn benchmark_records_failures_as_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary = ok(
        d,
        &[
            "benchmark", "--n", "60", "--replicates", "2", "--rates", "0.4", "--mechanisms", "mcar,mnar", "--algorithms",
            "misssom,deletion", "--rows", "4", "--cols", "4", "--epochs", "5", "--out", "res.csv",
        ],
    );
    assert!(summary.contains("deletion"));
    let table = std::fs::read_to_string(d.join("res.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 2 * 2);
    let failed: Vec<&str> = table.lines().filter(|l| l.contains(",failed,")).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|l| l.contains(",deletion,")));
    assert!(table.contains("insufficient complete observations"));

    let again = ok(
        d,
        &[
            "benchmark", "--n", "60", "--replicates", "2", "--rates", "0.4", "--mechanisms", "mcar,mnar", "--algorithms",
            "misssom,deletion", "--rows", "4", "--cols", "4", "--epochs", "5", "--out", "res2.csv",
        ],
    );
    let strip = |t: &str| -> Vec<String> {
        // wall time is the twelfth field
        t.lines()
            .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 11).map(|(_, f)| f).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(strip(&table), strip(&std::fs::read_to_string(d.join("res2.csv")).unwrap()));
    assert_eq!(summary.lines().count(), again.lines().count());
}

#[test]
fn perturb_keeps_shape() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("base.csv"), "a,b\n10,0\n12,0\n8,0\n").unwrap();
    ok(d, &["perturb", "--input", "base.csv", "--seed", "1", "--out", "p.csv"]);
    let (h, x) = io::read_matrix(std::fs::File::open(d.join("p.csv")).unwrap()).unwrap();
    assert_eq!(h, vec!["a", "b"]);
    assert_eq!(x.dim(), (3, 2));
    assert!(x.column(1).iter().all(|&v| v == 0.0));
    assert!(x.column(0).iter().zip([10.0, 12.0, 8.0]).any(|(a, b)| *a != b));
}
