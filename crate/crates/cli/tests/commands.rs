use std::path::Path;
use std::process::{Command, Output};

fn mkinterp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mkinterp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const LINEAR_MODEL: [&str; 6] = ["--kernel", "power", "--truncation", "2", "--decay", "1"];

fn fit_example(dir: &Path) {
    write(dir, "data.csv", "x1,y\n0,8\n1,9\n");
    let mut args = vec![
        "fit",
        "--data",
        "data.csv",
        "--order",
        "4",
        "--out",
        "model.json",
        "--report",
        "report.json",
    ];
    args.extend(LINEAR_MODEL);
    let out = mkinterp(dir, &args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn fit_reports_coefficients_and_norm() {
    let dir = tempfile::tempdir().unwrap();
    fit_example(dir.path());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let c: Vec<f64> = serde_json::from_value(report["coefficients"].clone()).unwrap();
    assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] - 1.0).abs() < 1e-10, "{c:?}");
    assert!((report["norm"].as_f64().unwrap() - 17f64.powf(0.75)).abs() < 1e-9);
    assert_eq!(report["converged"], true);
}

#[test]
fn eval_reproduces_line_and_flags_outside_points() {
    let dir = tempfile::tempdir().unwrap();
    fit_example(dir.path());
    write(dir.path(), "points.csv", "x1\n0\n0.5\n1\n");
    let out = mkinterp(
        dir.path(),
        &["eval", "--model", "model.json", "--points", "points.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    let values: Vec<f64> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (v, want) in values.iter().zip([8.0, 8.5, 9.0]) {
        assert!((v - want).abs() < 1e-9, "{values:?}");
    }

    write(dir.path(), "outside.csv", "x1\n0.5\n2.0\n");
    let out = mkinterp(
        dir.path(),
        &["eval", "--model", "model.json", "--points", "outside.csv"],
    );
    assert_eq!(out.status.code(), Some(5));
    let text = stdout(&out);
    assert!(text.lines().nth(2).unwrap().ends_with("outside_domain"), "{text}");
    assert!(text.lines().nth(1).unwrap().ends_with(','), "{text}");
}

#[test]
fn eval_of_empty_point_list_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    fit_example(dir.path());
    write(dir.path(), "empty.csv", "x1\n");
    let out = mkinterp(
        dir.path(),
        &["eval", "--model", "model.json", "--points", "empty.csv"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "x1,value,flag\n");
}

#[test]
fn eval_rejects_schema_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", "{\"order\": 4}");
    write(dir.path(), "points.csv", "x1\n0\n");
    let out = mkinterp(
        dir.path(),
        &["eval", "--model", "bad.json", "--points", "points.csv"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn malformed_data_exits_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n0,8\n1,\n");
    let out = mkinterp(dir.path(), &["fit", "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn duplicate_points_exit_2_citing_the_pair() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n0,8\n0.5,1\n0,9\n");
    let out = mkinterp(dir.path(), &["fit", "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lines 2 and 4"), "{}", stderr(&out));
}

#[test]
fn too_few_features_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n0,8\n0.5,3\n1,9\n");
    let mut args = vec!["fit", "--data", "data.csv", "--report", "report.json"];
    args.extend(LINEAR_MODEL);
    let out = mkinterp(dir.path(), &args);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("K = 2"));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn iteration_cap_exits_3_and_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n-0.5,1\n0.25,-2\n0.75,3\n");
    let out = mkinterp(
        dir.path(),
        &[
            "fit",
            "--data",
            "data.csv",
            "--truncation",
            "6",
            "--max-iter",
            "0",
            "--init",
            "zero",
            "--report",
            "r.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], false);
}

#[test]
fn fit_outside_domain_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n0,8\n3,9\n");
    let out = mkinterp(dir.path(), &["fit", "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(5), "{}", stderr(&out));
}

#[test]
fn power_table_contains_sqrt2_and_zero_at_nodes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nodes.csv", "x1\n0\n1\n");
    write(dir.path(), "points.csv", "x1\n-1\n0\n1\n");
    let out = mkinterp(
        dir.path(),
        &[
            "power",
            "--nodes",
            "nodes.csv",
            "--points",
            "points.csv",
            "--truncation",
            "3",
            "--decay",
            "1",
            "--order",
            "2",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,p_m,p_2,bound"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert!((rows[0][2] - 2f64.sqrt()).abs() < 1e-12);
    assert!(rows[1][1] < 1e-6 && rows[2][1] < 1e-6);
}

#[test]
fn power_m_never_exceeds_p_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nodes.csv", "x1\n-0.6\n0.1\n0.7\n");
    let out = mkinterp(
        dir.path(),
        &[
            "power",
            "--nodes",
            "nodes.csv",
            "--kernel",
            "trig",
            "--truncation",
            "9",
            "--order",
            "6",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(f[1] <= f[2] + 1e-8, "{line}");
    }
    assert_eq!(text.lines().count(), 102);
}

#[test]
fn study_rows_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = mkinterp(dir.path(), &["study", "--counts", "4,8,16"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let errors: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert_eq!(rows[0][4], "");

    let out = mkinterp(dir.path(), &["study", "--counts", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 2);

    let out = mkinterp(dir.path(), &["study", "--counts", "8,4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n0,8\n1,9\n");
    write(
        dir.path(),
        "run.cfg",
        "# example\nkernel = power\ntruncation = 2\ndecay = 1\norder = 6\nout = model.json\n",
    );
    let out = mkinterp(
        dir.path(),
        &["fit", "--config", "run.cfg", "--data", "data.csv", "--order", "4"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["order"], 4);
    assert_eq!(report["truncation"], 2);
    assert!(dir.path().join("model.json").exists());

    write(dir.path(), "bad.cfg", "order = 4\nflavour = mint\n");
    let out = mkinterp(dir.path(), &["fit", "--config", "bad.cfg", "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"));
}

#[test]
fn odd_order_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.csv", "x1,y\n0,8\n1,9\n");
    let out = mkinterp(dir.path(), &["fit", "--data", "data.csv", "--order", "3"]);
    assert_eq!(out.status.code(), Some(2));
}
