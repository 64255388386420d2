use std::path::PathBuf;
use std::process::{Command, Output};

fn clperf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clperf"))
        .args(args)
        .env_remove("CLPERF_DATA_DIR")
        .output()
        .expect("run clperf")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("clperf-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn predict_grid_for_core2() {
    let o = clperf(&[
        "predict",
        "--machine",
        "core2",
        "--kernels",
        "load,store,copy,triad",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(rows[0], ["core2", "L1", "L2", "MEM"]);
    assert_eq!(rows[1], ["load", "4", "6", "20"]);
    assert_eq!(rows[2], ["store", "4", "8", "36"]);
    assert_eq!(rows[3], ["copy", "4", "10", "52"]);
}

#[test]
fn missing_level_is_a_one_line_error() {
    let o = clperf(&[
        "predict",
        "--machine",
        "core2",
        "--level",
        "L3",
        "--kernels",
        "load",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(clperf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(clperf(&["predict"]).status.code(), Some(2));
    assert_eq!(
        clperf(&["simulate", "--machine", "core2", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn csv_matches_text_before_rounding() {
    let text = stdout(&clperf(&["predict", "--machine", "nehalem"]));
    let csv_out = stdout(&clperf(&[
        "predict",
        "--machine",
        "nehalem",
        "--format",
        "csv",
    ]));
    let mut reader = csv::Reader::from_reader(csv_out.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (kernel, level, total) = (col("kernel"), col("level"), col("total_cycles"));
    let grid: Vec<Vec<String>> = text
        .lines()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect();
    let mut n = 0;
    for record in reader.records() {
        let r = record.unwrap();
        let exact: f64 = r[total].parse().unwrap();
        let row = grid.iter().find(|g| g[0] == r[kernel]).unwrap();
        let c = grid[0].iter().position(|h| h == &r[level]).unwrap();
        let shown: i64 = row[c].parse().unwrap();
        assert_eq!(shown, exact.round() as i64, "{} {}", &r[kernel], &r[level]);
        n += 1;
    }
    assert_eq!(n, 16);
}

#[test]
fn machine_file_and_data_dir_override() {
    let dir = scratch("data");
    let doc = clperf::bundled::CORE2_JSON
        .replace("\"core2\"", "\"fastmem\"")
        .replace("\"clock_mhz\": 800", "\"clock_mhz\": 1600");
    std::fs::write(dir.join("fastmem.json"), &doc).unwrap();

    let by_path = clperf(&[
        "predict",
        "--machine",
        dir.join("fastmem.json").to_str().unwrap(),
        "--kernels",
        "load",
        "--level",
        "MEM",
    ]);
    assert!(by_path.status.success());
    assert!(stdout(&by_path).contains("13"), "{}", stdout(&by_path));

    let by_name = Command::new(env!("CARGO_BIN_EXE_clperf"))
        .args([
            "predict",
            "--machine",
            "fastmem",
            "--kernels",
            "load",
            "--level",
            "MEM",
        ])
        .env("CLPERF_DATA_DIR", &dir)
        .output()
        .unwrap();
    assert!(by_name.status.success());
    assert_eq!(stdout(&by_name), stdout(&by_path));

    assert_eq!(
        clperf(&["predict", "--machine", "fastmem"]).status.code(),
        Some(1)
    );
}

#[test]
fn invalid_machine_file_exits_one() {
    let dir = scratch("bad");
    let path = dir.join("bad.json");
    std::fs::write(
        &path,
        clperf::bundled::CORE2_JSON.replace("\"clock_ghz\": 2.83", "\"clock_ghz\": -1"),
    )
    .unwrap();
    let o = clperf(&["predict", "--machine", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_from_file_and_bad_rows() {
    let dir = scratch("meas");
    let good = dir.join("good.csv");
    std::fs::write(&good, "# two rows\nmachine,kernel,level,cycles_per_cl\nnehalem,store,L2,6.61\nnehalem,load,L1,4\n").unwrap();
    let o = clperf(&[
        "compare",
        "--machine",
        "nehalem",
        "--measurements",
        good.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("machine,kernel,level,measured_cycles"));
    assert!(out.contains("nehalem,load,L1,4,4,4,100,100"), "{out}");

    let bad = dir.join("bad.csv");
    std::fs::write(
        &bad,
        "machine,kernel,level,cycles_per_cl\nnehalem,store,L2,-6\n",
    )
    .unwrap();
    let o = clperf(&[
        "compare",
        "--machine",
        "nehalem",
        "--measurements",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("row 2"));
}

#[test]
fn simulate_stencil_reports_memory_reads() {
    let o = clperf(&[
        "simulate",
        "--machine",
        "nehalem",
        "--stencil",
        "jacobi3d",
        "--n",
        "40",
        "--planes",
        "3",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mem = out.lines().find(|l| l.starts_with("MEM-L3")).unwrap();
    let inward: f64 = mem.split(',').nth(1).unwrap().parse().unwrap();
    assert!((inward - 2.0).abs() < 0.5, "{out}");
    assert_eq!(
        clperf(&[
            "simulate",
            "--machine",
            "nehalem",
            "--stencil",
            "jacobi3d",
            "--n",
            "2"
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn paper_check_prints_one_line_per_check() {
    let o = clperf(&["paper-check"]);
    let out = stdout(&o);
    let checks: Vec<&str> = out
        .lines()
        .filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL "))
        .collect();
    assert_eq!(checks.len(), 11);
    let all_pass = checks.iter().all(|l| l.starts_with("PASS"));
    assert_eq!(o.status.success(), all_pass);
    assert_eq!(out, stdout(&clperf(&["paper-check"])));
}
