use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use nalgebra::DMatrix;
use serde_json::Value;
use signshape::cli::run;
use signshape::oracle::parse_fixtures;
use tempfile::NamedTempFile;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn invoke(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("signshape").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn json(o: &Outcome) -> Value {
    assert_eq!(o.code, 0, "stderr: {}", o.stderr);
    serde_json::from_str(&o.stdout).expect("stdout is one JSON document")
}

fn csv_file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn path(f: &NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn matrix(v: &Value) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = v.as_array().unwrap().iter().map(floats).collect();
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

const CROSS: &str = "x,y\n1,0\n-1,0\n0,1\n0,-1\n";

#[test]
fn map_reproduces_the_two_dimensional_closed_form() {
    let v = json(&invoke(&["map", "--lambdas", "0.9,0.1"]));
    let d = floats(&v["delta"]);
    assert!((d[0] - 0.75).abs() < 1e-12 && (d[1] - 0.25).abs() < 1e-12);
    assert_eq!(v["metadata"]["p"], 2);
}

#[test]
fn invmap_of_the_centre_is_the_centre() {
    let v = json(&invoke(&["invmap", "--deltas", "0.5,0.5"]));
    assert_eq!(floats(&v["lambda"]), vec![0.5, 0.5]);
    assert_eq!(v["converged"], true);
}

#[test]
fn sscm_of_the_cross_dataset() {
    let f = csv_file(CROSS);
    let v = json(&invoke(&["sscm", path(&f)]));
    assert_eq!(
        matrix(&v["matrix"]),
        DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])
    );
    assert_eq!(v["metadata"]["n"], 4);
    assert_eq!(v["metadata"]["median"]["converged"], true);

    let headerless = csv_file("1,0\n-1,0\n0,1\n0,-1\n");
    let v = json(&invoke(&["sscm", path(&headerless), "--no-header"]));
    assert_eq!(v["metadata"]["n"], 4);
}

#[test]
fn csv_output_is_a_plain_matrix() {
    let f = csv_file(CROSS);
    let o = invoke(&["kendall", path(&f), "--output", "csv"]);
    assert_eq!(o.code, 0);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(o.stdout.as_bytes());
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!((rows[0][0] + rows[1][1] - 1.0).abs() < 1e-12);
}

#[test]
fn malformed_input_exits_with_one() {
    let ragged = csv_file("a,b\n1,2\n3\n");
    let o = invoke(&["sscm", path(&ragged)]);
    assert_eq!(o.code, 1);
    assert!(!o.stderr.is_empty() && o.stdout.is_empty());

    let text = csv_file("a,b\n1,2\n3,x\n");
    let o = invoke(&["kendall", path(&text)]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("non-numeric"));

    assert_eq!(invoke(&["sscm", "/definitely/not/here.csv"]).code, 1);
    assert_eq!(invoke(&["sscm", path(&csv_file("a,b\n"))]).code, 1);
    assert_eq!(invoke(&["map", "--lambdas", "0.5,-0.5"]).code, 1);
    assert_eq!(invoke(&["map"]).code, 1);
    assert_eq!(invoke(&["frobnicate"]).code, 1);
    assert_eq!(invoke(&["map", "--lambdas", "0.6,0.4", "--rel-tol", "0"]).code, 1);
}

#[test]
fn non_convergence_exits_with_two() {
    let o = invoke(&["invmap", "--deltas", "0.7,0.2,0.1", "--max-iter", "1", "--tol", "1e-15"]);
    assert_eq!(o.code, 2);
    let v: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["converged"], false);
    assert!(o.stderr.contains("did not converge"));

    let f = csv_file("a,b\n0,0\n3,1\n1,4\n-2,2\n5,-3\n");
    let o = invoke(&["sscm", path(&f), "--max-iter", "0"]);
    assert_eq!(o.code, 2);
}

#[test]
fn inline_spectra_are_normalized_and_sorted() {
    let o = invoke(&["map", "--lambdas", "1,9"]);
    let v = json(&o);
    assert!(o.stderr.contains("reordered"));
    assert_eq!(floats(&v["lambda"]), vec![0.9, 0.1]);
}

#[test]
fn shape_equals_sscm_then_invmap() {
    let mut text = String::from("a,b,c\n");
    for i in 0..60 {
        let t = i as f64;
        text.push_str(&format!(
            "{},{},{}\n",
            (t * 0.7).sin() * 3.0,
            (t * 1.3).cos() + 0.1 * t,
            (t * 0.37).sin()
        ));
    }
    let f = csv_file(&text);
    let shape = json(&invoke(&["shape", path(&f)]));
    let sscm = json(&invoke(&["sscm", path(&f)]));
    let s = matrix(&sscm["matrix"]);
    let eig = s.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let deltas: Vec<String> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0).to_string()).collect();
    let inv = json(&invoke(&["invmap", "--deltas", &deltas.join(",")]));
    let lambda = floats(&inv["lambda"]);
    let mut manual = DMatrix::zeros(3, 3);
    for (pos, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        manual += lambda[pos] * v * v.transpose();
    }
    assert!((matrix(&shape["shape"]) - manual).amax() < 1e-12);
    assert!((matrix(&shape["sscm"]) - s).amax() == 0.0);
}

#[test]
fn asymcov_accepts_eigenvectors() {
    let (c, s) = (0.6, 0.8);
    let f = csv_file(&format!("{c},{}\n{s},{c}\n", -s));
    let v = json(&invoke(&[
        "asymcov",
        "--lambdas",
        "0.7,0.3",
        "--eigvecs",
        path(&f),
        "--no-header",
    ]));
    let w = matrix(&v["w"]);
    assert_eq!(w.shape(), (4, 4));
    let trace_dir = nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
    assert!((trace_dir.transpose() * &w * &trace_dir)[(0, 0)].abs() < 1e-14);
    assert_eq!(matrix(&v["gamma"]).iter().filter(|x| **x == 0.0).count(), 8);

    let bad = csv_file("1,1\n0,1\n");
    assert_eq!(
        invoke(&[
            "asymcov",
            "--lambdas",
            "0.7,0.3",
            "--eigvecs",
            path(&bad),
            "--no-header"
        ])
        .code,
        1
    );
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let args = [
        "simulate",
        "--lambdas",
        "0.6,0.3,0.1",
        "--n",
        "80",
        "--replicates",
        "120",
        "--seed",
        "42",
    ];
    let a = invoke(&args);
    let b = invoke(&args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_str(&a.stdout).unwrap();
    assert_eq!(v["metadata"]["replicates"], 120);
    assert_eq!(matrix(&v["emp_cov"]).shape(), (9, 9));
    let c = invoke(&[
        "simulate",
        "--lambdas",
        "0.6,0.3,0.1",
        "--n",
        "80",
        "--replicates",
        "120",
        "--seed",
        "43",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn pin_fixtures_writes_a_parseable_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("pins.txt");
    let v = json(&invoke(&[
        "pin-fixtures",
        "--draws",
        "2000",
        "--out",
        target.to_str().unwrap(),
    ]));
    assert_eq!(v["scenarios"], 6);
    let pins = parse_fixtures(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert!(pins.iter().all(|f| f.draws == 2000));
}

#[test]
fn binary_reports_exit_status() {
    let bin = Path::new(env!("CARGO_BIN_EXE_signshape"));
    let ok = Command::new(bin)
        .args(["map", "--lambdas", "0.5,0.5"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"delta\":[0.5,0.5]"));
    let bad = Command::new(bin)
        .args(["map", "--lambdas", "nope"])
        .env("SIGNSHAPE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
