//! End-to-end tests of the `subrec` binary: exit codes, report shape, and
//! cross-command consistency.

use std::path::PathBuf;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use serde_json::Value;
use subrec::config::Tolerances;
use subrec::instance::{check_condition_general2, generate_planted, PointSet};
use subrec::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subrec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not a report ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        )
    })
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("subrec-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir.join(name)
}

fn tol() -> Tolerances {
    Tolerances::default()
}

/// Write a small Condition-1 instance file and return its path.
fn planted_file(name: &str, n: usize, d: usize, m: usize, k: usize, seed: u64) -> PathBuf {
    let inst = generate_planted(n, d, m, k, 0.0, seed, &tol()).unwrap();
    let path = temp_path(name);
    std::fs::write(&path, io::write_labeled_instance(&inst)).unwrap();
    path
}

#[test]
fn gen_writes_header_and_trailer() {
    let out = temp_path("gen.txt");
    let output = run(&[
        "gen", "--n", "3", "--d", "1", "--m", "6", "--inliers", "3", "--seed", "7", "-o",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let rep = report(&output);
    assert_eq!(rep["seed"], 7);
    assert_eq!(rep["payload"]["seed"], 7);

    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "3 6");
    assert_eq!(lines[4], "1 3");
}

#[test]
fn gen_rejects_degenerate_shapes() {
    let out = temp_path("degenerate.txt");
    let output = run(&[
        "gen", "--n", "2", "--d", "1", "--m", "2", "--inliers", "2", "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn gen_reduces_graph_files_with_sidecar() {
    let graph_path = temp_path("c4.txt");
    std::fs::write(&graph_path, "4 2 4\n1 2\n2 3\n3 4\n1 4\n").unwrap();
    let out = temp_path("c4-points.txt");
    let output = run(&[
        "gen", "--sse-graph", graph_path.to_str().unwrap(), "--seed", "5", "-o",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let rep = report(&output);
    assert_eq!(rep["payload"]["points"], 4);

    let matrix_text = std::fs::read_to_string(&out).unwrap();
    assert!(matrix_text.starts_with("4 4\n"));
    let sidecar = std::fs::read_to_string(format!("{}.sidecar", out.display())).unwrap();
    let entries = io::parse_sidecar(&sidecar).unwrap();
    assert_eq!(entries.len(), 4);
    assert_eq!(entries[0].edge, (0, 1));
}

#[test]
fn recover_methods_agree_on_condition1_instances() {
    let path = planted_file("agree.txt", 3, 1, 6, 3, 7);
    let derand = run(&["recover", "--method", "derand", path.to_str().unwrap()]);
    assert!(derand.status.success());
    let random = run(&[
        "recover", "--method", "random", "--seed", "1", path.to_str().unwrap(),
    ]);
    assert!(random.status.success());
    let (d, r) = (report(&derand), report(&random));
    assert_eq!(d["payload"]["inliers"], r["payload"]["inliers"]);
    assert_eq!(d["payload"]["matches_planted"], true);
    assert_eq!(r["payload"]["matches_planted"], true);
}

#[test]
fn recover_random_det_hits_planted_set() {
    let inst = generate_planted(5, 2, 10, 5, 1e-8, 1, &tol()).unwrap();
    let gap = check_condition_general2(&inst, &tol()).unwrap();
    assert!(gap.holds);
    let path = temp_path("noisy.txt");
    std::fs::write(&path, io::write_labeled_instance(&inst)).unwrap();

    let output = run(&[
        "recover",
        "--method",
        "random-det",
        "--c2",
        &format!("{}", gap.mid_gap()),
        "--seed",
        "3",
        path.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let rep = report(&output);
    assert_eq!(rep["payload"]["matches_planted"], true);
    assert_eq!(rep["payload"]["method"], "randomized-det");
}

#[test]
fn recover_timeout_exits_4() {
    // Generic Gaussian points admit no dependent sample.
    let cols = DMatrix::from_fn(3, 6, |r, c| ((r * 6 + c) as f64 * 0.7311).sin() + 2.0 * ((r + c) as f64).cos());
    let points = PointSet::new(cols, &tol()).unwrap();
    let path = temp_path("hard.txt");
    std::fs::write(&path, io::write_matrix(points.matrix())).unwrap();

    let output = run(&[
        "recover", "--method", "random", "--max-iter", "1", path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains('1'), "stderr should report the iteration cap: {stderr}");
}

#[test]
fn membership_uniform_certificate_is_planted_set() {
    let inst = generate_planted(3, 1, 6, 3, 0.0, 7, &tol()).unwrap();
    let path = temp_path("member.txt");
    std::fs::write(&path, io::write_labeled_instance(&inst)).unwrap();

    let output = run(&["membership", "--uniform", path.to_str().unwrap()]);
    assert!(output.status.success());
    let rep = report(&output);
    assert_eq!(rep["payload"]["inside"], false);
    let cert: Vec<usize> = rep["payload"]["certificate"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize - 1)
        .collect();
    assert_eq!(cert, inst.inliers);

    // The two submodular backends agree.
    let exhaustive = run(&[
        "membership", "--uniform", "--mode", "exhaustive", path.to_str().unwrap(),
    ]);
    let e = report(&exhaustive);
    assert_eq!(e["payload"]["inside"], rep["payload"]["inside"]);
    assert_eq!(e["payload"]["certificate"], rep["payload"]["certificate"]);
}

#[test]
fn membership_accepts_basis_indicators() {
    let path = planted_file("vertex.txt", 3, 1, 6, 3, 7);
    // Columns 1, 2, 3 (1-based) hold at most one inlier for this seed's
    // layout; any independent triple works as a vertex of K_A.
    let inst = generate_planted(3, 1, 6, 3, 0.0, 7, &tol()).unwrap();
    let mut indicator = vec![0.0f64; 6];
    let mut taken = 0;
    for i in 0..6 {
        if taken < 3 && (!inst.is_inlier(i) || taken == 0) {
            indicator[i] = 1.0;
            taken += 1;
        }
    }
    let xfile = temp_path("indicator.txt");
    std::fs::write(
        &xfile,
        indicator.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
    )
    .unwrap();

    let output = run(&[
        "membership", "--x", xfile.to_str().unwrap(), path.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert_eq!(report(&output)["payload"]["inside"], true);
}

#[test]
fn rip_on_identity_is_exact() {
    let path = temp_path("identity3.txt");
    std::fs::write(&path, "3 3\n1 0 0\n0 1 0\n0 0 1\n").unwrap();
    let output = run(&["rip", "--c", "uniform", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let rep = report(&output);
    assert_eq!(rep["payload"]["status"], "converged");
    assert!(rep["payload"]["residual_inf_norm"].as_f64().unwrap() <= 1e-12);
    let r: Vec<f64> = rep["payload"]["R"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let expected = DMatrix::<f64>::identity(3, 3);
    for (idx, v) in r.iter().enumerate() {
        assert!((v - expected[(idx / 3, idx % 3)]).abs() < 1e-9);
    }
}

#[test]
fn rip_exits_5_outside_the_polytope() {
    let path = planted_file("rip-out.txt", 3, 1, 6, 3, 7);
    let output = run(&["rip", "--c", "uniform", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(5));
    assert_eq!(report(&output)["payload"]["status"], "outside_polytope");
}

#[test]
fn rip_feasible_meets_residual_contract() {
    // Generic unit points: the uniform vector is strictly interior.
    let cols = DMatrix::from_fn(3, 9, |r, c| {
        ((1 + r * 9 + c) as f64 * 1.618).sin() + 0.1 * (c as f64)
    });
    let mut normalized = cols.clone();
    for j in 0..9 {
        let n = cols.column(j).norm();
        normalized.set_column(j, &(cols.column(j) / n));
    }
    let path = temp_path("feasible.txt");
    std::fs::write(&path, io::write_matrix(&normalized)).unwrap();

    let output = run(&["rip", "--tol", "1e-10", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    let rep = report(&output);
    assert!(rep["payload"]["residual_inf_norm"].as_f64().unwrap() <= 1e-6);
    let value = rep["payload"]["value"].as_f64().unwrap();
    let bound = rep["payload"]["value_bound"].as_f64().unwrap();
    assert!(value < bound + 1e-9);
}

#[test]
fn seed_env_var_is_flag_overridable() {
    let out_env = temp_path("seed-env.txt");
    let output = bin()
        .args(["gen", "--n", "3", "--d", "1", "--m", "6", "--inliers", "3", "-o"])
        .arg(&out_env)
        .env("SUBREC_SEED", "42")
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(report(&output)["seed"], 42);

    let out_flag = temp_path("seed-flag.txt");
    let output = bin()
        .args(["gen", "--n", "3", "--d", "1", "--m", "6", "--inliers", "3", "--seed", "42", "-o"])
        .arg(&out_flag)
        .env("SUBREC_SEED", "7")
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(report(&output)["seed"], 42);
    assert_eq!(
        std::fs::read_to_string(&out_env).unwrap(),
        std::fs::read_to_string(&out_flag).unwrap()
    );
}

#[test]
fn reports_are_reproducible() {
    let path = planted_file("repro.txt", 4, 2, 9, 5, 8);
    let a = run(&["recover", "--method", "random", "--seed", "9", path.to_str().unwrap()]);
    let b = run(&["recover", "--method", "random", "--seed", "9", path.to_str().unwrap()]);
    assert_eq!(report(&a)["payload"], report(&b)["payload"]);
}

#[test]
fn unknown_flags_exit_1() {
    let output = run(&["recover", "--frobnicate", "x.txt"]);
    assert_eq!(output.status.code(), Some(1));
    let output = run(&["recover", "--method", "random", "/nonexistent/instance.txt"]);
    assert_eq!(output.status.code(), Some(2));
}
