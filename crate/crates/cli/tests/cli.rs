use std::process::{Command, Output};

use serde_json::Value;

fn padic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padic"))
        .args(args)
        .env_remove("PADIC_MAX_EPOCH")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn test_newton_two_monomials() {
    let out = padic(&["newton", "-p", "2", "-f", "2048,0,1"]);
    assert_eq!(json(&out).to_string(), "[[0,11],[2,0]]");
}

#[test]
fn test_newton_fractional_vertex() {
    // 1/2 + x^2 over Q2: vertices (0,-1), (2,0)
    let out = padic(&["newton", "-p", "2", "-f", "1/2,0,1"]);
    assert_eq!(json(&out).to_string(), "[[0,-1],[2,0]]");
}

#[test]
fn test_val() {
    assert_eq!(json(&padic(&["val", "-p", "2", "-x", "12"])), Value::from(2));
    assert_eq!(json(&padic(&["val", "-p", "3", "-x", "-5/18"])), Value::from(-2));
    // sqrt2 has valuation 1/2 over Q2; 2 itself is still 1
    let out = padic(&["val", "-p", "2", "--eisenstein", "-2,0,1", "-x", "2"]);
    assert_eq!(json(&out), Value::from(1));
}

#[test]
fn test_val_zero_is_precision_error() {
    let out = padic(&["val", "-p", "2", "-x", "0", "--max-epoch", "6"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("PrecisionError"));
}

#[test]
fn test_roots_digits_little_endian() {
    let v = json(&padic(&["roots", "-p", "3", "-f", "-1,0,1", "--epoch", "2"]));
    let digits: Vec<Value> = v.as_array().unwrap().iter().map(|r| r["digits"].clone()).collect();
    // 1 and -1 = 2 + 2*3 + 2*3^2 + ...
    assert!(digits.contains(&serde_json::json!([1, 0, 0, 0])));
    assert!(digits.contains(&serde_json::json!([2, 2, 2, 2])));
    assert_eq!(v[0]["precision"], Value::from(4));
}

#[test]
fn test_roots_none_for_odd_slope() {
    assert_eq!(json(&padic(&["roots", "-p", "2", "-f", "2048,0,1"])), serde_json::json!([]));
}

#[test]
fn test_double_root_fails_with_class() {
    let out = padic(&["roots", "-p", "2", "-f", "1,-2,1", "--max-epoch", "8"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("PrecisionError") || err.starts_with("DepthError"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn test_max_epoch_env_and_flag() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_padic"));
        c.args(["-v", "roots", "-p", "2", "-f", "1,-2,1"]);
        match env {
            Some(e) => c.env("PADIC_MAX_EPOCH", e),
            None => c.env_remove("PADIC_MAX_EPOCH"),
        };
        if let Some(f) = flag {
            c.args(["--max-epoch", f]);
        }
        stderr(&c.output().unwrap())
    };
    assert!(run(Some("6"), None).contains("max_epoch=6"));
    assert!(run(Some("6"), Some("7")).contains("max_epoch=7"));
    assert!(run(None, None).contains("max_epoch=20"));
}

#[test]
fn test_factor_tags() {
    let v = json(&padic(&["factor", "-p", "3", "-f", "2,-3,1"]));
    let fs = v.as_array().unwrap();
    assert_eq!(fs.len(), 2);
    for f in fs {
        assert_eq!(f["degree"], Value::from(1));
        assert_eq!(f["separated"], Value::Bool(true));
        assert_eq!(f["slope"], Value::from(0));
    }
}

#[test]
fn test_ramify_sqrt2() {
    let v = json(&padic(&["ramify", "-p", "2", "--eisenstein", "-2,0,1"]));
    assert_eq!(
        v.to_string(),
        r#"{"d":1,"e":2,"lower_breaks":[[3,2]],"phi_vertices":[[0,0],[3,3]],"polygon":[[1,3],[2,0]]}"#
    );
    let v = json(&padic(&["ramify", "-p", "5", "--eisenstein", "-5,0,0,1"]));
    assert_eq!(v["phi_vertices"].to_string(), "[[0,0],[1,1]]");
    assert_eq!(v["lower_breaks"].to_string(), "[[1,3]]");
}

#[test]
fn test_ramify_inert_then_eisenstein() {
    let v = json(&padic(&["ramify", "-p", "2", "--inert", "1,1,1", "--eisenstein", "-2,0,1"]));
    assert_eq!(v["lower_breaks"].to_string(), "[[0,4],[3,2]]");
}

#[test]
fn test_parse_errors_exit_2() {
    for args in [
        &["newton", "-p", "2", "-f", "1,x"][..],
        &["val", "-p", "2", "-x", "1/0"],
        &["bench-deps", "--engine", "nope"],
        &["frobnicate"],
        &["ramify", "-p", "2"],
    ] {
        let out = padic(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn test_bench_epoch_and_fast_agree() {
    let run = |engine: &str| json(&padic(&["bench-deps", "--n", "100", "--seed", "1", "--engine", engine]));
    let a = run("epoch");
    let b = run("epoch-fast");
    assert_eq!(a["final_digest"], b["final_digest"]);
    assert_eq!(a["top_digest"], b["top_digest"]);
    // the fast copy touches only y, x_1, x_2 and the field: 4 nodes over 16 epochs
    assert_eq!(b["update_calls"], Value::from(64));
    assert_eq!(a["update_calls"], Value::from(3200));
    for key in ["construct_ms", "refine_ms", "total_ms"] {
        assert!(a[key].is_number());
    }
}

#[test]
fn test_bench_deterministic_apart_from_timings() {
    let strip = |mut v: Value| {
        for key in ["construct_ms", "refine_ms", "total_ms"] {
            v.as_object_mut().unwrap().remove(key);
        }
        v.to_string()
    };
    let args = ["bench-deps", "--n", "300", "--epochs", "8", "--seed", "7", "--engine", "getter-children"];
    assert_eq!(strip(json(&padic(&args))), strip(json(&padic(&args))));
    let all: Vec<String> = ["epoch", "epoch-opt", "epoch-fast", "getter-restart", "getter-children"]
        .iter()
        .map(|e| {
            let v = json(&padic(&["bench-deps", "--n", "300", "--epochs", "8", "--seed", "7", "--engine", e]));
            v["final_digest"].to_string()
        })
        .collect();
    assert!(all.iter().all(|d| d == &all[0]));
}
