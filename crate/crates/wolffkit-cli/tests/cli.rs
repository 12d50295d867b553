//! CLI behavior: flag handling, exit codes, output formats, determinism
//! across thread counts, and schema validity of the JSON payloads.

use std::process::{Command, Output};

fn wolffkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wolffkit"))
        .args(args)
        .output()
        .expect("spawn wolffkit")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn schema() -> jsonschema::Validator {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/report.schema.json");
    let text = std::fs::read_to_string(path).expect("schema file");
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&doc).expect("valid schema")
}

fn assert_valid(validator: &jsonschema::Validator, payload: &str) {
    let value: serde_json::Value = serde_json::from_str(payload).expect("json output");
    let errors: Vec<String> = validator.iter_errors(&value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}\npayload: {payload}");
}

const REF: &[&str] = &["--n", "5", "--beta", "1", "--gamma", "2", "--p", "3", "--q", "3", "--s1", "0", "--s2", "0"];

#[test]
fn classify_reference_output() {
    let out = wolffkit(&[&["classify"], REF].concat());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("regime = admissible"), "{text}");
    assert!(text.contains("q0 = 1\n"), "{text}");
    assert!(text.contains("p0 = 1\n"), "{text}");
    assert!(text.contains("a0 = 3\n"), "{text}");
}

#[test]
fn classify_subproduct_boundary() {
    let out = wolffkit(&[
        "classify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "1", "--q", "1", "--s1",
        "0", "--s2", "0",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("regime = nonexistence_subproduct"));
}

#[test]
fn missing_flag_exits_2_and_names_it() {
    let out = wolffkit(&[
        "classify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "3", "--s1", "0", "--s2",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--q"), "stderr must cite the missing flag: {err}");
}

#[test]
fn invalid_params_exit_2() {
    // beta*gamma = 4 = n; the one-line reason names the violated invariant
    let out = wolffkit(&[
        "classify", "--n", "4", "--beta", "2", "--gamma", "2", "--p", "3", "--q", "3", "--s1",
        "0", "--s2", "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("beta*gamma"), "{err}");
}

#[test]
fn relaxed_convention_flag() {
    // sigma1 = -2.5 <= -beta*gamma = -2: rejected by default
    let base = [
        "classify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "3", "--q", "3", "--s1",
        "-2.5", "--s2", "0",
    ];
    let out = wolffkit(&base);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("allow_nonconvention") || err.contains("convention"), "{err}");

    let out = wolffkit(&[&base[..], &["--allow-nonconvention"]].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("convention = false"), "{text}");
}

#[test]
fn verify_rate_tolerance_failure_exits_5() {
    // an impossibly tight rate tolerance turns a healthy verification red
    let out = wolffkit(&[
        "verify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "3", "--q", "3", "--s1",
        "0", "--s2", "0", "--mode", "slow", "--rate-tol", "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(5));
    // the report is still emitted for inspection
    let text = stdout(&out);
    assert!(text.contains("\"rates_within_tolerance\": false"), "{text}");
}

#[test]
fn iterate_honors_a_start() {
    let out = wolffkit(&[
        "iterate", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "3", "--q", "3", "--s1",
        "0", "--s2", "0", "--a-start", "1", "--max-iter", "6",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // q0 = 1 is the exact fixed point
    assert_eq!(v["verdict"]["kind"], "converges_to");
    assert_eq!(v["a"][0], 1.0);
}

#[test]
fn config_file_supplies_defaults_flags_override() {
    let dir = std::env::temp_dir().join(format!("wolffkit-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("base.conf");
    std::fs::write(&cfg, "n = 5\nbeta = 1\ngamma = 2\np = 1\nq = 1\ns1 = 0\ns2 = 0\n").unwrap();

    let out = wolffkit(&["classify", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("nonexistence_subproduct"));

    // flags win over config
    let out = wolffkit(&["classify", "--config", cfg.to_str().unwrap(), "--p", "3", "--q", "3"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("regime = admissible"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn eval_csv_contract() {
    let out = wolffkit(&[
        "eval", "--n", "3", "--beta", "1", "--gamma", "2", "--theta", "2", "--sigma", "0",
        "--power", "1", "--radii", "0,1,2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,value");
    assert_eq!(lines.len(), 4);
    // 17 significant digits in scientific notation, LF endings
    assert!(lines[1].starts_with("0.0000000000000000e0,"));
    assert!(!text.contains('\r'));
    // W at the origin for this density is 2 pi
    let w0: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((w0 - 2.0 * std::f64::consts::PI).abs() < 1e-7);
}

#[test]
fn eval_quadrature_failure_exits_3_with_radius() {
    // an impossible tolerance with a tiny subdivision budget cannot converge;
    // force it through a stressed spec via rel-tol far below f64 resolution
    let out = wolffkit(&[
        "eval", "--n", "5", "--beta", "1", "--gamma", "2", "--theta", "1.5", "--sigma", "0",
        "--power", "1", "--radii", "1.0", "--rel-tol", "1e-300",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("r = 1"), "stderr must carry the failing radius: {err}");
}

#[test]
fn eval_rejects_conflicting_radius_specs() {
    let out = wolffkit(&[
        "eval", "--n", "3", "--beta", "1", "--gamma", "2", "--theta", "2", "--sigma", "0",
        "--power", "1", "--radii", "1,2", "--r-min", "1", "--r-max", "10", "--r-count", "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    // fast mode needs p > 5/3
    let out = wolffkit(&[
        "verify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "1.4", "--q", "3", "--s1",
        "0", "--s2", "0", "--mode", "fast",
    ]);
    assert_eq!(out.status.code(), Some(4));

    // inadmissible parameters cannot be verified either
    let out = wolffkit(&[
        "verify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "1.2", "--q", "1.2", "--s1",
        "0", "--s2", "0", "--mode", "slow",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn atlas_grid_shape_and_boundary() {
    let out = wolffkit(&[
        "atlas", "--n", "5", "--beta", "1", "--gamma", "2", "--s1", "0", "--s2", "0", "--p-min",
        "0.5", "--p-max", "6", "--p-steps", "2", "--q-min", "0.5", "--q-max", "6", "--q-steps",
        "2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,q,regime,q0,p0,a0,criticality_gap");
    assert_eq!(lines.len(), 5, "2x2 grid must emit exactly 4 rows");

    // the diagonal p = q crosses the scalar threshold (n+sigma)/(n-2) = 5/3:
    // straddle it and check the regime flips between the two cells
    let out = wolffkit(&[
        "atlas", "--n", "5", "--beta", "1", "--gamma", "2", "--s1", "0", "--s2", "0", "--p-min",
        "1.6", "--p-max", "1.75", "--p-steps", "2", "--q-min", "1.6", "--q-max", "1.75",
        "--q-steps", "2",
    ]);
    let text = stdout(&out);
    let low: Vec<&str> = text.lines().filter(|l| l.starts_with("1.6,1.6,")).collect();
    let high: Vec<&str> = text.lines().filter(|l| l.starts_with("1.75,1.75,")).collect();
    assert!(low[0].contains("nonexistence_rate"), "{}", low[0]);
    assert!(high[0].contains("admissible"), "{}", high[0]);
}

#[test]
fn atlas_invalid_ranges_exit_2() {
    let out = wolffkit(&[
        "atlas", "--n", "5", "--beta", "1", "--gamma", "2", "--s1", "0", "--s2", "0", "--p-min",
        "2", "--p-max", "1", "--p-steps", "2", "--q-min", "0.5", "--q-max", "6", "--q-steps",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let atlas_args = [
        "atlas", "--n", "5", "--beta", "1", "--gamma", "1.7", "--s1", "-0.25", "--s2", "0.5",
        "--p-min", "0.4", "--p-max", "5.5", "--p-steps", "13", "--q-min", "0.3", "--q-max",
        "4.5", "--q-steps", "11",
    ];
    let one = wolffkit(&[&atlas_args[..], &["--threads", "1"]].concat());
    let eight = wolffkit(&[&atlas_args[..], &["--threads", "8"]].concat());
    assert!(one.status.success() && eight.status.success());
    assert_eq!(one.stdout, eight.stdout, "atlas must be byte-identical across thread counts");

    let eval_args = [
        "eval", "--n", "5", "--beta", "1", "--gamma", "2", "--theta", "1.5", "--sigma", "-0.5",
        "--power", "2", "--r-min", "0.01", "--r-max", "1e6", "--r-count", "17",
    ];
    let one = wolffkit(&[&eval_args[..], &["--threads", "1"]].concat());
    let eight = wolffkit(&[&eval_args[..], &["--threads", "8"]].concat());
    assert!(one.status.success() && eight.status.success());
    assert_eq!(one.stdout, eight.stdout, "eval must be byte-identical across thread counts");

    // repeated runs are stable too
    let again = wolffkit(&[&eval_args[..], &["--threads", "3"]].concat());
    assert_eq!(one.stdout, again.stdout);

    // the quadrature-heavy verify path as well
    let verify_args = [
        "verify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "3", "--q", "3", "--s1",
        "0", "--s2", "0", "--mode", "fast",
    ];
    let one = wolffkit(&[&verify_args[..], &["--threads", "1"]].concat());
    let eight = wolffkit(&[&verify_args[..], &["--threads", "8"]].concat());
    assert!(one.status.success() && eight.status.success());
    assert_eq!(one.stdout, eight.stdout, "verify must be byte-identical across thread counts");
}

#[test]
fn json_outputs_validate_against_schema() {
    let validator = schema();

    let out = wolffkit(&[&["classify"], REF, &["--format", "json"]].concat());
    assert!(out.status.success());
    assert_valid(&validator, &stdout(&out));

    let out = wolffkit(&[
        "classify", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "1", "--q", "1", "--s1",
        "0", "--s2", "0", "--format", "json",
    ]);
    assert_valid(&validator, &stdout(&out));

    let out = wolffkit(&[&["iterate"], REF, &["--max-iter", "10"]].concat());
    assert!(out.status.success());
    assert_valid(&validator, &stdout(&out));

    let out = wolffkit(&[
        "iterate", "--n", "5", "--beta", "1", "--gamma", "2", "--p", "0.5", "--q", "0.5",
        "--s1", "0", "--s2", "0",
    ]);
    assert!(out.status.success());
    assert_valid(&validator, &stdout(&out));

    let out = wolffkit(&[
        "eval", "--n", "3", "--beta", "1", "--gamma", "2", "--theta", "2", "--sigma", "0",
        "--power", "1", "--radii", "0.5,1,2", "--format", "json",
    ]);
    assert!(out.status.success());
    assert_valid(&validator, &stdout(&out));

    let out = wolffkit(&[&["verify"], REF, &["--mode", "slow"]].concat());
    assert!(out.status.success(), "verify slow failed: {}", String::from_utf8_lossy(&out.stderr));
    assert_valid(&validator, &stdout(&out));
}

#[test]
fn env_var_thread_fallback() {
    let out = Command::new(env!("CARGO_BIN_EXE_wolffkit"))
        .args([&["classify"], REF].concat())
        .env("WOLFFKIT_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}
