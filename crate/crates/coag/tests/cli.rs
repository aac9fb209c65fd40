//! End-to-end runs of the `coag` binary: exit codes, artifacts and schemas.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn coag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn schema(name: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Checks `v` against the subset of JSON Schema used by the shipped schemas:
/// `type`, `enum`, `required`, `properties`, `additionalProperties: false`,
/// `items`, `prefixItems`, `minItems`, `maxItems`, `oneOf` and local `$ref`.
fn validate(v: &Value, s: &Value, root: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let target = r
            .strip_prefix("#/")
            .unwrap()
            .split('/')
            .fold(root, |node, key| &node[key]);
        return validate(v, target, root, path, errors);
    }
    if let Some(options) = s.get("oneOf").and_then(Value::as_array) {
        let matching = options
            .iter()
            .filter(|o| {
                let mut e = Vec::new();
                validate(v, o, root, path, &mut e);
                e.is_empty()
            })
            .count();
        if matching != 1 {
            errors.push(format!("{path}: matches {matching} oneOf branches"));
        }
    }
    if let Some(t) = s.get("type") {
        let allowed: Vec<&str> = match t {
            Value::String(one) => vec![one.as_str()],
            Value::Array(many) => many.iter().filter_map(Value::as_str).collect(),
            _ => panic!("bad type in schema"),
        };
        let ok = allowed.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "number" => v.is_number(),
            "integer" => v.is_u64() || v.is_i64(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            other => panic!("unsupported type {other}"),
        });
        if !ok {
            errors.push(format!("{path}: expected {allowed:?}, got {v}"));
            return;
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errors.push(format!("{path}: {v} not in enum"));
        }
    }
    if let Some(obj) = v.as_object() {
        for key in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(key.as_str().unwrap()) {
                errors.push(format!("{path}: missing {key}"));
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (k, val) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => validate(val, sub, root, &format!("{path}/{k}"), errors),
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    errors.push(format!("{path}: unexpected key {k}"))
                }
                None => {}
            }
        }
    }
    if let Some(arr) = v.as_array() {
        let prefix = s.get("prefixItems").and_then(Value::as_array);
        for (i, item) in arr.iter().enumerate() {
            let sub = prefix.and_then(|p| p.get(i)).or_else(|| s.get("items"));
            if let Some(sub) = sub {
                validate(item, sub, root, &format!("{path}/{i}"), errors);
            }
        }
        let len = arr.len() as u64;
        if s.get("minItems").and_then(Value::as_u64).is_some_and(|m| len < m)
            || s.get("maxItems").and_then(Value::as_u64).is_some_and(|m| len > m)
        {
            errors.push(format!("{path}: length {len} out of bounds"));
        }
    }
}

fn assert_valid(doc: &Path, schema_name: &str) {
    let s = schema(schema_name);
    let mut errors = Vec::new();
    validate(&read_json(doc), &s, &s, "", &mut errors);
    assert!(errors.is_empty(), "{}: {errors:#?}", doc.display());
}

const SMALL: &str = r#"
model = "sce"

[kernel]
family = "constant"

[grid]
n = 30.0
cells_per_decade = 6

[initial]
profile = "exponential"

[time]
t_end = 0.5
snapshot_count = 4
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_writes_artifacts_that_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let out = dir.path().join("out");
    let o = coag(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    assert_eq!(fs::read_to_string(out.join("config.toml")).unwrap(), SMALL);
    assert_valid(&out.join("report.json"), "report.schema.json");
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["passed"], Value::Bool(true));

    let moments = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(moments.starts_with("t,M_neg2sigma,M_negsigma,M0,M1,Psi1,Psi2int\n"));
    assert_eq!(moments.lines().count(), 1 + 5);

    let snaps: Vec<_> = fs::read_dir(out.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 5);
    let first = fs::read_to_string(out.join("snapshots/snapshot_0000.csv")).unwrap();
    let mut lines = first.lines();
    assert_eq!(lines.next(), Some("x_center,width,zeta"));
    let field = lines.next().unwrap().split(',').next().unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
}

#[test]
fn reruns_overwrite_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let out = dir.path().join("out");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(code(&coag(&args)), 0);
    let first = fs::read(out.join("report.json")).unwrap();
    fs::write(out.join("snapshots/stale.csv"), "x").unwrap();
    assert_eq!(code(&coag(&args)), 0);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first);
    assert!(!out.join("snapshots/stale.csv").exists());
}

#[test]
fn initial_data_outside_the_space_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("family = \"constant\"", "family = \"singular_product\"\nsigma = 0.3")
        .replace("profile = \"exponential\"", "profile = \"singular_power\"\na = 0.4");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let o = coag(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("initial data not in 𝒴"), "{}", stderr(&o));
}

#[test]
fn corrupted_trajectory_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[diagnostics]\ninject_corruption = true\n");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = dir.path().join("o");
    let o = coag(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["passed"], Value::Bool(false));
    assert_valid(&out.join("report.json"), "report.schema.json");
}

#[test]
fn config_errors_exit_with_one_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let typo = write_config(dir.path(), "a.toml", &SMALL.replace("n = 30.0", "n = \"thirty\""));
    let o = coag(&["simulate", "--config", typo.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let msg = stderr(&o);
    assert!(msg.contains("line") && msg.contains('n'), "{msg}");

    let gen = write_config(dir.path(), "b.toml", &SMALL.replace("\"sce\"", "\"generalized\""));
    let o = coag(&["simulate", "--config", gen.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("eps"), "{}", stderr(&o));

    let o = coag(&["simulate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn check_kernel_reports_certification() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let good = write_config(
        dir.path(),
        "good.toml",
        &SMALL.replace("family = \"constant\"", "family = \"singular_product\"\nsigma = 0.2"),
    );
    let o = coag(&["check-kernel", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_valid(&out.join("summary.json"), "summary.schema.json");

    // η = 0 understates the decay of (μν)^{-σ} in μ.
    let bad = write_config(
        dir.path(),
        "bad.toml",
        &SMALL.replace("family = \"constant\"", "family = \"singular_product\"\nsigma = 0.2\neta = 0.0"),
    );
    let o = coag(&["check-kernel", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let s = read_json(&out.join("summary.json"));
    assert_eq!(s["checks"][1]["passed"], Value::Bool(false));
}

#[test]
fn tabulated_kernel_loads_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = coag(&[
        "check-kernel",
        "--config",
        shipped("tabulated.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn validate_passes_on_a_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = coag(&[
        "validate",
        "--config",
        shipped("singular_ohs.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_valid(&dir.path().join("summary.json"), "summary.schema.json");
}

#[test]
fn sweep_tables_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[sweep]\neps = [1.0, 0.5, 0.25, 0.125]\nn = [10.0, 100.0]\nn_sweep = true\n",
        SMALL.replace("\"sce\"", "\"ohs\"")
    );
    let cfg = write_config(dir.path(), "sweep.toml", &text);
    let mut tables = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("o{threads}"));
        let o = coag(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_valid(&out.join("summary.json"), "summary.schema.json");
        let eps = fs::read_to_string(out.join("distance_eps.csv")).unwrap();
        assert!(eps.starts_with("eps,n,time,distance\n"));
        // 4 ε × 2 n × 4 snapshot times.
        assert_eq!(eps.lines().count(), 1 + 32);
        let n = fs::read_to_string(out.join("distance_n.csv")).unwrap();
        assert_eq!(n.lines().count(), 1 + 4);
        tables.push((eps, n));
    }
    assert_eq!(tables[0], tables[1]);
}
