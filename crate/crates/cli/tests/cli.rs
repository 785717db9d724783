use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyons"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn schema() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/result-record.v1.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Required keys, closed key sets and constants of one schema definition.
fn check_against(def: &Value, record: &Value) {
    let obj = record.as_object().unwrap();
    let required: Vec<&str> = def["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    for key in &required {
        assert!(obj.contains_key(*key), "missing {key}");
    }
    if def["additionalProperties"] == Value::Bool(false) {
        let props = def["properties"].as_object().unwrap();
        for key in obj.keys() {
            assert!(props.contains_key(key), "unexpected key {key}");
        }
    }
    for (key, prop) in def["properties"].as_object().unwrap() {
        if let Some(c) = prop.get("const") {
            assert_eq!(&record[key], c, "{key}");
        }
        if prop.get("pattern").is_some() {
            let s = record[key].as_str().unwrap();
            assert!(
                s.len() == 64
                    && s.chars()
                        .all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase())
            );
        }
    }
}

fn without_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_s");
    v
}

#[test]
fn specfun_half_order() {
    let o = run(&["specfun", "--alpha", "0.5", "--x", "1"]);
    assert!(o.status.success());
    let k = json(&o)["bessel_k"]["value"].as_f64().unwrap();
    assert!((k - (PI / 2.0).sqrt() * (-1f64).exp()).abs() < 1e-15);
}

#[test]
fn specfun_matches_integral_representation() {
    // K_a(x) = int_0^inf exp(-x cosh t) cosh(a t) dt, trapezoid in t
    let (a, x) = (0.3, 0.7);
    let h = 1e-3;
    let oracle: f64 = (0..20_000)
        .map(|i| {
            let t = i as f64 * h;
            let w = if i == 0 { 0.5 } else { 1.0 };
            w * (-x * t.cosh()).exp() * (a * t).cosh()
        })
        .sum::<f64>()
        * h;
    let o = run(&["specfun", "--alpha", "0.3", "--x", "0.7", "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let k: f64 = row[2].parse().unwrap();
    assert!((k - oracle).abs() < 1e-10 * oracle, "{k} {oracle}");
}

#[test]
fn specfun_domain_error() {
    let o = run(&["specfun", "--alpha", "1.2", "--x", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("(0,1)"));
}

#[test]
fn spectrum_reproduces_the_bound_state() {
    let o = run(&[
        "spectrum",
        "--alpha",
        "0.5",
        "--beta",
        &(-PI * PI).to_string(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = json(&o);
    let s = &rec["sectors"][0];
    assert!((s["eigenvalues"][0].as_f64().unwrap() + 1.0).abs() < 1e-6);
    assert_eq!(s["closed_form_reference"].as_f64(), Some(-1.0));
    assert_eq!(s["labels"][0], "bound state");
    assert_eq!(s["labels"][1], "discretized continuum, not an eigenvalue");
    assert!(rec["identity_checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == Value::Bool(true)));
    let schema = schema();
    check_against(&schema["$defs"]["spectrum"], &rec);
    check_against(&schema["$defs"]["config"], &rec["config"]);
    check_against(&schema["$defs"]["sector"], s);
}

#[test]
fn spectrum_friedrichs_has_no_charge() {
    let o = run(&[
        "spectrum",
        "--alpha",
        "0.5",
        "--beta",
        "friedrichs",
        "--sectors",
        "0,1",
    ]);
    assert!(o.status.success());
    let rec = json(&o);
    for s in rec["sectors"].as_array().unwrap() {
        assert!(s["charge"].is_null());
        assert!(s["eigenvalues"][0].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn unconverged_well_still_prints_the_record() {
    let o = run(&[
        "spectrum",
        "--alpha",
        "0.5",
        "--beta",
        "-1",
        "--potential",
        "well:depth=1,radius=1",
    ]);
    let rec = json(&o);
    let s = &rec["sectors"][0];
    let e0 = s["eigenvalues"][0].as_f64().unwrap();
    assert!(e0 <= s["free_closed_form"].as_f64().unwrap());
    assert!(e0 >= s["lower_bound"].as_f64().unwrap());
    assert!(s["closed_form_reference"].is_null());
    let converged = rec["converged"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if converged { 0 } else { 3 }));
}

#[test]
fn identical_configs_give_identical_records() {
    let args = [
        "spectrum",
        "--alpha",
        "0.3",
        "--beta",
        "-2",
        "--basis-size",
        "16",
    ];
    let (a, b) = (json(&run(&args)), json(&run(&args)));
    assert_eq!(without_timing(a.clone()), without_timing(b));
    let other = json(&run(&[
        "spectrum",
        "--alpha",
        "0.3",
        "--beta",
        "-2",
        "--basis-size",
        "18",
    ]));
    assert_ne!(a["config_hash"], other["config_hash"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("run.cfg");
    std::fs::write(
        &path,
        "# bound state run\nalpha = 0.5\nbeta = -1\nbasis-size = 16\nformat = csv\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let from_file = stdout(&run(&["spectrum", "--config", p]));
    assert!(from_file.starts_with("sector,E0"));
    let overridden = json(&run(&[
        "spectrum", "--config", p, "--format", "json", "--beta", "-2",
    ]));
    assert_eq!(overridden["config"]["beta"].as_f64(), Some(-2.0));
    assert_eq!(overridden["config"]["basis_size"].as_u64(), Some(16));

    std::fs::write(&path, "alpha = 0.5\ncolour = blue\n").unwrap();
    let bad = run(&["spectrum", "--config", p]);
    assert_eq!(bad.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn invalid_configs_exit_2() {
    for args in [
        vec!["spectrum", "--beta", "-1"],
        vec!["spectrum", "--alpha", "0.5", "--basis-size", "1"],
        vec![
            "spectrum",
            "--alpha",
            "0.5",
            "--potential",
            "power:coeff=1,exponent=-0.8",
        ],
        vec!["spectrum", "--alpha", "0.5", "--lambda", "-3"],
        vec!["spectrum", "--alpha", "0.5", "--beta", "banana"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(
            String::from_utf8_lossy(&o.stderr).lines().count(),
            1,
            "{args:?}"
        );
    }
}

#[test]
fn sweep_grid_schema_and_order() {
    let o = run(&[
        "sweep",
        "--alpha-grid",
        "0.25:0.75:3",
        "--beta-grid",
        "-5,-1,1",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("alpha,beta,E0,E0_closed_form,q_abs,lambda_used,residual,converged")
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    let mut expected = Vec::new();
    for a in [0.25, 0.5, 0.75] {
        for b in [-5.0, -1.0, 1.0] {
            expected.push((a, b));
        }
    }
    for (row, (a, b)) in rows.iter().zip(expected) {
        assert_eq!(row.len(), 8);
        assert_eq!(row[0].parse::<f64>().unwrap(), a);
        assert_eq!(row[1].parse::<f64>().unwrap(), b);
        assert_eq!(row[3].is_empty(), b > 0.0);
    }
    for chunk in rows.chunks(3) {
        let e: Vec<f64> = chunk.iter().map(|r| r[2].parse().unwrap()).collect();
        assert!(e.windows(2).all(|w| w[0] <= w[1]), "{e:?}");
    }
}

#[test]
fn sweep_hits_the_closed_form() {
    let beta = (-PI * PI).to_string();
    let o = run(&["sweep", "--alpha-grid", "0.5", "--beta-grid", &beta]);
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert!((row[2].parse::<f64>().unwrap() + 1.0).abs() < 1e-6);
}

#[test]
fn sweep_records_failed_rows() {
    let o = run(&["sweep", "--alpha-grid", "0.5", "--beta-grid", "-1,-1e300"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with("true"));
    assert!(rows[1].ends_with(",,,,,,false"), "{}", rows[1]);
}

fn write_state(dir: &Path, header: &str, f: impl Fn(f64) -> f64) -> PathBuf {
    let mut text = format!("{header}\nr,psi0\n");
    for i in 0..2000 {
        let r = 1e-6 * 10f64.powf(i as f64 * 7.6 / 1999.0);
        text += &format!("{r:?},{:?}\n", f(r));
    }
    let path = dir.join("state.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn form_eval_on_a_sampled_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_state(dir.path(), "# alpha = 0.5, q = 0", |r| {
        r.sqrt() * (-r).exp()
    });
    let o = run(&[
        "form-eval",
        "--state",
        path.to_str().unwrap(),
        "--beta",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = json(&o);
    // 2 pi * 1/4 and 2 pi * 1/4
    assert!((rec["extension_form"].as_f64().unwrap() - PI / 2.0).abs() < 1e-4);
    assert!((rec["norm_sq"].as_f64().unwrap() - PI / 2.0).abs() < 1e-4);
    check_against(&schema()["$defs"]["formEval"], &rec);
}

#[test]
fn form_eval_subtracts_the_charge() {
    // psi0 = sqrt(r) e^{-r} + G_1 with G_1 = sqrt(pi/(2r)) e^{-r} at alpha = 1/2
    let dir = tempfile::tempdir().unwrap();
    let path = write_state(dir.path(), "# alpha = 0.5\n# q = 1, lambda = 1", |r| {
        r.sqrt() * (-r).exp() + (PI / (2.0 * r)).sqrt() * (-r).exp()
    });
    let o = run(&[
        "form-eval",
        "--state",
        path.to_str().unwrap(),
        "--beta",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = json(&o);
    // F = 2pi/4 + pi/2 - ||psi||^2 + (2 + pi^2); ||psi||^2 = pi/2 + 2 * 2pi sqrt(pi/2)/4 + pi^2/2
    let overlap = 2.0 * PI * (PI / 2.0).sqrt() / 4.0;
    let norm = PI / 2.0 + 2.0 * overlap + PI * PI / 2.0;
    let want = PI / 2.0 + PI / 2.0 - norm + 2.0 + PI * PI;
    assert!(
        (rec["extension_form"].as_f64().unwrap() - want).abs() < 1e-3,
        "{rec}"
    );
    assert!(rec["rayleigh_quotient"].as_f64().unwrap() >= rec["lower_bound"].as_f64().unwrap());

    let friedrichs = run(&["form-eval", "--state", path.to_str().unwrap()]);
    assert_eq!(friedrichs.status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let o = run(&["verify", "--suite", "identities"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("c_alpha quadrature") && out.contains("cross-Gram"));
    assert!(out
        .lines()
        .all(|l| l.ends_with("PASS") || l.contains("checks passed")));

    let o = run(&["verify", "--suite", "spectrum"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("eigenvalue reproduction"));
}

#[test]
fn verify_is_deterministic() {
    let a = run(&["verify", "--suite", "all", "--seed", "7"]);
    let b = run(&["verify", "--suite", "all", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
