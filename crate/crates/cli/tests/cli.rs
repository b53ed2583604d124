use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use perco_cli::config::{diagnose, RunConfig};
use tempfile::TempDir;

const PROFILE: &str = r#"{"eps_p":1.0,"chi_p":1.0,"f_p":{"form":"stretched_exp","factor":1.0},"delta_s":1.0,"f_s":{"form":"poly_log","factor":1.0},"r_p":1.0,"l_p":1.0}"#;

fn perco(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perco")).args(args).env("PERCO_CACHE", cache).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stretch_config(side: usize, r: u64) -> String {
    let a = -((side / 2) as i64);
    format!(
        r#"{{"experiment":{{"kind":"stretch","window":{{"geometry":"box","anchor":[{a},{a}],"sides":[{side},{side}]}},"R":{r}}},
"model":{{"model":{{"family":"bernoulli","p":0.85}},"d":2}},"trials":40,"master_seed":11}}"#
    )
}

fn validate_config(l0: u64, big_l0: u64) -> String {
    format!(
        r#"{{"experiment":{{"kind":"renorm-validate","d":3}},"ladder":{{"l0":{l0},"r0":4,"L0":{big_l0},"theta_sc":1,"kmax":30}},"profile":{PROFILE},"trials":1,"master_seed":0}}"#
    )
}

#[test]
fn sample_run_writes_artifacts_and_caches() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("cache");
    let cfg = write(
        dir.path(),
        "sample.json",
        r#"{"experiment":{"kind":"sample","window":{"geometry":"box","anchor":[0,0],"sides":[16,16]}},
"model":{"model":{"family":"bernoulli","p":0.5},"d":2},"trials":3,"master_seed":5}"#,
    );
    let out = dir.path().join("out");
    let o = perco(&["run", &cfg, "--out", out.to_str().unwrap()], &cache);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    let hash = run["config_hash"].as_str().unwrap().to_owned();
    assert_eq!(run["kind"], "sample");
    assert_eq!(run["check"]["passed"], true);
    let csv = fs::read_to_string(out.join("observables.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash={hash}"));
    assert!(cache.join(format!("config-{hash}.json")).exists());
    let samples = fs::read_dir(&cache).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "prc1")).count();
    assert_eq!(samples, 3);

    // A second run reuses the cached samples and reproduces the observables.
    let again = dir.path().join("again");
    assert!(perco(&["run", &cfg, "--out", again.to_str().unwrap()], &cache).status.success());
    assert_eq!(csv, fs::read_to_string(again.join("observables.csv")).unwrap());
}

#[test]
fn observables_do_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "stretch.json", &stretch_config(41, 10));
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("w{workers}"));
        let o = perco(&["run", &cfg, "--workers", workers, "--out", out.to_str().unwrap()], &dir.path().join("c"));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("observables.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn recursion_check_sets_the_exit_status() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("c");
    let good = write(dir.path(), "good.json", &validate_config(128, 146));
    let o = perco(&["run", &good, "--check", "--out", dir.path().join("g").to_str().unwrap()], &cache);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let bad = write(dir.path(), "bad.json", &validate_config(128, 16));
    let out = dir.path().join("b");
    let o = perco(&["run", &bad, "--check", "--out", out.to_str().unwrap()], &cache);
    assert_eq!(o.status.code(), Some(3));
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(run["check"]["passed"], false);

    // Without --check the failure is reported but the run succeeds.
    let o = perco(&["run", &bad, "--out", out.to_str().unwrap()], &cache);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("check failed"));
}

#[test]
fn validate_reports_diagnostics() {
    let dir = TempDir::new().unwrap();
    let cache = dir.path().join("c");
    let ok = write(dir.path(), "ok.json", &stretch_config(41, 10));
    let o = perco(&["validate", &ok], &cache);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "ok");

    let ladder = write(dir.path(), "ladder.json", &validate_config(16, 146));
    let o = perco(&["validate", &ladder], &cache);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ladder.l0") && err.contains("l0 = 16 must exceed 4 r0 = 16"), "{err}");

    let small = write(dir.path(), "small.json", &stretch_config(31, 10));
    let o = perco(&["validate", &small], &cache);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("B(0, 2R)"));
    assert!(!cache.exists(), "validation must not sample");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let text = validate_config(128, 146).replace(r#""trials":1"#, r#""trials":"many""#);
    let o = perco(&["validate", &write(dir.path(), "s.json", &text)], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at `trials`"));

    let text = stretch_config(41, 10).replace(r#""R":10"#, r#""R":10,"radius":3"#);
    let err = RunConfig::from_json(&text).unwrap_err().to_string();
    assert!(err.contains("experiment") && err.contains("radius"), "{err}");
}

#[test]
fn configs_round_trip_and_hash_ignores_output_dir() {
    let text = stretch_config(41, 10);
    let cfg = RunConfig::from_json(&text).unwrap();
    let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(cfg, back);
    assert!(diagnose(&cfg).is_empty());

    let mut moved = cfg.clone();
    moved.output_dir = Some("elsewhere".into());
    assert_eq!(cfg.hash(), moved.hash());
    let mut reseeded = cfg.clone();
    reseeded.master_seed += 1;
    assert_ne!(cfg.hash(), reseeded.hash());
}
