use std::path::PathBuf;
use std::process::{Command, Output};

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests").join(name)
}

fn fitgeom(name: &str, args: &[&str]) -> Output {
    let out = out_dir(name);
    Command::new(env!("CARGO_BIN_EXE_fitgeom"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("spawn fitgeom")
}

#[test]
fn link_check_succeeds_and_writes_outputs() {
    let o = fitgeom("link", &["link-check", "--from", "0,0,1", "--to", "0,6,1", "--a1", "2", "--a2", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out_dir("link").join("summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert!(v.is_object());
    assert!(out_dir("link").join("samples.csv").exists());
}

#[test]
fn bad_arguments_exit_with_2() {
    for args in [
        vec!["link-check", "--from", "0,0", "--to", "0,6,1"],
        vec!["no-such-command"],
        vec!["layers", "--domain", "9z"],
        vec!["layers", "--beta", "-1"],
    ] {
        let o = fitgeom("bad", &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn missing_config_file_exits_with_2() {
    let o = fitgeom("cfg", &["--config", "/nonexistent/summary.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn node_cap_exits_with_3() {
    let o = fitgeom("cap", &["fit-distance", "--target", "0.2,0.7", "--max-nodes", "10"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn example_domain_feeds_back_into_connectivity() {
    let o = fitgeom("ex2", &["examples", "--id", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let domain = out_dir("ex2").join("domain.json");
    assert!(domain.exists());
    let o = fitgeom(
        "ex2-conn",
        &["connectivity", "--domain", domain.to_str().unwrap(), "--t0", "0", "--levels", "3", "--budget", "32"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
