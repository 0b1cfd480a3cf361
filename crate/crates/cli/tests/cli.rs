use std::path::Path;
use std::process::{Command, Output};

fn hsl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsl")).args(args).current_dir(dir).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\ngamma = 0.5\ngamm = 0.5\n");
    let out = hsl(&["estfun", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamm"));
}

#[test]
fn gamma_out_of_range_names_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\ngamma = 1.5\n");
    let out = hsl(&["estfun", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma must lie in (0,1]"));
}

#[test]
fn bad_quadrature_tolerance_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hsl"))
        .args(["estfun"])
        .env("HSL_QUAD_TOL", "tight")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn estfun_writes_finite_tables_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = hsl(&["estfun", "--out", name], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        dir.path().join(name).join("estfun")
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["estfun.csv", "identities.csv", "estfun.svg"] {
        let bytes = std::fs::read(a.join(f)).unwrap();
        assert_eq!(bytes, std::fs::read(b.join(f)).unwrap(), "{f} differs between runs");
        if f.ends_with(".csv") {
            let text = String::from_utf8(bytes).unwrap();
            assert!(text.lines().count() > 1);
            assert!(!text.contains("nonfinite") && !text.to_lowercase().contains("nan"));
        }
    }
}

#[test]
fn hierarchy_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = hsl(&["hierarchy", "--out", "o", "--threads", "2"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    for f in ["rates.csv", "ratios.csv", "ratios.svg", "remainder.csv", "gauge.csv"] {
        assert!(dir.path().join("o/hierarchy").join(f).exists(), "{f} missing");
    }
}
