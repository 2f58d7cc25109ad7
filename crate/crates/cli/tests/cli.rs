use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use trispin::scenarios::{figure_recipes, FigureId};

fn trispin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trispin"))
        .args(args)
        .env("TRISPIN_OUT", out)
        .output()
        .expect("spawn trispin")
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn minimal_config_writes_one_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("minimal.toml");
    fs::write(&cfg, "model = \"s_one\"\n").unwrap();
    let out = dir.path().join("out");
    let o = trispin(&["run", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_files(&out), ["minimal_channels.csv"]);
    let text = fs::read_to_string(out.join("minimal_channels.csv")).unwrap();
    assert!(text.lines().next().unwrap().starts_with('#'));
    assert!(text.contains("# params: s=1 jz=-0.05"));
}

#[test]
fn misspelled_key_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "model = \"s_one\"\n[params]\njkk = -0.4\n").unwrap();
    let o = trispin(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("jkk"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(&["run", "/nonexistent/scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig6_recipe_file_matches_figure_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig6.toml");
    fs::write(&cfg, figure_recipes(FigureId::Fig6)[0]).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(trispin(&["run", cfg.to_str().unwrap()], &a).status.success());
    assert!(trispin(&["figure", "fig6"], &b).status.success());
    let names = csv_files(&a);
    assert_eq!(names.len(), 3);
    assert_eq!(names, csv_files(&b));
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn out_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    let o = trispin(&["--out", flag_dir.to_str().unwrap(), "figure", "fig2"], &env_dir);
    assert!(o.status.success());
    assert!(!env_dir.exists());
    assert_eq!(csv_files(&flag_dir), ["fig2_bloch.csv", "fig2_channels.csv"]);
}

#[test]
fn table1_has_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(&["figure", "table1"], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[2].contains("2/3 D") && rows[4].contains("-2D"));
}

#[test]
fn unknown_figure_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(&["figure", "fig9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig9"));
}

#[test]
fn resonances_for_s_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(&["resonances", "s_one", "--d", "-0.60", "--csv", "r.csv"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("DJ resonance at jk=-0.4"), "{text}");
    assert!(text.contains("DJ resonance at jk=1.2"), "{text}");
    assert!(dir.path().join("r.csv").exists());
}

#[test]
fn resonances_for_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(&["resonances", "bh3", "--j", "0.3"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("no DJ resonance") && text.contains("p_max=0.75"), "{text}");
    let o = trispin(&["resonances", "s_half", "--jz", "-0.1", "--jxy", "-0.05"], dir.path());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("JJ resonance at jk=-0.05"), "{text}");
    assert!(text.contains("DJ resonance absent"), "{text}");
}

#[test]
fn scan_filter_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(
        &["scan-filter", "--theta-in-points", "5", "--theta-out-points", "7", "--phi-out", "pi/2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "theta_in,theta_out,value");
    assert_eq!(body.len(), 1 + 35);
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = trispin(&["verify", "--instances", "20"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().count() >= 5);
    assert!(!text.contains("FAIL"));
}
