use std::path::Path;
use std::process::{Command, Output};

fn nnoma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnoma"))
        .args(args)
        .output()
        .unwrap()
}

fn out_arg(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_one_row_per_user() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = nnoma(&["run", "--trials", "2000", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,user,n_trials,p_hat,stderr,analytic_p,z_score"
    );
    assert_eq!(lines.len(), 4);
    for (line, user) in lines[1..].iter().zip(["comp", "noma1", "noma2"]) {
        assert_eq!(line.split(',').nth(1), Some(user));
    }
}

#[test]
fn sweep_and_no_mc_leave_simulation_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let o = nnoma(&[
        "run",
        "--no-mc",
        "--users",
        "comp",
        "--sweep",
        "beta=0.1,0.2,0.3",
        "--out",
        &out,
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("scenario:beta=0.1,comp,,,,"));
}

#[test]
fn missing_config_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let full = "lambda_l = 5e-4\nlambda_b = 5e-3\nlambda_u = 1e-2\np_tx_dbm = 30\nnoise_psd_dbm_hz = -170\n\
                bandwidth_hz = 1e7\ncarrier_hz = 2e9\nbeta = 0.2\nalpha0 = 3\nalpha1 = 4\nd1 = 100\nd2 = 100\n\
                exclusion_d = 100\nseg_radius = 20\nrates = [0.5, 0.5, 0.5]\n";
    std::fs::write(&cfg, full).unwrap();
    let o = nnoma(&[
        "run",
        "--no-mc",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&cfg, full.replace("alpha0 = 3\n", "")).unwrap();
    let o = nnoma(&[
        "run",
        "--no-mc",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha0"), "{err}");
}

#[test]
fn bad_override_and_unknown_figure_are_errors() {
    let o = nnoma(&["run", "--no-mc", "--set", "beta=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
    let o = nnoma(&["figure", "fig9"]);
    assert!(!o.status.success());
}

#[test]
fn check_flag_passes_on_agreeing_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = nnoma(&[
        "run",
        "--trials",
        "5000",
        "--check",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn figure_writes_csv_and_one_svg_per_panel() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(&dir.path().join("nested"));
    let o = nnoma(&["figure", "fig2", "--trials", "1000", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let base = dir.path().join("nested");
    assert!(base.join("fig2.csv").exists());
    let svg = std::fs::read_to_string(base.join("fig2_comp.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.contains("<svg"));
}

#[test]
fn csv_bytes_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(w);
        let o = nnoma(&[
            "figure",
            "fig2",
            "--trials",
            "3000",
            "--workers",
            w,
            "--out",
            &out_arg(&out),
        ]);
        assert!(o.status.success());
        files.push(std::fs::read(out.join("fig2.csv")).unwrap());
    }
    let seq = dir.path().join("seq");
    assert!(nnoma(&[
        "figure",
        "fig2",
        "--trials",
        "3000",
        "--sequential",
        "--out",
        &out_arg(&seq)
    ])
    .status
    .success());
    files.push(std::fs::read(seq.join("fig2.csv")).unwrap());
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
}

#[test]
fn snapshot_writes_points_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let o = nnoma(&["snapshot", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("snapshot.csv")).unwrap();
    assert!(text.starts_with("kind,rho,theta,offset,x,y"));
    assert!(text.lines().any(|l| l.starts_with("user,")));
    assert!(dir.path().join("snapshot.svg").exists());
}

#[test]
fn validate_creates_out_dir_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a").join("b");
    let o = nnoma(&[
        "validate",
        "--trials",
        "20000",
        "--realizations",
        "10",
        "--out",
        &out_arg(&out),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("PASS special_functions"), "{stdout}");
    assert!(out.join("validate.csv").exists());
}
