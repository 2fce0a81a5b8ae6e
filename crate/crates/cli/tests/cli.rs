use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rhev(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhev"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("RHEV_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const TABLE_ONE_NOISELESS: &str = "\
[array]
elements = 8
[calibration]
bits = 6
snr_db = inf
modulation_hz = 10e6
[source]
carrier_hz = 2e9
angle_deg = 0
";

#[test]
fn calibrate_noiseless_table_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TABLE_ONE_NOISELESS);
    let out = rhev(dir.path(), &["calibrate", "--config", &cfg, "--quiet"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let t = rows(&dir.path().join("calibrate.csv"));
    assert_eq!(
        t[0].join(","),
        "channel,preset_gamma_db,est_gamma_db,gamma_err_db,preset_dphi_deg,est_dphi_deg,dphi_err_deg,branch"
    );
    assert_eq!(t.len(), 8);
    for (i, r) in t[1..].iter().enumerate() {
        assert_eq!(r[0], (i + 2).to_string());
        let err: f64 = r[6].parse().unwrap();
        assert!(err.abs() <= 2.8125 + 1e-9, "phase error {err}");
    }
}

#[test]
fn sweep_delay_equal_pair_cancels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[array]\nelements = 2\ngamma_db = [0.0]\nphase_deg = [0.0]\n[calibration]\nsnr_db = inf\n",
    );
    let out = rhev(
        dir.path(),
        &["sweep-delay", "--config", &cfg, "--format", "csv,svg"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = rows(&dir.path().join("sweep-delay.csv"));
    assert_eq!(t[0].join(","), "k,eta,phase_deg,power_linear,power_db");
    assert_eq!(t.len(), 65);
    let p: Vec<f64> = t[1..].iter().map(|r| r[3].parse().unwrap()).collect();
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min == 0.0 || max / min > 1e6);
    let svg = fs::read_to_string(dir.path().join("sweep-delay.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[calibration]\nsnr_bd = -5\n");
    let out = rhev(dir.path(), &["calibrate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
    assert!(err.contains("snr_bd"));
}

#[test]
fn missing_config_and_bad_threads() {
    let dir = tempfile::tempdir().unwrap();
    let out = rhev(
        dir.path(),
        &["calibrate", "--config", "/nonexistent/run.toml"],
    );
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_rhev"))
        .args(["spectrum", "--quiet", "--out"])
        .arg(dir.path())
        .env("RHEV_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn runtime_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // A vanishing reference gives a flat delay curve.
    let cfg = write_config(
        dir.path(),
        "[array]\nelements = 2\ngamma_db = [4000.0]\nphase_deg = [0.0]\n[calibration]\nsnr_db = inf\n",
    );
    let out = rhev(dir.path(), &["calibrate", "--config", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn monte_carlo_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let body = "[experiment]\ntrials = 3\nseed = 11\n[sweep]\naxis = \"snr\"\nvalues = [10, 20]\n";
    let ca = write_config(a.path(), body);
    let cb = write_config(b.path(), body);
    assert!(rhev(a.path(), &["monte-carlo", "--config", &ca, "--quiet"])
        .status
        .success());
    assert!(rhev(b.path(), &["monte-carlo", "--config", &cb, "--quiet"])
        .status
        .success());
    let x = fs::read(a.path().join("monte-carlo.csv")).unwrap();
    assert_eq!(x, fs::read(b.path().join("monte-carlo.csv")).unwrap());
    let t = rows(&a.path().join("monte-carlo.csv"));
    assert_eq!(
        t[0].join(","),
        "axis,value,rmse_ar,rmse_pd_deg,trials,excluded"
    );
    assert_eq!(t.len(), 3);
    assert_eq!(t[1][0], "snr_db");

    // --seed overrides the config seed.
    let c = tempfile::tempdir().unwrap();
    let cc = write_config(c.path(), body);
    assert!(rhev(
        c.path(),
        &["monte-carlo", "--config", &cc, "--seed", "12", "--quiet"]
    )
    .status
    .success());
    assert_ne!(x, fs::read(c.path().join("monte-carlo.csv")).unwrap());
}

#[test]
fn compare_rev_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\ntrials = 2\n[errors]\nrev_state_error_deg = 5\n[sweep]\nvalues = [20]\n",
    );
    let out = rhev(dir.path(), &["compare-rev", "--config", &cfg, "--quiet"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = rows(&dir.path().join("compare-rev.csv"));
    assert_eq!(
        t[0].join(","),
        "axis,value,rhev_rmse_ar,rhev_rmse_pd_deg,rev_rmse_ar,rev_rmse_pd_deg,trials"
    );
    assert_eq!(t.len(), 2);
}

#[test]
fn pattern_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[calibration]\nsnr_db = inf\n[pattern]\nsteer_deg = 20\n",
    );
    let out = rhev(dir.path(), &["pattern", "--config", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("peak direction"));
    let t = rows(&dir.path().join("pattern.csv"));
    assert_eq!(t[0].join(","), "theta_deg,before_db,after_db,ideal_db");
    assert_eq!(t.len(), 722);
    for col in 1..4 {
        let max = t[1..]
            .iter()
            .map(|r| r[col].parse::<f64>().unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, 0.0);
    }

    let out = rhev(dir.path(), &["spectrum", "--config", &cfg, "--quiet"]);
    assert!(out.status.success());
    let t = rows(&dir.path().join("spectrum.csv"));
    assert_eq!(t[0].join(","), "order,freq_offset_hz,power_linear,power_db");
    assert_eq!(t.len(), 65);
}
