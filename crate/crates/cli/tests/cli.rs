use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use sigma_flow::functionals::pointwise;
use sigma_flow_lab::output::Summary;
use sigma_flow_lab::{Command as Cmd, RunConfig};
use tempfile::TempDir;

fn lab(dir: &Path, args: &[&str], config: &str) -> (i32, Summary) {
    lab_env(dir, args, config, &[])
}

fn lab_env(dir: &Path, args: &[&str], config: &str, env: &[(&str, &str)]) -> (i32, Summary) {
    fs::write(dir.join("run.cfg"), config).unwrap();
    let out = dir.join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_sigma-flow-lab"))
        .current_dir(dir)
        .args(args)
        .args(["--config", "run.cfg", "--out"])
        .arg(&out)
        .envs(env.iter().copied())
        .output()
        .unwrap();
    let summary = Summary::parse(&fs::read_to_string(out.join("summary.txt")).unwrap());
    (status.status.code().unwrap(), summary)
}

fn num(s: &Summary, key: &str) -> f64 {
    s.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn constant_profile_converges_at_step_zero() {
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["flow"], "initial_profile = constant\ngrid_size = 32\n");
    assert_eq!(code, 0);
    assert_eq!(s.get("status"), Some("ok"));
    assert_eq!(s.get("flow.steps"), Some("0"));
    let (header, rows) = csv(&dir.path().join("out/trace.csv"));
    assert_eq!(
        header,
        ["t", "dt", "vol", "int_sigma_l", "tilde_F_k", "F_k", "r_kl", "residual", "cone_margin", "max_grad_u"]
    );
    assert_eq!(rows.len(), 1);
}

#[test]
fn sine_flow_converges_with_small_drift() {
    let dir = TempDir::new().unwrap();
    let cfg = "geometry = product_circle_sphere\nn = 5\nk = 2\nl = 1\ngrid_size = 48\ninitial_profile = sine\namplitude = 0.1\n";
    let (code, s) = lab(dir.path(), &["flow"], cfg);
    assert_eq!(code, 0, "{:?}", s.get("error.message"));
    assert_eq!(s.get("flow.termination"), Some("converged"));
    assert!(num(&s, "flow.conserved.max_drift") < 1e-4);
    assert!(num(&s, "flow.final_residual") < 1e-6);
    let (_, rows) = csv(&dir.path().join("out/trace.csv"));
    assert!(rows.len() > 2);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]), "trace times must increase strictly");
    let text = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    for cell in text.lines().nth(1).unwrap().split(',') {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{cell}");
    }
}

#[test]
fn inadmissible_amplitude_exits_with_stall() {
    // bisect the amplitude at which the initial metric leaves Gamma_2^+
    let base = "grid_size = 64\ninitial_profile = sine\n";
    let cfg = RunConfig::from_text(Cmd::Flow, base).unwrap();
    let geom = cfg.build_geometry().unwrap();
    let admissible = |a: f64| {
        let u = cfg.initial_u(&geom, a).unwrap();
        pointwise(&geom, &geom.derivatives(&u), 2, 1).admissible()
    };
    let (mut lo, mut hi) = (0.1, 5.0);
    assert!(admissible(lo) && !admissible(hi));
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["flow"], &format!("{base}amplitude = {}\n", hi * 1.01));
    assert_eq!(code, 3);
    assert_eq!(s.get("error.kind"), Some("stall"));
    assert!(s.get("error.message").unwrap().contains("cone violation"));
}

#[test]
fn config_errors_exit_2_and_still_write_a_summary() {
    let dir = TempDir::new().unwrap();
    for bad in ["nonsense = 1\n", "grid_size = many\n", "k = 9\n", "geometry = torus\n"] {
        let (code, s) = lab(dir.path(), &["flow"], bad);
        assert_eq!(code, 2, "{bad}");
        assert_eq!(s.get("status"), Some("error"));
        assert_eq!(s.get("error.kind"), Some("config"));
        assert!(s.get("wall_time_s").is_some());
    }
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let st = Command::new(env!("CARGO_BIN_EXE_sigma-flow-lab"))
        .args(["flow", "--config", "/nonexistent/run.cfg", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    let s = Summary::parse(&fs::read_to_string(out.join("summary.txt")).unwrap());
    assert_eq!(s.get("error.kind"), Some("config"));
}

#[test]
fn constants_match_closed_forms() {
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["constants"], "n = 4\nk = 2\nl = 1\n");
    assert_eq!(code, 0);
    assert!((num(&s, "constants.c_mt") - 4.0 * PI * PI).abs() < 1e-12);
    assert!((num(&s, "constants.quermass") - 6f64.sqrt() / 4.0).abs() < 1e-15);
    assert!((num(&s, "constants.omega_n") - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    assert_eq!(s.get("constants.c_s_sphere"), Some("undefined"));
    assert!(s.get("constants.c_s_sphere.reason").unwrap().contains("Sobolev-type"));

    let (code, s) = lab(dir.path(), &["constants"], "n = 3\nk = 1\nl = 0\n");
    assert_eq!(code, 0);
    let expect = 3.0 * (PI.powi(4) / 2.0).powf(1.0 / 3.0);
    assert!((num(&s, "constants.c_s_sphere") / expect - 1.0).abs() < 1e-14);
    assert!(s.get("constants.c_mt.reason").unwrap().contains("Moser-Trudinger"));
}

#[test]
fn construct_rejects_k_at_least_half_n() {
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["construct"], "n = 5\nk = 3\nl = 1\n");
    assert_eq!(code, 2);
    assert!(s.get("error.message").unwrap().contains("l < k < n/2"));
}

#[test]
fn construct_writes_profiles_and_quotient_table() {
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["construct"], "n = 5\nk = 2\nl = 1\ndeltas = 0.2, 0.1, 0.05\nprofile_grid = 100\n");
    let out = dir.path().join("out");
    // the bubble's middle band has negative sigma_2, so the run reports infeasibility
    assert_eq!(code, 5);
    assert_eq!(s.get("construct.positive"), Some("false"));
    assert!(num(&s, "construct.neck.min_sigma_k") > 0.0);
    let (header, rows) = csv(&out.join("neck.csv"));
    assert_eq!(header, ["r", "u", "alpha", "sigma_k_margin"]);
    assert_eq!(rows.len(), 100);
    for d in ["0.2", "0.1", "0.05"] {
        assert!(out.join(format!("bubble_delta_{d}.csv")).exists());
    }
    let (_, q) = csv(&out.join("quotients.csv"));
    assert_eq!(q.len(), 3);
    let sphere = num(&s, "construct.sphere_quotient");
    assert!(q.iter().all(|r| (r[6] / sphere - 1.0).abs() < 0.1));
    let slope = num(&s, "construct.bubble.volume_slope");
    assert!((slope / num(&s, "construct.bubble.volume_slope_expected") - 1.0).abs() < 0.05);
}

#[test]
fn verify_passes_and_replays_bit_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = "samples = 8\ngrid_size = 64\ndeltas = 0.1\n";
    let (code, a) = lab(dir.path(), &["verify", "--seed", "11"], cfg);
    assert_eq!(code, 0, "{:?}", a.get("error.message"));
    assert_eq!(a.get("verify.violations"), Some("0"));
    assert!(num(&a, "verify.quermass_n4_k2_l1.min_margin") >= -1e-8);
    let (_, b) = lab(dir.path(), &["verify", "--seed", "11"], cfg);
    let strip = |s: &Summary| s.entries().iter().filter(|(k, _)| k != "wall_time_s").cloned().collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&b));
    let (_, c) = lab(dir.path(), &["verify", "--seed", "12"], cfg);
    assert_ne!(strip(&a), strip(&c));
}

#[test]
fn flow_replays_bit_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = "grid_size = 32\namplitude = 0.05\n";
    lab(dir.path(), &["flow"], cfg);
    let first = fs::read(dir.path().join("out/trace.csv")).unwrap();
    lab(dir.path(), &["flow"], cfg);
    assert_eq!(first, fs::read(dir.path().join("out/trace.csv")).unwrap());
}

#[test]
fn empty_sweep_gives_empty_table() {
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["sweep"], "# no rows\n");
    assert_eq!(code, 0);
    assert_eq!(s.get("sweep.rows"), Some("0"));
    let (header, rows) = csv(&dir.path().join("out/sweep.csv"));
    assert_eq!(header[0], "row");
    assert!(rows.is_empty());
}

#[test]
fn sweep_resolutions_agree_and_worker_count_does_not_matter() {
    let dir = TempDir::new().unwrap();
    let cfg = "sweep_rows = 2 1 0.1 32; 2 1 0.1 64; 1 0 0.1 32\ntrace_stride = 50\n";
    let (code, one) = lab_env(dir.path(), &["sweep"], cfg, &[("SIGMA_FLOW_WORKERS", "1")]);
    assert_eq!(code, 0);
    let (_, rows) = csv(&dir.path().join("out/sweep.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[5] == 0.0), "all rows converge");
    assert!((rows[0][9] / rows[1][9] - 1.0).abs() < 1e-4);
    for i in 0..3 {
        assert!(dir.path().join(format!("out/trace_row_{i}.csv")).exists());
    }
    let (_, three) = lab_env(dir.path(), &["sweep"], cfg, &[("SIGMA_FLOW_WORKERS", "3")]);
    let strip = |s: &Summary| s.entries().iter().filter(|(k, _)| k != "wall_time_s").cloned().collect::<Vec<_>>();
    assert_eq!(strip(&one), strip(&three));
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (code, _) = lab_env(dir.path(), &["sweep"], "", &[("SIGMA_FLOW_WORKERS", "lots")]);
    assert_eq!(code, 2);
}

#[test]
fn sweep_row_that_cannot_start_exits_3() {
    let dir = TempDir::new().unwrap();
    let (code, s) = lab(dir.path(), &["sweep"], "sweep_rows = 2 1 0.1 32; 2 1 5.0 32\ntrace_stride = 50\n");
    assert_eq!(code, 3);
    assert_eq!(s.get("sweep.row_0.status"), Some("converged"));
    assert_eq!(s.get("sweep.row_1.status"), Some("failed"));
}
