use densnav_cli::Scenario;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"))
}

fn scenario_text(name: &str) -> String {
    std::fs::read_to_string(scenario_path(name)).unwrap()
}

fn densnav(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densnav"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

/// Write `text` as a scenario in `dir` and run `args` on it.
fn run_text(args: &[&str], text: &str, dir: &Path) -> Output {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    densnav(args, &path, &dir.join("out"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, usize) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    (headers, r.records().count())
}

const GOLDEN: &[&str] = &[
    "fig3_circle",
    "fig4_complex",
    "fig5_maze",
    "fig5_3d",
    "fig5_tori",
    "fig6_cshape",
    "fig7_noise",
    "fig7_saturated",
    "fig8_swingup",
];

#[test]
fn golden_scenarios_round_trip() {
    for name in GOLDEN {
        let (s, _) = Scenario::load(&scenario_path(name)).unwrap();
        assert_eq!(&s.name, name);
        let back = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, s, "{name}");
    }
}

#[test]
fn unknown_field_is_rejected_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenario_text("fig3_circle").replace("[density]\n", "[density]\nbogus = 1\n");
    let o = run_text(&["run"], &text, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bogus") && e.contains("line"), "{e}");
}

#[test]
fn negative_theta_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenario_text("fig3_circle").replace("theta = 0.01", "theta = -0.01");
    let o = run_text(&["run"], &text, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));
    assert!(!dir.path().join("out").join("summary.json").exists());
}

#[test]
fn zero_velocity_gain_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenario_text("fig8_swingup").replace("kv = [10.0, 10.0]", "kv = [0.0, 10.0]");
    let o = run_text(&["arm"], &text, dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn compare_needs_a_cavity_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = densnav(&["compare-nf"], &scenario_path("fig3_circle"), dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("c_shape"));
}

#[test]
fn divergence_grid_must_exclude_target_ball() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenario_text("fig3_circle").replace("[verify]\n", "[verify]\ntarget_exclusion = 0.5\n");
    let o = run_text(&["verify", "--grid", "20"], &text, dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("target"), "{}", stderr(&o));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = densnav(&["sweep"], &scenario_path("fig3_circle"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (headers, rows) = csv_rows(&dir.path().join("sweep.csv"));
    assert!(headers.iter().any(|h| h == "alpha"));
    assert_eq!(rows, 0);
}

/// The gradient flow slows like |x|^(-2 alpha - 1) far from the target, so
/// larger alpha trades finished runs for the time limit, never for collisions.
#[test]
fn sweep_over_alpha_slows_but_stays_clear() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenario_text("fig3_circle").replace("count = 100", "count = 10");
    let o = run_text(&["sweep", "--alphas", "1,2,3,4,5,6,7,8,9,10"], &text, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(dir.path().join("out").join("sweep.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (frac, clear) = (col("fraction_converged"), col("mean_min_clearance"));
    let rows: Vec<(f64, f64)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[frac].parse().unwrap(), rec[clear].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0].0, 1.0);
    assert!(rows.windows(2).all(|w| w[1].0 <= w[0].0), "{rows:?}");
    assert!(rows.iter().all(|(_, c)| *c > 0.0), "{rows:?}");
}

#[test]
fn arm_logs_matching_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = densnav(&["arm"], &scenario_path("fig8_swingup"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, states) = csv_rows(&dir.path().join("states.csv"));
    let (_, torques) = csv_rows(&dir.path().join("torques.csv"));
    assert!(states > 1);
    assert_eq!(states, torques);
    assert!(dir.path().join("joint_plot.svg").exists());
    assert!(std::fs::read_dir(dir.path().join("frames")).unwrap().count() > 0);
}

#[test]
fn maze_converges() {
    let dir = tempfile::tempdir().unwrap();
    let o = densnav(&["run"], &scenario_path("fig5_maze"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let stats = &summary["stats"];
    assert!(stats["runs"].as_u64().unwrap() > 0);
    assert_eq!(stats["converged"], stats["runs"]);
    assert_eq!(stats["unsafe_entered"], 0);
}

#[test]
fn every_invocation_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let text = scenario_text("fig7_noise").replace("count = 50", "count = 4");
    let a = run_text(&["run"], &text, dir.path());
    assert!(a.status.success(), "{}", stderr(&a));
    let path = dir.path().join("scenario.toml");
    let b = Command::new(env!("CARGO_BIN_EXE_densnav"))
        .args(["run", "--seed", "9", "--dt-override", "0.1", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(b.status.success(), "{}", stderr(&b));
    let log = std::fs::read_to_string(dir.path().join("out").join("runs.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["scenario_sha256"], records[1]["scenario_sha256"]);
    assert_eq!(records[0]["scenario_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(records[1]["seed"], 9);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["dt"], 0.1);
    assert_eq!(summary["seed"], 9);
}
