use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fw_unicycle::log::parse_log;

const BIN: &str = env!("CARGO_BIN_EXE_fw-unicycle");

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn fw(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SQUARE: &str = r#"
label = "square"
beacons = [
  { x = -2.0, y = 2.0, weight = 1.0 },
  { x = 2.0, y = 2.0, weight = 1.0 },
  { x = 2.0, y = -2.0, weight = 1.0 },
  { x = -2.0, y = -2.0, weight = 1.0 },
]
[agent]
x = 3.0
y = 3.0
theta = 3.141592653589793
[controller]
kind = "stationary"
k_p = 0.5
k_h = 1.0
[sim]
dt = 0.01
t_final = 60.0
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_converges_with_exit_zero() {
    let dir = workdir("run_ok");
    let out = dir.join("square.csv");
    let r = fw(&["run", "--scenario", s(&scenarios().join("square.toml")), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let log = parse_log(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(log.samples.last().unwrap().tracking_error < 1e-2);
    assert_eq!(log.meta["fw_point"], "0.0 0.0");
}

#[test]
fn timeout_exits_two() {
    let dir = workdir("timeout");
    let sc = write(&dir, "s.toml", &SQUARE.replace("t_final = 60.0", "t_final = 2.0"));
    let r = fw(&["run", "--scenario", s(&sc), "--out", s(&dir.join("o.csv"))]);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}

#[test]
fn collision_exits_three() {
    let dir = workdir("collision");
    let text = SQUARE
        .replace("theta = 3.141592653589793", "theta = -2.356194490192345")
        .replace("t_final = 60.0", "t_final = 60.0\ncollision_epsilon = 0.8");
    let sc = write(&dir, "s.toml", &text);
    let csv = dir.join("o.csv");
    let r = fw(&["run", "--scenario", s(&sc), "--out", s(&csv)]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
    let log = parse_log(&fs::read_to_string(&csv).unwrap()).unwrap();
    assert!(log.meta["outcome"].starts_with("Collision"));
}

#[test]
fn negative_weight_names_the_key() {
    let dir = workdir("weight");
    let text = SQUARE.replacen("{ x = 2.0, y = 2.0, weight = 1.0 }", "{ x = 2.0, y = 2.0, weight = -1.0 }", 1);
    let sc = write(&dir, "s.toml", &text);
    let r = fw(&["run", "--scenario", s(&sc), "--out", s(&dir.join("o.csv"))]);
    assert_eq!(code(&r), 1);
    let err = stderr(&r);
    assert!(err.contains("beacons[1].weight"), "{err}");
    assert!(err.contains("line 5"), "{err}");
    assert!(!dir.join("o.csv").exists());
}

#[test]
fn agent_on_beacon_is_rejected() {
    let dir = workdir("on_beacon");
    let text = SQUARE.replace("x = 3.0\ny = 3.0", "x = 2.0\ny = 2.0");
    let sc = write(&dir, "s.toml", &text);
    let r = fw(&["run", "--scenario", s(&sc), "--out", s(&dir.join("o.csv"))]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("coincident"), "{}", stderr(&r));
}

#[test]
fn unknown_key_and_missing_file_exit_one() {
    let dir = workdir("unknown");
    let sc = write(&dir, "s.toml", &SQUARE.replace("k_h = 1.0", "k_h = 1.0\nk_i = 0.1"));
    let r = fw(&["run", "--scenario", s(&sc), "--out", s(&dir.join("o.csv"))]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("k_i"), "{}", stderr(&r));
    let r = fw(&["run", "--scenario", s(&dir.join("absent.toml")), "--out", s(&dir.join("o.csv"))]);
    assert_eq!(code(&r), 1);
}

#[test]
fn decimate_flag_thins_the_log() {
    let dir = workdir("decimate");
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    let sc = scenarios().join("square.toml");
    assert_eq!(code(&fw(&["run", "--scenario", s(&sc), "--out", s(&a)])), 0);
    assert_eq!(code(&fw(&["run", "--scenario", s(&sc), "--out", s(&b), "--decimate", "10"])), 0);
    let full = parse_log(&fs::read_to_string(&a).unwrap()).unwrap().samples;
    let thin = parse_log(&fs::read_to_string(&b).unwrap()).unwrap().samples;
    assert_eq!(thin[1], full[10]);
    assert_eq!(thin.last(), full.last());
}

#[test]
fn seed_is_accepted_and_ignored() {
    let dir = workdir("seed");
    let sc = scenarios().join("square.toml");
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    assert_eq!(code(&fw(&["--seed", "7", "run", "--scenario", s(&sc), "--out", s(&a)])), 0);
    assert_eq!(code(&fw(&["run", "--scenario", s(&sc), "--out", s(&b), "--seed", "9"])), 0);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

fn summary(dir: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["label", "outcome", "convergence_time", "final_error", "min_distance"]
    );
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

fn csv_count(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name();
            let name = name.to_str().unwrap();
            name.ends_with(".csv") && name != "summary.csv"
        })
        .count()
}

#[test]
fn sweep_over_corners() {
    let dir = workdir("sweep_corners");
    let out = dir.join("out");
    let r = fw(&[
        "sweep",
        "--scenario",
        s(&scenarios().join("square.toml")),
        "--overrides",
        s(&scenarios().join("corners.toml")),
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let rows = summary(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["ne", "nw", "sw", "se"]);
    assert!(rows.iter().all(|r| r[1] == "Converged"));
    assert_eq!(csv_count(&out), 4);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = workdir("sweep_empty");
    let ov = write(&dir, "o.toml", "# nothing\n");
    let out = dir.join("out");
    let r = fw(&["sweep", "--scenario", s(&scenarios().join("square.toml")), "--overrides", s(&ov), "--out-dir", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(summary(&out).is_empty());
    assert_eq!(csv_count(&out), 0);
}

#[test]
fn sweep_partial_failure() {
    let dir = workdir("sweep_partial");
    let ov = write(
        &dir,
        "o.toml",
        r#"
[[variant]]
label = "a"
agent = { x = 3.0, y = 3.0, theta = 3.141592653589793 }
[[variant]]
label = "b"
agent = { x = -3.0, y = 3.0, theta = 0.0 }
[[variant]]
label = "bad"
sim = { dt = -0.01 }
[[variant]]
label = "d"
agent = { x = 3.0, y = -3.0, theta = -1.5707963267948966 }
"#,
    );
    let out = dir.join("out");
    let r = fw(&["sweep", "--scenario", s(&scenarios().join("square.toml")), "--overrides", s(&ov), "--out-dir", s(&out)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("variant[2].sim.dt"), "{}", stderr(&r));
    let rows = summary(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[2][1], "Error");
    assert!(rows.iter().enumerate().all(|(i, r)| i == 2 || r[1] == "Converged"));
    assert_eq!(csv_count(&out), 3);
}

#[test]
fn verify_square() {
    let r = fw(&["verify", "--scenario", s(&scenarios().join("square.toml"))]);
    assert_eq!(code(&r), 0);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("existence: [true, true, true, true]"), "{text}");
    assert!(text.contains("fw_point: (0.0, 0.0)"), "{text}");
    assert!(text.contains("status: Converged"), "{text}");
}

#[test]
fn verify_dominant_weight_reports_beacon() {
    let r = fw(&["verify", "--scenario", s(&scenarios().join("dominant.toml"))]);
    assert_eq!(code(&r), 0);
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("existence: [false, true, true]"), "{text}");
    assert!(text.contains("status: BeaconOptimal (beacon 0)"), "{text}");
}

#[test]
fn verify_fails_on_loose_solver_tolerance() {
    let dir = workdir("verify_fail");
    // An unreachable tolerance leaves the solver at its iteration cap.
    let beacons = write(
        &dir,
        "b.toml",
        "beacons = [{ x = 0.0, y = 0.0, weight = 1.0 }, { x = 4.0, y = 0.0, weight = 1.0 }, { x = 1.0, y = 3.0, weight = 1.0 }]\n",
    );
    let r = fw(&["verify", "--scenario", s(&beacons), "--tol", "0"]);
    assert_eq!(code(&r), 2, "{}", String::from_utf8_lossy(&r.stdout));
    assert!(String::from_utf8(r.stdout).unwrap().contains("FAIL"));
}

#[test]
fn verify_rejects_collinear() {
    let dir = workdir("collinear");
    let beacons = write(
        &dir,
        "b.toml",
        "beacons = [{ x = 0.0, y = 0.0, weight = 1.0 }, { x = 1.0, y = 1.0, weight = 1.0 }, { x = 2.0, y = 2.0, weight = 1.0 }]\n",
    );
    let r = fw(&["verify", "--scenario", s(&beacons)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("collinear"), "{}", stderr(&r));
}

#[test]
fn plot_writes_svg() {
    let dir = workdir("plot");
    let csv = dir.join("sat.csv");
    let svg = dir.join("sat.svg");
    assert_eq!(code(&fw(&["run", "--scenario", s(&scenarios().join("saturated.toml")), "--out", s(&csv)])), 0);
    let r = fw(&["plot", s(&csv), "--out", s(&svg)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("commands"));
}

#[test]
fn plot_single_sample() {
    let dir = workdir("plot_one");
    let csv = dir.join("full.csv");
    assert_eq!(code(&fw(&["run", "--scenario", s(&scenarios().join("square.toml")), "--out", s(&csv)])), 0);
    let text = fs::read_to_string(&csv).unwrap();
    let header_end = text.find("\nt,x,").unwrap() + 1;
    let first_row_end = header_end + text[header_end..].find('\n').unwrap() + 1;
    let second_row_end = first_row_end + text[first_row_end..].find('\n').unwrap() + 1;
    let one = write(&dir, "one.csv", &text[..second_row_end]);
    assert_eq!(parse_log(&fs::read_to_string(&one).unwrap()).unwrap().samples.len(), 1);
    let r = fw(&["plot", s(&one), "--out", s(&dir.join("one.svg"))]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
}

#[test]
fn plot_rejects_malformed_csv() {
    let dir = workdir("plot_bad");
    let bad = write(&dir, "bad.csv", "t,x,y\n0,1,2\n");
    let r = fw(&["plot", s(&bad), "--out", s(&dir.join("bad.svg"))]);
    assert_eq!(code(&r), 1);
    assert!(!dir.join("bad.svg").exists());
}
