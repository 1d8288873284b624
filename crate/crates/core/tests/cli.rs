use std::path::Path;
use std::process::{Command, Output};

use costas_lab::cli::{RunConfig, TRAJECTORY_HEADER};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_costas-lab");

const LEAD_LAG: &str = "model = classic_phase_space
loop_filter = lead_lag
tau1 = 0.1
tau2 = 0.029
vco_gain = 1000
omega1 = 10000
scheme = dp45
rel_tol = 1e-10
abs_tol = 1e-13
max_step = 1e-3
t_end = 20
sample_dt = 1e-2
";

fn costas(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn simulate(extra: &str) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let text = format!("model = signal_space\nt_end = 1e-3\nsample_dt = 1e-7\n{extra}");
    let cfg = write(dir.path(), "run.cfg", &text);
    let out = costas(&["simulate", "--config", &cfg, "--out", "traj.csv"], dir.path());
    (out, dir)
}

#[test]
fn loop_from_rest_locks() {
    let (out, dir) = simulate("omega_delta_free = 2\n");
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(stdout(&out).starts_with("locked=true"), "{}", stdout(&out));

    let csv = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER);
    assert_eq!(
        lines.next().unwrap().split(',').count(),
        TRAJECTORY_HEADER.split(',').count()
    );
}

#[test]
fn charged_arm_filter_keeps_the_loop_out_of_lock() {
    let (out, _dir) = simulate("omega_delta_free = 2\nx1 = 0.02\n");
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("locked=false"), "{}", stdout(&out));
}

#[test]
fn charged_loop_filter_keeps_the_loop_out_of_lock() {
    let (out, _dir) = simulate("omega_delta_free = 10\nx = -1e-5\n");
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("locked=false"), "{}", stdout(&out));
}

#[test]
fn bad_step_is_a_config_error() {
    for dt in ["0", "-1e-9"] {
        let (out, _dir) = simulate(&format!("dt = {dt}\n"));
        assert_eq!(out.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&out.stderr).contains("`dt`"));
    }
}

#[test]
fn unknown_and_repeated_keys_are_rejected() {
    for extra in ["colour = red\n", "t_end = 2e-3\n"] {
        let (out, _dir) = simulate(extra);
        assert_eq!(out.status.code(), Some(1), "{extra}");
    }
}

#[test]
fn example_ids_outside_the_range_are_refused() {
    let dir = TempDir::new().unwrap();
    for id in ["0", "7", "six"] {
        let out = costas(&["example", id], dir.path());
        assert_eq!(out.status.code(), Some(1), "{id}");
    }
}

#[test]
fn single_carrier_frequency_gives_no_slope() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "avg.cfg",
        "model = modified_signal_space\nomega_delta_free = 1e4\ntheta_delta = 1\ndt = 1.6e-8\nsample_dt = 1.6e-7\nt_end = 1e-4\n",
    );
    let out = costas(&["avgcheck", "--config", &cfg, "--omega1", "628318.53"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(!text.contains("slope"));
    assert!(!text.contains("violated"));

    let out = costas(&["avgcheck", "--config", &cfg, "--omega1", "5e4,628318.53"], dir.path());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[1].ends_with("condition-15-violated"), "{text}");
    assert!(rows[2].ends_with(','), "{text}");
    assert!(rows[3].starts_with("slope="), "{text}");
}

fn portrait(extra: &str) -> String {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "ll.cfg", &format!("{LEAD_LAG}{extra}"));
    let out = costas(
        &[
            "portrait",
            "--config",
            &cfg,
            "--grid",
            "x=0:0.012:4,theta=-1.5:1.5:3",
            "--outdir",
            "p",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let index = std::fs::read_to_string(dir.path().join("p/index.csv")).unwrap();
    assert_eq!(index.lines().count(), 13);
    let header = std::fs::read_to_string(dir.path().join("p/trajectory_0011.csv")).unwrap();
    assert!(header.starts_with("t,x,theta_delta\n"));
    index
}

#[test]
fn portrait_shows_both_captured_and_rotational_motion() {
    let index = portrait("omega_delta_free = 89.45\n");
    assert!(index.contains(",captured,"));
    assert!(index.contains(",rotational,"));
}

#[test]
fn portrait_without_detuning_is_all_captured() {
    let index = portrait("omega_delta_free = 0\n");
    assert!(!index.contains(",rotational,"), "{index}");
}

#[test]
fn pull_in_output_does_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "ll.cfg", LEAD_LAG);
    let run = |threads: &str| {
        let out = Command::new(BIN)
            .args([
                "pullin",
                "--config",
                &cfg,
                "--range",
                "0:120:40",
                "--grid",
                "x=0:0.008:2,theta=-1.5:0:2",
            ])
            .current_dir(dir.path())
            .env("COSTAS_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        stdout(&out)
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert!(one.starts_with("omega_delta,verdict,escapes,runs,hold_in\n"));
    assert!(one.contains("largest_all_lock=80"), "{one}");
}

#[test]
fn config_text_round_trips() {
    let cfg: RunConfig = format!("{LEAD_LAG}omega_delta_free = 89.45\nx = 0.0125\ntheta_delta = -3.4035\n")
        .parse()
        .unwrap();
    let again: RunConfig = cfg.to_text().parse().unwrap();
    assert_eq!(cfg, again);
}

#[test]
fn bistable_scenario_writes_a_summary_and_passes() {
    let dir = TempDir::new().unwrap();
    let out = costas(&["example", "6", "--outdir", "ex6"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let summary = std::fs::read_to_string(dir.path().join("ex6/example6_summary.txt")).unwrap();
    assert!(summary.contains("check.stable_unstable_pair = true"), "{summary}");
    assert!(dir.path().join("ex6/example6_rk4-fine.csv").exists());
}
