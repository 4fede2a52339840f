use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use dracer::eval::{centerline_controller, EvalReport};
use dracer::rl::{Checkpoint, CheckpointMeta};
use dracer::sim::{ActionSpace, SimConfig};

fn dracer() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dracer"));
    c.env_remove("DRACER_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    dracer().args(args).output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SQUARE_ANNULUS: &str = "trackmesh v1 annulus
v -2 -2
v 2 -2
v 2 2
v -2 2
v -1 -1
v 1 -1
v 1 1
v -1 1
t 0 1 6
t 0 6 5
t 1 2 7
t 1 7 6
t 2 3 4
t 2 4 7
t 3 0 5
t 3 5 4
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("small.ini");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "max_steps=80

[trainer]
episodes_per_update=3
epochs_per_update=2

[eval]
trials=2
";

#[test]
fn built_oval_has_the_analytic_lap_length() {
    let dir = tempfile::tempdir().unwrap();
    let trk = dir.path().join("oval.trk");
    let out = run(&["track", "build", "--shape", "oval", "--length", "8", "--width", "0.6", "-o", arg(&trk)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&run(&["track", "waypoints", arg(&trk)])), 0);
    let csv = std::fs::read_to_string(dir.path().join("oval.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,x,y,width,cum_s"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let closing = ((first[1] - last[1]).powi(2) + (first[2] - last[2]).powi(2)).sqrt();
    let lap = last[4] + closing;
    let analytic = 2.0 * 6.0 + 2.0 * std::f64::consts::PI;
    assert!((lap - analytic).abs() / analytic < 0.02, "lap {lap} vs {analytic}");
}

#[test]
fn inspect_counts_annulus_loops() {
    let dir = tempfile::tempdir().unwrap();
    let trk = dir.path().join("annulus.trk");
    std::fs::write(&trk, SQUARE_ANNULUS).unwrap();
    let out = run(&["track", "inspect", arg(&trk)]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("boundary_loops 2\n"), "{text}");
    assert!(text.contains("triangles 8\n"));
    assert!(text.contains("lap_length 12.000000\n"), "{text}");
}

#[test]
fn three_loop_mesh_is_a_malformed_track() {
    let dir = tempfile::tempdir().unwrap();
    let trk = dir.path().join("three.trk");
    std::fs::write(&trk, format!("{SQUARE_ANNULUS}v 5 5\nv 6 5\nv 5 6\nt 8 9 10\n")).unwrap();
    let out = run(&["track", "waypoints", arg(&trk)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed track"));
    let inspect = String::from_utf8(run(&["track", "inspect", arg(&trk)]).stdout).unwrap();
    assert!(inspect.contains("boundary_loops 3\n"), "{inspect}");
}

#[test]
fn self_intersecting_shape_fails_to_build() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["track", "build", "--shape", "figure-eight", "-o", arg(&dir.path().join("f8.trk"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn all_in_one_runs_are_reproducible_and_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let trk = dir.path().join("oval.trk");
    run(&["track", "build", "-o", arg(&trk)]);
    let cfg = write_config(dir.path(), SMALL);
    let runs = dir.path().join("runs");
    let train = |id: &str| {
        run(&[
            "train", "--role", "all", "--workers", "1", "--budget-updates", "2", "--obs", "features", "--track",
            arg(&trk), "--seed", "7", "--config", arg(&cfg), "--out", arg(&runs), "--run-id", id,
        ])
    };
    for id in ["a", "b"] {
        let out = train(id);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |id: &str, f: &str| std::fs::read(runs.join(id).join(f)).unwrap();
    assert_eq!(read("a", "metrics.csv"), read("b", "metrics.csv"));
    assert_eq!(read("a", "checkpoints/v000003.drck"), read("b", "checkpoints/v000003.drck"));
    let metrics = String::from_utf8(read("a", "metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);

    let manifest: serde_json::Value = serde_json::from_slice(&read("a", "manifest.json")).unwrap();
    assert_eq!(manifest["role"], "all");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 8);
    assert!(!read("a", "eval_log.csv").is_empty());

    assert_eq!(code(&train("a")), 1);
}

#[test]
fn config_path_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[trainer]\nepisodes_per_update=2\nbogus=1\n");
    let out = dracer()
        .env("DRACER_CONFIG", &cfg)
        .args(["train", "--budget-updates", "1", "--obs", "features", "--out", arg(&dir.path().join("r"))])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    assert!(!dir.path().join("r").exists());
}

#[test]
fn endpoint_conflicts_are_usage_errors() {
    let out = run(&["train", "--role", "all", "--connect", "127.0.0.1:1"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&run(&["train", "--role", "worker", "--listen", "127.0.0.1:1"])), 2);
}

#[test]
fn worker_without_store_gives_up_after_connect_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let started = Instant::now();
    let out = run(&[
        "train", "--role", "worker", "--connect", &addr, "--connect-timeout", "0.5", "--obs", "features", "--out",
        arg(dir.path()),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unreachable"));
    assert!(started.elapsed() < Duration::from_secs(20));
}

fn controller_checkpoint(dir: &Path) -> PathBuf {
    let sim = SimConfig::features();
    let nets = centerline_controller(&ActionSpace::from_config(&sim), sim.wheelbase);
    let path = dir.join("controller.drck");
    Checkpoint { meta: CheckpointMeta { version: 1, ..Default::default() }, nets }.save(&path).unwrap();
    path
}

#[test]
fn controller_checkpoint_completes_both_protocols() {
    let dir = tempfile::tempdir().unwrap();
    let ck = controller_checkpoint(dir.path());
    let out = run(&["eval", arg(&ck), "--trials", "4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for protocol in ["naive", "robust"] {
        let text = std::fs::read_to_string(dir.path().join(format!("v000001_{protocol}.json"))).unwrap();
        let report: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report.runs.len(), 4);
        assert_eq!(report.completion_rate, 1.0, "{protocol}");
    }
}

#[test]
fn zero_trials_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = controller_checkpoint(dir.path());
    assert_eq!(code(&run(&["eval", arg(&ck), "--trials", "0"])), 2);
    assert_eq!(code(&run(&["eval", arg(&dir.path().join("missing.drck"))])), 1);
}

#[test]
fn select_prints_the_center_of_the_best_window() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = String::from("version,protocol,trial,start_wp,direction,progress,lap_complete,steps,mean_reward\n");
    for (i, p) in [0.2, 0.9, 0.95, 0.9, 0.3].iter().enumerate() {
        log.push_str(&format!("{},robust,0,0,forward,{p},false,10,0.5\n", i + 1));
    }
    std::fs::write(dir.path().join("eval_log.csv"), log).unwrap();
    let out = run(&["eval", arg(dir.path()), "--select"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "3\n");
    assert_eq!(code(&run(&["eval", arg(dir.path()), "--select", "--window", "6"])), 2);
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn separate_roles_train_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let runs = dir.path().join("runs");
    let spawn = |args: &[&str]| {
        Killed(
            dracer()
                .args(args)
                .args(["--config", arg(&cfg), "--obs", "features", "--out", arg(&runs)])
                .stdout(Stdio::null())
                .stderr(Stdio::null())
                .spawn()
                .unwrap(),
        )
    };
    let _store = spawn(&["train", "--role", "store", "--listen", &addr, "--run-id", "store", "--budget-seconds", "60"]);
    let _w0 = spawn(&["train", "--role", "worker", "--connect", &addr, "--run-id", "w0", "--worker-id", "0"]);
    let _w1 = spawn(&["train", "--role", "worker", "--connect", &addr, "--run-id", "w1", "--worker-id", "1"]);
    let _eval = spawn(&["train", "--role", "eval", "--connect", &addr, "--run-id", "ev", "--budget-seconds", "60"]);
    let trainer = dracer()
        .args(["train", "--role", "trainer", "--connect", &addr, "--run-id", "tr", "--budget-updates", "2"])
        .args(["--config", arg(&cfg), "--obs", "features", "--out", arg(&runs)])
        .output()
        .unwrap();
    assert_eq!(code(&trainer), 0, "{}", String::from_utf8_lossy(&trainer.stderr));
    let metrics = std::fs::read_to_string(runs.join("tr/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
    assert!(runs.join("tr/checkpoints/v000003.drck").exists());
    let deadline = Instant::now() + Duration::from_secs(30);
    while Instant::now() < deadline && !runs.join("ev/eval/v000003_robust.json").exists() {
        std::thread::sleep(Duration::from_millis(100));
    }
    assert!(runs.join("ev/eval/v000003_robust.json").exists());
}

#[test]
fn four_workers_and_one_worker_both_yield_valid_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let runs = dir.path().join("runs");
    for workers in ["1", "4"] {
        let out = run(&[
            "train", "--workers", workers, "--budget-steps", "600", "--obs", "features", "--no-eval", "--config",
            arg(&cfg), "--out", arg(&runs), "--run-id", workers,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let ck_dir = runs.join(workers).join("checkpoints");
        let mut files: Vec<_> = std::fs::read_dir(&ck_dir).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        let ck = Checkpoint::load(files.last().unwrap()).unwrap();
        assert!(ck.meta.steps >= 600);
        assert!(ck.nets.is_finite());
    }
}
