//! End-to-end runs of the `hydrosched` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hydrosched::bench::adversarial_instance;
use hydrosched::model::ScheduleFile;

fn hydrosched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrosched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_adversarial(dir: &Path) -> std::path::PathBuf {
    let inst = adversarial_instance();
    let file = dir.join(format!("{}.json", inst.name));
    fs::write(&file, inst.to_json().unwrap()).unwrap();
    file
}

#[test]
fn generate_writes_sample_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested/sample");
    let run = hydrosched(&["generate", "--out", path(&out), "--seed", "7"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let json = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "json"))
        .count();
    assert_eq!(json, 55);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["instances"].as_array().unwrap().len(), 54);

    // same seed, same bytes
    let again = tmp.path().join("again");
    assert_eq!(code(&hydrosched(&["generate", "--out", path(&again), "--seed", "7"])), 0);
    for name in ["manifest.json", "V2-P3-D4.json"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(again.join(name)).unwrap());
    }

    // refuses to overwrite unless forced
    assert_eq!(code(&hydrosched(&["generate", "--out", path(&out)])), 1);
    assert_eq!(code(&hydrosched(&["generate", "--out", path(&out), "--force"])), 0);
}

#[test]
fn heuristic_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let file = write_adversarial(tmp.path());
    let run = hydrosched(&["solve", path(&file), "--algo", "heuristic", "--out", path(tmp.path())]);
    assert_eq!(code(&run), 2);
    assert!(String::from_utf8_lossy(&run.stdout).contains("no feasible schedule"));
}

#[test]
fn relaxation_schedule_is_marked() {
    let tmp = tempfile::tempdir().unwrap();
    let file = write_adversarial(tmp.path());
    let run = hydrosched(&["solve", path(&file), "--algo", "lp", "--out", path(tmp.path())]);
    assert_eq!(code(&run), 0);
    assert!(String::from_utf8_lossy(&run.stdout).contains("bound 1175"));
    let name = adversarial_instance().name;
    let text = fs::read_to_string(tmp.path().join(format!("{name}.lp.schedule.json"))).unwrap();
    let sched: ScheduleFile = serde_json::from_str(&text).unwrap();
    assert!(sched.relaxation);
    assert_eq!(sched.algorithm, "lp");
}

#[test]
fn price_and_predict_write_schedules_and_histories() {
    let tmp = tempfile::tempdir().unwrap();
    let file = write_adversarial(tmp.path());
    let name = adversarial_instance().name;
    for algo in ["price", "predict"] {
        let run = hydrosched(&["solve", path(&file), "--algo", algo, "--out", path(tmp.path())]);
        assert_eq!(code(&run), 0, "{algo}: {}", String::from_utf8_lossy(&run.stderr));
        let sched: ScheduleFile =
            serde_json::from_str(&fs::read_to_string(tmp.path().join(format!("{name}.{algo}.schedule.json"))).unwrap())
                .unwrap();
        assert!(sched.feasible && !sched.relaxation);
        let history = fs::read_to_string(tmp.path().join(format!("{name}.{algo}.history.csv"))).unwrap();
        assert!(history.lines().count() >= 2);
    }
}

#[test]
fn bad_parameters_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let file = write_adversarial(tmp.path());
    let f = path(&file);
    let o = path(tmp.path());
    assert_eq!(code(&hydrosched(&["solve", f, "--algo", "price", "--out", o, "--c", "-1"])), 1);
    assert_eq!(code(&hydrosched(&["solve", f, "--algo", "predict", "--out", o, "--eps", "0.1"])), 1);
    assert_eq!(code(&hydrosched(&["solve", f, "--algo", "heuristic", "--out", o, "--c", "1"])), 1);
    assert_eq!(code(&hydrosched(&["solve", f, "--algo", "simplex"])), 1);
    assert_eq!(code(&hydrosched(&["solve", "/nonexistent/instance.json", "--algo", "lp"])), 1);
}

#[test]
fn bench_validates_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&hydrosched(&["bench", path(&empty), "--out", path(&out)])), 1);

    let sample = tmp.path().join("sample");
    fs::create_dir(&sample).unwrap();
    write_adversarial(&sample);
    let run = hydrosched(&["bench", path(&sample), "--out", path(&out), "--jobs", "1"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["instances.csv", "summary.csv", "summary.txt", "timings.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let first = fs::read(out.join("instances.csv")).unwrap();
    assert!(String::from_utf8_lossy(&first).starts_with("instance,best,gain_L"));

    // a rerun into the same directory needs --force and reproduces the sheet
    assert_eq!(code(&hydrosched(&["bench", path(&sample), "--out", path(&out)])), 1);
    let run = hydrosched(&["bench", path(&sample), "--out", path(&out), "--force"]);
    assert_eq!(code(&run), 0);
    assert_eq!(fs::read(out.join("instances.csv")).unwrap(), first);
}
