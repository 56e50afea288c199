use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypersplit"))
}

static DIR_SEQ: AtomicUsize = AtomicUsize::new(0);

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "hypersplit-cli-{}-{tag}-{}",
        std::process::id(),
        DIR_SEQ.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_summary_with_error() {
    let dir = scratch_dir("run");
    let out = bin()
        .args(["run", "--case", "test1", "--n", "10"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("case = test1"), "{summary}");
    let max_error: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("max_error = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_error > 0.0 && max_error < 1.0, "max_error {max_error}");
}

#[test]
fn missing_case_is_usage_error() {
    let out = bin().args(["run", "--n", "10"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn unknown_case_is_usage_error() {
    let out = bin().args(["run", "--case", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn eta_weights_echoed_in_summary() {
    let dir = scratch_dir("eta");
    let out = bin()
        .args(["run", "--case", "smooth", "--n", "8", "--eta", "0.3,0.7"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    let eta_line = summary
        .lines()
        .find_map(|l| l.strip_prefix("eta = "))
        .unwrap();
    let parsed: Vec<f64> = eta_line.split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(parsed, vec![0.3, 0.7]);
}

#[test]
fn bad_eta_sum_is_usage_error() {
    let out = bin()
        .args(["run", "--case", "smooth", "--n", "8", "--eta", "0.7,0.4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn converge_writes_csv_slope_and_dat() {
    let dir = scratch_dir("conv");
    let out = bin()
        .args(["converge", "--case", "smooth", "--n", "5,10,20"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let csv = fs::read_to_string(dir.join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,tau,h,max_error,l2_error,rel_error,runtime_s"
    );
    assert_eq!(csv.lines().count(), 4);
    let slope_text = fs::read_to_string(dir.join("slope.txt")).unwrap();
    let slope: f64 = slope_text
        .trim()
        .strip_prefix("slope = ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope > 1.0, "slope {slope}");
    let dat = fs::read_to_string(dir.join("report.dat")).unwrap();
    assert_eq!(dat.lines().count(), 4); // comment header + 3 points
}

#[test]
fn converge_single_resolution_flags_insufficient() {
    let dir = scratch_dir("conv1");
    let out = bin()
        .args(["converge", "--case", "smooth", "--n", "8"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let slope_text = fs::read_to_string(dir.join("slope.txt")).unwrap();
    assert!(slope_text.contains("insufficient"), "{slope_text}");
}

#[test]
fn verify_single_record_is_reproducible() {
    let run = || {
        let out = bin()
            .args(["verify", "--seed", "42", "--count", "1"])
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        stdout(&out)
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    let first: serde_json::Value = serde_json::from_str(a.lines().next().unwrap()).unwrap();
    assert_eq!(first["seed"], 42);
    assert_eq!(first["pass"], true);
}

#[test]
fn verify_surfaces_broken_weights_with_exit_1() {
    let out = bin()
        .args([
            "verify",
            "--seed",
            "1",
            "--count",
            "1",
            "--inject-broken-weights",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let text = stdout(&out);
    let rec: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(rec["check"], "splitting_validation");
    assert_eq!(rec["pass"], false);
}

#[test]
fn cheb_degree_zero_row_is_one() {
    let out = bin()
        .args(["cheb", "--k", "0..5", "--x", "0.5", "--y", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,x,value,bound");
    assert_eq!(lines.len(), 7); // header + 6 degrees
    let row0: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row0[0], "0");
    let value: f64 = row0[2].parse().unwrap();
    assert_eq!(value, 1.0);
}

#[test]
fn cheb_values_stay_within_bound_column() {
    let out = bin()
        .args(["cheb", "--k", "0..60", "--x", "0.9", "--y", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    for line in stdout(&out).lines().skip(1) {
        let cols: Vec<f64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert!(cols[1].abs() <= cols[2] * (1.0 + 1e-12), "{line}");
    }
}

#[test]
fn cheb_classical_path_matches_recurrence() {
    let run = |classical: bool| {
        let mut cmd = bin();
        cmd.args(["cheb", "--k", "0..40", "--x", "0.8", "--y", "1.3"]);
        if classical {
            cmd.arg("--classical");
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{out:?}");
        stdout(&out)
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .collect::<Vec<f64>>()
    };
    let rec = run(false);
    let cls = run(true);
    for (k, (a, b)) in rec.iter().zip(&cls).enumerate() {
        let scale = a.abs().max(1.0);
        assert!((a - b).abs() <= 1e-10 * scale, "k={k}: {a} vs {b}");
    }
}

#[test]
fn trajectories_identical_across_thread_counts() {
    let run = |threads: &str, tag: &str| {
        let dir = scratch_dir(tag);
        let out = bin()
            .args([
                "run",
                "--case",
                "smooth",
                "--n",
                "8",
                "--store-trajectory",
                "--threads",
                threads,
            ])
            .arg("--out")
            .arg(&dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{out:?}");
        dir
    };
    let d1 = run("1", "t1");
    let d8 = run("8", "t8");
    let mut layers: Vec<String> = fs::read_dir(&d1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("layer_"))
        .collect();
    layers.sort();
    assert_eq!(layers.len(), 9); // v_0 .. v_8
    for name in layers {
        let a = fs::read(d1.join(&name)).unwrap();
        let b = fs::read(d8.join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between thread counts");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch_dir("cfg");
    let cfg_path = dir.join("run.conf");
    fs::write(
        &cfg_path,
        "# smooth run\ncase = smooth\nn = 16\neta = 0.5,0.5\n",
    )
    .unwrap();
    let out = bin()
        .args(["run", "--n", "8"]) // flag wins over config's n = 16
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("case = smooth"), "{summary}");
    assert!(summary.contains("n = 8"), "{summary}");
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = scratch_dir("badcfg");
    let cfg_path = dir.join("run.conf");
    fs::write(&cfg_path, "case = smooth\nbogus_key = 3\n").unwrap();
    let out = bin()
        .arg("run")
        .arg("--config")
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("bogus_key"), "{err}");
    assert!(err.contains(":2"), "diagnostic should cite the line: {err}");
}

#[test]
fn env_var_sets_output_directory() {
    let dir = scratch_dir("env");
    let out = bin()
        .args(["run", "--case", "smooth", "--n", "8"])
        .env("HYPERSPLIT_OUT", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(dir.join("summary.txt").exists());
}

#[test]
fn tau_must_divide_final_time() {
    let out = bin()
        .args(["run", "--case", "smooth", "--n", "8", "--tau", "0.3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}
