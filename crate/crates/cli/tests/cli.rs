use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use batchstaff::scenarios::Table;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchstaff"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let t = Table::parse_csv(csv).unwrap();
    let j = t.column(name).unwrap_or_else(|| panic!("no column {name}"));
    t.rows.into_iter().map(|r| r[j].clone()).collect()
}

#[test]
fn exceedance_reports_every_criterion() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &[
            "exceedance",
            "-s",
            "lambda_per_hour=3",
            "-s",
            "mu_per_hour=2",
            "-s",
            "mark=exp:1",
            "--c",
            "2",
            "-o",
            "e.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let p0: f64 = column(&text, "p0")[0].parse().unwrap();
    let p1: f64 = column(&text, "p1")[0].parse().unwrap();
    let bound: f64 = column(&text, "upper_bound")[0].parse().unwrap();
    let util: f64 = column(&text, "util")[0].parse().unwrap();
    assert!(p0 < p1 && p0 < bound);
    assert!((p0 - 0.5391).abs() < 1e-3, "{p0}");
    assert_eq!(util, 0.75);
    let manifest = fs::read_to_string(dir.path().join("e.csv.manifest")).unwrap();
    assert!(manifest.contains("command = exceedance"));
    assert!(manifest.contains("override = mark=exp:1"));
    assert!(manifest.contains("result = e.csv"));
}

#[test]
fn identical_inputs_give_identical_files() {
    let dir = TempDir::new().unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = run(
            dir.path(),
            &[
                "simulate",
                "-s",
                "reps=50",
                "-s",
                "batch=geometric:20",
                "-o",
                out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    let strip = |f: &str| {
        String::from_utf8(read(f))
            .unwrap()
            .replace("result = a.csv", "result = b.csv")
    };
    assert_eq!(strip("a.csv.manifest"), strip("b.csv.manifest"));
    let o = run(
        dir.path(),
        &[
            "simulate",
            "-s",
            "reps=50",
            "-s",
            "batch=geometric:20",
            "-s",
            "seed=8",
            "-o",
            "c.csv",
        ],
    );
    assert!(o.status.success());
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn bundled_table_round_trips() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["table", "-o", "t.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("label,lambda_per_hour,c_p0,c_p1,util_p0,util_p1"));
    let o = run(dir.path(), &["verify", "t.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // A single edited utilization breaks verification.
    let util = &column(&text, "util_p0")[3];
    assert_eq!(text.matches(util.as_str()).count(), 1);
    let tampered = text.replacen(util.as_str(), "0.5", 1);
    fs::write(dir.path().join("bad.csv"), tampered).unwrap();
    let o = run(dir.path(), &["verify", "bad.csv"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn metro_file_reuses_config_settings() {
    let dir = TempDir::new().unwrap();
    let metros = "rank,metro,annual_miles_millions,vehicles_millions,ref_c_p0,ref_c_p1,ref_util_p0,ref_util_p1\n\
                  1,Smallville,1000,0.1,1,1,0.5,0.5\n";
    fs::write(dir.path().join("m.csv"), metros).unwrap();
    let o = run(
        dir.path(),
        &[
            "table",
            "--metros",
            "m.csv",
            "--scenario",
            "new_york",
            "-o",
            "t.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(column(&text, "label"), vec!["Smallville"]);
    let lambda: f64 = column(&text, "lambda_per_hour")[0].parse().unwrap();
    assert!((lambda - 1000e6 / 360.0 * 0.061 / 11_154.3).abs() < 1e-9);
}

#[test]
fn staff_at_even_odds() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &[
            "staff",
            "--scenario",
            "exp_p0",
            "-s",
            "epsilon=0.5",
            "-s",
            "mark=det:1",
            "-o",
            "s.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let c: f64 = column(&text, "c")[0].parse().unwrap();
    let achieved: f64 = column(&text, "achieved")[0].parse().unwrap();
    assert!(c > 1.5 && achieved <= 0.5);
    assert!(run(dir.path(), &["verify", "s.csv"]).status.success());
}

#[test]
fn curve_and_profile_are_verifiable() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &[
            "curve",
            "-s",
            "mark=exp:1",
            "-s",
            "fleet_sizes_vehicles=0,300,900",
            "-o",
            "c.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let s250: Vec<u64> = column(&text, "staff_n250")
        .iter()
        .map(|x| x.parse().unwrap())
        .collect();
    let s500: Vec<u64> = column(&text, "staff_n500")
        .iter()
        .map(|x| x.parse().unwrap())
        .collect();
    for (a, b) in s250.iter().zip(&s500) {
        assert!(*b == 2 * a || b + 1 == 2 * a, "{a} {b}");
    }
    assert!(run(dir.path(), &["verify", "c.csv"]).status.success());

    let flat = vec!["5000"; 24].join(",");
    let o = run(
        dir.path(),
        &[
            "profile",
            "-s",
            "mark=exp:1",
            "-s",
            &format!("hourly_miles={flat}"),
            "-o",
            "p.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let c = column(&text, "c");
    assert_eq!(c.len(), 24);
    assert!(c.iter().all(|x| *x == c[0]));
    assert!(run(dir.path(), &["verify", "p.csv"]).status.success());
}

#[test]
fn converge_writes_one_row_per_index() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &[
            "converge",
            "-s",
            "reps=300",
            "-s",
            "n_list=5,50",
            "-o",
            "k.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(column(&text, "n"), vec!["5", "50"]);
    let manifest = fs::read_to_string(dir.path().join("k.csv.manifest")).unwrap();
    assert!(manifest.contains("seed = 1"));
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("bad.conf"),
        "[scenario.a]\nlambda_per_hour = 3\nmu_per_hour = 2\ncolour = red\n",
    )
    .unwrap();
    let o = run(dir.path(), &["staff", "-c", "bad.conf"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 4") && err.contains("colour"), "{err}");

    let o = run(dir.path(), &["staff", "-s", "epsilon"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["staff", "-c", "missing.conf"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["staff", "-s", "epsilon=2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unstable_ratio_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["exceedance", "--c", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unstable"));
}

#[test]
fn filtered_legendre_candidates_exit_4() {
    // The closed-form log-normal transform is too coarse for the Legendre
    // sums at small ratios.
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &[
            "staff",
            "--scenario",
            "exp_p0",
            "-s",
            "lambda_per_hour=0.48",
            "-s",
            "mu_per_hour=60",
            "-s",
            "mark=lognormal:1,0.5,closed",
        ],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
