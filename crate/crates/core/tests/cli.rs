use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use commons_mrac::game::GameParams;
use commons_mrac::output::read_trajectory;
use commons_mrac::scenario::Preset;
use commons_mrac::sim::{classify_regime, Phase, Schedule};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commons-mrac"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_example1_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        &["simulate", "--preset", "example1", "--out", "a.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("targets: desired (1, 16.666667)"), "{text}");
    let adaptive = text.split("[2]").nth(1).unwrap();
    assert!(
        adaptive.contains("converged to desired (tol 1e-3)"),
        "{text}"
    );

    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y,x_m,y_m,p_hat,e1,e2,V,phase"));
    let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    // 17 significant digits
    assert_eq!(
        row[1]
            .split('e')
            .next()
            .unwrap()
            .replace(['.', '-'], "")
            .len(),
        17,
        "{row:?}"
    );

    let again = bin(
        &[
            "simulate",
            "--preset",
            "example1",
            "--out",
            "b.csv",
            "--seedless",
        ],
        dir.path(),
    );
    assert!(again.status.success());
    assert_eq!(
        fs::read(dir.path().join("a.csv")).unwrap(),
        fs::read(dir.path().join("b.csv")).unwrap()
    );
}

#[test]
fn simulate_example3_reports_defect_phase_and_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        &["simulate", "--preset", "example3", "--out", "c.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let phase2 = text
        .split("[1]")
        .nth(1)
        .unwrap()
        .split("[2]")
        .next()
        .unwrap();
    assert!(phase2.contains("label all-defect-sustained"), "{text}");
    assert!(
        text.split("[2]")
            .nth(1)
            .unwrap()
            .contains("converged to desired"),
        "{text}"
    );
}

#[test]
fn zero_length_adaptive_phase_matches_fixed_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Preset::Example1.config();
    cfg.integrator.horizon = 200.0;
    cfg.schedule = Schedule::new(vec![Phase::fixed(0.0, 200.0, 0.09)]).unwrap();
    fs::write(dir.path().join("fixed.toml"), cfg.to_toml().unwrap()).unwrap();
    cfg.schedule = Schedule::new(vec![
        Phase::fixed(0.0, 200.0, 0.09),
        Phase::adaptive(200.0, 200.0),
    ])
    .unwrap();
    fs::write(dir.path().join("adaptive.toml"), cfg.to_toml().unwrap()).unwrap();
    for name in ["fixed", "adaptive"] {
        let out = bin(
            &[
                "simulate",
                "--config",
                &format!("{name}.toml"),
                "--out",
                &format!("{name}.csv"),
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(
        fs::read(dir.path().join("fixed.csv")).unwrap(),
        fs::read(dir.path().join("adaptive.csv")).unwrap()
    );
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = commons_mrac::scenario::ScenarioConfig::load(&path).unwrap();
        if let Some(p) = Preset::from_name(&cfg.name) {
            assert_eq!(cfg, p.config(), "{}", path.display());
        }
        count += 1;
    }
    assert!(count >= 3);
}

#[test]
fn plot_is_idempotent_and_p_hat_panel_in_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(
        &["simulate", "--preset", "example1", "--out", "t.csv"],
        dir.path()
    )
    .status
    .success());
    let first = bin(&["plot", "t.csv", "--out", "one.svg"], dir.path());
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(bin(&["plot", "t.csv", "--out", "two.svg"], dir.path())
        .status
        .success());
    let svg = fs::read_to_string(dir.path().join("one.svg")).unwrap();
    assert_eq!(svg, fs::read_to_string(dir.path().join("two.svg")).unwrap());
    assert_eq!(svg.matches(r#"class="panel""#).count(), 3);
    assert!(svg.contains(r#"class="phase-boundary""#));
    let attr = |name: &str| -> f64 {
        let tag = svg.split(r#"id="panel-p-hat""#).nth(1).unwrap();
        let v = tag.split(&format!(r#"{name}=""#)).nth(1).unwrap();
        v[..v.find('"').unwrap()].parse().unwrap()
    };
    assert!(attr("data-ymin") >= 0.0 && attr("data-ymax") <= 1.0);
}

#[test]
fn plot_rejects_bad_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("empty.csv"),
        "t,x,y,x_m,y_m,p_hat,e1,e2,V,phase\n",
    )
    .unwrap();
    let out = bin(&["plot", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    fs::write(
        dir.path().join("bad.csv"),
        "t,x,y,x_m,y_m,p_hat,e1,e2,V,phase\n0,1,1,1,1,0,0,0,0,0\n1,1,1,1,oops,0,0,0,0,0\n",
    )
    .unwrap();
    let out = bin(&["plot", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row 3"), "{}", stderr(&out));
}

#[test]
fn single_cell_sweep_matches_classify() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--r-min",
        "0.8",
        "--r-points",
        "1",
        "--pbeta-min",
        "0.1",
        "--pbeta-points",
        "1",
        "--horizon",
        "2000",
        "--out",
        "m.csv",
        "--svg",
        "m.svg",
    ];
    let out = bin(&args, dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "r,p_beta,label");
    let base = Preset::Example1.config().params;
    let expected = classify_regime(
        &GameParams { r: 0.8, ..base },
        0.1 / base.beta,
        2000.0,
        0.01,
    );
    assert!(lines[1].ends_with(&format!(",{expected}")), "{}", lines[1]);
    let svg = fs::read_to_string(dir.path().join("m.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="cell""#).count(), 1);
    assert!(svg.contains(r#"id="legend""#));
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "sweep",
            "--r-points",
            "4",
            "--pbeta-points",
            "3",
            "--horizon",
            "500",
            "--out",
            out,
        ]
    };
    assert!(bin(&args("a.csv"), dir.path()).status.success());
    assert!(bin(&args("b.csv"), dir.path()).status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 13);
}

#[test]
fn roa_reports_gains_and_unusable_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["roa", "--preset", "example1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("Q = [[2.5216612903e5, 2.0161290323e2], [2.0161290323e2, 5.0000000000e0]]"),
        "{text}"
    );
    assert!(text.contains("unusable estimate"), "{text}");

    let out = bin(
        &["roa", "--preset", "example1", "--epsilon", "1e-6"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("m = "), "{text}");
    assert!(text.contains("initial condition: admissible"), "{text}");
}

#[test]
fn roa_non_hurwitz_exits_2_and_names_condition() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Preset::Example1.config();
    cfg.params.p_star = 0.05;
    fs::write(dir.path().join("weak.toml"), cfg.to_toml().unwrap()).unwrap();
    let out = bin(&["roa", "--config", "weak.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("p* > p_upper fails"), "{err}");
    assert!(!err.contains("r > e_c fails"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["simulate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        bin(&["simulate", "--preset", "example9"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(
        bin(
            &["simulate", "--preset", "example1", "--step", "0.003"],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
    let unwritable = bin(
        &[
            "simulate",
            "--preset",
            "example1",
            "--out",
            "missing/dir/x.csv",
        ],
        dir.path(),
    );
    assert_eq!(unwritable.status.code(), Some(1));
    assert_eq!(bin(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(
        &[
            "simulate", "--preset", "example1", "--step", "200", "--out", "x.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn csv_round_trips_through_reader() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(
        &["simulate", "--preset", "example2", "--out", "r.csv", "--stride", "1000"],
        dir.path()
    )
    .status
    .success());
    let samples = read_trajectory(fs::File::open(dir.path().join("r.csv")).unwrap()).unwrap();
    assert_eq!(samples[0].t, 0.0);
    assert!(samples.iter().all(|s| (s.e1 - (s.x - s.x_m)).abs() < 1e-12));
    assert_eq!(samples.last().unwrap().t, 11000.0);
}
