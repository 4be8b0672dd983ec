use std::fs;
use std::path::Path;

use gbm_cli::{cli_main, presets_text, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

const SMALL_RUN: &str = "\
[mesh]
n_sub = 12

[solver]
dt = 0.01
t_final = 0.5

[output]
metrics_every = 10
snapshot_every = 25
vtk = true
";

fn gbm(args: &[&str]) -> i32 {
    let argv = std::iter::once("gbm").chain(args.iter().copied());
    cli_main(argv)
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn presets_list_default_rates() {
    let text = presets_text();
    for needle in [
        "gamma=0.255",
        "delta=2.55",
        "beta2=2.55",
        "kappa1=55",
        "alpha=45",
        "beta1=27.5",
    ] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    assert_eq!(gbm(&["presets"]), EXIT_OK);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(gbm(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(gbm(&["run"]), EXIT_USAGE);
    assert_eq!(gbm(&["run", "--config"]), EXIT_USAGE);
    assert_eq!(
        gbm(&["sweep", "--config", "x", "--param", "alpha", "--values", "1,abc"]),
        EXIT_USAGE
    );
    assert_eq!(gbm(&[]), EXIT_USAGE);
}

#[test]
fn runtime_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(
        gbm(&["run", "--config", "/nonexistent/run.cfg", "--out", out]),
        EXIT_FAILURE
    );
    let bad = write_config(tmp.path(), "[params]\nalhpa = 100\n");
    assert_eq!(gbm(&["run", "--config", &bad, "--out", out]), EXIT_FAILURE);
    let ok = write_config(tmp.path(), SMALL_RUN);
    assert_eq!(
        gbm(&["sweep", "--config", &ok, "--param", "rho", "--values", "1", "--out", out]),
        EXIT_FAILURE
    );
    // no output directory anywhere
    assert_eq!(gbm(&["run", "--config", &ok]), EXIT_FAILURE);
}

#[test]
fn run_writes_metrics_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = tmp.path().join("run");
    assert_eq!(
        gbm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]),
        EXIT_OK
    );

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "t,rq,sq,area,r_max,int_T,int_TN,int_phi");
    // t = 0, every 10 of 50 steps
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[1].starts_with("0,1,"), "{}", lines[1]);
    assert!(!metrics.contains('\r'));

    for step in [0, 25, 50] {
        let csv = fs::read_to_string(out.join(format!("snapshot_{step:08}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 13 * 13);
        assert!(csv.starts_with("x,y,T,N,Phi\n"));
        let vtk = fs::read_to_string(out.join(format!("snapshot_{step:08}.vtk"))).unwrap();
        for name in [
            "SCALARS T double 1",
            "SCALARS N double 1",
            "SCALARS Phi double 1",
        ] {
            assert!(vtk.contains(name));
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(
        gbm(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(
        gbm(&["run", "--config", &cfg, "--out", b.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = tmp.path().join("sweep");
    let code = gbm(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "alpha",
        "--values",
        "10,45,100",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let mut files = Vec::new();
    for v in ["10", "45", "100"] {
        let path = out.join(format!("alpha={v}")).join("metrics.csv");
        files.push(fs::read_to_string(&path).unwrap());
    }
    assert_eq!(files.len(), 3);
    assert_ne!(files[0], files[2]);
}

#[test]
fn ode_writes_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[ic]\ntumor_peak = 0.1\nnecrosis = 0.1\nvasculature_level = 0.5\n\n[solver]\ndt = 0.001\nt_final = 2\n\n[output]\nmetrics_every = 500\n",
    );
    let out = tmp.path().join("ode");
    assert_eq!(
        gbm(&["ode", "--config", &cfg, "--out", out.to_str().unwrap()]),
        EXIT_OK
    );
    let text = fs::read_to_string(out.join("ode.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,T,N,Phi");
    assert_eq!(lines[1], "0,0.1,0.1,0.5");
    assert_eq!(lines.len(), 1 + 5);
    assert!(lines[5].starts_with("2,"));
}

#[test]
fn shipped_configs_parse() {
    use gbm_core::experiments::VasculatureIc;
    use gbm_core::io::{read_config, ScenarioKind};
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let ring = read_config(&dir.join("ring.cfg")).unwrap();
    assert_eq!(ring.kind, ScenarioKind::Ring);
    assert!(ring.write_vtk);
    let surface = read_config(&dir.join("surface.cfg")).unwrap();
    assert_eq!(surface.scenario.vasculature_ic, gbm_core::experiments::default_zones());
    let ode = read_config(&dir.join("ode.cfg")).unwrap();
    assert_eq!(ode.scenario.vasculature_ic, VasculatureIc::Uniform(0.5));
    assert_eq!(gbm_cli::homogeneous_initial(&ode), gbm_core::FieldTriple::new(0.1, 0.1, 0.5));
}
