use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rbc_lab::cli::{CellFile, Manifest};
use rbc_lab::config::{load_config, save_config, ConfigError, RunConfig};
use rbc_lab::circuit::EngineMode;

fn rbc_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbc-lab")).current_dir(dir).env("RBC_LAB_WORKERS", "2").args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn run_writes_manifest_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.toml", "L = 16\np = 0.5\nn_traj = 40\noutput = \"out\"\n");
    let out = rbc_lab(tmp.path(), &["run", "run.toml", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: Manifest = serde_json::from_slice(&fs::read(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.master_seed, 7);
    assert_eq!(manifest.cells.len(), 1);
    assert_eq!(manifest.cells[0].params.t_max, 32);
    assert_eq!(manifest.cells[0].params.mode, EngineMode::Parity);
    let csv = fs::read_to_string(tmp.path().join("out/summary.csv")).unwrap();
    assert!(csv.contains("L,p,observable,t,index,mean,stderr,n_traj"));
    assert!(csv.contains("16,0.5,magic_density,32,0,"));
}

#[test]
fn sweep_resumes_without_recomputing() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "sweep.toml", "L = [8, 12]\np = [0.0, 0.5, 1.0]\nn_traj = 30\noutput = \"s\"\nrecords = true\n");
    assert_eq!(code(&rbc_lab(tmp.path(), &["sweep", "sweep.toml"])), 0);
    let cells = tmp.path().join("s/cells");
    let first = fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    let kept = cells.join("L8_p0.json");
    let stamp = fs::metadata(&kept).unwrap().modified().unwrap();
    assert_eq!(fs::read_to_string(cells.join("L8_p0.jsonl")).unwrap().lines().count(), 30);

    // a killed sweep: one cell missing, no final table
    fs::remove_file(cells.join("L12_p0.5.json")).unwrap();
    fs::remove_file(tmp.path().join("s/sweep.csv")).unwrap();
    assert_eq!(code(&rbc_lab(tmp.path(), &["sweep", "sweep.toml"])), 0);
    assert_eq!(fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap(), first);
    assert_eq!(fs::metadata(&kept).unwrap().modified().unwrap(), stamp);
    let cell: CellFile = serde_json::from_slice(&fs::read(cells.join("L12_p0.5.json")).unwrap()).unwrap();
    assert_eq!(cell.result.n_traj, 30);
}

#[test]
fn sweep_table_has_both_magic_columns() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.toml", "L = [16, 32]\np = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]\nn_traj = 20\noutput = \"o\"\n");
    assert_eq!(code(&rbc_lab(tmp.path(), &["sweep", "s.toml"])), 0);
    let csv = fs::read_to_string(tmp.path().join("o/sweep.csv")).unwrap();
    let rows: Vec<(usize, f64, String)> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("L,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].to_string())
        })
        .collect();
    for l in [16, 32] {
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            for id in ["magic_density", "mutual_magic_half"] {
                assert!(rows.iter().any(|r| r.0 == l && (r.1 - p).abs() < 1e-12 && r.2 == id), "{l} {p} {id}");
            }
        }
    }
}

#[test]
fn exit_codes_are_distinct() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "unknown.toml", "L = 8\np = 0.5\nn_traj = 4\ncolour = \"red\"\n");
    write(tmp.path(), "parity.toml", "L = 8\np = 0.5\nn_traj = 4\nscheme = \"random\"\nmode = \"parity\"\n");
    write(tmp.path(), "ok.toml", "L = 8\np = 0.5\nn_traj = 4\n");
    assert_eq!(code(&rbc_lab(tmp.path(), &["run", "unknown.toml"])), 2);
    assert_eq!(code(&rbc_lab(tmp.path(), &["run", "parity.toml"])), 3);
    assert_eq!(code(&rbc_lab(tmp.path(), &["run", "missing.toml"])), 4);
    assert_eq!(code(&rbc_lab(tmp.path(), &["fit", "missing.csv", "--kind", "log-profile", "--observable", "mutual_magic_profile", "-L", "8", "-p", "0.5"])), 4);
    assert_eq!(code(&rbc_lab(tmp.path(), &["run", "ok.toml", "--mode", "full", "-p", "1.5"])), 2);
    assert_eq!(code(&rbc_lab(tmp.path(), &["bogus"])), 2);
}

#[test]
fn fit_and_collapse_read_sweep_tables() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "profile.toml", "L = 64\np = 0.5\nn_traj = 200\noutput = \"prof\"\nobservables = [\"mutual_magic_profile\"]\n");
    assert_eq!(code(&rbc_lab(tmp.path(), &["sweep", "profile.toml"])), 0);
    let out = rbc_lab(tmp.path(), &["fit", "prof/sweep.csv", "--kind", "log-profile", "--observable", "mutual_magic_profile", "-L", "64", "-p", "0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let slope = fit["slope"].as_f64().unwrap();
    assert!(slope > 0.1 && slope < 0.5, "{slope}");

    let ps: Vec<String> = (0..13).map(|k| format!("{}", 0.35 + 0.025 * k as f64)).collect();
    write(
        tmp.path(),
        "topo.toml",
        &format!("L = [16, 32, 64]\np = [{}]\nn_traj = 100\nboundary = \"open\"\nobservables = [\"topo_magic\"]\noutput = \"topo\"\n", ps.join(", ")),
    );
    assert_eq!(code(&rbc_lab(tmp.path(), &["sweep", "topo.toml"])), 0);
    let out = rbc_lab(tmp.path(), &["collapse", "topo/sweep.csv", "-o", "col"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let c: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("col/collapse.json")).unwrap()).unwrap();
    assert!(c["p_c"].as_f64().unwrap() > 0.3 && c["nu"].as_f64().unwrap() > 0.7);
    let landscape = fs::read_to_string(tmp.path().join("col/landscape.csv")).unwrap();
    assert!(landscape.starts_with("p_c,nu,quality"));
    assert!(landscape.lines().count() > 41 * 41);
}

#[test]
fn dynamics_defaults_to_every_step() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "d.toml", "L = 16\np = 0.5\nn_traj = 20\noutput = \"d\"\nobservables = [\"mutual_magic_half\"]\n");
    assert_eq!(code(&rbc_lab(tmp.path(), &["dynamics", "d.toml"])), 0);
    let csv = fs::read_to_string(tmp.path().join("d/dynamics.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains("mutual_magic_half")).count(), 33);
}

#[test]
fn validate_passes_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rbc_lab(tmp.path(), &["validate", "--sites", "6", "--seeds", "5", "--output", "v"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("v/validation.json")).unwrap()).unwrap();
    assert_eq!(v["runs"], 60);
    assert_eq!(v["passed"], 60);
}

#[test]
fn recipe_runs_at_small_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rbc_lab(tmp.path(), &["recipe", "fig5", "--scale", "0.03", "--n-traj", "40", "-o", "fig5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("fig5/report.json")).unwrap()).unwrap();
    assert!(report["collapse"].is_array());
    assert!(tmp.path().join("fig5/collapse/manifest.json").exists());
    assert!(tmp.path().join("fig5/collapse/landscape.csv").exists());
    assert_eq!(code(&rbc_lab(tmp.path(), &["recipe", "fig5", "--scale", "2"])), 1);
}

#[test]
fn config_defaults_and_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, "L = 64\np = 0.5\nn_traj = 100\n").unwrap();
    let cfg = load_config(&path).unwrap();
    let params = cfg.params_for(64, 0.5).unwrap();
    assert_eq!(params.t_max, 128);
    assert_eq!(params.mode, EngineMode::Parity);
    assert_eq!(cfg.resolved_mode().unwrap(), EngineMode::Parity);

    let out = tmp.path().join("saved.toml");
    save_config(&cfg, &out).unwrap();
    assert_eq!(load_config(&out).unwrap(), cfg);

    let bad = RunConfig::parse("L = 8\np = 0.5\nn_traj = 4\nscheme = \"random\"\nmode = \"parity\"\n");
    assert!(matches!(bad, Err(ConfigError::ParityScheme)));
}
