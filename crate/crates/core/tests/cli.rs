use std::path::Path;
use std::process::{Command, Output};

use cyclone_tipping::commands::{self, Command as Cmd};
use cyclone_tipping::config::{PathSource, RunConfig, StartBasin};
use cyclone_tipping::model::{cubic_p_peak, fixed_points, saddle_node_locus, ModelParams};
use cyclone_tipping::output::Table;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_cyclone-tipping");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    std::fs::create_dir_all(dir).unwrap();
    let p = dir.join("run.toml");
    std::fs::write(&p, cfg.to_toml().unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn f(x: &Value) -> f64 {
    x.as_f64().unwrap()
}

#[test]
fn fixed_points_three_equilibria() {
    let o = run(&["fixed-points"]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["payload"]["status"], "three-equilibria");
    let eq = v["payload"]["equilibria"].as_array().unwrap();
    let labels: Vec<&str> = eq.iter().map(|e| e["stability"].as_str().unwrap()).collect();
    assert_eq!(labels, ["nonhyperbolic-stable", "saddle", "stable-node"]);
    for e in eq {
        assert!(f(&e["residual"]) <= 1e-10);
    }
    assert!((f(&eq[1]["v"]) - 0.1006095).abs() < 1e-6);
}

#[test]
fn fixed_points_beyond_saddle_node() {
    let d = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.model.c = 0.5;
    let o = run(&["fixed-points", "--config", &write_config(d.path(), &cfg)]);
    assert!(o.status.success());
    let v = stdout_json(&o);
    assert_eq!(v["payload"]["status"], "storm-state absent");
    assert_eq!(v["payload"]["equilibria"].as_array().unwrap().len(), 1);
}

#[test]
fn malformed_config_exits_two_with_record() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("bad.toml");
    std::fs::write(&p, "[model\ngamma = ").unwrap();
    let o = run(&["fixed-points", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let v = stdout_json(&o);
    assert_eq!(v["error"]["kind"], "config");
    assert_eq!(v["error"]["exit_code"], 2);

    std::fs::write(&p, "[model]\ngamma = 2.0\n").unwrap();
    assert_eq!(run(&["fixed-points", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["fixed-points", "--config", "/nonexistent/x.toml"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn bifurcation_branches_end_at_saddle_node() {
    let mut cfg = RunConfig::default();
    cfg.sweep.c_min = 0.2;
    cfg.sweep.c_max = 0.4;
    cfg.sweep.c_steps = 41;
    let out = commands::run(Cmd::Bifurcation, &cfg).unwrap();
    let t = &out.tables[0];
    let cstar = saddle_node_locus(0.43).unwrap();
    let (ic, iu) = (t.column("c").unwrap(), t.column("v_U").unwrap());
    for r in &t.rows {
        let c: f64 = r[ic].parse().unwrap();
        assert_eq!(r[iu].is_empty(), c > cstar, "c = {c}");
    }
    assert!((f(&out.payload["saddle_node_c"]) - cstar).abs() < 1e-15);
    let back = Table::from_csv(&t.file_name, &t.to_csv().unwrap()).unwrap();
    assert_eq!(&back, t);

    cfg.sweep.c_steps = 0;
    let out = commands::run(Cmd::Bifurcation, &cfg).unwrap();
    assert_eq!(out.tables[0].to_csv().unwrap(), "c,v_O,v_U,v_S,m_U,m_S,stability_O,stability_U,stability_S\n");
}

#[test]
fn phase_diagram_locus() {
    let mut cfg = RunConfig::default();
    cfg.sweep.gamma_steps = 9;
    let out = commands::run(Cmd::PhaseDiagram, &cfg).unwrap();
    let t = &out.tables[0];
    assert_eq!(t.rows.len(), 9);
    for r in &t.rows {
        let (g, c): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        // the local maximum of the cubic touches zero, and the root count changes across c*
        assert!(cubic_p_peak(g, c).abs() < 1e-9);
        assert_eq!(fixed_points(&ModelParams::raw(g, c - 1e-6)).unwrap().all().len(), 3);
        assert_eq!(fixed_points(&ModelParams::raw(g, c + 1e-6)).unwrap().all().len(), 1);
    }
    cfg.sweep.gamma_steps = 0;
    let out = commands::run(Cmd::PhaseDiagram, &cfg).unwrap();
    assert_eq!(out.tables[0].to_csv().unwrap(), "gamma,c_star\n");
}

#[test]
fn separatrix_basin_and_center_manifold_tables() {
    let mut cfg = RunConfig::default();
    let sep = commands::run(Cmd::Separatrix, &cfg).unwrap();
    let stable = sep.tables[0].rows.iter().filter(|r| r[0] == "stable").count();
    assert!(stable > 10);

    cfg.basin.nv = 7;
    cfg.basin.nm = 5;
    let b = commands::run(Cmd::BasinGrid, &cfg).unwrap();
    assert_eq!(b.tables[0].rows.len(), 35);
    assert_eq!(b.payload["nv"], 7);

    let cm = commands::run(Cmd::CenterManifold, &cfg).unwrap();
    let (g, c) = (cfg.model.gamma, cfg.model.c);
    for r in &cm.tables[0].rows {
        let v: f64 = r[0].parse().unwrap();
        let m3: f64 = r[1].parse().unwrap();
        let closed = v / c - (1.0 - g) * v.powi(3) / c.powi(5);
        assert!((m3 - closed).abs() <= 1e-14 * (1.0 + closed.abs()));
    }
}

#[test]
fn rate_tip_verdicts() {
    let mut cfg = RunConfig::default();
    for (r, verdict) in [(0.03, "tracked"), (0.08, "tipped_to_O")] {
        cfg.ramp.r = r;
        let out = commands::run(Cmd::RateTip, &cfg).unwrap();
        assert_eq!(out.payload["verdict"], verdict, "r = {r}");
        assert!(!out.tables[0].rows.is_empty());
    }
}

fn small_ensemble(dir: &Path, seed: u64) -> (String, Vec<u8>, Vec<u8>) {
    let mut cfg = RunConfig::default();
    cfg.model.c = 0.22;
    cfg.noise.tau_f = 2000.0;
    cfg.noise.realizations = 8;
    let cfg_path = write_config(dir, &cfg);
    let out = dir.join(format!("out{seed}"));
    let o = run(&["sde-ensemble", "--config", &cfg_path, "--seed", &seed.to_string(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json = std::fs::read(out.join("sde-ensemble.json")).unwrap();
    let csv = std::fs::read(out.join("sde_events.csv")).unwrap();
    (out.to_string_lossy().into_owned(), json, csv)
}

#[test]
fn ensemble_is_deterministic_and_tips_from_o() {
    let d = tempfile::tempdir().unwrap();
    let (_, j1, c1) = small_ensemble(d.path(), 11);
    let (_, j2, c2) = small_ensemble(&d.path().join("again"), 11);
    assert_eq!(c1, c2);
    let strip = |b: &[u8]| {
        let mut v: Value = serde_json::from_slice(b).unwrap();
        v["config"]["output"] = Value::Null;
        v
    };
    assert_eq!(strip(&j1), strip(&j2));
    let v: Value = serde_json::from_slice(&j1).unwrap();
    assert_eq!(v["payload"]["kind"], "O_to_S");
    assert!(v["payload"]["stats"]["n_tipped"].as_u64().unwrap() > 0);
    let (_, _, c3) = small_ensemble(&d.path().join("other"), 12);
    assert_ne!(c1, c3);
}

#[test]
fn replaying_an_envelope_reproduces_it() {
    let d = tempfile::tempdir().unwrap();
    let (out, json, csv) = small_ensemble(d.path(), 5);
    let env = Path::new(&out).join("sde-ensemble.json");
    let o = run(&["sde-ensemble", "--config", env.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&env).unwrap(), json);
    assert_eq!(std::fs::read(Path::new(&out).join("sde_events.csv")).unwrap(), csv);
}

#[test]
fn print_config_round_trips() {
    let o = run(&["mpp", "--print-config", "--seed", "99"]);
    assert!(o.status.success());
    let cfg = RunConfig::from_toml(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 99);
    assert_eq!(cfg, RunConfig { seed: 99, ..RunConfig::default() });
}

#[test]
fn combined_has_both_labels() {
    let mut cfg = RunConfig::default();
    cfg.combined.realizations = 300;
    cfg.combined.start = StartBasin::S;
    let out = commands::run(Cmd::Combined, &cfg).unwrap();
    let counts = &out.payload["label_counts"];
    assert!(counts["tipped_S_to_O"].as_u64().unwrap() > 0);
    assert!(counts["tracked_S_to_S"].as_u64().unwrap() > 0);
    assert_eq!(out.tables[0].rows.len(), 300);
}

#[test]
fn mpp_path_table() {
    let mut cfg = RunConfig::default();
    cfg.grid.tau_f = 1000.0;
    cfg.grid.nodes = 5001;
    let out = commands::run(Cmd::Mpp, &cfg).unwrap();
    let t = &out.tables[0];
    assert!(t.rows.iter().any(|r| r[0] == "flow") && t.rows.iter().any(|r| r[0] == "tail"));
    assert!(f(&out.payload["total_action"]) > 0.0);
    assert!(f(&out.payload["tail_manifold_distance"]) < 1e-3);
}

#[test]
fn action_of_deterministic_path_is_small() {
    let mut cfg = RunConfig::default();
    let det = f(&commands::run(Cmd::Action, &cfg).unwrap().payload["action"]);
    cfg.action.source = PathSource::Straight;
    let straight = f(&commands::run(Cmd::Action, &cfg).unwrap().payload["action"]);
    assert!(det < 1e-6 * straight, "{det} vs {straight}");

    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("path.csv");
    std::fs::write(&p, "tau,v,m\n0,0,0\n1,0,0\n2,0,0\n").unwrap();
    cfg.action.source = PathSource::File;
    cfg.action.path_file = Some(p.to_string_lossy().into_owned());
    assert_eq!(f(&commands::run(Cmd::Action, &cfg).unwrap().payload["action"]), 0.0);
    std::fs::write(&p, "tau,v,m\n0,0,0\n1,0,0\n5,0,0\n").unwrap();
    assert_eq!(commands::run(Cmd::Action, &cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn tip_time_log_equals_action() {
    let out = commands::run(Cmd::TipTime, &RunConfig::default()).unwrap();
    let p = &out.payload;
    assert_eq!(f(&p["bound"]["log_bound"]), f(&p["scaling_law"]["action"]));
    assert_eq!(p["bound"]["log_equivalence_only"], true);
}
