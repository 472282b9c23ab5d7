//! One function per subcommand; each returns a JSON payload and zero or more CSV tables.

use serde_json::{json, Value};

use crate::action::{
    action_value, assemble_from, expected_tip_time_bound, scaling_law_action, solve_mpp, AssembleOptions,
    TransitionPath, WeightMatrix,
};
use crate::config::{linspace, PathSource, RunConfig, StartBasin};
use crate::error::{Error, Result};
use crate::manifolds::{basin_grid, saddle_eigen, saddle_manifold, BasinLabel, BranchSign, ManifoldKind};
use crate::model::{
    center_manifold, center_manifold_coefficients, center_manifold_residual, center_manifold_residual_exponent,
    eigenvalues2, fixed_points, integrate_ode, origin_center_dynamics, saddle_node_locus, vector_field, Equilibrium,
    FixedPointStatus, State,
};
use crate::output::{fmt_f64, fmt_opt, Table};
use crate::rate::{critical_rate, simulate_ramp, storm_minus};
use crate::stochastic::{combined_rate_noise, run_ensemble, CombinedOptions, EnsembleOptions, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FixedPoints,
    Bifurcation,
    PhaseDiagram,
    Separatrix,
    BasinGrid,
    CenterManifold,
    RateTip,
    CriticalRate,
    SdeEnsemble,
    Combined,
    Mpp,
    Action,
    TipTime,
}

impl Command {
    pub const ALL: [Command; 13] = [
        Command::FixedPoints,
        Command::Bifurcation,
        Command::PhaseDiagram,
        Command::Separatrix,
        Command::BasinGrid,
        Command::CenterManifold,
        Command::RateTip,
        Command::CriticalRate,
        Command::SdeEnsemble,
        Command::Combined,
        Command::Mpp,
        Command::Action,
        Command::TipTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::FixedPoints => "fixed-points",
            Command::Bifurcation => "bifurcation",
            Command::PhaseDiagram => "phase-diagram",
            Command::Separatrix => "separatrix",
            Command::BasinGrid => "basin-grid",
            Command::CenterManifold => "center-manifold",
            Command::RateTip => "rate-tip",
            Command::CriticalRate => "critical-rate",
            Command::SdeEnsemble => "sde-ensemble",
            Command::Combined => "combined",
            Command::Mpp => "mpp",
            Command::Action => "action",
            Command::TipTime => "tip-time",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub payload: Value,
    pub tables: Vec<Table>,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    match cmd {
        Command::FixedPoints => cmd_fixed_points(cfg),
        Command::Bifurcation => cmd_bifurcation(cfg),
        Command::PhaseDiagram => cmd_phase_diagram(cfg),
        Command::Separatrix => cmd_separatrix(cfg),
        Command::BasinGrid => cmd_basin_grid(cfg),
        Command::CenterManifold => cmd_center_manifold(cfg),
        Command::RateTip => cmd_rate_tip(cfg),
        Command::CriticalRate => cmd_critical_rate(cfg),
        Command::SdeEnsemble => cmd_sde_ensemble(cfg),
        Command::Combined => cmd_combined(cfg),
        Command::Mpp => cmd_mpp(cfg),
        Command::Action => cmd_action(cfg),
        Command::TipTime => cmd_tip_time(cfg),
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Io(e.to_string()))
}

fn status_name(s: &FixedPointStatus) -> &'static str {
    match s {
        FixedPointStatus::ThreeEquilibria => "three-equilibria",
        FixedPointStatus::OriginOnly => "storm-state absent",
        FixedPointStatus::DoubleRoot { .. } => "double-root",
    }
}

fn equilibrium_record(label: &str, e: &Equilibrium, p: &crate::model::ModelParams) -> Value {
    let ev = eigenvalues2(&e.jacobian);
    json!({
        "label": label,
        "v": e.state.v,
        "m": e.state.m,
        "stability": e.stability.as_str(),
        "residual": vector_field(e.state, p).norm(),
        "eigenvalues": [[ev[0].0, ev[0].1], [ev[1].0, ev[1].1]],
    })
}

pub fn cmd_fixed_points(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let fp = fixed_points(&p)?;
    let mut eq = vec![equilibrium_record("O", &fp.origin, &p)];
    if let Some(u) = &fp.saddle {
        eq.push(equilibrium_record("U", u, &p));
    }
    if let Some(s) = &fp.storm {
        eq.push(equilibrium_record("S", s, &p));
    }
    let double = match fp.status {
        FixedPointStatus::DoubleRoot { v } => Some(v),
        _ => None,
    };
    Ok(CommandOutput {
        payload: json!({
            "gamma": p.gamma,
            "c": p.c,
            "status": status_name(&fp.status),
            "double_root_v": double,
            "equilibria": eq,
        }),
        tables: vec![],
    })
}

pub fn cmd_bifurcation(cfg: &RunConfig) -> Result<CommandOutput> {
    let g = cfg.model.gamma;
    let mut t = Table::new(
        "bifurcation.csv",
        &["c", "v_O", "v_U", "v_S", "m_U", "m_S", "stability_O", "stability_U", "stability_S"],
    );
    let cs = linspace(cfg.sweep.c_min, cfg.sweep.c_max, cfg.sweep.c_steps);
    for &c in &cs {
        let p = crate::model::ModelParams::new(g, c)?;
        let fp = fixed_points(&p)?;
        let (u, s) = (fp.saddle, fp.storm);
        t.push(vec![
            fmt_f64(c),
            fmt_f64(0.0),
            fmt_opt(u.map(|e| e.state.v)),
            fmt_opt(s.map(|e| e.state.v)),
            fmt_opt(u.map(|e| e.state.m)),
            fmt_opt(s.map(|e| e.state.m)),
            fp.origin.stability.as_str().into(),
            u.map(|e| e.stability.as_str().to_string()).unwrap_or_default(),
            s.map(|e| e.stability.as_str().to_string()).unwrap_or_default(),
        ]);
    }
    Ok(CommandOutput {
        payload: json!({ "gamma": g, "rows": cs.len(), "saddle_node_c": saddle_node_locus(g)? }),
        tables: vec![t],
    })
}

pub fn cmd_phase_diagram(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut t = Table::new("phase_diagram.csv", &["gamma", "c_star"]);
    let gs = linspace(cfg.sweep.gamma_min, cfg.sweep.gamma_max, cfg.sweep.gamma_steps);
    for &g in &gs {
        t.push(vec![fmt_f64(g), fmt_f64(saddle_node_locus(g)?)]);
    }
    Ok(CommandOutput { payload: json!({ "rows": gs.len() }), tables: vec![t] })
}

pub fn cmd_separatrix(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let se = saddle_eigen(&p)?;
    let mut t = Table::new("separatrix.csv", &["manifold", "branch", "index", "v", "m"]);
    let mut branches = vec![];
    for kind in [ManifoldKind::Stable, ManifoldKind::Unstable] {
        for sign in [BranchSign::Plus, BranchSign::Minus] {
            let b = saddle_manifold(&p, kind, sign, &cfg.trace)?;
            let (kn, sn) = (to_value(&kind)?, to_value(&sign)?);
            for (i, x) in b.points.iter().enumerate() {
                t.push(vec![
                    kn.as_str().unwrap_or_default().into(),
                    sn.as_str().unwrap_or_default().into(),
                    i.to_string(),
                    fmt_f64(x.v),
                    fmt_f64(x.m),
                ]);
            }
            branches.push(json!({
                "manifold": kn,
                "branch": sn,
                "points": b.points.len(),
                "termination": to_value(&b.termination)?,
                "eigenvalue": b.eigenvalue,
            }));
        }
    }
    Ok(CommandOutput {
        payload: json!({ "saddle": to_value(&se.saddle)?, "branches": branches }),
        tables: vec![t],
    })
}

pub fn cmd_basin_grid(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let (nv, nm) = (cfg.basin.nv, cfg.basin.nm);
    let g = basin_grid(&p, nv, nm, &cfg.basin.options())?;
    let mut t = Table::new("basin_grid.csv", &["i", "j", "v", "m", "label"]);
    for j in 0..nm {
        for i in 0..nv {
            let x = g.cell_center(i, j);
            t.push(vec![i.to_string(), j.to_string(), fmt_f64(x.v), fmt_f64(x.m), g.label(i, j).as_str().into()]);
        }
    }
    let count = |l: BasinLabel| g.labels.iter().filter(|&&x| x == l).count();
    Ok(CommandOutput {
        payload: json!({
            "nv": nv,
            "nm": nm,
            "counts": {
                "basin_o": count(BasinLabel::BasinO),
                "basin_s": count(BasinLabel::BasinS),
                "boundary": count(BasinLabel::Boundary),
                "unresolved": count(BasinLabel::Unresolved),
            },
        }),
        tables: vec![t],
    })
}

pub fn cmd_center_manifold(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let mut t = Table::new(
        "center_manifold.csv",
        &["v", "m_order3", "m_order5", "residual_order3", "residual_order5", "dv_dtau"],
    );
    for v in linspace(0.0, cfg.center_manifold.v_max, cfg.center_manifold.points) {
        t.push(vec![
            fmt_f64(v),
            fmt_f64(center_manifold(v, &p, 3)?),
            fmt_f64(center_manifold(v, &p, 5)?),
            fmt_f64(center_manifold_residual(v, &p, 3)?),
            fmt_f64(center_manifold_residual(v, &p, 5)?),
            fmt_f64(origin_center_dynamics(v, &p)),
        ]);
    }
    Ok(CommandOutput {
        payload: json!({
            "coefficients": center_manifold_coefficients(&p),
            "residual_exponent_order3": center_manifold_residual_exponent(&p, 3, 1e-2, 1e-3)?,
            "residual_exponent_order5": center_manifold_residual_exponent(&p, 5, 1e-2, 1e-3)?,
        }),
        tables: vec![t],
    })
}

pub fn cmd_rate_tip(cfg: &RunConfig) -> Result<CommandOutput> {
    let g = cfg.model.gamma;
    let x0 = storm_minus(&cfg.ramp, g)?;
    let run = simulate_ramp(x0, &cfg.ramp, g, &cfg.ramp_run)?;
    let mut t = Table::new("rate_tip.csv", &["tau", "v", "m"]);
    for (tau, x) in run.tau.iter().zip(&run.x) {
        t.push(vec![fmt_f64(*tau), fmt_f64(x.v), fmt_f64(x.m)]);
    }
    Ok(CommandOutput {
        payload: json!({
            "r": run.r,
            "verdict": run.verdict.as_str(),
            "initial_state": to_value(&x0)?,
            "final_state": to_value(&run.final_state)?,
            "storm_plus": to_value(&run.storm_plus)?,
            "saddle_plus": to_value(&run.saddle_plus)?,
            "min_dist_saddle_plus": run.min_dist_saddle_plus,
        }),
        tables: vec![t],
    })
}

pub fn cmd_critical_rate(cfg: &RunConfig) -> Result<CommandOutput> {
    let c = &cfg.critical_rate;
    let r = critical_rate(&cfg.ramp, cfg.model.gamma, c.r_lo, c.r_hi, c.tol, &cfg.ramp_run)?;
    Ok(CommandOutput {
        payload: json!({
            "r_lo": r.r_lo,
            "r_hi": r.r_hi,
            "width": r.r_hi - r.r_lo,
            "iterations": r.iterations,
            "midpoint_min_dist_saddle_plus": r.midpoint_min_dist_saddle_plus,
        }),
        tables: vec![],
    })
}

fn start_state(start: StartBasin, s: State) -> State {
    match start {
        StartBasin::O => State::ORIGIN,
        StartBasin::S => s,
    }
}

pub fn cmd_sde_ensemble(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let s = fixed_points(&p)?.storm_state()?;
    let x0 = start_state(cfg.noise.start, s);
    let o = EnsembleOptions {
        stop_on_first: !cfg.noise.continue_after_tip,
        rule: cfg.noise.reflection,
        trace: cfg.trace,
    };
    let e = run_ensemble(x0, &p, &cfg.noise_spec(), cfg.noise.realizations, &o)?;
    let mut events = Table::new("sde_events.csv", &["realization", "kind", "tau", "index"]);
    let mut finals =
        Table::new("sde_realizations.csv", &["realization", "n_events", "final_tau", "v_final", "m_final", "unresolved"]);
    for r in &e.realizations {
        for ev in &r.events {
            events.push(vec![r.index.to_string(), ev.kind.as_str().into(), fmt_f64(ev.tau), ev.index.to_string()]);
        }
        finals.push(vec![
            r.index.to_string(),
            r.events.len().to_string(),
            fmt_f64(r.final_tau),
            fmt_f64(r.final_state.v),
            fmt_f64(r.final_state.m),
            r.unresolved.to_string(),
        ]);
    }
    Ok(CommandOutput {
        payload: json!({ "kind": e.kind.as_str(), "stats": to_value(&e.stats)? }),
        tables: vec![events, finals],
    })
}

pub fn cmd_combined(cfg: &RunConfig) -> Result<CommandOutput> {
    let g = cfg.model.gamma;
    let c = &cfg.combined;
    let x0 = start_state(c.start, storm_minus(&cfg.ramp, g)?);
    let r = cfg.ramp.r;
    if !(r > 0.0) {
        return Err(Error::Config("combined runs need ramp.r > 0".into()));
    }
    let tau0 = c.tau0.unwrap_or(-20.0 / r);
    if !(c.tau_end > tau0) {
        return Err(Error::Config(format!("combined.tau_end = {} precedes tau0 = {tau0}", c.tau_end)));
    }
    let n = NoiseSpec { dt: c.dt, tau_f: c.tau_end - tau0, ..cfg.noise_spec() };
    let o = CombinedOptions { tau0: Some(tau0), approach_tol: c.approach_tol, rule: cfg.noise.reflection, trace: cfg.trace };
    let res = combined_rate_noise(x0, &cfg.ramp, g, &n, c.realizations, &o)?;
    let mut t = Table::new(
        "combined.csv",
        &["realization", "label", "v_final", "m_final", "approach_tau", "approach_lambda"],
    );
    for x in &res.realizations {
        t.push(vec![
            x.index.to_string(),
            x.label.as_str().into(),
            fmt_f64(x.final_state.v),
            fmt_f64(x.final_state.m),
            fmt_opt(x.storm_minus_approach),
            fmt_opt(x.approach_lambda),
        ]);
    }
    let counts: serde_json::Map<String, Value> =
        res.label_counts.iter().map(|(l, k)| (l.as_str().to_string(), json!(k))).collect();
    Ok(CommandOutput {
        payload: json!({
            "start_basin": res.start_basin,
            "stats": to_value(&res.stats)?,
            "label_counts": counts,
            "tau0": res.tau0,
            "tau_end": res.tau_end,
            "approach_tol": res.approach_tol,
        }),
        tables: vec![t],
    })
}

fn weights(cfg: &RunConfig) -> Result<WeightMatrix> {
    WeightMatrix::new(cfg.noise.sigma1, cfg.noise.sigma2)
}

pub fn cmd_mpp(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let w = weights(cfg)?;
    let sol = solve_mpp(&p, &w, &cfg.grid, &cfg.mam, false)?;
    let a = &cfg.assemble;
    let opts = AssembleOptions {
        grid: cfg.grid,
        mam: cfg.mam,
        junction_tol: a.junction_tol,
        tail_time: a.tail_time,
        tail_tol: a.tail_tol,
    };
    let asm = assemble_from(&sol.path, &p, &w, &opts, sol.iterations)?;
    let mut t = Table::new("mpp.csv", &["segment", "tau", "v", "m"]);
    for (seg, path) in [("flow", &asm.flow_segment), ("tail", &asm.tail)] {
        for (i, x) in path.psi.iter().enumerate() {
            t.push(vec![seg.into(), fmt_f64(path.tau(i)), fmt_f64(x.v), fmt_f64(x.m)]);
        }
    }
    Ok(CommandOutput {
        payload: json!({
            "path_action": sol.path.action,
            "flow_action": asm.flow_action,
            "tail_action": asm.tail_action,
            "total_action": asm.total_action,
            "iterations": sol.iterations,
            "flow_time": sol.flow_time,
            "junction_distance": asm.junction_distance,
            "tail_manifold_distance": asm.tail_manifold_distance,
        }),
        tables: vec![t],
    })
}

fn read_path_file(name: &str) -> Result<TransitionPath> {
    let text = std::fs::read_to_string(name).map_err(|e| Error::Config(format!("{name}: {e}")))?;
    let t = Table::from_csv(name, &text).map_err(|e| Error::Config(e.to_string()))?;
    let col = |c: &str| t.column(c).ok_or_else(|| Error::Config(format!("{name}: missing column {c}")));
    let (ct, cv, cm) = (col("tau")?, col("v")?, col("m")?);
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("{name}: bad number {s:?}")));
    let mut tau = vec![];
    let mut psi = vec![];
    for r in &t.rows {
        tau.push(num(&r[ct])?);
        psi.push(State::new(num(&r[cv])?, num(&r[cm])?));
    }
    if psi.len() < 3 {
        return Err(Error::Config(format!("{name}: need at least 3 nodes")));
    }
    let h = (tau[tau.len() - 1] - tau[0]) / (tau.len() - 1) as f64;
    if !(h > 0.0) || tau.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(Error::Config(format!("{name}: tau must be a uniform increasing grid")));
    }
    Ok(TransitionPath::new(tau[0], tau[tau.len() - 1], psi))
}

pub fn cmd_action(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let w = weights(cfg)?;
    let a = &cfg.action;
    let path = match a.source {
        PathSource::Deterministic => {
            let dt = a.tau_f / (a.nodes - 1) as f64;
            let sol = integrate_ode(a.x0, &p, a.tau_f, dt)?;
            TransitionPath::new(0.0, a.tau_f, sol.x.into_iter().take(a.nodes).collect())
        }
        PathSource::Straight => {
            let s = fixed_points(&p)?.storm_state()?;
            let n = a.nodes;
            TransitionPath::new(0.0, a.tau_f, (0..n).map(|i| s * (i as f64 / (n - 1) as f64)).collect())
        }
        PathSource::File => read_path_file(a.path_file.as_deref().unwrap_or_default())?,
    };
    let value = action_value(&path, &p, &w)?;
    Ok(CommandOutput {
        payload: json!({
            "source": to_value(&a.source)?,
            "nodes": path.len(),
            "tau0": path.tau0,
            "tau_f": path.tau_f,
            "action": value,
        }),
        tables: vec![],
    })
}

pub fn cmd_tip_time(cfg: &RunConfig) -> Result<CommandOutput> {
    let p = cfg.model.params()?;
    let w = weights(cfg)?;
    let rf = cfg.tip_time.r_fraction;
    let s = scaling_law_action(&p, &w, rf)?;
    let b = expected_tip_time_bound(&p, &w, rf)?;
    Ok(CommandOutput {
        payload: json!({
            "r_fraction": rf,
            "scaling_law": to_value(&s)?,
            "bound": to_value(&b)?,
        }),
        tables: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for c in Command::ALL {
            assert_eq!(Command::from_name(c.name()), Some(c));
        }
        assert_eq!(Command::from_name("nope"), None);
    }
}
