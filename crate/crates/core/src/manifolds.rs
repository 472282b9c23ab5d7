//! Stable and unstable manifolds of the saddle, basin labels and the separatrix.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, fixed_points, vector_field, FixedPointStatus, ModelParams, State};
use crate::ode::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

/// Direction along the oriented eigenvector. Eigenvectors are oriented with a positive v-component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    pub fn factor(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    LeftBox,
    ArclengthLimit,
    ReachedAttractor,
    Stalled,
}

/// Axis-aligned rectangle `[v_min, v_max] x [m_min, m_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub v_min: f64,
    pub v_max: f64,
    pub m_min: f64,
    pub m_max: f64,
}

impl Default for BoundingBox {
    fn default() -> Self {
        BoundingBox { v_min: -0.1, v_max: 1.5, m_min: -0.1, m_max: 1.5 }
    }
}

impl BoundingBox {
    pub fn contains(&self, x: State) -> bool {
        x.v >= self.v_min && x.v <= self.v_max && x.m >= self.m_min && x.m <= self.m_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBranch {
    pub kind: ManifoldKind,
    pub branch_sign: BranchSign,
    pub points: Vec<State>,
    pub eigenvalue: f64,
    pub eigenvector: State,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub eps: f64,
    pub arclength: f64,
    /// Arclength step.
    pub ds: f64,
    pub bbox: BoundingBox,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { eps: 1e-6, arclength: 10.0, ds: 1e-3, bbox: BoundingBox::default() }
    }
}

/// Saddle location with its oriented eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleEigen {
    pub saddle: State,
    pub origin: State,
    pub storm: State,
    pub unstable_value: f64,
    pub unstable_vector: State,
    pub stable_value: f64,
    pub stable_vector: State,
}

fn orient(e: State) -> State {
    if e.v < 0.0 || (e.v == 0.0 && e.m < 0.0) {
        -e
    } else {
        e
    }
}

pub fn saddle_eigen(p: &ModelParams) -> Result<SaddleEigen> {
    let fp = fixed_points(p)?;
    if fp.status != FixedPointStatus::ThreeEquilibria {
        return Err(Error::MissingSaddle);
    }
    let u = fp.saddle.ok_or(Error::MissingSaddle)?;
    let ev = model::eigenvalues2(&u.jacobian);
    let (lu, ls) = (ev[0].0, ev[1].0);
    if !(lu > 0.0 && ls < 0.0) || ev[0].1 != 0.0 {
        return Err(Error::DegenerateEigen(format!("saddle eigenvalues {lu}, {ls}")));
    }
    Ok(SaddleEigen {
        saddle: u.state,
        origin: fp.origin.state,
        storm: fp.storm_state()?,
        unstable_value: lu,
        unstable_vector: orient(model::eigenvector2(&u.jacobian, lu)?),
        stable_value: ls,
        stable_vector: orient(model::eigenvector2(&u.jacobian, ls)?),
    })
}

/// Traces one branch of the saddle's stable or unstable manifold by arclength stepping.
pub fn saddle_manifold(
    p: &ModelParams,
    kind: ManifoldKind,
    branch_sign: BranchSign,
    opts: &TraceOptions,
) -> Result<ManifoldBranch> {
    if !(1e-8..=1e-4).contains(&opts.eps) {
        return Err(Error::InvalidParams(format!("eps must lie in [1e-8, 1e-4], got {}", opts.eps)));
    }
    if !(opts.ds > 0.0 && opts.arclength > 0.0) {
        return Err(Error::InvalidParams("ds and arclength must be positive".into()));
    }
    let se = saddle_eigen(p)?;
    let (value, vector, dir) = match kind {
        ManifoldKind::Stable => (se.stable_value, se.stable_vector, -1.0),
        ManifoldKind::Unstable => (se.unstable_value, se.unstable_vector, 1.0),
    };
    let pp = *p;
    let field = move |_s: f64, x: &[f64; 2]| {
        let f = vector_field(State::from_array(*x), &pp);
        let n = f.norm();
        if n > 0.0 {
            [dir * f.v / n, dir * f.m / n]
        } else {
            [0.0, 0.0]
        }
    };
    let start = se.saddle + vector * (branch_sign.factor() * opts.eps);
    let mut points = vec![start];
    let mut x = start.to_array();
    let mut travelled = 0.0;
    let attractors = [se.origin, se.storm];
    let termination = loop {
        if travelled >= opts.arclength {
            break Termination::ArclengthLimit;
        }
        let next = rk4_step(&field, 0.0, &x, opts.ds);
        let nx = State::from_array(next);
        if !nx.is_finite() {
            return Err(Error::NonFinite { t: travelled });
        }
        let moved = nx.dist(State::from_array(x));
        if moved < 1e-3 * opts.ds {
            let here = State::from_array(x);
            if kind == ManifoldKind::Unstable && attractors.iter().any(|a| a.dist(here) < 5.0 * opts.ds) {
                break Termination::ReachedAttractor;
            }
            break Termination::Stalled;
        }
        travelled += opts.ds;
        if !opts.bbox.contains(nx) {
            points.push(nx);
            break Termination::LeftBox;
        }
        points.push(nx);
        x = next;
        if kind == ManifoldKind::Unstable && attractors.iter().any(|a| a.dist(nx) < 0.5 * opts.ds) {
            break Termination::ReachedAttractor;
        }
    };
    Ok(ManifoldBranch { kind, branch_sign, points, eigenvalue: value, eigenvector: vector, termination })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasinLabel {
    BasinO,
    BasinS,
    Boundary,
    Unresolved,
}

impl BasinLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BasinLabel::BasinO => "basin_O",
            BasinLabel::BasinS => "basin_S",
            BasinLabel::Boundary => "boundary",
            BasinLabel::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinOptions {
    pub t_max: f64,
    pub tol: f64,
    pub dt: f64,
}

impl Default for BasinOptions {
    fn default() -> Self {
        BasinOptions { t_max: 1e4, tol: 1e-2, dt: 0.05 }
    }
}

fn classify_with_eigen(x0: State, p: &ModelParams, se: &SaddleEigen, o: &BasinOptions) -> BasinLabel {
    let pp = *p;
    let field = move |_t: f64, x: &[f64; 2]| vector_field(State::from_array(*x), &pp).to_array();
    let mut x = x0.to_array();
    let n = (o.t_max / o.dt).ceil() as usize;
    for _ in 0..=n {
        let s = State::from_array(x);
        if s.dist(se.origin) < o.tol {
            return BasinLabel::BasinO;
        }
        if s.dist(se.storm) < o.tol {
            return BasinLabel::BasinS;
        }
        x = rk4_step(&field, 0.0, &x, o.dt);
        if !State::from_array(x).is_finite() {
            return BasinLabel::Unresolved;
        }
    }
    if State::from_array(x).dist(se.saddle) < o.tol {
        BasinLabel::Boundary
    } else {
        BasinLabel::Unresolved
    }
}

/// Forward integration until the trajectory enters the tol-ball of O or S.
/// A trajectory that is still within tol of U at `t_max` is on the boundary.
pub fn classify_basin(x0: State, p: &ModelParams, opts: &BasinOptions) -> Result<BasinLabel> {
    let se = saddle_eigen(p)?;
    Ok(classify_with_eigen(x0, p, &se, opts))
}

/// Basin labels on cell centres of an `nv x nm` lattice over the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub nv: usize,
    pub nm: usize,
    /// Row-major in m: `labels[j * nv + i]` is the cell at (v_i, m_j).
    pub labels: Vec<BasinLabel>,
}

impl BasinGrid {
    pub fn cell_center(&self, i: usize, j: usize) -> State {
        State::new((i as f64 + 0.5) / self.nv as f64, (j as f64 + 0.5) / self.nm as f64)
    }

    pub fn label(&self, i: usize, j: usize) -> BasinLabel {
        self.labels[j * self.nv + i]
    }
}

pub fn basin_grid(p: &ModelParams, nv: usize, nm: usize, opts: &BasinOptions) -> Result<BasinGrid> {
    let se = saddle_eigen(p)?;
    let labels = (0..nv * nm)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % nv, k / nv);
            let x = State::new((i as f64 + 0.5) / nv as f64, (j as f64 + 0.5) / nm as f64);
            classify_with_eigen(x, p, &se, opts)
        })
        .collect();
    Ok(BasinGrid { nv, nm, labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Open basin of O.
    O,
    /// Closure of the basin of S.
    S,
    Uncovered,
}

/// The saddle's stable manifold written as a graph v = phi(m), clipped to a bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    /// Ordered by strictly increasing m.
    pub points: Vec<State>,
    pub saddle: State,
    pub bbox: BoundingBox,
    /// Sign of v - phi(m) on the side of O.
    origin_sign: f64,
    extend_low: bool,
    extend_high: bool,
}

impl Separatrix {
    pub fn from_branches(a: &ManifoldBranch, b: &ManifoldBranch, saddle: State, bbox: BoundingBox, origin: State) -> Result<Self> {
        let mut pts: Vec<State> = a.points.iter().rev().copied().collect();
        pts.push(saddle);
        pts.extend(b.points.iter().copied());
        if pts.first().map(|x| x.m) > pts.last().map(|x| x.m) {
            pts.reverse();
        }
        if pts.windows(2).any(|w| !(w[1].m > w[0].m)) {
            return Err(Error::Separatrix("stable manifold is not a graph over m".into()));
        }
        let on_v_edge = |x: &State| x.v <= bbox.v_min + 1e-9 || x.v >= bbox.v_max - 1e-9;
        let extend_low = on_v_edge(&pts[0]);
        let extend_high = on_v_edge(pts.last().unwrap());
        let mut sep = Separatrix { points: pts, saddle, bbox, origin_sign: 1.0, extend_low, extend_high };
        let d = sep.offset(origin).ok_or_else(|| Error::Separatrix("origin outside coverage".into()))?;
        if d == 0.0 {
            return Err(Error::Separatrix("origin lies on the separatrix".into()));
        }
        sep.origin_sign = d.signum();
        Ok(sep)
    }

    /// Both stable branches of the saddle, traced with `opts`.
    pub fn compute(p: &ModelParams, opts: &TraceOptions) -> Result<Self> {
        let se = saddle_eigen(p)?;
        let a = saddle_manifold(p, ManifoldKind::Stable, BranchSign::Minus, opts)?;
        let b = saddle_manifold(p, ManifoldKind::Stable, BranchSign::Plus, opts)?;
        Separatrix::from_branches(&a, &b, se.saddle, opts.bbox, se.origin)
    }

    /// Copy with v stretched by `rho` (equilibria of the scaled frozen system).
    pub fn scaled_v(&self, rho: f64) -> Separatrix {
        let mut s = self.clone();
        for p in &mut s.points {
            p.v *= rho;
        }
        s.saddle.v *= rho;
        s.bbox.v_min *= rho;
        s.bbox.v_max *= rho;
        s
    }

    /// phi(m) when m is covered.
    pub fn phi(&self, m: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if m < first.m {
            return self.extend_low.then_some(first.v);
        }
        if m > last.m {
            return self.extend_high.then_some(last.v);
        }
        let k = pts.partition_point(|p| p.m <= m).clamp(1, pts.len() - 1);
        let (a, b) = (pts[k - 1], pts[k]);
        let t = (m - a.m) / (b.m - a.m);
        Some(a.v + t * (b.v - a.v))
    }

    fn offset(&self, x: State) -> Option<f64> {
        self.phi(x.m).map(|phi| x.v - phi)
    }

    pub fn side(&self, x: State) -> Side {
        match self.offset(x) {
            None => Side::Uncovered,
            Some(d) if d * self.origin_sign > 0.0 => Side::O,
            Some(_) => Side::S,
        }
    }
}
