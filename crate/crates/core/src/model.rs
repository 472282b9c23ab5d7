//! Dimensionless intensity model: vector field, equilibria, bifurcation structure
//! and local expansions near the equilibria.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode;

/// Absolute threshold on the cubic at its local maximum below which two roots merge.
pub const DOUBLE_ROOT_TOL: f64 = 1e-10;

/// Point in the (v, m) plane. Physical states live in the unit square but any real value is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub v: f64,
    pub m: f64,
}

impl State {
    pub const ORIGIN: State = State { v: 0.0, m: 0.0 };

    pub const fn new(v: f64, m: f64) -> Self {
        State { v, m }
    }

    pub fn norm(self) -> f64 {
        self.v.hypot(self.m)
    }

    pub fn dist(self, other: State) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: State) -> f64 {
        self.v * other.v + self.m * other.m
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v, self.m]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        State { v: a[0], m: a[1] }
    }

    pub fn is_finite(self) -> bool {
        self.v.is_finite() && self.m.is_finite()
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.v + o.v, self.m + o.m)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.v - o.v, self.m - o.m)
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, a: f64) -> State {
        State::new(self.v * a, self.m * a)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.v, -self.m)
    }
}

/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

/// Dimensionless parameters. `vp` and `vp_ref` only matter for ramped runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp_ref: Option<f64>,
}

impl ModelParams {
    pub fn new(gamma: f64, c: f64) -> Result<Self> {
        let p = ModelParams { gamma, c, vp: None, vp_ref: None };
        p.validate()?;
        Ok(p)
    }

    /// Constructor without validation, for internal sweeps that already checked ranges.
    pub const fn raw(gamma: f64, c: f64) -> Self {
        ModelParams { gamma, c, vp: None, vp_ref: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParams(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!("c must be positive, got {}", self.c)));
        }
        for (name, val) in [("vp", self.vp), ("vp_ref", self.vp_ref)] {
            if let Some(x) = val {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(Error::InvalidParams(format!("{name} must be positive, got {x}")));
                }
            }
        }
        Ok(())
    }

    /// Reference velocity; falls back to `vp`.
    pub fn reference_velocity(&self) -> Option<f64> {
        self.vp_ref.or(self.vp)
    }
}

/// Dimensional inputs of the intensity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Surface drag coefficient over boundary-layer depth (1/length).
    pub cd_over_h: f64,
    /// Wind shear (velocity).
    pub shear_s: f64,
    /// Maximum potential velocity (velocity).
    pub vp: f64,
    pub gamma: f64,
}

/// Result of scaling dimensional inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nondimensional {
    pub gamma: f64,
    /// 2.2 S / V_p. Zero shear gives zero here, which [`ModelParams`] does not accept.
    pub c: f64,
    pub vp: f64,
    /// Multiply dimensional time by this to get dimensionless time.
    pub time_scale: f64,
}

impl Nondimensional {
    pub fn params(&self) -> Result<ModelParams> {
        let mut p = ModelParams::new(self.gamma, self.c)?;
        p.vp = Some(self.vp);
        p.vp_ref = Some(self.vp);
        Ok(p)
    }
}

pub fn nondimensionalize(d: &DimensionalParams) -> Result<Nondimensional> {
    if !(d.gamma > 0.0 && d.gamma < 1.0) {
        return Err(Error::InvalidParams(format!("gamma must lie in (0,1), got {}", d.gamma)));
    }
    if !(d.cd_over_h > 0.0 && d.vp > 0.0 && d.shear_s >= 0.0) {
        return Err(Error::InvalidParams("dimensional inputs must be positive".into()));
    }
    Ok(Nondimensional {
        gamma: d.gamma,
        c: 2.2 * d.shear_s / d.vp,
        vp: d.vp,
        time_scale: 0.5 * d.cd_over_h * d.vp,
    })
}

#[inline]
pub fn f_component(v: f64, m: f64, gamma: f64) -> f64 {
    let m3 = m * m * m;
    (1.0 - gamma) * m3 - (1.0 - gamma * m3) * v * v
}

#[inline]
pub fn g_component(v: f64, m: f64, c: f64) -> f64 {
    (1.0 - m) * v - c * m
}

#[inline]
pub fn vector_field(x: State, p: &ModelParams) -> State {
    State::new(f_component(x.v, x.m, p.gamma), g_component(x.v, x.m, p.c))
}

pub fn jacobian(x: State, p: &ModelParams) -> Mat2 {
    let (v, m, g) = (x.v, x.m, p.gamma);
    let m2 = m * m;
    [
        [-2.0 * v * (1.0 - g * m2 * m), 3.0 * (1.0 - g) * m2 + 3.0 * g * m2 * v * v],
        [1.0 - m, -v - p.c],
    ]
}

#[inline]
pub fn cubic_p(v: f64, p: &ModelParams) -> f64 {
    let g = p.gamma;
    (1.0 - g) * v + g * v * v * v - (v + p.c).powi(3)
}

/// Location of the local maximum of the cubic (may be nonpositive).
pub fn cubic_p_argmax(p: &ModelParams) -> f64 {
    let g = p.gamma;
    let c = p.c;
    (-c + ((1.0 - g).powi(2) / 3.0 + c * c * g).sqrt()) / (1.0 - g)
}

/// Eigenvalues of a real 2x2 matrix as (re, im) pairs, larger real part first.
pub fn eigenvalues2(a: &Mat2) -> [(f64, f64); 2] {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = 0.5 * tr + s.copysign(tr);
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (l1, l2) = if big >= small { (big, small) } else { (small, big) };
        [(l1, 0.0), (l2, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(0.5 * tr, s), (0.5 * tr, -s)]
    }
}

/// Unit eigenvector of a real eigenvalue of a 2x2 matrix.
pub fn eigenvector2(a: &Mat2, lambda: f64) -> Result<State> {
    let r0 = State::new(a[0][1], lambda - a[0][0]);
    let r1 = State::new(lambda - a[1][1], a[1][0]);
    let e = if r0.norm() >= r1.norm() { r0 } else { r1 };
    let n = e.norm();
    if !(n > 1e-14) {
        return Err(Error::DegenerateEigen(format!("no eigenvector for eigenvalue {lambda}")));
    }
    Ok(e * (1.0 / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    StableNode,
    StableFocus,
    Saddle,
    Unstable,
    NonhyperbolicStable,
    Nonhyperbolic,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::StableNode => "stable-node",
            Stability::StableFocus => "stable-focus",
            Stability::Saddle => "saddle",
            Stability::Unstable => "unstable",
            Stability::NonhyperbolicStable => "nonhyperbolic-stable",
            Stability::Nonhyperbolic => "nonhyperbolic",
        }
    }

    pub fn is_stable(self) -> bool {
        matches!(self, Stability::StableNode | Stability::StableFocus | Stability::NonhyperbolicStable)
    }
}

pub fn classify(j: &Mat2) -> Stability {
    let ev = eigenvalues2(j);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let hyperbolic = ev.iter().all(|(re, _)| re.abs() > 1e-12);
    if !hyperbolic {
        return Stability::Nonhyperbolic;
    }
    if det < 0.0 {
        Stability::Saddle
    } else if ev[0].0 < 0.0 {
        if ev[0].1 == 0.0 {
            Stability::StableNode
        } else {
            Stability::StableFocus
        }
    } else {
        Stability::Unstable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub state: State,
    pub jacobian: Mat2,
    pub stability: Stability,
}

impl Equilibrium {
    fn at(state: State, p: &ModelParams) -> Self {
        let jacobian = jacobian(state, p);
        Equilibrium { state, jacobian, stability: classify(&jacobian) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FixedPointStatus {
    /// O, U and S all present.
    ThreeEquilibria,
    /// Storm state absent.
    OriginOnly,
    /// The two positive roots have merged at `v`.
    DoubleRoot { v: f64 },
}

/// Equilibria O, U, S with their Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub origin: Equilibrium,
    pub saddle: Option<Equilibrium>,
    pub storm: Option<Equilibrium>,
    pub status: FixedPointStatus,
}

impl FixedPointSet {
    pub fn saddle_state(&self) -> Result<State> {
        self.saddle.map(|e| e.state).ok_or(Error::MissingSaddle)
    }

    pub fn storm_state(&self) -> Result<State> {
        self.storm.map(|e| e.state).ok_or(Error::MissingSaddle)
    }

    /// All present equilibria in the order O, U, S.
    pub fn all(&self) -> Vec<Equilibrium> {
        let mut out = vec![self.origin];
        out.extend(self.saddle);
        out.extend(self.storm);
        out
    }
}

/// Bisection to machine resolution on a bracket with `f(lo) < 0 < f(hi)` or the reverse.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Positive roots of the cubic, ascending. Two roots, one double root, or none.
pub fn positive_roots(p: &ModelParams) -> (Vec<f64>, Option<f64>) {
    let vstar = cubic_p_argmax(p);
    if vstar <= 0.0 {
        return (vec![], None);
    }
    let pmax = cubic_p(vstar, p);
    if pmax.abs() <= DOUBLE_ROOT_TOL {
        return (vec![], Some(vstar));
    }
    if pmax < 0.0 {
        return (vec![], None);
    }
    let f = |v: f64| cubic_p(v, p);
    // p(0) = -c^3 < 0 and p(1) = 1 - (1+c)^3 < 0, so both roots lie in (0, 1).
    let lo = bisect(f, 0.0, vstar, 0.0).expect("sign change on (0, v*)");
    let hi = bisect(f, vstar, 1.0, 0.0).expect("sign change on (v*, 1)");
    (vec![lo, hi], None)
}

pub fn fixed_points(p: &ModelParams) -> Result<FixedPointSet> {
    p.validate()?;
    let mut origin = Equilibrium::at(State::ORIGIN, p);
    // centre direction along v; the reduced flow there is -v^2 + ..., stable on the physical side
    origin.stability = Stability::NonhyperbolicStable;
    let (roots, double) = positive_roots(p);
    let pair = |v: f64| State::new(v, v / (v + p.c));
    if let Some(v) = double {
        let e = Equilibrium::at(pair(v), p);
        return Ok(FixedPointSet {
            origin,
            saddle: Some(e),
            storm: Some(e),
            status: FixedPointStatus::DoubleRoot { v },
        });
    }
    if roots.len() == 2 {
        Ok(FixedPointSet {
            origin,
            saddle: Some(Equilibrium::at(pair(roots[0]), p)),
            storm: Some(Equilibrium::at(pair(roots[1]), p)),
            status: FixedPointStatus::ThreeEquilibria,
        })
    } else {
        Ok(FixedPointSet { origin, saddle: None, storm: None, status: FixedPointStatus::OriginOnly })
    }
}

/// Value of the cubic at its local maximum on v >= 0.
pub fn cubic_p_peak(gamma: f64, c: f64) -> f64 {
    let p = ModelParams::raw(gamma, c);
    cubic_p(cubic_p_argmax(&p).max(0.0), &p)
}

/// Shear at which U and S merge, found by bisection in c on (1e-6, 1).
pub fn saddle_node_locus(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParams(format!("gamma must lie in (0,1), got {gamma}")));
    }
    let (lo, hi) = (1e-6, 1.0);
    let f = |c: f64| cubic_p_peak(gamma, c);
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(Error::Bracket(format!("saddle-node not bracketed on ({lo}, {hi}) for gamma {gamma}")));
    }
    bisect(f, lo, hi, 1e-10)
}

/// Leading two terms of U and S for small c, with the storm-state v coefficient as printed.
pub fn asymptotic_fixed_points(p: &ModelParams) -> (State, State) {
    let (g, c) = (p.gamma, p.c);
    let a = 1.0 - g;
    let u = State::new(c.powi(3) / a + 3.0 * c.powi(5) / (a * a), c * c / a + 2.0 * c.powi(4) / (a * a));
    let s = State::new(1.0 - 1.5 * a * c, 1.0 - c);
    (u, s)
}

/// Storm-state expansion with the first-order v coefficient -3/(2(1-gamma)).
pub fn asymptotic_storm_derived(p: &ModelParams) -> State {
    State::new(1.0 - 1.5 * p.c / (1.0 - p.gamma), 1.0 - p.c)
}

/// Centre-manifold coefficients (a1, a3, a4, a5) of m = h(v) at the origin.
pub fn center_manifold_coefficients(p: &ModelParams) -> [f64; 4] {
    let (g, c) = (p.gamma, p.c);
    let c2 = c * c;
    let a5 = (6.0 - 6.0 * c2 - 12.0 * g + 6.0 * c2 * g - c2 * c2 * g + 6.0 * g * g) / c.powi(9);
    [1.0 / c, (g - 1.0) / c.powi(5), 2.0 * (g - 1.0) / c.powi(6), a5]
}

fn check_order(order: u32) -> Result<()> {
    if order == 3 || order == 5 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("centre-manifold order must be 3 or 5, got {order}")))
    }
}

pub fn center_manifold(v: f64, p: &ModelParams, order: u32) -> Result<f64> {
    check_order(order)?;
    Ok(center_manifold_unchecked(v, p, order))
}

fn center_manifold_unchecked(v: f64, p: &ModelParams, order: u32) -> f64 {
    let [a1, a3, a4, a5] = center_manifold_coefficients(p);
    let mut h = a1 * v + a3 * v.powi(3);
    if order == 5 {
        h += a4 * v.powi(4) + a5 * v.powi(5);
    }
    h
}

fn center_manifold_slope(v: f64, p: &ModelParams, order: u32) -> f64 {
    let [a1, a3, a4, a5] = center_manifold_coefficients(p);
    let mut d = a1 + 3.0 * a3 * v * v;
    if order == 5 {
        d += 4.0 * a4 * v.powi(3) + 5.0 * a5 * v.powi(4);
    }
    d
}

/// Invariance defect h'(v) f(v, h(v)) - g(v, h(v)).
pub fn center_manifold_residual(v: f64, p: &ModelParams, order: u32) -> Result<f64> {
    check_order(order)?;
    let h = center_manifold_unchecked(v, p, order);
    Ok(center_manifold_slope(v, p, order) * f_component(v, h, p.gamma) - g_component(v, h, p.c))
}

/// Exponent log10|R(v1)/R(v2)| / log10(v1/v2) of the invariance defect.
pub fn center_manifold_residual_exponent(p: &ModelParams, order: u32, v1: f64, v2: f64) -> Result<f64> {
    let r1 = center_manifold_residual(v1, p, order)?;
    let r2 = center_manifold_residual(v2, p, order)?;
    Ok((r1 / r2).abs().log10() / (v1 / v2).log10())
}

/// Reduced flow f(v, h(v)) on the fifth-order centre manifold.
pub fn origin_center_dynamics(v: f64, p: &ModelParams) -> f64 {
    f_component(v, center_manifold_unchecked(v, p, 5), p.gamma)
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub t: Vec<f64>,
    pub x: Vec<State>,
}

impl Path {
    pub fn last(&self) -> State {
        *self.x.last().expect("path is never empty")
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Fixed-step RK4 integration of the autonomous field over `[0, t_final]`.
pub fn integrate_ode(x0: State, p: &ModelParams, t_final: f64, dt: f64) -> Result<Path> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let pp = *p;
    let n = ode::step_count(t_final, dt);
    let h = t_final / n as f64;
    let (t, xs) = ode::rk4_trajectory(
        move |_t, x: &[f64; 2]| vector_field(State::from_array(*x), &pp).to_array(),
        0.0,
        x0.to_array(),
        h,
        n,
    )?;
    Ok(Path { t, x: xs.into_iter().map(State::from_array).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: ModelParams = ModelParams::raw(0.43, 0.286);

    #[test]
    fn field_examples() {
        assert_eq!(vector_field(State::ORIGIN, &FIG1), State::ORIGIN);
        let x = vector_field(State::new(1.0, 1.0), &FIG1);
        assert!(x.v.abs() < 1e-15 && (x.m + 0.286).abs() < 1e-15);
        let y = vector_field(State::new(0.5, 0.5), &FIG1);
        assert!((y.v - (0.57 * 0.125 - (1.0 - 0.43 * 0.125) * 0.25)).abs() < 1e-15);
        assert!((y.m - (0.25 - 0.143)).abs() < 1e-15);
    }

    #[test]
    fn jacobian_at_origin() {
        let j = jacobian(State::ORIGIN, &FIG1);
        assert_eq!(j, [[0.0, 0.0], [1.0, -0.286]]);
    }

    #[test]
    fn cubic_examples() {
        assert!((cubic_p(0.0, &FIG1) + 0.286f64.powi(3)).abs() < 1e-16);
        let v = 0.5;
        let direct = 0.57 * v + 0.43 * v * v * v - (v + 0.286f64).powi(3);
        assert!((cubic_p(v, &FIG1) - direct).abs() < 1e-15);
        for k in 0..100 {
            assert!(cubic_p(1.0 + k as f64, &FIG1) < 0.0);
        }
    }

    #[test]
    fn three_equilibria_at_fig1() {
        let fp = fixed_points(&FIG1).unwrap();
        assert_eq!(fp.status, FixedPointStatus::ThreeEquilibria);
        let u = fp.saddle.unwrap();
        let s = fp.storm.unwrap();
        assert_eq!(u.stability, Stability::Saddle);
        assert_eq!(s.stability, Stability::StableNode);
        assert!((u.state.v - 0.1006095).abs() < 1e-6);
        assert!((s.state.v - 0.2230439).abs() < 1e-6);
        for e in fp.all() {
            assert!(vector_field(e.state, &FIG1).norm() < 1e-12);
        }
    }

    #[test]
    fn large_shear_has_origin_only() {
        let fp = fixed_points(&ModelParams::raw(0.43, 1.3)).unwrap();
        assert_eq!(fp.status, FixedPointStatus::OriginOnly);
        assert!(fp.saddle.is_none() && fp.storm.is_none());
    }

    #[test]
    fn locus_is_degenerate() {
        let cs = saddle_node_locus(0.43).unwrap();
        let fp = fixed_points(&ModelParams::raw(0.43, cs)).unwrap();
        assert!(matches!(fp.status, FixedPointStatus::DoubleRoot { .. }));
        assert_eq!(fixed_points(&ModelParams::raw(0.43, cs - 1e-6)).unwrap().status, FixedPointStatus::ThreeEquilibria);
        assert_eq!(fixed_points(&ModelParams::raw(0.43, cs + 1e-6)).unwrap().status, FixedPointStatus::OriginOnly);
    }

    #[test]
    fn storm_m_expansion() {
        let (_, s) = asymptotic_fixed_points(&FIG1);
        assert!((s.m - 0.714).abs() < 1e-12);
        let (u0, s0) = asymptotic_fixed_points(&ModelParams::raw(0.43, 1e-9));
        assert!(u0.norm() < 1e-12 && s0.dist(State::new(1.0, 1.0)) < 1e-8);
    }

    #[test]
    fn center_manifold_basics() {
        assert_eq!(center_manifold(0.0, &FIG1, 5).unwrap(), 0.0);
        let v = 0.01;
        let c = 0.286f64;
        let expect = v / c - 0.57 / c.powi(5) * v.powi(3);
        assert!((center_manifold(v, &FIG1, 3).unwrap() - expect).abs() < 1e-15);
        assert!(center_manifold(v, &FIG1, 4).is_err());
    }

    #[test]
    fn reduced_flow_near_origin() {
        assert_eq!(origin_center_dynamics(0.0, &FIG1), 0.0);
        let v = 1e-3;
        let r = origin_center_dynamics(v, &FIG1);
        assert!(((r + v * v) / (v * v)).abs() < 0.1);
        for k in 1..=100 {
            assert!(origin_center_dynamics(k as f64 * 1e-4, &FIG1) < 0.0);
        }
    }

    #[test]
    fn scaling_examples() {
        let d = DimensionalParams { cd_over_h: 1e-3, shear_s: 1.3, vp: 10.0, gamma: 0.43 };
        let n = nondimensionalize(&d).unwrap();
        assert!((n.c - 0.286).abs() < 1e-15);
        assert!((n.time_scale - 5e-3).abs() < 1e-18);
        let z = nondimensionalize(&DimensionalParams { shear_s: 0.0, ..d }).unwrap();
        assert_eq!(z.c, 0.0);
        assert!(z.params().is_err());
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            assert!((f_component(v, 1.0, 0.43) - 0.57 * (1.0 - v * v)).abs() < 1e-15);
        }
    }

    #[test]
    fn ode_stays_at_origin_and_returns_to_storm() {
        let p = integrate_ode(State::ORIGIN, &FIG1, 10.0, 0.1).unwrap();
        assert!(p.x.iter().all(|x| *x == State::ORIGIN));
        let s = fixed_points(&FIG1).unwrap().storm_state().unwrap();
        let q = integrate_ode(s + State::new(0.01, -0.01), &FIG1, 1000.0, 0.05).unwrap();
        assert!(q.last().dist(s) < 1e-8);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(1.0, 0.2).is_err());
        assert!(ModelParams::new(0.4, -0.2).is_err());
        assert!(integrate_ode(State::ORIGIN, &FIG1, 1.0, 0.0).is_err());
    }
}
