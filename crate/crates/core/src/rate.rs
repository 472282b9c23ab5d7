//! Parameter ramps in V_p and shear, the frozen systems they pass through, ramped
//! integration with tipping verdicts, critical-rate bisection and invariant boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, fixed_points, Equilibrium, FixedPointSet, FixedPointStatus, ModelParams, State};
use crate::ode::{self, rk4_step};

/// Factor in c = 2.2 S / V_p.
pub const SHEAR_SCALE: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RampShape {
    /// ½(1 + tanh(r τ)).
    #[default]
    Tanh,
    /// Cubic smoothstep on r τ ∈ [-1, 1].
    Smoothstep,
    /// Linear on r τ ∈ [-1, 1], saturating outside.
    PiecewiseLinear,
}

impl RampShape {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            RampShape::Tanh => 0.5 * (1.0 + u.tanh()),
            RampShape::Smoothstep => {
                let t = (0.5 * (u + 1.0)).clamp(0.0, 1.0);
                t * t * (3.0 - 2.0 * t)
            }
            RampShape::PiecewiseLinear => (0.5 * (u + 1.0)).clamp(0.0, 1.0),
        }
    }

    /// Smallest |r τ| beyond which the ramp is within `eps` of its limits.
    pub fn saturation(self, eps: f64) -> f64 {
        match self {
            // ½(1 - tanh u) ≈ e^{-2u}
            RampShape::Tanh => 0.5 * (1.0 / eps).ln() + 1.0,
            RampShape::Smoothstep | RampShape::PiecewiseLinear => 1.0,
        }
    }
}

/// Ramp of maximum potential velocity and shear between past and future limits.
///
/// The shear follows `k * V_p(τ)` (velocity units) unless `shear_limits` gives its own
/// past and future values, in which case it is interpolated with the same Λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub r: f64,
    #[serde(default)]
    pub shape: RampShape,
    pub vp_minus: f64,
    pub vp_plus: f64,
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_limits: Option<[f64; 2]>,
}

impl Default for RampSpec {
    fn default() -> Self {
        RampSpec { r: 0.03, shape: RampShape::Tanh, vp_minus: 10.0, vp_plus: 100.0, k: 0.13, shear_limits: None }
    }
}

impl RampSpec {
    pub fn with_rate(&self, r: f64) -> RampSpec {
        RampSpec { r, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParams(format!("ramp rate must be nonnegative, got {}", self.r)));
        }
        if !(self.vp_minus > 0.0 && self.vp_plus > 0.0) {
            return Err(Error::InvalidParams("ramp velocities must be positive".into()));
        }
        match self.shear_limits {
            Some([a, b]) if !(a > 0.0 && b > 0.0) => Err(Error::InvalidParams("shear limits must be positive".into())),
            None if !(self.k > 0.0) => Err(Error::InvalidParams("k must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Reference velocity for the scaled variables: the past limit.
    pub fn vp_ref(&self) -> f64 {
        self.vp_minus
    }

    fn lambda(&self, tau: f64) -> f64 {
        if tau == f64::NEG_INFINITY {
            0.0
        } else if tau == f64::INFINITY {
            1.0
        } else {
            self.shape.eval(self.r * tau)
        }
    }

    fn at_lambda(&self, l: f64) -> (f64, f64) {
        let vp = self.vp_minus * (1.0 - l) + self.vp_plus * l;
        let shear = match self.shear_limits {
            Some([a, b]) => a * (1.0 - l) + b * l,
            None => self.k * vp,
        };
        (vp, shear)
    }

    /// Frozen system at ramp level Λ.
    pub fn frozen_at_lambda(&self, l: f64, gamma: f64) -> FrozenSystem {
        let (vp, shear) = self.at_lambda(l);
        FrozenSystem { gamma, rho: vp / self.vp_ref(), c: SHEAR_SCALE * shear / self.vp_ref() }
    }
}

pub fn ramp_value(tau: f64, spec: &RampSpec) -> f64 {
    spec.lambda(tau)
}

/// (V_p, shear) at time τ, both in velocity units.
pub fn ramped_params(tau: f64, spec: &RampSpec) -> (f64, f64) {
    spec.at_lambda(spec.lambda(tau))
}

/// Autonomous system with V_p and shear frozen, in variables scaled by the reference velocity:
/// v' = (1-γ) ρ² m³ - (1-γ m³) v², m' = (1-m) v - c m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenSystem {
    pub gamma: f64,
    /// V_p / V_p⁻.
    pub rho: f64,
    /// 2.2 S / V_p⁻.
    pub c: f64,
}

impl FrozenSystem {
    #[inline]
    pub fn field(&self, x: State) -> State {
        let m3 = x.m * x.m * x.m;
        State::new(
            (1.0 - self.gamma) * self.rho * self.rho * m3 - (1.0 - self.gamma * m3) * x.v * x.v,
            (1.0 - x.m) * x.v - self.c * x.m,
        )
    }

    pub fn jacobian(&self, x: State) -> model::Mat2 {
        let (v, m, g) = (x.v, x.m, self.gamma);
        let m2 = m * m;
        [
            [-2.0 * v * (1.0 - g * m2 * m), 3.0 * (1.0 - g) * self.rho * self.rho * m2 + 3.0 * g * m2 * v * v],
            [1.0 - m, -v - self.c],
        ]
    }

    /// Shear of the equivalent unscaled system: w = v / ρ obeys the model with c / ρ.
    pub fn equivalent_params(&self) -> ModelParams {
        ModelParams::raw(self.gamma, self.c / self.rho)
    }

    pub fn fixed_points(&self) -> Result<FixedPointSet> {
        let base = fixed_points(&self.equivalent_params())?;
        let lift = |e: Equilibrium| {
            let state = State::new(e.state.v * self.rho, e.state.m);
            let jacobian = self.jacobian(state);
            Equilibrium { state, jacobian, stability: e.stability }
        };
        Ok(FixedPointSet {
            origin: lift(base.origin),
            saddle: base.saddle.map(lift),
            storm: base.storm.map(lift),
            status: match base.status {
                FixedPointStatus::DoubleRoot { v } => FixedPointStatus::DoubleRoot { v: v * self.rho },
                s => s,
            },
        })
    }
}

/// Point of the augmented autonomous system; `s` is the ramp clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub v: f64,
    pub m: f64,
    pub s: f64,
}

impl AugmentedState {
    pub fn state(&self) -> State {
        State::new(self.v, self.m)
    }
}

pub fn frozen_system(s: f64, spec: &RampSpec, gamma: f64) -> FrozenSystem {
    spec.frozen_at_lambda(spec.lambda(s), gamma)
}

pub fn nonautonomous_field(x: &AugmentedState, spec: &RampSpec, gamma: f64) -> AugmentedState {
    let d = frozen_system(x.s, spec, gamma).field(x.state());
    AugmentedState { v: d.v, m: d.m, s: 1.0 }
}

pub fn frozen_fixed_points(s: f64, spec: &RampSpec, gamma: f64) -> Result<FixedPointSet> {
    frozen_system(s, spec, gamma).fixed_points()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipVerdict {
    Tracked,
    TippedToO,
    Undetermined,
}

impl TipVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            TipVerdict::Tracked => "tracked",
            TipVerdict::TippedToO => "tipped_to_O",
            TipVerdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampRunOptions {
    /// Start time; defaults to -20/r.
    pub tau0: Option<f64>,
    /// End of the ramp window; defaults to 200/r.
    pub tau_f: Option<f64>,
    /// Extra relaxation time at frozen future parameters.
    pub settle: f64,
    /// Upper bound on the RK4 step; reduced to resolve fast ramps.
    pub dt: f64,
    /// Distance to the target equilibrium for a verdict.
    pub tol: f64,
    /// Keep every k-th step of the trajectory.
    pub store_every: usize,
}

impl Default for RampRunOptions {
    fn default() -> Self {
        RampRunOptions { tau0: None, tau_f: None, settle: 500.0, dt: 0.01, tol: 1e-3, store_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampRun {
    pub r: f64,
    pub tau: Vec<f64>,
    pub x: Vec<State>,
    pub final_state: State,
    pub verdict: TipVerdict,
    pub storm_plus: State,
    pub saddle_plus: State,
    /// Closest approach to the future saddle over the whole run.
    pub min_dist_saddle_plus: f64,
}

fn future_equilibria(spec: &RampSpec, gamma: f64) -> Result<(State, State)> {
    let fp = frozen_fixed_points(f64::INFINITY, spec, gamma)?;
    Ok((fp.storm_state()?, fp.saddle_state()?))
}

fn verdict(x: State, storm: State, tol: f64) -> TipVerdict {
    if x.dist(storm) < tol {
        TipVerdict::Tracked
    } else if x.norm() < tol {
        TipVerdict::TippedToO
    } else {
        TipVerdict::Undetermined
    }
}

/// Quasi-static limit: the stable frozen path from S⁻ to S⁺, tracked when it exists throughout.
fn quasi_static(spec: &RampSpec, gamma: f64, x0: State, tol: f64) -> Result<RampRun> {
    let (storm_plus, saddle_plus) = future_equilibria(spec, gamma)?;
    let n = 1000;
    let mut tau = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let start = spec.frozen_at_lambda(0.0, gamma).fixed_points()?;
    let on_storm = start.storm.map(|e| e.state.dist(x0) < tol).unwrap_or(false);
    let mut ok = true;
    for i in 0..=n {
        let l = i as f64 / n as f64;
        let fp = spec.frozen_at_lambda(l, gamma).fixed_points()?;
        let x = if on_storm {
            match (fp.status, fp.storm) {
                (FixedPointStatus::ThreeEquilibria, Some(e)) => e.state,
                _ => {
                    ok = false;
                    break;
                }
            }
        } else if x0.norm() < tol {
            State::ORIGIN
        } else {
            ok = false;
            break;
        };
        tau.push(l);
        xs.push(x);
    }
    let final_state = *xs.last().unwrap_or(&x0);
    let v = if ok { verdict(final_state, storm_plus, tol) } else { TipVerdict::Undetermined };
    let min_dist = xs.iter().map(|x| x.dist(saddle_plus)).fold(f64::INFINITY, f64::min);
    Ok(RampRun { r: 0.0, tau, x: xs, final_state, verdict: v, storm_plus, saddle_plus, min_dist_saddle_plus: min_dist })
}

/// Integrates the augmented system from `x0` at `tau0` through the ramp and a settling period.
/// A zero rate is read as the quasi-static limit along the frozen stable path.
pub fn simulate_ramp(x0: State, spec: &RampSpec, gamma: f64, opts: &RampRunOptions) -> Result<RampRun> {
    spec.validate()?;
    if spec.r == 0.0 {
        return quasi_static(spec, gamma, x0, opts.tol);
    }
    let r = spec.r;
    let tau0 = opts.tau0.unwrap_or(-20.0 / r);
    if !(spec.lambda(tau0) < 1e-6) {
        return Err(Error::InvalidParams(format!("ramp already at {} at tau0 = {tau0}", spec.lambda(tau0))));
    }
    let tau_end = opts.tau_f.unwrap_or(200.0 / r) + opts.settle;
    if !(tau_end > tau0) {
        return Err(Error::InvalidParams("empty integration window".into()));
    }
    let dt_cap = opts.dt.min(0.05 / r);
    let n = ode::step_count(tau_end - tau0, dt_cap);
    let dt = (tau_end - tau0) / n as f64;
    let (storm_plus, saddle_plus) = future_equilibria(spec, gamma)?;
    let s = *spec;
    let field = move |t: f64, x: &[f64; 2]| frozen_system(t, &s, gamma).field(State::from_array(*x)).to_array();
    let every = opts.store_every.max(1);
    let mut tau = vec![tau0];
    let mut xs = vec![x0];
    let mut x = x0.to_array();
    let mut min_dist = x0.dist(saddle_plus);
    for k in 0..n {
        let t = tau0 + k as f64 * dt;
        x = rk4_step(&field, t, &x, dt);
        let st = State::from_array(x);
        if !st.is_finite() {
            return Err(Error::NonFinite { t: t + dt });
        }
        min_dist = min_dist.min(st.dist(saddle_plus));
        if (k + 1) % every == 0 || k + 1 == n {
            tau.push(tau0 + (k + 1) as f64 * dt);
            xs.push(st);
        }
    }
    let final_state = State::from_array(x);
    Ok(RampRun {
        r,
        tau,
        x: xs,
        final_state,
        verdict: verdict(final_state, storm_plus, opts.tol),
        storm_plus,
        saddle_plus,
        min_dist_saddle_plus: min_dist,
    })
}

/// Past storm state S⁻ of the ramp.
pub fn storm_minus(spec: &RampSpec, gamma: f64) -> Result<State> {
    frozen_fixed_points(f64::NEG_INFINITY, spec, gamma)?.storm_state()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRate {
    /// Largest sampled rate that tracked.
    pub r_lo: f64,
    /// Smallest sampled rate that tipped.
    pub r_hi: f64,
    pub iterations: usize,
    /// Closest approach to U⁺ of the run at the final midpoint.
    pub midpoint_min_dist_saddle_plus: f64,
}

fn verdict_with_retries(x0: State, spec: &RampSpec, gamma: f64, opts: &RampRunOptions) -> Result<RampRun> {
    let mut o = *opts;
    for _ in 0..=3 {
        let run = simulate_ramp(x0, spec, gamma, &o)?;
        if run.verdict != TipVerdict::Undetermined {
            return Ok(run);
        }
        o.settle *= 2.0;
    }
    Err(Error::Undetermined { r: spec.r })
}

/// Bisection in r between a tracking rate and a tipping rate, starting from S⁻.
pub fn critical_rate(
    template: &RampSpec,
    gamma: f64,
    r_lo: f64,
    r_hi: f64,
    tol: f64,
    opts: &RampRunOptions,
) -> Result<CriticalRate> {
    if !(r_lo > 0.0 && r_hi > r_lo && tol > 0.0) {
        return Err(Error::InvalidParams(format!("bad bracket ({r_lo}, {r_hi}) or tolerance {tol}")));
    }
    let x0 = storm_minus(template, gamma)?;
    let lo_run = verdict_with_retries(x0, &template.with_rate(r_lo), gamma, opts)?;
    let hi_run = verdict_with_retries(x0, &template.with_rate(r_hi), gamma, opts)?;
    if lo_run.verdict == hi_run.verdict {
        return Err(Error::SameVerdict(lo_run.verdict.as_str().into()));
    }
    let tracked_low = lo_run.verdict == TipVerdict::Tracked;
    let (mut a, mut b) = (r_lo, r_hi);
    let mut iterations = 0;
    let mut mid_dist = f64::INFINITY;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        let run = verdict_with_retries(x0, &template.with_rate(mid), gamma, opts)?;
        mid_dist = run.min_dist_saddle_plus;
        let tracked = run.verdict == TipVerdict::Tracked;
        if tracked == tracked_low {
            a = mid;
        } else {
            b = mid;
        }
        iterations += 1;
    }
    Ok(CriticalRate { r_lo: a, r_hi: b, iterations, midpoint_min_dist_saddle_plus: mid_dist })
}

/// Rectangle [a1, b1] x [a2, b2] in the scaled (v, m) variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantBox {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

/// Outcome of the inflow check; margins are ordered as sides v = a1, m = a2, v = b1, m = b2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxVerdict {
    pub invariant: bool,
    pub closed_form_invariant: bool,
    pub sampled_invariant: bool,
    pub closed_form_margins: [f64; 4],
    pub sampled_margins: [f64; 4],
    pub worst_margin: f64,
}

/// Checks that the frozen field points strictly into the box on all four sides.
/// `c` is the shear coefficient of the scaled frozen system.
pub fn check_invariant_box(bx: &InvariantBox, vp: f64, vp_ref: f64, c: f64, gamma: f64) -> Result<BoxVerdict> {
    if !(bx.a1 < bx.b1 && bx.a2 < bx.b2) {
        return Err(Error::InvalidParams("box bounds must satisfy a1 < b1 and a2 < b2".into()));
    }
    let sys = FrozenSystem { gamma, rho: vp / vp_ref, c };
    let q = (1.0 - gamma) * sys.rho * sys.rho;
    let (a1, b1, a2, b2) = (bx.a1, bx.b1, bx.a2, bx.b2);
    // v' on v = a1 is increasing in m, m' on m = a2 is increasing in v, and so on, so
    // each side is decided at one corner.
    let closed = [
        a2.powi(3) * (q + gamma * a1 * a1) - a1 * a1,
        a1 - (a1 + c) * a2,
        b1 * b1 - b2.powi(3) * (q + gamma * b1 * b1),
        (b1 + c) * b2 - b1,
    ];
    let n = 2001;
    let mut sampled = [f64::INFINITY; 4];
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let m = a2 + t * (b2 - a2);
        let v = a1 + t * (b1 - a1);
        sampled[0] = sampled[0].min(sys.field(State::new(a1, m)).v);
        sampled[1] = sampled[1].min(sys.field(State::new(v, a2)).m);
        sampled[2] = sampled[2].min(-sys.field(State::new(b1, m)).v);
        sampled[3] = sampled[3].min(-sys.field(State::new(v, b2)).m);
    }
    let closed_ok = closed.iter().all(|&x| x > 0.0);
    let sampled_ok = sampled.iter().all(|&x| x > 0.0);
    let worst = sampled.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BoxVerdict {
        invariant: closed_ok && sampled_ok,
        closed_form_invariant: closed_ok,
        sampled_invariant: sampled_ok,
        closed_form_margins: closed,
        sampled_margins: sampled,
        worst_margin: worst,
    })
}

/// True when three equilibria exist at every sampled ramp level.
pub fn three_equilibria_throughout(spec: &RampSpec, gamma: f64, samples: usize) -> Result<bool> {
    for i in 0..=samples {
        let fp = spec.frozen_at_lambda(i as f64 / samples as f64, gamma).fixed_points()?;
        if fp.status != FixedPointStatus::ThreeEquilibria {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs the ramp from S⁻ at every rate in `rates` for a spec whose V_p or shear does not increase.
pub fn nonincreasing_no_tip_probe(
    spec: &RampSpec,
    gamma: f64,
    rates: &[f64],
    opts: &RampRunOptions,
) -> Result<Vec<(f64, TipVerdict)>> {
    let (vp0, sh0) = spec.at_lambda(0.0);
    let (vp1, sh1) = spec.at_lambda(1.0);
    if !(vp1 <= vp0 || sh1 <= sh0) {
        return Err(Error::InvalidParams("probe needs V_p or shear nonincreasing".into()));
    }
    if !three_equilibria_throughout(spec, gamma, 1000)? {
        return Err(Error::InvalidParams("three equilibria must exist along the whole ramp".into()));
    }
    let x0 = storm_minus(spec, gamma)?;
    rates
        .iter()
        .map(|&r| simulate_ramp(x0, &spec.with_rate(r), gamma, opts).map(|run| (r, run.verdict)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = 0.43;

    #[test]
    fn ramp_examples() {
        let s = RampSpec::default();
        assert_eq!(ramp_value(0.0, &s), 0.5);
        assert_eq!(ramp_value(f64::NEG_INFINITY, &s), 0.0);
        assert_eq!(ramp_value(f64::INFINITY, &s), 1.0);
        assert!((ramp_value(100.0, &s) - 0.5 * (1.0 + 3f64.tanh())).abs() < 1e-15);
        assert_eq!(ramped_params(f64::NEG_INFINITY, &s), (10.0, 1.3));
        let (vp, c) = ramped_params(f64::INFINITY, &s);
        assert!((vp - 100.0).abs() < 1e-12 && (c - 13.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_limits_match_autonomous() {
        let s = RampSpec::default();
        let minus = frozen_fixed_points(f64::NEG_INFINITY, &s, G).unwrap();
        let auto = fixed_points(&ModelParams::raw(G, 0.286)).unwrap();
        assert!(minus.storm_state().unwrap().dist(auto.storm_state().unwrap()) < 1e-12);
        let plus = frozen_fixed_points(f64::INFINITY, &s, G).unwrap();
        let sp = plus.storm_state().unwrap();
        assert!((sp.v - 10.0 * auto.storm_state().unwrap().v).abs() < 1e-10);
        for e in plus.all() {
            assert!(frozen_system(f64::INFINITY, &s, G).field(e.state).norm() < 1e-10);
        }
    }

    #[test]
    fn origin_is_stationary() {
        let s = RampSpec::default();
        for t in [-1e3, 0.0, 1e3] {
            let d = nonautonomous_field(&AugmentedState { v: 0.0, m: 0.0, s: t }, &s, G);
            assert_eq!((d.v, d.m, d.s), (0.0, 0.0, 1.0));
        }
    }

    #[test]
    fn slow_and_fast_ramps() {
        let s = RampSpec::default();
        let x0 = storm_minus(&s, G).unwrap();
        let o = RampRunOptions::default();
        assert_eq!(simulate_ramp(x0, &s.with_rate(0.03), G, &o).unwrap().verdict, TipVerdict::Tracked);
        assert_eq!(simulate_ramp(x0, &s.with_rate(0.08), G, &o).unwrap().verdict, TipVerdict::TippedToO);
        assert_eq!(simulate_ramp(x0, &s.with_rate(0.0), G, &o).unwrap().verdict, TipVerdict::Tracked);
        let still = simulate_ramp(State::ORIGIN, &s.with_rate(0.2), G, &o).unwrap();
        assert_eq!(still.final_state, State::ORIGIN);
    }

    #[test]
    fn late_start_rejected() {
        let s = RampSpec::default();
        let o = RampRunOptions { tau0: Some(-10.0), ..Default::default() };
        assert!(simulate_ramp(State::ORIGIN, &s, G, &o).is_err());
    }

    #[test]
    fn box_side_two_violation() {
        let bx = InvariantBox { a1: 0.15, b1: 0.5, a2: 0.4, b2: 0.9 };
        let v = check_invariant_box(&bx, 10.0, 10.0, 0.286, G).unwrap();
        assert!(v.closed_form_margins[1] <= 0.0 && !v.invariant);
    }
}
