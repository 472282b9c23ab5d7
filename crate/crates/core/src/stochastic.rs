//! Euler-Maruyama simulation of the additive-noise model with reflecting boundaries,
//! tipping detection against the separatrix, ensembles, and ramped noisy runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{Separatrix, Side, TraceOptions};
use crate::model::{f_component, fixed_points, g_component, Mat2, ModelParams, State};
use crate::rate::{frozen_system, ramp_value, storm_minus, FrozenSystem, RampSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma1: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub dt: f64,
    pub tau_f: f64,
    /// Keep every k-th step in stored paths.
    #[serde(default = "default_store_every")]
    pub store_every: usize,
}

fn default_store_every() -> usize {
    10
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { sigma1: 0.005, sigma2: 0.005, seed: 1, dt: 0.1, tau_f: 1e4, store_every: 10 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 >= 0.0 && self.sigma2 >= 0.0) {
            return Err(Error::InvalidParams("noise intensities must be nonnegative".into()));
        }
        if !(self.dt > 0.0 && self.tau_f >= self.dt) {
            return Err(Error::InvalidParams(format!("need dt > 0 and tau_f >= dt, got {} and {}", self.dt, self.tau_f)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.tau_f / self.dt).round() as usize
    }
}

/// How the drift is continued outside the first quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Reflection {
    /// Each component is odd in its own variable and even in the other, so the
    /// absolute value of a reflected-plane path follows the physical drift.
    #[default]
    Mirror,
    /// Sign table with ĝ odd in v and even in m.
    AsPrinted,
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[inline]
fn extend(x: State, rule: Reflection, f: impl Fn(State) -> State) -> State {
    let (sv, sm) = (sgn(x.v), sgn(x.m));
    let d = f(State::new(x.v.abs(), x.m.abs()));
    match rule {
        Reflection::Mirror => State::new(sv * d.v, sm * d.m),
        Reflection::AsPrinted => State::new(sv * d.v, sv * d.m),
    }
}

pub fn reflected_field_with(x: State, p: &ModelParams, rule: Reflection) -> State {
    extend(x, rule, |y| State::new(f_component(y.v, y.m, p.gamma), g_component(y.v, y.m, p.c)))
}

/// Drift on the whole plane; on the axes the first-quadrant formula applies.
pub fn reflected_field(x: State, p: &ModelParams) -> State {
    reflected_field_with(x, p, Reflection::Mirror)
}

pub fn reflected_frozen_field(x: State, sys: &FrozenSystem, rule: Reflection) -> State {
    extend(x, rule, |y| sys.field(y))
}

pub fn reflect(x: State) -> State {
    State::new(x.v.abs(), x.m.abs())
}

/// Generator for component `component` (0 or 1) of realization `realization`.
pub fn noise_stream(seed: u64, realization: u64, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((realization << 1) | (component & 1));
    rng
}

/// Pair of independent standard normal sources for one realization.
pub struct NoisePair {
    a: ChaCha8Rng,
    b: ChaCha8Rng,
}

impl NoisePair {
    pub fn new(seed: u64, realization: u64) -> Self {
        NoisePair { a: noise_stream(seed, realization, 0), b: noise_stream(seed, realization, 1) }
    }

    #[inline]
    pub fn next(&mut self) -> (f64, f64) {
        (self.a.sample(StandardNormal), self.b.sample(StandardNormal))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TipKind {
    #[serde(rename = "O_to_S")]
    OToS,
    #[serde(rename = "S_to_O")]
    SToO,
}

impl TipKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TipKind::OToS => "O_to_S",
            TipKind::SToO => "S_to_O",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipEvent {
    pub kind: TipKind,
    pub tau: f64,
    /// Step index of the first sample on the new side.
    pub index: usize,
}

/// Raw reflected-plane path with the tip events found along it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub tau: Vec<f64>,
    pub raw: Vec<State>,
    pub tip_events: Vec<TipEvent>,
    /// Times at which the path was outside separatrix coverage.
    pub unresolved: Vec<f64>,
}

impl Realization {
    pub fn physical(&self) -> Vec<State> {
        self.raw.iter().map(|&x| reflect(x)).collect()
    }
}

/// Streaming side-of-separatrix tracker.
#[derive(Debug, Clone)]
pub struct TipDetector<'a> {
    sep: &'a Separatrix,
    current: Option<Side>,
    pub events: Vec<TipEvent>,
    pub unresolved: Vec<f64>,
}

impl<'a> TipDetector<'a> {
    pub fn new(sep: &'a Separatrix) -> Self {
        TipDetector { sep, current: None, events: Vec::new(), unresolved: Vec::new() }
    }

    pub fn side(&self) -> Option<Side> {
        self.current
    }

    /// Feeds one physical sample; returns the event it triggers, if any.
    #[inline]
    pub fn observe(&mut self, index: usize, tau: f64, x: State) -> Option<TipEvent> {
        let side = self.sep.side(x);
        if side == Side::Uncovered {
            self.unresolved.push(tau);
            return None;
        }
        match self.current {
            None => {
                self.current = Some(side);
                None
            }
            Some(s) if s == side => None,
            Some(_) => {
                let kind = if side == Side::S { TipKind::OToS } else { TipKind::SToO };
                let e = TipEvent { kind, tau, index };
                self.events.push(e);
                self.current = Some(side);
                Some(e)
            }
        }
    }
}

/// Tip events of a stored realization, checked on its reflected samples.
pub fn detect_tips(real: &Realization, sep: &Separatrix) -> (Vec<TipEvent>, Vec<f64>) {
    let mut d = TipDetector::new(sep);
    for (i, (&t, &x)) in real.tau.iter().zip(&real.raw).enumerate() {
        d.observe(i, t, reflect(x));
    }
    (d.events, d.unresolved)
}

#[inline]
fn em_step(x: State, drift: State, dt: f64, s1: f64, s2: f64, xi: (f64, f64)) -> State {
    State::new(x.v + drift.v * dt + s1 * xi.0, x.m + drift.m * dt + s2 * xi.1)
}

/// One realization on the reflected plane; samples are stored every `store_every` steps.
pub fn euler_maruyama(x0: State, p: &ModelParams, n: &NoiseSpec, realization: u64, rule: Reflection) -> Result<Realization> {
    n.validate()?;
    let steps = n.steps();
    let every = n.store_every.max(1);
    let (s1, s2) = (n.sigma1 * n.dt.sqrt(), n.sigma2 * n.dt.sqrt());
    let mut noise = NoisePair::new(n.seed, realization);
    let mut tau = Vec::with_capacity(steps / every + 2);
    let mut raw = Vec::with_capacity(steps / every + 2);
    tau.push(0.0);
    raw.push(x0);
    let mut x = x0;
    for k in 0..steps {
        x = em_step(x, reflected_field_with(x, p, rule), n.dt, s1, s2, noise.next());
        if !x.is_finite() {
            return Err(Error::NonFinite { t: (k + 1) as f64 * n.dt });
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            tau.push((k + 1) as f64 * n.dt);
            raw.push(x);
        }
    }
    Ok(Realization { tau, raw, tip_events: Vec::new(), unresolved: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_realizations: usize,
    pub n_tipped: usize,
    pub tip_fraction: f64,
    pub tip_time_mean: Option<f64>,
    pub tip_time_median: Option<f64>,
}

impl EnsembleStats {
    pub fn from_times(n_realizations: usize, times: &[f64]) -> Self {
        let n_tipped = times.len();
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n_tipped == 0 {
            None
        } else if n_tipped % 2 == 1 {
            Some(sorted[n_tipped / 2])
        } else {
            Some(0.5 * (sorted[n_tipped / 2 - 1] + sorted[n_tipped / 2]))
        };
        EnsembleStats {
            n_realizations,
            n_tipped,
            tip_fraction: if n_realizations == 0 { 0.0 } else { n_tipped as f64 / n_realizations as f64 },
            tip_time_mean: (n_tipped > 0).then(|| sorted.iter().sum::<f64>() / n_tipped as f64),
            tip_time_median: median,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// End a realization at its first tip event.
    pub stop_on_first: bool,
    pub rule: Reflection,
    pub trace: TraceOptions,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions { stop_on_first: true, rule: Reflection::Mirror, trace: TraceOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationSummary {
    pub index: u64,
    pub events: Vec<TipEvent>,
    pub final_tau: f64,
    pub final_state: State,
    pub unresolved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    /// Kind of the first transition counted by `stats`.
    pub kind: TipKind,
    pub stats: EnsembleStats,
    pub realizations: Vec<RealizationSummary>,
}

fn run_one(x0: State, p: &ModelParams, n: &NoiseSpec, j: u64, sep: &Separatrix, o: &EnsembleOptions) -> Result<RealizationSummary> {
    let steps = n.steps();
    let (s1, s2) = (n.sigma1 * n.dt.sqrt(), n.sigma2 * n.dt.sqrt());
    let mut noise = NoisePair::new(n.seed, j);
    let mut det = TipDetector::new(sep);
    det.observe(0, 0.0, reflect(x0));
    let mut x = x0;
    let mut k = 0;
    while k < steps {
        x = em_step(x, reflected_field_with(x, p, o.rule), n.dt, s1, s2, noise.next());
        k += 1;
        if !x.is_finite() {
            return Err(Error::NonFinite { t: k as f64 * n.dt });
        }
        if det.observe(k, k as f64 * n.dt, reflect(x)).is_some() && o.stop_on_first {
            break;
        }
    }
    Ok(RealizationSummary {
        index: j,
        events: det.events,
        final_tau: k as f64 * n.dt,
        final_state: reflect(x),
        unresolved: det.unresolved.len(),
    })
}

/// `count` independent realizations from `x0`, with tip statistics for the first crossing out
/// of the starting basin.
pub fn run_ensemble(x0: State, p: &ModelParams, n: &NoiseSpec, count: usize, o: &EnsembleOptions) -> Result<Ensemble> {
    n.validate()?;
    let sep = Separatrix::compute(p, &o.trace)?;
    let kind = match sep.side(reflect(x0)) {
        Side::O => TipKind::OToS,
        Side::S => TipKind::SToO,
        Side::Uncovered => return Err(Error::Separatrix("initial state outside coverage".into())),
    };
    let realizations: Vec<RealizationSummary> = (0..count as u64)
        .into_par_iter()
        .map(|j| run_one(x0, p, n, j, &sep, o))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = realizations
        .iter()
        .filter_map(|r| r.events.iter().find(|e| e.kind == kind).map(|e| e.tau))
        .collect();
    Ok(Ensemble { kind, stats: EnsembleStats::from_times(count, &times), realizations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinedLabel {
    #[serde(rename = "tipped_S_to_O")]
    TippedSToO,
    #[serde(rename = "tracked_S_to_S")]
    TrackedSToS,
    #[serde(rename = "tipped_O_to_S")]
    TippedOToS,
    #[serde(rename = "stayed_O")]
    StayedO,
    Unresolved,
}

impl CombinedLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CombinedLabel::TippedSToO => "tipped_S_to_O",
            CombinedLabel::TrackedSToS => "tracked_S_to_S",
            CombinedLabel::TippedOToS => "tipped_O_to_S",
            CombinedLabel::StayedO => "stayed_O",
            CombinedLabel::Unresolved => "unresolved",
        }
    }

    pub fn is_tip(self) -> bool {
        matches!(self, CombinedLabel::TippedSToO | CombinedLabel::TippedOToS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedOptions {
    /// Start time; defaults to -20/r.
    pub tau0: Option<f64>,
    /// Radius around S⁻ used to record the first approach of a path; defaults to
    /// [`APPROACH_STD_MULTIPLE`] standard deviations of the linearized stationary spread there.
    pub approach_tol: Option<f64>,
    pub rule: Reflection,
    pub trace: TraceOptions,
}

impl Default for CombinedOptions {
    fn default() -> Self {
        CombinedOptions { tau0: None, approach_tol: None, rule: Reflection::Mirror, trace: TraceOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRealization {
    pub index: u64,
    pub label: CombinedLabel,
    pub final_state: State,
    /// First time the path came within `approach_tol` of S⁻.
    pub storm_minus_approach: Option<f64>,
    /// Ramp progress Λ at that time.
    pub approach_lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedResult {
    pub start_basin: String,
    pub stats: EnsembleStats,
    pub label_counts: Vec<(CombinedLabel, usize)>,
    pub realizations: Vec<CombinedRealization>,
    pub tau0: f64,
    pub tau_end: f64,
    pub approach_tol: f64,
}

pub const APPROACH_STD_MULTIPLE: f64 = 3.0;

/// Solves J P + P Jᵀ + diag(σ₁², σ₂²) = 0 for the stationary covariance of the linearized
/// process; J must be Hurwitz.
pub fn stationary_covariance(j: &Mat2, sigma1: f64, sigma2: f64) -> Result<Mat2> {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(tr < 0.0 && det > 0.0) {
        return Err(Error::DegenerateEigen("linearization is not asymptotically stable".into()));
    }
    // unknowns (P11, P12, P22)
    let a = nalgebra::Matrix3::new(
        2.0 * j[0][0], 2.0 * j[0][1], 0.0,
        j[1][0], j[0][0] + j[1][1], j[0][1],
        0.0, 2.0 * j[1][0], 2.0 * j[1][1],
    );
    let b = nalgebra::Vector3::new(-sigma1 * sigma1, 0.0, -sigma2 * sigma2);
    let x = a.lu().solve(&b).ok_or_else(|| Error::DegenerateEigen("singular Lyapunov system".into()))?;
    Ok([[x[0], x[1]], [x[1], x[2]]])
}

/// Standard deviation along the major principal axis of a 2×2 covariance.
pub fn major_axis_std(p: &Mat2) -> f64 {
    let (a, b, d) = (p[0][0], p[0][1], p[1][1]);
    let lmax = 0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt();
    lmax.max(0.0).sqrt()
}

/// Default approach radius around S⁻ for the given ramp and noise.
pub fn default_approach_tol(spec: &RampSpec, gamma: f64, n: &NoiseSpec) -> Result<f64> {
    let s_minus = storm_minus(spec, gamma)?;
    let sys = frozen_system(f64::NEG_INFINITY, spec, gamma);
    let p = stationary_covariance(&sys.jacobian(s_minus), n.sigma1, n.sigma2)?;
    Ok(APPROACH_STD_MULTIPLE * major_axis_std(&p))
}

/// Noisy ramped runs on the scaled variables, classified at the end of the ramp.
pub fn combined_rate_noise(
    x0: State,
    spec: &RampSpec,
    gamma: f64,
    n: &NoiseSpec,
    count: usize,
    o: &CombinedOptions,
) -> Result<CombinedResult> {
    n.validate()?;
    spec.validate()?;
    if !(spec.r > 0.0) {
        return Err(Error::InvalidParams("combined runs need a positive ramp rate".into()));
    }
    let tau0 = o.tau0.unwrap_or(-20.0 / spec.r);
    let steps = n.steps();
    let tau_end = tau0 + steps as f64 * n.dt;
    let l_end = spec.shape.eval(spec.r * tau_end);
    if crate::rate::ramp_value(tau0, spec) >= 1e-6 || l_end <= 1.0 - 1e-6 {
        return Err(Error::InvalidParams(format!("window [{tau0}, {tau_end}] does not cover the whole ramp")));
    }
    let start = frozen_system(tau0, spec, gamma);
    let end = frozen_system(tau_end, spec, gamma);
    let sep_of = |sys: &FrozenSystem| -> Result<Separatrix> {
        Ok(Separatrix::compute(&sys.equivalent_params(), &o.trace)?.scaled_v(sys.rho))
    };
    let sep_start = sep_of(&start)?;
    let sep_end = sep_of(&end)?;
    let s_minus = storm_minus(spec, gamma)?;
    let approach_tol = match o.approach_tol {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::InvalidParams(format!("approach_tol must be positive, got {t}"))),
        None => default_approach_tol(spec, gamma, n)?,
    };
    let from_s = match sep_start.side(reflect(x0)) {
        Side::S => true,
        Side::O => false,
        Side::Uncovered => return Err(Error::Separatrix("initial state outside coverage".into())),
    };
    let (s1, s2) = (n.sigma1 * n.dt.sqrt(), n.sigma2 * n.dt.sqrt());
    let s = *spec;
    let realizations: Vec<CombinedRealization> = (0..count as u64)
        .into_par_iter()
        .map(|j| {
            let mut noise = NoisePair::new(n.seed, j);
            let mut x = x0;
            let mut approach = (reflect(x0).dist(s_minus) < approach_tol).then_some(tau0);
            for k in 0..steps {
                let t = tau0 + k as f64 * n.dt;
                let sys = frozen_system(t, &s, gamma);
                x = em_step(x, reflected_frozen_field(x, &sys, o.rule), n.dt, s1, s2, noise.next());
                if !x.is_finite() {
                    return Err(Error::NonFinite { t: t + n.dt });
                }
                if approach.is_none() && reflect(x).dist(s_minus) < approach_tol {
                    approach = Some(t + n.dt);
                }
            }
            let fin = reflect(x);
            let label = match (from_s, sep_end.side(fin)) {
                (_, Side::Uncovered) => CombinedLabel::Unresolved,
                (true, Side::S) => CombinedLabel::TrackedSToS,
                (true, Side::O) => CombinedLabel::TippedSToO,
                (false, Side::S) => CombinedLabel::TippedOToS,
                (false, Side::O) => CombinedLabel::StayedO,
            };
            Ok(CombinedRealization {
                index: j,
                label,
                final_state: fin,
                storm_minus_approach: approach,
                approach_lambda: approach.map(|t| ramp_value(t, &s)),
            })
        })
        .collect::<Result<_>>()?;
    let labels = [
        CombinedLabel::TippedSToO,
        CombinedLabel::TrackedSToS,
        CombinedLabel::TippedOToS,
        CombinedLabel::StayedO,
        CombinedLabel::Unresolved,
    ];
    let label_counts = labels.iter().map(|&l| (l, realizations.iter().filter(|r| r.label == l).count())).collect();
    let tipped = realizations.iter().filter(|r| r.label.is_tip()).count();
    let stats = EnsembleStats {
        n_realizations: count,
        n_tipped: tipped,
        tip_fraction: if count == 0 { 0.0 } else { tipped as f64 / count as f64 },
        tip_time_mean: None,
        tip_time_median: None,
    };
    Ok(CombinedResult {
        start_basin: if from_s { "S".into() } else { "O".into() },
        stats,
        label_counts,
        realizations,
        tau0,
        tau_end,
        approach_tol,
    })
}

/// Storm state of the autonomous model, for ensemble starting points.
pub fn storm_state(p: &ModelParams) -> Result<State> {
    fixed_points(p)?.storm_state()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: ModelParams = ModelParams::raw(0.43, 0.286);

    #[test]
    fn reflected_field_quadrants() {
        let (v, m) = (0.3, 0.2);
        let f = crate::model::vector_field(State::new(v, m), &FIG1);
        assert_eq!(reflected_field(State::new(v, m), &FIG1), f);
        for rule in [Reflection::Mirror, Reflection::AsPrinted] {
            assert_eq!(reflected_field_with(State::new(-v, m), &FIG1, rule).v, -f.v);
            let odd = reflected_field_with(State::new(-v, -m), &FIG1, rule);
            assert_eq!(odd, -f);
        }
        let printed = reflected_field_with(State::new(v, -m), &FIG1, Reflection::AsPrinted);
        assert_eq!(printed.m, f.m);
        let mirror = reflected_field(State::new(v, -m), &FIG1);
        assert_eq!(mirror.m, -f.m);
        assert_eq!(reflected_field(State::new(0.0, m), &FIG1), crate::model::vector_field(State::new(0.0, m), &FIG1));
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(State::new(0.3, 0.2)), State::new(0.3, 0.2));
        assert_eq!(reflect(State::new(-0.1, 0.05)), State::new(0.1, 0.05));
        assert_eq!(reflect(State::new(-0.1, -0.2)), State::new(0.1, 0.2));
    }

    #[test]
    fn streams_differ_and_repeat() {
        let mut a = NoisePair::new(7, 3);
        let mut b = NoisePair::new(7, 3);
        let mut c = NoisePair::new(7, 4);
        let x = a.next();
        assert_eq!(x, b.next());
        assert_ne!(x, c.next());
        assert_ne!(x.0, x.1);
    }

    #[test]
    fn zero_noise_is_euler() {
        let n = NoiseSpec { sigma1: 0.0, sigma2: 0.0, tau_f: 10.0, dt: 0.01, store_every: 1, ..Default::default() };
        let x0 = State::new(0.3, 0.5);
        let r = euler_maruyama(x0, &FIG1, &n, 0, Reflection::Mirror).unwrap();
        let mut x = x0;
        for _ in 0..1000 {
            x = x + crate::model::vector_field(x, &FIG1) * 0.01;
        }
        assert!(r.raw.last().unwrap().dist(x) < 1e-12);
    }

    #[test]
    fn quiet_path_has_no_events() {
        let sep = Separatrix::compute(&FIG1, &TraceOptions::default()).unwrap();
        let tau: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let raw: Vec<State> = (0..100).map(|k| State::new(1e-3 * (k as f64).sin(), 1e-3)).collect();
        let real = Realization { tau, raw, tip_events: vec![], unresolved: vec![] };
        assert!(detect_tips(&real, &sep).0.is_empty());
    }

    #[test]
    fn straight_crossing_through_saddle() {
        let se = crate::manifolds::saddle_eigen(&FIG1).unwrap();
        let sep = Separatrix::compute(&FIG1, &TraceOptions::default()).unwrap();
        let a = se.saddle - se.unstable_vector * 0.05;
        let b = se.saddle + se.unstable_vector * 0.05;
        let n = 101;
        let raw: Vec<State> = (0..n).map(|k| a + (b - a) * (k as f64 / (n - 1) as f64 + 0.001)).collect();
        let tau: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let real = Realization { tau, raw: raw.clone(), tip_events: vec![], unresolved: vec![] };
        let (ev, _) = detect_tips(&real, &sep);
        assert_eq!(ev.len(), 1);
        let first_s = raw.iter().position(|x| sep.side(*x) == Side::S).unwrap();
        assert_eq!(ev[0].index, first_s);
        assert_eq!(ev[0].kind, TipKind::OToS);
        assert!((49..=51).contains(&first_s));
    }

    #[test]
    fn stats_from_times() {
        let s = EnsembleStats::from_times(4, &[3.0, 1.0]);
        assert_eq!(s.n_tipped, 2);
        assert_eq!(s.tip_fraction, 0.5);
        assert_eq!(s.tip_time_median, Some(2.0));
        let e = EnsembleStats::from_times(3, &[]);
        assert_eq!(e.tip_time_mean, None);
    }

    #[test]
    fn lyapunov_diagonal_and_residual() {
        let p = stationary_covariance(&[[-2.0, 0.0], [0.0, -0.5]], 0.1, 0.3).unwrap();
        assert!((p[0][0] - 0.01 / 4.0).abs() < 1e-15);
        assert!((p[1][1] - 0.09 / 1.0).abs() < 1e-15);
        assert!(p[0][1].abs() < 1e-15);
        let j = [[-0.6, 0.4], [1.0, -0.3]];
        assert!(stationary_covariance(&j, 1.0, 1.0).is_err());
        let j = [[-0.6, 0.4], [0.2, -0.3]];
        let p = stationary_covariance(&j, 0.2, 0.1).unwrap();
        let q = [[0.04, 0.0], [0.0, 0.01]];
        for a in 0..2 {
            for b in 0..2 {
                let r: f64 = (0..2).map(|k| j[a][k] * p[k][b] + p[a][k] * j[b][k]).sum::<f64>() + q[a][b];
                assert!(r.abs() < 1e-15);
            }
        }
        assert!((major_axis_std(&[[4.0, 0.0], [0.0, 1.0]]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn approach_radius_at_default_ramp() {
        let n = NoiseSpec { sigma1: 0.005, sigma2: 0.005, seed: 1, dt: 0.01, tau_f: 10.0, store_every: 10 };
        let tol = default_approach_tol(&RampSpec::default(), 0.43, &n).unwrap();
        assert!(tol > 0.03 && tol < 0.1, "{tol}");
    }
}
