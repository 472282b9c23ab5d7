//! Freidlin-Wentzell action, its Euler-Lagrange and Hamiltonian forms, the gradient-flow
//! minimum action method, local expansions near O and the escape-time scaling law.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{saddle_eigen, saddle_manifold, BranchSign, ManifoldKind, Separatrix, Side, TraceOptions};
use crate::model::{fixed_points, jacobian, vector_field, Mat2, ModelParams, State};
use crate::ode::rk4_step;

/// Noise intensities; the action weight is Σ = diag(σ₁⁻², σ₂⁻²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl WeightMatrix {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 > 0.0) {
            return Err(Error::InvalidParams("noise intensities must be positive".into()));
        }
        Ok(WeightMatrix { sigma1, sigma2 })
    }

    /// Diagonal of Σ.
    pub fn sigma(&self) -> [f64; 2] {
        [self.sigma1.powi(-2), self.sigma2.powi(-2)]
    }

    /// Diagonal of Σ⁻¹.
    pub fn sigma_inv(&self) -> [f64; 2] {
        [self.sigma1 * self.sigma1, self.sigma2 * self.sigma2]
    }

    /// ‖x‖²_Σ.
    pub fn norm_sq(&self, x: State) -> f64 {
        let s = self.sigma();
        s[0] * x.v * x.v + s[1] * x.m * x.m
    }
}

/// Path on a uniform grid over [tau0, tau_f].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPath {
    pub tau0: f64,
    pub tau_f: f64,
    pub psi: Vec<State>,
    pub action: f64,
}

impl TransitionPath {
    pub fn new(tau0: f64, tau_f: f64, psi: Vec<State>) -> Self {
        TransitionPath { tau0, tau_f, psi, action: f64::NAN }
    }

    pub fn h(&self) -> f64 {
        (self.tau_f - self.tau0) / (self.psi.len() - 1) as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau0 + i as f64 * self.h()
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

fn check_grid(path: &TransitionPath) -> Result<()> {
    if path.psi.len() < 3 || !(path.tau_f > path.tau0) {
        return Err(Error::InvalidParams("path needs at least 3 nodes on a nonempty interval".into()));
    }
    Ok(())
}

/// Centred differences inside, one-sided at the ends.
fn derivative(psi: &[State], h: f64) -> Vec<State> {
    let n = psi.len();
    let mut d = Vec::with_capacity(n);
    d.push((psi[1] - psi[0]) * (1.0 / h));
    for i in 1..n - 1 {
        d.push((psi[i + 1] - psi[i - 1]) * (0.5 / h));
    }
    d.push((psi[n - 1] - psi[n - 2]) * (1.0 / h));
    d
}

#[inline]
fn trap_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n - 1 {
        0.5 * h
    } else {
        h
    }
}

fn action_of(psi: &[State], h: f64, p: &ModelParams, w: &WeightMatrix) -> f64 {
    let n = psi.len();
    let d = derivative(psi, h);
    let mut sum = 0.0;
    for i in 0..n {
        let r = d[i] - vector_field(psi[i], p);
        sum += trap_weight(i, n, h) * w.norm_sq(r);
    }
    0.5 * sum
}

/// Trapezoidal quadrature of ½‖ψ̇ − F(ψ)‖²_Σ.
pub fn action_value(path: &TransitionPath, p: &ModelParams, w: &WeightMatrix) -> Result<f64> {
    check_grid(path)?;
    Ok(action_of(&path.psi, path.h(), p, w))
}

/// Exact gradient of the discrete action with respect to every node.
pub fn action_gradient(path: &TransitionPath, p: &ModelParams, w: &WeightMatrix) -> Result<Vec<State>> {
    check_grid(path)?;
    Ok(gradient_of(&path.psi, path.h(), p, w))
}

fn gradient_of(psi: &[State], h: f64, p: &ModelParams, w: &WeightMatrix) -> Vec<State> {
    let n = psi.len();
    let d = derivative(psi, h);
    let s = w.sigma();
    let q: Vec<State> = (0..n)
        .map(|i| {
            let r = d[i] - vector_field(psi[i], p);
            let wi = trap_weight(i, n, h);
            State::new(wi * s[0] * r.v, wi * s[1] * r.m)
        })
        .collect();
    let mut g = vec![State::ORIGIN; n];
    g[1] = g[1] + q[0] * (1.0 / h);
    g[0] = g[0] - q[0] * (1.0 / h);
    for i in 1..n - 1 {
        g[i + 1] = g[i + 1] + q[i] * (0.5 / h);
        g[i - 1] = g[i - 1] - q[i] * (0.5 / h);
    }
    g[n - 1] = g[n - 1] + q[n - 1] * (1.0 / h);
    g[n - 2] = g[n - 2] - q[n - 1] * (1.0 / h);
    for i in 0..n {
        let j = jacobian(psi[i], p);
        g[i] = g[i] - transpose_mul(&j, q[i]);
    }
    g
}

#[inline]
fn mat_mul(a: &Mat2, x: State) -> State {
    State::new(a[0][0] * x.v + a[0][1] * x.m, a[1][0] * x.v + a[1][1] * x.m)
}

#[inline]
fn transpose_mul(a: &Mat2, x: State) -> State {
    State::new(a[0][0] * x.v + a[1][0] * x.m, a[0][1] * x.v + a[1][1] * x.m)
}

/// ψ̈ − ∇F ψ̇ + Σ⁻¹∇Fᵀ Σ(ψ̇ − F) at interior nodes (index 0 is node 1).
pub fn euler_lagrange_residual(path: &TransitionPath, p: &ModelParams, w: &WeightMatrix) -> Result<Vec<State>> {
    check_grid(path)?;
    let h = path.h();
    let psi = &path.psi;
    let (s, si) = (w.sigma(), w.sigma_inv());
    Ok((1..psi.len() - 1)
        .map(|i| {
            let dd = (psi[i + 1] - psi[i] * 2.0 + psi[i - 1]) * (1.0 / (h * h));
            let d = (psi[i + 1] - psi[i - 1]) * (0.5 / h);
            let j = jacobian(psi[i], p);
            let r = d - vector_field(psi[i], p);
            let t = transpose_mul(&j, State::new(s[0] * r.v, s[1] * r.m));
            dd - mat_mul(&j, d) + State::new(si[0] * t.v, si[1] * t.m)
        })
        .collect())
}

/// Solves (I − λ L) x = b with L the Dirichlet three-point Laplacian (Thomas algorithm).
fn solve_shifted_laplacian(lambda: f64, b: &mut [f64], scratch: &mut Vec<f64>) {
    let n = b.len();
    if n == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let (diag, off) = (1.0 + 2.0 * lambda, -lambda);
    let mut denom = diag;
    b[0] /= denom;
    for i in 1..n {
        scratch[i] = off / denom;
        denom = diag - off * scratch[i];
        b[i] = (b[i] - off * b[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        b[i] -= scratch[i + 1] * b[i + 1];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MamOptions {
    /// Total flow time allowed.
    pub s_max: f64,
    /// Initial flow step.
    pub ds: f64,
    /// Stop when the action decrement per unit flow time falls below this.
    pub tol: f64,
    pub max_iterations: usize,
    /// Try a τ-translation towards mid-domain every this many iterations (0 disables).
    pub gauge_every: usize,
    pub ds_max: f64,
}

impl Default for MamOptions {
    fn default() -> Self {
        MamOptions { s_max: 1e7, ds: 1.0, tol: 1e-10, max_iterations: 2_000_000, gauge_every: 100, ds_max: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MamSolution {
    pub path: TransitionPath,
    /// Action after every accepted iteration, starting with the initial path.
    pub action_history: Vec<f64>,
    pub iterations: usize,
    pub flow_time: f64,
    pub gauge_shifts: usize,
}

/// Shifts the path in τ so that node `k` lands at mid-domain; endpoints keep their values.
fn translate(psi: &[State], k: usize) -> Vec<State> {
    let n = psi.len();
    let shift = k as f64 - (n - 1) as f64 / 2.0;
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return psi[i];
            }
            let x = (i as f64 + shift).clamp(0.0, (n - 1) as f64);
            let j = (x.floor() as usize).min(n - 2);
            let t = x - j as f64;
            psi[j] * (1.0 - t) + psi[j + 1] * t
        })
        .collect()
}

/// Preconditioned gradient flow of the discrete action with fixed endpoints.
///
/// Each step solves (I − ds L) Δψ = −ds Σ⁻¹∇I / w, halving ds until the action does not
/// increase, so the recorded action sequence is nonincreasing.
pub fn mam_gradient_flow(
    init: &TransitionPath,
    p: &ModelParams,
    w: &WeightMatrix,
    separatrix: Option<&Separatrix>,
    opts: &MamOptions,
) -> Result<MamSolution> {
    check_grid(init)?;
    let n = init.psi.len();
    let h = init.h();
    let si = w.sigma_inv();
    let mut psi = init.psi.clone();
    let mut a = action_of(&psi, h, p, w);
    let mut history = vec![a];
    let mut ds = opts.ds;
    let mut s = 0.0;
    let mut shifts = 0;
    let mut bv = vec![0.0; n - 2];
    let mut bm = vec![0.0; n - 2];
    let mut scratch = Vec::new();
    let mut trial = psi.clone();
    let mut it = 0;
    loop {
        if it >= opts.max_iterations || s >= opts.s_max {
            return Err(Error::NotConverged { iterations: it, action: a });
        }
        let g = gradient_of(&psi, h, p, w);
        let (an, dec) = loop {
            for i in 1..n - 1 {
                let wi = h;
                bv[i - 1] = -ds * si[0] * g[i].v / wi;
                bm[i - 1] = -ds * si[1] * g[i].m / wi;
            }
            let lambda = ds / (h * h);
            solve_shifted_laplacian(lambda, &mut bv, &mut scratch);
            solve_shifted_laplacian(lambda, &mut bm, &mut scratch);
            for i in 1..n - 1 {
                trial[i] = State::new(psi[i].v + bv[i - 1], psi[i].m + bm[i - 1]);
            }
            trial[0] = psi[0];
            trial[n - 1] = psi[n - 1];
            let an = action_of(&trial, h, p, w);
            if an.is_finite() && an <= a {
                break (an, a - an);
            }
            ds *= 0.5;
            if ds < 1e-300 {
                return Err(Error::NotConverged { iterations: it, action: a });
            }
        };
        std::mem::swap(&mut psi, &mut trial);
        s += ds;
        a = an;
        history.push(a);
        it += 1;
        let rate = dec / ds;
        ds = (ds * 1.1).min(opts.ds_max);
        if let Some(sep) = separatrix {
            if opts.gauge_every > 0 && it % opts.gauge_every == 0 {
                if let Some(k) = psi.iter().position(|x| sep.side(*x) == Side::S) {
                    if k != (n - 1) / 2 {
                        let shifted = translate(&psi, k);
                        let ash = action_of(&shifted, h, p, w);
                        if ash <= a {
                            psi = shifted;
                            a = ash;
                            *history.last_mut().unwrap() = a;
                            shifts += 1;
                        }
                    }
                }
            }
        }
        if it > 100 && rate < opts.tol {
            break;
        }
    }
    let mut path = TransitionPath::new(init.tau0, init.tau_f, psi);
    path.action = a;
    Ok(MamSolution { path, action_history: history, iterations: it, flow_time: s, gauge_shifts: shifts })
}

/// Piecewise-linear path through `via` with `a` at τ0, `via` at mid-domain and `b` at τ_f.
pub fn piecewise_linear_path(a: State, via: State, b: State, tau0: f64, tau_f: f64, nodes: usize) -> TransitionPath {
    let k = (nodes - 1) / 2;
    let mut psi: Vec<State> = (0..nodes)
        .map(|i| {
            if i <= k {
                a + (via - a) * (i as f64 / k as f64)
            } else {
                via + (b - via) * ((i - k) as f64 / (nodes - 1 - k) as f64)
            }
        })
        .collect();
    psi[0] = a;
    psi[nodes - 1] = b;
    TransitionPath::new(tau0, tau_f, psi)
}

/// Window and grid for most-probable-path solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub tau_f: f64,
    pub nodes: usize,
}

impl Default for PathGrid {
    fn default() -> Self {
        PathGrid { tau_f: 4000.0, nodes: 10001 }
    }
}

/// Converged O→S (or S→O when `reverse`) path from the piecewise-linear start through U.
pub fn solve_mpp(p: &ModelParams, w: &WeightMatrix, grid: &PathGrid, opts: &MamOptions, reverse: bool) -> Result<MamSolution> {
    let fp = fixed_points(p)?;
    let (u, s) = (fp.saddle_state()?, fp.storm_state()?);
    let init = if reverse {
        piecewise_linear_path(s, u, State::ORIGIN, 0.0, grid.tau_f, grid.nodes)
    } else {
        piecewise_linear_path(State::ORIGIN, u, s, 0.0, grid.tau_f, grid.nodes)
    };
    let sep = Separatrix::compute(p, &TraceOptions::default())?;
    mam_gradient_flow(&init, p, w, Some(&sep), opts)
}

/// Point of the lifted phase space (ψ, 𝐩).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianState {
    pub psi: State,
    pub p: [f64; 2],
}

impl HamiltonianState {
    pub fn to_array(self) -> [f64; 4] {
        [self.psi.v, self.psi.m, self.p[0], self.p[1]]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        HamiltonianState { psi: State::new(a[0], a[1]), p: [a[2], a[3]] }
    }
}

/// ψ̇ = F(ψ) + Σ⁻¹𝐩, 𝐩̇ = −∇F(ψ)ᵀ𝐩.
pub fn hamiltonian_field(h: &HamiltonianState, params: &ModelParams, w: &WeightMatrix) -> HamiltonianState {
    let f = vector_field(h.psi, params);
    let si = w.sigma_inv();
    let j = jacobian(h.psi, params);
    let q = transpose_mul(&j, State::new(h.p[0], h.p[1]));
    HamiltonianState { psi: State::new(f.v + si[0] * h.p[0], f.m + si[1] * h.p[1]), p: [-q.v, -q.m] }
}

/// H = ½‖𝐩‖²_{Σ⁻¹} + ⟨F(ψ), 𝐩⟩.
pub fn hamiltonian_value(h: &HamiltonianState, params: &ModelParams, w: &WeightMatrix) -> f64 {
    let si = w.sigma_inv();
    let f = vector_field(h.psi, params);
    0.5 * (si[0] * h.p[0] * h.p[0] + si[1] * h.p[1] * h.p[1]) + f.v * h.p[0] + f.m * h.p[1]
}

/// Jacobian of the Hamiltonian vector field.
pub fn hamiltonian_jacobian(h: &HamiltonianState, params: &ModelParams, w: &WeightMatrix) -> Matrix4<f64> {
    let j = jacobian(h.psi, params);
    let si = w.sigma_inv();
    let (v, m, g) = (h.psi.v, h.psi.m, params.gamma);
    // Hessians of f and g
    let fvv = -2.0 * (1.0 - g * m.powi(3));
    let fvm = 6.0 * g * m * m * v;
    let fmm = 6.0 * (1.0 - g) * m + 6.0 * g * m * v * v;
    let gvm = -1.0;
    let [p1, p2] = h.p;
    let kvv = p1 * fvv;
    let kvm = p1 * fvm + p2 * gvm;
    let kmm = p1 * fmm;
    Matrix4::new(
        j[0][0], j[0][1], si[0], 0.0,
        j[1][0], j[1][1], 0.0, si[1],
        -kvv, -kvm, -j[0][0], -j[1][0],
        -kvm, -kmm, -j[0][1], -j[1][1],
    )
}

/// Eigenvalues (re, im) of the Hamiltonian Jacobian, sorted by real then imaginary part.
pub fn hamiltonian_eigenvalues(h: &HamiltonianState, params: &ModelParams, w: &WeightMatrix) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> =
        hamiltonian_jacobian(h, params, w).complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ev
}

/// RK4 trajectory of the Hamiltonian system, `n` steps of size `dt`.
pub fn integrate_hamiltonian(
    h0: HamiltonianState,
    params: &ModelParams,
    w: &WeightMatrix,
    dt: f64,
    n: usize,
) -> Result<Vec<HamiltonianState>> {
    let (pp, ww) = (*params, *w);
    let f = move |_t: f64, x: &[f64; 4]| hamiltonian_field(&HamiltonianState::from_array(*x), &pp, &ww).to_array();
    let mut out = Vec::with_capacity(n + 1);
    let mut x = h0.to_array();
    out.push(h0);
    for k in 0..n {
        x = rk4_step(&f, 0.0, &x, dt);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: (k + 1) as f64 * dt });
        }
        out.push(HamiltonianState::from_array(x));
    }
    Ok(out)
}

/// Momentum along `dir` putting (ψ, 𝐩) on the zero level set of H (requires ⟨F, dir⟩ < 0).
pub fn zero_energy_momentum(psi: State, dir: [f64; 2], params: &ModelParams, w: &WeightMatrix) -> Result<[f64; 2]> {
    let f = vector_field(psi, params);
    let si = w.sigma_inv();
    let fd = f.v * dir[0] + f.m * dir[1];
    let q = si[0] * dir[0] * dir[0] + si[1] * dir[1] * dir[1];
    if !(fd < 0.0 && q > 0.0) {
        return Err(Error::InvalidParams("direction must oppose the drift".into()));
    }
    let k = -2.0 * fd / q;
    Ok([k * dir[0], k * dir[1]])
}

/// ∫ ½‖𝐩‖²_{Σ⁻¹} dτ along a uniformly sampled trajectory (trapezoidal rule).
pub fn legendre_action(traj: &[HamiltonianState], dt: f64, w: &WeightMatrix) -> f64 {
    let si = w.sigma_inv();
    let n = traj.len();
    (0..n)
        .map(|i| {
            let p = traj[i].p;
            trap_weight(i, n, dt) * 0.5 * (si[0] * p[0] * p[0] + si[1] * p[1] * p[1])
        })
        .sum()
}

/// Cubic-order expansion (ψ₂, p₂) of the centre manifold of (O, 0) in terms of (ψ₁, p₁).
pub fn hamiltonian_center_manifold(psi1: f64, p1: f64, params: &ModelParams, w: &WeightMatrix) -> (f64, f64) {
    let (g, c) = (params.gamma, params.c);
    let s2 = w.sigma1 * w.sigma1;
    let psi2 = psi1 / c - (1.0 - g) * psi1.powi(3) / c.powi(5) - s2 * p1 / (c * c) - 3.0 * s2 * s2 * p1 * p1 / c.powi(4)
        + 3.0 * s2 * p1 * psi1 / c.powi(3);
    let p2 = 3.0 * (1.0 - g) * s2 * s2 * p1.powi(3) / c.powi(5) + 3.0 * (1.0 - g) * p1 * psi1 * psi1 / c.powi(3);
    (psi2, p2)
}

/// Invariance defect of the expansion under the Hamiltonian flow, for (ψ₂, p₂).
pub fn hamiltonian_center_manifold_residual(psi1: f64, p1: f64, params: &ModelParams, w: &WeightMatrix) -> (f64, f64) {
    let (g, c) = (params.gamma, params.c);
    let s2 = w.sigma1 * w.sigma1;
    let (psi2, p2) = hamiltonian_center_manifold(psi1, p1, params, w);
    let h = HamiltonianState { psi: State::new(psi1, psi2), p: [p1, p2] };
    let d = hamiltonian_field(&h, params, w);
    let dpsi2_dpsi1 = 1.0 / c - 3.0 * (1.0 - g) * psi1 * psi1 / c.powi(5) + 3.0 * s2 * p1 / c.powi(3);
    let dpsi2_dp1 = -s2 / (c * c) - 6.0 * s2 * s2 * p1 / c.powi(4) + 3.0 * s2 * psi1 / c.powi(3);
    let dp2_dpsi1 = 6.0 * (1.0 - g) * p1 * psi1 / c.powi(3);
    let dp2_dp1 = 9.0 * (1.0 - g) * s2 * s2 * p1 * p1 / c.powi(5) + 3.0 * (1.0 - g) * psi1 * psi1 / c.powi(3);
    (
        d.psi.m - (dpsi2_dpsi1 * d.psi.v + dpsi2_dp1 * d.p[0]),
        d.p[1] - (dp2_dpsi1 * d.psi.v + dp2_dp1 * d.p[0]),
    )
}

/// Local most probable path near O: (m, p₁, p₂) as functions of v.
pub fn local_mpp(v: f64, params: &ModelParams, w: &WeightMatrix) -> (f64, f64, f64) {
    let (g, c) = (params.gamma, params.c);
    let s2 = w.sigma1 * w.sigma1;
    let m = v / c - 2.0 * v * v / (c * c) - (1.0 - g) * v.powi(3) / c.powi(5) + 6.0 * v.powi(3) / c.powi(3);
    let p1 = 2.0 * v * v / s2;
    let p2 = 6.0 * (1.0 - g) * v.powi(4) / (c.powi(3) * s2);
    (m, p1, p2)
}

/// Exact value of the escape-neighbourhood action integral and its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub action: f64,
    /// Coefficient multiplying d³ with d = r c³.
    pub c1: f64,
    /// Coefficient multiplying d⁷.
    pub c2: f64,
    pub first_term: f64,
    pub second_term: f64,
    pub c7_over_sigma1_sq: f64,
    pub radius: f64,
}

/// Integrand of the escape-neighbourhood action in v.
pub fn scaling_law_integrand(v: f64, params: &ModelParams, w: &WeightMatrix) -> f64 {
    let (g, c) = (params.gamma, params.c);
    let (s1, s2) = (w.sigma1 * w.sigma1, w.sigma2 * w.sigma2);
    let den = c - 2.0 * s1;
    4.0 * v * v / (c * s1 * den) + 36.0 * (1.0 - g).powi(2) * v.powi(6) / (c.powi(5) * s1 * s1 * s2 * den)
}

pub fn scaling_law_action(params: &ModelParams, w: &WeightMatrix, r_fraction: f64) -> Result<ScalingLaw> {
    if !(r_fraction > 0.0 && r_fraction < 1.0) {
        return Err(Error::InvalidParams(format!("r_fraction must lie in (0,1), got {r_fraction}")));
    }
    let (g, c) = (params.gamma, params.c);
    let (s1, s2) = (w.sigma1 * w.sigma1, w.sigma2 * w.sigma2);
    let den = c - 2.0 * s1;
    if !(den > 0.0) {
        return Err(Error::InvalidParams(format!("c - 2 sigma1^2 = {den} must be positive")));
    }
    let d = r_fraction * c.powi(3);
    let c1 = 4.0 / (3.0 * c * s1 * den);
    let c2 = 36.0 * (1.0 - g).powi(2) / (7.0 * c.powi(5) * s1 * s1 * s2 * den);
    let (t1, t2) = (c1 * d.powi(3), c2 * d.powi(7));
    Ok(ScalingLaw {
        action: t1 + t2,
        c1,
        c2,
        first_term: t1,
        second_term: t2,
        c7_over_sigma1_sq: c.powi(7) / s1,
        radius: d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipTimeBound {
    pub bound: f64,
    pub log_bound: f64,
    pub prefactor: f64,
    /// Only the logarithm is meaningful; the sub-exponential prefactor is unknown.
    pub log_equivalence_only: bool,
}

pub fn expected_tip_time_bound(params: &ModelParams, w: &WeightMatrix, r_fraction: f64) -> Result<TipTimeBound> {
    let s = scaling_law_action(params, w, r_fraction)?;
    Ok(TipTimeBound { bound: s.action.exp(), log_bound: s.action, prefactor: 1.0, log_equivalence_only: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub grid: PathGrid,
    pub mam: MamOptions,
    pub junction_tol: f64,
    /// Longest deterministic tail integration.
    pub tail_time: f64,
    /// Tail stops once within this distance of S.
    pub tail_tol: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            grid: PathGrid::default(),
            mam: MamOptions::default(),
            junction_tol: 1e-2,
            tail_time: 5000.0,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledPath {
    /// Gradient-flow nodes up to the last one on the O side of the separatrix.
    pub flow_segment: TransitionPath,
    /// Deterministic flow from the first node past the separatrix, same step as the flow grid.
    pub tail: TransitionPath,
    pub flow_action: f64,
    pub tail_action: f64,
    pub total_action: f64,
    pub junction_distance: f64,
    /// Largest distance from a tail point to the unstable manifold branch towards S.
    pub tail_manifold_distance: f64,
    pub iterations: usize,
}

fn point_segment_distance(x: State, a: State, b: State) -> f64 {
    let ab = b - a;
    let l2 = ab.dot(ab);
    let t = if l2 > 0.0 { ((x - a).dot(ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    x.dist(a + ab * t)
}

/// Distance from `x` to a polyline.
pub fn polyline_distance(x: State, line: &[State]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => x.dist(line[0]),
        _ => line.windows(2).map(|s| point_segment_distance(x, s[0], s[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Joins a converged gradient-flow path up to the separatrix with the deterministic flow to S.
pub fn mpp_assemble(params: &ModelParams, w: &WeightMatrix, opts: &AssembleOptions) -> Result<AssembledPath> {
    let sol = solve_mpp(params, w, &opts.grid, &opts.mam, false)?;
    assemble_from(&sol.path, params, w, opts, sol.iterations)
}

pub fn assemble_from(
    path: &TransitionPath,
    params: &ModelParams,
    w: &WeightMatrix,
    opts: &AssembleOptions,
    iterations: usize,
) -> Result<AssembledPath> {
    let trace = TraceOptions::default();
    let sep = Separatrix::compute(params, &trace)?;
    let se = saddle_eigen(params)?;
    let k = path
        .psi
        .iter()
        .position(|x| sep.side(*x) == Side::S)
        .ok_or_else(|| Error::Separatrix("path never crosses the separatrix".into()))?;
    if k < 2 {
        return Err(Error::Separatrix("separatrix crossed at the first nodes".into()));
    }
    let h = path.h();
    let flow = TransitionPath::new(path.tau0, path.tau(k - 1), path.psi[..k].to_vec());
    let flow_action = action_of(&flow.psi, h, params, w);
    let pp = *params;
    let field = move |_t: f64, x: &[f64; 2]| vector_field(State::from_array(*x), &pp).to_array();
    let mut tail_pts = vec![path.psi[k]];
    let mut x = path.psi[k].to_array();
    let max_steps = (opts.tail_time / h).ceil() as usize;
    for _ in 0..max_steps {
        x = rk4_step(&field, 0.0, &x, h);
        let s = State::from_array(x);
        if !s.is_finite() {
            return Err(Error::NonFinite { t: 0.0 });
        }
        tail_pts.push(s);
        if s.dist(se.storm) < opts.tail_tol {
            break;
        }
    }
    if tail_pts.len() < 3 {
        tail_pts.push(State::from_array(rk4_step(&field, 0.0, &x, h)));
    }
    let t_start = path.tau(k);
    let tail = TransitionPath::new(t_start, t_start + (tail_pts.len() - 1) as f64 * h, tail_pts);
    let tail_action = action_of(&tail.psi, h, params, w);
    let junction = path.psi[k - 1].dist(path.psi[k]);
    if junction > opts.junction_tol {
        return Err(Error::Junction { distance: junction, tol: opts.junction_tol });
    }
    let unstable = saddle_manifold(params, ManifoldKind::Unstable, BranchSign::Plus, &trace)?;
    let mut line = vec![se.saddle];
    line.extend(unstable.points.iter().copied());
    line.push(se.storm);
    let dev = tail.psi.iter().map(|&x| polyline_distance(x, &line)).fold(0.0, f64::max);
    Ok(AssembledPath {
        flow_segment: TransitionPath { action: flow_action, ..flow },
        tail: TransitionPath { action: tail_action, ..tail },
        flow_action,
        tail_action,
        total_action: flow_action + tail_action,
        junction_distance: junction,
        tail_manifold_distance: dev,
        iterations,
    })
}

/// m on the path at its first crossing of `v`, by linear interpolation.
pub fn path_m_at(path: &[State], v: f64) -> Option<f64> {
    path.windows(2).find(|s| s[0].v < v && s[1].v >= v).map(|s| {
        let t = (v - s[0].v) / (s[1].v - s[0].v);
        s[0].m + t * (s[1].m - s[0].m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: ModelParams = ModelParams::raw(0.43, 0.286);
    const W: WeightMatrix = WeightMatrix { sigma1: 0.005, sigma2: 0.005 };

    #[test]
    fn constant_path_at_origin_is_free() {
        let path = TransitionPath::new(0.0, 1.0, vec![State::ORIGIN; 11]);
        assert_eq!(action_value(&path, &FIG1, &W).unwrap(), 0.0);
        assert!(action_value(&TransitionPath::new(0.0, 1.0, vec![State::ORIGIN; 2]), &FIG1, &W).is_err());
    }

    #[test]
    fn thomas_solver() {
        let lambda = 0.7;
        let x = [1.0, -2.0, 0.5, 3.0, 0.25];
        let n = x.len();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                x[i] - lambda * (l - 2.0 * x[i] + r)
            })
            .collect();
        solve_shifted_laplacian(lambda, &mut b, &mut Vec::new());
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_zero_momentum() {
        let h = HamiltonianState { psi: State::new(0.3, 0.4), p: [0.0, 0.0] };
        let d = hamiltonian_field(&h, &FIG1, &W);
        assert_eq!(d.psi, vector_field(h.psi, &FIG1));
        assert_eq!(d.p, [0.0, 0.0]);
        assert_eq!(hamiltonian_value(&h, &FIG1, &W), 0.0);
    }

    #[test]
    fn hcm_on_zero_momentum_is_deterministic_manifold() {
        let (psi2, p2) = hamiltonian_center_manifold(0.01, 0.0, &FIG1, &W);
        let cm = crate::model::center_manifold(0.01, &FIG1, 3).unwrap();
        assert!((psi2 - cm).abs() < 1e-15);
        assert_eq!(p2, 0.0);
        let e = 1e-7;
        let (a, _) = hamiltonian_center_manifold(e, 0.0, &FIG1, &W);
        let (b, _) = hamiltonian_center_manifold(0.0, e, &FIG1, &W);
        assert!((a / e - 1.0 / 0.286).abs() < 1e-6);
        assert!((b / e + 0.005f64.powi(2) / 0.286f64.powi(2)).abs() < 1e-9);
    }

    #[test]
    fn local_mpp_origin_and_slope() {
        assert_eq!(local_mpp(0.0, &FIG1, &W), (0.0, 0.0, 0.0));
        let e = 1e-8;
        assert!((local_mpp(e, &FIG1, &W).0 / e - 1.0 / 0.286).abs() < 1e-6);
    }

    #[test]
    fn scaling_law_errors() {
        assert!(scaling_law_action(&FIG1, &W, 1.5).is_err());
        let big = WeightMatrix { sigma1: 1.0, sigma2: 1.0 };
        assert!(scaling_law_action(&FIG1, &big, 0.5).is_err());
        let t = expected_tip_time_bound(&FIG1, &W, 0.5).unwrap();
        assert_eq!(t.log_bound, scaling_law_action(&FIG1, &W, 0.5).unwrap().action);
        assert!(t.log_equivalence_only);
    }
}
