//! Fixed-step Runge-Kutta integration on small fixed-size state vectors.

use crate::error::{Error, Result};

#[inline]
fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// One classical fourth-order Runge-Kutta step of `dx/dt = f(t, x)`.
#[inline]
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, x: &[f64; N], dt: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let h2 = 0.5 * dt;
    let k1 = f(t, x);
    let k2 = f(t + h2, &axpy(x, h2, &k1));
    let k3 = f(t + h2, &axpy(x, h2, &k2));
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Forward Euler step, used as the deterministic oracle for Euler-Maruyama.
#[inline]
pub fn euler_step<const N: usize, F>(f: &F, t: f64, x: &[f64; N], dt: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    axpy(x, dt, &f(t, x))
}

pub fn is_finite<const N: usize>(x: &[f64; N]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Integrates with `n_steps` RK4 steps and returns every sample, including the initial one.
pub fn rk4_trajectory<const N: usize, F>(
    f: F,
    t0: f64,
    x0: [f64; N],
    dt: f64,
    n_steps: usize,
) -> Result<(Vec<f64>, Vec<[f64; N]>)>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut ts = Vec::with_capacity(n_steps + 1);
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    ts.push(t0);
    xs.push(x);
    for k in 0..n_steps {
        let t = t0 + k as f64 * dt;
        x = rk4_step(&f, t, &x, dt);
        if !is_finite(&x) {
            return Err(Error::NonFinite { t: t + dt });
        }
        ts.push(t0 + (k + 1) as f64 * dt);
        xs.push(x);
    }
    Ok((ts, xs))
}

/// Number of steps of size close to `dt` covering `span`, never zero.
pub fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential_is_fourth_order() {
        let f = |_t: f64, x: &[f64; 1]| [-x[0]];
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let (_, xs) = rk4_trajectory(f, 0.0, [1.0], dt, n).unwrap();
            (xs[n][0] - (-1.0f64).exp()).abs()
        };
        let slope = (err(10) / err(20)).log2();
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let f = |_t: f64, x: &[f64; 2]| [x[1], -x[0]];
        let (_, xs) = rk4_trajectory(f, 0.0, [1.0, 0.0], 0.01, 628).unwrap();
        let e = xs[628][0].powi(2) + xs[628][1].powi(2);
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn blowup_is_reported() {
        let f = |_t: f64, x: &[f64; 1]| [x[0] * x[0]];
        let r = rk4_trajectory(f, 0.0, [1.0], 0.5, 100);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
