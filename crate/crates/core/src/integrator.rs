//! Integrating-factor fourth-order Runge-Kutta on spectral states.
//!
//! For `u' = L u + N(t, u)` with `L` diagonal in Fourier space, the stepper
//! advances `exp(-L t) u` with classical RK4 (the Lawson form). Only the
//! half-step propagator `exp(L dt/2)` is ever needed.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{FourierGrid, SpectralField};

/// State vector made of spectral fields.
pub trait Evolve: Clone {
    /// `self += h * rate`.
    fn axpy(&mut self, h: f64, rate: &Self);

    fn scaled(&self, c: f64) -> Self;

    fn is_finite(&self) -> bool;

    /// Size used by the instability guard.
    fn magnitude(&self) -> f64;
}

impl Evolve for SpectralField {
    fn axpy(&mut self, h: f64, rate: &Self) {
        SpectralField::axpy(self, h, rate);
    }

    fn scaled(&self, c: f64) -> Self {
        SpectralField::scaled(self, c)
    }

    fn is_finite(&self) -> bool {
        SpectralField::is_finite(self)
    }

    fn magnitude(&self) -> f64 {
        self.mass().sqrt()
    }
}

/// Position of a Runge-Kutta stage inside step `step`: 0 at `t_k`,
/// 1 at the midpoint, 2 at `t_{k+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stage {
    pub step: usize,
    pub node: u8,
}

/// Exact flow of `a_t = (i eps / 2) a_xx` over half a step.
#[derive(Clone, Debug)]
pub struct DispersionHalfStep {
    factors: Vec<Complex64>,
}

impl DispersionHalfStep {
    pub fn new(grid: &Arc<FourierGrid>, eps: f64, dt: f64) -> Self {
        let h = 0.5 * dt;
        let factors = grid
            .wavenumbers()
            .iter()
            .map(|&xi| Complex64::from_polar(1.0, -0.5 * eps * xi * xi * h))
            .collect();
        Self { factors }
    }

    pub fn apply(&self, field: &mut SpectralField) {
        let coeffs: Vec<Complex64> = field
            .coefficients()
            .iter()
            .zip(&self.factors)
            .map(|(c, f)| c * f)
            .collect();
        let grid = Arc::clone(field.grid());
        *field = SpectralField::from_coefficients(&grid, coeffs, false).expect("same grid");
    }
}

/// One Lawson-RK4 step of size `dt` from `u` at step index `step`.
pub fn lawson_rk4_step<S, H, F>(u: &S, step: usize, dt: f64, half: &H, rhs: &mut F) -> Result<S>
where
    S: Evolve,
    H: Fn(&mut S),
    F: FnMut(Stage, &S) -> Result<S>,
{
    let at = |node| Stage { step, node };
    let k1 = rhs(at(0), u)?;

    let mut shifted = u.clone();
    half(&mut shifted);

    let mut s2 = u.clone();
    s2.axpy(0.5 * dt, &k1);
    half(&mut s2);
    let k2 = rhs(at(1), &s2)?;

    let mut s3 = shifted.clone();
    s3.axpy(0.5 * dt, &k2);
    let k3 = rhs(at(1), &s3)?;

    let mut s4 = shifted;
    s4.axpy(dt, &k3);
    half(&mut s4);
    let k4 = rhs(at(2), &s4)?;

    let mut out = u.clone();
    out.axpy(dt / 6.0, &k1);
    half(&mut out);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    half(&mut out);
    out.axpy(dt / 6.0, &k4);
    Ok(out)
}

/// Uniformly sampled solution `t_k = k dt`, `k = 0..=steps`.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S: Evolve> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// State at stage `node` of step `step`; midpoints by cubic Lagrange
    /// interpolation on the four nearest samples.
    pub fn at_stage(&self, stage: Stage) -> S {
        match stage.node {
            0 => self.states[stage.step].clone(),
            2 => self.states[stage.step + 1].clone(),
            _ => self.midpoint(stage.step),
        }
    }

    pub fn midpoint(&self, step: usize) -> S {
        let last = self.states.len() - 1;
        let (start, count) = if last >= 3 {
            (step.saturating_sub(1).min(last - 3), 4)
        } else {
            (0, last + 1)
        };
        let x = step as f64 + 0.5;
        let nodes: Vec<f64> = (start..start + count).map(|k| k as f64).collect();
        let weights = lagrange_weights(&nodes, x);
        let mut out = self.states[start].scaled(weights[0]);
        for (i, w) in weights.iter().enumerate().skip(1) {
            out.axpy(*w, &self.states[start + i]);
        }
        out
    }

    /// Applies `f` to every state, keeping the time grid.
    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> Trajectory<T> {
        Trajectory {
            dt: self.dt,
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
        }
    }
}

pub(crate) fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (x - xj) / (nodes[i] - xj))
                .product()
        })
        .collect()
}

/// Number of steps of size `dt` covering `horizon`; `dt` must divide it.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::StepMismatch { dt, horizon });
    }
    let steps = (horizon / dt).round();
    if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::StepMismatch { dt, horizon });
    }
    Ok(steps as usize)
}

/// Largest step not exceeding `dt_max` that divides `horizon`.
pub fn fitted_step(horizon: f64, dt_max: f64) -> f64 {
    let steps = (horizon / dt_max * (1.0 - 1e-12)).ceil().max(1.0);
    horizon / steps
}

/// Marches `u0` over `steps` steps, aborting on non-finite values or when the
/// state magnitude exceeds ten times its initial value.
pub(crate) fn march<S, H, F>(
    u0: S,
    dt: f64,
    steps: usize,
    what: &'static str,
    half: H,
    mut rhs: F,
    mut check: impl FnMut(f64, &S) -> Result<()>,
) -> Result<Trajectory<S>>
where
    S: Evolve,
    H: Fn(&mut S),
    F: FnMut(Stage, &S) -> Result<S>,
{
    let initial = u0.magnitude();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    check(0.0, &u0)?;
    times.push(0.0);
    states.push(u0);
    for step in 0..steps {
        let t = (step + 1) as f64 * dt;
        let next = lawson_rk4_step(&states[step], step, dt, &half, &mut rhs)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { what, t });
        }
        if initial > 0.0 {
            let growth = next.magnitude() / initial;
            if growth > 10.0 {
                return Err(Error::Unstable { t, growth });
            }
        }
        check(t, &next)?;
        times.push(t);
        states.push(next);
    }
    Ok(Trajectory { dt, times, states })
}
