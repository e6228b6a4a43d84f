//! WKB approximants and the error measures compared across `eps`.

use num_complex::Complex64;

use crate::corrector::CorrectorState;
use crate::error::{Error, Result};
use crate::grenier::{trajectory_difference, WKBState};
use crate::integrator::Trajectory;
use crate::nls::{wkb_wave, WaveField};
use crate::nonlinearity::NonlinearitySpec;
use crate::spectral::{SpectralField, WeightSchedule};

/// `a exp(i phi / eps)`.
pub fn approximant_leading(phi: &SpectralField, a: &SpectralField, eps: f64) -> Result<WaveField> {
    wkb_wave(phi, a, eps)
}

/// `a exp(i phi1) exp(i phi / eps)`; the amplitude corrector does not enter.
pub fn approximant_corrected(
    phi: &SpectralField,
    a: &SpectralField,
    phi1: &SpectralField,
    eps: f64,
) -> Result<WaveField> {
    if !phi1.is_real() {
        return Err(Error::NotReal("phase corrector"));
    }
    if !phi1.grid().same_as(a.grid()) {
        return Err(Error::GridMismatch);
    }
    let rotated: Vec<Complex64> = phi1
        .real_samples()
        .into_iter()
        .zip(a.samples())
        .map(|(p, z)| z * Complex64::from_polar(1.0, p))
        .collect();
    wkb_wave(phi, &SpectralField::from_samples(a.grid(), &rotated)?, eps)
}

/// Leading approximant along a limit trajectory.
pub fn leading_trajectory(limit: &Trajectory<WKBState>, eps: f64) -> Result<Trajectory<WaveField>> {
    let states = limit
        .states
        .iter()
        .map(|s| approximant_leading(&s.phi, &s.a, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        dt: limit.dt,
        times: limit.times.clone(),
        states,
    })
}

/// Corrected approximant along a limit trajectory and its corrector.
pub fn corrected_trajectory(
    limit: &Trajectory<WKBState>,
    corrector: &Trajectory<CorrectorState>,
    eps: f64,
) -> Result<Trajectory<WaveField>> {
    check_aligned(&limit.times, &corrector.times)?;
    let states = limit
        .states
        .iter()
        .zip(&corrector.states)
        .map(|(s, c)| approximant_corrected(&s.phi, &s.a, &c.phi1, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        dt: limit.dt,
        times: limit.times.clone(),
        states,
    })
}

/// `(phi + eps phi1, a + eps a1)` along aligned trajectories.
pub fn first_order_states(
    limit: &Trajectory<WKBState>,
    corrector: &Trajectory<CorrectorState>,
    eps: f64,
) -> Result<Trajectory<WKBState>> {
    check_aligned(&limit.times, &corrector.times)?;
    let states = limit
        .states
        .iter()
        .zip(&corrector.states)
        .map(|(s, c)| {
            let mut phi = s.phi.clone();
            phi.axpy(eps, &c.phi1);
            let mut a = s.a.clone();
            a.axpy(eps, &c.a1);
            WKBState { phi, a }
        })
        .collect();
    Ok(Trajectory {
        dt: limit.dt,
        times: limit.times.clone(),
        states,
    })
}

/// Position density, momentum density and velocity as real fields.
#[derive(Clone, Debug)]
pub struct Observables {
    pub rho: SpectralField,
    pub current: SpectralField,
    pub velocity: SpectralField,
}

/// `rho = |u|^2`, `J = Im(eps conj(u) u_x)`, `v = J / rho` (zero where `rho`
/// vanishes).
pub fn observables(w: &WaveField) -> Observables {
    let grid = w.u.grid();
    let u = w.u.padded_samples();
    let ux = w.u.dx().padded_samples();
    let mut rho = Vec::with_capacity(u.len());
    let mut current = Vec::with_capacity(u.len());
    let mut velocity = Vec::with_capacity(u.len());
    for (z, zx) in u.iter().zip(&ux) {
        let r = z.norm_sqr();
        let j = w.eps * (z.conj() * zx).im;
        rho.push(Complex64::new(r, 0.0));
        current.push(Complex64::new(j, 0.0));
        velocity.push(Complex64::new(if r > f64::MIN_POSITIVE { j / r } else { 0.0 }, 0.0));
    }
    Observables {
        rho: SpectralField::from_padded_samples(grid, &rho, true),
        current: SpectralField::from_padded_samples(grid, &current, true),
        velocity: SpectralField::from_padded_samples(grid, &velocity, true),
    }
}

/// `rho = |a|^2`, `J = |a|^2 phi_x`, `v = phi_x`.
pub fn observables_limit(state: &WKBState) -> Observables {
    let grid = state.grid();
    let a = state.a.padded_samples();
    let v = state.phi.dx();
    let vs = v.padded_samples();
    let rho: Vec<Complex64> = a.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    let current: Vec<Complex64> = rho.iter().zip(&vs).map(|(r, v)| Complex64::new(r.re * v.re, 0.0)).collect();
    Observables {
        rho: SpectralField::from_padded_samples(grid, &rho, true),
        current: SpectralField::from_padded_samples(grid, &current, true),
        velocity: v,
    }
}

/// Spatial norms by collocation (rectangle rule).
pub fn l1_norm(field: &SpectralField) -> f64 {
    let n = field.grid().n_modes() as f64;
    field.samples().iter().map(|z| z.norm()).sum::<f64>() * field.grid().length() / n
}

pub fn linf_norm(field: &SpectralField) -> f64 {
    field.samples().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `L^2` norm from the coefficients (Parseval).
pub fn l2_norm(field: &SpectralField) -> f64 {
    field.mass().sqrt()
}

/// `L^2` norm from the collocation samples.
pub fn l2_norm_samples(field: &SpectralField) -> f64 {
    let n = field.grid().n_modes() as f64;
    (field.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() * field.grid().length() / n).sqrt()
}

fn check_aligned(lhs: &[f64], rhs: &[f64]) -> Result<()> {
    if lhs.len() != rhs.len() {
        return Err(Error::Misaligned(format!("{} vs {} samples", lhs.len(), rhs.len())));
    }
    for (k, (a, b)) in lhs.iter().zip(rhs).enumerate() {
        if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
            return Err(Error::Misaligned(format!("sample {k}: t={a} vs {b}")));
        }
    }
    Ok(())
}

/// `(sup_t ||u - v||_{L^2}, sup_t ||u - v||_{L^inf})`.
pub fn error_metrics(truth: &Trajectory<WaveField>, approx: &Trajectory<WaveField>) -> Result<(f64, f64)> {
    check_aligned(&truth.times, &approx.times)?;
    let mut l2: f64 = 0.0;
    let mut linf: f64 = 0.0;
    for (x, y) in truth.states.iter().zip(&approx.states) {
        if !x.grid().same_as(y.grid()) {
            return Err(Error::GridMismatch);
        }
        let d = &x.u - &y.u;
        l2 = l2.max(l2_norm(&d));
        linf = linf.max(linf_norm(&d));
    }
    Ok((l2, linf))
}

/// Sup-in-time `L^1` and `L^inf` distances of density and current.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObservableErrors {
    pub rho_l1: f64,
    pub rho_linf: f64,
    pub current_l1: f64,
    pub current_linf: f64,
}

pub fn observable_errors(truth: &Trajectory<WaveField>, limit: &Trajectory<WKBState>) -> Result<ObservableErrors> {
    check_aligned(&truth.times, &limit.times)?;
    let mut out = ObservableErrors::default();
    for (w, s) in truth.states.iter().zip(&limit.states) {
        if !w.grid().same_as(s.grid()) {
            return Err(Error::GridMismatch);
        }
        let x = observables(w);
        let y = observables_limit(s);
        let dr = &x.rho - &y.rho;
        let dj = &x.current - &y.current;
        out.rho_l1 = out.rho_l1.max(l1_norm(&dr));
        out.rho_linf = out.rho_linf.max(linf_norm(&dr));
        out.current_l1 = out.current_l1.max(l1_norm(&dj));
        out.current_linf = out.current_linf.max(linf_norm(&dj));
    }
    Ok(out)
}

/// `(|||phi_truth - phi_approx|||_{l+1,T}, |||a_truth - a_approx|||_{l,T})`.
pub fn triple_error(
    truth: &Trajectory<WKBState>,
    approx: &Trajectory<WKBState>,
    schedule: &WeightSchedule,
    ell: f64,
) -> Result<(f64, f64)> {
    trajectory_difference(truth, approx, schedule, ell)
}

/// Time derivative of sample `k` by centered differences: five points when
/// available (fourth order), otherwise three.
fn centered_rate(traj: &[SpectralField], k: usize, dt: f64) -> SpectralField {
    let n = traj.len();
    if n >= 5 && k >= 2 && k + 2 < n {
        let mut out = traj[k + 1].scaled(8.0 / (12.0 * dt));
        out.axpy(-8.0 / (12.0 * dt), &traj[k - 1]);
        out.axpy(-1.0 / (12.0 * dt), &traj[k + 2]);
        out.axpy(1.0 / (12.0 * dt), &traj[k - 2]);
        out
    } else {
        let mut out = traj[k + 1].scaled(0.5 / dt);
        out.axpy(-0.5 / dt, &traj[k - 1]);
        out
    }
}

/// Residuals of the compressible Euler system satisfied by `v = phi_x` and
/// `rho = |a|^2` along a limit trajectory:
/// `v_t + v v_x + (g(rho) v)_x / 2 + f(rho)_x` and `rho_t + (rho v)_x + Q(rho)_x`.
/// Returns the largest spatial `L^2` norm of each over interior samples where
/// the centered stencil fits (the two outermost samples on each side are
/// skipped when five or more samples exist).
pub fn euler_residual(limit: &Trajectory<WKBState>, spec: &NonlinearitySpec) -> Result<(f64, f64)> {
    let n = limit.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    let dt = limit.dt;
    let v: Vec<SpectralField> = limit.states.iter().map(|s| s.phi.dx()).collect();
    let rho: Vec<SpectralField> = limit.states.iter().map(|s| observables_limit(s).rho).collect();
    let margin = if n >= 5 { 2 } else { 1 };
    let mut worst = (0.0f64, 0.0f64);
    for k in margin..n - margin {
        let grid = v[k].grid();
        let vs = v[k].padded_samples();
        let vxs = v[k].dx().padded_samples();
        let rs = rho[k].padded_samples();
        let mut local = Vec::with_capacity(vs.len());
        let mut momentum_flux = Vec::with_capacity(vs.len());
        let mut mass_flux = Vec::with_capacity(vs.len());
        for i in 0..vs.len() {
            let (vi, ri) = (vs[i].re, rs[i].re.max(0.0));
            local.push(Complex64::new(vi * vxs[i].re, 0.0));
            momentum_flux.push(Complex64::new(0.5 * spec.g(ri) * vi + spec.f(ri), 0.0));
            mass_flux.push(Complex64::new(ri * vi + spec.q(ri), 0.0));
        }
        let mut r1 = centered_rate(&v, k, dt);
        r1.axpy(1.0, &SpectralField::from_padded_samples(grid, &local, true));
        r1.axpy(1.0, &SpectralField::from_padded_samples(grid, &momentum_flux, true).dx());
        let mut r2 = centered_rate(&rho, k, dt);
        r2.axpy(1.0, &SpectralField::from_padded_samples(grid, &mass_flux, true).dx());
        worst.0 = worst.0.max(l2_norm(&r1));
        worst.1 = worst.1.max(l2_norm(&r2));
    }
    Ok(worst)
}
