//! Direct solver for `i eps u_t = -(eps^2/2) u_xx - (i eps/2) (g(|u|^2) u)_x + f(|u|^2) u`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grenier::WKBState;
use crate::integrator::{fitted_step, march, DispersionHalfStep, Evolve, Trajectory};
use crate::nonlinearity::NonlinearitySpec;
use crate::spectral::{FourierGrid, SpectralField};

/// Largest tolerated fraction of mass above the 2/3-rule limit.
pub const TAIL_THRESHOLD: f64 = 1e-8;

/// Time step cap relative to `eps`.
pub const DT_PER_EPS: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct WaveField {
    pub u: SpectralField,
    pub eps: f64,
}

impl WaveField {
    pub fn new(u: SpectralField, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(Self { u, eps })
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.u.grid()
    }

    /// `int |u|^2 dx`.
    pub fn mass(&self) -> f64 {
        self.u.mass()
    }
}

impl Evolve for WaveField {
    fn axpy(&mut self, h: f64, rate: &Self) {
        self.u.axpy(h, &rate.u);
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            u: self.u.scaled(c),
            eps: self.eps,
        }
    }

    fn is_finite(&self) -> bool {
        self.u.is_finite()
    }

    fn magnitude(&self) -> f64 {
        self.mass().sqrt()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(())
}

/// `a exp(i phi / eps)` evaluated on the collocation points.
pub fn wkb_wave(phi: &SpectralField, a: &SpectralField, eps: f64) -> Result<WaveField> {
    check_eps(eps)?;
    if !phi.is_real() {
        return Err(Error::NotReal("phase"));
    }
    if !phi.grid().same_as(a.grid()) {
        return Err(Error::GridMismatch);
    }
    let samples: Vec<Complex64> = phi
        .real_samples()
        .into_iter()
        .zip(a.samples())
        .map(|(p, z)| z * Complex64::from_polar(1.0, p / eps))
        .collect();
    WaveField::new(SpectralField::from_samples(phi.grid(), &samples)?, eps)
}

/// WKB initial datum `a0 exp(i phi0 / eps)`.
pub fn assemble_initial(state0: &WKBState, eps: f64) -> Result<WaveField> {
    wkb_wave(&state0.phi, &state0.a, eps)
}

/// Fraction of `int |u|^2` carried by modes above the 2/3-rule limit.
pub fn tail_fraction(field: &SpectralField) -> f64 {
    let grid = field.grid();
    let limit = grid.dealias_limit();
    let mut tail = 0.0;
    let mut total = 0.0;
    for (k, c) in field.coefficients().iter().enumerate() {
        let m = c.norm_sqr();
        total += m;
        if grid.mode_of_slot(k).abs() > limit {
            tail += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

pub fn check_resolution(field: &SpectralField, t: f64) -> Result<()> {
    let tail = tail_fraction(field);
    if tail > TAIL_THRESHOLD {
        return Err(Error::Underresolved {
            t,
            tail,
            threshold: TAIL_THRESHOLD,
        });
    }
    Ok(())
}

/// Step actually used for a run: `min(dt_user, 0.1 eps)` shrunk to divide `horizon`.
pub fn nls_step(horizon: f64, dt_user: f64, eps: f64) -> f64 {
    fitted_step(horizon, dt_user.min(DT_PER_EPS * eps))
}

fn nonlinear_rate(u: &SpectralField, eps: f64, spec: &NonlinearitySpec) -> SpectralField {
    let grid = u.grid();
    let z = u.padded_samples();
    let mut flux = Vec::with_capacity(z.len());
    let mut local = Vec::with_capacity(z.len());
    let phase = Complex64::new(0.0, -1.0 / eps);
    for w in &z {
        let rho = w.norm_sqr();
        flux.push(w * spec.g(rho));
        local.push(w * phase * spec.f(rho));
    }
    let mut out = SpectralField::from_padded_samples(grid, &local, false);
    out.axpy(-0.5, &SpectralField::from_padded_samples(grid, &flux, false).dx());
    out
}

/// Integrates on `[0, horizon]` with step [`nls_step`]; the resolution guard
/// runs on every sample.
pub fn integrate_nls(
    u0: &WaveField,
    spec: &NonlinearitySpec,
    horizon: f64,
    dt_user: f64,
) -> Result<Trajectory<WaveField>> {
    check_eps(u0.eps)?;
    if !(horizon > 0.0 && dt_user > 0.0) {
        return Err(Error::StepMismatch { dt: dt_user, horizon });
    }
    let eps = u0.eps;
    let dt = nls_step(horizon, dt_user, eps);
    let steps = (horizon / dt).round() as usize;
    let half = DispersionHalfStep::new(u0.grid(), eps, dt);
    march(
        u0.clone(),
        dt,
        steps,
        "wave field",
        |w: &mut WaveField| half.apply(&mut w.u),
        |_, w| {
            Ok(WaveField {
                u: nonlinear_rate(&w.u, eps, spec),
                eps,
            })
        },
        |t, w| check_resolution(&w.u, t),
    )
}

fn plane_wave_mode(grid: &FourierGrid, k: f64, eps: f64) -> Result<i64> {
    let turns = k * grid.length() / (2.0 * std::f64::consts::PI * eps);
    let mode = turns.round();
    if (turns - mode).abs() > 1e-9 * turns.abs().max(1.0) {
        return Err(Error::IncompatiblePlaneWave { k });
    }
    Ok(mode as i64)
}

/// `A exp(i k x / eps)`; requires `k L / eps` to be a multiple of `2 pi`.
pub fn plane_wave(grid: &Arc<FourierGrid>, amplitude: f64, k: f64, eps: f64) -> Result<WaveField> {
    check_eps(eps)?;
    let mode = plane_wave_mode(grid, k, eps)?;
    let u = SpectralField::from_modes(grid, &[(mode, Complex64::new(amplitude, 0.0))], false)?;
    WaveField::new(u, eps)
}

/// `omega = k^2/2 + (k/2) g(A^2) + f(A^2)`.
pub fn plane_wave_frequency(amplitude: f64, k: f64, spec: &NonlinearitySpec) -> f64 {
    let rho = amplitude * amplitude;
    0.5 * k * k + 0.5 * k * spec.g(rho) + spec.f(rho)
}

/// Exact solution `A exp(i (k x - omega t) / eps)`.
pub fn plane_wave_exact(
    grid: &Arc<FourierGrid>,
    amplitude: f64,
    k: f64,
    eps: f64,
    spec: &NonlinearitySpec,
    t: f64,
) -> Result<WaveField> {
    let mode = plane_wave_mode(grid, k, eps)?;
    let omega = plane_wave_frequency(amplitude, k, spec);
    let c = Complex64::from_polar(amplitude, -omega * t / eps);
    WaveField::new(SpectralField::from_modes(grid, &[(mode, c)], false)?, eps)
}
