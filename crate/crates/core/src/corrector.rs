//! First-order corrector: the limit system linearized about a background
//! solution and driven by `(i/2) a_xx`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grenier::WKBState;
use crate::integrator::{march, Evolve, Stage, Trajectory};
use crate::nonlinearity::NonlinearitySpec;
use crate::spectral::{FourierGrid, SpectralField};

#[derive(Clone, Debug)]
pub struct CorrectorState {
    pub phi1: SpectralField,
    pub a1: SpectralField,
}

impl CorrectorState {
    pub fn new(phi1: SpectralField, a1: SpectralField) -> Result<Self> {
        if !phi1.grid().same_as(a1.grid()) {
            return Err(Error::GridMismatch);
        }
        if !phi1.is_real() {
            return Err(Error::NotReal("phase corrector"));
        }
        Ok(Self { phi1, a1 })
    }

    pub fn zeros(grid: &Arc<FourierGrid>) -> Self {
        Self {
            phi1: SpectralField::zeros(grid, true),
            a1: SpectralField::zeros(grid, false),
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.phi1.grid()
    }
}

impl Evolve for CorrectorState {
    fn axpy(&mut self, h: f64, rate: &Self) {
        self.phi1.axpy(h, &rate.phi1);
        self.a1.axpy(h, &rate.a1);
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            phi1: self.phi1.scaled(c),
            a1: self.a1.scaled(c),
        }
    }

    fn is_finite(&self) -> bool {
        self.phi1.is_finite() && self.a1.is_finite()
    }

    fn magnitude(&self) -> f64 {
        (self.phi1.mass() + self.a1.mass()).sqrt()
    }
}

/// Time derivative of the corrector along the background state.
pub fn rhs_linearized(
    corr: &CorrectorState,
    background: &WKBState,
    spec: &NonlinearitySpec,
) -> Result<CorrectorState> {
    if !corr.grid().same_as(background.grid()) {
        return Err(Error::GridMismatch);
    }
    let rate = linear_rate(corr, background, spec);
    if !rate.is_finite() {
        return Err(Error::NonFinite {
            what: "corrector rhs",
            t: f64::NAN,
        });
    }
    Ok(rate)
}

fn linear_rate(corr: &CorrectorState, bg: &WKBState, spec: &NonlinearitySpec) -> CorrectorState {
    let grid = corr.grid();
    let v = bg.phi.dx().padded_samples();
    let vx = bg.phi.dxx().padded_samples();
    let a = bg.a.padded_samples();
    let ax = bg.a.dx().padded_samples();
    let q = corr.phi1.dx().padded_samples();
    let qx = corr.phi1.dxx().padded_samples();
    let b = corr.a1.padded_samples();
    let bx = corr.a1.dx().padded_samples();

    let len = a.len();
    let mut phi_t = Vec::with_capacity(len);
    let mut flux = Vec::with_capacity(len);
    let mut local = Vec::with_capacity(len);
    for k in 0..len {
        let rho = a[k].norm_sqr();
        let (g, gp) = (spec.g(rho), spec.g_prime(rho));
        let re = (a[k].conj() * b[k]).re;
        let vk = v[k].re;
        phi_t.push(Complex64::new(
            -(vk + 0.5 * g) * q[k].re - (gp * vk + 2.0 * spec.f_prime(rho)) * re,
            0.0,
        ));
        flux.push(b[k] * g + a[k] * (2.0 * gp * re));
        local.push(-(bx[k] * vk) - b[k] * (0.5 * vx[k].re) - ax[k] * q[k].re - a[k] * (0.5 * qx[k].re));
    }
    let mut a_t = SpectralField::from_padded_samples(grid, &local, false);
    a_t.axpy(-0.5, &SpectralField::from_padded_samples(grid, &flux, false).dx());
    a_t.axpy(1.0, &bg.a.dxx().scaled_complex(Complex64::new(0.0, 0.5)));
    CorrectorState {
        phi1: SpectralField::from_padded_samples(grid, &phi_t, true),
        a1: a_t,
    }
}

/// Integrates the corrector over the background's time grid. Runge-Kutta
/// midpoints read the background by cubic interpolation in time.
pub fn integrate_corrector(
    corr0: &CorrectorState,
    background: &Trajectory<WKBState>,
    spec: &NonlinearitySpec,
) -> Result<Trajectory<CorrectorState>> {
    if background.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: background.len(),
        });
    }
    if !corr0.grid().same_as(background.states[0].grid()) {
        return Err(Error::GridMismatch);
    }
    if !corr0.phi1.is_real() {
        return Err(Error::NotReal("phase corrector"));
    }
    march(
        corr0.clone(),
        background.dt,
        background.len() - 1,
        "corrector",
        |_: &mut CorrectorState| {},
        |stage: Stage, c: &CorrectorState| Ok(linear_rate(c, &background.at_stage(stage), spec)),
        |_, _| Ok(()),
    )
}
