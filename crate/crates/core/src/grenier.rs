//! Phase/amplitude (Grenier) system, its `eps = 0` limit, the frozen
//! coefficient iteration that builds solutions, and the choice of `(M, T)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{march, step_count, DispersionHalfStep, Evolve, Stage, Trajectory};
use crate::nonlinearity::NonlinearitySpec;
use crate::spectral::{FourierGrid, SpectralField, TripleNormAccumulator, WeightSchedule, NOISE_FLOOR};

/// Real phase `phi` and complex amplitude `a` on one grid.
#[derive(Clone, Debug)]
pub struct WKBState {
    pub phi: SpectralField,
    pub a: SpectralField,
}

impl WKBState {
    pub fn new(phi: SpectralField, a: SpectralField) -> Result<Self> {
        if !phi.grid().same_as(a.grid()) {
            return Err(Error::GridMismatch);
        }
        if !phi.is_real() {
            return Err(Error::NotReal("phase"));
        }
        Ok(Self { phi, a })
    }

    pub fn zeros(grid: &Arc<FourierGrid>) -> Self {
        Self {
            phi: SpectralField::zeros(grid, true),
            a: SpectralField::zeros(grid, false),
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.phi.grid()
    }

    pub fn difference(&self, other: &WKBState) -> WKBState {
        WKBState {
            phi: &self.phi - &other.phi,
            a: &self.a - &other.a,
        }
    }

    /// Largest coefficient of either component.
    pub fn scale(&self) -> f64 {
        self.phi.max_abs_coefficient().max(self.a.max_abs_coefficient())
    }
}

impl Evolve for WKBState {
    fn axpy(&mut self, h: f64, rate: &Self) {
        self.phi.axpy(h, &rate.phi);
        self.a.axpy(h, &rate.a);
    }

    fn scaled(&self, c: f64) -> Self {
        Self {
            phi: self.phi.scaled(c),
            a: self.a.scaled(c),
        }
    }

    fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.a.is_finite()
    }

    fn magnitude(&self) -> f64 {
        (self.phi.mass() + self.a.mass()).sqrt()
    }
}

/// Time derivative of the Grenier system at semiclassical parameter `eps`.
pub fn rhs_grenier(state: &WKBState, eps: f64, spec: &NonlinearitySpec) -> Result<WKBState> {
    check_eps(eps)?;
    let mut rate = transport_part(state, spec);
    let dispersion = state.a.dxx().scaled_complex(Complex64::new(0.0, 0.5 * eps));
    rate.a.axpy(1.0, &dispersion);
    if !rate.is_finite() {
        return Err(Error::NonFinite { what: "grenier rhs", t: f64::NAN });
    }
    Ok(rate)
}

/// Everything in the Grenier right-hand side except `(i eps / 2) a_xx`.
fn transport_part(state: &WKBState, spec: &NonlinearitySpec) -> WKBState {
    let grid = state.grid();
    let px = state.phi.dx().padded_samples();
    let pxx = state.phi.dxx().padded_samples();
    let a = state.a.padded_samples();
    let ax = state.a.dx().padded_samples();

    let mut phi_t = Vec::with_capacity(a.len());
    let mut ga = Vec::with_capacity(a.len());
    let mut local = Vec::with_capacity(a.len());
    for k in 0..a.len() {
        let rho = a[k].norm_sqr();
        let v = px[k].re;
        let g = spec.g(rho);
        phi_t.push(Complex64::new(-0.5 * v * v - 0.5 * g * v - spec.f(rho), 0.0));
        ga.push(a[k] * g);
        local.push(-(ax[k] * v) - a[k] * (0.5 * pxx[k].re));
    }
    let flux = SpectralField::from_padded_samples(grid, &ga, false).dx();
    let mut a_t = SpectralField::from_padded_samples(grid, &local, false);
    a_t.axpy(-0.5, &flux);
    WKBState {
        phi: SpectralField::from_padded_samples(grid, &phi_t, true),
        a: a_t,
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(())
}

fn check_state(state: &WKBState) -> Result<()> {
    if !state.phi.grid().same_as(state.a.grid()) {
        return Err(Error::GridMismatch);
    }
    if !state.phi.is_real() {
        return Err(Error::NotReal("phase"));
    }
    Ok(())
}

fn amplitude_flow(grid: &Arc<FourierGrid>, eps: f64, dt: f64) -> impl Fn(&mut WKBState) {
    let half = DispersionHalfStep::new(grid, eps, dt);
    move |s: &mut WKBState| {
        if eps != 0.0 {
            half.apply(&mut s.a);
        }
    }
}

/// Solves the Grenier system on `[0, T]` with `T` taken from `schedule`.
pub fn integrate(
    state0: &WKBState,
    eps: f64,
    spec: &NonlinearitySpec,
    schedule: &WeightSchedule,
    dt: f64,
) -> Result<Trajectory<WKBState>> {
    integrate_until(state0, eps, spec, schedule.horizon(), dt)
}

/// As [`integrate`] with an explicit horizon.
pub fn integrate_until(
    state0: &WKBState,
    eps: f64,
    spec: &NonlinearitySpec,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory<WKBState>> {
    check_eps(eps)?;
    check_state(state0)?;
    let steps = step_count(horizon, dt)?;
    march(
        state0.clone(),
        dt,
        steps,
        "grenier state",
        amplitude_flow(state0.grid(), eps, dt),
        |_, s| Ok(transport_part(s, spec)),
        |_, _| Ok(()),
    )
}

/// The `eps = 0` limit system.
pub fn solve_limit(
    state0: &WKBState,
    spec: &NonlinearitySpec,
    schedule: &WeightSchedule,
    dt: f64,
) -> Result<Trajectory<WKBState>> {
    integrate(state0, 0.0, spec, schedule, dt)
}

/// Bound on the constant of the tame product estimate in `H^l_w` for our
/// norm normalisation on a period of `2 pi`. Random band-limited pairs give
/// about 0.24 at `l = 2`; the bound doubles that and grows with `l` like the
/// binomial weights in the product rule. The constant scales like `L^{-1/2}`
/// with the period.
pub fn tame_constant(ell: f64) -> f64 {
    TAME_BASE * 2f64.powf((ell - 2.0).max(0.0) / 2.0)
}

const TAME_BASE: f64 = 0.5;

/// Safety factor applied to the smallest admissible `M`.
pub const SAFETY: f64 = 2.0;

/// Smallest `M` making the iteration bounded and contracting, times
/// [`SAFETY`]; the horizon is `T = 0.9 w0 / M`.
///
/// `phi_norm` is the `H^{l+1}_{w0}` norm of the initial phase and `a_norm` the
/// `H^l_{w0}` norm of the initial amplitude.
pub fn select_m_t(
    ell: f64,
    phi_norm: f64,
    a_norm: f64,
    w0: f64,
    spec: &NonlinearitySpec,
) -> Result<WeightSchedule> {
    if !(ell > 1.0) {
        return Err(Error::InvalidSchedule(format!("regularity must exceed 1, got {ell}")));
    }
    for v in [phi_norm, a_norm] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::NegativeArgument(v));
        }
    }
    let c = tame_constant(ell);
    let p = phi_norm;
    let q = 2.0 * a_norm * a_norm;
    let gamma = spec.gamma() as i32;
    let sigma = spec.sigma() as i32;
    // bounded-iterate condition, quadratic in M^2
    let big = 32.0 * c * c * p * p + 8.0 * c * c * (16.0 * p.powi(4) + q.powi(2 * sigma)).sqrt();
    let m_min = [
        c,
        big.sqrt(),
        4.0 * c * q.powi(gamma),
        4.0 * c * p,
        4.0 * c * a_norm.powi(2 * gamma),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let m = SAFETY * m_min;
    WeightSchedule::new(w0, m, 0.9 * w0 / m)
}

/// Per-iteration triple norms of successive differences and their ratios.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemeDiagnostics {
    /// `|||phi_j - phi_{j-1}|||_{l+1,T}` for `j = 1, 2, ...`
    pub phase_differences: Vec<f64>,
    /// `|||a_j - a_{j-1}|||_{l,T}`
    pub amplitude_differences: Vec<f64>,
    /// `ratios[k]` compares difference `k + 2` to difference `k + 1`.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

impl SchemeDiagnostics {
    pub fn iterations(&self) -> usize {
        self.phase_differences.len()
    }

    /// Combined difference at iteration `j >= 1`.
    pub fn difference(&self, j: usize) -> f64 {
        self.phase_differences[j - 1] + self.amplitude_differences[j - 1]
    }
}

/// Builds the solution as the limit of the linear problems in which the
/// coefficients come from the previous iterate. Iterate 0 is the initial data
/// held constant in time. Stops once the combined triple-norm difference
/// drops below `tol`, after `j_max` iterations, or with an error once the
/// ratio exceeds 1 three times in a row.
#[allow(clippy::too_many_arguments)]
pub fn iterate_scheme(
    state0: &WKBState,
    eps: f64,
    spec: &NonlinearitySpec,
    schedule: &WeightSchedule,
    dt: f64,
    ell: f64,
    j_max: usize,
    tol: f64,
) -> Result<(Trajectory<WKBState>, SchemeDiagnostics)> {
    check_eps(eps)?;
    check_state(state0)?;
    if j_max < 2 {
        return Err(Error::InvalidIterationCount(j_max));
    }
    let steps = step_count(schedule.horizon(), dt)?;
    let mut current = Trajectory {
        dt,
        times: (0..=steps).map(|k| k as f64 * dt).collect(),
        states: vec![state0.clone(); steps + 1],
    };
    let mut diag = SchemeDiagnostics::default();
    let mut rising = 0;
    for j in 1..=j_max {
        let next = march(
            state0.clone(),
            dt,
            steps,
            "scheme iterate",
            amplitude_flow(state0.grid(), eps, dt),
            |stage: Stage, s: &WKBState| Ok(frozen_rate(s, &current.at_stage(stage), spec)),
            |_, _| Ok(()),
        )?;
        let (dphi, da) = trajectory_difference(&next, &current, schedule, ell)?;
        diag.phase_differences.push(dphi);
        diag.amplitude_differences.push(da);
        current = next;
        let total = dphi + da;
        if j >= 2 {
            let previous = diag.difference(j - 1);
            let ratio = if previous > 0.0 { total / previous } else { 0.0 };
            diag.ratios.push(ratio);
            rising = if ratio > 1.0 { rising + 1 } else { 0 };
            if rising >= 3 {
                return Err(Error::Divergence { iteration: j, ratio });
            }
        }
        if total < tol {
            diag.converged = true;
            break;
        }
    }
    Ok((current, diag))
}

/// Right-hand side of the linear problem for iterate `j + 1`, without the
/// dispersive term, given the coefficients `frozen` from iterate `j`.
fn frozen_rate(s: &WKBState, frozen: &WKBState, spec: &NonlinearitySpec) -> WKBState {
    let grid = s.grid();
    let pj_x = frozen.phi.dx().padded_samples();
    let pj_xx = frozen.phi.dxx().padded_samples();
    let aj = frozen.a.padded_samples();
    let aj_x = frozen.a.dx().padded_samples();
    let p_x = s.phi.dx().padded_samples();
    let a = s.a.padded_samples();
    let a_x = s.a.dx().padded_samples();

    let mut g_j = Vec::with_capacity(a.len());
    for z in &aj {
        g_j.push(Complex64::new(spec.g(z.norm_sqr()), 0.0));
    }
    let g_j_x = SpectralField::from_padded_samples(grid, &g_j, true).dx().padded_samples();

    let mut phi_t = Vec::with_capacity(a.len());
    let mut a_t = Vec::with_capacity(a.len());
    for k in 0..a.len() {
        let rho = aj[k].norm_sqr();
        let v = pj_x[k].re;
        phi_t.push(Complex64::new(
            -0.5 * v * p_x[k].re - 0.5 * g_j[k].re * p_x[k].re - spec.f(rho),
            0.0,
        ));
        let coefficient = 0.5 * pj_xx[k].re + 0.5 * g_j_x[k].re;
        a_t.push(
            -(a_x[k] * v) - a[k] * coefficient - aj[k].conj() * a[k] * aj_x[k] * (0.5 * spec.h(rho)),
        );
    }
    WKBState {
        phi: SpectralField::from_padded_samples(grid, &phi_t, true),
        a: SpectralField::from_padded_samples(grid, &a_t, false),
    }
}

/// `(|||dphi|||_{l+1,T}, |||da|||_{l,T})` for `d = lhs - rhs`, with a noise
/// cut scaled to the operands.
pub fn trajectory_difference(
    lhs: &Trajectory<WKBState>,
    rhs: &Trajectory<WKBState>,
    schedule: &WeightSchedule,
    ell: f64,
) -> Result<(f64, f64)> {
    if lhs.len() != rhs.len() {
        return Err(Error::Misaligned(format!("{} vs {} samples", lhs.len(), rhs.len())));
    }
    let scale = lhs
        .states
        .iter()
        .chain(&rhs.states)
        .map(WKBState::scale)
        .fold(0.0, f64::max);
    let floor = NOISE_FLOOR * scale;
    let mut phase = TripleNormAccumulator::new(ell + 1.0, *schedule).with_floor(floor);
    let mut amplitude = TripleNormAccumulator::new(ell, *schedule).with_floor(floor);
    for (k, (x, y)) in lhs.states.iter().zip(&rhs.states).enumerate() {
        let t = lhs.times[k];
        if (t - rhs.times[k]).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(Error::Misaligned(format!("sample {k}: t={t} vs {}", rhs.times[k])));
        }
        if !x.grid().same_as(y.grid()) {
            return Err(Error::GridMismatch);
        }
        let d = x.difference(y);
        phase.observe(t, &d.phi)?;
        amplitude.observe(t, &d.a)?;
    }
    Ok((phase.finalize(), amplitude.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn spec() -> NonlinearitySpec {
        NonlinearitySpec::new(1.0, 1, 1.0, 1).unwrap()
    }

    fn bump(grid: &Arc<FourierGrid>) -> WKBState {
        WKBState::new(
            SpectralField::from_real_fn(grid, |x| 0.3 * x.sin()),
            SpectralField::from_fn(grid, |x| Complex64::new((0.5 * (x.cos() - 1.0)).exp(), 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn constant_state_rates() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let c = Complex64::new(0.6, 0.8);
        let s = WKBState::new(SpectralField::zeros(&g, true), SpectralField::from_fn(&g, |_| c)).unwrap();
        let sp = NonlinearitySpec::new(0.7, 2, 1.3, 2).unwrap();
        let r = rhs_grenier(&s, 0.4, &sp).unwrap();
        let expect = -sp.f(1.0);
        for v in r.phi.real_samples() {
            assert!((v - expect).abs() < 1e-13);
        }
        assert!(r.a.max_abs_coefficient() < 1e-13);
    }

    #[test]
    fn rhs_is_affine_in_eps() {
        let g = make_grid(32, 2.0 * PI).unwrap();
        let s = bump(&g);
        let r0 = rhs_grenier(&s, 0.0, &spec()).unwrap();
        let r1 = rhs_grenier(&s, 1.0, &spec()).unwrap();
        let half_lap = s.a.dxx().scaled_complex(Complex64::new(0.0, 0.5));
        let diff = &(&r1.a - &r0.a) - &half_lap;
        assert!(diff.max_abs_coefficient() <= 1e-15 * half_lap.max_abs_coefficient());
        assert_eq!((&r1.phi - &r0.phi).max_abs_coefficient(), 0.0);
    }

    #[test]
    fn rejects_bad_eps_and_complex_phase() {
        let g = make_grid(16, 1.0).unwrap();
        let s = WKBState::zeros(&g);
        assert_eq!(rhs_grenier(&s, 1.5, &spec()).unwrap_err(), Error::InvalidEpsilon(1.5));
        let z = SpectralField::zeros(&g, false);
        assert!(WKBState::new(z.clone(), z).is_err());
    }

    #[test]
    fn constant_data_exact_solution() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let c = Complex64::new(0.5, -0.3);
        let s0 = WKBState::new(SpectralField::zeros(&g, true), SpectralField::from_fn(&g, |_| c)).unwrap();
        let sp = spec();
        let traj = integrate_until(&s0, 0.3, &sp, 0.5, 0.01).unwrap();
        let t = traj.horizon();
        for v in traj.last().phi.real_samples() {
            assert!((v + t * sp.f(c.norm_sqr())).abs() < 1e-10);
        }
        for z in traj.last().a.samples() {
            assert!((z - c).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let traj = integrate_until(&WKBState::zeros(&g), 0.2, &spec(), 0.1, 0.01).unwrap();
        assert!(traj.states.iter().all(|s| s.scale() == 0.0));
    }

    #[test]
    fn phase_stays_real() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let traj = integrate_until(&bump(&g), 0.1, &spec(), 0.2, 0.01).unwrap();
        for s in &traj.states {
            assert!(s.phi.is_real());
            assert!(s.phi.hermitian_defect() < 1e-10);
        }
    }

    #[test]
    fn fourth_order_self_convergence() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let s0 = bump(&g);
        let t = 0.4;
        let end = |dt: f64| integrate_until(&s0, 0.1, &spec(), t, dt).unwrap().last().clone();
        let reference = end(0.0125 / 8.0);
        let err = |s: WKBState| {
            let d = s.difference(&reference);
            d.phi.max_abs_coefficient() + d.a.max_abs_coefficient()
        };
        let e1 = err(end(0.025));
        let e2 = err(end(0.0125));
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn limit_mass_conserved_without_g() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let sp = NonlinearitySpec::new(0.0, 1, 1.0, 1).unwrap();
        let s0 = bump(&g);
        let traj = integrate_until(&s0, 0.0, &sp, 0.5, 0.005).unwrap();
        let m0 = s0.a.mass();
        for s in &traj.states {
            assert!((s.a.mass() - m0).abs() <= 1e-8 * m0);
        }
    }

    #[test]
    fn schedule_selection_is_monotone() {
        let sp = spec();
        let base = select_m_t(2.0, 1.0, 1.0, 0.5, &sp).unwrap();
        let bigger_a = select_m_t(2.0, 1.0, 2.0, 0.5, &sp).unwrap();
        let bigger_l = select_m_t(3.0, 1.0, 1.0, 0.5, &sp).unwrap();
        assert!(bigger_a.rate() >= base.rate());
        assert!(bigger_l.rate() >= base.rate());
        assert!((base.horizon() - 0.9 * 0.5 / base.rate()).abs() < 1e-15);
        let zero = select_m_t(2.0, 0.0, 0.0, 0.5, &sp).unwrap();
        assert!((zero.rate() - SAFETY * tame_constant(2.0)).abs() < 1e-15);
        assert!(select_m_t(1.0, 1.0, 1.0, 0.5, &sp).is_err());
    }

    #[test]
    fn scheme_on_zero_data_converges_at_once() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let sp = NonlinearitySpec::new(1.0, 1, 0.0, 1).unwrap();
        let sched = WeightSchedule::new(0.5, 1.0, 0.1).unwrap();
        let (traj, diag) = iterate_scheme(&WKBState::zeros(&g), 0.1, &sp, &sched, 0.01, 2.0, 5, 1e-12).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.iterations(), 1);
        assert!(traj.states.iter().all(|s| s.scale() == 0.0));
        assert_eq!(
            iterate_scheme(&WKBState::zeros(&g), 0.1, &sp, &sched, 0.01, 2.0, 1, 1e-12).unwrap_err(),
            Error::InvalidIterationCount(1)
        );
    }

    #[test]
    fn scheme_converges_to_direct_solution() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let s0 = bump(&g);
        let sp = spec();
        let sched = WeightSchedule::new(0.5, 2.0, 0.05).unwrap();
        let dt = 0.001;
        let (fixed, diag) = iterate_scheme(&s0, 0.1, &sp, &sched, dt, 2.0, 30, 1e-11).unwrap();
        assert!(diag.converged, "{diag:?}");
        assert!(diag.ratios.iter().skip(1).all(|&r| r < 1.0), "{diag:?}");
        let direct = integrate(&s0, 0.1, &sp, &sched, dt).unwrap();
        let (dp, da) = trajectory_difference(&fixed, &direct, &sched, 2.0).unwrap();
        assert!(dp + da < 1e-8, "{dp} {da}");
    }
}
