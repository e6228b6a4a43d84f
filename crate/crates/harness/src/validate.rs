//! Named structural checks with measured values.

use std::sync::Arc;

use anyhow::{Context, Result};
use dnls_wkb_core::grenier::{integrate_until, tame_constant, trajectory_difference};
use dnls_wkb_core::integrator::fitted_step;
use dnls_wkb_core::nls::{plane_wave, plane_wave_exact};
use dnls_wkb_core::spectral::{analytic_norm, norm_evolution_residual, sobolev_norm};
use dnls_wkb_core::wkb::{euler_residual, l2_norm};
use dnls_wkb_core::{
    integrate, integrate_nls, iterate_scheme, make_grid, rhs_grenier, rhs_linearized, CorrectorState,
    FourierGrid, NonlinearitySpec, SpectralField, WKBState, WeightSchedule,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::report::{Check, Threshold};
use crate::sweep::{select_schedule, Plan, MASS_TOLERANCE};

const SEED: u64 = 20_240_611;
pub const TAME_PAIRS: usize = 200;
pub const TAME_WEIGHTS: [f64; 3] = [0.0, 0.25, 1.0];

/// Horizon and rate of the short runs behind the structural checks.
pub const DIAGNOSTIC_RATE: f64 = 1.0;
pub const DIAGNOSTIC_HORIZON: f64 = 0.2;

/// Result of the tame-product experiment.
#[derive(Clone, Debug)]
pub struct TameRatios {
    /// `ratios[i][k]` for weight `TAME_WEIGHTS[i]` and pair `k`.
    pub ratios: Vec<Vec<f64>>,
}

impl TameRatios {
    pub fn constant(&self, i: usize) -> f64 {
        self.ratios[i].iter().copied().fold(0.0, f64::max)
    }

    /// Largest over smallest per-weight constant.
    pub fn variation(&self) -> f64 {
        let c: Vec<f64> = (0..self.ratios.len()).map(|i| self.constant(i)).collect();
        c.iter().copied().fold(0.0, f64::max) / c.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest ratio at any weight over the median at `w = 0`.
    pub fn excess_over_median(&self) -> f64 {
        let mut base = self.ratios[0].clone();
        base.sort_by(f64::total_cmp);
        let median = base[base.len() / 2];
        let worst = self.ratios.iter().flatten().copied().fold(0.0, f64::max);
        worst / median
    }

    pub fn max(&self) -> f64 {
        self.ratios.iter().flatten().copied().fold(0.0, f64::max)
    }
}

fn random_band_limited(grid: &Arc<FourierGrid>, rng: &mut ChaCha8Rng, band: i64) -> SpectralField {
    let decay = rng.gen_range(0.0..0.6);
    let modes: Vec<(i64, Complex64)> = (-band..=band)
        .map(|m| {
            let size = (-decay * m.abs() as f64).exp();
            (m, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * size)
        })
        .collect();
    SpectralField::from_modes(grid, &modes, false).expect("band fits the grid")
}

/// `||p q||_{m,w} / (||p||_{m,w} ||q||_{s,w} + ||p||_{s,w} ||q||_{m,w})` with
/// `m = l + 1/2`, `s = l` over random pairs whose product is resolved exactly.
pub fn tame_ratios(grid: &Arc<FourierGrid>, ell: f64, pairs: usize, seed: u64) -> Result<TameRatios> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_band = (grid.n_modes() as i64 / 6).clamp(1, 16);
    let (m, s) = (ell + 0.5, ell);
    let mut ratios = vec![Vec::with_capacity(pairs); TAME_WEIGHTS.len()];
    for _ in 0..pairs {
        let band = rng.gen_range(1..=max_band);
        let p = random_band_limited(grid, &mut rng, band);
        let band = rng.gen_range(1..=max_band);
        let q = random_band_limited(grid, &mut rng, band);
        let pq = p.product(&q)?;
        for (i, &w) in TAME_WEIGHTS.iter().enumerate() {
            let num = analytic_norm(&pq, w, m)?;
            let den = analytic_norm(&p, w, m)? * analytic_norm(&q, w, s)? + analytic_norm(&p, w, s)? * analytic_norm(&q, w, m)?;
            ratios[i].push(num / den);
        }
    }
    Ok(TameRatios { ratios })
}

fn diagnostic_schedule(w0: f64) -> Result<WeightSchedule> {
    Ok(WeightSchedule::new(
        w0,
        DIAGNOSTIC_RATE,
        DIAGNOSTIC_HORIZON.min(0.5 * w0 / DIAGNOSTIC_RATE),
    )?)
}

fn max_eps(config: &ExperimentConfig) -> f64 {
    config.sweep.epsilons.iter().copied().fold(0.0, f64::max)
}

/// Norm-evolution identity along a Grenier run on the diagnostic schedule.
pub fn evolution_residual(config: &ExperimentConfig) -> Result<f64> {
    let grid = config.make_grid()?;
    let spec = config.spec();
    let ell = config.regularity.ell;
    let schedule = diagnostic_schedule(config.weight.w0)?;
    let eps = max_eps(config);
    let dt = fitted_step(schedule.horizon(), 1e-3);
    let traj = integrate(&config.initial_state_at(&grid, eps)?, eps, &spec, &schedule, dt)?;
    let rates = traj
        .states
        .iter()
        .map(|s| rhs_grenier(s, eps, &spec))
        .collect::<dnls_wkb_core::Result<Vec<_>>>()?;
    let a: Vec<SpectralField> = traj.states.iter().map(|s| s.a.clone()).collect();
    let a_t: Vec<SpectralField> = rates.iter().map(|s| s.a.clone()).collect();
    let phi: Vec<SpectralField> = traj.states.iter().map(|s| s.phi.clone()).collect();
    let phi_t: Vec<SpectralField> = rates.into_iter().map(|s| s.phi).collect();
    let ra = norm_evolution_residual(&traj.times, &a, &a_t, schedule, ell)?;
    let rp = norm_evolution_residual(&traj.times, &phi, &phi_t, schedule, ell + 1.0)?;
    Ok(ra.max(rp))
}

/// Largest `||psi||_{H^l} / ||psi||_{H^l_w}` over random fields and weights.
pub fn obvious_ratio(grid: &Arc<FourierGrid>, ell: f64, fields: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_band = (grid.n_modes() as i64 / 2 - 1).min(40);
    let mut worst: f64 = 0.0;
    for _ in 0..fields {
        let band = rng.gen_range(1..=max_band);
        let psi = random_band_limited(grid, &mut rng, band);
        let w = rng.gen_range(0.0..1.0);
        worst = worst.max(sobolev_norm(&psi, ell)? / analytic_norm(&psi, w, ell)?);
    }
    Ok(worst)
}

/// Relative sup-in-time error of a plane wave with `A = 1`.
pub fn plane_wave_error(config: &ExperimentConfig) -> Result<f64> {
    let grid = config.make_grid()?;
    let spec = config.spec();
    let eps = max_eps(config);
    let k = 3.0 * 2.0 * std::f64::consts::PI * eps / grid.length();
    let horizon = diagnostic_schedule(config.weight.w0)?.horizon();
    let u0 = plane_wave(&grid, 1.0, k, eps)?;
    let traj = integrate_nls(&u0, &spec, horizon, config.solver.dt)?;
    let mut worst: f64 = 0.0;
    for (t, w) in traj.times.iter().zip(&traj.states) {
        let exact = plane_wave_exact(&grid, 1.0, k, eps, &spec, *t)?;
        worst = worst.max(l2_norm(&(&w.u - &exact.u)) / l2_norm(&exact.u));
    }
    Ok(worst)
}

/// Distance from `phi = -t f(|c|^2)`, `a = c` for constant data.
pub fn constant_state_error(config: &ExperimentConfig) -> Result<f64> {
    let grid = config.make_grid()?;
    let spec = config.spec();
    let eps = max_eps(config);
    let c = Complex64::new(0.6, 0.3);
    let s0 = WKBState::new(SpectralField::zeros(&grid, true), SpectralField::from_fn(&grid, |_| c))?;
    let horizon = diagnostic_schedule(config.weight.w0)?.horizon();
    let traj = integrate_until(&s0, eps, &spec, horizon, fitted_step(horizon, 1e-3))?;
    let rate = spec.f(c.norm_sqr());
    let mut worst: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let phi = SpectralField::from_real_fn(&grid, |_| -t * rate);
        worst = worst
            .max((&s.phi - &phi).max_abs_coefficient())
            .max((&s.a - &s0.a).max_abs_coefficient());
    }
    Ok(worst)
}

/// A single Fourier mode under the linear flow, relative error.
pub fn free_mode_error(config: &ExperimentConfig) -> Result<f64> {
    let grid = config.make_grid()?;
    let free = NonlinearitySpec::new(0.0, 1, 0.0, 1)?;
    let eps = max_eps(config);
    let mode = 5i64.min(grid.n_modes() as i64 / 4);
    let xi = 2.0 * std::f64::consts::PI * mode as f64 / grid.length();
    let u0 = dnls_wkb_core::WaveField::new(
        SpectralField::from_modes(&grid, &[(mode, Complex64::new(1.0, 0.0))], false)?,
        eps,
    )?;
    let horizon = diagnostic_schedule(config.weight.w0)?.horizon();
    let traj = integrate_nls(&u0, &free, horizon, config.solver.dt)?;
    let mut worst: f64 = 0.0;
    for (t, w) in traj.times.iter().zip(&traj.states) {
        let c = Complex64::from_polar(1.0, -0.5 * eps * xi * xi * t);
        let exact = SpectralField::from_modes(&grid, &[(mode, c)], false)?;
        worst = worst.max(l2_norm(&(&w.u - &exact)) / l2_norm(&exact));
    }
    Ok(worst)
}

/// Mass drift of the NLS run at `eps = 0.1` from the configured data.
pub fn mass_drift(config: &ExperimentConfig) -> Result<f64> {
    let grid = config.make_grid()?;
    let spec = config.spec();
    let eps = 0.1;
    let horizon = diagnostic_schedule(config.weight.w0)?.horizon();
    let u0 = dnls_wkb_core::assemble_initial(&config.initial_state_at(&grid, eps)?, eps)?;
    let traj = integrate_nls(&u0, &spec, horizon, config.solver.dt)?;
    let m0 = traj.states[0].mass();
    Ok(traj.states.iter().map(|w| (w.mass() - m0).abs() / m0).fold(0.0, f64::max))
}

/// Euler residual at `n = 128`, `dt = 1e-3`, and its observed order from
/// `dt = 0.04` to `dt = 0.02`.
pub fn euler_check(config: &ExperimentConfig) -> Result<(f64, f64)> {
    let grid = make_grid(128, config.grid.length)?;
    let spec = config.spec();
    let s0 = config.initial_state(&grid)?;
    let horizon = diagnostic_schedule(config.weight.w0)?.horizon();
    let residual = |dt: f64| -> Result<f64> {
        let traj = integrate_until(&s0, 0.0, &spec, horizon, fitted_step(horizon, dt))?;
        let (r1, r2) = euler_residual(&traj, &spec)?;
        Ok(r1 + r2)
    };
    let fine = residual(1e-3)?;
    let order = (residual(0.04)? / residual(0.02)?).log2();
    Ok((fine, order))
}

/// Runs the iterative scheme on the schedule chosen by
/// [`select_m_t`](dnls_wkb_core::select_m_t) and compares its fixed point with
/// the direct solve. The ratio reported is the largest from iteration 3 on.
pub fn iteration_check(config: &ExperimentConfig) -> Result<(f64, bool, f64)> {
    let grid = config.make_grid()?;
    let spec = config.spec();
    let ell = config.regularity.ell;
    let eps = max_eps(config);
    // the selected schedule, whatever the overrides say
    let mut selected = config.clone();
    selected.weight.m = None;
    selected.weight.t = None;
    let schedule = select_schedule(&selected, &grid, &spec, &config.sweep.epsilons)?;
    let dt = fitted_step(schedule.horizon(), config.solver.dt.min(0.1 * eps));
    let s0 = config.initial_state_at(&grid, eps)?;
    let (fixed, diag) = iterate_scheme(&s0, eps, &spec, &schedule, dt, ell, 40, 1e-11)?;
    let direct = integrate(&s0, eps, &spec, &schedule, dt)?;
    let (dp, da) = trajectory_difference(&fixed, &direct, &schedule, ell)?;
    let ratio = diag.ratios.iter().skip(1).copied().fold(0.0, f64::max);
    Ok((ratio, diag.converged, dp + da))
}

/// Gap between `rhs_linearized` and the centered difference of `rhs_grenier`
/// at `eps = 0` plus the `(i/2) a_xx` source.
pub fn linearization_gap(config: &ExperimentConfig, tau: f64) -> Result<f64> {
    let grid = config.make_grid()?;
    let spec = config.spec();
    let bg = config.initial_state(&grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut phase = Vec::new();
    let mut amp = Vec::new();
    for m in 1..=4i64 {
        let c = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        phase.push((m, c));
        phase.push((-m, c.conj()));
    }
    for m in -4..=4i64 {
        amp.push((m, Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))));
    }
    let dir = CorrectorState::new(
        SpectralField::from_modes(&grid, &phase, true)?,
        SpectralField::from_modes(&grid, &amp, false)?,
    )?;
    let lin = rhs_linearized(&dir, &bg, &spec)?;
    let shift = |s: f64| WKBState {
        phi: &bg.phi + &dir.phi1.scaled(s),
        a: &bg.a + &dir.a1.scaled(s),
    };
    let up = rhs_grenier(&shift(tau), 0.0, &spec)?;
    let down = rhs_grenier(&shift(-tau), 0.0, &spec)?;
    let fd_phi = (&up.phi - &down.phi).scaled(0.5 / tau);
    let fd_a = &(&up.a - &down.a).scaled(0.5 / tau) + &bg.a.derivative(2)?.scaled_complex(Complex64::new(0.0, 0.5));
    Ok((&lin.phi1 - &fd_phi)
        .max_abs_coefficient()
        .max((&lin.a1 - &fd_a).max_abs_coefficient()))
}

fn measured(name: &str, threshold: Threshold, value: Result<f64>) -> Check {
    match value {
        Ok(v) => Check::new(name, v, threshold),
        Err(e) => {
            log::warn!("check {name} could not run: {e:#}");
            Check::failed(name, threshold)
        }
    }
}

/// Every named check; failures never abort the suite.
pub fn validate(config: &ExperimentConfig) -> Vec<Check> {
    let ell = config.regularity.ell;
    let mut checks = Vec::new();

    match config.make_grid().map_err(anyhow::Error::from).and_then(|g| tame_ratios(&g, ell, TAME_PAIRS, SEED)) {
        Ok(t) => {
            checks.push(Check::new("tame_variation", t.variation(), Threshold::Lt(3.0)));
            checks.push(Check::new("tame_excess_over_median", t.excess_over_median(), Threshold::Le(10.0)));
            checks.push(Check::new("tame_constant_bound", t.max(), Threshold::Le(tame_constant(ell))));
        }
        Err(e) => {
            log::warn!("tame check could not run: {e:#}");
            checks.push(Check::failed("tame_variation", Threshold::Lt(3.0)));
        }
    }
    checks.push(measured("evolution_identity", Threshold::Le(1e-3), evolution_residual(config)));
    checks.push(measured(
        "obvious_inequality",
        Threshold::Le(1.0),
        config.make_grid().map_err(anyhow::Error::from).and_then(|g| obvious_ratio(&g, ell, 100, SEED + 1)),
    ));
    checks.push(measured("plane_wave", Threshold::Le(1e-8), plane_wave_error(config)));
    checks.push(measured("constant_grenier", Threshold::Le(1e-10), constant_state_error(config)));
    checks.push(measured("free_schrodinger", Threshold::Le(1e-10), free_mode_error(config)));
    checks.push(measured("mass_conservation", Threshold::Le(MASS_TOLERANCE), mass_drift(config)));
    match euler_check(config) {
        Ok((fine, order)) => {
            checks.push(Check::new("euler_residual", fine, Threshold::Le(1e-4)));
            checks.push(Check::new("euler_order", order, Threshold::Ge(3.5)));
        }
        Err(e) => {
            log::warn!("euler check could not run: {e:#}");
            checks.push(Check::failed("euler_residual", Threshold::Le(1e-4)));
        }
    }
    match a_priori(config) {
        Ok((a, p)) => {
            checks.push(Check::new("apriori_amplitude", a, Threshold::Le(1.0)));
            checks.push(Check::new("apriori_phase", p, Threshold::Le(1.0)));
        }
        Err(e) => {
            log::warn!("a priori check could not run: {e:#}");
            checks.push(Check::failed("apriori_amplitude", Threshold::Le(1.0)));
        }
    }
    match iteration_check(config) {
        Ok((ratio, converged, gap)) => {
            checks.push(Check::new("iteration_contraction", ratio, Threshold::Lt(1.0)));
            checks.push(Check::new(
                "iteration_converged",
                if converged { 1.0 } else { 0.0 },
                Threshold::Ge(1.0),
            ));
            checks.push(Check::new("iteration_fixed_point", gap, Threshold::Le(1e-6)));
        }
        Err(e) => {
            log::warn!("iteration check could not run: {e:#}");
            checks.push(Check::failed("iteration_contraction", Threshold::Lt(1.0)));
        }
    }
    checks.push(measured("linearization", Threshold::Le(1e-5), linearization_gap(config, 1e-4)));
    checks
}

/// Worst a priori ratios over the eps list; Grenier runs only.
fn a_priori(config: &ExperimentConfig) -> Result<(f64, f64)> {
    let plan = Plan::new(config, &config.sweep.epsilons).context("shared solves")?;
    let mut worst = (0.0f64, 0.0f64);
    for &eps in &config.sweep.epsilons {
        let (a, p) = plan.a_priori_ratios(eps)?;
        worst = (worst.0.max(a), worst.1.max(p));
    }
    Ok(worst)
}
