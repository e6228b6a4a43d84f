//! The eps sweep: shared limit and corrector solves, then one independent
//! pipeline per eps.

use std::sync::Arc;

use anyhow::{Context, Result};
use dnls_wkb_core::integrator::fitted_step;
use dnls_wkb_core::spectral::{analytic_norm, analytic_norm_sq, TripleNormAccumulator};
use dnls_wkb_core::wkb::{
    corrected_trajectory, error_metrics, first_order_states, observable_errors, triple_error,
};
use dnls_wkb_core::{
    assemble_initial, integrate, integrate_corrector, integrate_nls, select_m_t, solve_limit, CorrectorState,
    FourierGrid, NonlinearitySpec, Trajectory, WKBState, WeightSchedule,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::fit::fit_rate;
use crate::report::{Check, Failure, GridInfo, Report, Row, ScheduleInfo, Slope, Slopes, Threshold};

pub const LEADING_SLOPE: [f64; 2] = [0.85, 1.25];
pub const CORRECTED_SLOPE: [f64; 2] = [1.7, 2.3];
pub const WAVEFUNCTION_SLOPE: [f64; 2] = [0.85, 1.25];
pub const OBSERVABLE_SLOPE: f64 = 0.85;
pub const MAX_FIT_RESIDUAL: f64 = 0.15;
pub const MASS_TOLERANCE: f64 = 1e-8;

/// Weight schedule of a sweep: the configured override, or [`select_m_t`] at
/// regularity `l + 2` with the largest data norms over the eps list.
pub fn select_schedule(
    config: &ExperimentConfig,
    grid: &Arc<FourierGrid>,
    spec: &NonlinearitySpec,
    epsilons: &[f64],
) -> Result<WeightSchedule> {
    let w = &config.weight;
    if let (Some(m), Some(t)) = (w.m, w.t) {
        return Ok(WeightSchedule::new(w.w0, m, t)?);
    }
    if let Some(m) = w.m {
        return Ok(WeightSchedule::new(w.w0, m, 0.9 * w.w0 / m)?);
    }
    let ell = config.regularity.ell + 2.0;
    let mut p: f64 = 0.0;
    let mut q: f64 = 0.0;
    for &eps in std::iter::once(&0.0).chain(epsilons) {
        let s = config.initial_state_at(grid, eps)?;
        p = p.max(analytic_norm(&s.phi, w.w0, ell + 1.0)?);
        q = q.max(analytic_norm(&s.a, w.w0, ell)?);
    }
    let selected = select_m_t(ell, p, q, w.w0, spec)?;
    match w.t {
        Some(t) if t < w.w0 / selected.rate() => Ok(WeightSchedule::new(w.w0, selected.rate(), t)?),
        Some(t) => anyhow::bail!(
            "weight.T = {t} is not below w0/M = {} for the selected M",
            w.w0 / selected.rate()
        ),
        None => Ok(selected),
    }
}

/// Everything shared by the per-eps pipelines.
pub struct Plan {
    pub config: ExperimentConfig,
    pub grid: Arc<FourierGrid>,
    pub spec: NonlinearitySpec,
    pub schedule: WeightSchedule,
    /// Step used by every solver so that all trajectories share time samples.
    pub dt: f64,
    pub limit: Trajectory<WKBState>,
    pub corrector: Trajectory<CorrectorState>,
}

impl Plan {
    pub fn new(config: &ExperimentConfig, epsilons: &[f64]) -> Result<Self> {
        let grid = config.make_grid()?;
        let spec = config.spec();
        let schedule = select_schedule(config, &grid, &spec, epsilons)?;
        let eps_min = epsilons.iter().copied().fold(f64::INFINITY, f64::min);
        let dt = fitted_step(schedule.horizon(), config.solver.dt.min(0.1 * eps_min));
        let state0 = config.initial_state(&grid)?;
        let limit = solve_limit(&state0, &spec, &schedule, dt).context("limit system")?;
        let corrector = integrate_corrector(&config.initial_corrector(&grid)?, &limit, &spec)
            .context("corrector system")?;
        log::info!(
            "schedule M={:.4e} T={:.4e}, dt={:.4e}, {} steps",
            schedule.rate(),
            schedule.horizon(),
            dt,
            limit.len() - 1
        );
        Ok(Self {
            config: config.clone(),
            grid,
            spec,
            schedule,
            dt,
            limit,
            corrector,
        })
    }

    fn ell(&self) -> f64 {
        self.config.regularity.ell
    }

    /// Stages (iii) to (v) for one eps.
    pub fn run_epsilon(&self, eps: f64) -> Result<Row> {
        let ell = self.ell();
        let state0 = self.config.initial_state_at(&self.grid, eps)?;
        let grenier = integrate(&state0, eps, &self.spec, &self.schedule, self.dt).context("Grenier system")?;
        let (phi_l, a_l) = triple_error(&grenier, &self.limit, &self.schedule, ell)?;
        let first = first_order_states(&self.limit, &self.corrector, eps)?;
        let (phi_c, a_c) = triple_error(&grenier, &first, &self.schedule, ell)?;

        let u0 = assemble_initial(&state0, eps)?;
        let nls = integrate_nls(&u0, &self.spec, self.schedule.horizon(), self.dt).context("NLS")?;
        let approx = corrected_trajectory(&self.limit, &self.corrector, eps)?;
        let (wf_l2, wf_linf) = error_metrics(&nls, &approx)?;
        let obs = observable_errors(&nls, &self.limit)?;
        let m0 = nls.states[0].mass();
        let mass_drift = nls
            .states
            .iter()
            .map(|w| (w.mass() - m0).abs() / m0)
            .fold(0.0, f64::max);

        let (apriori_amplitude, apriori_phase) = self.a_priori_of(&state0, &grenier)?;
        Ok(Row {
            epsilon: eps,
            err_phi_leading: phi_l,
            err_a_leading: a_l,
            err_phi_corrected: phi_c,
            err_a_corrected: a_c,
            err_wf_L2: wf_l2,
            err_wf_Linf: wf_linf,
            err_rho_L1: obs.rho_l1,
            err_J_L1: obs.current_l1,
            err_rho_Linf: obs.rho_linf,
            err_J_Linf: obs.current_linf,
            mass_drift,
            apriori_amplitude,
            apriori_phase,
        })
    }

    /// `|||a|||^2 / (2 ||a0||^2)` and `|||phi|||^2 / (4 ||phi0||^2 + ||a0||^{4 sigma})`
    /// for the Grenier solution at `eps`.
    pub fn a_priori_ratios(&self, eps: f64) -> Result<(f64, f64)> {
        let state0 = self.config.initial_state_at(&self.grid, eps)?;
        let grenier = integrate(&state0, eps, &self.spec, &self.schedule, self.dt)?;
        self.a_priori_of(&state0, &grenier)
    }

    fn a_priori_of(&self, state0: &WKBState, grenier: &Trajectory<WKBState>) -> Result<(f64, f64)> {
        let ell = self.ell();
        let w0 = self.schedule.w0();
        let mut amp = TripleNormAccumulator::new(ell, self.schedule);
        let mut phase = TripleNormAccumulator::new(ell + 1.0, self.schedule);
        for (t, s) in grenier.times.iter().zip(&grenier.states) {
            amp.observe(*t, &s.a)?;
            phase.observe(*t, &s.phi)?;
        }
        let a0 = analytic_norm_sq(&state0.a, w0, ell)?;
        let phi0 = analytic_norm_sq(&state0.phi, w0, ell + 1.0)?;
        let sigma = self.spec.sigma() as i32;
        Ok((
            amp.squared() / (2.0 * a0),
            phase.squared() / (4.0 * phi0 + a0.powi(2 * sigma)),
        ))
    }

    /// Runs every eps in parallel; aborts are kept as [`Failure`]s.
    pub fn run(&self, epsilons: &[f64]) -> Report {
        let results: Vec<(f64, Result<Row>)> = epsilons.par_iter().map(|&e| (e, self.run_epsilon(e))).collect();
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for (eps, r) in results {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => {
                    log::warn!("eps = {eps}: run aborted and excluded from the fits: {e:#}");
                    failures.push(Failure {
                        epsilon: eps,
                        error: format!("{e:#}"),
                    });
                }
            }
        }
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        self.assemble(rows, failures)
    }

    fn assemble(&self, rows: Vec<Row>, failures: Vec<Failure>) -> Report {
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let series = |f: &dyn Fn(&Row) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
        let leading = series(&|r| r.err_phi_leading + r.err_a_leading);
        let corrected = series(&|r| r.err_phi_corrected + r.err_a_corrected);
        let wavefunction = series(&|r| r.err_wf_L2 + r.err_wf_Linf);
        let density = series(&|r| r.err_rho_L1 + r.err_rho_Linf);
        let current = series(&|r| r.err_J_L1 + r.err_J_Linf);

        let slope = |errors: &[f64]| match fit_rate(&eps, errors) {
            Ok(f) => Slope::Fit(f),
            Err(e) => Slope::Insufficient(format!("insufficient data: {e}")),
        };
        let slopes = Slopes {
            leading: slope(&leading),
            corrected: slope(&corrected),
            wavefunction: slope(&wavefunction),
        };

        let mut checks = Vec::new();
        let mut flags = Vec::new();
        if let Some(f) = slopes.leading.fit() {
            checks.push(Check::new("leading_slope", f.slope, Threshold::Within(LEADING_SLOPE)));
            checks.push(Check::new("leading_residual", f.residual, Threshold::Le(MAX_FIT_RESIDUAL)));
        }
        if let Some(f) = slopes.corrected.fit() {
            checks.push(Check::new("corrected_slope", f.slope, Threshold::Within(CORRECTED_SLOPE)));
        }
        if let Some(f) = slopes.wavefunction.fit() {
            checks.push(Check::new("wavefunction_slope", f.slope, Threshold::Within(WAVEFUNCTION_SLOPE)));
        }
        for (name, errors) in [("density_slope", &density), ("current_slope", &current)] {
            if let Slope::Fit(f) = slope(errors) {
                checks.push(Check::new(name, f.slope, Threshold::Ge(OBSERVABLE_SLOPE)));
            }
        }
        for (name, s) in [
            ("leading", &slopes.leading),
            ("corrected", &slopes.corrected),
            ("wavefunction", &slopes.wavefunction),
        ] {
            if s.fit().is_some_and(|f| f.floored) {
                flags.push(format!("{name} errors reached the fit floor"));
            }
        }
        if !rows.is_empty() {
            let worst = |f: &dyn Fn(&Row) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::new("apriori_amplitude", worst(&|r| r.apriori_amplitude), Threshold::Le(1.0)));
            checks.push(Check::new("apriori_phase", worst(&|r| r.apriori_phase), Threshold::Le(1.0)));
            checks.push(Check::new("mass_drift", worst(&|r| r.mass_drift), Threshold::Le(MASS_TOLERANCE)));
        }
        if leading.windows(2).any(|p| p[1] >= p[0]) {
            flags.push("leading-order errors do not decrease strictly with eps; the grid may be under-resolved".into());
        }
        for f in &failures {
            checks.push(Check::failed(format!("run[eps={}]", f.epsilon), Threshold::Le(0.0)));
        }

        Report {
            config_hash: self.config.hash(),
            grid: GridInfo {
                n_modes: self.grid.n_modes(),
                length: self.grid.length(),
            },
            schedule: ScheduleInfo {
                w0: self.schedule.w0(),
                m: self.schedule.rate(),
                t: self.schedule.horizon(),
                dt: self.dt,
            },
            rows,
            slopes,
            checks,
            failures,
            flags,
        }
    }
}

/// Full sweep over `sweep.epsilons`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Report> {
    let eps = &config.sweep.epsilons;
    Ok(Plan::new(config, eps)?.run(eps))
}

/// A single eps, outside the configured list.
pub fn run_single(config: &ExperimentConfig, eps: f64) -> Result<Report> {
    anyhow::ensure!(eps > 0.0 && eps <= 1.0, "epsilon must lie in (0, 1], got {eps}");
    Ok(Plan::new(config, &[eps])?.run(&[eps]))
}
