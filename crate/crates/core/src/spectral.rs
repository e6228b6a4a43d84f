//! Periodic Fourier discretization and the analytic norm machinery.
//!
//! A [`SpectralField`] stores the coefficients `c_j` of
//! `psi(x) = sum_j c_j exp(i xi_j x)` on a [`FourierGrid`] of `n` collocation
//! points over `[0, L)`, with `xi_j = 2 pi j / L` and
//! `j in {-n/2+1, ..., n/2}`. Coefficient arrays use FFT order: slot `k`
//! holds mode `k` for `k <= n/2` and mode `k - n` otherwise.
//!
//! Norms use the quadrature `||psi||^2 = L * sum_j weight_j |c_j|^2`, which is
//! `(L / n^2) * sum_j weight_j |DFT_j|^2` and reproduces `int |psi|^2 dx` for
//! `w = 0, l = 0`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative slack accepted when a time stamp overshoots the horizon by rounding.
const TIME_SLACK: f64 = 1e-12;

pub struct FourierGrid {
    n_modes: usize,
    length: f64,
    wavenumbers: Vec<f64>,
    padded_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    padded_forward: Arc<dyn Fft<f64>>,
    padded_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("n_modes", &self.n_modes)
            .field("length", &self.length)
            .field("padded_len", &self.padded_len)
            .finish()
    }
}

/// Builds a shareable grid. Same checks as [`FourierGrid::new`].
pub fn make_grid(n_modes: usize, length: f64) -> Result<Arc<FourierGrid>> {
    FourierGrid::new(n_modes, length).map(Arc::new)
}

impl FourierGrid {
    pub fn new(n_modes: usize, length: f64) -> Result<Self> {
        if n_modes < 8 || !n_modes.is_multiple_of(2) || !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid { n_modes, length });
        }
        let wavenumbers = (0..n_modes)
            .map(|k| 2.0 * PI * slot_to_mode(k, n_modes) as f64 / length)
            .collect();
        // 3/2 zero padding for products (the 2/3 rule), rounded up to even.
        let padded_len = (3 * n_modes / 2 + 1) & !1;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_modes,
            length,
            wavenumbers,
            padded_len,
            forward: planner.plan_fft_forward(n_modes),
            inverse: planner.plan_fft_inverse(n_modes),
            padded_forward: planner.plan_fft_forward(padded_len),
            padded_inverse: planner.plan_fft_inverse(padded_len),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    /// Wavenumbers `xi` in FFT slot order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Wavenumbers sorted ascending, `xi_j` for `j = -n/2+1 ..= n/2`.
    pub fn frequencies(&self) -> Vec<f64> {
        let half = (self.n_modes / 2) as i64;
        (-half + 1..=half)
            .map(|j| 2.0 * PI * j as f64 / self.length)
            .collect()
    }

    /// Collocation points `x_m = m L / n`.
    pub fn points(&self) -> Vec<f64> {
        let h = self.length / self.n_modes as f64;
        (0..self.n_modes).map(|m| m as f64 * h).collect()
    }

    pub fn mode_of_slot(&self, slot: usize) -> i64 {
        slot_to_mode(slot, self.n_modes)
    }

    pub fn slot_of_mode(&self, mode: i64) -> Result<usize> {
        let half = (self.n_modes / 2) as i64;
        if mode <= -half || mode > half {
            return Err(Error::ModeOutOfRange {
                mode,
                min: -half + 1,
                max: half,
            });
        }
        Ok(if mode >= 0 {
            mode as usize
        } else {
            (mode + self.n_modes as i64) as usize
        })
    }

    pub fn nyquist_slot(&self) -> usize {
        self.n_modes / 2
    }

    /// Largest `|j|` kept by the 2/3 rule.
    pub fn dealias_limit(&self) -> i64 {
        (self.n_modes / 3) as i64
    }

    pub fn same_as(&self, other: &FourierGrid) -> bool {
        self.n_modes == other.n_modes && self.length == other.length
    }

    /// Samples to normalized coefficients.
    pub fn forward(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.n_modes {
            return Err(Error::LengthMismatch {
                expected: self.n_modes,
                found: samples.len(),
            });
        }
        let mut buf = samples.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n_modes as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        Ok(buf)
    }

    /// Normalized coefficients to samples.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.n_modes {
            return Err(Error::LengthMismatch {
                expected: self.n_modes,
                found: coeffs.len(),
            });
        }
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    /// Samples on the padded grid of a field given by its coefficients.
    /// The Nyquist coefficient is split evenly between `+n/2` and `-n/2`.
    pub(crate) fn padded_samples(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_modes;
        let m = self.padded_len;
        let half = n / 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[..half].copy_from_slice(&coeffs[..half]);
        for k in half + 1..n {
            buf[m - (n - k)] = coeffs[k];
        }
        let nyq = coeffs[half] * 0.5;
        buf[half] = nyq;
        buf[m - half] = nyq;
        self.padded_inverse.process(&mut buf);
        buf
    }

    /// Truncates padded-grid samples back to the `n`-mode spectrum, with the
    /// Nyquist mode set to zero.
    pub(crate) fn fold_padded(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_modes;
        let m = self.padded_len;
        debug_assert_eq!(samples.len(), m);
        let mut buf = samples.to_vec();
        self.padded_forward.process(&mut buf);
        let scale = 1.0 / m as f64;
        let half = n / 2;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..half {
            out[k] = buf[k] * scale;
        }
        for k in half + 1..n {
            out[k] = buf[m - (n - k)] * scale;
        }
        out
    }
}

fn slot_to_mode(slot: usize, n: usize) -> i64 {
    if slot <= n / 2 {
        slot as i64
    } else {
        slot as i64 - n as i64
    }
}

/// A periodic field stored by its Fourier coefficients.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<FourierGrid>,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<FourierGrid>, real: bool) -> Self {
        Self {
            grid: Arc::clone(grid),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_modes()],
            real,
        }
    }

    pub fn from_samples(grid: &Arc<FourierGrid>, samples: &[Complex64]) -> Result<Self> {
        Ok(Self {
            grid: Arc::clone(grid),
            coeffs: grid.forward(samples)?,
            real: false,
        })
    }

    pub fn from_real_samples(grid: &Arc<FourierGrid>, samples: &[f64]) -> Result<Self> {
        let buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut field = Self {
            grid: Arc::clone(grid),
            coeffs: grid.forward(&buf)?,
            real: true,
        };
        field.symmetrize();
        Ok(field)
    }

    pub fn from_fn(grid: &Arc<FourierGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let samples: Vec<Complex64> = grid.points().into_iter().map(f).collect();
        Self::from_samples(grid, &samples).expect("sample count matches grid")
    }

    pub fn from_real_fn(grid: &Arc<FourierGrid>, f: impl Fn(f64) -> f64) -> Self {
        let samples: Vec<f64> = grid.points().into_iter().map(f).collect();
        Self::from_real_samples(grid, &samples).expect("sample count matches grid")
    }

    /// Builds a field from `(mode, coefficient)` pairs. Repeated modes add up.
    /// With `real` set, the pairs must already be Hermitian-symmetric.
    pub fn from_modes(grid: &Arc<FourierGrid>, modes: &[(i64, Complex64)], real: bool) -> Result<Self> {
        let mut field = Self::zeros(grid, false);
        for &(mode, c) in modes {
            let slot = grid.slot_of_mode(mode)?;
            field.coeffs[slot] += c;
        }
        if real {
            if field.hermitian_defect() > 1e-12 {
                return Err(Error::NotReal("field"));
            }
            field.real = true;
            field.symmetrize();
        }
        Ok(field)
    }

    pub fn from_coefficients(grid: &Arc<FourierGrid>, coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        if coeffs.len() != grid.n_modes() {
            return Err(Error::LengthMismatch {
                expected: grid.n_modes(),
                found: coeffs.len(),
            });
        }
        let mut field = Self {
            grid: Arc::clone(grid),
            coeffs,
            real: false,
        };
        if real {
            if field.hermitian_defect() > 1e-12 {
                return Err(Error::NotReal("field"));
            }
            field.real = true;
            field.symmetrize();
        }
        Ok(field)
    }

    pub(crate) fn from_padded_samples(grid: &Arc<FourierGrid>, samples: &[Complex64], real: bool) -> Self {
        let mut field = Self {
            grid: Arc::clone(grid),
            coeffs: grid.fold_padded(samples),
            real,
        };
        if real {
            field.symmetrize();
        }
        field
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficient(&self, mode: i64) -> Result<Complex64> {
        Ok(self.coeffs[self.grid.slot_of_mode(mode)?])
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn samples(&self) -> Vec<Complex64> {
        self.grid.inverse(&self.coeffs).expect("coefficient count matches grid")
    }

    pub fn real_samples(&self) -> Vec<f64> {
        self.samples().into_iter().map(|c| c.re).collect()
    }

    pub(crate) fn padded_samples(&self) -> Vec<Complex64> {
        self.grid.padded_samples(&self.coeffs)
    }

    /// `order`-th derivative: coefficients times `(i xi)^order`, Nyquist zeroed.
    pub fn derivative(&self, order: u32) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let mut out = self.clone();
        for (c, &xi) in out.coeffs.iter_mut().zip(self.grid.wavenumbers()) {
            *c *= match order {
                1 => Complex64::new(0.0, xi),
                _ => Complex64::new(-xi * xi, 0.0),
            };
        }
        out.coeffs[self.grid.nyquist_slot()] = Complex64::new(0.0, 0.0);
        Ok(out)
    }

    pub(crate) fn dx(&self) -> Self {
        self.derivative(1).expect("order 1 is supported")
    }

    pub(crate) fn dxx(&self) -> Self {
        self.derivative(2).expect("order 2 is supported")
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Multiplies by a complex constant; the result is real only if `c` is.
    pub fn scaled_complex(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|v| *v *= c);
        out.real = self.real && c.im == 0.0;
        out
    }

    /// `self += h * other`.
    pub fn axpy(&mut self, h: f64, other: &SpectralField) {
        assert!(self.grid.same_as(&other.grid), "axpy across grids");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * h;
        }
        self.real = self.real && other.real;
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|c(-xi) - conj c(xi)|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n_modes();
        let scale = self.max_abs_coefficient();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = self.coeffs[0].im.abs();
        for k in 1..n {
            let mirror = (n - k) % n;
            worst = worst.max((self.coeffs[k] - self.coeffs[mirror].conj()).norm());
        }
        worst / scale
    }

    /// Projects onto Hermitian-symmetric coefficients (exactly real samples).
    pub fn symmetrize(&mut self) {
        let n = self.grid.n_modes();
        self.coeffs[0].im = 0.0;
        self.coeffs[n / 2].im = 0.0;
        for k in 1..n / 2 {
            let avg = (self.coeffs[k] + self.coeffs[n - k].conj()) * 0.5;
            self.coeffs[k] = avg;
            self.coeffs[n - k] = avg.conj();
        }
    }

    pub fn zero_nyquist(&mut self) {
        let slot = self.grid.nyquist_slot();
        self.coeffs[slot] = Complex64::new(0.0, 0.0);
    }

    /// Zeroes every mode with `|j|` above the 2/3-rule limit.
    pub fn dealias(&mut self) {
        let limit = self.grid.dealias_limit();
        let grid = Arc::clone(&self.grid);
        for (k, c) in self.coeffs.iter_mut().enumerate() {
            if grid.mode_of_slot(k).abs() > limit {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `int |psi|^2 dx` via Parseval.
    pub fn mass(&self) -> f64 {
        self.grid.length() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn real_part(&self) -> Self {
        let mut out = self.clone();
        let n = self.grid.n_modes();
        for k in 0..n {
            let mirror = (n - k) % n;
            out.coeffs[k] = (self.coeffs[k] + self.coeffs[mirror].conj()) * 0.5;
        }
        out.real = true;
        out.symmetrize();
        out
    }

    /// Pointwise product, evaluated on the padded grid.
    pub fn product(&self, other: &SpectralField) -> Result<SpectralField> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let z: Vec<Complex64> = self
            .padded_samples()
            .iter()
            .zip(other.padded_samples())
            .map(|(a, b)| a * b)
            .collect();
        Ok(Self::from_padded_samples(&self.grid, &z, self.real && other.real))
    }

    fn combine(&self, other: &SpectralField, sign: f64) -> SpectralField {
        assert!(self.grid.same_as(&other.grid), "field arithmetic across grids");
        let mut out = self.clone();
        out.axpy(sign, other);
        out
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.combine(rhs, -1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

fn japanese(xi: f64) -> f64 {
    (1.0 + xi * xi).sqrt()
}

fn norm_weights(grid: &FourierGrid, w: f64, ell: f64) -> Result<Vec<f64>> {
    if w < 0.0 || w.is_nan() {
        return Err(Error::NegativeWeight(w));
    }
    if ell < 0.0 || ell.is_nan() {
        return Err(Error::NegativeRegularity(ell));
    }
    Ok(grid
        .wavenumbers()
        .iter()
        .map(|&xi| {
            let jb = japanese(xi);
            jb.powf(2.0 * ell) * (2.0 * w * jb).exp()
        })
        .collect())
}

/// Coefficients at or below this fraction of the field's largest one are
/// treated as transform roundoff and left out of weighted norms. Without the
/// cut, `exp(2 w <xi>)` amplifies noise at the top of the grid past any signal.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Absolute cut applied by the norms of `field`.
pub fn noise_floor(field: &SpectralField) -> f64 {
    NOISE_FLOOR * field.max_abs_coefficient()
}

/// `||psi||^2` in the analytic space with weight `w` and regularity `ell`.
pub fn analytic_norm_sq(field: &SpectralField, w: f64, ell: f64) -> Result<f64> {
    analytic_norm_sq_above(field, w, ell, noise_floor(field))
}

/// As [`analytic_norm_sq`], skipping coefficients with modulus `<= floor`.
/// Differences of nearby fields should pass a floor scaled to the operands.
pub fn analytic_norm_sq_above(field: &SpectralField, w: f64, ell: f64, floor: f64) -> Result<f64> {
    let weights = norm_weights(&field.grid, w, ell)?;
    let sum: f64 = weights
        .iter()
        .zip(&field.coeffs)
        .filter(|(_, c)| c.norm() > floor)
        .map(|(wt, c)| wt * c.norm_sqr())
        .sum();
    Ok(field.grid.length() * sum)
}

pub fn analytic_norm(field: &SpectralField, w: f64, ell: f64) -> Result<f64> {
    analytic_norm_sq(field, w, ell).map(f64::sqrt)
}

pub fn sobolev_norm(field: &SpectralField, s: f64) -> Result<f64> {
    analytic_norm(field, 0.0, s)
}

/// Weighted inner product `<psi, chi> = L sum_j weight_j psi_j conj(chi_j)`,
/// over the modes of `psi` above its noise floor.
pub fn analytic_inner(psi: &SpectralField, chi: &SpectralField, w: f64, ell: f64) -> Result<Complex64> {
    if !psi.grid.same_as(&chi.grid) {
        return Err(Error::GridMismatch);
    }
    let floor = noise_floor(psi);
    let weights = norm_weights(&psi.grid, w, ell)?;
    let sum: Complex64 = weights
        .iter()
        .zip(psi.coeffs.iter().zip(&chi.coeffs))
        .filter(|(_, (a, _))| a.norm() > floor)
        .map(|(wt, (a, b))| a * b.conj() * *wt)
        .sum();
    Ok(sum * psi.grid.length())
}

/// Linearly shrinking analyticity radius `w(t) = w0 - M t` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSchedule {
    w0: f64,
    rate: f64,
    horizon: f64,
}

impl WeightSchedule {
    pub fn new(w0: f64, rate: f64, horizon: f64) -> Result<Self> {
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(Error::InvalidSchedule(format!("w0 must be positive, got {w0}")));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidSchedule(format!("M must be positive, got {rate}")));
        }
        if !(horizon > 0.0 && horizon < w0 / rate) {
            return Err(Error::InvalidSchedule(format!(
                "T must lie in (0, w0/M) = (0, {}), got {horizon}",
                w0 / rate
            )));
        }
        Ok(Self { w0, rate, horizon })
    }

    pub fn w0(&self) -> f64 {
        self.w0
    }

    /// The decay rate `M`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// The horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn weight_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + TIME_SLACK)) {
            return Err(Error::TimeOutOfRange {
                t,
                t_max: self.horizon,
            });
        }
        Ok(self.w0 - self.rate * t.min(self.horizon))
    }
}

/// Running evaluation of
/// `max(sup_s ||psi(s)||^2_{l, w(s)}, 2 M int_0^t ||psi(s)||^2_{l+1/2, w(s)} ds)`
/// with the time integral done by the composite trapezoid rule.
#[derive(Clone, Debug)]
pub struct TripleNormAccumulator {
    ell: f64,
    schedule: WeightSchedule,
    floor: Option<f64>,
    sup: f64,
    integral: f64,
    last: Option<(f64, f64)>,
}

impl TripleNormAccumulator {
    pub fn new(ell: f64, schedule: WeightSchedule) -> Self {
        Self {
            ell,
            schedule,
            floor: None,
            sup: 0.0,
            integral: 0.0,
            last: None,
        }
    }

    /// Fixed absolute noise cut, for fields that are differences.
    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = Some(floor);
        self
    }

    pub fn observe(&mut self, t: f64, field: &SpectralField) -> Result<()> {
        if let Some((previous, _)) = self.last {
            if t < previous {
                return Err(Error::TimeRegression { previous, t });
            }
        }
        let w = self.schedule.weight_at(t)?;
        let floor = self.floor.unwrap_or_else(|| noise_floor(field));
        let level = analytic_norm_sq_above(field, w, self.ell, floor)?;
        let stronger = analytic_norm_sq_above(field, w, self.ell + 0.5, floor)?;
        self.sup = self.sup.max(level);
        if let Some((previous, value)) = self.last {
            self.integral += 0.5 * (t - previous) * (value + stronger);
        }
        self.last = Some((t, stronger));
        Ok(())
    }

    pub fn sup_branch(&self) -> f64 {
        self.sup
    }

    pub fn integral_branch(&self) -> f64 {
        2.0 * self.schedule.rate() * self.integral
    }

    pub fn squared(&self) -> f64 {
        self.sup_branch().max(self.integral_branch())
    }

    pub fn finalize(&self) -> f64 {
        self.squared().sqrt()
    }
}

/// Triple norm of a sampled trajectory.
pub fn triple_norm<'a>(
    times: &[f64],
    fields: impl IntoIterator<Item = &'a SpectralField>,
    schedule: WeightSchedule,
    ell: f64,
) -> Result<f64> {
    let mut acc = TripleNormAccumulator::new(ell, schedule);
    let mut count = 0;
    for (&t, field) in times.iter().zip(fields) {
        acc.observe(t, field)?;
        count += 1;
    }
    if count != times.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            found: count,
        });
    }
    Ok(acc.finalize())
}

/// Defect of `d/dt ||psi||^2 = 2 Re <psi, dpsi/dt> + 2 w'(t) ||psi||^2_{l+1/2}`
/// along a uniformly sampled trajectory. The left side is a centered
/// difference; the result is the largest interior `|lhs - rhs| / max(1, |rhs|)`.
pub fn norm_evolution_residual(
    times: &[f64],
    fields: &[SpectralField],
    rates: &[SpectralField],
    schedule: WeightSchedule,
    ell: f64,
) -> Result<f64> {
    let n = times.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, found: n });
    }
    if fields.len() != n || rates.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: fields.len().min(rates.len()),
        });
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times
        .windows(2)
        .any(|p| ((p[1] - p[0]) - dt).abs() > 1e-9 * dt.abs().max(f64::MIN_POSITIVE))
    {
        return Err(Error::NonUniformSamples);
    }
    let level = |k: usize| -> Result<f64> {
        let w = schedule.weight_at(times[k])?;
        analytic_norm_sq(&fields[k], w, ell)
    };
    let mut worst: f64 = 0.0;
    for k in 1..n - 1 {
        let lhs = (level(k + 1)? - level(k - 1)?) / (2.0 * dt);
        let w = schedule.weight_at(times[k])?;
        let inner = analytic_inner(&fields[k], &rates[k], w, ell)?;
        let rhs = 2.0 * inner.re - 2.0 * schedule.rate() * analytic_norm_sq(&fields[k], w, ell + 0.5)?;
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, l: f64) -> Arc<FourierGrid> {
        make_grid(n, l).unwrap()
    }

    /// Direct O(n^2) discrete Fourier sum.
    fn naive_dft(samples: &[Complex64], n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let j = slot_to_mode(k, n) as f64;
                samples
                    .iter()
                    .enumerate()
                    .map(|(m, s)| s * Complex64::from_polar(1.0, -2.0 * PI * j * m as f64 / n as f64))
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn frequencies_on_standard_box() {
        let g = grid(8, 2.0 * PI);
        let freq = g.frequencies();
        let expect: Vec<f64> = (-3..=4).map(|j| j as f64).collect();
        for (a, b) in freq.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn frequencies_on_half_box() {
        let g = grid(8, PI);
        let freq = g.frequencies();
        let expect: Vec<f64> = (-3..=4).map(|j| 2.0 * j as f64).collect();
        for (a, b) in freq.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(FourierGrid::new(7, 2.0 * PI), Err(Error::InvalidGrid { .. })));
        assert!(matches!(FourierGrid::new(6, 2.0 * PI), Err(Error::InvalidGrid { .. })));
        assert!(matches!(FourierGrid::new(8, 0.0), Err(Error::InvalidGrid { .. })));
        assert!(matches!(FourierGrid::new(8, -1.0), Err(Error::InvalidGrid { .. })));
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let g = grid(16, 2.0 * PI);
        let f = SpectralField::from_samples(&g, &vec![Complex64::new(2.5, -1.0); 16]).unwrap();
        assert!((f.coefficient(0).unwrap() - Complex64::new(2.5, -1.0)).norm() < 1e-14);
        for k in 1..16 {
            assert!(f.coefficients()[k].norm() < 1e-14);
        }
    }

    #[test]
    fn plane_mode_lands_in_one_slot() {
        let g = grid(16, 2.0 * PI);
        let f = SpectralField::from_fn(&g, |x| Complex64::from_polar(1.0, x));
        assert!((f.coefficient(1).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let others: f64 = (-7..=8).filter(|&j| j != 1).map(|j| f.coefficient(j).unwrap().norm()).sum();
        assert!(others < 1e-13);
    }

    #[test]
    fn fast_transform_matches_direct_sum_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[8usize, 12, 64, 90] {
            let g = grid(n, 3.0);
            let samples: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let fast = g.forward(&samples).unwrap();
            let slow = naive_dft(&samples, n);
            let scale = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() <= 1e-12 * scale);
            }
            let back = g.inverse(&fast).unwrap();
            for (a, b) in back.iter().zip(&samples) {
                assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn transform_length_mismatch() {
        let g = grid(8, 1.0);
        assert!(matches!(
            g.forward(&[Complex64::new(0.0, 0.0); 7]),
            Err(Error::LengthMismatch { expected: 8, found: 7 })
        ));
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = grid(64, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, f64::sin);
        let d = f.derivative(1).unwrap();
        assert!(d.is_real());
        for (x, v) in g.points().iter().zip(d.real_samples()) {
            assert!((v - x.cos()).abs() <= 1e-10);
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = grid(16, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, |_| 3.0);
        let d = f.derivative(2).unwrap();
        assert!(d.max_abs_coefficient() < 1e-14);
    }

    #[test]
    fn second_derivative_of_exp_cos() {
        // d^2/dx^2 exp(cos x) = (sin^2 x - cos x) exp(cos x)
        let g = grid(64, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, |x| x.cos().exp());
        let d = f.derivative(2).unwrap();
        for (x, v) in g.points().iter().zip(d.real_samples()) {
            let exact = (x.sin().powi(2) - x.cos()) * x.cos().exp();
            assert!((v - exact).abs() <= 1e-10);
        }
    }

    #[test]
    fn unsupported_derivative_order() {
        let g = grid(8, 1.0);
        let f = SpectralField::zeros(&g, true);
        assert_eq!(f.derivative(3).unwrap_err(), Error::UnsupportedOrder(3));
        assert_eq!(f.derivative(0).unwrap_err(), Error::UnsupportedOrder(0));
    }

    #[test]
    fn zero_field_norm_and_homogeneity() {
        let g = grid(16, 2.0 * PI);
        let z = SpectralField::zeros(&g, false);
        assert_eq!(analytic_norm(&z, 0.7, 2.0).unwrap(), 0.0);
        assert_eq!(sobolev_norm(&z, 1.0).unwrap(), 0.0);
        let one = SpectralField::from_modes(&g, &[(1, Complex64::new(1.0, 0.0))], false).unwrap();
        let two = one.scaled(2.0);
        let n1 = analytic_norm(&one, 0.0, 0.0).unwrap();
        assert!((n1 - (2.0 * PI).sqrt()).abs() < 1e-14);
        assert!((analytic_norm(&two, 0.0, 0.0).unwrap() - 2.0 * n1).abs() < 1e-13);
    }

    #[test]
    fn negative_weight_rejected() {
        let g = grid(8, 1.0);
        let f = SpectralField::zeros(&g, true);
        assert_eq!(analytic_norm(&f, -0.1, 1.0).unwrap_err(), Error::NegativeWeight(-0.1));
    }

    #[test]
    fn analytic_norm_converges_under_refinement() {
        // exp(cos x) has super-exponentially decaying modes, so the n=256 and
        // n=512 discrete sums must agree.
        let coarse = grid(256, 2.0 * PI);
        let fine = grid(512, 2.0 * PI);
        let a = analytic_norm(&SpectralField::from_real_fn(&coarse, |x| x.cos().exp()), 0.5, 2.0).unwrap();
        let b = analytic_norm(&SpectralField::from_real_fn(&fine, |x| x.cos().exp()), 0.5, 2.0).unwrap();
        assert!((a - b).abs() <= 1e-8 * b, "{a} {b}");
        // Direct summation over the Bessel-series coefficients I_k(1).
        let mut direct = 0.0;
        for k in -40i32..=40 {
            let ik = bessel_i(k.unsigned_abs(), 1.0);
            let jb = (1.0 + (k * k) as f64).sqrt();
            direct += jb.powi(4) * (2.0 * 0.5 * jb).exp() * ik * ik;
        }
        let direct = (2.0 * PI * direct).sqrt();
        assert!((b - direct).abs() <= 1e-8 * direct);
    }

    /// Modified Bessel function by its power series.
    fn bessel_i(k: u32, x: f64) -> f64 {
        let mut term = (x / 2.0).powi(k as i32) / (1..=k).map(|v| v as f64).product::<f64>();
        let mut sum = 0.0;
        for m in 0..60 {
            sum += term;
            let m = m as f64;
            term *= (x / 2.0).powi(2) / ((m + 1.0) * (m + 1.0 + k as f64));
        }
        sum
    }

    fn random_field(g: &Arc<FourierGrid>, rng: &mut ChaCha8Rng, band: i64) -> SpectralField {
        let modes: Vec<(i64, Complex64)> = (-band..=band)
            .map(|j| {
                let decay = (-(j.abs() as f64) * 0.5).exp();
                (j, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * decay)
            })
            .collect();
        SpectralField::from_modes(g, &modes, false).unwrap()
    }

    #[test]
    fn parseval_matches_physical_quadrature() {
        let g = grid(64, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let f = random_field(&g, &mut rng, 20);
            let spectral = sobolev_norm(&f, 0.0).unwrap().powi(2);
            let h = g.length() / g.n_modes() as f64;
            let physical: f64 = f.samples().iter().map(|c| c.norm_sqr()).sum::<f64>() * h;
            assert!((spectral - physical).abs() <= 1e-10 * physical);
        }
    }

    #[test]
    fn sobolev_below_analytic_on_random_fields() {
        let g = grid(64, 2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let f = random_field(&g, &mut rng, 24);
            let ell = rng.gen_range(0.0..4.0);
            let s = sobolev_norm(&f, ell).unwrap();
            for &w in &[0.0, 0.1, 1.0] {
                assert!(s <= analytic_norm(&f, w, ell).unwrap());
            }
        }
    }

    #[test]
    fn norm_monotone_in_weight_and_regularity() {
        let g = grid(32, 2.0 * PI);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&g, &mut rng, 10);
        let mut previous = 0.0;
        for i in 0..10 {
            let v = analytic_norm(&f, 0.1 * i as f64, 1.0).unwrap();
            assert!(v >= previous);
            previous = v;
        }
        previous = 0.0;
        for i in 0..10 {
            let v = analytic_norm(&f, 0.3, 0.5 * i as f64).unwrap();
            assert!(v >= previous);
            previous = v;
        }
    }

    #[test]
    fn real_fields_stay_hermitian() {
        let g = grid(32, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, |x| (x.sin() + 0.3 * (2.0 * x).cos()).exp());
        assert!(f.hermitian_defect() < 1e-12);
        let d1 = f.derivative(1).unwrap();
        let d2 = f.derivative(2).unwrap();
        assert!(d1.is_real() && d2.is_real());
        assert!(d1.hermitian_defect() < 1e-12);
        assert!(d2.hermitian_defect() < 1e-12);
    }

    #[test]
    fn from_modes_rejects_non_hermitian_real() {
        let g = grid(8, 2.0 * PI);
        let bad = SpectralField::from_modes(&g, &[(1, Complex64::new(1.0, 0.0))], true);
        assert!(matches!(bad, Err(Error::NotReal(_))));
        let good = SpectralField::from_modes(
            &g,
            &[(1, Complex64::new(0.0, -0.5)), (-1, Complex64::new(0.0, 0.5))],
            true,
        )
        .unwrap();
        for (x, v) in g.points().iter().zip(good.real_samples()) {
            assert!((v - x.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn schedule_weights() {
        let s = WeightSchedule::new(1.0, 2.0, 0.4).unwrap();
        assert_eq!(s.weight_at(0.0).unwrap(), 1.0);
        assert!((s.weight_at(0.4).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(s.weight_at(0.6), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(s.weight_at(-0.1), Err(Error::TimeOutOfRange { .. })));
        assert!(WeightSchedule::new(1.0, 2.0, 0.5).is_err());
        assert!(WeightSchedule::new(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn triple_norm_single_observation() {
        let g = grid(16, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, |x| x.cos().exp());
        let s = WeightSchedule::new(0.8, 1.0, 0.5).unwrap();
        let mut acc = TripleNormAccumulator::new(2.0, s);
        acc.observe(0.0, &f).unwrap();
        assert_eq!(acc.integral_branch(), 0.0);
        assert!((acc.finalize() - analytic_norm(&f, 0.8, 2.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn triple_norm_of_static_field_is_initial_norm() {
        let g = grid(32, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, |x| 0.3 * x.sin() + 0.1 * (2.0 * x).cos());
        let s = WeightSchedule::new(1.0, 2.0, 0.45).unwrap();
        let mut acc = TripleNormAccumulator::new(3.0, s);
        let steps = 450;
        let mut last = 0.0;
        for k in 0..=steps {
            acc.observe(0.45 * k as f64 / steps as f64, &f).unwrap();
            assert!(acc.finalize() >= last);
            last = acc.finalize();
        }
        let initial = analytic_norm(&f, 1.0, 3.0).unwrap();
        assert!((acc.finalize() - initial).abs() <= 1e-12 * initial);
    }

    #[test]
    fn triple_norm_integral_matches_closed_form() {
        let g = grid(16, 2.0 * PI);
        let xi: f64 = 1.0;
        let c = 0.7;
        let f = SpectralField::from_modes(&g, &[(1, Complex64::new(c, 0.0))], false).unwrap();
        let (w0, m, t_end, ell) = (1.0, 0.5, 0.5, 1.0);
        let s = WeightSchedule::new(w0, m, t_end).unwrap();
        let mut acc = TripleNormAccumulator::new(ell, s);
        let steps = 500;
        for k in 0..=steps {
            acc.observe(t_end * k as f64 / steps as f64, &f).unwrap();
        }
        let jb = (1.0 + xi * xi).sqrt();
        let exact_integral = 2.0 * PI * c * c * jb.powf(2.0 * ell + 1.0) * (2.0 * w0 * jb).exp()
            * (1.0 - (-2.0 * m * t_end * jb).exp())
            / (2.0 * m * jb);
        let got = acc.integral_branch() / (2.0 * m);
        assert!((got - exact_integral).abs() <= 1e-6 * exact_integral);
    }

    #[test]
    fn triple_norm_rejects_time_regression() {
        let g = grid(8, 1.0);
        let f = SpectralField::zeros(&g, true);
        let s = WeightSchedule::new(1.0, 1.0, 0.5).unwrap();
        let mut acc = TripleNormAccumulator::new(1.0, s);
        acc.observe(0.2, &f).unwrap();
        assert!(matches!(acc.observe(0.1, &f), Err(Error::TimeRegression { .. })));
        assert!(matches!(acc.observe(0.9, &f), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn integral_branch_grows_with_rate() {
        // For a time-independent field, 2M int_0^T e^{-2 M s <xi>} ds increases with M.
        let g = grid(16, 2.0 * PI);
        let f = SpectralField::from_real_fn(&g, |x| x.cos().exp());
        let mut previous = 0.0;
        for &m in &[0.5, 1.0, 2.0, 4.0] {
            let s = WeightSchedule::new(1.0, m, 0.2).unwrap();
            let mut acc = TripleNormAccumulator::new(2.0, s);
            for k in 0..=200 {
                acc.observe(0.2 * k as f64 / 200.0, &f).unwrap();
            }
            assert!(acc.integral_branch() > previous);
            previous = acc.integral_branch();
        }
    }

    #[test]
    fn evolution_residual_static_field() {
        let g = grid(16, 2.0 * PI);
        let f = SpectralField::from_modes(&g, &[(2, Complex64::new(0.4, 0.1))], false).unwrap();
        let zero = SpectralField::zeros(&g, false);
        let s = WeightSchedule::new(1.0, 2.0, 0.4).unwrap();
        let dt = 1e-3;
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * dt).collect();
        let fields = vec![f.clone(); times.len()];
        let rates = vec![zero.clone(); times.len()];
        let r = norm_evolution_residual(&times, &fields, &rates, s, 2.0).unwrap();
        assert!(r <= 1e-4, "residual {r}");
    }

    #[test]
    fn evolution_residual_too_few_samples() {
        let g = grid(8, 1.0);
        let f = SpectralField::zeros(&g, false);
        let s = WeightSchedule::new(1.0, 1.0, 0.5).unwrap();
        let err = norm_evolution_residual(&[0.0, 0.1], &[f.clone(), f.clone()], &[f.clone(), f], s, 1.0);
        assert!(matches!(err, Err(Error::TooFewSamples { .. })));
    }
}
