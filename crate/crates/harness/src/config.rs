//! TOML experiment configuration with defaults filled in.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use dnls_wkb_core::{CorrectorState, FourierGrid, NonlinearitySpec, SpectralField, WKBState};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PRESET_ANALYTIC_BUMP: &str = "analytic-bump";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub regularity: RegularityConfig,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub data: DataConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_modes: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    2.0 * PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularityConfig {
    pub ell: f64,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self { ell: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub w0: f64,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { w0: 0.5, m: None, t: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    pub alpha: f64,
    pub gamma: u32,
    pub lambda: f64,
    pub sigma: u32,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma: 1,
            lambda: 1.0,
            sigma: 1,
        }
    }
}

/// One Fourier coefficient `[mode, re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Coefficient {
    pub mode: f64,
    pub re: f64,
    pub im: f64,
}

impl From<[f64; 3]> for Coefficient {
    fn from(v: [f64; 3]) -> Self {
        Self {
            mode: v[0],
            re: v[1],
            im: v[2],
        }
    }
}

impl From<Coefficient> for [f64; 3] {
    fn from(c: Coefficient) -> Self {
        [c.mode, c.re, c.im]
    }
}

/// Adds `amplitude * eps^power * cos(mode * 2 pi x / L)` to one initial field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub field: String,
    pub amplitude: f64,
    pub power: f64,
    pub mode: i64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<Vec<Coefficient>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<Vec<Coefficient>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi10: Option<Vec<Coefficient>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a10: Option<Vec<Coefficient>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbations: Vec<Perturbation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dt: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Parses and validates a config document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_col(text, span.start))
            .unwrap_or((0, 0));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if config.data.preset.is_none() && config.data.phi0.is_none() && config.data.a0.is_none() {
        config.data.preset = Some(PRESET_ANALYTIC_BUMP.to_string());
    }
    config.validate()?;
    Ok(config)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.n_modes < 8 || !g.n_modes.is_multiple_of(2) {
            return Err(invalid("grid.n_modes", format!("must be even and >= 8, got {}", g.n_modes)));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            return Err(invalid("grid.length", format!("must be positive, got {}", g.length)));
        }
        if !(self.regularity.ell > 1.0 && self.regularity.ell.is_finite()) {
            return Err(invalid("regularity.ell", format!("must exceed 1, got {}", self.regularity.ell)));
        }
        let w = &self.weight;
        if !(w.w0 > 0.0 && w.w0.is_finite()) {
            return Err(invalid("weight.w0", format!("must be positive, got {}", w.w0)));
        }
        if let Some(m) = w.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid("weight.M", format!("must be positive, got {m}")));
            }
        }
        if let Some(t) = w.t {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("weight.T", format!("must be positive, got {t}")));
            }
            if let Some(m) = w.m {
                if t >= w.w0 / m {
                    return Err(invalid("weight.T", format!("must be below w0/M = {}, got {t}", w.w0 / m)));
                }
            }
        }
        let nl = &self.nonlinearity;
        if nl.gamma < 1 {
            return Err(invalid("nonlinearity.gamma", "must be >= 1"));
        }
        if nl.sigma < 1 {
            return Err(invalid("nonlinearity.sigma", "must be >= 1"));
        }
        if !nl.alpha.is_finite() {
            return Err(invalid("nonlinearity.alpha", "must be finite"));
        }
        if !nl.lambda.is_finite() {
            return Err(invalid("nonlinearity.lambda", "must be finite"));
        }
        let eps = &self.sweep.epsilons;
        if eps.is_empty() {
            return Err(invalid("sweep.epsilons", "must not be empty"));
        }
        for &e in eps {
            if !(e > 0.0 && e <= 1.0) {
                return Err(invalid("sweep.epsilons", format!("values must lie in (0, 1], got {e}")));
            }
        }
        if eps.windows(2).any(|p| p[1] >= p[0]) {
            return Err(invalid("sweep.epsilons", "values must be strictly decreasing"));
        }
        if !(self.solver.dt > 0.0 && self.solver.dt.is_finite()) {
            return Err(invalid("solver.dt", format!("must be positive, got {}", self.solver.dt)));
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        self.validate_data()
    }

    fn validate_data(&self) -> Result<(), ConfigError> {
        let d = &self.data;
        let explicit = d.phi0.is_some() || d.a0.is_some() || d.phi10.is_some() || d.a10.is_some();
        match (&d.preset, explicit) {
            (Some(_), true) => {
                return Err(invalid("data", "give either data.preset or explicit coefficient lists, not both"))
            }
            (Some(p), false) if p != PRESET_ANALYTIC_BUMP => {
                return Err(invalid("data.preset", format!("unknown preset {p:?}")))
            }
            (None, true) if d.phi0.is_none() || d.a0.is_none() => {
                return Err(invalid("data", "explicit data needs both data.phi0 and data.a0"))
            }
            _ => {}
        }
        let grid = self.make_grid()?;
        for (name, list, real) in [
            ("data.phi0", &d.phi0, true),
            ("data.a0", &d.a0, false),
            ("data.phi10", &d.phi10, true),
            ("data.a10", &d.a10, false),
        ] {
            if let Some(list) = list {
                field_from_coefficients(&grid, list, real, name)?;
            }
        }
        let half = (self.grid.n_modes / 2) as i64;
        for (k, p) in d.perturbations.iter().enumerate() {
            let field = format!("data.perturbations[{k}]");
            if !matches!(p.field.as_str(), "phi0" | "a0") {
                return Err(invalid(&field, format!("field must be \"phi0\" or \"a0\", got {:?}", p.field)));
            }
            if !(p.amplitude.is_finite() && p.power > 0.0 && p.power.is_finite()) {
                return Err(invalid(&field, "amplitude must be finite and power positive"));
            }
            if p.mode.abs() >= half {
                return Err(invalid(&field, format!("mode {} outside the grid", p.mode)));
            }
        }
        Ok(())
    }

    pub fn make_grid(&self) -> Result<Arc<FourierGrid>, ConfigError> {
        dnls_wkb_core::make_grid(self.grid.n_modes, self.grid.length)
            .map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn spec(&self) -> NonlinearitySpec {
        let n = &self.nonlinearity;
        NonlinearitySpec::new(n.alpha, n.gamma, n.lambda, n.sigma).expect("validated exponents")
    }

    /// Initial data at `eps = 0`, built on `grid`.
    pub fn initial_state(&self, grid: &Arc<FourierGrid>) -> Result<WKBState, ConfigError> {
        let d = &self.data;
        let state = match &d.preset {
            Some(_) => analytic_bump(grid),
            None => WKBState::new(
                field_from_coefficients(grid, d.phi0.as_deref().unwrap_or_default(), true, "data.phi0")?,
                field_from_coefficients(grid, d.a0.as_deref().unwrap_or_default(), false, "data.a0")?,
            )
            .map_err(|e| invalid("data", e.to_string()))?,
        };
        Ok(state)
    }

    /// Initial data at `eps`, including configured perturbations.
    pub fn initial_state_at(&self, grid: &Arc<FourierGrid>, eps: f64) -> Result<WKBState, ConfigError> {
        let mut state = self.initial_state(grid)?;
        let kappa = 2.0 * PI / self.grid.length;
        for p in &self.data.perturbations {
            let size = p.amplitude * eps.powf(p.power);
            let mode = p.mode as f64;
            let bump = SpectralField::from_real_fn(grid, |x| size * (mode * kappa * x).cos());
            match p.field.as_str() {
                "phi0" => state.phi = &state.phi + &bump,
                _ => state.a = &state.a + &bump,
            }
        }
        Ok(state)
    }

    /// Initial corrector `(phi10, a10)`, zero unless configured.
    pub fn initial_corrector(&self, grid: &Arc<FourierGrid>) -> Result<CorrectorState, ConfigError> {
        let d = &self.data;
        let phi1 = match &d.phi10 {
            Some(list) => field_from_coefficients(grid, list, true, "data.phi10")?,
            None => SpectralField::zeros(grid, true),
        };
        let a1 = match &d.a10 {
            Some(list) => field_from_coefficients(grid, list, false, "data.a10")?,
            None => SpectralField::zeros(grid, false),
        };
        CorrectorState::new(phi1, a1).map_err(|e| invalid("data", e.to_string()))
    }

    /// SHA-256 of the validated config serialized as JSON.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// `phi0 = 0.3 sin(k x)`, `a0 = exp((cos(k x) - 1) / 2)` with `k = 2 pi / L`.
pub fn analytic_bump(grid: &Arc<FourierGrid>) -> WKBState {
    let kappa = 2.0 * PI / grid.length();
    WKBState::new(
        SpectralField::from_real_fn(grid, |x| 0.3 * (kappa * x).sin()),
        SpectralField::from_fn(grid, |x| Complex64::new((0.5 * ((kappa * x).cos() - 1.0)).exp(), 0.0)),
    )
    .expect("phase is real and grids agree")
}

fn field_from_coefficients(
    grid: &Arc<FourierGrid>,
    list: &[Coefficient],
    real: bool,
    name: &str,
) -> Result<SpectralField, ConfigError> {
    let mut modes = Vec::with_capacity(list.len());
    for c in list {
        if c.mode.fract() != 0.0 || !c.mode.is_finite() {
            return Err(invalid(name, format!("mode index {} is not an integer", c.mode)));
        }
        if !(c.re.is_finite() && c.im.is_finite()) {
            return Err(invalid(name, "coefficients must be finite"));
        }
        modes.push((c.mode as i64, Complex64::new(c.re, c.im)));
    }
    SpectralField::from_modes(grid, &modes, real).map_err(|e| invalid(name, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nn_modes = 64\n\n[sweep]\nepsilons = [0.2, 0.1, 0.05]\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.regularity.ell, 2.0);
        assert_eq!(c.data.preset.as_deref(), Some(PRESET_ANALYTIC_BUMP));
        assert_eq!(c.weight.w0, 0.5);
        assert_eq!(c.solver.dt, 1e-4);
        assert_eq!(c.nonlinearity, NonlinearityConfig::default());
        assert!((c.grid.length - 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn epsilon_out_of_range_names_the_field() {
        let text = MINIMAL.replace("0.2, 0.1, 0.05", "1.5, 0.1");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "sweep.epsilons"),
            other => panic!("{other}"),
        }
        let text = MINIMAL.replace("0.2, 0.1, 0.05", "0.1, 0.2");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn preset_and_explicit_data_conflict() {
        let text = format!("{MINIMAL}\n[data]\npreset = \"analytic-bump\"\na0 = [[0, 1.0, 0.0]]\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "data"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn explicit_data_builds_fields() {
        let text = format!(
            "{MINIMAL}\n[data]\nphi0 = [[1, 0.0, -0.15], [-1, 0.0, 0.15]]\na0 = [[0, 1.0, 0.0], [2, 0.1, 0.05]]\n"
        );
        let c = parse_config(&text).unwrap();
        let g = c.make_grid().unwrap();
        let s = c.initial_state(&g).unwrap();
        let phi = s.phi.real_samples();
        let x = g.points();
        for (p, x) in phi.iter().zip(&x) {
            assert!((p - 0.3 * x.sin()).abs() < 1e-14);
        }
        let bad = format!("{MINIMAL}\n[data]\nphi0 = [[1, 0.0, -0.15]]\na0 = [[0, 1.0, 0.0]]\n");
        match parse_config(&bad).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "data.phi0"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "[grid]\nn_modes = 64\nbogus = 1\n\n[sweep]\nepsilons = [0.1]\n";
        match parse_config(text).unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
        match parse_config("[grid\n").unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn schedule_override_is_checked() {
        let text = format!("{MINIMAL}\n[weight]\nw0 = 0.5\nM = 1.0\nT = 0.6\n");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "weight.T"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn perturbations_shift_data() {
        let text = format!(
            "{MINIMAL}\n[[data.perturbations]]\nfield = \"a0\"\namplitude = 0.5\npower = 2.0\nmode = 1\n"
        );
        let c = parse_config(&text).unwrap();
        let g = c.make_grid().unwrap();
        let base = c.initial_state(&g).unwrap();
        let moved = c.initial_state_at(&g, 0.1).unwrap();
        let d = &moved.a - &base.a;
        assert!((d.coefficient(1).unwrap().re - 0.5 * 0.01 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config(MINIMAL).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = parse_config(&MINIMAL.replace("64", "128")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
