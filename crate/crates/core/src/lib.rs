//! Spectral solvers for semiclassical derivative NLS equations and their
//! WKB approximations in analytic (Gevrey-type) norms.

pub mod corrector;
pub mod error;
pub mod grenier;
pub mod integrator;
pub mod nls;
pub mod nonlinearity;
pub mod spectral;
pub mod wkb;

pub use corrector::{integrate_corrector, rhs_linearized, CorrectorState};
pub use error::{Error, Result};
pub use grenier::{integrate, iterate_scheme, rhs_grenier, select_m_t, solve_limit, SchemeDiagnostics, WKBState};
pub use integrator::{Stage, Trajectory};
pub use nls::{assemble_initial, integrate_nls, WaveField};
pub use nonlinearity::NonlinearitySpec;
pub use spectral::{make_grid, FourierGrid, SpectralField, WeightSchedule};
