//! Concrete random fields backing [`MomentProvider`](crate::MomentProvider).

mod config;
mod discrete;
mod ensemble;
mod gaussian;
mod spectral;

pub use config::{FieldConfig, FieldModel};
pub use discrete::{Atom, FiniteDiscreteField};
pub use ensemble::{
    sample_ensemble, EnsembleEstimator, EnsembleHeader, Window, CUMULANT_BATCHES, ENSEMBLE_MAX_ORDER,
    ENSEMBLE_SCHEMA_VERSION,
};
pub use gaussian::{isserlis, CircularGaussian, GaussianVector, GAUSSIAN_MAX_ORDER};
pub use spectral::{torus_grid, Channel, SpectralGaussianField, Spectrum, DEFAULT_GRID, PSD_TOLERANCE};
