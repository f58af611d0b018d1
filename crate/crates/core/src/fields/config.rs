use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discrete::FiniteDiscreteField;
use super::spectral::{SpectralGaussianField, Spectrum, DEFAULT_GRID};
use crate::cumulants::MomentProvider;
use crate::error::Result;
use crate::partitions::{Site, SiteRef};

/// Declarative description of a field model, as read from a config file.
///
/// ```
/// # use wick_cluster::fields::FieldConfig;
/// let c: FieldConfig = serde_json::from_str(r#"{"model": "sinc"}"#).unwrap();
/// assert!(c.build().is_ok());
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FieldConfig {
    /// White-noise pair coupled through a band cross spectrum.
    Sinc {
        #[serde(default)]
        grid: Option<usize>,
    },
    /// Two independent white-noise fields.
    Iid {
        #[serde(default = "unit")]
        variance: f64,
    },
    Spectral {
        psi: Spectrum,
        phi: Spectrum,
        cross: Spectrum,
        #[serde(default)]
        grid: Option<usize>,
    },
    /// Random finite field drawn from `seed`. With `two_field` set the
    /// sites are `(0, x)` and `(1, x)` for `x < sites`, otherwise `(0, x)`.
    Discrete {
        seed: u64,
        #[serde(default = "four")]
        sites: usize,
        #[serde(default = "three")]
        atoms: usize,
        #[serde(default)]
        complex: bool,
        #[serde(default)]
        two_field: bool,
    },
}

fn unit() -> f64 {
    1.0
}
fn four() -> usize {
    4
}
fn three() -> usize {
    3
}

impl FieldConfig {
    pub fn build(&self) -> Result<FieldModel> {
        Ok(match self {
            FieldConfig::Sinc { grid } => FieldModel::Spectral(
                SpectralGaussianField::sinc_coupling_example().with_grid(grid.unwrap_or(DEFAULT_GRID)),
            ),
            FieldConfig::Iid { variance } => FieldModel::Spectral(SpectralGaussianField::new(
                Spectrum::Constant { level: *variance },
                Spectrum::Constant { level: *variance },
                Spectrum::Zero,
                DEFAULT_GRID,
            )?),
            FieldConfig::Spectral { psi, phi, cross, grid } => FieldModel::Spectral(SpectralGaussianField::new(
                psi.clone(),
                phi.clone(),
                cross.clone(),
                grid.unwrap_or(DEFAULT_GRID),
            )?),
            FieldConfig::Discrete { seed, sites, atoms, complex, two_field } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let comps: &[u16] = if *two_field { &[0, 1] } else { &[0] };
                let list = comps
                    .iter()
                    .flat_map(|&c| (0..*sites as i64).map(move |x| Site::new(c, x)))
                    .collect();
                FieldModel::Discrete(FiniteDiscreteField::random_on(&mut rng, list, (*atoms).max(1), *complex))
            }
        })
    }
}

/// A built field model.
#[derive(Clone, Debug)]
pub enum FieldModel {
    Spectral(SpectralGaussianField),
    Discrete(FiniteDiscreteField),
}

impl FieldModel {
    fn inner(&self) -> &dyn MomentProvider {
        match self {
            FieldModel::Spectral(f) => f,
            FieldModel::Discrete(f) => f,
        }
    }
}

impl MomentProvider for FieldModel {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        self.inner().moment(index)
    }
    fn max_order(&self) -> usize {
        self.inner().max_order()
    }
    fn known_cumulant(&self, index: &[SiteRef]) -> Option<C64> {
        self.inner().known_cumulant(index)
    }
    fn cumulant_vanishes(&self, order: usize) -> bool {
        self.inner().cumulant_vanishes(order)
    }
    fn correlation_range(&self) -> Option<u64> {
        self.inner().correlation_range()
    }
    fn log_generating_function(&self, vars: &[SiteRef], lambda: &[f64]) -> Option<C64> {
        self.inner().log_generating_function(vars, lambda)
    }
}
