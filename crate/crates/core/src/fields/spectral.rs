use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::gaussian::{isserlis, GAUSSIAN_MAX_ORDER};
use crate::cumulants::MomentProvider;
use crate::error::{Error, Result};
use crate::partitions::SiteRef;

/// Default number of quadrature nodes on the torus `[-1/2, 1/2)`.
pub const DEFAULT_GRID: usize = 1 << 12;

/// Tolerance of the pointwise positivity conditions.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// A real, even spectral density on the one-dimensional torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spectrum {
    Zero,
    /// `level` for all `k`: an uncorrelated field.
    Constant { level: f64 },
    /// `level * 1(|k| < cutoff)`.
    Band { cutoff: f64, level: f64 },
    /// Spectrum whose inverse transform is `amplitude * exp(-rate |x|)`.
    Exponential { amplitude: f64, rate: f64 },
}

impl Spectrum {
    pub fn at(&self, k: f64) -> f64 {
        match *self {
            Spectrum::Zero => 0.0,
            Spectrum::Constant { level } => level,
            Spectrum::Band { cutoff, level } => {
                if k.abs() < cutoff {
                    level
                } else {
                    0.0
                }
            }
            Spectrum::Exponential { amplitude, rate } => {
                let q = (-rate).exp();
                amplitude * (1.0 - q * q) / (1.0 - 2.0 * q * (2.0 * PI * k).cos() + q * q)
            }
        }
    }

    /// Inverse Fourier transform `int_{-1/2}^{1/2} S(k) e^{2 pi i k x} dk`
    /// in closed form.
    pub fn covariance(&self, x: i64) -> f64 {
        match *self {
            Spectrum::Zero => 0.0,
            Spectrum::Constant { level } => {
                if x == 0 {
                    level
                } else {
                    0.0
                }
            }
            Spectrum::Band { cutoff, level } => {
                let a = cutoff.min(0.5);
                if x == 0 {
                    2.0 * a * level
                } else {
                    let xf = x as f64;
                    level * (2.0 * PI * a * xf).sin() / (PI * xf)
                }
            }
            Spectrum::Exponential { amplitude, rate } => amplitude * (-rate * x.unsigned_abs() as f64).exp(),
        }
    }

    /// Largest `|x|` with nonzero covariance, if finite.
    pub fn range(&self) -> Option<u64> {
        match self {
            Spectrum::Zero | Spectrum::Constant { .. } => Some(0),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Spectrum::Zero => true,
            Spectrum::Constant { level } => level.is_finite(),
            Spectrum::Band { cutoff, level } => cutoff.is_finite() && cutoff >= 0.0 && level.is_finite(),
            Spectrum::Exponential { amplitude, rate } => amplitude.is_finite() && rate.is_finite() && rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad spectrum parameters {self:?}")))
        }
    }
}

/// Which covariance of the two-field model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    PsiPsi,
    PhiPhi,
    PsiPhi,
}

/// Midpoint nodes `k_j = -1/2 + (j + 1/2)/m` of the torus.
pub fn torus_grid(m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |j| -0.5 + (j as f64 + 0.5) / m as f64)
}

/// Two real, centered, translation invariant Gaussian fields on `Z`:
/// `psi` is component 0 and `phi` component 1, with
/// `<psi(x)psi(y)> = F1(x-y)`, `<phi(x)phi(y)> = F2(x-y)` and
/// `<psi(x)phi(y)> = G(x-y)`. Conjugation flags are ignored since the
/// fields are real.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGaussianField {
    pub psi: Spectrum,
    pub phi: Spectrum,
    pub cross: Spectrum,
    pub grid: usize,
}

impl SpectralGaussianField {
    pub fn new(psi: Spectrum, phi: Spectrum, cross: Spectrum, grid: usize) -> Result<Self> {
        for s in [&psi, &phi, &cross] {
            s.validate()?;
        }
        if grid == 0 {
            return Err(Error::InvalidArgument("empty quadrature grid".into()));
        }
        let f = SpectralGaussianField { psi, phi, cross, grid };
        f.check_psd()?;
        Ok(f)
    }

    /// Independent white-noise fields with `F1 = F2 = 1` whose cross
    /// spectrum is the band indicator `1(|k| < 1/4)`, so that
    /// `G(x) = sin(pi x / 2) / (pi x)` and `G(0) = 1/2`.
    pub fn sinc_coupling_example() -> Self {
        SpectralGaussianField::new(
            Spectrum::Constant { level: 1.0 },
            Spectrum::Constant { level: 1.0 },
            Spectrum::Band { cutoff: 0.25, level: 1.0 },
            DEFAULT_GRID,
        )
        .expect("band cross spectrum is dominated by white noise")
    }

    /// Two independent white-noise fields of the given variance.
    pub fn iid(variance: f64) -> Self {
        SpectralGaussianField::new(
            Spectrum::Constant { level: variance },
            Spectrum::Constant { level: variance },
            Spectrum::Zero,
            DEFAULT_GRID,
        )
        .expect("white noise is positive")
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid.max(1);
        self
    }

    pub fn spectrum(&self, channel: Channel) -> &Spectrum {
        match channel {
            Channel::PsiPsi => &self.psi,
            Channel::PhiPhi => &self.phi,
            Channel::PsiPhi => &self.cross,
        }
    }

    /// Checks `F1 >= 0`, `F2 >= 0` and `|G|^2 <= F1 F2` on the grid.
    pub fn check_psd(&self) -> Result<()> {
        for k in torus_grid(self.grid) {
            let (a, b, g) = (self.psi.at(k), self.phi.at(k), self.cross.at(k));
            if a < -PSD_TOLERANCE {
                return Err(Error::PsdViolation { k, reason: format!("psi spectrum {a} < 0") });
            }
            if b < -PSD_TOLERANCE {
                return Err(Error::PsdViolation { k, reason: format!("phi spectrum {b} < 0") });
            }
            if g * g > a * b + PSD_TOLERANCE {
                return Err(Error::PsdViolation {
                    k,
                    reason: format!("|G|^2 = {} exceeds F1 F2 = {}", g * g, a * b),
                });
            }
        }
        Ok(())
    }

    /// `min_k (F1 F2 - |G|^2)` over the grid.
    pub fn psd_margin(&self) -> f64 {
        torus_grid(self.grid)
            .map(|k| {
                let g = self.cross.at(k);
                self.psi.at(k) * self.phi.at(k) - g * g
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Covariance at lattice displacement `x`, in closed form.
    pub fn gaussian_covariance(&self, channel: Channel, x: i64) -> C64 {
        C64::new(self.spectrum(channel).covariance(x), 0.0)
    }

    /// Covariance at displacement `x` by midpoint quadrature on the grid.
    pub fn covariance_by_quadrature(&self, channel: Channel, x: i64) -> C64 {
        let s = self.spectrum(channel);
        let m = self.grid as f64;
        torus_grid(self.grid)
            .map(|k| s.at(k) * C64::from_polar(1.0, 2.0 * PI * k * x as f64))
            .sum::<C64>()
            / m
    }

    /// `E[y_a y_b]` for two site references.
    pub fn pair(&self, a: SiteRef, b: SiteRef) -> Result<f64> {
        let d = a.site.x - b.site.x;
        Ok(match (a.site.comp, b.site.comp) {
            (0, 0) => self.psi.covariance(d),
            (1, 1) => self.phi.covariance(d),
            (0, 1) => self.cross.covariance(d),
            (1, 0) => self.cross.covariance(-d),
            _ => return Err(Error::UnknownSite(if a.site.comp > 1 { a.site } else { b.site })),
        })
    }
}

impl MomentProvider for SpectralGaussianField {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        if index.len() > GAUSSIAN_MAX_ORDER {
            return Err(Error::OrderOverflow {
                order: index.len(),
                max: GAUSSIAN_MAX_ORDER,
            });
        }
        for r in index {
            if r.site.comp > 1 {
                return Err(Error::UnknownSite(r.site));
            }
        }
        let zero = |_: SiteRef| C64::new(0.0, 0.0);
        let cov = |a: SiteRef, b: SiteRef| C64::new(self.pair(a, b).unwrap_or(0.0), 0.0);
        Ok(isserlis(index, &zero, &cov))
    }

    fn max_order(&self) -> usize {
        GAUSSIAN_MAX_ORDER
    }

    fn known_cumulant(&self, index: &[SiteRef]) -> Option<C64> {
        match index {
            [a, b] => self.pair(*a, *b).ok().map(|v| C64::new(v, 0.0)),
            _ => Some(C64::new(0.0, 0.0)),
        }
    }

    fn cumulant_vanishes(&self, order: usize) -> bool {
        order != 2
    }

    fn correlation_range(&self) -> Option<u64> {
        let mut r = 0;
        for s in [&self.psi, &self.phi, &self.cross] {
            r = r.max(s.range()?);
        }
        Some(r)
    }

    fn log_generating_function(&self, vars: &[SiteRef], lambda: &[f64]) -> Option<C64> {
        let mut v = 0.0;
        for (i, a) in vars.iter().enumerate() {
            for (j, b) in vars.iter().enumerate() {
                v += 0.5 * lambda[i] * lambda[j] * self.pair(*a, *b).ok()?;
            }
        }
        Some(C64::new(v, 0.0))
    }
}
