use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::cumulants::MomentProvider;
use crate::error::{Error, Result};
use crate::partitions::{Site, SiteRef, DEFAULT_MAX_ELEMENTS};

/// One outcome of a finite sample space.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub prob: f64,
    /// Value at each site, in the field's site order.
    pub values: Vec<C64>,
}

impl Atom {
    /// `y_r` on this outcome.
    ///
    /// # Panics
    ///
    /// Panics if the site is not part of `field`.
    pub fn value(&self, field: &FiniteDiscreteField, r: SiteRef) -> C64 {
        let v = self.values[field.index[&r.site]];
        if r.conj {
            v.conj()
        } else {
            v
        }
    }
}

/// A random field taking finitely many values with given probabilities.
/// Every moment is an exact weighted sum.
#[derive(Clone, Debug)]
pub struct FiniteDiscreteField {
    sites: Vec<Site>,
    atoms: Vec<Atom>,
    index: HashMap<Site, usize>,
}

impl FiniteDiscreteField {
    pub fn new(sites: Vec<Site>, atoms: Vec<(f64, Vec<C64>)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            if index.insert(*s, i).is_some() {
                return Err(Error::InvalidDistribution(format!("duplicate site {s:?}")));
            }
        }
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut total = 0.0;
        for (p, v) in &atoms {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::InvalidDistribution(format!("bad probability {p}")));
            }
            if v.len() != sites.len() {
                return Err(Error::InvalidDistribution(format!(
                    "atom has {} values for {} sites",
                    v.len(),
                    sites.len()
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        let atoms = atoms
            .into_iter()
            .map(|(prob, values)| Atom { prob, values })
            .collect();
        Ok(FiniteDiscreteField { sites, atoms, index })
    }

    /// Random field on sites `(0, 0..num_sites)` with `num_atoms` outcomes.
    /// Values are uniform on `[-1, 1]`, or on the square `[-1,1]^2` of the
    /// complex plane when `complex` is set.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_sites: usize, num_atoms: usize, complex: bool) -> Self {
        let sites = (0..num_sites as i64).map(|x| Site::new(0, x)).collect();
        Self::random_on(rng, sites, num_atoms, complex)
    }

    /// Random field on the given sites.
    ///
    /// # Panics
    ///
    /// Panics if `sites` contains duplicates or `num_atoms == 0`.
    pub fn random_on<R: Rng + ?Sized>(rng: &mut R, sites: Vec<Site>, num_atoms: usize, complex: bool) -> Self {
        let weights: Vec<f64> = (0..num_atoms).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let atoms = weights
            .iter()
            .map(|w| {
                let values = (0..sites.len())
                    .map(|_| {
                        let re = rng.random_range(-1.0..1.0);
                        let im = if complex { rng.random_range(-1.0..1.0) } else { 0.0 };
                        C64::new(re, im)
                    })
                    .collect();
                (w / total, values)
            })
            .collect();
        Self::new(sites, atoms).expect("random field is well formed")
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn contains(&self, site: Site) -> bool {
        self.index.contains_key(&site)
    }

    /// True if any value has a nonzero imaginary part.
    pub fn is_complex(&self) -> bool {
        self.atoms.iter().any(|a| a.values.iter().any(|v| v.im != 0.0))
    }

    /// All references worth distinguishing: each site, plus its conjugate
    /// when the field is complex.
    pub fn site_refs(&self) -> Vec<SiteRef> {
        let complex = self.is_complex();
        let mut out = Vec::new();
        for s in &self.sites {
            out.push(SiteRef::new(*s));
            if complex {
                out.push(SiteRef::new(*s).conjugate());
            }
        }
        out
    }

    fn columns(&self, index: &[SiteRef]) -> Result<Vec<(usize, bool)>> {
        index
            .iter()
            .map(|r| {
                self.index
                    .get(&r.site)
                    .map(|&c| (c, r.conj))
                    .ok_or(Error::UnknownSite(r.site))
            })
            .collect()
    }

    /// Expectation of an arbitrary function of one outcome.
    pub fn expect(&self, f: impl Fn(&Atom) -> C64) -> C64 {
        self.atoms.iter().map(|a| a.prob * f(a)).sum()
    }
}

impl MomentProvider for FiniteDiscreteField {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        let cols = self.columns(index)?;
        Ok(self
            .atoms
            .iter()
            .map(|a| {
                cols.iter().fold(C64::new(a.prob, 0.0), |acc, &(c, conj)| {
                    let v = a.values[c];
                    acc * if conj { v.conj() } else { v }
                })
            })
            .sum())
    }

    fn max_order(&self) -> usize {
        DEFAULT_MAX_ELEMENTS
    }

    fn log_generating_function(&self, vars: &[SiteRef], lambda: &[f64]) -> Option<C64> {
        let cols = self.columns(vars).ok()?;
        let g: C64 = self
            .atoms
            .iter()
            .map(|a| {
                let s: C64 = cols
                    .iter()
                    .zip(lambda)
                    .map(|(&(c, conj), l)| *l * if conj { a.values[c].conj() } else { a.values[c] })
                    .sum();
                a.prob * s.exp()
            })
            .sum();
        Some(g.ln())
    }
}
