use num_complex::Complex64 as C64;

use crate::cumulants::MomentProvider;
use crate::error::{Error, Result};
use crate::partitions::{Site, SiteRef};

/// Largest moment order the Gaussian models answer.
pub const GAUSSIAN_MAX_ORDER: usize = 8;

/// `E[y^I]` of a Gaussian family by Isserlis' theorem: the sum over all
/// ways of splitting `I` into singletons (weighted by the mean) and pairs
/// (weighted by the covariance `E[y_a y_b] - E[y_a]E[y_b]`).
pub fn isserlis(
    index: &[SiteRef],
    mean: &dyn Fn(SiteRef) -> C64,
    cov: &dyn Fn(SiteRef, SiteRef) -> C64,
) -> C64 {
    fn go(
        rest: &mut Vec<SiteRef>,
        mean: &dyn Fn(SiteRef) -> C64,
        cov: &dyn Fn(SiteRef, SiteRef) -> C64,
    ) -> C64 {
        let Some(first) = rest.pop() else {
            return C64::new(1.0, 0.0);
        };
        let mut total = C64::new(0.0, 0.0);
        let m = mean(first);
        if m != C64::new(0.0, 0.0) {
            total += m * go(rest, mean, cov);
        }
        for i in 0..rest.len() {
            let partner = rest[i];
            let c = cov(first, partner);
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let last = rest.len() - 1;
            rest.swap(i, last);
            rest.pop();
            total += c * go(rest, mean, cov);
            rest.push(partner);
            rest.swap(i, last);
        }
        rest.push(first);
        total
    }
    let mut v = index.to_vec();
    go(&mut v, mean, cov)
}

fn check_order(index: &[SiteRef]) -> Result<()> {
    if index.len() > GAUSSIAN_MAX_ORDER {
        return Err(Error::OrderOverflow {
            order: index.len(),
            max: GAUSSIAN_MAX_ORDER,
        });
    }
    Ok(())
}

/// Symmetric positive semi-definite check by Cholesky with a relative
/// tolerance on the pivots.
fn is_psd(cov: &[Vec<f64>]) -> bool {
    let n = cov.len();
    let scale = (0..n).map(|i| cov[i][i].abs()).fold(1e-300, f64::max);
    let tol = 1e-12 * scale;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = cov[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return false;
        }
        let pivot = d.max(0.0).sqrt();
        l[j][j] = pivot;
        for i in j + 1..n {
            let s = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if pivot > tol.sqrt() {
                l[i][j] = s / pivot;
            } else if s.abs() > tol.sqrt() {
                return false;
            }
        }
    }
    true
}

/// A real Gaussian vector indexed by sites `(0, 0..n)`.
#[derive(Clone, Debug)]
pub struct GaussianVector {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl GaussianVector {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if cov.len() != n || cov.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidDistribution("covariance shape mismatch".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (1.0 + cov[i][j].abs()) {
                    return Err(Error::InvalidDistribution("covariance not symmetric".into()));
                }
            }
        }
        if !is_psd(&cov) {
            return Err(Error::InvalidDistribution(
                "covariance not positive semi-definite".into(),
            ));
        }
        Ok(GaussianVector { mean, cov })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    fn slot(&self, r: SiteRef) -> Result<usize> {
        let Site { comp, x } = r.site;
        if comp != 0 || x < 0 || x as usize >= self.mean.len() {
            return Err(Error::UnknownSite(r.site));
        }
        Ok(x as usize)
    }
}

impl MomentProvider for GaussianVector {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        check_order(index)?;
        for r in index {
            self.slot(*r)?;
        }
        let mean = |r: SiteRef| C64::new(self.mean[r.site.x as usize], 0.0);
        let cov = |a: SiteRef, b: SiteRef| C64::new(self.cov[a.site.x as usize][b.site.x as usize], 0.0);
        Ok(isserlis(index, &mean, &cov))
    }

    fn max_order(&self) -> usize {
        GAUSSIAN_MAX_ORDER
    }

    fn known_cumulant(&self, index: &[SiteRef]) -> Option<C64> {
        let slots: Vec<usize> = index.iter().map(|r| self.slot(*r).ok()).collect::<Option<_>>()?;
        Some(C64::new(
            match slots.as_slice() {
                [a] => self.mean[*a],
                [a, b] => self.cov[*a][*b],
                _ => 0.0,
            },
            0.0,
        ))
    }

    fn cumulant_vanishes(&self, order: usize) -> bool {
        order > 2
    }

    fn log_generating_function(&self, vars: &[SiteRef], lambda: &[f64]) -> Option<C64> {
        let slots: Vec<usize> = vars.iter().map(|r| self.slot(*r).ok()).collect::<Option<_>>()?;
        let mut v = 0.0;
        for (i, &a) in slots.iter().enumerate() {
            v += lambda[i] * self.mean[a];
            for (j, &b) in slots.iter().enumerate() {
                v += 0.5 * lambda[i] * lambda[j] * self.cov[a][b];
            }
        }
        Some(C64::new(v, 0.0))
    }
}

/// A centered circularly symmetric complex Gaussian vector on sites
/// `(0, 0..n)`, with `cov[a][b] = E[psi(a)* psi(b)]` and `E[psi(a) psi(b)] = 0`.
#[derive(Clone, Debug)]
pub struct CircularGaussian {
    cov: Vec<Vec<C64>>,
}

impl CircularGaussian {
    pub fn new(cov: Vec<Vec<C64>>) -> Result<Self> {
        let n = cov.len();
        if cov.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidDistribution("covariance shape mismatch".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (cov[i][j] - cov[j][i].conj()).norm() > 1e-12 * (1.0 + cov[i][j].norm()) {
                    return Err(Error::InvalidDistribution("covariance not Hermitian".into()));
                }
            }
        }
        // A Hermitian H is PSD iff the real symmetric [[Re H, -Im H], [Im H, Re H]] is.
        let mut real = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                let h = cov[i][j];
                real[i][j] = h.re;
                real[i + n][j + n] = h.re;
                real[i][j + n] = -h.im;
                real[i + n][j] = h.im;
            }
        }
        if !is_psd(&real) {
            return Err(Error::InvalidDistribution(
                "covariance not positive semi-definite".into(),
            ));
        }
        Ok(CircularGaussian { cov })
    }

    /// Independent sites with `E|psi|^2 = variance`.
    pub fn iid(n: usize, variance: f64) -> Self {
        let cov = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| C64::new(if i == j { variance } else { 0.0 }, 0.0))
                    .collect()
            })
            .collect();
        CircularGaussian { cov }
    }

    pub fn len(&self) -> usize {
        self.cov.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cov.is_empty()
    }

    fn slot(&self, r: SiteRef) -> Option<usize> {
        let Site { comp, x } = r.site;
        (comp == 0 && x >= 0 && (x as usize) < self.cov.len()).then_some(x as usize)
    }

    fn pair(&self, a: SiteRef, b: SiteRef) -> C64 {
        let (i, j) = (a.site.x as usize, b.site.x as usize);
        match (a.conj, b.conj) {
            (true, false) => self.cov[i][j],
            (false, true) => self.cov[j][i],
            _ => C64::new(0.0, 0.0),
        }
    }
}

impl MomentProvider for CircularGaussian {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        check_order(index)?;
        for r in index {
            self.slot(*r).ok_or(Error::UnknownSite(r.site))?;
        }
        let zero = |_: SiteRef| C64::new(0.0, 0.0);
        Ok(isserlis(index, &zero, &|a, b| self.pair(a, b)))
    }

    fn max_order(&self) -> usize {
        GAUSSIAN_MAX_ORDER
    }

    fn known_cumulant(&self, index: &[SiteRef]) -> Option<C64> {
        for r in index {
            self.slot(*r)?;
        }
        Some(match index {
            [a, b] => self.pair(*a, *b),
            _ => C64::new(0.0, 0.0),
        })
    }

    fn cumulant_vanishes(&self, order: usize) -> bool {
        order != 2
    }
}
