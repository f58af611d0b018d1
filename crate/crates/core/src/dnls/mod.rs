//! Discrete nonlinear Schrödinger dynamics on a periodic lattice and the
//! time correlation `f_t(x) = kappa[psi_0(0)*, psi_t(x)]` of a stationary
//! ensemble.

mod integrator;
mod lattice;

pub use integrator::{FieldState, Integrator};
pub use lattice::{FftScratch, Hopping, Lattice};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples per deterministic reduction chunk.
const CHUNK: usize = 64;

/// Floating-point allowance on residuals, relative to `||f_hat_0||`.
pub const ROUNDING_BUDGET: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnlsConfig {
    pub dim: usize,
    pub side: usize,
    /// Defaults to [`Hopping::shifted_laplacian`] with `mu`.
    pub hopping: Option<Hopping>,
    pub lambda: f64,
    pub beta: f64,
    pub mu: f64,
    pub dt: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for DnlsConfig {
    fn default() -> Self {
        DnlsConfig {
            dim: 1,
            side: 32,
            hopping: None,
            lambda: 0.0,
            beta: 1.0,
            mu: 1.0,
            dt: 0.05,
            samples: 10_000,
            seed: 0,
        }
    }
}

impl DnlsConfig {
    pub fn hopping(&self) -> Hopping {
        self.hopping
            .unwrap_or_else(|| Hopping::shifted_laplacian(self.dim, self.mu))
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        DnlsConfig { lambda, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("coupling must be finite and nonnegative");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("inverse temperature must be positive");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mass shift must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("step must be positive");
        }
        if self.samples < 2 {
            return bad("need at least two samples");
        }
        let h = self.hopping();
        if !(h.onsite.is_finite() && h.nearest.is_finite()) {
            return bad("hopping must be finite");
        }
        let lat = Lattice::new(self.dim, self.side)?;
        let min = lat.dispersion(&h).into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(Error::InvalidArgument(format!(
                "hopping has negative Fourier transform {min} on the torus"
            )));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.dim, self.side)
    }

    /// `1 / (beta (alpha_hat(k) + mu))` on every lattice momentum.
    pub fn spectral_density(&self) -> Result<Vec<f64>> {
        let lat = self.lattice()?;
        Ok(lat
            .dispersion(&self.hopping())
            .into_iter()
            .map(|a| 1.0 / (self.beta * (a + self.mu)))
            .collect())
    }

    /// Exact `E[psi(0)* psi(x)]` of the initial law, as the inverse
    /// transform of the spectral density.
    pub fn initial_covariance(&self) -> Result<Vec<C64>> {
        let lat = self.lattice()?;
        let mut c: Vec<C64> = self.spectral_density()?.into_iter().map(|s| C64::new(s, 0.0)).collect();
        lat.inverse(&mut c, &mut lat.scratch());
        Ok(c)
    }
}

fn draw(lat: &Lattice, amp: &[f64], seed: u64, index: usize) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut psi: Vec<C64> = amp
        .iter()
        .map(|a| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im) * (a * std::f64::consts::FRAC_1_SQRT_2)
        })
        .collect();
    lat.inverse(&mut psi, &mut lat.scratch());
    FieldState::new(psi, 0.0)
}

fn amplitudes(config: &DnlsConfig, lat: &Lattice) -> Result<Vec<f64>> {
    let v = lat.volume() as f64;
    Ok(config.spectral_density()?.into_iter().map(|s| (v * s).sqrt()).collect())
}

/// One draw from the harmonic Gibbs law: independent circular complex
/// Gaussian Fourier modes with variance `V / (beta (alpha_hat + mu))`.
/// Sample `index` uses its own stream of the seeded generator.
pub fn sample_one(config: &DnlsConfig, index: usize) -> Result<FieldState> {
    config.validate()?;
    let lat = config.lattice()?;
    Ok(draw(&lat, &amplitudes(config, &lat)?, config.seed, index))
}

/// `config.samples` independent initial states.
pub fn sample_initial(config: &DnlsConfig) -> Result<Vec<FieldState>> {
    config.validate()?;
    let lat = config.lattice()?;
    let amp = amplitudes(config, &lat)?;
    Ok((0..config.samples)
        .into_par_iter()
        .map(|i| draw(&lat, &amp, config.seed, i))
        .collect())
}

#[derive(Clone, Debug)]
struct Stat {
    sum: Vec<C64>,
    sum_sq: Vec<f64>,
}

impl Stat {
    fn new(n: usize) -> Self {
        Stat {
            sum: vec![C64::new(0.0, 0.0); n],
            sum_sq: vec![0.0; n],
        }
    }

    fn push(&mut self, v: &[C64]) {
        for ((s, q), x) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(v) {
            *s += x;
            *q += x.norm_sqr();
        }
    }

    fn merge(&mut self, o: &Stat) {
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&o.sum_sq) {
            *a += b;
        }
    }

    fn mean_and_se(&self, n: usize) -> (Vec<C64>, Vec<f64>) {
        let nf = n as f64;
        let mean: Vec<C64> = self.sum.iter().map(|s| s / nf).collect();
        let se = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q - nf * m.norm_sqr()).max(0.0) / (nf - 1.0) / nf).sqrt())
            .collect();
        (mean, se)
    }
}

#[derive(Clone, Debug)]
struct TimeAcc {
    f_hat: Stat,
    f: Stat,
    g_hat: Stat,
    g: Stat,
    c_hat: Stat,
    drift: Stat,
    mean: Stat,
}

impl TimeAcc {
    fn new(v: usize) -> Self {
        TimeAcc {
            f_hat: Stat::new(v),
            f: Stat::new(v),
            g_hat: Stat::new(v),
            g: Stat::new(v),
            c_hat: Stat::new(v),
            drift: Stat::new(v),
            mean: Stat::new(3),
        }
    }

    fn merge(&mut self, o: &TimeAcc) {
        self.f_hat.merge(&o.f_hat);
        self.f.merge(&o.f);
        self.g_hat.merge(&o.g_hat);
        self.g.merge(&o.g);
        self.c_hat.merge(&o.c_hat);
        self.drift.merge(&o.drift);
        self.mean.merge(&o.mean);
    }
}

/// Monte Carlo estimates along a time grid, all anchor averaged over the
/// lattice. Fourier arrays use the unnormalised transform, so
/// `f_hat(k) = sum_x f(x) e^{-2 pi i k.x / L}`.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationSeries {
    pub dim: usize,
    pub side: usize,
    pub lambda: f64,
    pub samples: usize,
    pub times: Vec<f64>,
    pub dispersion: Vec<f64>,
    /// `f_t(x)`, position space.
    pub f: Vec<Vec<C64>>,
    pub f_se: Vec<Vec<f64>>,
    pub f_hat: Vec<Vec<C64>>,
    pub f_hat_se: Vec<Vec<f64>>,
    /// `E[psi_0(0)* |psi_t(x)|^2 psi_t(x)]` minus the product of means.
    pub g: Vec<Vec<C64>>,
    pub g_se: Vec<Vec<f64>>,
    pub g_hat: Vec<Vec<C64>>,
    pub g_hat_se: Vec<Vec<f64>>,
    /// Equal-time spectrum `E|psi_hat_t(k)|^2 / V`.
    pub c_hat: Vec<Vec<C64>>,
    pub c_hat_se: Vec<Vec<f64>>,
    /// `f_hat_t - e^{-i t alpha_hat} f_hat_0`.
    pub drift: Vec<Vec<C64>>,
    pub drift_se: Vec<Vec<f64>>,
    /// Site-averaged mean field at each time.
    pub mean: Vec<C64>,
    pub mean_se: Vec<f64>,
}

impl CorrelationSeries {
    pub fn volume(&self) -> usize {
        self.dispersion.len()
    }

    /// Index of the grid time closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

fn process_sample(
    lat: &Lattice,
    disp: &[f64],
    lambda: f64,
    dt: f64,
    times: &[f64],
    mut state: FieldState,
    acc: &mut [TimeAcc],
) {
    let v = lat.volume();
    let vf = v as f64;
    let mut int = Integrator::new(lat, disp, lambda, dt);
    let hat0 = int.fourier(&state);
    let m0 = state.psi.iter().sum::<C64>() / vf;
    let mut buf = vec![C64::new(0.0, 0.0); v];
    let mut scratch = lat.scratch();
    for (ti, &t) in times.iter().enumerate() {
        int.evolve(&mut state, t);
        let a = &mut acc[ti];
        let hat = int.fourier(&state);
        let cubic: Vec<C64> = state.psi.iter().map(|p| p * p.norm_sqr()).collect();
        let mt = state.psi.iter().sum::<C64>() / vf;
        let nt = cubic.iter().sum::<C64>() / vf;
        a.mean.push(&[m0, mt, nt]);

        for k in 0..v {
            buf[k] = hat0[k].conj() * hat[k] / vf;
        }
        a.f_hat.push(&buf);
        lat.inverse(&mut buf, &mut scratch);
        a.f.push(&buf);

        for k in 0..v {
            buf[k] = hat[k].norm_sqr().into();
            buf[k] /= vf;
        }
        a.c_hat.push(&buf);

        for k in 0..v {
            let rot = C64::from_polar(1.0, -t * disp[k]);
            buf[k] = hat0[k].conj() * (hat[k] - rot * hat0[k]) / vf;
        }
        a.drift.push(&buf);

        buf.copy_from_slice(&cubic);
        lat.forward(&mut buf, &mut scratch);
        for k in 0..v {
            buf[k] = hat0[k].conj() * buf[k] / vf;
        }
        a.g_hat.push(&buf);
        lat.inverse(&mut buf, &mut scratch);
        a.g.push(&buf);
    }
}

/// Estimate `f_t`, `g_t` and related spectra on a nondecreasing grid of
/// nonnegative times. Samples are reduced in fixed chunks in a fixed order,
/// so the result does not depend on the thread count.
pub fn correlation_series(config: &DnlsConfig, times: &[f64]) -> Result<CorrelationSeries> {
    config.validate()?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be nonnegative and sorted".into()));
    }
    let lat = config.lattice()?;
    let disp = lat.dispersion(&config.hopping());
    let amp = amplitudes(config, &lat)?;
    let v = lat.volume();
    let n = config.samples;
    let chunks: Vec<Vec<TimeAcc>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![TimeAcc::new(v); times.len()];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let s = draw(&lat, &amp, config.seed, i);
                process_sample(&lat, &disp, config.lambda, config.dt, times, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![TimeAcc::new(v); times.len()];
    for c in &chunks {
        for (t, a) in total.iter_mut().zip(c) {
            t.merge(a);
        }
    }

    let vf = v as f64;
    let mut out = CorrelationSeries {
        dim: config.dim,
        side: config.side,
        lambda: config.lambda,
        samples: n,
        times: times.to_vec(),
        dispersion: disp.clone(),
        f: vec![],
        f_se: vec![],
        f_hat: vec![],
        f_hat_se: vec![],
        g: vec![],
        g_se: vec![],
        g_hat: vec![],
        g_hat_se: vec![],
        c_hat: vec![],
        c_hat_se: vec![],
        drift: vec![],
        drift_se: vec![],
        mean: vec![],
        mean_se: vec![],
    };
    for (a, &t) in total.iter().zip(times) {
        let (means, means_se) = a.mean.mean_and_se(n);
        let (m0, mt, nt) = (means[0], means[1], means[2]);
        let f_corr = m0.conj() * mt;
        let g_corr = m0.conj() * nt;
        let rot0 = C64::from_polar(1.0, -t * disp[0]);
        let drift_corr = m0.conj() * (mt - rot0 * m0) * vf;

        let (mut f, f_se) = a.f.mean_and_se(n);
        f.iter_mut().for_each(|x| *x -= f_corr);
        let (mut f_hat, f_hat_se) = a.f_hat.mean_and_se(n);
        f_hat[0] -= f_corr * vf;
        let (mut g, g_se) = a.g.mean_and_se(n);
        g.iter_mut().for_each(|x| *x -= g_corr);
        let (mut g_hat, g_hat_se) = a.g_hat.mean_and_se(n);
        g_hat[0] -= g_corr * vf;
        let (c_hat, c_hat_se) = a.c_hat.mean_and_se(n);
        let (mut drift, drift_se) = a.drift.mean_and_se(n);
        drift[0] -= drift_corr;

        out.f.push(f);
        out.f_se.push(f_se);
        out.f_hat.push(f_hat);
        out.f_hat_se.push(f_hat_se);
        out.g.push(g);
        out.g_se.push(g_se);
        out.g_hat.push(g_hat);
        out.g_hat_se.push(g_hat_se);
        out.c_hat.push(c_hat);
        out.c_hat_se.push(c_hat_se);
        out.drift.push(drift);
        out.drift_se.push(drift_se);
        out.mean.push(mt);
        out.mean_se.push(means_se[1]);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: f64,
    pub lambda: f64,
    /// `||f_hat_t - e^{-i t alpha_hat} f_hat_0||` in `L^2` of the torus.
    pub residual: f64,
    /// The same norm applied to the per-mode Monte Carlo standard errors.
    pub stderr: f64,
    /// [`ROUNDING_BUDGET`] times `||f_hat_0||`.
    pub rounding: f64,
}

impl ResidualRow {
    /// `residual / (3 stderr + rounding)`; at most one when the residual is
    /// within three standard errors.
    pub fn sigma_ratio(&self) -> f64 {
        let scale = 3.0 * self.stderr + self.rounding;
        if self.residual == 0.0 {
            0.0
        } else {
            self.residual / scale
        }
    }
}

/// Distance of `f_t` from pure harmonic transport at every grid time,
/// using the midpoint rule `int |h(k)|^2 dk = V^{-1} sum_k |h(k)|^2`.
pub fn duhamel_residual(series: &CorrelationSeries) -> Vec<ResidualRow> {
    let vf = series.volume() as f64;
    let l2 = |it: &mut dyn Iterator<Item = f64>| (it.sum::<f64>() / vf).sqrt();
    let f0 = series.f_hat.first().map_or(0.0, |f| l2(&mut f.iter().map(|x| x.norm_sqr())));
    series
        .times
        .iter()
        .zip(series.drift.iter().zip(&series.drift_se))
        .map(|(&t, (d, se))| ResidualRow {
            t,
            lambda: series.lambda,
            residual: l2(&mut d.iter().map(|x| x.norm_sqr())),
            stderr: l2(&mut se.iter().map(|x| x * x)),
            rounding: ROUNDING_BUDGET * f0,
        })
        .collect()
}

/// Least-squares slope through the origin of `residual` against `lambda t`,
/// over rows with `0 < t <= 1 / lambda`. `None` at zero coupling or with no
/// usable rows.
pub fn fit_duhamel_constant(rows: &[ResidualRow]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for r in rows {
        if r.lambda > 0.0 && r.t > 0.0 && r.t * r.lambda <= 1.0 + 1e-12 {
            let x = r.lambda * r.t;
            num += r.residual * x;
            den += x * x;
        }
    }
    (den > 0.0).then(|| num / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    #[serde(flatten)]
    pub base: DnlsConfig,
    pub lambdas: Vec<f64>,
    /// Grid points per coupling, excluding `t = 0`.
    pub points: usize,
    /// Horizon at zero coupling. Positive couplings run to `1 / lambda`.
    pub t_max: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            base: DnlsConfig::default(),
            lambdas: vec![0.0, 0.01, 0.02, 0.05],
            points: 20,
            t_max: 50.0,
        }
    }
}

impl DemoConfig {
    pub fn horizon(&self, lambda: f64) -> f64 {
        if lambda > 0.0 {
            1.0 / lambda
        } else {
            self.t_max
        }
    }

    pub fn grid(&self, lambda: f64) -> Vec<f64> {
        let h = self.horizon(lambda);
        (0..=self.points).map(|i| h * i as f64 / self.points as f64).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitRow {
    pub lambda: f64,
    pub constant: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub rows: Vec<ResidualRow>,
    pub fits: Vec<FitRow>,
    /// Largest [`ResidualRow::sigma_ratio`] at zero coupling.
    pub zero_coupling_ratio: Option<f64>,
    /// `max C / min C - 1` over positive couplings.
    pub spread: Option<f64>,
}

impl DemoReport {
    /// Zero-coupling residuals within three standard errors.
    pub fn zero_coupling_ok(&self) -> bool {
        self.zero_coupling_ratio.is_none_or(|r| r <= 1.0)
    }

    /// Fitted constants agree within 25%.
    pub fn collapse_ok(&self) -> bool {
        self.spread.is_none_or(|s| s <= 0.25)
    }
}

/// Residual tables for every coupling, fitted constants, and the two
/// summary checks.
pub fn run_demo(demo: &DemoConfig) -> Result<DemoReport> {
    if demo.points == 0 || !(demo.t_max > 0.0) {
        return Err(Error::InvalidArgument("demo needs points >= 1 and t_max > 0".into()));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut zero_ratio: Option<f64> = None;
    for &lambda in &demo.lambdas {
        let series = correlation_series(&demo.base.with_lambda(lambda), &demo.grid(lambda))?;
        let table = duhamel_residual(&series);
        if lambda == 0.0 {
            for r in &table {
                let ratio = r.sigma_ratio();
                zero_ratio = Some(zero_ratio.map_or(ratio, |z| z.max(ratio)));
            }
        } else if let Some(c) = fit_duhamel_constant(&table) {
            let points = table.iter().filter(|r| r.t > 0.0).count();
            fits.push(FitRow { lambda, constant: c, points });
        }
        rows.extend(table);
    }
    let spread = (fits.len() >= 2).then(|| {
        let max = fits.iter().map(|f| f.constant).fold(f64::NEG_INFINITY, f64::max);
        let min = fits.iter().map(|f| f.constant).fold(f64::INFINITY, f64::min);
        max / min - 1.0
    });
    Ok(DemoReport {
        rows,
        fits,
        zero_coupling_ratio: zero_ratio,
        spread,
    })
}
