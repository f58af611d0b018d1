use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::spectral::{torus_grid, SpectralGaussianField};
use crate::cumulants::{CumulantTable, MomentProvider};
use crate::error::{Error, Result};
use crate::partitions::{Site, SiteRef};

/// Largest order the plug-in estimator answers.
pub const ENSEMBLE_MAX_ORDER: usize = 8;

/// Number of batches used for batch-means standard errors of cumulants.
pub const CUMULANT_BATCHES: usize = 20;

/// Bumped whenever the exported header layout changes.
pub const ENSEMBLE_SCHEMA_VERSION: u32 = 1;

/// The lattice window `start, start+1, ..., start+len-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub len: usize,
}

impl Window {
    pub fn new(start: i64, len: usize) -> Self {
        Window { start, len }
    }

    pub fn centered(radius: usize) -> Self {
        Window { start: -(radius as i64), len: 2 * radius + 1 }
    }

    pub fn points(&self) -> impl Iterator<Item = i64> {
        let s = self.start;
        (0..self.len as i64).map(move |i| s + i)
    }
}

/// A matrix of field realisations, one row per sample and one column per
/// site. Plug-in moments `(1/N) sum_s prod_j y_s(i_j)` make it a
/// [`MomentProvider`]; cumulants from it carry an `O(1/N)` bias.
#[derive(Clone, Debug)]
pub struct EnsembleEstimator {
    sites: Vec<Site>,
    columns: HashMap<Site, usize>,
    data: Vec<C64>,
    samples: usize,
    seed: Option<u64>,
    window: Option<Window>,
}

/// JSON header written next to the flat binary sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub schema_version: u32,
    pub samples: usize,
    pub sites: Vec<Site>,
    pub seed: Option<u64>,
    #[serde(rename = "box")]
    pub window: Option<Window>,
    /// Relative path of the binary file: little-endian `f64` pairs
    /// `(re, im)`, row-major over `samples x sites`.
    pub data: String,
}

impl EnsembleEstimator {
    pub fn new(sites: Vec<Site>, data: Vec<C64>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidArgument("ensemble without sites".into()));
        }
        if !data.len().is_multiple_of(sites.len()) {
            return Err(Error::InvalidArgument("sample matrix is ragged".into()));
        }
        let samples = data.len() / sites.len();
        if samples < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        let mut columns = HashMap::new();
        for (i, s) in sites.iter().enumerate() {
            if columns.insert(*s, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate site {s:?}")));
            }
        }
        Ok(EnsembleEstimator {
            sites,
            columns,
            data,
            samples,
            seed: None,
            window: None,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Row `s` of the sample matrix.
    pub fn row(&self, s: usize) -> &[C64] {
        let w = self.sites.len();
        &self.data[s * w..(s + 1) * w]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    fn cols(&self, index: &[SiteRef]) -> Result<Vec<(usize, bool)>> {
        index
            .iter()
            .map(|r| {
                self.columns
                    .get(&r.site)
                    .map(|&c| (c, r.conj))
                    .ok_or(Error::UnknownSite(r.site))
            })
            .collect()
    }

    fn product(row: &[C64], cols: &[(usize, bool)]) -> C64 {
        cols.iter().fold(C64::new(1.0, 0.0), |acc, &(c, conj)| {
            acc * if conj { row[c].conj() } else { row[c] }
        })
    }

    /// Sample mean of `y^I` and its standard error
    /// `sqrt(sum |p_s - mean|^2 / (N (N-1)))`.
    pub fn moment_with_stderr(&self, index: &[SiteRef]) -> Result<(C64, f64)> {
        let cols = self.cols(index)?;
        let n = self.samples as f64;
        let mean: C64 = (0..self.samples).map(|s| Self::product(self.row(s), &cols)).sum::<C64>() / n;
        let ss: f64 = (0..self.samples)
            .map(|s| (Self::product(self.row(s), &cols) - mean).norm_sqr())
            .sum();
        Ok((mean, (ss / (n * (n - 1.0))).sqrt()))
    }

    /// Estimator restricted to rows `range`.
    pub fn subsample(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let w = self.sites.len();
        let mut e = EnsembleEstimator::new(self.sites.clone(), self.data[range.start * w..range.end * w].to_vec())?;
        e.seed = self.seed;
        e.window = self.window;
        Ok(e)
    }

    /// Plug-in cumulant with a batch-means standard error over
    /// [`CUMULANT_BATCHES`] equal batches.
    pub fn cumulant_with_stderr(&self, index: &[SiteRef]) -> Result<(C64, f64)> {
        let value = CumulantTable::new(self).cumulant(index)?;
        let b = CUMULANT_BATCHES.min(self.samples / 2).max(2);
        let size = self.samples / b;
        let batch: Vec<C64> = (0..b)
            .map(|i| {
                let e = self.subsample(i * size..(i + 1) * size)?;
                CumulantTable::new(&e).cumulant(index)
            })
            .collect::<Result<_>>()?;
        let mean: C64 = batch.iter().sum::<C64>() / b as f64;
        let var: f64 = batch.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (b as f64 - 1.0);
        Ok((value, (var / b as f64).sqrt()))
    }

    /// Writes `<stem>.bin` and `<stem>.json`; returns the header path.
    pub fn export(&self, stem: &Path) -> Result<PathBuf> {
        let bin = stem.with_extension("bin");
        let json = stem.with_extension("json");
        let mut w = BufWriter::new(File::create(&bin)?);
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        let header = EnsembleHeader {
            schema_version: ENSEMBLE_SCHEMA_VERSION,
            samples: self.samples,
            sites: self.sites.clone(),
            seed: self.seed,
            window: self.window,
            data: bin
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        std::fs::write(&json, serde_json::to_vec_pretty(&header)?)?;
        Ok(json)
    }

    /// Reads an ensemble written by [`EnsembleEstimator::export`].
    pub fn import(header_path: &Path) -> Result<Self> {
        let header: EnsembleHeader = serde_json::from_slice(&std::fs::read(header_path)?)?;
        if header.schema_version != ENSEMBLE_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported ensemble schema {}",
                header.schema_version
            )));
        }
        let bin = header_path.with_file_name(&header.data);
        let mut bytes = Vec::new();
        BufReader::new(File::open(bin)?).read_to_end(&mut bytes)?;
        let expected = header.samples * header.sites.len() * 16;
        if bytes.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "binary holds {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let data = bytes
            .chunks_exact(16)
            .map(|c| C64::new(f(&c[..8]), f(&c[8..])))
            .collect();
        let mut e = EnsembleEstimator::new(header.sites, data)?;
        e.seed = header.seed;
        e.window = header.window;
        Ok(e)
    }
}

impl MomentProvider for EnsembleEstimator {
    fn moment(&self, index: &[SiteRef]) -> Result<C64> {
        if index.len() > ENSEMBLE_MAX_ORDER {
            return Err(Error::OrderOverflow {
                order: index.len(),
                max: ENSEMBLE_MAX_ORDER,
            });
        }
        let cols = self.cols(index)?;
        let sum: C64 = (0..self.samples).map(|s| Self::product(self.row(s), &cols)).sum();
        Ok(sum / self.samples as f64)
    }

    fn max_order(&self) -> usize {
        ENSEMBLE_MAX_ORDER
    }
}

/// Per-mode factors of the 2x2 spectral matrix `[[F1, G], [G, F2]]`:
/// `(L11, L21, L22)` with `L L^T` equal to it.
fn mode_factors(field: &SpectralGaussianField, m: usize) -> Vec<(f64, f64, f64)> {
    torus_grid(m)
        .map(|k| {
            let a = field.psi.at(k).max(0.0);
            let b = field.phi.at(k).max(0.0);
            let g = field.cross.at(k);
            let l11 = a.sqrt();
            let l21 = if l11 > 0.0 { g / l11 } else { 0.0 };
            let l22 = (b - l21 * l21).max(0.0).sqrt();
            (l11, l21, l22)
        })
        .collect()
}

/// Draws `n` independent realisations of both components of `field` on
/// `window` by spectral synthesis on a periodic grid of `max(grid, 2 len)`
/// midpoint modes. Sample `s` uses the ChaCha8 stream `s` of `seed`, so the
/// result does not depend on thread scheduling.
pub fn sample_ensemble(field: &SpectralGaussianField, window: Window, n: usize, seed: u64) -> Result<EnsembleEstimator> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if window.len == 0 {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    let m = field.grid.max((2 * window.len).next_power_of_two());
    let factors = mode_factors(field, m);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(m);
    let norm = 1.0 / (m as f64).sqrt();
    // Z(x) = sum_j a_j e^{2 pi i k_j x} = twist(x) * IFFT(a)[x mod m]
    let shift = -0.5 + 0.5 / m as f64;
    let points: Vec<(usize, C64)> = window
        .points()
        .map(|x| {
            (
                x.rem_euclid(m as i64) as usize,
                C64::from_polar(1.0, 2.0 * std::f64::consts::PI * shift * x as f64),
            )
        })
        .collect();
    let width = 2 * window.len;
    let mut data = vec![C64::new(0.0, 0.0); n * width];
    data.par_chunks_mut(width).enumerate().for_each_init(
        || (vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
        |(zpsi, zphi, scratch), (s, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let mut gauss = || {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            };
            for (j, &(l11, l21, l22)) in factors.iter().enumerate() {
                let (u, v) = (gauss(), gauss());
                zpsi[j] = u * (l11 * norm);
                zphi[j] = (u * l21 + v * l22) * norm;
            }
            fft.process_with_scratch(zpsi, scratch);
            fft.process_with_scratch(zphi, scratch);
            let sqrt2 = std::f64::consts::SQRT_2;
            for (i, &(idx, tw)) in points.iter().enumerate() {
                row[i] = C64::new(sqrt2 * (tw * zpsi[idx]).re, 0.0);
                row[window.len + i] = C64::new(sqrt2 * (tw * zphi[idx]).re, 0.0);
            }
        },
    );
    let sites = window
        .points()
        .map(|x| Site::new(0, x))
        .chain(window.points().map(|x| Site::new(1, x)))
        .collect();
    let mut e = EnsembleEstimator::new(sites, data)?;
    e.seed = Some(seed);
    e.window = Some(window);
    Ok(e)
}
