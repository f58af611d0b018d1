use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-range hopping `alpha(0) = onsite`, `alpha(+-e_i) = nearest`, so
/// that `alpha_hat(k) = onsite + 2 nearest sum_i cos(2 pi k_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hopping {
    pub onsite: f64,
    pub nearest: f64,
}

impl Hopping {
    /// `alpha_hat(k) = mu + 2 sum_i (1 - cos 2 pi k_i)`.
    pub fn shifted_laplacian(dim: usize, mu: f64) -> Self {
        Hopping {
            onsite: mu + 2.0 * dim as f64,
            nearest: -1.0,
        }
    }
}

/// The periodic lattice `(Z / side Z)^dim` with its discrete Fourier
/// transform `psi_hat(k) = sum_x psi(x) e^{-2 pi i k.x / side}`.
#[derive(Clone)]
pub struct Lattice {
    pub dim: usize,
    pub side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Lattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lattice").field("dim", &self.dim).field("side", &self.side).finish()
    }
}

impl Lattice {
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::InvalidArgument("lattice needs dim >= 1 and side >= 1".into()));
        }
        side.checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidArgument("lattice volume overflows".into()))?;
        let mut planner = FftPlanner::new();
        Ok(Lattice {
            dim,
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        })
    }

    pub fn volume(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// Integer momentum coordinates of flat index `i` (axis 0 fastest).
    pub fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut c = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            c.push(i % self.side);
            i /= self.side;
        }
        c
    }

    /// `alpha_hat` on every momentum of the lattice.
    pub fn dispersion(&self, hopping: &Hopping) -> Vec<f64> {
        (0..self.volume())
            .map(|i| {
                let s: f64 = self
                    .coords(i)
                    .iter()
                    .map(|&c| (2.0 * PI * c as f64 / self.side as f64).cos())
                    .sum();
                hopping.onsite + 2.0 * hopping.nearest * s
            })
            .collect()
    }

    pub fn scratch(&self) -> FftScratch {
        let n = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        FftScratch {
            line: vec![C64::new(0.0, 0.0); self.side],
            fft: vec![C64::new(0.0, 0.0); n],
        }
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>, s: &mut FftScratch) {
        let l = self.side;
        let vol = self.volume();
        assert_eq!(data.len(), vol, "array does not match lattice volume");
        let mut stride = 1;
        for _ in 0..self.dim {
            let block = stride * l;
            for base in (0..vol).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for j in 0..l {
                        s.line[j] = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut s.line, &mut s.fft);
                    for j in 0..l {
                        data[start + j * stride] = s.line[j];
                    }
                }
            }
            stride = block;
        }
    }

    /// In place, unnormalised.
    pub fn forward(&self, data: &mut [C64], s: &mut FftScratch) {
        self.transform(data, &self.forward, s);
    }

    /// In place, normalised by `1 / volume`, so it inverts [`Lattice::forward`].
    pub fn inverse(&self, data: &mut [C64], s: &mut FftScratch) {
        self.transform(data, &self.inverse, s);
        let norm = 1.0 / self.volume() as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// Per-thread work buffers for [`Lattice`] transforms.
pub struct FftScratch {
    line: Vec<C64>,
    fft: Vec<C64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(lat: &Lattice, data: &[C64]) -> Vec<C64> {
        let l = lat.side as f64;
        (0..lat.volume())
            .map(|k| {
                let kc = lat.coords(k);
                (0..lat.volume())
                    .map(|x| {
                        let xc = lat.coords(x);
                        let dot: f64 = kc.iter().zip(&xc).map(|(a, b)| (*a * *b) as f64).sum();
                        data[x] * C64::from_polar(1.0, -2.0 * PI * dot / l)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_transform_in_two_dimensions() {
        let lat = Lattice::new(2, 4).unwrap();
        let data: Vec<C64> = (0..16).map(|i| C64::new(i as f64 * 0.3, (i * i) as f64 * 0.01)).collect();
        let mut fast = data.clone();
        let mut s = lat.scratch();
        lat.forward(&mut fast, &mut s);
        let slow = naive_dft(&lat, &data);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
        lat.inverse(&mut fast, &mut s);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shifted_laplacian_is_nonnegative() {
        let lat = Lattice::new(1, 8).unwrap();
        let a = lat.dispersion(&Hopping::shifted_laplacian(1, 1.0));
        assert!((a[0] - 1.0).abs() < 1e-15);
        assert!((a[4] - 5.0).abs() < 1e-15);
        assert!(a.iter().all(|&v| v >= 1.0 - 1e-12));
    }
}
