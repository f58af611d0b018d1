use num_complex::Complex64 as C64;

use super::lattice::{FftScratch, Lattice};

/// A lattice field configuration at time `t`, stored in position space.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub psi: Vec<C64>,
    pub t: f64,
}

impl FieldState {
    pub fn new(psi: Vec<C64>, t: f64) -> Self {
        FieldState { psi, t }
    }

    /// `sum_x |psi(x)|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn distance(&self, other: &FieldState) -> f64 {
        self.psi
            .iter()
            .zip(&other.psi)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Strang split-step integrator for `i d/dt psi = alpha * psi + lambda |psi|^2 psi`.
///
/// Each step is `N(dt/2) L(dt) N(dt/2)` where `L` is the exact harmonic
/// rotation in Fourier space and `N` the exact pointwise phase. Adjacent
/// half steps are fused, which is exact because `N` leaves `|psi|` unchanged.
pub struct Integrator<'a> {
    lattice: &'a Lattice,
    dispersion: &'a [f64],
    lambda: f64,
    dt: f64,
    scratch: FftScratch,
    phase_step: f64,
    phases: Vec<C64>,
}

impl<'a> Integrator<'a> {
    /// # Panics
    ///
    /// Panics if `dispersion` does not cover the lattice or `dt` is not positive.
    pub fn new(lattice: &'a Lattice, dispersion: &'a [f64], lambda: f64, dt: f64) -> Self {
        assert_eq!(dispersion.len(), lattice.volume());
        assert!(dt > 0.0 && dt.is_finite(), "step must be positive");
        Integrator {
            lattice,
            dispersion,
            lambda,
            dt,
            scratch: lattice.scratch(),
            phase_step: f64::NAN,
            phases: Vec::new(),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        self.lattice
    }

    /// Number of steps and the step actually used to cover `span`.
    pub fn steps_for(&self, span: f64) -> (usize, f64) {
        let n = (span.abs() / self.dt).round().max(1.0) as usize;
        (n, span / n as f64)
    }

    fn nonlinear(&self, psi: &mut [C64], h: f64) {
        let lh = self.lambda * h;
        for v in psi.iter_mut() {
            *v *= C64::from_polar(1.0, -lh * v.norm_sqr());
        }
    }

    fn linear(&mut self, psi: &mut [C64], h: f64) {
        if self.phase_step != h {
            self.phases = self.dispersion.iter().map(|&a| C64::from_polar(1.0, -h * a)).collect();
            self.phase_step = h;
        }
        self.lattice.forward(psi, &mut self.scratch);
        for (v, p) in psi.iter_mut().zip(&self.phases) {
            *v *= p;
        }
        self.lattice.inverse(psi, &mut self.scratch);
    }

    /// Advance `state` to time `until`, forwards or backwards. At zero
    /// coupling the harmonic flow is applied in one exact rotation.
    pub fn evolve(&mut self, state: &mut FieldState, until: f64) {
        let span = until - state.t;
        if span == 0.0 {
            return;
        }
        if self.lambda == 0.0 {
            self.linear(&mut state.psi, span);
            state.t = until;
            return;
        }
        let (n, h) = self.steps_for(span);
        self.nonlinear(&mut state.psi, 0.5 * h);
        for i in 0..n {
            self.linear(&mut state.psi, h);
            let nl = if i + 1 == n { 0.5 * h } else { h };
            self.nonlinear(&mut state.psi, nl);
        }
        state.t = until;
    }

    /// `psi_hat` of the state, unnormalised.
    pub fn fourier(&mut self, state: &FieldState) -> Vec<C64> {
        let mut out = state.psi.clone();
        self.lattice.forward(&mut out, &mut self.scratch);
        out
    }

    /// Forward transform of an arbitrary lattice array, in place.
    pub fn transform(&mut self, data: &mut [C64]) {
        self.lattice.forward(data, &mut self.scratch);
    }

    /// `(1/V) sum_k alpha_hat(k) |psi_hat(k)|^2`.
    pub fn harmonic_energy(&mut self, state: &FieldState) -> f64 {
        let hat = self.fourier(state);
        let v = hat.len() as f64;
        hat.iter().zip(self.dispersion).map(|(p, a)| a * p.norm_sqr()).sum::<f64>() / v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnls::lattice::Hopping;

    fn wave(n: usize) -> FieldState {
        FieldState::new(
            (0..n)
                .map(|x| C64::new((0.7 * x as f64).sin() + 0.2, (1.3 * x as f64).cos() * 0.5))
                .collect(),
            0.0,
        )
    }

    #[test]
    fn harmonic_flow_is_exact_rotation() {
        let lat = Lattice::new(1, 16).unwrap();
        let disp = lat.dispersion(&Hopping::shifted_laplacian(1, 1.0));
        let mut int = Integrator::new(&lat, &disp, 0.0, 0.05);
        let mut s = wave(16);
        let hat0 = int.fourier(&s);
        let e0 = int.harmonic_energy(&s);
        int.evolve(&mut s, 3.7);
        let hat = int.fourier(&s);
        for ((h, h0), a) in hat.iter().zip(&hat0).zip(&disp) {
            assert!((h - h0 * C64::from_polar(1.0, -3.7 * a)).norm() < 1e-12);
        }
        assert!((int.harmonic_energy(&s) - e0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_flow_reverses() {
        let lat = Lattice::new(2, 8).unwrap();
        let disp = lat.dispersion(&Hopping::shifted_laplacian(2, 0.5));
        let mut int = Integrator::new(&lat, &disp, 0.0, 0.05);
        let s0 = wave(64);
        let mut s = s0.clone();
        int.evolve(&mut s, 10.0);
        int.evolve(&mut s, 0.0);
        assert!(s.distance(&s0) < 1e-10);
    }

    #[test]
    fn single_site_is_a_pure_phase() {
        let lat = Lattice::new(1, 1).unwrap();
        let hop = Hopping { onsite: 0.0, nearest: 0.0 };
        let disp = lat.dispersion(&hop);
        let psi0 = C64::new(0.6, -0.9);
        let mut int = Integrator::new(&lat, &disp, 0.8, 0.05);
        let mut s = FieldState::new(vec![psi0], 0.0);
        int.evolve(&mut s, 2.5);
        let expect = psi0 * C64::from_polar(1.0, -0.8 * psi0.norm_sqr() * 2.5);
        assert!((s.psi[0] - expect).norm() < 1e-13);
    }

    #[test]
    fn nonlinear_flow_conserves_norm() {
        let lat = Lattice::new(1, 32).unwrap();
        let disp = lat.dispersion(&Hopping::shifted_laplacian(1, 1.0));
        let mut int = Integrator::new(&lat, &disp, 1.0, 0.05);
        let mut s = wave(32);
        let n0 = s.norm_sqr();
        int.evolve(&mut s, 20.0);
        assert!((s.norm_sqr() - n0).abs() <= 1e-10);
    }

    #[test]
    fn strang_order_is_two() {
        let lat = Lattice::new(1, 32).unwrap();
        let disp = lat.dispersion(&Hopping::shifted_laplacian(1, 1.0));
        let run = |dt: f64| {
            let mut int = Integrator::new(&lat, &disp, 1.0, dt);
            let mut s = wave(32);
            int.evolve(&mut s, 1.0);
            s
        };
        let (a, b, c) = (run(0.1), run(0.05), run(0.025));
        let order = (a.distance(&b) / b.distance(&c)).log2();
        assert!((1.7..=2.3).contains(&order), "order {order}");
    }
}
