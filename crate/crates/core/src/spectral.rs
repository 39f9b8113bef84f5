//! FFT plans and wavenumbers for the periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse transforms of one length, with `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct Fourier {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl Fourier {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let k = (0..n)
            .map(|j| {
                if j <= n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                }
            })
            .collect();
        Self { n, fwd, inv, k }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Integer wavenumbers in FFT order (`0, 1, .., n/2, -(n/2 - 1), .., -1`).
    pub fn wavenumbers(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.k.iter().copied()
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }

    /// `<psi| -d^2/dx^2 |psi>` per unit `dx`-weighted norm, spectrally exact.
    pub fn kinetic_energy(&self, psi: &[Complex64], dx: f64) -> f64 {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        // Parseval: sum |psi|^2 dx = dx/n sum |c_k|^2
        let s: f64 = buf
            .iter()
            .zip(&self.k)
            .map(|(c, k)| k * k * c.norm_sqr())
            .sum();
        s * dx / self.n as f64
    }

    /// `-psi''` evaluated spectrally.
    pub fn laplacian_neg(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        buf.iter_mut().zip(&self.k).for_each(|(c, k)| *c *= k * k);
        self.inverse(&mut buf);
        buf
    }
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier").field("n", &self.n).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    #[test]
    fn round_trip_and_derivative() {
        let n = 32;
        let f = Fourier::new(n);
        let dx = TAU / n as f64;
        let psi: Vec<Complex64> = (0..n)
            .map(|j| {
                let x = j as f64 * dx;
                Complex64::new((3.0 * x).cos(), (2.0 * x).sin())
            })
            .collect();
        let mut buf = psi.clone();
        f.forward(&mut buf);
        f.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&psi) {
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-13);
        }
        let lap = f.laplacian_neg(&psi);
        for (j, l) in lap.iter().enumerate() {
            let x = j as f64 * dx;
            let expect = Complex64::new(9.0 * (3.0 * x).cos(), 4.0 * (2.0 * x).sin());
            assert_abs_diff_eq!((l - expect).norm(), 0.0, epsilon = 1e-11);
        }
        // <-d2> of cos(3x) + i sin(2x): 9 pi + 4 pi
        assert_abs_diff_eq!(f.kinetic_energy(&psi, dx), 13.0 * std::f64::consts::PI, epsilon = 1e-10);
    }
}
