//! Butterworth band-pass as cascaded biquads, applied forward and backward.
//!
//! Each edge is an n-th order Butterworth section pair obtained with the
//! bilinear transform (frequency pre-warped at the cutoff), so the
//! single-pass squared magnitude of the low edge is
//! `1 / (1 + (tan(pi f / fs) / tan(pi fc / fs))^(2n))` and the mirror for the
//! high-pass edge. Forward-backward filtering squares the magnitude and
//! cancels the phase.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Largest pole radius.
    fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
        } else {
            a2.abs().sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

/// Butterworth quality factors for the conjugate pole pairs of an even order.
fn butterworth_q(order: usize) -> impl Iterator<Item = f64> {
    (0..order / 2).map(move |k| 1.0 / (2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).sin()))
}

impl SosFilter {
    /// Band-pass made of an `order`-th order high-pass at `lo_hz` and an
    /// `order`-th order low-pass at `hi_hz`. `order` must be even.
    pub fn butterworth_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs_hz: f64) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::Precondition(format!("filter order must be even and positive, got {order}")));
        }
        let nyquist = fs_hz / 2.0;
        if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyquist) {
            return Err(Error::Precondition(format!(
                "band edges must satisfy 0 < {lo_hz} < {hi_hz} < {nyquist} Hz"
            )));
        }
        let k_lo = (PI * lo_hz / fs_hz).tan();
        let k_hi = (PI * hi_hz / fs_hz).tan();
        let mut sections = Vec::with_capacity(order);
        for q in butterworth_q(order) {
            let norm = 1.0 / (1.0 + k_hi / q + k_hi * k_hi);
            let b0 = k_hi * k_hi * norm;
            sections.push(Biquad {
                b: [b0, 2.0 * b0, b0],
                a: [2.0 * (k_hi * k_hi - 1.0) * norm, (1.0 - k_hi / q + k_hi * k_hi) * norm],
            });
        }
        for q in butterworth_q(order) {
            let norm = 1.0 / (1.0 + k_lo / q + k_lo * k_lo);
            sections.push(Biquad {
                b: [norm, -2.0 * norm, norm],
                a: [2.0 * (k_lo * k_lo - 1.0) * norm, (1.0 - k_lo / q + k_lo * k_lo) * norm],
            });
        }
        let filter = Self { sections };
        filter.check_stable()?;
        Ok(filter)
    }

    fn check_stable(&self) -> Result<()> {
        for (i, s) in self.sections.iter().enumerate() {
            if s.b.iter().chain(&s.a).any(|c| !c.is_finite()) {
                return Err(Error::Numeric(format!("section {i} has non-finite coefficients")));
            }
            let r = s.pole_radius();
            if r >= 1.0 - 1e-9 {
                return Err(Error::Numeric(format!(
                    "section {i} is not numerically stable (pole radius {r})"
                )));
            }
        }
        Ok(())
    }

    /// Overall order, two per section.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Per-section initial states giving a steady-state response to a unit step.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut gain = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                // Transposed direct form II at rest under constant input u, output g*u.
                let z1 = (g - s.b[0]) * gain;
                let z2 = (s.b[2] - s.a[1] * g) * gain;
                gain *= g;
                [z1, z2]
            })
            .collect()
    }

    /// Single causal pass with initial state `zi * x0`.
    fn run(&self, x: &mut [f64], zi: &[[f64; 2]], x0: f64) {
        for (s, z0) in self.sections.iter().zip(zi) {
            let (mut z1, mut z2) = (z0[0] * x0, z0[1] * x0);
            let [b0, b1, b2] = s.b;
            let [a1, a2] = s.a;
            for v in x.iter_mut() {
                let input = *v;
                let y = b0 * input + z1;
                z1 = b1 * input - a1 * y + z2;
                z2 = b2 * input - a2 * y;
                *v = y;
            }
        }
    }

    /// Number of samples added on each side before filtering.
    pub fn pad_len(&self) -> usize {
        3 * self.order()
    }

    /// Zero-phase filtering. The signal is extended at both ends by an odd
    /// reflection of `pad_len()` samples and both passes start from the
    /// steady state for the first sample, which keeps edge transients small.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return Err(Error::Precondition(format!(
                "signal of {n} samples is too short for zero-phase filtering (needs > {pad})"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let x0 = ext[0];
        self.run(&mut ext, &zi, x0);
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, &zi, y0);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}
