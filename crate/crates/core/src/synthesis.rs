//! Fast evaluation of truncated eigen-expansions on the uniform space grid.
//!
//! At `y_j = j/M` the sine factors alias with period `2M` in the mode index:
//! `sin(π(k + 2M)j/M) = sin(πkj/M)` and `sin(π(2M - k)j/M) = -sin(πkj/M)`.
//! Any number of modes folds exactly onto bins `1..M-1`, after which a single
//! DST-I (computed through an odd-extended complex FFT of length `2M`) gives
//! every grid value at once.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Reusable planner state for rows on a fixed grid `y_j = j/M`, `j = 1..=M`.
pub struct SineSynthesizer {
    space_steps: usize,
    fft: Option<Arc<dyn Fft<f64>>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
    folded: Vec<f64>,
    envelope: Vec<f64>,
    envelope_eta: Option<f64>,
}

impl SineSynthesizer {
    pub fn new(space_steps: usize) -> Self {
        assert!(space_steps >= 1, "space grid needs at least one step");
        let len = 2 * space_steps;
        let (fft, scratch_len) = if space_steps >= 2 {
            let fft = FftPlanner::new().plan_fft_forward(len);
            let scratch_len = fft.get_inplace_scratch_len();
            (Some(fft), scratch_len)
        } else {
            (None, 0)
        };
        Self {
            space_steps,
            fft,
            buffer: vec![Complex64::default(); len],
            scratch: vec![Complex64::default(); scratch_len],
            folded: vec![0.0; space_steps],
            envelope: vec![0.0; space_steps],
            envelope_eta: None,
        }
    }

    pub fn space_steps(&self) -> usize {
        self.space_steps
    }

    /// Bin in `1..M` and sign that mode `k` folds onto, or `None` when its
    /// sine vanishes at every grid point.
    #[inline]
    pub fn fold_target(&self, k: usize) -> Option<(usize, f64)> {
        let m = self.space_steps;
        let period = 2 * m;
        let r = k % period;
        if m < 2 || r == 0 || r == m {
            None
        } else if r < m {
            Some((r, 1.0))
        } else {
            Some((period - r, -1.0))
        }
    }

    /// Writes `S_j = Σ_k c_k sin(πkj/M)` for `j = 1..=M` into `out`, where
    /// `coefficients[k-1] = c_k`.
    pub fn sine_sums(&mut self, coefficients: &[f64], out: &mut [f64]) {
        let mut folded = std::mem::take(&mut self.folded);
        folded.iter_mut().for_each(|v| *v = 0.0);
        for (i, &c) in coefficients.iter().enumerate() {
            if let Some((bin, sign)) = self.fold_target(i + 1) {
                folded[bin] += sign * c;
            }
        }
        self.sine_sums_folded(&folded, out);
        self.folded = folded;
    }

    /// Sine sums from coefficients already folded onto bins (`folded[b]` for
    /// `b = 1..M`; index 0 is ignored).
    #[allow(clippy::needless_range_loop)]
    pub fn sine_sums_folded(&mut self, folded: &[f64], out: &mut [f64]) {
        let m = self.space_steps;
        assert_eq!(out.len(), m);
        assert_eq!(folded.len(), m);
        let Some(fft) = self.fft.as_ref() else {
            // M = 1: the only grid point is y = 1.
            out[0] = 0.0;
            return;
        };
        let period = 2 * m;
        self.buffer.iter_mut().for_each(|v| *v = Complex64::default());
        for b in 1..m {
            self.buffer[b] = Complex64::new(folded[b], 0.0);
            self.buffer[period - b] = Complex64::new(-folded[b], 0.0);
        }
        fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        // FFT of the odd extension equals -2i times the sine sum.
        for j in 1..m {
            out[j - 1] = -0.5 * self.buffer[j].im;
        }
        out[m - 1] = 0.0;
    }

    /// Field `Σ_k c_k e_k(y_j)` at `y_j = j/M`, `j = 1..=M`, with
    /// `e_k(y) = √2 sin(πky) exp(-η y/2)`.
    pub fn row(&mut self, coefficients: &[f64], eta: f64, out: &mut [f64]) {
        self.sine_sums(coefficients, out);
        self.apply_envelope(eta, out);
    }

    /// [`row`](Self::row) from pre-folded coefficients.
    pub fn row_folded(&mut self, folded: &[f64], eta: f64, out: &mut [f64]) {
        self.sine_sums_folded(folded, out);
        self.apply_envelope(eta, out);
    }

    fn apply_envelope(&mut self, eta: f64, out: &mut [f64]) {
        self.refresh_envelope(eta);
        for (v, w) in out.iter_mut().zip(&self.envelope) {
            *v *= w;
        }
    }

    fn refresh_envelope(&mut self, eta: f64) {
        if self.envelope_eta == Some(eta) {
            return;
        }
        let m = self.space_steps as f64;
        for (j, w) in self.envelope.iter_mut().enumerate() {
            let y = (j + 1) as f64 / m;
            *w = SQRT_2 * (-0.5 * eta * y).exp();
        }
        self.envelope_eta = Some(eta);
    }
}
