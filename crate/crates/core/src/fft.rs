use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse plan pair with its own scratch buffer.
///
/// The forward transform is unnormalized; [`FftPair::inverse`] divides by the
/// length so that `inverse(forward(x)) == x`.
pub(crate) struct FftPair {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl FftPair {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        FftPair {
            len,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn forward(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    pub(crate) fn inverse(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// FFT bin index of frequency bin `k` (signed, `-len/2 <= k < len/2`).
pub(crate) fn bin(k: i64, len: usize) -> usize {
    k.rem_euclid(len as i64) as usize
}

/// Signed frequency index of FFT bin `i`.
pub(crate) fn signed_index(i: usize, len: usize) -> i64 {
    if i < len.div_ceil(2) {
        i as i64
    } else {
        i as i64 - len as i64
    }
}

/// Angular frequencies (rad/s) of the FFT bins for a grid at `sample_rate`.
pub(crate) fn angular_frequencies(len: usize, sample_rate: f64) -> Vec<f64> {
    let df = sample_rate / len as f64;
    (0..len)
        .map(|i| 2.0 * std::f64::consts::PI * df * signed_index(i, len) as f64)
        .collect()
}
