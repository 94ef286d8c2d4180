//! Minimal 2D FFT on row-major complex buffers, built on rustfft plans.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    m1: usize,
    m2: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(m1: usize, m2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            m1,
            m2,
            row_fwd: planner.plan_fft_forward(m2),
            row_inv: planner.plan_fft_inverse(m2),
            col_fwd: planner.plan_fft_forward(m1),
            col_inv: planner.plan_fft_inverse(m1),
        }
    }

    pub fn len(&self) -> usize {
        self.m1 * self.m2
    }

    fn pass(&self, data: &mut [Complex64], scratch: &mut [Complex64], forward: bool) {
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        data.par_chunks_exact_mut(self.m2)
            .for_each(|chunk| row.process(chunk));
        transpose(data, scratch, self.m1, self.m2);
        scratch
            .par_chunks_exact_mut(self.m1)
            .for_each(|chunk| col.process(chunk));
        transpose(scratch, data, self.m2, self.m1);
    }

    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.len());
        self.pass(data, scratch, true);
    }

    /// Inverse transform, normalized so that inverse(forward(x)) = x.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.pass(data, scratch, false);
        let norm = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= norm);
    }
}

/// Tiled out-of-place transpose of an r x c row-major matrix into c x r.
fn transpose(src: &[Complex64], dst: &mut [Complex64], r: usize, c: usize) {
    const TILE: usize = 64;
    for i0 in (0..r).step_by(TILE) {
        for j0 in (0..c).step_by(TILE) {
            for i in i0..(i0 + TILE).min(r) {
                for j in j0..(j0 + TILE).min(c) {
                    dst[j * r + i] = src[i * c + j];
                }
            }
        }
    }
}
