//! Cubic 3D FFTs built from rustfft line transforms.
//!
//! Buffers are row-major `(i * m + j) * m + k` with `k` contiguous. The
//! `*_low_octant` variants skip lines that are known to be zero on input
//! (forward) or not needed on output (inverse) when data lives in the
//! `[0, m/2)^3` corner of a zero-padded cube.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft3 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("m", &self.m).finish()
    }
}

#[derive(Clone, Copy)]
enum Dir {
    Forward,
    Inverse,
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        let m = self.m;
        self.axis2(data, Dir::Forward, m, m);
        self.axis1(data, Dir::Forward, m);
        self.axis0(data, Dir::Forward);
    }

    /// Unnormalized inverse transform (no 1/m^3 factor).
    pub fn inverse(&self, data: &mut [Complex64]) {
        let m = self.m;
        self.axis0(data, Dir::Inverse);
        self.axis1(data, Dir::Inverse, m);
        self.axis2(data, Dir::Inverse, m, m);
    }

    /// Forward transform of data supported in the low octant.
    pub fn forward_low_octant(&self, data: &mut [Complex64]) {
        let h = self.m / 2;
        self.axis2(data, Dir::Forward, h, h);
        self.axis1(data, Dir::Forward, h);
        self.axis0(data, Dir::Forward);
    }

    /// Inverse transform that is only correct on the low octant.
    pub fn inverse_low_octant(&self, data: &mut [Complex64]) {
        let h = self.m / 2;
        self.axis0(data, Dir::Inverse);
        self.axis1(data, Dir::Inverse, h);
        self.axis2(data, Dir::Inverse, h, h);
    }

    fn plan(&self, dir: Dir) -> &Arc<dyn Fft<f64>> {
        match dir {
            Dir::Forward => &self.fwd,
            Dir::Inverse => &self.inv,
        }
    }

    /// Transform along k for planes i < ni and rows j < nj.
    fn axis2(&self, data: &mut [Complex64], dir: Dir, ni: usize, nj: usize) {
        let m = self.m;
        let fft = self.plan(dir);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for i in 0..ni {
            let start = i * m * m;
            fft.process_with_scratch(&mut data[start..start + nj * m], &mut scratch);
        }
    }

    /// Transform along j on planes i < ni, all columns.
    fn axis1(&self, data: &mut [Complex64], dir: Dir, ni: usize) {
        let m = self.m;
        let fft = self.plan(dir);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut lines = vec![Complex64::default(); m * m];
        for i in 0..ni {
            let plane = &mut data[i * m * m..(i + 1) * m * m];
            for j in 0..m {
                for k in 0..m {
                    lines[k * m + j] = plane[j * m + k];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for j in 0..m {
                for k in 0..m {
                    plane[j * m + k] = lines[k * m + j];
                }
            }
        }
    }

    /// Transform along i for every (j, k).
    fn axis0(&self, data: &mut [Complex64], dir: Dir) {
        let m = self.m;
        let fft = self.plan(dir);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut lines = vec![Complex64::default(); m * m];
        for j in 0..m {
            for i in 0..m {
                let row = (i * m + j) * m;
                for k in 0..m {
                    lines[k * m + i] = data[row + k];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for i in 0..m {
                let row = (i * m + j) * m;
                for k in 0..m {
                    data[row + k] = lines[k * m + i];
                }
            }
        }
    }
}
