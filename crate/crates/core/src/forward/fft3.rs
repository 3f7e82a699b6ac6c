//! 3-D FFT built from 1-D rustfft plans, pruned for inputs and outputs that
//! are confined to a sub-box.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Half-open index box `lo..hi` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn full(n: [usize; 3]) -> Self {
        Self { lo: [0; 3], hi: n }
    }
}

#[derive(Clone, Copy)]
struct SharedPtr(*mut Complex64);
// SAFETY: used only to write disjoint index sets from parallel tasks.
unsafe impl Send for SharedPtr {}
unsafe impl Sync for SharedPtr {}

pub struct Fft3 {
    n: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(n: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [0, 1, 2].map(|a| planner.plan_fft_forward(n[a]));
        let inverse = [0, 1, 2].map(|a| planner.plan_fft_inverse(n[a]));
        Self { n, forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    /// Unnormalised forward transform of data that vanishes outside `support`.
    pub fn forward(&self, data: &mut [Complex64], support: IndexBox) {
        self.pass_x(data, support, &self.forward[0]);
        self.pass_y(data, support.lo[2]..support.hi[2], &self.forward[1]);
        self.pass_z(data, &self.forward[2]);
    }

    /// Unnormalised inverse transform; only values inside `wanted` are exact.
    pub fn inverse(&self, data: &mut [Complex64], wanted: IndexBox) {
        self.pass_z(data, &self.inverse[2]);
        self.pass_y(data, wanted.lo[2]..wanted.hi[2], &self.inverse[1]);
        self.pass_x(data, wanted, &self.inverse[0]);
    }

    fn pass_x(&self, data: &mut [Complex64], b: IndexBox, plan: &Arc<dyn Fft<f64>>) {
        let [nx, ny, _] = self.n;
        let (lo_y, hi_y) = (b.lo[1], b.hi[1]);
        if hi_y <= lo_y {
            return;
        }
        data.par_chunks_mut(nx * ny)
            .enumerate()
            .filter(|(l, _)| (b.lo[2]..b.hi[2]).contains(l))
            .for_each(|(_, layer)| {
                let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                plan.process_with_scratch(&mut layer[lo_y * nx..hi_y * nx], &mut scratch);
            });
    }

    fn pass_y(&self, data: &mut [Complex64], layers: std::ops::Range<usize>, plan: &Arc<dyn Fft<f64>>) {
        let [nx, ny, _] = self.n;
        data.par_chunks_mut(nx * ny)
            .enumerate()
            .filter(|(l, _)| layers.contains(l))
            .for_each(|(_, layer)| {
                let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
                let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                transpose(layer, &mut t, ny, nx);
                plan.process_with_scratch(&mut t, &mut scratch);
                transpose(&t, layer, nx, ny);
            });
    }

    fn pass_z(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let [nx, ny, nz] = self.n;
        let plane = nx * ny;
        let ptr = SharedPtr(data.as_mut_ptr());
        let len = data.len();
        (0..ny).into_par_iter().for_each(|s| {
            let ptr = ptr;
            let mut rows = vec![Complex64::new(0.0, 0.0); nz * nx];
            let mut t = vec![Complex64::new(0.0, 0.0); nz * nx];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            // SAFETY: task `s` touches exactly the indices `l·plane + s·nx + j`,
            // which are disjoint across `s` and lie inside `data`.
            unsafe {
                for l in 0..nz {
                    let off = l * plane + s * nx;
                    debug_assert!(off + nx <= len);
                    std::ptr::copy_nonoverlapping(ptr.0.add(off), rows.as_mut_ptr().add(l * nx), nx);
                }
            }
            transpose(&rows, &mut t, nz, nx);
            plan.process_with_scratch(&mut t, &mut scratch);
            transpose(&t, &mut rows, nx, nz);
            unsafe {
                for l in 0..nz {
                    let off = l * plane + s * nx;
                    std::ptr::copy_nonoverlapping(rows.as_ptr().add(l * nx), ptr.0.add(off), nx);
                }
            }
        });
    }
}

/// `dst[c][r] = src[r][c]` for a `rows × cols` row-major `src`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
