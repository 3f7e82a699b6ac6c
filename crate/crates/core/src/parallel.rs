//! Reductions whose result does not depend on the rayon thread count.
//!
//! Work is split into fixed-size chunks, partial results are collected in
//! chunk order and combined sequentially, so the floating-point summation
//! order is identical for any pool size.

use num_complex::Complex64;
use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

pub(crate) fn sum_f64<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partial: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&f).sum()
        })
        .collect();
    partial.iter().sum()
}

/// Real inner product `Σ Re(conj(a)·b)` of two complex vectors.
pub(crate) fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_f64(a.len(), |i| a[i].re * b[i].re + a[i].im * b[i].im)
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    sum_f64(a.len(), |i| a[i].norm_sqr())
}

pub(crate) fn sum_c64<F>(len: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let partial: Vec<Complex64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            (lo..hi).map(&f).sum()
        })
        .collect();
    partial.iter().sum()
}

/// Hermitian inner product `Σ conj(a)·b`.
pub(crate) fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    sum_c64(a.len(), |i| a[i].conj() * b[i])
}
