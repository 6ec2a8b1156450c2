//! FFT plumbing for periodic grids.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// In-place transform of every line along `axis`. The inverse is normalized.
pub(crate) fn fft_axis(values: &mut [Complex64], grid: &Grid, axis: usize, forward: bool) {
    let n = grid.points()[axis];
    let stride = grid.stride(axis);
    let fft = plan(n, forward);
    let norm = if forward { 1.0 } else { 1.0 / n as f64 };

    if stride == 1 {
        fft.process(values);
        if !forward {
            values.iter_mut().for_each(|z| *z *= norm);
        }
        return;
    }

    let block = n * stride;
    let mut line = vec![Complex64::default(); n];
    for start in (0..values.len()).step_by(block) {
        for offset in 0..stride {
            let base = start + offset;
            for (k, z) in line.iter_mut().enumerate() {
                *z = values[base + k * stride];
            }
            fft.process(&mut line);
            for (k, z) in line.iter().enumerate() {
                values[base + k * stride] = *z * norm;
            }
        }
    }
}

pub(crate) fn fft_all(values: &mut [Complex64], grid: &Grid, forward: bool) {
    for axis in 0..grid.dim() {
        fft_axis(values, grid, axis, forward);
    }
}

/// Index of the Nyquist mode along an axis, if the point count is even.
pub(crate) fn nyquist(n: usize) -> Option<usize> {
    (n % 2 == 0).then_some(n / 2)
}

/// Applies a per-mode multiplier along one axis in Fourier space.
pub(crate) fn apply_axis_multiplier(
    values: &mut [Complex64],
    grid: &Grid,
    axis: usize,
    multiplier: &[Complex64],
) {
    let n = grid.points()[axis];
    let stride = grid.stride(axis);
    for (i, z) in values.iter_mut().enumerate() {
        let k = (i / stride) % n;
        *z *= multiplier[k];
    }
}

/// Spectral first derivative along `axis` of a complex field's samples.
pub(crate) fn derivative(values: &[Complex64], grid: &Grid, axis: usize) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    fft_axis(&mut buf, grid, axis, true);
    let n = grid.points()[axis];
    let mut mult: Vec<Complex64> = grid
        .wavenumbers(axis)
        .into_iter()
        .map(|k| Complex64::new(0.0, k))
        .collect();
    if let Some(nq) = nyquist(n) {
        mult[nq] = Complex64::default();
    }
    apply_axis_multiplier(&mut buf, grid, axis, &mult);
    fft_axis(&mut buf, grid, axis, false);
    buf
}

/// Spectral Laplacian of a complex field's samples.
pub(crate) fn laplacian(values: &[Complex64], grid: &Grid) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    fft_all(&mut buf, grid, true);
    let k2 = squared_wavenumbers(grid);
    for (z, k2) in buf.iter_mut().zip(&k2) {
        *z *= -k2;
    }
    fft_all(&mut buf, grid, false);
    buf
}

/// |k|² for every Fourier mode, in flat FFT order.
pub(crate) fn squared_wavenumbers(grid: &Grid) -> Vec<f64> {
    let ks: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.wavenumbers(a)).collect();
    (0..grid.len())
        .map(|i| {
            let idx = grid.unravel(i);
            (0..grid.dim()).map(|a| ks[a][idx[a]].powi(2)).sum()
        })
        .collect()
}

/// Translates samples by `displacement` (result(x) = input(x − displacement)).
pub(crate) fn shift(values: &[Complex64], grid: &Grid, displacement: [f64; 3]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    fft_all(&mut buf, grid, true);
    for axis in 0..grid.dim() {
        let d = displacement[axis];
        if d == 0.0 {
            continue;
        }
        let n = grid.points()[axis];
        let mut mult: Vec<Complex64> = grid
            .wavenumbers(axis)
            .into_iter()
            .map(|k| Complex64::from_polar(1.0, -k * d))
            .collect();
        // The Nyquist mode is its own conjugate; only the real part of its
        // phase factor keeps real fields real.
        if let Some(nq) = nyquist(n) {
            let k = std::f64::consts::PI / grid.spacing(axis);
            mult[nq] = Complex64::new((k * d).cos(), 0.0);
        }
        apply_axis_multiplier(&mut buf, grid, axis, &mult);
    }
    fft_all(&mut buf, grid, false);
    buf
}
