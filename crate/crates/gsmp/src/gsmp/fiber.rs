use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::blocks::{build_blocks, GsmpBlockPair};
use crate::error::{Error, Result};
use crate::spectral_sets::PotentialV;

/// Floquet fiber `M(theta) = B + e^{i theta} A + e^{-i theta} A^T` of the
/// constant-block periodic matrix.
pub fn floquet_fiber(pair: &GsmpBlockPair, poles: &[f64], theta: f64) -> Result<DMatrix<Complex64>> {
    let (a, b) = build_blocks(pair, poles)?;
    let ph = Complex64::from_polar(1.0, theta);
    let n = a.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(b[(i, j)], 0.0) + ph * a[(i, j)] + ph.conj() * a[(j, i)]
    }))
}

/// `||V(M(theta)) - 2 cos(theta) I||` (spectral norm) at one phase.
pub fn fiber_magic_deviation(
    pair: &GsmpBlockPair,
    poles: &[f64],
    v: &PotentialV,
    theta: f64,
) -> Result<f64> {
    let m = floquet_fiber(pair, poles, theta)?;
    let n = m.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut vm = &m * Complex64::new(v.lambda0, 0.0) + &id * Complex64::new(v.c0 - 2.0 * theta.cos(), 0.0);
    for &(l, c) in &v.poles {
        let shifted = &id * Complex64::new(c, 0.0) - &m;
        let inv = shifted.try_inverse().ok_or(Error::AtPole(c))?;
        if inv.iter().any(|x| !x.is_finite()) {
            return Err(Error::AtPole(c));
        }
        vm += inv * Complex64::new(l, 0.0);
    }
    Ok(vm.singular_values().max())
}

/// Maximum over `thetas` of the fiber deviation from the magic formula.
pub fn fiber_magic_check(
    pair: &GsmpBlockPair,
    poles: &[f64],
    v: &PotentialV,
    thetas: &[f64],
) -> Result<f64> {
    let devs: Vec<Result<f64>> =
        thetas.par_iter().map(|&t| fiber_magic_deviation(pair, poles, v, t)).collect();
    devs.into_iter().try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// `count` equally spaced phases in `[0, 2 pi)`.
pub fn theta_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| 2.0 * std::f64::consts::PI * i as f64 / count as f64).collect()
}

/// Sorted eigenvalues of `M(theta)`.
pub fn fiber_spectrum(pair: &GsmpBlockPair, poles: &[f64], theta: f64) -> Result<Vec<f64>> {
    let m = floquet_fiber(pair, poles, theta)?;
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Band edges of the periodic matrix: the union of the spectra of `M(0)`
/// and `M(pi)`, sorted.
pub fn fiber_band_edges(pair: &GsmpBlockPair, poles: &[f64]) -> Result<Vec<f64>> {
    let mut e = fiber_spectrum(pair, poles, 0.0)?;
    e.extend(fiber_spectrum(pair, poles, std::f64::consts::PI)?);
    e.sort_by(f64::total_cmp);
    Ok(e)
}
