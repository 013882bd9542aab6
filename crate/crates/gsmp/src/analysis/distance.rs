use rayon::prelude::*;

use super::lanczos::lanczos_f;
use crate::error::{Error, Result};
use crate::flow::JacobiWindow;
use crate::isospectral::{build_periodic, IsoPoint};
use crate::spectral_sets::PotentialV;

/// Weighted distance `(sum_n (|a(n) - a~(n)|^2 + |b(n) - b~(n)|^2) eta^{2(n - n0)})^{1/2}`
/// over the common index range starting at `n0`.
pub fn dist_eta(j1: &JacobiWindow, j2: &JacobiWindow, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} outside (0, 1)")));
    }
    if j1.start != j2.start {
        return Err(Error::InvalidArgument(format!(
            "windows start at {} and {}",
            j1.start, j2.start
        )));
    }
    let n = j1.len().min(j2.len());
    let mut s = 0.0;
    let mut wgt = 1.0;
    for i in 0..n {
        let da = j1.a[i] - j2.a[i];
        let db = j1.b[i] - j2.b[i];
        s += (da * da + db * db) * wgt;
        wgt *= eta * eta;
    }
    Ok(s.sqrt())
}

/// Smallest [`dist_eta`] from `j` to the samples; an upper bound for the
/// distance to the isospectral set.
pub fn dist_to_isospectral(j: &JacobiWindow, samples: &[JacobiWindow], eta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample list".into()));
    }
    samples
        .iter()
        .map(|s| dist_eta(j, s, eta))
        .try_fold(f64::INFINITY, |m, d| d.map(|d| m.min(d)))
}

/// One-sided Jacobi windows `n >= 0` of `F` applied to the periodic matrices
/// of the torus points, together with their shifts by `1..shifts`, rebased
/// to start at 0. Each window has `len` entries.
pub fn torus_jacobi_samples(
    points: &[IsoPoint],
    v: &PotentialV,
    len: usize,
    shifts: usize,
) -> Result<Vec<JacobiWindow>> {
    let depth = len + shifts + 1;
    let per_point: Vec<Result<Vec<JacobiWindow>>> = points
        .par_iter()
        .map(|pt| {
            let w = build_periodic(pt, v, depth + 1)?;
            let j = lanczos_f(&w, depth)?;
            (0..=shifts)
                .map(|k| {
                    let k = k as i64;
                    let a = (k..k + len as i64).map(|n| j.a_at(n).expect("in range")).collect();
                    let b = (k..k + len as i64).map(|n| j.b_at(n).expect("in range")).collect();
                    JacobiWindow::new(0, a, b)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_point {
        out.extend(r?);
    }
    Ok(out)
}
