use nalgebra::Matrix2;
use num_complex::Complex64;

use super::blocks::GsmpBlockPair;
use super::lambda::{factor_fin, factor_inf, lambda_iso, Scalar};
use crate::error::{Error, Result};
use crate::spectral_sets::PotentialV;

fn product<T: Scalar>(z: T, pair: &GsmpBlockPair, poles: &[f64]) -> Matrix2<T> {
    let g = poles.len();
    let mut m = Matrix2::<T>::identity();
    for k in 0..g {
        m *= factor_fin(z, poles[k], pair.p[k], pair.q[k]);
    }
    m * factor_inf(z, pair.p[g], pair.q[g])
}

/// Transfer matrix `a(z, c_1; p_0, q_0) ... a(z, c_g; p_{g-1}, q_{g-1}) a(z; p_g, q_g)`.
pub fn transfer_matrix(z: Complex64, pair: &GsmpBlockPair, poles: &[f64]) -> Result<Matrix2<Complex64>> {
    pair.check_poles(poles)?;
    if let Some(&c) = poles.iter().find(|&&c| Complex64::new(c, 0.0) == z) {
        return Err(Error::AtPole(c));
    }
    if pair.pg() == 0.0 {
        return Err(Error::InvalidArgument("p_g = 0".into()));
    }
    Ok(product(z, pair, poles))
}

/// Maximum over `samples` of `|tr T(z) - V(z)| / (1 + |V(z)|)`.
pub fn trace_is_potential(
    pair: &GsmpBlockPair,
    poles: &[f64],
    v: &PotentialV,
    samples: &[Complex64],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &z in samples {
        let t = transfer_matrix(z, pair, poles)?.trace();
        let (vz, _) = v.eval(z)?;
        worst = worst.max((t - vz).norm() / (1.0 + vz.norm()));
    }
    Ok(worst)
}

/// Residue formula `lambda_k = [-q_{k-1}, p_{k-1}] prod_{j=k}^{g-1} a(c_k, c_{j+1})
/// a(c_k; p_g, q_g) prod_{j=0}^{k-2} a(c_k, c_{j+1}) [p_{k-1}; q_{k-1}]`.
pub fn residue_lambda(pair: &GsmpBlockPair, poles: &[f64], k: usize) -> Result<f64> {
    pair.check_poles(poles)?;
    let g = poles.len();
    if k == 0 || k > g {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={g}")));
    }
    let ck = poles[k - 1];
    let mut m = Matrix2::<f64>::identity();
    for j in k..g {
        m *= factor_fin(ck, poles[j], pair.p[j], pair.q[j]);
    }
    m *= factor_inf(ck, pair.p[g], pair.q[g]);
    for j in 0..k - 1 {
        m *= factor_fin(ck, poles[j], pair.p[j], pair.q[j]);
    }
    let (p, q) = (pair.p[k - 1], pair.q[k - 1]);
    let col = m * nalgebra::Vector2::new(p, q);
    Ok(-q * col[0] + p * col[1])
}

/// Numeric residue probe `lim (c_k - z) tr T(z)`, averaging `z = c_k +- h` to
/// cancel the first-order term.
pub fn numeric_residue(pair: &GsmpBlockPair, poles: &[f64], k: usize, h: f64) -> Result<f64> {
    pair.check_poles(poles)?;
    if k == 0 || k > poles.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", poles.len())));
    }
    let ck = poles[k - 1];
    let at = |z: f64| (ck - z) * product(z, pair, poles).trace();
    Ok(0.5 * (at(ck + h) + at(ck - h)))
}

/// `c0 = -sum_j p_j q_j / p_g`, the constant term of `tr T` at infinity.
pub fn c0_of_pair(pair: &GsmpBlockPair) -> f64 {
    -pair.p.iter().zip(&pair.q).map(|(p, q)| p * q).sum::<f64>() / pair.pg()
}

/// `|q_g + c0 - rhs|` where `rhs` is the trace sum
/// `-sum_k tr{ prod_{j<k-1} a(c_k, c_{j+1}) [p_{k-1}; q_{k-1}][-q_{k-1}, p_{k-1}]
/// prod_{j=k}^{g-1} a(c_k, c_{j+1}) diag(0, 1/p_g) }`.
pub fn q_g_alternative(pair: &GsmpBlockPair, poles: &[f64], c0: f64) -> Result<f64> {
    pair.check_poles(poles)?;
    let g = poles.len();
    let pg = pair.pg();
    if pg == 0.0 {
        return Err(Error::InvalidArgument("p_g = 0".into()));
    }
    let tail = Matrix2::new(0.0, 0.0, 0.0, 1.0 / pg);
    let mut rhs = 0.0;
    for k in 1..=g {
        let ck = poles[k - 1];
        let mut m = Matrix2::<f64>::identity();
        for j in 0..k - 1 {
            m *= factor_fin(ck, poles[j], pair.p[j], pair.q[j]);
        }
        let (p, q) = (pair.p[k - 1], pair.q[k - 1]);
        m *= Matrix2::new(-p * q, p * p, -q * q, p * q);
        for j in k..g {
            m *= factor_fin(ck, poles[j], pair.p[j], pair.q[j]);
        }
        rhs -= (m * tail).trace();
    }
    Ok((pair.qg() + c0 - rhs).abs())
}

/// Checks `residue_lambda == lambda_iso`; returns the relative difference.
pub fn residue_consistency(pair: &GsmpBlockPair, poles: &[f64], k: usize) -> Result<f64> {
    let a = residue_lambda(pair, poles, k)?;
    let b = lambda_iso(pair, poles, k)?;
    Ok((a - b).abs() / b.abs().max(1e-300))
}
