use nalgebra::{ComplexField, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::blocks::{GsmpBlockPair, GsmpWindow};
use crate::error::{Error, Result};

/// Scalar type of 2x2 factor products: `f64` on the real axis, `Complex64` off it.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

#[inline]
fn re<T: Scalar>(x: f64) -> T {
    T::from_real(x)
}

/// `[p; q][p q] j` with `j = [[0, -1], [1, 0]]`, i.e. `[[pq, -p^2], [q^2, -pq]]`.
#[inline]
pub(crate) fn rank_one(pl: f64, ql: f64, pr: f64, qr: f64) -> Matrix2<f64> {
    Matrix2::new(pl * qr, -pl * pr, ql * qr, -ql * pr)
}

/// Finite factor `I - (c - z)^{-1} [p; q][p q] j`.
pub(crate) fn factor_fin<T: Scalar>(z: T, c: f64, p: f64, q: f64) -> Matrix2<T> {
    let w = T::one() / (re::<T>(c) - z);
    let r = rank_one(p, q, p, q).map(re::<T>);
    Matrix2::identity() - r * w
}

/// Factor at infinity `[[0, -p], [1/p, (z - pq)/p]]`.
pub(crate) fn factor_inf<T: Scalar>(z: T, p: f64, q: f64) -> Matrix2<T> {
    Matrix2::new(
        T::zero(),
        re(-p),
        re(1.0 / p),
        (z - re(p * q)) / re(p),
    )
}

/// Blaschke-Potapov factor `a(z, c; p, q)`; determinant one.
pub fn bp_factor_finite(z: Complex64, c: f64, p: f64, q: f64) -> Result<Matrix2<Complex64>> {
    if z == Complex64::new(c, 0.0) {
        return Err(Error::AtPole(c));
    }
    Ok(factor_fin(z, c, p, q))
}

/// Factor at infinity `a(z; p, q)`; determinant one.
pub fn bp_factor_infinity(z: Complex64, p: f64, q: f64) -> Result<Matrix2<Complex64>> {
    if p == 0.0 {
        return Err(Error::InvalidArgument("p = 0 in factor at infinity".into()));
    }
    Ok(factor_inf(z, p, q))
}

fn check_k(g: usize, k: usize) -> Result<()> {
    if k == 0 || k > g {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={g}")));
    }
    Ok(())
}

/// The ordered factor list of `Lambda#_k(left, right)` evaluated at `c_k`.
fn sharp_factors(
    left: &GsmpBlockPair,
    right: &GsmpBlockPair,
    poles: &[f64],
    k: usize,
) -> Vec<Matrix2<f64>> {
    let g = poles.len();
    let ck = poles[k - 1];
    let mut fs = Vec::with_capacity(g + 1);
    for m in 0..k - 1 {
        fs.push(factor_fin(ck, poles[m], left.p[m], left.q[m]));
    }
    fs.push(rank_one(left.p[k - 1], left.q[k - 1], right.p[k - 1], right.q[k - 1]));
    for m in k..g {
        fs.push(factor_fin(ck, poles[m], right.p[m], right.q[m]));
    }
    fs.push(factor_inf(ck, right.p[g], right.q[g]));
    fs
}

/// `Lambda#_k`: minus the trace of the factor product in which `left` plays
/// block `j + 1` (entries `0..k-1`) and `right` plays block `j` (entries
/// `k-1..g`).
pub fn lambda_sharp(
    left: &GsmpBlockPair,
    right: &GsmpBlockPair,
    poles: &[f64],
    k: usize,
) -> Result<f64> {
    left.check_poles(poles)?;
    right.check_poles(poles)?;
    check_k(poles.len(), k)?;
    if right.pg() == 0.0 {
        return Err(Error::InvalidArgument("p_g = 0".into()));
    }
    let prod = sharp_factors(left, right, poles, k)
        .into_iter()
        .fold(Matrix2::<f64>::identity(), |acc, f| acc * f);
    Ok(-prod.trace())
}

/// `Lambda_k(p, q) = Lambda#_k(pair, pair)`.
pub fn lambda_iso(pair: &GsmpBlockPair, poles: &[f64], k: usize) -> Result<f64> {
    lambda_sharp(pair, pair, poles, k)
}

/// All `Lambda_1..Lambda_g` of a pair.
pub fn lambda_all(pair: &GsmpBlockPair, poles: &[f64]) -> Result<Vec<f64>> {
    (1..=poles.len()).map(|k| lambda_iso(pair, poles, k)).collect()
}

/// Value and gradient of `Lambda_k(p, q)` with respect to all `p_m`, `q_m`,
/// `m = 0..=g`, by the product rule.
pub fn lambda_iso_grad(
    pair: &GsmpBlockPair,
    poles: &[f64],
    k: usize,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    pair.check_poles(poles)?;
    let g = poles.len();
    check_k(g, k)?;
    let ck = poles[k - 1];
    let fs = sharp_factors(pair, pair, poles, k);
    let mut dps = Vec::with_capacity(g + 1);
    let mut dqs = Vec::with_capacity(g + 1);
    for m in 0..=g {
        let (p, q) = (pair.p[m], pair.q[m]);
        let (dp, dq) = if m == g {
            (
                Matrix2::new(0.0, -1.0, -1.0 / (p * p), -ck / (p * p)),
                Matrix2::new(0.0, 0.0, 0.0, -1.0),
            )
        } else {
            let dnp = Matrix2::new(q, -2.0 * p, 0.0, -q);
            let dnq = Matrix2::new(p, 0.0, 2.0 * q, -p);
            if m == k - 1 {
                (dnp, dnq)
            } else {
                let w = 1.0 / (poles[m] - ck);
                (-dnp * w, -dnq * w)
            }
        };
        dps.push(dp);
        dqs.push(dq);
    }
    // prefix[m] = F_0 ... F_{m-1}, suffix[m] = F_{m+1} ... F_g
    let mut prefix = vec![Matrix2::<f64>::identity(); g + 2];
    for m in 0..=g {
        prefix[m + 1] = prefix[m] * fs[m];
    }
    let mut suffix = vec![Matrix2::<f64>::identity(); g + 2];
    for m in (0..=g).rev() {
        suffix[m] = fs[m] * suffix[m + 1];
    }
    let value = -prefix[g + 1].trace();
    let gp = (0..=g).map(|m| -(prefix[m] * dps[m] * suffix[m + 1]).trace()).collect();
    let gq = (0..=g).map(|m| -(prefix[m] * dqs[m] * suffix[m + 1]).trace()).collect();
    Ok((value, gp, gq))
}

/// Result of the class-membership check of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// `min Lambda#_{j,k}` over stored adjacent pairs and all `k`
    /// (`+inf` for genus zero).
    pub min_lambda_sharp: f64,
    /// Location `(j, k)` of that minimum.
    pub argmin: Option<(i64, usize)>,
    /// `min p_g^{(j)}` over stored blocks.
    pub min_pg: f64,
    pub argmin_pg: i64,
    pub margin: f64,
    pub certified: bool,
}

/// Computes `Lambda#_{j,k}` for every stored pair of adjacent blocks
/// `(j + 1, j)` and all `k`, and `p_g^{(j)}` for every block; certifies
/// membership when all exceed `margin`.
pub fn check_gsmp_class(w: &GsmpWindow, margin: f64) -> ClassReport {
    let g = w.genus();
    let mut min_ls = f64::INFINITY;
    let mut argmin = None;
    for j in w.lo()..w.hi() - 1 {
        let right = w.block(j).expect("stored");
        let left = w.block(j + 1).expect("stored");
        for k in 1..=g {
            let v = lambda_sharp(left, right, w.poles(), k).unwrap_or(f64::NEG_INFINITY);
            let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
            if v < min_ls {
                min_ls = v;
                argmin = Some((j, k));
            }
        }
    }
    let (argmin_pg, min_pg) = w
        .iter()
        .map(|(j, b)| (j, b.pg()))
        .fold((w.lo(), f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let certified = min_pg > margin && min_ls > margin;
    ClassReport { min_lambda_sharp: min_ls, argmin, min_pg, argmin_pg, margin, certified }
}
