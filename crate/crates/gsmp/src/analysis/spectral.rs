use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lanczos::lanczos;
use crate::error::{Error, Result};
use crate::flow::JacobiWindow;
use crate::gsmp::{assemble_window, GsmpWindow};
use crate::linalg::tridiag_eigen;
use crate::spectral_sets::{potential_preimage, IntervalSystem, PotentialV};

/// Spectral measure of a finite truncation: eigenvalues and squared first
/// components of the normalized eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
    /// Truncation size.
    pub n: usize,
}

impl SpectralData {
    pub fn from_tridiagonal(d: &[f64], e: &[f64]) -> Result<SpectralData> {
        let (eigenvalues, z) = tridiag_eigen(d, e)?;
        let weights = z.iter().map(|x| x * x).collect();
        Ok(SpectralData { eigenvalues, weights, n: d.len() })
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The measure `(1 - mass) sigma + mass delta_x`.
    pub fn with_point_mass(&self, x: f64, mass: f64) -> Result<SpectralData> {
        if !(0.0..1.0).contains(&mass) || !x.is_finite() {
            return Err(Error::InvalidArgument(format!("point mass {mass} at {x}")));
        }
        let mut pts: Vec<(f64, f64)> =
            self.eigenvalues.iter().zip(&self.weights).map(|(&l, &w)| (l, w * (1.0 - mass))).collect();
        pts.push((x, mass));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(SpectralData {
            eigenvalues: pts.iter().map(|p| p.0).collect(),
            weights: pts.iter().map(|p| p.1).collect(),
            n: self.n + 1,
        })
    }

    /// `(1/pi) sum_i w_i eps / ((lambda_i - x)^2 + eps^2)`, the imaginary part
    /// of the Stieltjes transform at `x + i eps` divided by `pi`.
    pub fn smoothed_density(&self, x: f64, eps: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w * eps / ((l - x) * (l - x) + eps * eps))
            .sum::<f64>()
            / std::f64::consts::PI
    }

    /// Total weight of eigenvalues within `radius` of any of `points`.
    pub fn mass_near(&self, points: &[f64], radius: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .filter(|(l, _)| points.iter().any(|c| (*l - c).abs() <= radius))
            .map(|(_, w)| w)
            .sum()
    }

    /// CSV with columns `eigenvalue,weight`.
    pub fn to_csv(&self) -> String {
        crate::io::csv(
            &["eigenvalue", "weight"],
            self.eigenvalues.iter().zip(&self.weights).map(|(&l, &w)| vec![l, w]),
        )
    }
}

/// Spectral data of the `n x n` truncation `[0, n)` of a Jacobi window with
/// cyclic vector `e_0`.
pub fn spectral_data_jacobi(j: &JacobiWindow, n: usize) -> Result<SpectralData> {
    let (d, e) = j.truncation(0, n as i64)?;
    SpectralData::from_tridiagonal(&d, &e)
}

/// Spectral data of `A_+` with cyclic vector `p_0 / ||p_0||`, from an
/// `n`-step Lanczos tridiagonalization of the truncation to the trusted
/// blocks `>= 0`. With `n` equal to the truncation dimension this is the
/// spectral measure of the truncation itself.
pub fn spectral_data_gsmp(w: &GsmpWindow, n: usize) -> Result<SpectralData> {
    let (_, t1) = w.trusted();
    if t1 <= 0 {
        return Err(Error::OutOfWindow(0));
    }
    let m = assemble_window(w, 0, t1)?;
    if n > m.dim() {
        return Err(Error::InvalidArgument(format!("n = {n} exceeds truncation size {}", m.dim())));
    }
    let mut start = vec![0.0; m.dim()];
    start[..w.block_size()].copy_from_slice(&w.block(0)?.p);
    let (alpha, beta) = lanczos(&m, &start, n)?;
    SpectralData::from_tridiagonal(&alpha, &beta)
}

/// The two terms of the spectral-side Killip-Simon functional for a finite
/// truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSide {
    pub n: usize,
    pub eps: f64,
    pub edge_delta: f64,
    /// `int_E' |log sigma'_eps(x)| sqrt(dist(x, R \ E)) dx` over `E` minus
    /// `edge_delta`-neighbourhoods of the band edges.
    pub ac_term: f64,
    /// `sum dist(x_k, E)^{3/2}` over eigenvalues outside `E`.
    pub ev_term: f64,
    /// Weight within `edge_delta` of each pole `c_j`, if recorded.
    #[serde(default)]
    pub mass_near_poles: Vec<f64>,
}


/// Quadrature nodes per band for the a.c. term.
pub const AC_NODES: usize = 4000;

pub fn ks_spectral_side(data: &SpectralData, e: &IntervalSystem, eps: f64, edge_delta: f64) -> Result<SpectralSide> {
    if !(eps > 0.0) || !(edge_delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps = {eps}, edge_delta = {edge_delta}")));
    }
    let mut ac = 0.0;
    for (l, r) in e.bands() {
        let (a, b) = (l + edge_delta, r - edge_delta);
        if b <= a {
            continue;
        }
        let h = (b - a) / AC_NODES as f64;
        let vals: Vec<f64> = (0..AC_NODES)
            .into_par_iter()
            .map(|i| {
                let x = a + (i as f64 + 0.5) * h;
                let s = data.smoothed_density(x, eps);
                s.ln().abs() * e.dist_to_complement(x).sqrt()
            })
            .collect();
        ac += vals.iter().sum::<f64>() * h;
    }
    let ev = data.eigenvalues.iter().map(|&x| e.dist(x).powf(1.5)).sum();
    Ok(SpectralSide { n: data.n, eps, edge_delta, ac_term: ac, ev_term: ev, mass_near_poles: Vec::new() })
}

/// [`ks_spectral_side`] with eigenvalues within `edge_delta` of any pole left
/// out of `ev_term`; the weight found near each pole is recorded instead.
pub fn ks_spectral_side_excluding(
    data: &SpectralData,
    e: &IntervalSystem,
    eps: f64,
    edge_delta: f64,
    poles: &[f64],
) -> Result<SpectralSide> {
    let mut side = ks_spectral_side(data, e, eps, edge_delta)?;
    side.ev_term = data
        .eigenvalues
        .iter()
        .filter(|&&x| poles.iter().all(|c| (x - c).abs() > edge_delta))
        .map(|&x| e.dist(x).powf(1.5))
        .sum();
    side.mass_near_poles = poles.iter().map(|&c| data.mass_near(&[c], edge_delta)).collect();
    Ok(side)
}

/// `(-1)^{g(g-1)/2} prod_{i<j} (c_i - c_j)(x_i - x_j) / prod_{i,j} (c_i - x_j)`.
pub fn cauchy_determinant_formula(c: &[f64], x: &[f64]) -> Result<f64> {
    let g = c.len();
    if x.len() != g {
        return Err(Error::Dimension(format!("{g} poles and {} points", x.len())));
    }
    let mut num = if (g * g.saturating_sub(1) / 2) % 2 == 1 { -1.0 } else { 1.0 };
    for i in 0..g {
        for j in i + 1..g {
            num *= (c[i] - c[j]) * (x[i] - x[j]);
        }
    }
    let mut den = 1.0;
    for &ci in c {
        for &xj in x {
            den *= ci - xj;
        }
    }
    Ok(num / den)
}

/// Relative difference between `det[1 / (c_i - x_j)]` by LU and the product formula.
pub fn cauchy_determinant_check(c: &[f64], x: &[f64]) -> Result<f64> {
    let formula = cauchy_determinant_formula(c, x)?;
    let g = c.len();
    let m = DMatrix::from_fn(g, g, |i, j| 1.0 / (c[i] - x[j]));
    let det = m.lu().determinant();
    Ok((det - formula).abs() / formula.abs().max(f64::MIN_POSITIVE))
}

/// Result of the matrix-density identity at one level `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCheck {
    pub preimages: Vec<f64>,
    pub det: f64,
    pub expected: f64,
    pub residual: f64,
}

/// Checks `det Sigma'(y) = prod_{V(x)=y} sigma'(x) / prod lambda_k` for the
/// pole part `V(x) = sum lambda_k / (c_k - x)` of `v`, where
/// `Sigma'(y) = sum_i W(x_i)^T sigma'(x_i) / V'(x_i) W(x_i)` and
/// `W(x) = [1/(c_1 - x) ... 1/(c_g - x)]`. `sigma` holds one density value
/// per preimage, in increasing order of the preimages.
pub fn matrix_density_check(v: &PotentialV, y: f64, sigma: &[f64]) -> Result<DensityCheck> {
    let red = v.pole_part();
    let g = red.genus();
    if g == 0 {
        return Err(Error::InvalidArgument("the identity needs genus >= 1".into()));
    }
    if !(y > -2.0 && y < 2.0) || y == 0.0 {
        return Err(Error::InvalidArgument(format!("level y = {y} must lie in (-2, 0) or (0, 2)")));
    }
    let xs = potential_preimage(&red, y)?;
    if sigma.len() != xs.len() {
        return Err(Error::Dimension(format!("{} density values for {} preimages", sigma.len(), xs.len())));
    }
    let poles = red.pole_positions();
    let mut s = DMatrix::<f64>::zeros(g, g);
    for (&x, &sg) in xs.iter().zip(sigma) {
        if poles.contains(&x) {
            return Err(Error::AtPole(x));
        }
        let (_, dv) = red.eval_real(x)?;
        let wv: Vec<f64> = poles.iter().map(|c| 1.0 / (c - x)).collect();
        for i in 0..g {
            for j in 0..g {
                s[(i, j)] += wv[i] * sg / dv * wv[j];
            }
        }
    }
    let det = s.lu().determinant();
    let expected = sigma.iter().product::<f64>() / red.residues().iter().product::<f64>();
    let residual = (det - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
    Ok(DensityCheck { preimages: xs, det, expected, residual })
}
